"""Random-hyperplane rounding, cut values and a brute-force oracle.

Cut values are single-counted: the weight of edges whose endpoints get
different signs.

Randomness: trial ``t`` of a run seeded with ``seed`` draws from
``Generator(PCG64(SeedSequence(seed).spawn(trials)[t]))``.  Standard normals
come from the Marsaglia polar method applied to that generator's uniform
doubles, in batches of ``2 * n`` candidate pairs, so the stream is fixed by
this module rather than by numpy's internal Gaussian sampler.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from .arith import to_float
from .graph import Graph, total_weight, weight_matrix
from .linalg import psd_factor

BRUTE_FORCE_MAX_N = 22


@dataclass(frozen=True)
class CutResult:
    assignment: Tuple[int, ...]
    cut: float
    trials: int
    seed: int
    mean_cut: float
    best_over_trials: bool = True

    def to_json(self) -> dict:
        return {
            "assignment": list(self.assignment),
            "cut": self.cut,
            "trials": self.trials,
            "seed": self.seed,
            "mean_cut": self.mean_cut,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


def _check_assignment(g: Graph, x) -> np.ndarray:
    x = np.asarray(x)
    if x.shape != (g.n,):
        raise ValueError(f"assignment has length {x.size}, graph has {g.n} vertices")
    if not np.all((x == 1) | (x == -1)):
        raise ValueError("assignment entries must be +1 or -1")
    return x.astype(np.int64)


def cut_value(g: Graph, x) -> int:
    x = _check_assignment(g, x)
    return int(sum(w for u, v, w in g.edges if x[u] != x[v]))


def sdp_cut_bound(g: Graph, X) -> float:
    """``(total_weight - Tr(C X)) / 4``."""
    C = weight_matrix(g)
    return (total_weight(g) - float(np.sum(C * to_float(X)))) / 4.0


def standard_normals(rng: np.random.Generator, size: int) -> np.ndarray:
    """``size`` i.i.d. N(0, 1) draws by the Marsaglia polar method."""
    out = np.empty(size)
    filled = 0
    batch = max(size, 1)
    while filled < size:
        u = 2.0 * rng.random((batch, 2)) - 1.0
        s = np.einsum("ij,ij->i", u, u)
        ok = (s > 0.0) & (s < 1.0)
        u, s = u[ok], s[ok]
        f = np.sqrt(-2.0 * np.log(s) / s)
        z = (u * f[:, None]).ravel()
        take = min(z.size, size - filled)
        out[filled:filled + take] = z[:take]
        filled += take
    return out


def trial_generators(seed: int, trials: int) -> List[np.random.Generator]:
    children = np.random.SeedSequence(seed).spawn(trials)
    return [np.random.Generator(np.random.PCG64(c)) for c in children]


def hyperplane_round(V: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """``x_i = sign(V_i . r)`` for a Gaussian ``r``; a zero product maps to +1."""
    V = np.asarray(V, dtype=np.float64)
    r = standard_normals(rng, V.shape[1])
    return np.where(V @ r >= 0.0, 1, -1).astype(np.int64)


def best_of_rounds(g: Graph, X, trials: int, seed: int) -> CutResult:
    """Best cut over ``trials`` hyperplanes; the first best wins ties."""
    if trials < 1:
        raise ValueError("trials must be at least 1")
    V = psd_factor(X)
    best_x, best_cut, total = None, None, 0
    for rng in trial_generators(seed, trials):
        x = hyperplane_round(V, rng)
        c = cut_value(g, x)
        total += c
        if best_cut is None or c > best_cut:
            best_x, best_cut = x, c
    return CutResult(
        assignment=tuple(int(v) for v in best_x),
        cut=best_cut,
        trials=trials,
        seed=seed,
        mean_cut=total / trials,
    )


def brute_force_maxcut(g: Graph, max_n: int = BRUTE_FORCE_MAX_N) -> Tuple[int, Tuple[int, ...]]:
    """Exact maximum cut by enumeration with ``x_1 = +1`` fixed.

    Among optimal assignments the lexicographically smallest is returned
    (-1 sorts before +1).
    """
    n = g.n
    if n > max_n:
        raise ValueError(f"brute force limited to n <= {max_n}, got {n}")
    if n == 0:
        return 0, ()
    C = weight_matrix(g).astype(np.int64)
    W = int(C.sum())
    free = n - 1
    # bit (free - 1 - j) of the index sets vertex j + 1; 0 -> -1, so ascending
    # indices enumerate assignments in lexicographic order
    shifts = np.arange(free - 1, -1, -1, dtype=np.int64)
    best_val, best_idx = None, 0
    chunk = 1 << 16
    for start in range(0, 1 << free, chunk):
        idx = np.arange(start, min(start + chunk, 1 << free), dtype=np.int64)
        bits = (idx[:, None] >> shifts[None, :]) & 1
        x = np.empty((idx.size, n), dtype=np.int64)
        x[:, 0] = 1
        x[:, 1:] = 2 * bits - 1
        quad = np.einsum("ij,ij->i", x @ C, x)
        vals = (W - quad) // 4
        j = int(np.argmax(vals))
        if best_val is None or vals[j] > best_val:
            best_val, best_idx = int(vals[j]), int(idx[j])
    x = [1] + [1 if (best_idx >> int(s)) & 1 else -1 for s in shifts]
    return best_val, tuple(x)
