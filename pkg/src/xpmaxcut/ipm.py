"""Primal barrier interior point method for the Max-Cut SDP.

    minimise Tr(C X)  subject to  X_ii = 1,  X PSD

Each Newton step solves the normal equations ``(X o X) y = diag(XCX) - mu diag(X)``
with conjugate gradients, forms ``Z = C - diag(y)`` and the primal direction
``D = X - (X Z X) / mu``, then shrinks the barrier by ``eta``.  Two safeguards
keep the iterates inside the cone: ``alpha`` halving on the primal step and a
damped dual update when ``Z`` is not positive definite.  Both are recorded per
step, so a run with ``alpha = beta = 1`` throughout is the undamped method.

A damped primal step (``alpha < 1``) means the iterate has fallen behind the
barrier target.  By default ``mu`` is then held for one step instead of
shrunk; on sparse graphs with degree-1 vertices the pure geometric schedule
otherwise races ahead of the iterate and stalls with an infeasible dual.
``hold_mu=False`` restores the plain schedule ``mu_k = mu_0 * eta**k``.
"""

from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import asdict, dataclass, field
from typing import List, Optional, TextIO, Tuple

import gmpy2
import numpy as np

from . import linalg
from .arith import PrecisionContext, make_context, promote, scalar, to_float
from .cg import CGConfig, CGReport, cg_solve
from .graph import Graph, weight_matrix

STATUS_CONVERGED = "converged"
STATUS_ITERATION_LIMIT = "iteration-limit"
STATUS_STEP_FAILURE = "step-failure"

TRACE_FIELDS = ("k", "mu", "rp", "rd", "gap", "cg_iters", "kappa", "alpha", "wall_s")


class StepFailure(RuntimeError):
    pass


@dataclass(frozen=True)
class SDPProblem:
    """Max-Cut SDP data: symmetric zero-diagonal ``C``; constraints ``X_ii = 1``."""

    C: np.ndarray

    def __post_init__(self):
        C = np.asarray(self.C, dtype=np.float64)
        if C.ndim != 2 or C.shape[0] != C.shape[1]:
            raise ValueError("C must be square")
        if not np.array_equal(C, C.T):
            raise ValueError("C must be symmetric")
        if np.any(np.diag(C) != 0):
            raise ValueError("C must have a zero diagonal")
        object.__setattr__(self, "C", C)

    @property
    def n(self) -> int:
        return self.C.shape[0]

    @classmethod
    def from_graph(cls, g: Graph) -> "SDPProblem":
        return cls(weight_matrix(g))


@dataclass(frozen=True)
class IPMConfig:
    tol_sdp: float = 0.005
    tol_cg: float = 1e-14
    theta: Optional[float] = None
    eta: float = 0.6
    bits: int = 64
    max_iter: int = 200
    max_backtracks: int = 30
    cg_max_iter: Optional[int] = None
    estimate_kappa: bool = True
    hold_mu: bool = True

    def __post_init__(self):
        if not 0.0 < self.eta < 1.0:
            raise ValueError("eta must lie in (0, 1)")
        if not self.tol_sdp > 0.0:
            raise ValueError("tol_sdp must be positive")
        if not self.tol_cg > 0.0:
            raise ValueError("tol_cg must be positive")
        if self.theta is not None and not self.theta > 0.0:
            raise ValueError("theta must be positive")
        if self.max_iter < 0 or self.max_backtracks < 0:
            raise ValueError("iteration caps must be non-negative")
        make_context(self.bits)

    @property
    def ctx(self) -> PrecisionContext:
        return make_context(self.bits)

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class IPMState:
    X: np.ndarray
    y: np.ndarray
    S: np.ndarray
    mu: object
    k: int = 0


@dataclass
class StepRecord:
    k: int
    mu: float
    rp: float
    rd: float
    gap: float
    cg_iters: int
    kappa: float
    alpha: float
    wall_s: float
    beta: float = 1.0
    cg_converged: bool = True

    def row(self) -> dict:
        return {name: getattr(self, name) for name in TRACE_FIELDS}


@dataclass
class SolveResult:
    X: np.ndarray
    y: np.ndarray
    S: np.ndarray
    mu: float
    trace: List[StepRecord]
    status: str
    rp: float
    rd: float
    gap: float
    objective: float
    bits: int
    message: str = ""

    @property
    def converged(self) -> bool:
        return self.status == STATUS_CONVERGED

    @property
    def total_cg_iterations(self) -> int:
        return sum(r.cg_iters for r in self.trace)


def _identity(n: int, ctx: PrecisionContext) -> np.ndarray:
    return promote(np.eye(n), ctx)


def _diag_shift(C: np.ndarray, y: np.ndarray, ctx: PrecisionContext) -> np.ndarray:
    """``C - diag(y)`` at ``ctx``; off-diagonal entries keep their storage values."""
    if ctx.native:
        return C - np.diag(to_float(y))
    Z = C.astype(object)
    with ctx.active():
        for i in range(len(y)):
            Z[i, i] = Z[i, i] - y[i]
    return Z


def _trace_product(C: np.ndarray, X: np.ndarray, ctx: PrecisionContext):
    """``Tr(C X)`` for symmetric ``C`` as the row-major sum of ``C o X``."""
    if ctx.native:
        return float(np.sum(C * X))
    rows, cols = np.nonzero(C)
    with ctx.active():
        acc = gmpy2.mpfr(0)
        for i, j in zip(rows, cols):
            acc = acc + C[i, j] * X[i, j]
    return acc


def _sum(v: np.ndarray, ctx: PrecisionContext):
    if ctx.native:
        return float(np.sum(v))
    with ctx.active():
        acc = gmpy2.mpfr(0)
        for x in v:
            acc = acc + x
    return acc


def init_state(problem: SDPProblem, config: IPMConfig) -> IPMState:
    ctx = config.ctx
    n = problem.n
    C = problem.C
    y0 = -(np.abs(C).sum(axis=1) + 1.0)  # integer-valued, exact in float64
    y = promote(y0, ctx)
    X = _identity(n, ctx)
    S = _diag_shift(C, y, ctx)
    if config.theta is not None:
        mu = scalar(config.theta, ctx) / n if n else scalar(config.theta, ctx)
    elif n == 0:
        mu = scalar(1, ctx)
    else:
        # Tr(I S0) = -sum(y0), an integer
        mu = scalar(-float(np.sum(y0)), ctx) / n
    return IPMState(X=X, y=y, S=S, mu=mu, k=0)


def residuals(state: IPMState, problem: SDPProblem, ctx: Optional[PrecisionContext] = None):
    """``r_p = 1 - diag(X)``, ``r_d = C - diag(y) - S``, ``e_g = Tr(CX) - sum(y)``."""
    ctx = ctx or _ctx_of(state)
    X, y, S = state.X, state.y, state.S
    if ctx.native:
        rp = 1.0 - np.diag(X)
        rd = _diag_shift(problem.C, y, ctx) - S
        gap = _trace_product(problem.C, X, ctx) - float(np.sum(y))
        return rp, rd, gap
    with ctx.active():
        one = gmpy2.mpfr(1)
        rp = np.array([one - X[i, i] for i in range(problem.n)], dtype=object)
        rd = _diag_shift(problem.C, y, ctx) - S
        gap = _trace_product(problem.C, X, ctx) - _sum(y, ctx)
    return rp, rd, gap


def residual_norms(state: IPMState, problem: SDPProblem, ctx=None) -> Tuple[float, float, float]:
    rp, rd, gap = residuals(state, problem, ctx)
    return (
        float(np.linalg.norm(to_float(rp))),
        float(np.linalg.norm(to_float(rd))),
        float(gap),
    )


def _ctx_of(state: IPMState) -> PrecisionContext:
    X = state.X
    if X.dtype != object:
        return make_context(64)
    return make_context(next(v for v in X.flat if isinstance(v, gmpy2.mpfr)).precision)


def newton_step(state: IPMState, problem: SDPProblem, config: IPMConfig):
    """One Newton direction; returns ``(y_next, Z, D, cg_report, M)``.

    ``M`` is rounded to 64-bit storage before CG, the right-hand side stays at
    the working precision.  Raises :class:`StepFailure` on a CG breakdown.
    """
    ctx = config.ctx
    X, mu = state.X, state.mu
    M = to_float(linalg.normal_matrix(X, ctx))
    rhs = linalg.newton_rhs(X, problem.C, mu, ctx)
    cfg = CGConfig(tol=config.tol_cg, max_iter=config.cg_max_iter, ctx=ctx)
    y_next, report = cg_solve(M, rhs, cfg)
    if report.breakdown:
        raise StepFailure(f"CG breakdown after {report.iterations} iterations")
    Z = _diag_shift(problem.C, y_next, ctx)
    T = linalg.congruence(X, Z, ctx)
    if ctx.native:
        D = X - T / mu
    else:
        with ctx.active():
            D = X - T / mu
    return y_next, Z, D, report, M


def _combine(A, B, t, ctx):
    """``A + t * B``."""
    if ctx.native:
        return A + t * B
    with ctx.active():
        return A + gmpy2.mpfr(t) * B


def apply_step(state: IPMState, y_next, Z, D, config: IPMConfig) -> Tuple[IPMState, float, float]:
    """Backtracked primal update, damped dual update, barrier shrink.

    ``mu`` is held instead of shrunk when ``alpha < 1`` and ``config.hold_mu``.

    Returns the new state with the applied ``alpha`` and ``beta``.
    """
    ctx = config.ctx
    alpha = 1.0
    for _ in range(config.max_backtracks + 1):
        X_next = _combine(state.X, D, alpha, ctx)
        if linalg.is_positive_definite(X_next, ctx):
            break
        alpha /= 2.0
    else:
        raise StepFailure(f"no step keeps X positive definite after {config.max_backtracks} halvings")

    if linalg.is_positive_definite(Z, ctx):
        S_next, beta = Z, 1.0
    else:
        if ctx.native:
            dS = Z - state.S
        else:
            with ctx.active():
                dS = Z - state.S
        beta = 0.5
        S_next = state.S
        for _ in range(config.max_backtracks):
            cand = _combine(state.S, dS, beta, ctx)
            if linalg.is_positive_definite(cand, ctx):
                S_next = cand
                break
            beta /= 2.0
        else:
            beta = 0.0
    if config.hold_mu and alpha < 1.0:
        mu_next = state.mu
    elif ctx.native:
        mu_next = state.mu * config.eta
    else:
        with ctx.active():
            mu_next = state.mu * gmpy2.mpfr(config.eta)
    return IPMState(X=X_next, y=y_next, S=S_next, mu=mu_next, k=state.k + 1), alpha, beta


def solve(problem: SDPProblem, config: IPMConfig = IPMConfig(), progress=None) -> SolveResult:
    """Run Newton steps until ``max(|r_p|_2, |r_d|_F, |e_g|) <= tol_sdp``.

    ``progress``, if given, is called with each :class:`StepRecord`.
    """
    ctx = config.ctx
    state = init_state(problem, config)
    trace: List[StepRecord] = []
    status, message = STATUS_ITERATION_LIMIT, ""
    while True:
        rp, rd, gap = residual_norms(state, problem, ctx)
        if max(rp, rd, abs(gap)) <= config.tol_sdp:
            status = STATUS_CONVERGED
            break
        if state.k >= config.max_iter:
            break
        t0 = time.perf_counter()
        try:
            y_next, Z, D, report, M = newton_step(state, problem, config)
            kappa = linalg.condition_estimate(M) if config.estimate_kappa else math.nan
            new_state, alpha, beta = apply_step(state, y_next, Z, D, config)
        except StepFailure as exc:
            status, message = STATUS_STEP_FAILURE, str(exc)
            break
        rec = StepRecord(
            k=state.k,
            mu=float(state.mu),
            rp=rp,
            rd=rd,
            gap=gap,
            cg_iters=report.iterations,
            kappa=kappa,
            alpha=alpha,
            wall_s=time.perf_counter() - t0,
            beta=beta,
            cg_converged=report.converged,
        )
        trace.append(rec)
        if progress is not None:
            progress(rec)
        state = new_state
    return SolveResult(
        X=state.X,
        y=state.y,
        S=state.S,
        mu=float(state.mu),
        trace=trace,
        status=status,
        rp=rp,
        rd=rd,
        gap=gap,
        objective=float(_trace_product(problem.C, state.X, ctx)),
        bits=config.bits,
        message=message,
    )


def barrier_objective(X: np.ndarray, C: np.ndarray, mu, ctx: Optional[PrecisionContext] = None):
    """``Tr(C X) - mu * log det X``."""
    ctx = ctx or make_context(64)
    X = promote(X, ctx)
    ld = linalg.logdet(X, ctx)
    tr = _trace_product(np.asarray(C, dtype=np.float64), X, ctx)
    if ctx.native:
        return tr - float(mu) * ld
    with ctx.active():
        return tr - gmpy2.mpfr(mu) * ld


def central_path_proximity(X: np.ndarray, S: np.ndarray, mu, ctx: Optional[PrecisionContext] = None) -> float:
    """``|| I - L^T S L / mu ||_F`` with ``X = L L^T``; zero on the central path."""
    ctx = ctx or make_context(64)
    L = linalg.cholesky(promote(X, ctx), ctx)
    if L is None:
        raise linalg.NotPSDError("X is not positive definite")
    if not linalg.is_positive_definite(promote(S, ctx), ctx):
        raise linalg.NotPSDError("S is not positive definite")
    n = L.shape[0]
    if ctx.native:
        W = L.T @ to_float(S) @ L / float(mu)
        return float(np.linalg.norm(np.eye(n) - W))
    Lt = np.ascontiguousarray(L.T)
    W = linalg.matmul(linalg.matmul(Lt, promote(S, ctx), ctx), L, ctx)
    with ctx.active():
        R = _identity(n, ctx) - W / gmpy2.mpfr(mu)
    return float(np.linalg.norm(to_float(R)))


def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    return format(float(value), ".17g")


def write_trace_csv(trace: List[StepRecord], stream: TextIO, comments: Optional[List[str]] = None) -> None:
    for line in comments or ():
        stream.write(f"# {line}\n")
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(TRACE_FIELDS)
    for rec in trace:
        writer.writerow([_fmt(v) for v in rec.row().values()])


def trace_csv(trace: List[StepRecord], comments: Optional[List[str]] = None) -> str:
    buf = io.StringIO()
    write_trace_csv(trace, buf, comments)
    return buf.getvalue()


def read_trace_csv(stream: TextIO) -> List[dict]:
    """Rows of a trace CSV as dicts of floats (``k`` and ``cg_iters`` as ints)."""
    lines = [ln for ln in stream.read().splitlines() if ln and not ln.startswith("#")]
    reader = csv.DictReader(lines)
    if tuple(reader.fieldnames or ()) != TRACE_FIELDS:
        raise ValueError(f"unexpected trace header {reader.fieldnames}")
    rows = []
    for raw in reader:
        row = {k: float(v) for k, v in raw.items()}
        row["k"] = int(row["k"])
        row["cg_iters"] = int(row["cg_iters"])
        rows.append(row)
    return rows
