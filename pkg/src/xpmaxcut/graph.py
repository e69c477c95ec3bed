"""Gset graph ingestion and the Max-Cut weight matrix.

Gset files are plain text: a header line ``n m`` followed by ``m`` lines
``u v w`` with 1-indexed vertices.  :class:`Graph` stores edges 0-indexed.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, TextIO, Tuple, Union

import numpy as np

Edge = Tuple[int, int, int]


class GraphFormatError(ValueError):
    pass


@dataclass(frozen=True)
class Graph:
    """Undirected weighted graph; ``edges`` holds 0-indexed ``(u, v, w)``."""

    n: int
    edges: Tuple[Edge, ...]

    def __post_init__(self):
        if self.n < 0:
            raise GraphFormatError("vertex count must be non-negative")
        seen = set()
        for u, v, _ in self.edges:
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise GraphFormatError(f"edge ({u + 1}, {v + 1}) out of range 1..{self.n}")
            if u == v:
                raise GraphFormatError(f"self-loop at vertex {u + 1}")
            key = (min(u, v), max(u, v))
            if key in seen:
                raise GraphFormatError(f"duplicate edge ({key[0] + 1}, {key[1] + 1})")
            seen.add(key)

    @property
    def m(self) -> int:
        return len(self.edges)

    def canonical(self) -> "Graph":
        """Same graph with ``u < v`` in each edge and edges sorted."""
        edges = sorted((min(u, v), max(u, v), w) for u, v, w in self.edges)
        return Graph(self.n, tuple(edges))


def parse_gset(text: Union[str, TextIO]) -> Graph:
    if not isinstance(text, str):
        text = text.read()
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise GraphFormatError("empty input")
    header = lines[0].split()
    if len(header) != 2:
        raise GraphFormatError(f"line 1: expected 'n m', got {lines[0]!r}")
    try:
        n, m = int(header[0]), int(header[1])
    except ValueError as exc:
        raise GraphFormatError(f"line 1: {exc}") from None
    if n < 0 or m < 0:
        raise GraphFormatError("line 1: negative counts")
    body = lines[1:]
    if len(body) != m:
        raise GraphFormatError(f"declared {m} edges, found {len(body)}")
    edges = []
    for lineno, line in enumerate(body, start=2):
        parts = line.split()
        if len(parts) != 3:
            raise GraphFormatError(f"line {lineno}: expected 'u v w', got {line!r}")
        try:
            u, v, w = (int(p) for p in parts)
        except ValueError:
            raise GraphFormatError(f"line {lineno}: non-integer field in {line!r}") from None
        if not (1 <= u <= n and 1 <= v <= n):
            raise GraphFormatError(f"line {lineno}: vertex out of range 1..{n}")
        edges.append((u - 1, v - 1, w))
    return Graph(n, tuple(edges))


def read_gset(path: Union[str, Path]) -> Graph:
    with open(path, "r", encoding="ascii") as fh:
        return parse_gset(fh)


def serialize_gset(g: Graph) -> str:
    buf = io.StringIO()
    buf.write(f"{g.n} {g.m}\n")
    for u, v, w in g.edges:
        buf.write(f"{u + 1} {v + 1} {w}\n")
    return buf.getvalue()


def weight_matrix(g: Graph) -> np.ndarray:
    """Symmetric ``n x n`` float64 matrix with ``C[u, v] = C[v, u] = w``."""
    C = np.zeros((g.n, g.n))
    for u, v, w in g.edges:
        C[u, v] = C[v, u] = w
    return C


def total_weight(g: Graph) -> int:
    """Sum of all entries of the weight matrix, i.e. twice the edge weight sum."""
    return 2 * sum(w for _, _, w in g.edges)


def random_graph(
    n: int,
    density: float,
    seed: int,
    weights: Iterable[int] = (1,),
) -> Graph:
    """Erdos-Renyi graph; each present edge draws a weight uniformly from ``weights``."""
    rng = np.random.default_rng(seed)
    weights = np.asarray(tuple(weights), dtype=np.int64)
    iu, ju = np.triu_indices(n, k=1)
    keep = rng.random(iu.size) < density
    ws = weights[rng.integers(0, weights.size, size=int(keep.sum()))]
    edges = tuple((int(u), int(v), int(w)) for u, v, w in zip(iu[keep], ju[keep], ws))
    return Graph(n, edges)
