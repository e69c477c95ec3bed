"""Conjugate gradient at a configurable working precision.

The matrix stays at its storage precision (64-bit in the IPM) and is
promoted entry by entry inside each product; the iterate, residual and
search direction live at the working precision.  Plain Hestenes-Stiefel
recurrences, ``x0 = 0``, no restarts and no reorthogonalisation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import gmpy2
import numpy as np

from .arith import PrecisionContext, make_context, promote, to_float, zeros
from .linalg import as_operator

DEFAULT_TOL = 1e-14


@dataclass(frozen=True)
class CGConfig:
    tol: float = DEFAULT_TOL
    max_iter: Optional[int] = None  # None -> 20 * n
    ctx: PrecisionContext = field(default_factory=lambda: make_context(64))

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter is not None and self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")


@dataclass
class CGReport:
    iterations: int
    residual_history: List[float]
    converged: bool
    bits: int
    breakdown: bool = False
    residuals: Optional[List[np.ndarray]] = None


def cg_solve(
    M: np.ndarray,
    b: np.ndarray,
    cfg: CGConfig,
    record_residuals: bool = False,
) -> Tuple[np.ndarray, CGReport]:
    """Solve ``M y = b``; stops when ``||r_k|| / ||b|| <= cfg.tol``.

    Uses the recursively updated residual.  A non-positive curvature
    ``p^T M p`` ends the run with ``breakdown=True`` and the last iterate.
    With ``record_residuals`` the report keeps ``r_0 .. r_{k-1}`` (the
    residuals that generated search directions) for
    :func:`orthogonality_decay`.
    """
    M = np.asarray(M)
    n = len(b)
    if M.shape != (n, n):
        raise ValueError(f"dimension mismatch: {M.shape} vs rhs of length {n}")
    ctx = cfg.ctx
    max_iter = cfg.max_iter or max(20 * n, 1)
    op = as_operator(M, ctx)
    if ctx.native:
        return _cg_native(op, to_float(b), cfg.tol, max_iter, record_residuals)
    with ctx.active():
        return _cg_mpfr(op, promote(b, ctx), cfg.tol, max_iter, record_residuals, ctx)


def _cg_native(M, b, tol, max_iter, record):
    x = np.zeros_like(b)
    r = b.copy()
    p = r.copy()
    rr = float(r @ r)
    bnorm = math.sqrt(rr)
    history: List[float] = []
    kept = [] if record else None
    if bnorm == 0.0:
        return x, CGReport(0, history, True, 64, residuals=kept)
    for _ in range(max_iter):
        if record:
            kept.append(r.copy())
        Mp = M @ p
        curv = float(p @ Mp)
        if not curv > 0.0:
            return x, CGReport(len(history), history, False, 64, breakdown=True, residuals=kept)
        alpha = rr / curv
        x = x + alpha * p
        r = r - alpha * Mp
        rr_new = float(r @ r)
        rel = math.sqrt(rr_new) / bnorm
        history.append(rel)
        if rel <= tol:
            return x, CGReport(len(history), history, True, 64, residuals=kept)
        p = r + (rr_new / rr) * p
        rr = rr_new
    return x, CGReport(len(history), history, False, 64, residuals=kept)


def _cg_mpfr(M, b, tol, max_iter, record, ctx):
    n = len(b)
    x = zeros(n, ctx)
    r = b.copy()
    p = r.copy()
    rr = r @ r
    bnorm = gmpy2.sqrt(rr)
    history: List[float] = []
    kept = [] if record else None
    bits = ctx.bits
    if bnorm == 0:
        return x, CGReport(0, history, True, bits, residuals=kept)
    for _ in range(max_iter):
        if record:
            kept.append(r.copy())
        Mp = M @ p
        curv = p @ Mp
        if not curv > 0:
            return x, CGReport(len(history), history, False, bits, breakdown=True, residuals=kept)
        alpha = rr / curv
        x = x + alpha * p
        r = r - alpha * Mp
        rr_new = r @ r
        rel = gmpy2.sqrt(rr_new) / bnorm
        history.append(float(rel))
        if rel <= tol:
            return x, CGReport(len(history), history, True, bits, residuals=kept)
        p = r + (rr_new / rr) * p
        rr = rr_new
    return x, CGReport(len(history), history, False, bits, residuals=kept)


def orthogonality_decay(report: CGReport) -> np.ndarray:
    """``|r_i . r_j| / (||r_i|| ||r_j||)`` over the recorded residuals.

    Inner products are taken at the precision the residuals were computed
    in, then rounded to float64.
    """
    if report.residuals is None:
        raise ValueError("run cg_solve with record_residuals=True")
    R = report.residuals
    k = len(R)
    G = np.zeros((k, k))
    if k == 0:
        return G
    if R[0].dtype != object:
        A = np.array(R)
        norms = np.sqrt(np.einsum("ij,ij->i", A, A))
        return np.abs(A @ A.T) / np.outer(norms, norms)
    with make_context(report.bits).active():
        norms = [gmpy2.sqrt(r @ r) for r in R]
        for i in range(k):
            for j in range(i, k):
                val = abs(R[i] @ R[j]) / (norms[i] * norms[j])
                G[i, j] = G[j, i] = float(val)
    return G


def error_model(k: int, kappa: float, eps: float) -> Tuple[float, float, float]:
    """Exact-arithmetic decay, accumulated roundoff, and their sum after ``k`` steps."""
    if k < 0 or not kappa >= 1.0 or not eps > 0.0:
        raise ValueError("need k >= 0, kappa >= 1, eps > 0")
    s = math.sqrt(kappa)
    exact = ((s - 1.0) / (s + 1.0)) ** k
    finite = eps * k * s
    return exact, finite, exact + finite


def sweet_spot(kappa: float, eps: float, k_max: int) -> int:
    """Iteration count in ``[0, k_max]`` minimising the total error model."""
    if k_max < 0 or not kappa >= 1.0 or not eps > 0.0:
        raise ValueError("need k_max >= 0, kappa >= 1, eps > 0")
    s = math.sqrt(kappa)
    k = np.arange(k_max + 1, dtype=np.float64)
    rho = (s - 1.0) / (s + 1.0)
    total = np.power(rho, k) + eps * k * s
    return int(np.argmin(total))
