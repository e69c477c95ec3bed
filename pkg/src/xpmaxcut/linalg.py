"""Dense symmetric kernels at a chosen precision.

Matrices are numpy arrays in the same two representations as
:mod:`xpmaxcut.arith` vectors.  Products accumulate left to right with every
operation rounded, so extended results are reproducible bit-for-bit.  The
Max-Cut constraint matrices ``A_i = e_i e_i^T`` are never built; the
specialised formulas below replace the general trace expressions.
"""

from __future__ import annotations

import math
from typing import Optional

import gmpy2
import numpy as np

from .arith import PrecisionContext, promote, to_float, zeros


class NotPSDError(ValueError):
    pass


def as_operator(M: np.ndarray, ctx: PrecisionContext) -> np.ndarray:
    """Matrix in the layout :func:`matvec` consumes for ``ctx``.

    Entries keep their storage precision: a float64 matrix used at an
    extended context becomes an object array of Python floats, which gmpy2
    promotes exactly inside each product.
    """
    M = np.asarray(M)
    if ctx.native:
        return to_float(M)
    if M.dtype == object:
        return promote(M, ctx)
    return M.astype(object)


def matvec(M: np.ndarray, v: np.ndarray, ctx: PrecisionContext) -> np.ndarray:
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[1] != len(v):
        raise ValueError(f"dimension mismatch: {M.shape} times {len(v)}")
    op = as_operator(M, ctx)
    v = promote(v, ctx)
    if ctx.native:
        return op @ v
    if len(v) == 0:
        return zeros(M.shape[0], ctx)
    with ctx.active():
        return op @ v


def hadamard_square(X: np.ndarray, ctx: PrecisionContext) -> np.ndarray:
    X = promote(X, ctx)
    if ctx.native:
        return X * X
    with ctx.active():
        return X * X


def normal_matrix(X: np.ndarray, ctx: PrecisionContext) -> np.ndarray:
    """``M_ij = Tr(A_i X A_j X)`` for ``A_i = e_i e_i^T``, i.e. ``X_ij ** 2``."""
    return hadamard_square(X, ctx)


def matmul(A: np.ndarray, B: np.ndarray, ctx: PrecisionContext) -> np.ndarray:
    """``A @ B`` skipping zero entries of ``B``.

    Column ``j`` accumulates ``A[:, k] * B[k, j]`` over the nonzero ``k`` in
    increasing order.  Skipping exact zeros does not change any rounded
    partial sum, so this equals dense sequential accumulation.
    """
    if A.shape[1] != B.shape[0]:
        raise ValueError(f"dimension mismatch: {A.shape} @ {B.shape}")
    if ctx.native:
        return to_float(A) @ to_float(B)
    A = promote(A, ctx)
    B = np.asarray(B)
    rows, cols = A.shape[0], B.shape[1]
    out = np.empty((rows, cols), dtype=object)
    with ctx.active():
        zero = gmpy2.mpfr(0)
        for j in range(cols):
            col = B[:, j]
            ks = [k for k in range(B.shape[0]) if col[k] != 0]
            if not ks:
                out[:, j] = zero
                continue
            acc = A[:, ks[0]] * col[ks[0]]
            for k in ks[1:]:
                acc = acc + A[:, k] * col[k]
            out[:, j] = acc
    return out


def mirror_upper(T: np.ndarray) -> np.ndarray:
    """Symmetric matrix built from the upper triangle of ``T``."""
    out = T.copy()
    il = np.tril_indices(T.shape[0], k=-1)
    out[il] = T.T[il]
    return out


def congruence(X: np.ndarray, Z: np.ndarray, ctx: PrecisionContext) -> np.ndarray:
    """Symmetric ``(X Z) X`` from its upper triangle.

    Floating-point ``(X Z) X`` is not exactly symmetric; a lopsided update
    drifts the iterate off the symmetric subspace, and the IPM amplifies the
    drift by ``1/mu``.
    """
    XZ = matmul(X, Z, ctx)
    if ctx.native:
        return mirror_upper(XZ @ to_float(X))
    X = promote(X, ctx)
    n = X.shape[0]
    T = np.empty((n, n), dtype=object)
    with ctx.active():
        for i in range(n):
            T[i, i:] = XZ[i, :] @ X[:, i:]
    return mirror_upper(T)


def newton_rhs(X: np.ndarray, C: np.ndarray, mu, ctx: PrecisionContext) -> np.ndarray:
    """``rhs_i = (X C X)_ii - mu * X_ii``, the Max-Cut form of the normal-equation rhs."""
    if X.shape != C.shape:
        raise ValueError(f"dimension mismatch: {X.shape} vs {C.shape}")
    XC = matmul(X, C, ctx)
    n = X.shape[0]
    if ctx.native:
        X = to_float(X)
        quad = np.array([XC[i, :] @ X[:, i] for i in range(n)])
        return quad - float(mu) * np.diag(X)
    X = promote(X, ctx)
    out = np.empty(n, dtype=object)
    with ctx.active():
        m = gmpy2.mpfr(mu)
        for i in range(n):
            out[i] = XC[i, :] @ X[:, i] - m * X[i, i]
    return out


def pivot_tolerance(A: np.ndarray, ctx: PrecisionContext) -> float:
    n = A.shape[0]
    dmax = max((float(d) for d in np.diag(A)), default=0.0)
    return n * ctx.eps * max(dmax, 0.0)


def cholesky(A: np.ndarray, ctx: PrecisionContext) -> Optional[np.ndarray]:
    """Lower factor ``L`` with ``A = L L^T``, or ``None`` when a pivot fails.

    A pivot passes only if it exceeds ``n * eps * max(diag(A))`` at the
    matrix's precision.
    """
    n = A.shape[0]
    if n == 0:
        return np.zeros((0, 0)) if ctx.native else np.empty((0, 0), dtype=object)
    tol = pivot_tolerance(A, ctx)
    if ctx.native:
        try:
            L = np.linalg.cholesky(to_float(A))
        except np.linalg.LinAlgError:
            return None
        pivots = np.diag(L) ** 2
        if not np.all(np.isfinite(pivots)) or np.any(pivots <= tol):
            return None
        return L
    A = promote(A, ctx)
    L = np.empty((n, n), dtype=object)
    with ctx.active():
        zero = gmpy2.mpfr(0)
        L[:, :] = zero
        for j in range(n):
            row = L[j, :j]
            s = A[j, j] - row @ row if j else A[j, j]
            if not s > tol:
                return None
            d = gmpy2.sqrt(s)
            L[j, j] = d
            if j + 1 < n:
                below = A[j + 1:, j]
                if j:
                    below = below - L[j + 1:, :j] @ row
                L[j + 1:, j] = below / d
    return L


def is_positive_definite(A: np.ndarray, ctx: PrecisionContext) -> bool:
    return cholesky(A, ctx) is not None


def logdet(A: np.ndarray, ctx: PrecisionContext):
    L = cholesky(A, ctx)
    if L is None:
        raise NotPSDError("matrix is not positive definite")
    d = np.diag(L)
    if ctx.native:
        return float(2.0 * np.sum(np.log(d)))
    with ctx.active():
        acc = gmpy2.mpfr(0)
        for v in d:
            acc = acc + gmpy2.log(v)
        return 2 * acc


def psd_factor(X: np.ndarray, clip: float = 1e-9) -> np.ndarray:
    """``V`` with ``V V^T`` equal to ``X`` after clamping negative eigenvalues.

    Runs at 64-bit.  Row ``i`` of ``V`` is the vector attached to vertex ``i``.
    """
    Xf = to_float(X)
    Xf = 0.5 * (Xf + Xf.T)
    if Xf.shape[0] == 0:
        return np.zeros((0, 0))
    lam, U = np.linalg.eigh(Xf)
    top = max(lam[-1], 0.0)
    if lam[0] < -clip * top or (top == 0.0 and lam[0] < 0.0):
        raise NotPSDError(f"min eigenvalue {lam[0]:.3e} below -clip * max ({-clip * top:.3e})")
    lam = np.clip(lam, 0.0, None)
    return U * np.sqrt(lam)


def condition_estimate(M: np.ndarray) -> float:
    """``lambda_max / lambda_min`` of the 64-bit matrix; ``inf`` when singular.

    Dense symmetric eigenvalues: the cost matches one Newton step's matrix
    products, and unlike ARPACK the result does not depend on hidden
    restart state, which would break byte-identical reruns.
    """
    Mf = to_float(M)
    Mf = 0.5 * (Mf + Mf.T)
    n = Mf.shape[0]
    if n == 0:
        return 1.0
    lam = np.linalg.eigvalsh(Mf)
    lo, hi = float(lam[0]), float(lam[-1])
    if hi <= 0.0 or lo <= n * np.finfo(float).eps * hi:
        return math.inf
    return hi / lo
