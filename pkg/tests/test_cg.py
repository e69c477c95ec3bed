import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from xpmaxcut.arith import SUPPORTED_BITS, make_context, to_float
from xpmaxcut.cg import CGConfig, cg_solve, error_model, orthogonality_decay, sweet_spot

from oracles import rational_cg


def hilbert(n):
    return np.array([[1.0 / (i + j + 1) for j in range(n)] for i in range(n)])


@pytest.mark.parametrize("bits", SUPPORTED_BITS)
def test_identity_one_iteration(bits):
    b = np.array([1.0, -2.0, 3.0])
    y, rep = cg_solve(np.eye(3), b, CGConfig(ctx=make_context(bits)))
    assert rep.iterations == 1 and rep.converged and rep.bits == bits
    assert np.array_equal(to_float(y), b)


def test_diagonal_direct_oracle():
    M = np.diag(np.arange(1.0, 9.0))
    b = np.ones(8)
    y, rep = cg_solve(M, b, CGConfig(tol=1e-12))
    assert rep.converged and rep.iterations <= 8
    assert np.allclose(y, np.linalg.solve(M, b), rtol=1e-10)
    assert len(rep.residual_history) == rep.iterations
    assert rep.residual_history[-1] <= 1e-12


def test_hilbert_needs_precision():
    H, b = hilbert(12), np.ones(12)
    _, lo = cg_solve(H, b, CGConfig(tol=1e-10, ctx=make_context(64)))
    _, hi = cg_solve(H, b, CGConfig(tol=1e-10, ctx=make_context(512)))
    _, exact_k, _ = rational_cg(H, b, 1e-10)
    assert not lo.converged or lo.iterations >= 4 * 12
    assert hi.converged and hi.iterations <= 12 + 2
    assert abs(hi.iterations - exact_k) <= 1


def test_orthogonality_decay():
    _, rep = cg_solve(np.eye(4), np.ones(4), CGConfig(), record_residuals=True)
    assert orthogonality_decay(rep).shape == (1, 1)

    rng = np.random.default_rng(0)
    Q, _ = np.linalg.qr(rng.standard_normal((8, 8)))
    M = Q @ np.diag(np.linspace(1, 10, 8)) @ Q.T
    M = 0.5 * (M + M.T)
    _, rep = cg_solve(M, np.ones(8), CGConfig(tol=1e-30, ctx=make_context(1024)), record_residuals=True)
    G = orthogonality_decay(rep)
    assert np.allclose(np.diag(G), 1.0)
    assert G[~np.eye(len(G), dtype=bool)].max() <= 1e-200

    H, b = hilbert(12), np.ones(12)
    _, r64 = cg_solve(H, b, CGConfig(tol=1e-10, ctx=make_context(64)), record_residuals=True)
    _, r512 = cg_solve(H, b, CGConfig(tol=1e-10, ctx=make_context(512)), record_residuals=True)
    k = min(r64.iterations, r512.iterations)
    G64, G512 = orthogonality_decay(r64)[:k, :k], orthogonality_decay(r512)[:k, :k]
    off = ~np.eye(k, dtype=bool)
    assert G64[off].max() >= 1e-4
    assert G64[off].max() > G512[off].max()
    with pytest.raises(ValueError):
        orthogonality_decay(r64.__class__(1, [0.0], True, 64))


def test_zero_rhs_and_errors():
    y, rep = cg_solve(np.eye(2), np.zeros(2), CGConfig())
    assert rep.iterations == 0 and rep.converged and not y.any()
    with pytest.raises(ValueError):
        cg_solve(np.eye(2), np.ones(3), CGConfig())
    with pytest.raises(ValueError):
        CGConfig(tol=0)
    with pytest.raises(ValueError):
        CGConfig(max_iter=0)


@pytest.mark.parametrize("bits", [64, 256])
def test_breakdown_on_indefinite(bits):
    M = np.diag([1.0, -1.0])
    y, rep = cg_solve(M, np.array([1.0, 1.0]), CGConfig(ctx=make_context(bits)))
    assert rep.breakdown and not rep.converged


def test_iteration_cap_reports_nonconvergence():
    _, rep = cg_solve(hilbert(10), np.ones(10), CGConfig(tol=1e-14, max_iter=3))
    assert rep.iterations == 3 and not rep.converged


@pytest.mark.parametrize("bits", [64, 128, 512])
def test_recursive_and_true_residual_agree(bits):
    rng = np.random.default_rng(bits)
    B = rng.standard_normal((15, 15))
    M = B @ B.T + 0.1 * np.eye(15)
    M = 0.5 * (M + M.T)
    b = rng.standard_normal(15)
    ctx = make_context(bits)
    y, rep = cg_solve(M, b, CGConfig(tol=1e-9, ctx=ctx))
    true = np.linalg.norm(b - M @ to_float(y)) / np.linalg.norm(b)
    kappa = np.linalg.cond(M)
    assert rep.converged
    # the 64-bit read-back of y adds its own rounding on top of the solver's
    assert true <= max(1e-9, 1e3 * max(ctx.eps, 2.0 ** -52) * kappa)


def test_error_model_examples():
    assert error_model(0, 5.0, 1e-16) == (1.0, 0.0, 1.0)
    assert error_model(3, 1.0, 1e-16)[0] == 0.0
    _, fin, _ = error_model(100, 1e12, 2.0 ** -63)
    assert math.isclose(fin, 2.0 ** -63 * 100 * 1e6)
    assert math.isclose(fin, 1.08e-11, rel_tol=0.01)
    with pytest.raises(ValueError):
        error_model(-1, 2.0, 1e-16)
    with pytest.raises(ValueError):
        error_model(1, 0.5, 1e-16)
    with pytest.raises(ValueError):
        error_model(1, 2.0, 0.0)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 500), st.floats(1.0, 1e16), st.floats(1e-300, 1e-3))
def test_error_model_monotone(k, kappa, eps):
    e0, f0, t0 = error_model(k, kappa, eps)
    e1, f1, _ = error_model(k + 1, kappa, eps)
    assert e1 <= e0 and f1 >= f0 and t0 == e0 + f0


def test_sweet_spot():
    assert sweet_spot(1.0, 2.0 ** -52, 100) == 1
    assert sweet_spot(1e4, 1e-300, 200) == 200
    kappa, eps = 1e8, 2.0 ** -63
    k = sweet_spot(kappa, eps, 10 ** 4)
    tot = lambda j: error_model(j, kappa, eps)[2]
    neighbours = [j for j in (k - 1, k + 1) if 0 <= j <= 10 ** 4]
    assert all(tot(k) <= tot(j) for j in neighbours)
    # scan oracle through the scalar model; first minimum wins ties
    totals = [tot(j) for j in range(10 ** 4 + 1)]
    assert k == totals.index(min(totals))


@pytest.mark.parametrize("kappa", [1e4, 1e6, 1e8])
def test_sweet_spot_interior(kappa):
    # stationary point of rho**k + eps*k*sqrt(kappa) sits near
    # (sqrt(kappa) / 2) * log(2 / (eps * kappa))
    eps = 2.0 ** -52
    k = sweet_spot(kappa, eps, 10 ** 6)
    tot = lambda j: error_model(j, kappa, eps)[2]
    assert 0 < k < 10 ** 6
    assert tot(k) <= tot(k - 1) and tot(k) <= tot(k + 1)
    assert k == pytest.approx(math.sqrt(kappa) / 2 * math.log(2 / (eps * kappa)), rel=0.05)


def test_sweet_spot_zero_when_roundoff_dominates():
    assert sweet_spot(1e16, 2.0 ** -52, 1000) == 0
