"""Acceptance suite: one test per numbered criterion.

Each test records a PASS/FAIL line (shown in the pytest summary and on
stdout) before asserting.  Criteria 4-6 share one precision sweep, which
takes roughly an hour in software-emulated precision.

Run directly with ``python3 tests/test_acceptance.py``.
"""

import hashlib
import math
import sys
import time
from pathlib import Path

import gmpy2
import numpy as np
import pytest

from xpmaxcut import linalg
from xpmaxcut.arith import SUPPORTED_BITS, make_context, promote
from xpmaxcut.cg import CGConfig, cg_solve
from xpmaxcut.cli import main as cli_main
from xpmaxcut.graph import random_graph, weight_matrix
from xpmaxcut.hwmodel import HwParams, adaptive_schedule, cg_iter_time, cores_to_saturate
from xpmaxcut.ipm import IPMConfig, SDPProblem, solve
from xpmaxcut.rounding import best_of_rounds, brute_force_maxcut, sdp_cut_bound

from conftest import record
from oracles import rational_cg, trace_form_system

SWEEP_SIZES = (100, 200)
SWEEP_SEEDS = range(5)
SWEEP_BITS = (64, 256, 1024)
SWEEP_DENSITY = 0.1


def _ulp(x, mantissa):
    x = abs(float(x))
    if x == 0.0:
        return 2.0 ** (-1074)
    return 2.0 ** (math.frexp(x)[1] - mantissa)


# 1 -------------------------------------------------------------------------

def test_c01_triangle(tmp_path, capsys):
    t0 = time.perf_counter()
    g = tmp_path / "k3.txt"
    g.write_text("3 3\n1 2 1\n1 3 1\n2 3 1\n")
    out = tmp_path / "out"
    code_solve = cli_main(["solve", "--graph", str(g), "--out", str(out)])
    sol = out / "k3.64b.solution.json"
    code_round = cli_main(["round", "--graph", str(g), "--solution", str(sol), "--trials", "10", "--out", str(out)])
    capsys.readouterr()
    import json

    s = json.loads(sol.read_text())
    c = json.loads((out / "k3.cut.json").read_text())
    elapsed = time.perf_counter() - t0
    ok = (
        code_solve == 0 and code_round == 0 and s["status"] == "converged"
        and abs(s["objective"] + 3) <= 0.01 and abs(s["sdp_cut_bound"] - 2.25) <= 0.005
        and c["cut"] == 2 and elapsed < 5
    )
    record(1, ok, f"Tr(CX)={s['objective']:.5f} bound={s['sdp_cut_bound']:.5f} cut={c['cut']} in {elapsed:.2f}s")
    assert ok


# 2 -------------------------------------------------------------------------

def test_c02_relaxation_soundness():
    t0 = time.perf_counter()
    rng = np.random.default_rng(20240202)
    good, worst = 0, math.inf
    for case in range(50):
        n = int(rng.integers(6, 15))
        density = float(rng.uniform(0.2, 0.9))
        g = random_graph(n, density, 1000 + case, weights=range(-3, 4))
        res = solve(SDPProblem.from_graph(g), IPMConfig())
        bound = sdp_cut_bound(g, res.X)
        opt, _ = brute_force_maxcut(g)
        margin = bound - opt
        worst = min(worst, margin)
        good += res.converged and margin >= -0.01
    elapsed = time.perf_counter() - t0
    ok = good == 50 and elapsed < 300
    record(2, ok, f"{good}/50 bound >= maxcut - 0.01 (worst margin {worst:+.4f}) in {elapsed:.1f}s")
    assert ok


# 3 -------------------------------------------------------------------------

def test_c03_gw_guarantee():
    t0 = time.perf_counter()
    rng = np.random.default_rng(20240303)
    good, worst = 0, math.inf
    for case in range(50):
        n = int(rng.integers(8, 15))
        density = float(rng.uniform(0.2, 0.9))
        g = random_graph(n, density, 2000 + case, weights=(1, 2, 3))
        res = solve(SDPProblem.from_graph(g), IPMConfig())
        bound = sdp_cut_bound(g, res.X)
        cut = best_of_rounds(g, res.X, 1000, seed=case)
        ratio = cut.mean_cut / bound if bound > 0 else 1.0
        worst = min(worst, ratio)
        good += res.converged and ratio >= 0.87
    elapsed = time.perf_counter() - t0
    ok = good == 50 and elapsed < 600
    record(3, ok, f"{good}/50 mean cut >= 0.87 bound (worst ratio {worst:.4f}) in {elapsed:.1f}s")
    assert ok


# 4-6: shared precision sweep ---------------------------------------------

@pytest.fixture(scope="module")
def sweep():
    t0 = time.perf_counter()
    runs = {}
    for n in SWEEP_SIZES:
        for seed in SWEEP_SEEDS:
            g = random_graph(n, SWEEP_DENSITY, seed)
            for bits in SWEEP_BITS:
                c0 = time.perf_counter()
                res = solve(SDPProblem.from_graph(g), IPMConfig(bits=bits))
                runs[(n, seed, bits)] = {
                    "status": res.status,
                    "total": res.total_cg_iterations,
                    "kappa0": res.trace[0].kappa,
                    "kappaf": res.trace[-1].kappa,
                    "steps": len(res.trace),
                    "cell_s": time.perf_counter() - c0,
                }
                print(n, seed, bits, runs[(n, seed, bits)], flush=True)
    return {"runs": runs, "elapsed": time.perf_counter() - t0}


def test_c04_precision_monotonicity(sweep):
    runs = sweep["runs"]
    lines, ok = [], True
    for n in SWEEP_SIZES:
        hits = 0
        for seed in SWEEP_SEEDS:
            t64, t256, t1024 = (runs[(n, seed, b)]["total"] for b in SWEEP_BITS)
            conv = all(runs[(n, seed, b)]["status"] == "converged" for b in SWEEP_BITS)
            hit = conv and t1024 <= t256 <= t64 and t1024 <= 0.9 * t64
            hits += hit
            lines.append(f"n={n} s={seed}: {t64}/{t256}/{t1024}")
        ok &= hits >= 4
        lines.append(f"n={n}: {hits}/5 seeds")
    ok &= sweep["elapsed"] < 7200
    record(4, ok, "totals 64/256/1024: " + "; ".join(lines) + f"; sweep {sweep['elapsed'] / 60:.1f} min")
    assert ok


def test_c05_condition_blowup(sweep):
    runs = sweep["runs"]
    growth = {k: v["kappaf"] / v["kappa0"] for k, v in runs.items()}
    ok = all(g >= 10 for g in growth.values())
    record(5, ok, f"min kappa growth {min(growth.values()):.3g}x over {len(growth)} runs")
    assert ok


def test_c06_size_scaling(sweep):
    runs = sweep["runs"]
    hits, parts = 0, []
    for seed in SWEEP_SEEDS:
        r = {n: runs[(n, seed, 64)]["total"] / runs[(n, seed, 1024)]["total"] for n in SWEEP_SIZES}
        hits += r[200] >= r[100]
        parts.append(f"s={seed}: {r[100]:.2f}->{r[200]:.2f}")
    ok = hits >= 4
    record(6, ok, f"{hits}/5 seeds ratio(200) >= ratio(100): " + "; ".join(parts))
    assert ok


# 7 -------------------------------------------------------------------------

def test_c07_hardware_model(tmp_path):
    hw = HwParams()
    t512 = cg_iter_time(5000, 512, hw)
    t1024 = cg_iter_time(5000, 1024, hw)
    # 8.33e-5 is the rounded form of 5000^2 * 8 B / 2.4e12 B/s; pin against
    # that quotient, and report the offset from the rounded literal too
    target = 5000 ** 2 * 8 / 2.4e12
    pin = abs(t512 - target) / target <= 0.01
    vs_literal = (t512 - 8.33e-5) / 8.33e-5
    penalty = t1024 == 1.2 * t512
    cores = cores_to_saturate(HwParams(mem_bandwidth=2.4e12, clock_hz=2e9)) == 600
    rng = np.random.default_rng(7)
    adaptive_ok, count = True, 0
    for _ in range(500):
        steps = int(rng.integers(1, 60))
        bits = sorted(rng.choice(SUPPORTED_BITS, size=int(rng.integers(1, 6)), replace=False).tolist())
        traces = {b: {k: int(v) for k, v in enumerate(rng.integers(0, 3000, steps))} for b in bits}
        s = adaptive_schedule(traces, int(rng.integers(1, 8000)), hw)
        adaptive_ok &= all(s.adaptive_total <= t for t in s.fixed_totals.values())
        count += 1
    ok = pin and penalty and cores and adaptive_ok
    record(7, ok, f"t512={t512:.4e}s ({(t512 - target) / target:+.2%} vs {target:.4e}, "
                  f"{vs_literal:+.3%} vs 8.33e-5), t1024/t512={t1024 / t512:.17g}, "
                  f"cores={cores_to_saturate(hw)}, adaptive<=fixed on {count} traces: {adaptive_ok}")
    assert ok


# 8 -------------------------------------------------------------------------

def test_c08_newton_system_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(8)
    worst_ulps = {b: 0.0 for b in SUPPORTED_BITS}
    ok = True
    for case in range(100):
        n = int(rng.integers(1, 9))
        B = rng.standard_normal((n, n + 1))
        X = B @ B.T / n + 0.1 * np.eye(n)
        X = 0.5 * (X + X.T)
        C = weight_matrix(random_graph(n, 0.6, case, (-3, -1, 1, 2)))
        mu = float(rng.uniform(1e-3, 2.0))
        for bits in SUPPORTED_BITS:
            ctx = make_context(bits)
            Xc = promote(X, ctx)
            M = linalg.normal_matrix(Xc, ctx)
            rhs = linalg.newton_rhs(Xc, C, mu, ctx)
            M_ref, rhs_ref, scale = trace_form_system(X, C, mu, ctx.mantissa)
            for i in range(n):
                for j in range(n):
                    ref = M_ref[i][j]
                    err = abs(gmpy2.mpfr(M[i, j], 2 * ctx.mantissa) - ref) / _ulp(ref, ctx.mantissa)
                    worst_ulps[bits] = max(worst_ulps[bits], float(err))
                ref = rhs_ref[i]
                err = abs(gmpy2.mpfr(rhs[i], 2 * ctx.mantissa) - ref) / _ulp(scale[i], ctx.mantissa)
                worst_ulps[bits] = max(worst_ulps[bits], float(err))
    elapsed = time.perf_counter() - t0
    ok = all(v <= 4 for v in worst_ulps.values()) and elapsed < 60
    detail = ", ".join(f"{b}b {v:.2f}" for b, v in worst_ulps.items())
    record(8, ok, f"worst deviation in ulps: {detail} in {elapsed:.1f}s")
    assert ok


# 9 -------------------------------------------------------------------------

def test_c09_exact_termination():
    t0 = time.perf_counter()
    rng = np.random.default_rng(9)
    good, parts = 0, []
    for case in range(20):
        n = int(rng.integers(4, 33))
        Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
        lam = np.logspace(0, float(rng.uniform(2, 6)), n)
        M = Q @ np.diag(lam) @ Q.T
        M = 0.5 * (M + M.T)
        b = rng.standard_normal(n)
        _, rep = cg_solve(M, b, CGConfig(tol=1e-10, ctx=make_context(512)))
        _, k_exact, conv_exact = rational_cg(M, b, 1e-10)
        hit = rep.converged and conv_exact and rep.iterations <= n + 2 and abs(rep.iterations - k_exact) <= 1
        good += hit
        parts.append(f"n={n}:{rep.iterations}/{k_exact}")
    elapsed = time.perf_counter() - t0
    ok = good == 20 and elapsed < 300
    record(9, ok, f"{good}/20 within n+2 and oracle +-1 ({' '.join(parts)}) in {elapsed:.1f}s")
    assert ok


# 10 ------------------------------------------------------------------------

def _hashes(d: Path):
    return {p.name: hashlib.sha256(p.read_bytes()).hexdigest() for p in sorted(d.iterdir())}


def test_c10_determinism(tmp_path, capsys):
    g = random_graph(SWEEP_SIZES[0], SWEEP_DENSITY, 0)
    c0 = time.perf_counter()
    solve(SDPProblem.from_graph(g), IPMConfig(bits=64))
    smallest_cell = time.perf_counter() - c0

    t0 = time.perf_counter()
    # small enough that two full runs fit inside one sweep cell; still
    # exercises the extended-precision path
    argv = ["bench", "--random-n", "6", "--weights=-1,1,2", "--precisions", "64,128",
            "--seed", "5", "--out", str(tmp_path / "bench")]
    codes, hashes = [], []
    for _ in range(2):
        codes.append(cli_main(argv))
        hashes.append(_hashes(tmp_path / "bench"))
        for p in (tmp_path / "bench").iterdir():
            p.unlink()
    capsys.readouterr()
    elapsed = time.perf_counter() - t0
    ok = codes == [0, 0] and hashes[0] == hashes[1] and len(hashes[0]) == 3 and elapsed < smallest_cell
    record(10, ok, f"{len(hashes[0])} artifacts identical: {hashes[0] == hashes[1]}; "
                   f"{elapsed:.2f}s vs smallest sweep cell {smallest_cell:.2f}s")
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v", "-s"]))
