"""Command-line front end: ``xpmaxcut {solve,round,bench,estimate,oracle}``.

Exit codes: 0 success, 1 a solve did not converge, 2 usage or I/O error,
3 internal invariant violation.  Failures print a JSON error object on
stderr.  Every artifact embeds the effective configuration and the tool
version; configuration precedence is flags > ``--config`` file > defaults.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import __version__, artifacts, hwmodel, ipm, rounding
from .arith import PrecisionError, SUPPORTED_BITS, make_context
from .graph import Graph, GraphFormatError, random_graph, read_gset
from .linalg import NotPSDError

log = logging.getLogger("xpmaxcut")

EXIT_OK, EXIT_NONCONVERGED, EXIT_USAGE, EXIT_INVARIANT = 0, 1, 2, 3


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    graph: List[str] = field(default_factory=list)
    random_n: List[int] = field(default_factory=list)
    density: float = 0.1
    weights: List[int] = field(default_factory=lambda: [1])
    precisions: List[int] = field(default_factory=lambda: [64])
    tol_sdp: float = 0.005
    tol_cg: float = 1e-14
    eta: float = 0.6
    theta: Optional[float] = None
    max_iter: int = 200
    hold_mu: bool = True
    seed: int = 0
    trials: int = 10
    best_known: Optional[float] = None
    out: str = "out"
    jobs: int = 1
    hw_bandwidth: float = 2.4e12
    hw_clock: float = 2e9
    solution: Optional[str] = None
    trace: List[str] = field(default_factory=list)
    mode: str = "oracle"
    period: int = 5
    threshold: float = 0.1
    plot: bool = False

    def ipm_config(self, bits: int) -> ipm.IPMConfig:
        return ipm.IPMConfig(
            tol_sdp=self.tol_sdp,
            tol_cg=self.tol_cg,
            theta=self.theta,
            eta=self.eta,
            bits=bits,
            max_iter=self.max_iter,
            hold_mu=self.hold_mu,
        )

    def hw(self) -> hwmodel.HwParams:
        return hwmodel.HwParams(mem_bandwidth=self.hw_bandwidth, clock_hz=self.hw_clock)

    def as_dict(self) -> dict:
        return asdict(self)


# argument parsing --------------------------------------------------------

def _int_list(text: str) -> List[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _common_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    p.add_argument("--config", help="JSON file of defaults (flags override it)")
    p.add_argument("--graph", action="append", help="Gset file; repeat for several")
    p.add_argument("--random-n", type=_int_list, help="seeded random graphs of these orders, e.g. 100,200")
    p.add_argument("--density", type=float, help="edge probability of random graphs")
    p.add_argument("--weights", type=_int_list, help="edge weights drawn uniformly for random graphs; write --weights=-1,1 for negatives")
    p.add_argument("--precisions", type=_int_list, help=f"working precisions in bits from {SUPPORTED_BITS}")
    p.add_argument("--tol-sdp", type=float)
    p.add_argument("--tol-cg", type=float)
    p.add_argument("--eta", type=float)
    p.add_argument("--theta", type=float)
    p.add_argument("--max-iter", type=int)
    p.add_argument("--no-hold-mu", dest="hold_mu", action="store_false",
                   help="shrink mu every step even after a damped primal step")
    p.add_argument("--seed", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--best-known", type=float)
    p.add_argument("--out", help="output directory")
    p.add_argument("--jobs", type=int)
    p.add_argument("--hw-bandwidth", type=float, help="bytes/s")
    p.add_argument("--hw-clock", type=float, help="Hz")
    p.add_argument("--solution", help="solution JSON written by solve")
    p.add_argument("--trace", action="append", help="trace CSV (solve) or steps.csv (bench)")
    p.add_argument("--mode", choices=("oracle", "heuristic"))
    p.add_argument("--period", type=int)
    p.add_argument("--threshold", type=float)
    p.add_argument("--plot", action="store_true", help="also render PNG figures (needs matplotlib)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(prog="xpmaxcut", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("solve", parents=[common], help="run the interior point method at each precision")
    sub.add_parser("round", parents=[common], help="hyperplane rounding of a solve result")
    sub.add_parser("bench", parents=[common], help="precision sweep over several graphs")
    sub.add_parser("estimate", parents=[common], help="hardware time estimates from traces")
    sub.add_parser("oracle", parents=[common], help="brute-force maximum cut (n <= 22)")
    return parser


def resolve_config(ns: argparse.Namespace) -> RunConfig:
    values = {}
    path = getattr(ns, "config", None)
    if path:
        try:
            loaded = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {path}: {exc}") from None
        if not isinstance(loaded, dict):
            raise UsageError("config file must hold a JSON object")
        values.update(loaded)
    names = {f.name for f in fields(RunConfig)}
    for name in names:
        if hasattr(ns, name):
            values[name] = getattr(ns, name)
    unknown = set(values) - names
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    cfg = RunConfig(**values)
    if not cfg.precisions:
        raise UsageError("at least one precision is required")
    for b in cfg.precisions:
        make_context(b)
    if len(set(cfg.precisions)) != len(cfg.precisions):
        raise UsageError("duplicate precisions")
    if cfg.jobs < 1:
        raise UsageError("--jobs must be at least 1")
    try:
        cfg.ipm_config(cfg.precisions[0])
        cfg.hw()
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return cfg


# graph inputs ------------------------------------------------------------

def load_graphs(cfg: RunConfig) -> List[Tuple[str, Graph]]:
    out = []
    for path in cfg.graph:
        try:
            g = read_gset(path)
        except OSError as exc:
            raise UsageError(f"cannot read graph {path}: {exc.strerror or exc}") from None
        out.append((Path(path).stem, g))
    for n in cfg.random_n:
        if n < 1:
            raise UsageError("random graph order must be positive")
        g = random_graph(n, cfg.density, cfg.seed, cfg.weights)
        out.append((f"rand-n{n}-s{cfg.seed}", g))
    return out


def _single_graph(cfg: RunConfig) -> Tuple[str, Graph]:
    graphs = load_graphs(cfg)
    if len(graphs) != 1:
        raise UsageError(f"expected exactly one graph, got {len(graphs)}")
    return graphs[0]


# solve jobs (top level so they pickle for --jobs) ---------------------------

def _solve_job(job) -> dict:
    name, g, cfg_dict, bits = job
    cfg = RunConfig(**cfg_dict)
    problem = ipm.SDPProblem.from_graph(g)

    def progress(rec):
        log.info("%s %d-bit step %d: cg=%d mu=%.3e gap=%.3e", name, bits, rec.k, rec.cg_iters, rec.mu, rec.gap)

    try:
        res = ipm.solve(problem, cfg.ipm_config(bits), progress=progress)
    except Exception as exc:  # recorded per row by bench
        return {"name": name, "bits": bits, "status": "error", "message": f"{type(exc).__name__}: {exc}"}
    X = np.vectorize(float, otypes=[np.float64])(res.X) if res.X.dtype == object else res.X
    return {
        "name": name,
        "bits": bits,
        "n": g.n,
        "status": res.status,
        "message": res.message,
        "objective": res.objective,
        "sdp_cut_bound": rounding.sdp_cut_bound(g, X),
        "rp": res.rp,
        "rd": res.rd,
        "gap": res.gap,
        "mu": res.mu,
        "X": X,
        "y": [float(v) for v in res.y],
        "trace": [asdict(r) for r in res.trace],
    }


def _run_jobs(jobs: Sequence, workers: int) -> List[dict]:
    if workers <= 1 or len(jobs) <= 1:
        return [_solve_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_solve_job, jobs))


# commands ------------------------------------------------------------------

def cmd_solve(cfg: RunConfig) -> Tuple[int, dict]:
    name, g = _single_graph(cfg)
    out = Path(cfg.out)
    results = _run_jobs([(name, g, cfg.as_dict(), b) for b in cfg.precisions], cfg.jobs)
    summary = {"graph": name, "n": g.n, "runs": []}
    code = EXIT_OK
    for r in results:
        if r["status"] == "error":
            raise RuntimeError(r["message"])
        bits = r["bits"]
        extra = {"graph": name, "n": g.n, "bits": bits, "wall_s": "software emulation time"}
        trace_path = artifacts.write_csv(
            out / f"{name}.{bits}b.trace.csv",
            ipm.TRACE_FIELDS,
            ([rec[f] for f in ipm.TRACE_FIELDS] for rec in r["trace"]),
            config={**cfg.as_dict(), **{"run": extra}},
        )
        sol = {
            **artifacts.provenance(cfg.as_dict()),
            "graph": name,
            "n": g.n,
            "bits": bits,
            "status": r["status"],
            "message": r["message"],
            "objective": r["objective"],
            "sdp_cut_bound": r["sdp_cut_bound"],
            "residuals": {"rp": r["rp"], "rd": r["rd"], "gap": r["gap"]},
            "mu": r["mu"],
            "newton_steps": len(r["trace"]),
            "total_cg_iters": sum(t["cg_iters"] for t in r["trace"]),
            "y": r["y"],
            "X": r["X"].tolist(),
        }
        sol_path = artifacts.write_json(out / f"{name}.{bits}b.solution.json", sol)
        summary["runs"].append({
            "bits": bits,
            "status": r["status"],
            "objective": r["objective"],
            "sdp_cut_bound": r["sdp_cut_bound"],
            "gap": r["gap"],
            "newton_steps": sol["newton_steps"],
            "total_cg_iters": sol["total_cg_iters"],
            "trace": str(trace_path),
            "solution": str(sol_path),
        })
        if r["status"] != ipm.STATUS_CONVERGED:
            code = EXIT_NONCONVERGED
    if cfg.plot:
        from . import plots

        traces = {r["bits"]: r["trace"] for r in results}
        summary["figure"] = str(plots.plot_traces(traces, out / f"{name}.trace.png", title=name))
    return code, summary


def _load_solution(cfg: RunConfig, g: Graph) -> dict:
    if not cfg.solution:
        raise UsageError("--solution is required")
    try:
        sol = json.loads(Path(cfg.solution).read_text(encoding="utf-8"))
        X = np.asarray(sol["X"], dtype=np.float64)
    except (OSError, json.JSONDecodeError, KeyError, ValueError) as exc:
        raise UsageError(f"cannot read solution {cfg.solution}: {exc}") from None
    if X.shape != (g.n, g.n):
        raise UsageError(f"solution is {X.shape[0]}x{X.shape[1]} but the graph has {g.n} vertices")
    sol["X"] = X
    return sol


def cmd_round(cfg: RunConfig) -> Tuple[int, dict]:
    if cfg.trials < 1:
        raise UsageError("--trials must be at least 1")
    name, g = _single_graph(cfg)
    sol = _load_solution(cfg, g)
    res = rounding.best_of_rounds(g, sol["X"], cfg.trials, cfg.seed)
    report = {
        **artifacts.provenance(cfg.as_dict()),
        **res.to_json(),
        "graph": name,
        "sdp_cut_bound": rounding.sdp_cut_bound(g, sol["X"]),
        "solution_bits": sol.get("bits"),
    }
    if cfg.best_known is not None:
        if cfg.best_known == 0:
            raise UsageError("--best-known must be nonzero")
        report["best_known"] = cfg.best_known
        report["ratio"] = res.cut / cfg.best_known
    artifacts.write_json(Path(cfg.out) / f"{name}.cut.json", report)
    return EXIT_OK, report


SWEEP_FIELDS = ("graph", "n", "bits", "status", "newton_steps", "total_cg_iters", "normalized_to_64",
                "kappa_first", "kappa_last", "objective", "sdp_cut_bound")
STEP_FIELDS = ("graph", "n", "bits", "k", "cg_iters", "kappa", "alpha", "beta", "mu", "rp", "rd", "gap")


def cmd_bench(cfg: RunConfig) -> Tuple[int, dict]:
    graphs = load_graphs(cfg)
    if not graphs:
        raise UsageError("bench needs at least one --graph or --random-n")
    names = [n for n, _ in graphs]
    if len(set(names)) != len(names):
        raise UsageError("graph names must be distinct")
    jobs = [(name, g, cfg.as_dict(), b) for name, g in graphs for b in cfg.precisions]
    results = _run_jobs(jobs, cfg.jobs)
    totals: Dict[Tuple[str, int], int] = {}
    for r in results:
        if r["status"] != "error":
            totals[(r["name"], r["bits"])] = sum(t["cg_iters"] for t in r["trace"])
    sweep, steps = [], []
    code = EXIT_OK
    for (name, g), r in zip(((n, g) for n, g in graphs for _ in cfg.precisions), results):
        bits = r["bits"]
        if r["status"] == "error":
            sweep.append((name, g.n, bits, r["message"]) + (None,) * (len(SWEEP_FIELDS) - 4))
            code = EXIT_NONCONVERGED
            continue
        if r["status"] != ipm.STATUS_CONVERGED:
            code = EXIT_NONCONVERGED
        tr = r["trace"]
        base = totals.get((name, 64))
        total = totals[(name, bits)]
        norm = (total / base) if base else None
        sweep.append((
            name, g.n, bits, r["status"], len(tr), total, norm,
            tr[0]["kappa"] if tr else None, tr[-1]["kappa"] if tr else None,
            r["objective"], r["sdp_cut_bound"],
        ))
        for t in tr:
            steps.append((name, g.n, bits, t["k"], t["cg_iters"], t["kappa"], t["alpha"], t["beta"],
                          t["mu"], t["rp"], t["rd"], t["gap"]))
    out = Path(cfg.out)
    conf = cfg.as_dict()
    sweep_path = artifacts.write_csv(out / "sweep.csv", SWEEP_FIELDS, sweep, config=conf)
    steps_path = artifacts.write_csv(out / "steps.csv", STEP_FIELDS, steps, config=conf)
    files = {p.name: artifacts.sha256(p) for p in (sweep_path, steps_path)}
    if cfg.plot:
        from . import plots

        _, rows = artifacts.read_csv(sweep_path)
        fig = plots.plot_sweep(rows, out / "sweep.png")
        files[fig.name] = artifacts.sha256(fig)
    manifest = {**artifacts.provenance(conf), "files": files}
    artifacts.write_json(out / "manifest.json", manifest)
    summary = {"rows": [dict(zip(SWEEP_FIELDS, row)) for row in sweep], "manifest": str(out / "manifest.json")}
    return code, summary


def _read_traces(paths: Sequence[str]) -> Dict[str, dict]:
    """``{graph: {"n": n, "iters": {bits: {k: cg_iters}}}}`` from trace or steps CSVs."""
    graphs: Dict[str, dict] = {}
    for path in paths:
        try:
            meta, rows = artifacts.read_csv(Path(path))
        except OSError as exc:
            raise UsageError(f"cannot read trace {path}: {exc.strerror or exc}") from None
        if rows and "graph" in rows[0]:
            for row in rows:
                entry = graphs.setdefault(row["graph"], {"n": int(row["n"]), "iters": {}})
                entry["iters"].setdefault(int(row["bits"]), {})[int(row["k"])] = int(row["cg_iters"])
            continue
        run = ((meta or {}).get("config") or {}).get("run")
        if not run:
            raise UsageError(f"{path}: trace lacks the provenance line naming graph, n and bits")
        if rows and set(ipm.TRACE_FIELDS) - set(rows[0]):
            raise UsageError(f"{path}: not a trace CSV")
        entry = graphs.setdefault(run["graph"], {"n": int(run["n"]), "iters": {}})
        if entry["n"] != int(run["n"]):
            raise UsageError(f"{path}: graph order disagrees with other traces of {run['graph']}")
        entry["iters"][int(run["bits"])] = {int(r["k"]): int(r["cg_iters"]) for r in rows}
    return graphs


def cmd_estimate(cfg: RunConfig) -> Tuple[int, dict]:
    if not cfg.trace:
        raise UsageError("estimate needs at least one --trace")
    hw = cfg.hw()
    out = Path(cfg.out)
    conf = cfg.as_dict()
    report = {**artifacts.provenance(conf), "cores_to_saturate": hwmodel.cores_to_saturate(hw),
              "hw": hw.as_dict(), "graphs": {}}
    for name, entry in sorted(_read_traces(cfg.trace).items()):
        iters = entry["iters"]
        n = entry["n"]
        common = sorted(set.intersection(*(set(t) for t in iters.values())))
        dropped = {str(b): sorted(set(t) - set(common)) for b, t in sorted(iters.items())}
        if not common:
            raise UsageError(f"{name}: traces share no Newton steps")
        aligned = {b: {k: t[k] for k in common} for b, t in iters.items()}
        sched = hwmodel.adaptive_schedule(aligned, n, hw, cfg.mode, cfg.period, cfg.threshold)
        rows = [(k, b, sched.step_times[b][i]) for i, k in enumerate(sched.steps) for b in sorted(sched.step_times)]
        artifacts.write_csv(out / f"{name}.estimate.csv", ("k", "bits", "est_seconds"), rows, config=conf)
        artifacts.write_csv(out / f"{name}.schedule.csv", ("k", "bits", "est_seconds"), sched.rows(), config=conf)
        summary = {
            **sched.summary(),
            "n": n,
            "mode": cfg.mode,
            "chosen_bits": sched.chosen_bits,
            "steps": sched.steps,
            "steps_dropped": dropped,
            "probe_steps": sched.probe_bits,
            "cg_iter_time_s": {str(b): hwmodel.cg_iter_time(n, b, hw) for b in sorted(iters)},
        }
        artifacts.write_json(out / f"{name}.estimate.json", {**artifacts.provenance(conf), "graph": name, **summary})
        if cfg.plot:
            from . import plots

            summary["figure"] = str(plots.plot_estimate(sched.step_times, sched.steps, sched.chosen_bits,
                                                        out / f"{name}.estimate.png", title=name))
        report["graphs"][name] = summary
    return EXIT_OK, report


def cmd_oracle(cfg: RunConfig) -> Tuple[int, dict]:
    name, g = _single_graph(cfg)
    if g.n > rounding.BRUTE_FORCE_MAX_N:
        raise UsageError(f"brute force is limited to n <= {rounding.BRUTE_FORCE_MAX_N}; graph has {g.n}")
    value, x = rounding.brute_force_maxcut(g)
    report = {**artifacts.provenance(cfg.as_dict()), "graph": name, "n": g.n, "maxcut": value, "assignment": list(x)}
    if cfg.solution:
        sol = _load_solution(cfg, g)
        bound = rounding.sdp_cut_bound(g, sol["X"])
        report["sdp_cut_bound"] = bound
        report["bound_minus_maxcut"] = bound - value
    artifacts.write_json(Path(cfg.out) / f"{name}.oracle.json", report)
    return EXIT_OK, report


COMMANDS = {
    "solve": cmd_solve,
    "round": cmd_round,
    "bench": cmd_bench,
    "estimate": cmd_estimate,
    "oracle": cmd_oracle,
}


def _error(kind: str, message: str, code: int) -> int:
    sys.stderr.write(json.dumps({"error": kind, "message": message, "exit_code": code,
                                 "tool": artifacts.TOOL, "version": __version__}, sort_keys=True) + "\n")
    return code


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse already printed usage; keep --help/--version at 0
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    logging.basicConfig(level=logging.INFO if getattr(ns, "verbose", False) else logging.WARNING,
                        format="%(message)s", stream=sys.stderr)
    try:
        cfg = resolve_config(ns)
        code, payload = COMMANDS[ns.command](cfg)
    except (UsageError, PrecisionError, GraphFormatError) as exc:
        return _error(type(exc).__name__, str(exc), EXIT_USAGE)
    except OSError as exc:
        return _error("OSError", str(exc), EXIT_USAGE)
    except NotPSDError as exc:
        return _error("NotPSDError", str(exc), EXIT_INVARIANT)
    except Exception as exc:  # anything else is a broken invariant
        return _error(type(exc).__name__, str(exc), EXIT_INVARIANT)
    sys.stdout.write(artifacts.dumps(payload))
    return code


if __name__ == "__main__":
    sys.exit(main())
