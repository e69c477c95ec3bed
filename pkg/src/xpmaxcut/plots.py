"""Optional figures rendered next to the CSV artifacts.

matplotlib is imported lazily so the solver itself does not depend on it.
"""

from __future__ import annotations

from pathlib import Path
from typing import Dict, List, Mapping, Sequence


def _pyplot():
    try:
        import matplotlib
    except ImportError as exc:  # pragma: no cover - depends on environment
        raise RuntimeError("plotting needs matplotlib: pip install 'artifact[plot]'") from exc
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata={"Software": None})
    fig.clf()
    return path


def plot_traces(traces: Mapping[int, Sequence[Mapping]], path: Path, title: str = "") -> Path:
    """CG iterations and condition estimate per Newton step, one line per precision."""
    plt = _pyplot()
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    for bits in sorted(traces):
        rows = traces[bits]
        ks = [r["k"] for r in rows]
        ax1.plot(ks, [r["cg_iters"] for r in rows], marker="o", ms=3, label=f"{bits}-bit")
        ax2.semilogy(ks, [r["kappa"] for r in rows], marker="o", ms=3, label=f"{bits}-bit")
    ax1.set_xlabel("Newton step")
    ax1.set_ylabel("CG iterations")
    ax2.set_xlabel("Newton step")
    ax2.set_ylabel("condition estimate of M")
    ax1.legend()
    if title:
        fig.suptitle(title)
    path = _save(fig, path)
    plt.close(fig)
    return path


def plot_sweep(rows: List[Mapping], path: Path) -> Path:
    """Total CG iterations normalised to 64-bit against graph order."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4))
    series: Dict[int, List[tuple]] = {}
    for r in rows:
        if r.get("normalized_to_64") in (None, ""):
            continue
        series.setdefault(int(r["bits"]), []).append((int(r["n"]), float(r["normalized_to_64"])))
    for bits in sorted(series):
        pts = sorted(series[bits])
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=f"{bits}-bit")
    ax.set_xlabel("n")
    ax.set_ylabel("total CG iterations / 64-bit total")
    ax.legend()
    path = _save(fig, path)
    plt.close(fig)
    return path


def plot_estimate(step_times: Mapping[int, Sequence[float]], steps: Sequence[int], chosen: Sequence[int],
                  path: Path, title: str = "") -> Path:
    """Estimated CG time per Newton step for each precision and the adaptive pick."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4))
    for bits in sorted(step_times):
        ax.plot(steps, step_times[bits], marker="o", ms=3, label=f"{bits}-bit")
    best = [step_times[b][i] for i, b in enumerate(chosen)]
    ax.plot(steps, best, "k--", label="adaptive")
    ax.set_xlabel("Newton step")
    ax.set_ylabel("estimated CG time (s)")
    ax.legend()
    if title:
        ax.set_title(title)
    path = _save(fig, path)
    plt.close(fig)
    return path
