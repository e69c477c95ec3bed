"""Memory-traffic model of a wide-word CG accelerator.

CG on a dense matrix is memory bound: each iteration streams the 64-bit
matrix once plus a handful of working vectors at the internal precision.
Estimated times are ``bytes / bandwidth``, with a flat penalty for 1024-bit
arithmetic.  Everything here is an estimate; nothing is measured.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence

MATRIX_BITS = 64
BASE_BITS = 512
PENALTY_BITS = 1024


@dataclass(frozen=True)
class HwParams:
    mem_bandwidth: float = 2.4e12  # bytes/s
    load_bytes: int = 8
    load_cycles: int = 4
    clock_hz: float = 2e9
    penalty_1024: float = 1.2
    cores: int = 600
    cache_line_bytes: int = 64
    vector_streams: int = 6

    def __post_init__(self):
        for name in ("load_bytes", "load_cycles", "clock_hz", "penalty_1024", "cores", "cache_line_bytes"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.mem_bandwidth < 0 or self.vector_streams < 0:
            raise ValueError("bandwidth and vector stream count must be non-negative")

    def as_dict(self) -> dict:
        return asdict(self)


def traffic_per_cg_iter(n: int, matrix_bits: int = MATRIX_BITS, vector_bits: int = BASE_BITS,
                        vector_streams: int = 6) -> float:
    """Bytes moved by one CG iteration: the matrix once plus the vector streams."""
    if n < 0:
        raise ValueError("n must be non-negative")
    return n * n * (matrix_bits / 8) + vector_streams * n * (vector_bits / 8)


def cg_iter_time(n: int, precision_bits: int, hw: HwParams = HwParams()) -> float:
    """Seconds per CG iteration.

    Widths up to 512 bits run at the 512-bit rate; 1024 bits pays
    ``hw.penalty_1024`` on top of it.
    """
    if precision_bits < 1:
        raise ValueError("precision_bits must be positive")
    if hw.mem_bandwidth == 0:
        return math.inf
    t = traffic_per_cg_iter(n, MATRIX_BITS, BASE_BITS, hw.vector_streams) / hw.mem_bandwidth
    if precision_bits > BASE_BITS:
        t *= hw.penalty_1024
    return t


def cores_to_saturate(hw: HwParams = HwParams()) -> int:
    per_core = hw.load_bytes / hw.load_cycles * hw.clock_hz
    return math.ceil(hw.mem_bandwidth / per_core)


def roofline(intensity: float, hw: HwParams, peak_flops: float) -> float:
    if intensity < 0:
        raise ValueError("intensity must be non-negative")
    if math.isinf(intensity):
        return peak_flops
    return min(peak_flops, intensity * hw.mem_bandwidth)


def estimate_trace_time(cg_iterations: Sequence[int], n: int, precision_bits: int,
                        hw: HwParams = HwParams()) -> float:
    if len(cg_iterations) == 0:
        raise ValueError("trace is empty")
    per = cg_iter_time(n, precision_bits, hw)
    return sum(int(k) * per for k in cg_iterations)


@dataclass
class PrecisionSchedule:
    steps: List[int]
    chosen_bits: List[int]
    step_times: Dict[int, List[float]]
    adaptive_total: float
    fixed_totals: Dict[int, float]
    probe_bits: List[int] = field(default_factory=list)

    def gain_vs(self, bits: int) -> Optional[float]:
        """``fixed_total(bits) / adaptive_total``; ``None`` if ``bits`` was not run."""
        if bits not in self.fixed_totals:
            return None
        if self.adaptive_total == 0:
            return math.inf if self.fixed_totals[bits] > 0 else 1.0
        return self.fixed_totals[bits] / self.adaptive_total

    def summary(self) -> dict:
        g64, g1024 = self.gain_vs(64), self.gain_vs(1024)
        return {
            "per_precision_total_s": {str(b): t for b, t in sorted(self.fixed_totals.items())},
            "adaptive_total_s": self.adaptive_total,
            "gain_vs_64b": g64,
            "gain_vs_1024b": None if g1024 is None else g1024 - 1.0,
        }

    def rows(self) -> List[tuple]:
        """``(k, bits, est_seconds)`` for the chosen precision at each step."""
        return [
            (k, b, self.step_times[b][i])
            for i, (k, b) in enumerate(zip(self.steps, self.chosen_bits))
        ]


def _step_tables(traces: Mapping[int, Mapping[int, int]], n: int, hw: HwParams):
    if not traces:
        raise ValueError("no traces supplied")
    keys = {b: sorted(t) for b, t in traces.items()}
    steps = next(iter(keys.values()))
    for b, ks in keys.items():
        if ks != steps:
            raise ValueError(f"trace for {b}-bit covers steps {ks[:3]}..., expected identical coverage")
    if not steps:
        raise ValueError("traces are empty")
    times = {
        b: [traces[b][k] * cg_iter_time(n, b, hw) for k in steps]
        for b in sorted(traces)
    }
    return steps, times


def adaptive_schedule(traces: Mapping[int, Mapping[int, int]], n: int, hw: HwParams = HwParams(),
                      mode: str = "oracle", period: int = 5, threshold: float = 0.1) -> PrecisionSchedule:
    """Per-step precision choice from per-precision ``{step: cg_iterations}`` traces.

    ``mode="oracle"`` picks the fastest precision at every step (ties go to
    the narrower width).  ``mode="heuristic"`` models an online policy: every
    ``period`` steps all precisions are probed, costing their full step
    times, and the run switches to the fastest one if it beats the current
    choice by more than ``threshold`` (relative); between probes it stays put.
    """
    steps, times = _step_tables(traces, n, hw)
    bits_sorted = sorted(times)
    fixed = {b: sum(ts) for b, ts in times.items()}
    chosen: List[int] = []
    probes: List[int] = []
    if mode == "oracle":
        total = 0.0
        for i in range(len(steps)):
            best = min(bits_sorted, key=lambda b: (times[b][i], b))
            chosen.append(best)
            total += times[best][i]
    elif mode == "heuristic":
        if period < 1 or threshold < 0:
            raise ValueError("period must be >= 1 and threshold >= 0")
        current = bits_sorted[0]
        total = 0.0
        for i in range(len(steps)):
            if i % period == 0 and len(bits_sorted) > 1:
                probes.append(steps[i])
                total += sum(times[b][i] for b in bits_sorted)
                best = min(bits_sorted, key=lambda b: (times[b][i], b))
                if times[best][i] < (1.0 - threshold) * times[current][i]:
                    current = best
                chosen.append(current)
            else:
                chosen.append(current)
                total += times[current][i]
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return PrecisionSchedule(steps, chosen, times, total, fixed, probes)
