"""Editing-accuracy metrics and the paired forward/reverse run harness.

The headline metric is content consistency under symmetrical dragging: run
an instruction, rebuild it backwards from the achieved positions, run that
from the edited state, and measure how far the roundtrip render drifted from
the original. A perfectly invertible edit scores 0.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .backends import GeneratorBackend
from .baseline import PointDragEngine
from .engine import DragEngine
from .instructions import Instruction, build_backend
from .rendering import render_grayscale
from .sampling import Point2

SIMILARITY_KERNEL = "l1_range_norm"


def reverse_instruction(inst: Instruction, final_positions: list[Point2]) -> Instruction:
    """Swap roles: handles become the achieved final positions, targets the
    original handles; backend, mask, and configs carry over."""
    if len(final_positions) != len(inst.points):
        raise ValueError(f"{len(final_positions)} final positions for "
                         f"{len(inst.points)} points")
    pairs = [(Point2(float(p.x), float(p.y)), h)
             for (h, _t), p in zip(inst.points, final_positions)]
    return dataclasses.replace(inst, points=pairs,
                               name=f"{inst.name}-reverse" if inst.name else "reverse")


def ccsd(original: np.ndarray, roundtrip: np.ndarray) -> float:
    """Mean absolute difference of two grayscale renders, normalized by the
    larger dynamic range of the two (symmetric in its arguments)."""
    a = np.asarray(original, dtype=np.float64)
    b = np.asarray(roundtrip, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"render shapes differ: {a.shape} vs {b.shape}")
    num = float(np.abs(a - b).mean())
    span = max(float(a.max() - a.min()), float(b.max() - b.min()), 1e-12)
    return num / span


def mean_distance_oracle(inst: Instruction, final_latent: np.ndarray,
                         backend: GeneratorBackend) -> float:
    """Mean distance between each dragged blob's final center and its
    intended target; blobs are matched to points by nearest initial center."""
    centers0 = backend.object_centers(backend.initial_latent())
    centersF = backend.object_centers(final_latent)
    total = 0.0
    for handle, target in inst.points:
        b = min(range(len(centers0)),
                key=lambda i: math.hypot(centers0[i][0] - handle.x,
                                         centers0[i][1] - handle.y))
        total += math.hypot(centersF[b][0] - target.x, centersF[b][1] - target.y)
    return total / len(inst.points)


@dataclass
class MetricReport:
    name: str
    method: str
    ccsd: float
    mean_distance: float | None  # None on backends without object centers
    steps_used: int
    wall_time: float
    forward_status: str
    reverse_status: str
    error: str = ""
    kernel: str = SIMILARITY_KERNEL

    def to_json_dict(self, with_timing: bool = True) -> dict:
        d = dataclasses.asdict(self)
        if not with_timing:
            d.pop("wall_time")
        return d


def _make_engine(inst: Instruction, backend: GeneratorBackend,
                 latent: np.ndarray | None, points=None):
    pairs = points if points is not None else inst.points
    if inst.method == "pointdrag":
        return PointDragEngine.create(backend, inst.tracker_config(), pairs,
                                      mask=inst.mask, latent=latent)
    return DragEngine.create(backend, inst.drag_config(), pairs,
                             mask=inst.mask, latent=latent)


def run_roundtrip(inst: Instruction) -> tuple[MetricReport, dict]:
    """Forward run, reversed run from the edited state, metrics on the pair.

    Returns the report plus the artifacts (fields and engines) for callers
    that also want renders or traces.
    """
    t0 = time.perf_counter()
    backend = build_backend(inst)
    fwd = _make_engine(inst, backend, latent=None)
    fwd.run()
    original = render_grayscale(fwd.state.F0)
    rev_inst = reverse_instruction(inst, fwd.positions())
    rev = _make_engine(rev_inst, backend, latent=fwd.state.latent,
                       points=rev_inst.points)
    rev.run()
    roundtrip = render_grayscale(backend.generate(rev.state.latent))
    try:
        md = mean_distance_oracle(inst, fwd.state.latent, backend)
    except NotImplementedError:
        md = None
    report = MetricReport(
        name=inst.name, method=inst.method,
        ccsd=ccsd(original, roundtrip),
        mean_distance=md,
        steps_used=fwd.state.substeps_total + rev.state.substeps_total,
        wall_time=time.perf_counter() - t0,
        forward_status=fwd.status.value,
        reverse_status=rev.status.value,
    )
    artifacts = {"backend": backend, "forward": fwd, "reverse": rev,
                 "original_render": original, "roundtrip_render": roundtrip}
    return report, artifacts


def run_suite(instructions: list[Instruction]) -> list[MetricReport]:
    """Run every instruction's symmetric pair; failures are recorded per
    entry and never abort the suite."""
    reports = []
    for i, inst in enumerate(instructions):
        try:
            report, _ = run_roundtrip(inst)
        except Exception as exc:  # contained: one bad instruction != dead suite
            report = MetricReport(name=inst.name or f"instruction-{i}",
                                  method=inst.method, ccsd=float("nan"),
                                  mean_distance=None, steps_used=0, wall_time=0.0,
                                  forward_status="error", reverse_status="error",
                                  error=f"{type(exc).__name__}: {exc}")
        reports.append(report)
    return reports


def write_reports(reports: list[MetricReport], out_dir: str | Path) -> None:
    """report.json + report.csv (deterministic) and timings.json (not)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "report.json", "w") as f:
        json.dump([r.to_json_dict(with_timing=False) for r in reports], f, indent=2)
        f.write("\n")
    with open(out / "report.csv", "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["name", "method", "ccsd", "mean_distance", "steps_used",
                         "forward_status", "reverse_status", "error"])
        for r in reports:
            writer.writerow([r.name, r.method, repr(r.ccsd),
                             "" if r.mean_distance is None else repr(r.mean_distance),
                             r.steps_used, r.forward_status, r.reverse_status, r.error])
    with open(out / "timings.json", "w") as f:
        json.dump({r.name: r.wall_time for r in reports}, f, indent=2)
        f.write("\n")
