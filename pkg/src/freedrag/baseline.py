"""Point-dragging baseline: alternate one motion-supervision gradient step
with a nearest-feature tracking search, the classic drag-editing cycle.

Tracking matches the point feature sampled from the CURRENT field against
the point's feature in the initial field, over the integer cells of a square
window around the previous position. Large per-step changes can carry the
content outside the window (miss tracking) and look-alike regions inside it
can capture the search (ambiguous tracking); both are reproduced here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .backends import GeneratorBackend
from .core import Case, DragPoint, DragState, PointStatus, TraceRow
from .engine import DivergedError, RunStatus
from .sampling import Point2, sample, sample_vjp


@dataclass
class TrackConfig:
    search_radius: float = 3.0  # half-size of the square tracking window, px
    motion_step: float = 1.0    # supervision look-ahead along the target direction, px
    lr: float = 0.07
    max_steps: int = 300
    terminate_dist: float = 2.0

    def validate(self) -> "TrackConfig":
        if self.search_radius <= 0:
            raise ValueError("search_radius must be > 0")
        if self.motion_step <= 0:
            raise ValueError("motion_step must be > 0")
        return self


def track(F0_feat: np.ndarray, F: np.ndarray, prev: Point2, radius: float) -> Point2:
    """Integer grid cell inside the window [prev +- radius] whose feature is
    L1-nearest to F0_feat; ties break in row-major order."""
    if radius <= 0:
        raise ValueError("radius must be > 0")
    H, W = F.shape[0], F.shape[1]
    x_lo = max(0, math.ceil(prev.x - radius))
    x_hi = min(W - 1, math.floor(prev.x + radius))
    y_lo = max(0, math.ceil(prev.y - radius))
    y_hi = min(H - 1, math.floor(prev.y + radius))
    best = prev
    best_val = math.inf
    for y in range(y_lo, y_hi + 1):
        for x in range(x_lo, x_hi + 1):
            val = float(np.abs(F[y, x] - F0_feat).sum())
            if val < best_val:
                best, best_val = Point2(float(x), float(y)), val
    return best


def motion_supervision_step(state: DragState, backend: GeneratorBackend,
                            cfg: TrackConfig) -> float:
    """One gradient step pulling the feature just ahead of each handle toward
    the handle's own (detached) current feature; returns the pre-step loss."""
    F = backend.generate(state.latent)
    dF = np.zeros(F.shape)
    loss = 0.0
    for p in state.points:
        if p.status is not PointStatus.ACTIVE:
            continue
        dx, dy = p.target.x - p.current.x, p.target.y - p.current.y
        dist = math.hypot(dx, dy)
        if dist == 0.0:
            continue
        ahead = Point2(p.current.x + cfg.motion_step * dx / dist,
                       p.current.y + cfg.motion_step * dy / dist)
        res = sample(F, ahead) - sample(F, p.current)  # second term detached
        loss += float(np.abs(res).sum())
        dF += sample_vjp(F.shape, ahead, np.sign(res))
    grad = backend.vjp(state.latent, dF)
    if not (math.isfinite(loss) and np.all(np.isfinite(grad))):
        raise DivergedError(f"non-finite baseline loss or gradient at step "
                            f"{state.substeps_total}", state.trace)
    state.latent = state.latent - cfg.lr * backend.parameter_scales() * grad
    state.substeps_total += 1
    return loss


def init_point_drag(backend: GeneratorBackend, cfg: TrackConfig,
                    pairs: list[tuple[Point2, Point2]],
                    mask: np.ndarray | None = None,
                    latent: np.ndarray | None = None) -> tuple[DragState, list[np.ndarray]]:
    """Fresh state plus the per-point reference features from the initial field."""
    cfg.validate()
    w0 = backend.initial_latent() if latent is None else np.asarray(latent, dtype=np.float64).copy()
    F0 = backend.generate(w0)
    F0.setflags(write=False)
    points = []
    refs = []
    for handle, target in pairs:
        h = Point2(float(handle[0]), float(handle[1]))
        t = Point2(float(target[0]), float(target[1]))
        points.append(DragPoint(origin=h, target=t, current=h,
                                template=sample(F0, h)))
        refs.append(sample(F0, h))
    state = DragState(latent=w0, points=points, F0=F0, mask=mask)
    for p in state.points:
        if math.hypot(p.current.x - p.target.x, p.current.y - p.target.y) <= cfg.terminate_dist:
            p.status = PointStatus.TERMINATED
    return state, refs


def step_point_drag(state: DragState, refs: list[np.ndarray],
                    backend: GeneratorBackend, cfg: TrackConfig) -> RunStatus:
    """One supervision step followed by tracking of every active point."""
    if not state.active_points():
        return RunStatus.CONVERGED
    if state.substeps_total >= cfg.max_steps:
        return RunStatus.STEP_BUDGET_EXHAUSTED
    k = state.drag_index + 1
    losses = [motion_supervision_step(state, backend, cfg)]
    F = backend.generate(state.latent)
    rows = []
    for i, p in enumerate(state.points):
        if p.status is not PointStatus.ACTIVE:
            continue
        p.L_in = float(np.abs(sample(F, p.current) - refs[i]).sum())
        p.current = track(refs[i], F, p.current, cfg.search_radius)
        p.L_en = float(np.abs(sample(F, p.current) - refs[i]).sum())
        p.lambda_last = 0.0
        rows.append(TraceRow(k=k, point_index=i, hx=p.current.x, hy=p.current.y,
                             L_in=p.L_in, L_en=p.L_en, lam=0.0,
                             case=Case.TRACK.value, loss=losses[0], substeps=1))
        if math.hypot(p.current.x - p.target.x, p.current.y - p.target.y) <= cfg.terminate_dist:
            p.status = PointStatus.TERMINATED
    state.drag_index = k
    state.trace.append_drag(rows, losses)
    if not state.active_points():
        return RunStatus.CONVERGED
    if state.substeps_total >= cfg.max_steps:
        return RunStatus.STEP_BUDGET_EXHAUSTED
    return RunStatus.RUNNING


def run_point_drag(state: DragState, refs: list[np.ndarray],
                   backend: GeneratorBackend, cfg: TrackConfig) -> tuple[DragState, RunStatus]:
    try:
        while True:
            status = step_point_drag(state, refs, backend, cfg)
            if status is not RunStatus.RUNNING:
                return state, status
    except DivergedError:
        return state, RunStatus.DIVERGED


@dataclass
class PointDragEngine:
    """Stepping wrapper mirroring DragEngine for paired evaluation."""

    backend: GeneratorBackend
    cfg: TrackConfig
    state: DragState
    refs: list[np.ndarray] = field(default_factory=list)
    status: RunStatus = RunStatus.RUNNING

    @classmethod
    def create(cls, backend: GeneratorBackend, cfg: TrackConfig,
               pairs: list[tuple[Point2, Point2]],
               mask: np.ndarray | None = None,
               latent: np.ndarray | None = None) -> "PointDragEngine":
        state, refs = init_point_drag(backend, cfg, pairs, mask=mask, latent=latent)
        eng = cls(backend=backend, cfg=cfg, state=state, refs=refs)
        if not state.active_points():
            eng.status = RunStatus.CONVERGED
        return eng

    def step(self) -> RunStatus:
        if self.status is not RunStatus.RUNNING:
            return self.status
        try:
            self.status = step_point_drag(self.state, self.refs, self.backend, self.cfg)
        except DivergedError:
            self.status = RunStatus.DIVERGED
        return self.status

    def run(self) -> RunStatus:
        while self.status is RunStatus.RUNNING:
            self.step()
        return self.status

    def positions(self) -> list[Point2]:
        return [p.current for p in self.state.points]
