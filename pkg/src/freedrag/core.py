"""Feature-dragging primitives: losses, adaptive template coefficient,
candidate localization on the handle-target line, and the backtracking rule.

All positions live on the segment [origin, target]; all feature vectors are
(C,) float64 arrays compared in L1.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .sampling import Point2, aggregate


class Case(str, enum.Enum):
    ADVANCE = "advance"
    FREEZE = "freeze"
    FALLBACK = "fallback"
    TRACK = "track"  # used by the point-drag baseline's shared trace schema


class PointStatus(str, enum.Enum):
    ACTIVE = "active"
    TERMINATED = "terminated"


@dataclass
class DragConfig:
    """Hyperparameters of the dragging loop.

    l: feature-discrepancy target a localization step aims for.
    d: maximum single movement distance in px.
    r: patch radius of the feature aggregate.
    gamma: mask-loss weight.
    lambda_cap: upper bound on the template update coefficient.
    learning_rate: None resolves to the backend's default at engine init.
    adaptive_template / backtracking: ablation switches (both on = full method).
    """

    l: float = 0.3
    d: float = 3.0
    r: int = 3
    gamma: float = 10.0
    lambda_cap: float = 0.8
    steps_per_drag: int = 5
    max_total_steps: int = 300
    learning_rate: float | None = None
    terminate_dist: float = 2.0
    adaptive_template: bool = True
    backtracking: bool = True

    def validate(self) -> "DragConfig":
        if self.l <= 0:
            raise ValueError("l must be > 0")
        if self.d <= 0:
            raise ValueError("d must be > 0")
        if self.r < 0:
            raise ValueError("r must be >= 0")
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")
        if not (0 < self.lambda_cap <= 1):
            raise ValueError("lambda_cap must be in (0, 1]")
        if self.steps_per_drag < 1:
            raise ValueError("steps_per_drag must be >= 1")
        if self.terminate_dist <= 0:
            raise ValueError("terminate_dist must be > 0")
        return self


def preset_a() -> DragConfig:
    return DragConfig(l=0.3, d=3.0)


def preset_b() -> DragConfig:
    return DragConfig(l=0.4, d=4.0)


@dataclass
class DragPoint:
    origin: Point2
    target: Point2
    current: Point2
    template: np.ndarray
    L_in: float = 0.0
    L_en: float = 0.0
    lambda_last: float = 0.0
    status: PointStatus = PointStatus.ACTIVE


@dataclass
class TraceRow:
    k: int
    point_index: int
    hx: float
    hy: float
    L_in: float
    L_en: float
    lam: float
    case: str
    loss: float
    substeps: int


@dataclass
class DragTrace:
    """Append-only per-drag log; rows feed the CSV, metrics and the UI."""

    rows: list[TraceRow] = field(default_factory=list)
    substep_losses: list[list[float]] = field(default_factory=list)  # one list per drag

    def append_drag(self, rows: list[TraceRow], losses: list[float]) -> None:
        self.rows.extend(rows)
        self.substep_losses.append(list(losses))

    def snapshot(self) -> "DragTrace":
        return DragTrace(rows=list(self.rows),
                         substep_losses=[list(ls) for ls in self.substep_losses])


@dataclass
class DragState:
    latent: np.ndarray
    points: list[DragPoint]
    F0: np.ndarray  # initial feature map, frozen (writeable=False)
    mask: np.ndarray | None = None  # (H, W) in {0, 1}; 1 marks the editable region
    drag_index: int = 0
    substeps_total: int = 0
    trace: DragTrace = field(default_factory=DragTrace)

    def active_points(self) -> list[DragPoint]:
        return [p for p in self.points if p.status is PointStatus.ACTIVE]


def calibrate(l: float) -> tuple[float, float]:
    """Closed-form sigmoid constants pinned by lambda(0.2*l) = 0.5 and
    lambda(0.8*l) = 0.1: alpha = ln(9)/(0.6*l), beta = 0.2*l."""
    if l <= 0:
        raise ValueError("l must be > 0")
    return math.log(9.0) / (0.6 * l), 0.2 * l


def lambda_coeff(L_en: float, alpha: float, beta: float, cap: float) -> float:
    """Capped decreasing sigmoid of the end-of-drag discrepancy."""
    if not (0 < cap <= 1):
        raise ValueError("cap must be in (0, 1]")
    z = alpha * (L_en - beta)
    if z >= 0:
        sig = math.exp(-z) / (1.0 + math.exp(-z))
    else:
        sig = 1.0 / (1.0 + math.exp(z))
    return min(cap, sig)


def update_template(T: np.ndarray, Fr: np.ndarray, lam: float) -> np.ndarray:
    """Convex combination lam*Fr + (1-lam)*T."""
    T = np.asarray(T, dtype=np.float64)
    Fr = np.asarray(Fr, dtype=np.float64)
    if T.shape != Fr.shape:
        raise ValueError(f"template shape {T.shape} != feature shape {Fr.shape}")
    if not (0.0 <= lam <= 1.0):
        raise ValueError("lambda must be in [0, 1]")
    return lam * Fr + (1.0 - lam) * T


def candidate_set(h: Point2, t: Point2, d: float) -> list[tuple[float, Point2]]:
    """Candidate positions h + j*(t-h)/|t-h| for j = 0.1d, ..., d, each j
    clamped to |t-h| so nothing overshoots the target. Returns (j, point)
    pairs in increasing-j order with exact duplicates collapsed; empty when
    h == t.
    """
    dx, dy = t.x - h.x, t.y - h.y
    dist = math.hypot(dx, dy)
    if dist == 0.0:
        return []
    ux, uy = dx / dist, dy / dist
    out: list[tuple[float, Point2]] = []
    for i in range(1, 11):
        j = min(d * i / 10.0, dist)
        q = Point2(h.x + j * ux, h.y + j * uy)
        if out and out[-1][0] == j:
            continue
        out.append((j, q))
    return out


def discrepancy(F: np.ndarray, h: Point2, T: np.ndarray, r: int) -> float:
    """L1 distance between the patch aggregate at h and the template."""
    return float(np.abs(aggregate(F, h, r) - T).sum())


def localize(h: Point2, t: Point2, T: np.ndarray, d: float, l: float,
             F: np.ndarray, r: int) -> Point2 | None:
    """Pick the candidate whose aggregate discrepancy is nearest l; ties go
    to the smallest step j. None when the candidate set is empty (h == t)."""
    best: Point2 | None = None
    best_val = math.inf
    for j, q in candidate_set(h, t, d):
        val = abs(discrepancy(F, q, T, r) - l)
        if val < best_val:
            best, best_val = q, val
    return best


def _clamp_to_segment(p: Point2, origin: Point2, target: Point2) -> Point2:
    """Project p's line parameter into [0, 1] along origin->target."""
    dx, dy = target.x - origin.x, target.y - origin.y
    L2 = dx * dx + dy * dy
    if L2 == 0.0:
        return origin
    s = ((p.x - origin.x) * dx + (p.y - origin.y) * dy) / L2
    s = min(max(s, 0.0), 1.0)
    return Point2(origin.x + s * dx, origin.y + s * dy)


def next_position(point: DragPoint, T_next: np.ndarray, cfg: DragConfig,
                  F: np.ndarray) -> tuple[Point2, Case]:
    """Backtracking rule on the previous drag's (L_in, L_en):

    - L_en <= 0.5*l            -> advance: search [h, h+d] for discrepancy l.
    - L_en <= L_in             -> freeze: stay, keep optimizing toward T.
    - otherwise                -> fallback: restart the search d behind h
                                  (clamped at the origin) with range 2d and
                                  discrepancy target 0.
    """
    h, t = point.current, point.target
    if not cfg.backtracking or point.L_en <= 0.5 * cfg.l:
        case = Case.ADVANCE
        chosen = localize(h, t, T_next, cfg.d, cfg.l, F, cfg.r)
    elif point.L_en <= point.L_in:
        return h, Case.FREEZE
    else:
        case = Case.FALLBACK
        dx, dy = t.x - h.x, t.y - h.y
        dist = math.hypot(dx, dy)
        if dist == 0.0:
            return h, case
        start = Point2(h.x - cfg.d * dx / dist, h.y - cfg.d * dy / dist)
        start = _clamp_to_segment(start, point.origin, t)
        chosen = localize(start, t, T_next, 2.0 * cfg.d, 0.0, F, cfg.r)
    if chosen is None:
        return h, case
    return chosen, case


def drag_loss(points: list[DragPoint], F: np.ndarray, r: int) -> float:
    """Sum of template discrepancies over the active points."""
    total = 0.0
    for p in points:
        if p.status is PointStatus.ACTIVE:
            total += discrepancy(F, p.current, p.template, r)
    return total


def mask_loss(F: np.ndarray, F0: np.ndarray, M: np.ndarray) -> float:
    """L1 of the field change where the mask is 0 (outside the editable region)."""
    if F.shape != F0.shape:
        raise ValueError(f"feature shapes differ: {F.shape} vs {F0.shape}")
    M = np.asarray(M)
    if M.shape != F.shape[:2]:
        raise ValueError(f"mask shape {M.shape} != grid {F.shape[:2]}")
    keep = (1.0 - M.astype(np.float64))[:, :, None]
    return float(np.abs((F0 - F) * keep).sum())


def total_loss(points: list[DragPoint], F: np.ndarray, F0: np.ndarray,
               mask: np.ndarray | None, gamma: float, r: int) -> float:
    loss = drag_loss(points, F, r)
    if mask is not None:
        loss += gamma * mask_loss(F, F0, mask)
    return loss
