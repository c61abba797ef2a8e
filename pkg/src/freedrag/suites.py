"""Built-in instruction families for validation and paired comparisons.

All generators are deterministic in their seed. The blob parameters sit at
the calibrated operating point of the default role scales (amplitude ~0.3,
log-width ~0), where the dragging loop tracks content reliably.
"""

from __future__ import annotations

import math

import numpy as np

from .instructions import Instruction
from .sampling import Point2

GRID = (64, 64)
CHANNELS = 4


def _geometry(rng: np.random.Generator, length_range: tuple[float, float],
              margin: float = 12.0) -> tuple[Point2, Point2]:
    """Handle/target pair with the requested drag length, inside the grid."""
    H, W = GRID
    length = rng.uniform(*length_range)
    while True:
        sx = rng.uniform(margin, W - 1 - margin)
        sy = rng.uniform(margin, H - 1 - margin)
        ang = rng.uniform(0, 2 * math.pi)
        tx = sx + length * math.cos(ang)
        ty = sy + length * math.sin(ang)
        if margin - 4 <= tx <= W + 3 - margin and margin - 4 <= ty <= H + 3 - margin:
            return Point2(sx, sy), Point2(tx, ty)


def convergence_instance(seed: int, method: str = "freedrag") -> Instruction:
    """Single clean blob, drag length 10-40 px."""
    rng = np.random.default_rng(1000 + seed)
    handle, target = _geometry(rng, (10.0, 40.0))
    params = {
        "grid": list(GRID), "channels": CHANNELS,
        "blobs": [{"center": [handle.x, handle.y], "amplitude": 0.3, "log_width": 0.0}],
        "gains": [[1.0] * CHANNELS],
    }
    return Instruction(backend_type="blob", backend_params=params, seed=seed,
                       points=[(handle, target)], method=method,
                       name=f"convergence-{seed:02d}")


def standard_instance(seed: int, method: str = "freedrag",
                      config: dict | None = None) -> Instruction:
    """Dragged blob plus nearby static obstacles; used for metric comparisons.

    Obstacle interference along the way makes per-drag quality fluctuate,
    which is what the adaptive template and the freeze/fallback corrections
    respond to.
    """
    rng = np.random.default_rng(2000 + seed)
    H, W = GRID
    handle, target = _geometry(rng, (26.0, 34.0))
    dx, dy = target.x - handle.x, target.y - handle.y
    dist = math.hypot(dx, dy)
    ux, uy = dx / dist, dy / dist
    blobs = [{"center": [handle.x, handle.y],
              "amplitude": float(rng.uniform(0.28, 0.33)),
              "log_width": float(rng.uniform(0.08, 0.18))}]
    gains = [list(rng.uniform(0.8, 1.2, CHANNELS))]
    n_obstacles = int(rng.integers(1, 3))
    for _ in range(n_obstacles):
        along = rng.uniform(0.35, 0.75) * dist
        side = float(rng.choice([-1.0, 1.0])) * rng.uniform(4.5, 7.0)
        blobs.append({"center": [float(np.clip(handle.x + along * ux - side * uy, 4, W - 5)),
                                 float(np.clip(handle.y + along * uy + side * ux, 4, H - 5))],
                      "amplitude": float(rng.uniform(0.28, 0.33)),
                      "log_width": float(rng.uniform(0.08, 0.18))})
        gains.append(list(rng.uniform(0.8, 1.2, CHANNELS)))
    params = {"grid": list(GRID), "channels": CHANNELS, "blobs": blobs, "gains": gains}
    return Instruction(backend_type="blob", backend_params=params, seed=seed,
                       points=[(handle, target)], method=method,
                       config=dict(config or {}), name=f"standard-{seed:02d}")


def adversarial_instance(seed: int, method: str = "freedrag") -> Instruction:
    """Dragged blob with an identical twin parked just off the drag path.

    Geometry is integer-aligned and axis-aligned: the twin's pristine
    integer-centered feature is an exact match for the handle's initial
    feature, so nearest-feature tracking locks onto the wrong object as soon
    as the twin enters its search window, while the line-constrained feature
    drag never leaves the path.
    """
    rng = np.random.default_rng(3000 + seed)
    H, W = GRID
    length = int(rng.integers(20, 29))
    horizontal = bool(rng.integers(0, 2))
    flip = -1 if rng.integers(0, 2) else 1
    sx = int(rng.integers(14, W - 14 - length)) if horizontal else int(rng.integers(14, W - 14))
    sy = int(rng.integers(14, H - 14)) if horizontal else int(rng.integers(14, H - 14 - length))
    if horizontal:
        handle, target = Point2(float(sx), float(sy)), Point2(float(sx + length), float(sy))
    else:
        handle, target = Point2(float(sx), float(sy)), Point2(float(sx), float(sy + length))
    side = 3 * flip
    along = int(rng.integers(length * 2 // 5, length * 3 // 5))
    if horizontal:
        twin = (handle.x + along, handle.y + side)
    else:
        twin = (handle.x + side, handle.y + along)
    amplitude = float(rng.uniform(0.29, 0.32))
    log_width = float(rng.uniform(-0.25, -0.15))
    gain = list(rng.uniform(0.85, 1.15, CHANNELS))
    params = {
        "grid": list(GRID), "channels": CHANNELS,
        "blobs": [
            {"center": [handle.x, handle.y], "amplitude": amplitude, "log_width": log_width},
            {"center": [float(twin[0]), float(twin[1])], "amplitude": amplitude,
             "log_width": log_width},
        ],
        "gains": [gain, list(gain)],
    }
    return Instruction(backend_type="blob", backend_params=params, seed=seed,
                       points=[(handle, target)], method=method,
                       name=f"adversarial-{seed:02d}")


def convergence_suite(n: int = 20, method: str = "freedrag") -> list[Instruction]:
    return [convergence_instance(s, method) for s in range(n)]


def standard_suite(n: int = 20, method: str = "freedrag",
                   config: dict | None = None) -> list[Instruction]:
    return [standard_instance(s, method, config) for s in range(n)]


def adversarial_suite(n: int = 20, method: str = "freedrag") -> list[Instruction]:
    return [adversarial_instance(s, method) for s in range(n)]
