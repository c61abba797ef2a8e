"""Continuous-coordinate access to feature maps.

A feature map is a float64 ndarray of shape (H, W, C) indexed [y, x, c].
Points are (x, y) with x growing rightward and y downward; the valid
rectangle is [0, W-1] x [0, H-1] and coordinates outside it are clamped
(border replication), so the position-gradient is zero past the border.
"""

from __future__ import annotations

from typing import NamedTuple, Sequence

import numpy as np


class Point2(NamedTuple):
    x: float
    y: float


def _as_xy(p: Sequence[float]) -> tuple[float, float]:
    x, y = float(p[0]), float(p[1])
    if not (np.isfinite(x) and np.isfinite(y)):
        raise ValueError(f"non-finite sample coordinates ({x}, {y})")
    return x, y


def _corner_data(shape: tuple[int, ...], xs: np.ndarray, ys: np.ndarray):
    """Bilinear corner indices and fractional weights for a batch of points.

    Returns (x0, y0, fx, fy) with x0/y0 clipped so x0+1 and y0+1 are valid
    (for single-row/column maps the far corner collapses onto the near one
    and its weight is forced to zero).
    """
    H, W = shape[0], shape[1]
    xs = np.clip(xs, 0.0, W - 1.0)
    ys = np.clip(ys, 0.0, H - 1.0)
    x0 = np.minimum(np.floor(xs), W - 2).astype(np.intp) if W > 1 else np.zeros_like(xs, dtype=np.intp)
    y0 = np.minimum(np.floor(ys), H - 2).astype(np.intp) if H > 1 else np.zeros_like(ys, dtype=np.intp)
    x0 = np.maximum(x0, 0)
    y0 = np.maximum(y0, 0)
    fx = xs - x0 if W > 1 else np.zeros_like(xs)
    fy = ys - y0 if H > 1 else np.zeros_like(ys)
    return x0, y0, fx, fy


def _batch_sample(F: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Bilinear samples at each (xs[i], ys[i]); returns (N, C)."""
    H, W = F.shape[0], F.shape[1]
    x0, y0, fx, fy = _corner_data(F.shape, xs, ys)
    x1 = np.minimum(x0 + 1, W - 1)
    y1 = np.minimum(y0 + 1, H - 1)
    fx = fx[:, None]
    fy = fy[:, None]
    return (
        F[y0, x0] * (1 - fy) * (1 - fx)
        + F[y0, x1] * (1 - fy) * fx
        + F[y1, x0] * fy * (1 - fx)
        + F[y1, x1] * fy * fx
    )


def sample(F: np.ndarray, p: Sequence[float]) -> np.ndarray:
    """Bilinear interpolation of F at point p = (x, y); returns a (C,) vector."""
    x, y = _as_xy(p)
    return _batch_sample(F, np.array([x]), np.array([y]))[0]


def _patch_positions(h: Sequence[float], r: int) -> tuple[np.ndarray, np.ndarray]:
    """Row-major (x, y) positions of the (2r+1)^2 unit-spaced patch around h."""
    x, y = _as_xy(h)
    offs = np.arange(-r, r + 1, dtype=np.float64)
    dy, dx = np.meshgrid(offs, offs, indexing="ij")
    return x + dx.ravel(), y + dy.ravel()


def aggregate(F: np.ndarray, h: Sequence[float], r: int) -> np.ndarray:
    """Patch feature aggregate: sum of samples over the (2r+1)x(2r+1) grid at h."""
    if r < 0:
        raise ValueError(f"patch radius must be >= 0, got {r}")
    xs, ys = _patch_positions(h, r)
    return _batch_sample(F, xs, ys).sum(axis=0)


def sample_vjp(shape: tuple[int, int, int], p: Sequence[float], u: np.ndarray) -> np.ndarray:
    """Cotangent map of sample: distributes u over the four corner cells."""
    return aggregate_vjp(shape, p, 0, u)


def aggregate_vjp(shape: tuple[int, int, int], h: Sequence[float], r: int, u: np.ndarray) -> np.ndarray:
    """Cotangent map of aggregate w.r.t. F, i.e. d<u, aggregate(F, h, r)>/dF."""
    if r < 0:
        raise ValueError(f"patch radius must be >= 0, got {r}")
    H, W, C = shape
    u = np.asarray(u, dtype=np.float64)
    if u.shape != (C,):
        raise ValueError(f"cotangent length {u.shape} does not match channels {C}")
    xs, ys = _patch_positions(h, r)
    x0, y0, fx, fy = _corner_data(shape, xs, ys)
    x1 = np.minimum(x0 + 1, W - 1)
    y1 = np.minimum(y0 + 1, H - 1)
    out = np.zeros(shape, dtype=np.float64)
    w00 = ((1 - fy) * (1 - fx))[:, None] * u
    w01 = ((1 - fy) * fx)[:, None] * u
    w10 = (fy * (1 - fx))[:, None] * u
    w11 = (fy * fx)[:, None] * u
    np.add.at(out, (y0, x0), w00)
    np.add.at(out, (y0, x1), w01)
    np.add.at(out, (y1, x0), w10)
    np.add.at(out, (y1, x1), w11)
    return out


def aggregate_point_grad(F: np.ndarray, h: Sequence[float], r: int) -> np.ndarray:
    """Jacobian of aggregate w.r.t. the point, shape (C, 2) for (d/dx, d/dy).

    Zero in a clamped direction; undefined exactly on integer coordinates
    (one-sided value returned there).
    """
    if r < 0:
        raise ValueError(f"patch radius must be >= 0, got {r}")
    H, W, C = F.shape
    xs, ys = _patch_positions(h, r)
    inside_x = (xs > 0.0) & (xs < W - 1.0)
    inside_y = (ys > 0.0) & (ys < H - 1.0)
    x0, y0, fx, fy = _corner_data(F.shape, xs, ys)
    x1 = np.minimum(x0 + 1, W - 1)
    y1 = np.minimum(y0 + 1, H - 1)
    fx = fx[:, None]
    fy = fy[:, None]
    ddx = (F[y0, x1] - F[y0, x0]) * (1 - fy) + (F[y1, x1] - F[y1, x0]) * fy
    ddy = (F[y1, x0] - F[y0, x0]) * (1 - fx) + (F[y1, x1] - F[y0, x1]) * fx
    ddx *= inside_x[:, None]
    ddy *= inside_y[:, None]
    return np.stack([ddx.sum(axis=0), ddy.sum(axis=0)], axis=1)
