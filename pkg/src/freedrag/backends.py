"""Differentiable synthetic field generators.

A backend maps a flat float64 latent vector to an (H, W, C) feature map and
provides the exact reverse-mode gradient of that map. Backends are immutable
after construction; generate/vjp are pure functions of their arguments.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class GeneratorBackend:
    """Contract: deterministic generate, analytic vjp, fixed shapes."""

    latent_length: int
    output_shape: tuple[int, int, int]

    def generate(self, w: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def vjp(self, w: np.ndarray, cotangent: np.ndarray) -> np.ndarray:
        """d<cotangent, generate(w)>/dw, computed analytically."""
        raise NotImplementedError

    def initial_latent(self) -> np.ndarray:
        raise NotImplementedError

    def parameter_scales(self) -> np.ndarray:
        """Constant per-coordinate step scaling for gradient descent.

        Fixed at construction (never data-dependent); ones means plain
        uniform-rate descent.
        """
        return np.ones(self.latent_length)

    def object_centers(self, w: np.ndarray) -> list[tuple[float, float]]:
        raise NotImplementedError(f"{type(self).__name__} has no object centers")

    def _check_latent(self, w: np.ndarray) -> np.ndarray:
        w = np.asarray(w, dtype=np.float64)
        if w.shape != (self.latent_length,):
            raise ValueError(f"latent length {w.shape} != expected ({self.latent_length},)")
        return w

    def _check_cotangent(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=np.float64)
        if u.shape != self.output_shape:
            raise ValueError(f"cotangent shape {u.shape} != output shape {self.output_shape}")
        return u


class DirectFieldBackend(GeneratorBackend):
    """The latent IS the field: generate reshapes w into (H, W, C).

    init="random" draws the initial latent from N(0, scale^2) with the given
    seed; init="zeros" starts flat.
    """

    def __init__(self, grid: tuple[int, int], channels: int, seed: int = 0,
                 init: str = "random", scale: float = 0.1):
        H, W = int(grid[0]), int(grid[1])
        if H < 1 or W < 1 or channels < 1:
            raise ValueError("grid dimensions and channels must be >= 1")
        self.output_shape = (H, W, int(channels))
        self.latent_length = H * W * int(channels)
        if init == "zeros":
            self._w0 = np.zeros(self.latent_length)
        elif init == "random":
            rng = np.random.default_rng(seed)
            self._w0 = scale * rng.standard_normal(self.latent_length)
        else:
            raise ValueError(f"unknown init {init!r}")

    def generate(self, w: np.ndarray) -> np.ndarray:
        w = self._check_latent(w)
        return w.reshape(self.output_shape).copy()

    def vjp(self, w: np.ndarray, cotangent: np.ndarray) -> np.ndarray:
        self._check_latent(w)
        return self._check_cotangent(cotangent).ravel().copy()

    def initial_latent(self) -> np.ndarray:
        return self._w0.copy()


@dataclass(frozen=True)
class BlobSpec:
    """Initial parameters of one blob; mirrors its latent slot."""
    center: tuple[float, float]
    amplitude: float = 1.0
    log_width: float = 0.0


def default_width_multipliers(channels: int) -> np.ndarray:
    """Per-channel width factors, spread geometrically so channels decay at
    visibly different rates (what makes position identifiable to the loss)."""
    if channels == 1:
        return np.array([1.0])
    return np.geomspace(0.6, 3.0, channels)


# Step scaling for the blob latent roles (cx, cy, amplitude, log_width).
# Patch-aggregate losses are far more sensitive to amplitude/width than to
# position (sensitivity ratio ~ sigma^2/offset), so uniform-rate descent
# either explodes amplitudes or never moves centers; these constants level
# the roles. Sized so that at lr = 5e-3 a 0.3-amplitude blob closes most of
# a sub-pixel position gap per substep while the amplitude/width L1 limit
# cycle stays well under the 0.5*l advance gate of preset A.
BLOB_ROLE_SCALES = (200.0, 200.0, 0.003, 0.001)


class BlobBackend(GeneratorBackend):
    """Sum of Gaussian bumps with known centers.

    Latent layout per blob: (center_x, center_y, amplitude, log_width).
    Each blob renders into every channel as
        amplitude * gain[b, c] * exp(-((x-cx)^2 + (y-cy)^2) / (2*sigma_c^2)),
    sigma_c = exp(log_width) * width_multipliers[c]; the gain and width
    profiles are fixed at construction (structure, not optimization state).
    """

    def __init__(self, grid: tuple[int, int], channels: int, blobs: list[BlobSpec],
                 gains: np.ndarray | None = None,
                 width_multipliers: np.ndarray | None = None):
        H, W = int(grid[0]), int(grid[1])
        if H < 1 or W < 1 or channels < 1:
            raise ValueError("grid dimensions and channels must be >= 1")
        if not blobs:
            raise ValueError("blob backend needs at least one blob")
        self.output_shape = (H, W, int(channels))
        self.blobs = list(blobs)
        self.latent_length = 4 * len(blobs)
        if gains is None:
            gains = np.ones((len(blobs), channels))
        self.gains = np.asarray(gains, dtype=np.float64)
        if self.gains.shape != (len(blobs), channels):
            raise ValueError(f"gains shape {self.gains.shape} != {(len(blobs), channels)}")
        if width_multipliers is None:
            width_multipliers = default_width_multipliers(channels)
        self.width_multipliers = np.asarray(width_multipliers, dtype=np.float64)
        if self.width_multipliers.shape != (channels,):
            raise ValueError("need one width multiplier per channel")
        if np.any(self.width_multipliers <= 0):
            raise ValueError("width multipliers must be positive")
        ys, xs = np.mgrid[0:H, 0:W]
        self._xs = xs.astype(np.float64)
        self._ys = ys.astype(np.float64)

    def initial_latent(self) -> np.ndarray:
        w = np.empty(self.latent_length)
        for b, spec in enumerate(self.blobs):
            w[4 * b : 4 * b + 4] = (spec.center[0], spec.center[1],
                                    spec.amplitude, spec.log_width)
        return w

    def parameter_scales(self) -> np.ndarray:
        return np.tile(np.asarray(BLOB_ROLE_SCALES), len(self.blobs))

    def object_centers(self, w: np.ndarray) -> list[tuple[float, float]]:
        w = self._check_latent(w)
        return [(w[4 * b], w[4 * b + 1]) for b in range(len(self.blobs))]

    def _bump(self, w: np.ndarray, b: int):
        """Per-channel exponentials and shared squared distances of blob b."""
        cx, cy, amp, logw = w[4 * b : 4 * b + 4]
        sigma = np.exp(logw) * self.width_multipliers
        rho2 = (self._xs - cx) ** 2 + (self._ys - cy) ** 2
        expo = np.exp(-rho2[:, :, None] / (2.0 * sigma[None, None, :] ** 2))
        return cx, cy, amp, sigma, rho2, expo

    def generate(self, w: np.ndarray) -> np.ndarray:
        w = self._check_latent(w)
        F = np.zeros(self.output_shape)
        for b in range(len(self.blobs)):
            _, _, amp, _, _, expo = self._bump(w, b)
            F += amp * self.gains[b][None, None, :] * expo
        return F

    def vjp(self, w: np.ndarray, cotangent: np.ndarray) -> np.ndarray:
        w = self._check_latent(w)
        u = self._check_cotangent(cotangent)
        g = np.empty(self.latent_length)
        for b in range(len(self.blobs)):
            cx, cy, amp, sigma, rho2, expo = self._bump(w, b)
            ug = u * self.gains[b][None, None, :] * expo  # d<u,F>/d(amp) integrand
            inv_s2 = 1.0 / sigma**2
            g[4 * b + 0] = amp * np.sum(ug * ((self._xs - cx)[:, :, None] * inv_s2))
            g[4 * b + 1] = amp * np.sum(ug * ((self._ys - cy)[:, :, None] * inv_s2))
            g[4 * b + 2] = np.sum(ug)
            g[4 * b + 3] = amp * np.sum(ug * (rho2[:, :, None] * inv_s2))
        return g
