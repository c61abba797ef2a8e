"""Grayscale rendering of feature maps for reports and the session API."""

from __future__ import annotations

import base64
import io
import json
from pathlib import Path

import numpy as np
from PIL import Image


def render_grayscale(F: np.ndarray) -> np.ndarray:
    """Channel-averaged (H, W) float view of a feature map."""
    return np.asarray(F, dtype=np.float64).mean(axis=2)


def normalize_to_u8(img: np.ndarray) -> tuple[np.ndarray, dict]:
    """Linear min-max normalization to uint8 plus the scale sidecar."""
    lo, hi = float(img.min()), float(img.max())
    span = hi - lo
    if span <= 0:
        return np.zeros(img.shape, dtype=np.uint8), {"min": lo, "max": hi}
    u8 = np.clip(np.round((img - lo) / span * 255.0), 0, 255).astype(np.uint8)
    return u8, {"min": lo, "max": hi}


def to_png_bytes(img: np.ndarray) -> tuple[bytes, dict]:
    u8, sidecar = normalize_to_u8(img)
    buf = io.BytesIO()
    Image.fromarray(u8, mode="L").save(buf, format="PNG")
    return buf.getvalue(), sidecar


def to_png_base64(img: np.ndarray) -> tuple[str, dict]:
    png, sidecar = to_png_bytes(img)
    return base64.b64encode(png).decode("ascii"), sidecar


def write_render(F: np.ndarray, path: str | Path) -> None:
    """PNG plus a .json sidecar recording the normalization scale."""
    path = Path(path)
    png, sidecar = to_png_bytes(render_grayscale(F))
    path.write_bytes(png)
    path.with_suffix(path.suffix + ".json").write_text(json.dumps(sidecar) + "\n")
