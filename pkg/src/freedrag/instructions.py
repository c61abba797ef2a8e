"""Dragging-instruction schema (version 1) and backend construction.

An instruction bundles a backend spec, the handle/target pairs, an optional
run-length-encoded binary mask, the method to run, and config overrides.
Everything is plain JSON so the CLI, the evaluation suite, and the session
service share one format.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .backends import BlobBackend, BlobSpec, DirectFieldBackend, GeneratorBackend
from .baseline import TrackConfig
from .core import DragConfig
from .sampling import Point2

SCHEMA_VERSION = 1
METHODS = ("freedrag", "pointdrag")


def encode_mask(mask: np.ndarray) -> dict:
    """Row-major RLE: alternating run lengths starting with a zero-run."""
    mask = np.asarray(mask)
    if mask.ndim != 2:
        raise ValueError("mask must be a 2-D grid")
    flat = (mask.ravel() != 0).astype(np.int64)
    runs: list[int] = []
    current, count = 0, 0
    for v in flat:
        if v == current:
            count += 1
        else:
            runs.append(count)
            current, count = v, 1
    runs.append(count)
    return {"height": int(mask.shape[0]), "width": int(mask.shape[1]), "runs": runs}


def decode_mask(obj: dict) -> np.ndarray:
    H, W = int(obj["height"]), int(obj["width"])
    runs = obj["runs"]
    if sum(runs) != H * W:
        raise ValueError(f"mask runs sum to {sum(runs)}, expected {H * W}")
    flat = np.zeros(H * W, dtype=np.uint8)
    pos, value = 0, 0
    for run in runs:
        if value:
            flat[pos : pos + run] = 1
        pos += run
        value ^= 1
    return flat.reshape(H, W)


@dataclass
class Instruction:
    backend_type: str  # "blob" | "direct"
    backend_params: dict
    seed: int
    points: list[tuple[Point2, Point2]]  # (handle, target)
    mask: np.ndarray | None = None
    method: str = "freedrag"
    config: dict = field(default_factory=dict)        # DragConfig overrides
    track_config: dict = field(default_factory=dict)  # TrackConfig overrides
    name: str = ""

    def drag_config(self) -> DragConfig:
        cfg = DragConfig(**self.config)
        return cfg.validate()

    def tracker_config(self) -> TrackConfig:
        cfg = TrackConfig(**self.track_config)
        return cfg.validate()

    def to_json_dict(self) -> dict:
        d: dict[str, Any] = {
            "schema_version": SCHEMA_VERSION,
            "backend": {"type": self.backend_type, "params": self.backend_params,
                        "seed": self.seed},
            "points": [{"handle": [h.x, h.y], "target": [t.x, t.y]}
                       for h, t in self.points],
            "method": self.method,
        }
        if self.name:
            d["name"] = self.name
        if self.mask is not None:
            d["mask"] = encode_mask(self.mask)
        if self.config:
            d["config"] = dict(self.config)
        if self.track_config:
            d["track_config"] = dict(self.track_config)
        return d

    @classmethod
    def from_json_dict(cls, d: dict) -> "Instruction":
        version = d.get("schema_version")
        if version != SCHEMA_VERSION:
            raise ValueError(f"unsupported schema_version {version!r}")
        be = d["backend"]
        if be["type"] not in ("blob", "direct"):
            raise ValueError(f"unknown backend type {be['type']!r}")
        method = d.get("method", "freedrag")
        if method not in METHODS:
            raise ValueError(f"unknown method {method!r}")
        raw_points = d["points"]
        if not raw_points:
            raise ValueError("instruction needs at least one point pair")
        points = [(Point2(float(p["handle"][0]), float(p["handle"][1])),
                   Point2(float(p["target"][0]), float(p["target"][1])))
                  for p in raw_points]
        mask = decode_mask(d["mask"]) if d.get("mask") else None
        inst = cls(backend_type=be["type"], backend_params=dict(be.get("params", {})),
                   seed=int(be.get("seed", 0)), points=points, mask=mask,
                   method=method, config=dict(d.get("config", {})),
                   track_config=dict(d.get("track_config", {})),
                   name=d.get("name", ""))
        inst.validate()
        return inst

    def validate(self) -> "Instruction":
        backend = build_backend(self)
        H, W, _ = backend.output_shape
        for h, t in self.points:
            for p in (h, t):
                if not (0 <= p.x <= W - 1 and 0 <= p.y <= H - 1):
                    raise ValueError(f"point ({p.x}, {p.y}) outside grid {W}x{H}")
        if self.mask is not None and self.mask.shape != (H, W):
            raise ValueError(f"mask shape {self.mask.shape} != grid {(H, W)}")
        self.drag_config()
        self.tracker_config()
        return self


def load_instruction(path: str | Path) -> Instruction:
    with open(path) as f:
        return Instruction.from_json_dict(json.load(f))


def save_instruction(inst: Instruction, path: str | Path) -> None:
    with open(path, "w") as f:
        json.dump(inst.to_json_dict(), f, indent=2)
        f.write("\n")


def load_suite(path: str | Path) -> list[Instruction]:
    with open(path) as f:
        data = json.load(f)
    items = data["instructions"] if isinstance(data, dict) else data
    return [Instruction.from_json_dict(d) for d in items]


def save_suite(instructions: list[Instruction], path: str | Path) -> None:
    with open(path, "w") as f:
        json.dump({"instructions": [i.to_json_dict() for i in instructions]}, f, indent=2)
        f.write("\n")


def build_backend(inst: Instruction) -> GeneratorBackend:
    """Deterministic backend construction from the spec + seed."""
    params = inst.backend_params
    grid = tuple(params.get("grid", (64, 64)))
    channels = int(params.get("channels", 4))
    if inst.backend_type == "direct":
        return DirectFieldBackend(grid, channels, seed=inst.seed,
                                  init=params.get("init", "random"),
                                  scale=float(params.get("scale", 0.1)))
    if "blobs" in params:
        blobs = [BlobSpec(center=tuple(b["center"]),
                          amplitude=float(b.get("amplitude", 0.3)),
                          log_width=float(b.get("log_width", 0.0)))
                 for b in params["blobs"]]
        gains = np.asarray(params["gains"], dtype=np.float64) if "gains" in params else None
    else:
        rng = np.random.default_rng(inst.seed)
        count = int(params.get("blob_count", 2))
        H, W = grid
        blobs = [BlobSpec(center=(float(rng.uniform(10, W - 10)), float(rng.uniform(10, H - 10))),
                          amplitude=float(rng.uniform(0.28, 0.33)),
                          log_width=float(rng.uniform(-0.05, 0.1)))
                 for _ in range(count)]
        gains = rng.uniform(0.7, 1.3, size=(count, channels))
    width_multipliers = (np.asarray(params["width_multipliers"], dtype=np.float64)
                         if "width_multipliers" in params else None)
    return BlobBackend(grid, channels, blobs, gains=gains,
                       width_multipliers=width_multipliers)
