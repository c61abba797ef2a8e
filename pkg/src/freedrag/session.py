"""Interactive sessions: one engine per session behind a registry.

Each session owns its engine and a lock; API handlers acquire only that
session's lock, so sessions never block each other. Records serialize to
JSON and reload to a state whose next step is bit-identical.
"""

from __future__ import annotations

import datetime
import json
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .baseline import PointDragEngine
from .core import DragPoint, DragState, DragTrace, PointStatus, TraceRow
from .engine import DragEngine, RunStatus
from .instructions import Instruction, build_backend
from .rendering import render_grayscale, to_png_base64
from .sampling import Point2


def _now() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


def make_engine(inst: Instruction, latent: np.ndarray | None = None):
    backend = build_backend(inst)
    if inst.method == "pointdrag":
        return PointDragEngine.create(backend, inst.tracker_config(), inst.points,
                                      mask=inst.mask, latent=latent)
    return DragEngine.create(backend, inst.drag_config(), inst.points,
                             mask=inst.mask, latent=latent)


@dataclass
class Session:
    session_id: str
    instruction: Instruction
    engine: Any
    created_at: str = field(default_factory=_now)
    updated_at: str = field(default_factory=_now)
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    @classmethod
    def create(cls, inst: Instruction, session_id: str | None = None) -> "Session":
        return cls(session_id=session_id or uuid.uuid4().hex,
                   instruction=inst, engine=make_engine(inst))

    # -- queries ---------------------------------------------------------

    def render_b64(self) -> tuple[str, dict]:
        F = self.engine.backend.generate(self.engine.state.latent)
        return to_png_base64(render_grayscale(F))

    def trace_rows(self, cursor: int = 0) -> list[dict]:
        rows = self.engine.state.trace.rows[cursor:]
        return [row.__dict__.copy() for row in rows]

    def status_payload(self) -> dict:
        st = self.engine.state
        return {
            "session_id": self.session_id,
            "status": self.engine.status.value,
            "drag_index": st.drag_index,
            "substeps_total": st.substeps_total,
            "points": [{
                "handle": [p.origin.x, p.origin.y],
                "target": [p.target.x, p.target.y],
                "current": [p.current.x, p.current.y],
                "L_in": p.L_in, "L_en": p.L_en, "lambda": p.lambda_last,
                "status": p.status.value,
            } for p in st.points],
        }

    def snapshot_payload(self) -> dict:
        render, scale = self.render_b64()
        return {
            **self.status_payload(),
            "instruction": self.instruction.to_json_dict(),
            "trace": self.trace_rows(0),
            "render": render,
            "render_scale": scale,
            "created_at": self.created_at,
            "updated_at": self.updated_at,
        }

    # -- mutations -------------------------------------------------------

    def step(self) -> dict:
        cursor = len(self.engine.state.trace.rows)
        status = self.engine.step()
        self.updated_at = _now()
        render, scale = self.render_b64()
        return {
            **self.status_payload(),
            "trace_delta": self.trace_rows(cursor),
            "trace_cursor": cursor,
            "render": render,
            "render_scale": scale,
        }

    def set_points(self, pairs: list[tuple[Point2, Point2]],
                   mask: np.ndarray | None) -> None:
        """Replace the instruction's points/mask and rebuild the engine."""
        inst = self.instruction
        inst.points = pairs
        inst.mask = mask
        inst.validate()
        self.engine = make_engine(inst)
        self.updated_at = _now()

    def reset(self) -> None:
        self.engine = make_engine(self.instruction)
        self.updated_at = _now()


# -- persistence ---------------------------------------------------------

def _point_to_dict(p: DragPoint) -> dict:
    return {
        "origin": [p.origin.x, p.origin.y],
        "target": [p.target.x, p.target.y],
        "current": [p.current.x, p.current.y],
        "template": p.template.tolist(),
        "L_in": p.L_in, "L_en": p.L_en, "lambda_last": p.lambda_last,
        "status": p.status.value,
    }


def _point_from_dict(d: dict) -> DragPoint:
    return DragPoint(
        origin=Point2(*d["origin"]), target=Point2(*d["target"]),
        current=Point2(*d["current"]),
        template=np.asarray(d["template"], dtype=np.float64),
        L_in=float(d["L_in"]), L_en=float(d["L_en"]),
        lambda_last=float(d["lambda_last"]),
        status=PointStatus(d["status"]),
    )


def serialize_session(s: Session) -> dict:
    eng = s.engine
    st = eng.state
    record = {
        "session_id": s.session_id,
        "instruction": s.instruction.to_json_dict(),
        "created_at": s.created_at,
        "updated_at": s.updated_at,
        "engine_status": eng.status.value,
        "state": {
            "latent": st.latent.tolist(),
            "drag_index": st.drag_index,
            "substeps_total": st.substeps_total,
            "points": [_point_to_dict(p) for p in st.points],
            "trace": {
                "rows": [r.__dict__.copy() for r in st.trace.rows],
                "substep_losses": st.trace.substep_losses,
            },
        },
    }
    if isinstance(eng, PointDragEngine):
        record["refs"] = [r.tolist() for r in eng.refs]
    return record


def deserialize_session(record: dict) -> Session:
    inst = Instruction.from_json_dict(record["instruction"])
    backend = build_backend(inst)
    st_rec = record["state"]
    trace = DragTrace(rows=[TraceRow(**r) for r in st_rec["trace"]["rows"]],
                      substep_losses=[list(ls) for ls in st_rec["trace"]["substep_losses"]])
    F0 = backend.generate(backend.initial_latent())
    F0.setflags(write=False)
    state = DragState(
        latent=np.asarray(st_rec["latent"], dtype=np.float64),
        points=[_point_from_dict(p) for p in st_rec["points"]],
        F0=F0, mask=inst.mask,
        drag_index=int(st_rec["drag_index"]),
        substeps_total=int(st_rec["substeps_total"]),
        trace=trace,
    )
    status = RunStatus(record["engine_status"])
    if inst.method == "pointdrag":
        engine = PointDragEngine(backend=backend, cfg=inst.tracker_config(),
                                 state=state,
                                 refs=[np.asarray(r, dtype=np.float64)
                                       for r in record["refs"]],
                                 status=status)
    else:
        cfg = inst.drag_config()
        lr = cfg.learning_rate
        if lr is None:
            from .engine import default_learning_rate
            lr = default_learning_rate(backend)
        engine = DragEngine(backend=backend, cfg=cfg, state=state, lr=lr,
                            status=status)
    return Session(session_id=record["session_id"], instruction=inst,
                   engine=engine, created_at=record["created_at"],
                   updated_at=record["updated_at"])


def save_session(s: Session, path: str | Path) -> None:
    Path(path).write_text(json.dumps(serialize_session(s)) + "\n")


def load_session(path: str | Path) -> Session:
    return deserialize_session(json.loads(Path(path).read_text()))


class SessionRegistry:
    """Thread-safe session_id -> Session map."""

    def __init__(self):
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()

    def add(self, session: Session) -> None:
        with self._lock:
            self._sessions[session.session_id] = session

    def get(self, session_id: str) -> Session | None:
        with self._lock:
            return self._sessions.get(session_id)

    def remove(self, session_id: str) -> bool:
        with self._lock:
            return self._sessions.pop(session_id, None) is not None

    def ids(self) -> list[str]:
        with self._lock:
            return list(self._sessions)
