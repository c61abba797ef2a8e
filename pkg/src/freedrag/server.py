"""JSON-over-HTTP session service consumed by the browser frontend.

Endpoints:
    POST   /sessions                      create (backend spec + seed + method)
    GET    /sessions/{id}/snapshot        full state echo
    POST   /sessions/{id}/points          set handle/target pairs and mask
    POST   /sessions/{id}/step            advance one drag
    POST   /sessions/{id}/reset           back to the initial state
    DELETE /sessions/{id}                 drop the session

Stepping a finished session returns 409 with its final status.
"""

from __future__ import annotations

import os
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .engine import RunStatus
from .instructions import SCHEMA_VERSION, Instruction, decode_mask
from .sampling import Point2
from .session import Session, SessionRegistry

DEFAULT_PORT = 8787


class BackendSpec(BaseModel):
    type: str
    params: dict = Field(default_factory=dict)
    seed: int = 0


class CreateSessionRequest(BaseModel):
    backend: BackendSpec
    points: list[dict] = Field(default_factory=list)
    mask: dict | None = None
    method: str = "freedrag"
    config: dict = Field(default_factory=dict)
    track_config: dict = Field(default_factory=dict)
    name: str = ""


class SetPointsRequest(BaseModel):
    points: list[dict]
    mask: dict | None = None


def _parse_pairs(raw: list[dict]) -> list[tuple[Point2, Point2]]:
    try:
        return [(Point2(float(p["handle"][0]), float(p["handle"][1])),
                 Point2(float(p["target"][0]), float(p["target"][1])))
                for p in raw]
    except (KeyError, IndexError, TypeError, ValueError) as exc:
        raise HTTPException(status_code=400, detail=f"malformed points: {exc}")


def create_app(registry: SessionRegistry | None = None,
               frontend_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="freedrag session service")
    reg = registry if registry is not None else SessionRegistry()
    app.state.registry = reg

    def _get(session_id: str) -> Session:
        session = reg.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id}")
        return session

    @app.post("/sessions")
    def create_session(req: CreateSessionRequest):
        placeholder = not req.points
        raw = {
            "schema_version": SCHEMA_VERSION,
            "backend": req.backend.model_dump(),
            # a fresh canvas session has no points yet; park a degenerate
            # pair at the origin until the user places one
            "points": req.points or [{"handle": [0.0, 0.0], "target": [0.0, 0.0]}],
            "method": req.method,
            "config": req.config,
            "track_config": req.track_config,
            "name": req.name,
        }
        if req.mask is not None:
            raw["mask"] = req.mask
        try:
            inst = Instruction.from_json_dict(raw)
        except (ValueError, KeyError, TypeError) as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        session = Session.create(inst)
        reg.add(session)
        render, scale = session.render_b64()
        H, W, C = session.engine.backend.output_shape
        return {"session_id": session.session_id, "render": render,
                "render_scale": scale, "grid": [H, W], "channels": C,
                "status": session.engine.status.value,
                "awaiting_points": placeholder}

    @app.get("/sessions/{session_id}/snapshot")
    def snapshot(session_id: str):
        session = _get(session_id)
        with session.lock:
            return session.snapshot_payload()

    @app.post("/sessions/{session_id}/points")
    def set_points(session_id: str, req: SetPointsRequest):
        session = _get(session_id)
        if not req.points:
            raise HTTPException(status_code=400, detail="need at least one point pair")
        pairs = _parse_pairs(req.points)
        mask = None
        if req.mask is not None:
            try:
                mask = decode_mask(req.mask)
            except (ValueError, KeyError, TypeError) as exc:
                raise HTTPException(status_code=400, detail=f"malformed mask: {exc}")
        with session.lock:
            try:
                session.set_points(pairs, mask)
            except ValueError as exc:
                raise HTTPException(status_code=400, detail=str(exc))
            return session.status_payload()

    @app.post("/sessions/{session_id}/step")
    def step(session_id: str):
        session = _get(session_id)
        with session.lock:
            if session.engine.status is not RunStatus.RUNNING:
                raise HTTPException(status_code=409,
                                    detail={"status": session.engine.status.value,
                                            "message": "session already finished"})
            return session.step()

    @app.post("/sessions/{session_id}/reset")
    def reset(session_id: str):
        session = _get(session_id)
        with session.lock:
            session.reset()
            return session.status_payload()

    @app.delete("/sessions/{session_id}")
    def delete(session_id: str):
        if not reg.remove(session_id):
            raise HTTPException(status_code=404, detail=f"unknown session {session_id}")
        return {"deleted": session_id}

    if frontend_dir is None:
        candidate = Path(__file__).resolve().parents[2] / "frontend" / "dist"
        frontend_dir = candidate if candidate.is_dir() else None
    if frontend_dir is not None and Path(frontend_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(frontend_dir), html=True),
                  name="frontend")

    return app


def serve(port: int | None = None, host: str = "127.0.0.1") -> None:
    import uvicorn
    if port is None:
        port = int(os.environ.get("FREEDRAG_PORT", DEFAULT_PORT))
    uvicorn.run(create_app(), host=host, port=port)
