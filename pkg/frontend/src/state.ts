// Client-side session state: point pairing, the trace buffer, trajectories
// and playback. All values are echoes of server responses.

import {
  ApiError,
  PointPair,
  RleMask,
  SessionClient,
  StepPayload,
  TraceRow,
} from "./api.js";

export type Role = "handle" | "target";

export interface PlacementResult {
  ok: boolean;
  hint?: string;
}

export class UiSession {
  sessionId = "";
  grid: [number, number] = [64, 64];
  render = "";                       // base64 png from the server
  renderScale = { min: 0, max: 0 };
  status = "idle";                   // idle | running | converged | ... | completed
  pairs: PointPair[] = [];
  pendingHandle: [number, number] | null = null;
  mask: RleMask | null = null;
  trace: TraceRow[] = [];
  traceCursor = 0;
  playing = false;
  busy = false;                      // at most one in-flight step
  lastError = "";

  constructor(private client: SessionClient) {}

  async create(backend: object, method = "freedrag", config: object = {}):
      Promise<void> {
    const created = await this.client.createSession(backend, method, config);
    this.sessionId = created.session_id;
    this.grid = created.grid;
    this.render = created.render;
    this.renderScale = created.render_scale;
    this.status = "awaiting-points";
    this.pairs = [];
    this.pendingHandle = null;
    this.mask = null;
    this.trace = [];
    this.traceCursor = 0;
    this.playing = false;
  }

  /** Pairing is handle-then-target; a stray target click is rejected. */
  placePoint(pos: [number, number], role: Role): PlacementResult {
    if (!this.sessionId) {
      return { ok: false, hint: "create a session first" };
    }
    if (role === "target" && this.pendingHandle === null) {
      return { ok: false, hint: "place the handle point first" };
    }
    if (role === "handle" && this.pendingHandle !== null) {
      return { ok: false, hint: "place the target for the pending handle" };
    }
    if (role === "handle") {
      this.pendingHandle = pos;
      return { ok: true };
    }
    this.pairs = [...this.pairs, { handle: this.pendingHandle!, target: pos }];
    this.pendingHandle = null;
    return { ok: true };
  }

  clearPoints(): void {
    this.pairs = [];
    this.pendingHandle = null;
  }

  /** Push the current pairs/mask to the server; rolls back on rejection. */
  async commitPoints(): Promise<PlacementResult> {
    if (this.pairs.length === 0) {
      return { ok: false, hint: "no complete point pairs" };
    }
    const before = this.pairs;
    try {
      const status = await this.client.setPoints(this.sessionId, this.pairs, this.mask);
      this.status = status.status;
      this.trace = [];
      this.traceCursor = 0;
      return { ok: true };
    } catch (err) {
      this.pairs = before.slice(0, -1);
      this.lastError = err instanceof ApiError ? String(err.detail) : String(err);
      return { ok: false, hint: this.lastError };
    }
  }

  /** One drag step. A finished session flips to "completed" and issues no
   *  further mutations. */
  async step(): Promise<boolean> {
    if (this.busy || this.status === "completed") {
      return false;
    }
    this.busy = true;
    try {
      const payload = await this.client.step(this.sessionId);
      this.absorbStep(payload);
      return true;
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        const detail = err.detail as { status?: string } | null;
        this.status = "completed";
        this.lastError = detail?.status ?? "finished";
        this.playing = false;
        return false;
      }
      this.lastError = String(err);
      this.playing = false;
      return false;
    } finally {
      this.busy = false;
    }
  }

  private absorbStep(payload: StepPayload): void {
    this.trace = [...this.trace, ...payload.trace_delta];
    this.traceCursor = this.trace.length;
    this.render = payload.render;
    this.renderScale = payload.render_scale;
    this.status = payload.status;
    if (payload.status !== "running") {
      this.playing = false;
    }
  }

  /** Trajectory polyline for one point: handle origin then every traced h. */
  trajectory(pointIndex: number): [number, number][] {
    const vertices: [number, number][] = [];
    const pair = this.pairs[pointIndex];
    if (pair) {
      vertices.push(pair.handle);
    }
    for (const row of this.trace) {
      if (row.point_index === pointIndex) {
        vertices.push([row.hx, row.hy]);
      }
    }
    return vertices;
  }

  /** Per-drag chart series for one point. */
  series(pointIndex: number): { k: number[]; lEn: number[]; lambda: number[] } {
    const k: number[] = [];
    const lEn: number[] = [];
    const lambda: number[] = [];
    for (const row of this.trace) {
      if (row.point_index === pointIndex) {
        k.push(row.k);
        lEn.push(row.L_en);
        lambda.push(row.lam);
      }
    }
    return { k, lEn, lambda };
  }

  async reset(): Promise<void> {
    const status = await this.client.reset(this.sessionId);
    this.status = status.status;
    this.trace = [];
    this.traceCursor = 0;
    this.playing = false;
  }
}

/** Drive steps on a cadence until the session stops or pause() is called. */
export class Playback {
  private timer: ReturnType<typeof setInterval> | null = null;

  constructor(private session: UiSession, private intervalMs = 120) {}

  play(): void {
    if (this.timer !== null) {
      return;
    }
    this.session.playing = true;
    this.timer = setInterval(() => {
      if (!this.session.playing) {
        this.pause();
        return;
      }
      void this.session.step();
    }, this.intervalMs);
  }

  pause(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
    this.session.playing = false;
  }
}
