// Typed client for the session service. Every number shown in the UI
// originates from these responses; the client never computes physics.

export interface PointPair {
  handle: [number, number];
  target: [number, number];
}

export interface RleMask {
  height: number;
  width: number;
  runs: number[];
}

export interface TraceRow {
  k: number;
  point_index: number;
  hx: number;
  hy: number;
  L_in: number;
  L_en: number;
  lam: number;
  case: string;
  loss: number;
  substeps: number;
}

export interface PointState {
  handle: [number, number];
  target: [number, number];
  current: [number, number];
  L_in: number;
  L_en: number;
  lambda: number;
  status: string;
}

export interface StatusPayload {
  session_id: string;
  status: string;
  drag_index: number;
  substeps_total: number;
  points: PointState[];
}

export interface StepPayload extends StatusPayload {
  trace_delta: TraceRow[];
  trace_cursor: number;
  render: string;
  render_scale: { min: number; max: number };
}

export interface CreatePayload {
  session_id: string;
  render: string;
  render_scale: { min: number; max: number };
  grid: [number, number];
  channels: number;
  status: string;
  awaiting_points: boolean;
}

export interface SnapshotPayload extends StatusPayload {
  instruction: unknown;
  trace: TraceRow[];
  render: string;
  render_scale: { min: number; max: number };
}

export class ApiError extends Error {
  constructor(public status: number, public detail: unknown) {
    super(`api error ${status}`);
  }
}

async function call<T>(base: string, path: string, init?: RequestInit): Promise<T> {
  const resp = await fetch(`${base}${path}`, {
    headers: { "Content-Type": "application/json" },
    ...init,
  });
  const body = await resp.json().catch(() => null);
  if (!resp.ok) {
    throw new ApiError(resp.status, body && (body as { detail?: unknown }).detail);
  }
  return body as T;
}

export class SessionClient {
  constructor(private base: string = "") {}

  createSession(backend: object, method = "freedrag", config: object = {}):
      Promise<CreatePayload> {
    return call(this.base, "/sessions", {
      method: "POST",
      body: JSON.stringify({ backend, method, config }),
    });
  }

  setPoints(id: string, points: PointPair[], mask: RleMask | null):
      Promise<StatusPayload> {
    return call(this.base, `/sessions/${id}/points`, {
      method: "POST",
      body: JSON.stringify(mask ? { points, mask } : { points }),
    });
  }

  step(id: string): Promise<StepPayload> {
    return call(this.base, `/sessions/${id}/step`, { method: "POST" });
  }

  snapshot(id: string): Promise<SnapshotPayload> {
    return call(this.base, `/sessions/${id}/snapshot`);
  }

  reset(id: string): Promise<StatusPayload> {
    return call(this.base, `/sessions/${id}/reset`, { method: "POST" });
  }

  remove(id: string): Promise<void> {
    return call(this.base, `/sessions/${id}`, { method: "DELETE" });
  }
}
