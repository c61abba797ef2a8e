// Wiring: canvas clicks place points, buttons drive the session, a polling
// playback loop streams trace deltas into the overlay and charts.

import { SessionClient } from "./api.js";
import { SceneRenderer, canvasToGrid, trajectoriesFromTrace } from "./canvas.js";
import { drawChart } from "./charts.js";
import { MaskLayer, encodeMask } from "./mask.js";
import { Playback, Role, UiSession } from "./state.js";

const client = new SessionClient("");
const session = new UiSession(client);
const playback = new Playback(session);

const canvas = document.getElementById("field") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;
const renderer = new SceneRenderer(ctx, { zoom: 8 });
const chartCanvas = document.getElementById("charts") as HTMLCanvasElement;
const chartCtx = chartCanvas.getContext("2d")!;
const statusEl = document.getElementById("status")!;
const hintEl = document.getElementById("hint")!;

let role: Role = "handle";
let maskMode = false;
let mask: MaskLayer | null = null;

function toast(msg: string): void {
  hintEl.textContent = msg;
  if (msg) {
    setTimeout(() => (hintEl.textContent = ""), 2500);
  }
}

function redraw(): void {
  const [h, w] = session.grid;
  renderer.draw({
    render: session.render,
    grid: [h, w],
    pairs: session.pairs,
    pendingHandle: session.pendingHandle,
    trajectories: trajectoriesFromTrace(session.trace, session.pairs.length,
                                        session.pairs),
    mask: maskMode ? mask : null,
    currents: [],
  });
  drawChart(chartCtx, [
    { label: "L_en", color: "#e2b13b", ...seriesToXY(0, "lEn") },
    { label: "lambda", color: "#3bd67c", ...seriesToXY(0, "lambda") },
  ]);
  const badge = session.status === "completed" || session.status === "converged"
    ? ` — done (${session.status})` : "";
  statusEl.textContent =
    `${session.status}${badge} | drags=${session.trace.length} ` +
    `substeps=${session.trace.reduce((a, r) => Math.max(a, r.k), 0)}`;
}

function seriesToXY(pointIndex: number, key: "lEn" | "lambda"):
    { x: number[]; y: number[] } {
  const s = session.series(pointIndex);
  return { x: s.k, y: key === "lEn" ? s.lEn : s.lambda };
}

canvas.addEventListener("click", (ev) => {
  const rect = canvas.getBoundingClientRect();
  const [gx, gy] = canvasToGrid(ev.clientX - rect.left, ev.clientY - rect.top,
                                { zoom: renderer.zoom });
  if (maskMode) {
    mask ??= new MaskLayer(session.grid[1], session.grid[0]);
    mask.paint(gx, gy, 4, 1);
    session.mask = encodeMask(mask);
    redraw();
    return;
  }
  const result = session.placePoint([gx, gy], role);
  if (!result.ok) {
    toast(result.hint ?? "rejected");
    return;
  }
  role = role === "handle" ? "target" : "handle";
  redraw();
});

function wire(id: string, fn: () => void | Promise<void>): void {
  document.getElementById(id)!.addEventListener("click", () => void fn());
}

wire("new-session", async () => {
  await session.create({
    type: "blob",
    seed: Number((document.getElementById("seed") as HTMLInputElement).value) || 0,
    params: { grid: [64, 64], channels: 4, blob_count: 2 },
  });
  mask = null;
  role = "handle";
  redraw();
});

wire("commit", async () => {
  const result = await session.commitPoints();
  toast(result.ok ? "points sent" : result.hint ?? "rejected");
  redraw();
});

wire("step", async () => {
  await session.step();
  redraw();
});

wire("play", () => {
  playback.play();
  const repaint = setInterval(() => {
    redraw();
    if (!session.playing) {
      clearInterval(repaint);
    }
  }, 120);
});

wire("pause", () => playback.pause());

wire("reset", async () => {
  await session.reset();
  redraw();
});

wire("mask-toggle", () => {
  maskMode = !maskMode;
  toast(maskMode ? "mask painting on" : "mask painting off");
});

redraw();
