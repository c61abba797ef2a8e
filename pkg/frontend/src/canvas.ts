// Canvas drawing and the canvas<->grid coordinate mapping. The mapping is
// a pure integer zoom so it stays bijective on integer grid cells.

import { PointPair, TraceRow } from "./api.js";
import { MaskLayer } from "./mask.js";

export interface ViewTransform {
  zoom: number; // canvas pixels per grid cell, integer >= 1
}

export function canvasToGrid(px: number, py: number, t: ViewTransform):
    [number, number] {
  return [Math.floor(px / t.zoom), Math.floor(py / t.zoom)];
}

export function gridToCanvas(gx: number, gy: number, t: ViewTransform):
    [number, number] {
  // cell center, so canvasToGrid(gridToCanvas(p)) round-trips exactly
  return [gx * t.zoom + t.zoom / 2, gy * t.zoom + t.zoom / 2];
}

export interface SceneState {
  render: string; // base64 png
  grid: [number, number];
  pairs: PointPair[];
  pendingHandle: [number, number] | null;
  trajectories: [number, number][][];
  mask: MaskLayer | null;
  currents: [number, number][];
}

const HANDLE_COLOR = "#e23b3b";
const TARGET_COLOR = "#2b6fe2";
const TRAJECTORY_COLOR = "#3bd67c";
const MASK_FILL = "rgba(240, 200, 60, 0.35)";

export class SceneRenderer {
  private image: HTMLImageElement | null = null;
  private lastRender = "";

  constructor(private ctx: CanvasRenderingContext2D,
              private transform: ViewTransform) {}

  get zoom(): number {
    return this.transform.zoom;
  }

  draw(scene: SceneState): void {
    const [h, w] = scene.grid;
    const z = this.transform.zoom;
    this.ctx.canvas.width = w * z;
    this.ctx.canvas.height = h * z;
    this.ctx.imageSmoothingEnabled = false;
    if (scene.render && scene.render !== this.lastRender) {
      this.image = new Image();
      this.image.onload = () => this.draw(scene);
      this.image.src = `data:image/png;base64,${scene.render}`;
      this.lastRender = scene.render;
    }
    if (this.image && this.image.complete) {
      this.ctx.drawImage(this.image, 0, 0, w * z, h * z);
    } else {
      this.ctx.fillStyle = "#111";
      this.ctx.fillRect(0, 0, w * z, h * z);
    }
    if (scene.mask) {
      this.drawMask(scene.mask);
    }
    for (const traj of scene.trajectories) {
      this.drawPolyline(traj);
    }
    scene.pairs.forEach((pair, i) => {
      this.drawMarker(pair.handle, HANDLE_COLOR, `${i + 1}`);
      this.drawMarker(pair.target, TARGET_COLOR, `${i + 1}`);
    });
    for (const cur of scene.currents) {
      this.drawMarker(cur, TRAJECTORY_COLOR, "");
    }
    if (scene.pendingHandle) {
      this.drawMarker(scene.pendingHandle, HANDLE_COLOR, "?");
    }
  }

  private drawMask(mask: MaskLayer): void {
    const z = this.transform.zoom;
    this.ctx.fillStyle = MASK_FILL;
    for (let y = 0; y < mask.height; y++) {
      for (let x = 0; x < mask.width; x++) {
        if (mask.cells[y * mask.width + x]) {
          this.ctx.fillRect(x * z, y * z, z, z);
        }
      }
    }
  }

  private drawPolyline(points: [number, number][]): void {
    if (points.length < 2) {
      return;
    }
    this.ctx.strokeStyle = TRAJECTORY_COLOR;
    this.ctx.lineWidth = 1.5;
    this.ctx.beginPath();
    points.forEach(([gx, gy], i) => {
      const [cx, cy] = gridToCanvas(gx, gy, this.transform);
      if (i === 0) {
        this.ctx.moveTo(cx, cy);
      } else {
        this.ctx.lineTo(cx, cy);
      }
    });
    this.ctx.stroke();
  }

  private drawMarker(pos: [number, number], color: string, label: string): void {
    const [cx, cy] = gridToCanvas(pos[0], pos[1], this.transform);
    this.ctx.fillStyle = color;
    this.ctx.beginPath();
    this.ctx.arc(cx, cy, Math.max(3, this.transform.zoom / 2), 0, Math.PI * 2);
    this.ctx.fill();
    if (label) {
      this.ctx.fillStyle = "#fff";
      this.ctx.font = "9px sans-serif";
      this.ctx.fillText(label, cx + 4, cy - 4);
    }
  }
}

/** Collect trajectories straight from trace rows; exported for tests. */
export function trajectoriesFromTrace(rows: TraceRow[], pointCount: number,
                                      pairs: PointPair[]): [number, number][][] {
  const out: [number, number][][] = [];
  for (let i = 0; i < pointCount; i++) {
    const traj: [number, number][] = [];
    if (pairs[i]) {
      traj.push(pairs[i].handle);
    }
    for (const row of rows) {
      if (row.point_index === i) {
        traj.push([row.hx, row.hy]);
      }
    }
    out.push(traj);
  }
  return out;
}
