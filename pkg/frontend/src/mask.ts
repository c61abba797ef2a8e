// Binary mask painting with the same run-length encoding the instruction
// schema uses: row-major alternating run lengths, zeros first.

import { RleMask } from "./api.js";

export class MaskLayer {
  readonly cells: Uint8Array;

  constructor(public readonly width: number, public readonly height: number) {
    this.cells = new Uint8Array(width * height);
  }

  paint(cx: number, cy: number, radius: number, value: 0 | 1 = 1): void {
    const r2 = radius * radius;
    const x0 = Math.max(0, Math.floor(cx - radius));
    const x1 = Math.min(this.width - 1, Math.ceil(cx + radius));
    const y0 = Math.max(0, Math.floor(cy - radius));
    const y1 = Math.min(this.height - 1, Math.ceil(cy + radius));
    for (let y = y0; y <= y1; y++) {
      for (let x = x0; x <= x1; x++) {
        if ((x - cx) * (x - cx) + (y - cy) * (y - cy) <= r2) {
          this.cells[y * this.width + x] = value;
        }
      }
    }
  }

  isEmpty(): boolean {
    return !this.cells.some((v) => v !== 0);
  }

  clear(): void {
    this.cells.fill(0);
  }
}

export function encodeMask(mask: MaskLayer): RleMask {
  const runs: number[] = [];
  let current = 0;
  let count = 0;
  for (const v of mask.cells) {
    const bit = v ? 1 : 0;
    if (bit === current) {
      count++;
    } else {
      runs.push(count);
      current = bit;
      count = 1;
    }
  }
  runs.push(count);
  return { height: mask.height, width: mask.width, runs };
}

export function decodeMask(rle: RleMask): MaskLayer {
  const total = rle.runs.reduce((a, b) => a + b, 0);
  if (total !== rle.width * rle.height) {
    throw new Error(`mask runs sum to ${total}, expected ${rle.width * rle.height}`);
  }
  const mask = new MaskLayer(rle.width, rle.height);
  let pos = 0;
  let value = 0;
  for (const run of rle.runs) {
    if (value) {
      mask.cells.fill(1, pos, pos + run);
    }
    pos += run;
    value ^= 1;
  }
  return mask;
}
