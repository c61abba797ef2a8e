// Tiny line charts for the per-drag L_en and lambda series.

export interface Series {
  label: string;
  color: string;
  x: number[];
  y: number[];
}

export function drawChart(ctx: CanvasRenderingContext2D, series: Series[],
                          yMax?: number): void {
  const w = ctx.canvas.width;
  const h = ctx.canvas.height;
  ctx.fillStyle = "#181818";
  ctx.fillRect(0, 0, w, h);
  const xs = series.flatMap((s) => s.x);
  const ys = series.flatMap((s) => s.y);
  if (xs.length === 0) {
    return;
  }
  const xMin = Math.min(...xs);
  const xMax = Math.max(...xs, xMin + 1);
  const top = yMax ?? Math.max(...ys, 1e-9);
  const px = (x: number) => ((x - xMin) / (xMax - xMin)) * (w - 12) + 6;
  const py = (y: number) => h - 6 - (y / top) * (h - 12);
  for (const s of series) {
    ctx.strokeStyle = s.color;
    ctx.lineWidth = 1;
    ctx.beginPath();
    s.x.forEach((x, i) => {
      if (i === 0) {
        ctx.moveTo(px(x), py(s.y[i]));
      } else {
        ctx.lineTo(px(x), py(s.y[i]));
      }
    });
    ctx.stroke();
    ctx.fillStyle = s.color;
    ctx.font = "10px sans-serif";
    ctx.fillText(`${s.label}: ${s.y[s.y.length - 1]?.toFixed(4) ?? "-"}`,
                 8, 12 + 12 * series.indexOf(s));
  }
}
