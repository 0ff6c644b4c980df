/**
 * Minimal SVG figure builder: line charts and scatter panels with axes,
 * tick labels, legend and a caption line. No runtime dependencies.
 */

export interface Series {
  name: string;
  x: number[];
  y: number[];
}

export interface ScatterGroup {
  name: string;
  x: number[];
  y: number[];
  marker: "circle" | "cross";
}

export interface Panel {
  title: string;
  xLabel: string;
  yLabel: string;
  series?: Series[];
  scatter?: ScatterGroup[];
}

export interface Figure {
  panels: Panel[];
  caption: string;
}

export const PALETTE = [
  "#1f77b4",
  "#d62728",
  "#2ca02c",
  "#ff7f0e",
  "#9467bd",
  "#8c564b",
  "#17becf",
  "#7f7f7f",
  "#bcbd22",
  "#e377c2",
];

const PANEL_W = 420;
const PANEL_H = 320;
const MARGIN = { left: 58, right: 16, top: 34, bottom: 46 };
const CAPTION_H = 24;

function esc(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

function extent(values: number[]): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    if (!Number.isFinite(v)) continue;
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  if (lo === Infinity) return [0, 1];
  if (lo === hi) return [lo - 0.5, hi + 0.5];
  return [lo, hi];
}

function ticks(lo: number, hi: number, count = 5): number[] {
  const span = hi - lo;
  const step = Math.pow(10, Math.floor(Math.log10(span / count)));
  const mult = [1, 2, 5, 10].find((m) => span / (step * m) <= count) ?? 10;
  const s = step * mult;
  const out: number[] = [];
  for (let t = Math.ceil(lo / s) * s; t <= hi + 1e-12 * span; t += s) {
    out.push(Math.abs(t) < 1e-12 * span ? 0 : t);
  }
  return out;
}

function fmtTick(v: number): string {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 0.01 && a < 10000) return String(Number(v.toPrecision(4)));
  return v.toExponential(1);
}

function renderPanel(panel: Panel, xOff: number, index: number): string {
  const xs: number[] = [];
  const ys: number[] = [];
  for (const s of panel.series ?? []) {
    xs.push(...s.x);
    ys.push(...s.y);
  }
  for (const g of panel.scatter ?? []) {
    xs.push(...g.x);
    ys.push(...g.y);
  }
  const [x0, x1] = extent(xs);
  const [y0, y1] = extent(ys);
  const plotW = PANEL_W - MARGIN.left - MARGIN.right;
  const plotH = PANEL_H - MARGIN.top - MARGIN.bottom;
  const sx = (v: number) => xOff + MARGIN.left + ((v - x0) / (x1 - x0)) * plotW;
  const sy = (v: number) => MARGIN.top + plotH - ((v - y0) / (y1 - y0)) * plotH;

  const parts: string[] = [];
  parts.push(
    `<rect x="${xOff + MARGIN.left}" y="${MARGIN.top}" width="${plotW}" height="${plotH}" ` +
      `fill="none" stroke="#333" stroke-width="1"/>`,
  );
  parts.push(
    `<text x="${xOff + MARGIN.left + plotW / 2}" y="${MARGIN.top - 12}" ` +
      `text-anchor="middle" font-size="14" font-weight="bold">${esc(panel.title)}</text>`,
  );
  for (const t of ticks(x0, x1)) {
    const px = sx(t);
    parts.push(`<line x1="${px}" y1="${MARGIN.top + plotH}" x2="${px}" y2="${MARGIN.top + plotH + 4}" stroke="#333"/>`);
    parts.push(
      `<text x="${px}" y="${MARGIN.top + plotH + 17}" text-anchor="middle" font-size="10">${fmtTick(t)}</text>`,
    );
  }
  for (const t of ticks(y0, y1)) {
    const py = sy(t);
    parts.push(`<line x1="${xOff + MARGIN.left - 4}" y1="${py}" x2="${xOff + MARGIN.left}" y2="${py}" stroke="#333"/>`);
    parts.push(
      `<text x="${xOff + MARGIN.left - 7}" y="${py + 3}" text-anchor="end" font-size="10">${fmtTick(t)}</text>`,
    );
  }
  parts.push(
    `<text x="${xOff + MARGIN.left + plotW / 2}" y="${PANEL_H - 10}" text-anchor="middle" font-size="12">` +
      `${esc(panel.xLabel)}</text>`,
  );
  parts.push(
    `<text x="${xOff + 14}" y="${MARGIN.top + plotH / 2}" text-anchor="middle" font-size="12" ` +
      `transform="rotate(-90 ${xOff + 14} ${MARGIN.top + plotH / 2})">${esc(panel.yLabel)}</text>`,
  );

  (panel.series ?? []).forEach((s, i) => {
    const color = PALETTE[i % PALETTE.length];
    const pts = s.x
      .map((v, k) => [v, s.y[k]] as const)
      .filter(([, y]) => Number.isFinite(y))
      .map(([x, y]) => `${sx(x).toFixed(2)},${sy(y).toFixed(2)}`)
      .join(" ");
    parts.push(`<polyline points="${pts}" fill="none" stroke="${color}" stroke-width="1.6" class="series"/>`);
  });
  (panel.scatter ?? []).forEach((g, i) => {
    const color = PALETTE[i % PALETTE.length];
    for (let k = 0; k < g.x.length; k++) {
      const px = sx(g.x[k]);
      const py = sy(g.y[k]);
      if (g.marker === "circle") {
        parts.push(`<circle cx="${px.toFixed(2)}" cy="${py.toFixed(2)}" r="2.2" fill="${color}" fill-opacity="0.6" class="point"/>`);
      } else {
        parts.push(
          `<path d="M${(px - 2.4).toFixed(2)} ${(py - 2.4).toFixed(2)} l4.8 4.8 m0 -4.8 l-4.8 4.8" ` +
            `stroke="${color}" stroke-width="1.2" class="point"/>`,
        );
      }
    }
  });

  const names = (panel.series ?? []).map((s) => s.name).concat((panel.scatter ?? []).map((g) => g.name));
  names.forEach((name, i) => {
    const lx = xOff + MARGIN.left + plotW - 104;
    const ly = MARGIN.top + 10 + i * 15;
    parts.push(`<line x1="${lx}" y1="${ly}" x2="${lx + 16}" y2="${ly}" stroke="${PALETTE[i % PALETTE.length]}" stroke-width="2"/>`);
    parts.push(`<text x="${lx + 20}" y="${ly + 3.5}" font-size="10">${esc(name)}</text>`);
  });
  return parts.join("\n");
}

export function renderFigure(fig: Figure): string {
  const width = PANEL_W * fig.panels.length;
  const height = PANEL_H + CAPTION_H;
  const body = fig.panels.map((p, i) => renderPanel(p, i * PANEL_W, i)).join("\n");
  const caption =
    `<text x="${width / 2}" y="${PANEL_H + 15}" text-anchor="middle" font-size="11" fill="#555" ` +
    `class="caption">${esc(fig.caption)}</text>`;
  return (
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" ` +
    `viewBox="0 0 ${width} ${height}" font-family="Helvetica, Arial, sans-serif">\n` +
    `<rect width="${width}" height="${height}" fill="white"/>\n${body}\n${caption}\n</svg>\n`
  );
}
