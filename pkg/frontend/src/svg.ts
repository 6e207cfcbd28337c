/**
 * Minimal deterministic SVG chart assembly: fixed canvas, pinned fonts
 * and ordering, no timestamps or generated ids, so identical inputs
 * render byte-identical files.
 */

export const WIDTH = 720;
export const HEIGHT = 480;
export const MARGIN = { left: 64, right: 24, top: 40, bottom: 48 };

export function fmt(x: number): string {
  if (!Number.isFinite(x)) return String(x);
  if (x === 0) return "0";
  const a = Math.abs(x);
  if (a >= 1e5 || a < 1e-4) return x.toExponential(3);
  return Number(x.toPrecision(6)).toString();
}

export function niceTicks(lo: number, hi: number, count = 6): number[] {
  if (!(hi > lo)) return [lo];
  const span = hi - lo;
  const step0 = 10 ** Math.floor(Math.log10(span / count));
  let step = step0;
  for (const m of [1, 2, 5, 10]) {
    if (span / (step0 * m) <= count) {
      step = step0 * m;
      break;
    }
  }
  const start = Math.ceil(lo / step) * step;
  const ticks: number[] = [];
  for (let v = start; v <= hi + 1e-12 * span; v += step) {
    ticks.push(Math.abs(v) < step * 1e-9 ? 0 : v);
  }
  return ticks;
}

export class LinearScale {
  constructor(
    public d0: number,
    public d1: number,
    public r0: number,
    public r1: number,
  ) {
    if (this.d1 === this.d0) {
      this.d0 -= 0.5;
      this.d1 += 0.5;
    }
  }

  map(x: number): number {
    return this.r0 + ((x - this.d0) / (this.d1 - this.d0)) * (this.r1 - this.r0);
  }
}

export function padDomain(lo: number, hi: number, frac = 0.06): [number, number] {
  if (!(hi > lo)) return [lo - 0.5, hi + 0.5];
  const pad = (hi - lo) * frac;
  return [lo - pad, hi + pad];
}

export interface Chart {
  x: LinearScale;
  y: LinearScale;
  body: string[];
  legend: { label: string; color: string; marker: "point" | "line" | "band" }[];
}

export function makeChart(xdom: [number, number], ydom: [number, number]): Chart {
  return {
    x: new LinearScale(xdom[0], xdom[1], MARGIN.left, WIDTH - MARGIN.right),
    y: new LinearScale(ydom[0], ydom[1], HEIGHT - MARGIN.bottom, MARGIN.top),
    body: [],
    legend: [],
  };
}

const AXIS_STYLE = 'stroke="#222" stroke-width="1"';
const FONT = 'font-family="monospace" font-size="12"';

export function finishSVG(c: Chart, title: string, xlabel: string, ylabel: string): string {
  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT}" viewBox="0 0 ${WIDTH} ${HEIGHT}">`,
  );
  parts.push(`<rect width="${WIDTH}" height="${HEIGHT}" fill="white"/>`);
  const x0 = MARGIN.left;
  const x1 = WIDTH - MARGIN.right;
  const y0 = HEIGHT - MARGIN.bottom;
  const y1 = MARGIN.top;
  for (const t of niceTicks(c.x.d0, c.x.d1)) {
    const px = c.x.map(t);
    parts.push(`<line x1="${fmt(px)}" y1="${y0}" x2="${fmt(px)}" y2="${y1}" stroke="#ddd" stroke-width="0.5"/>`);
    parts.push(`<line x1="${fmt(px)}" y1="${y0}" x2="${fmt(px)}" y2="${y0 + 5}" ${AXIS_STYLE}/>`);
    parts.push(`<text x="${fmt(px)}" y="${y0 + 18}" text-anchor="middle" ${FONT}>${fmt(t)}</text>`);
  }
  for (const t of niceTicks(c.y.d1, c.y.d0)) {
    const py = c.y.map(t);
    parts.push(`<line x1="${x0}" y1="${fmt(py)}" x2="${x1}" y2="${fmt(py)}" stroke="#ddd" stroke-width="0.5"/>`);
    parts.push(`<line x1="${x0 - 5}" y1="${fmt(py)}" x2="${x0}" y2="${fmt(py)}" ${AXIS_STYLE}/>`);
    parts.push(`<text x="${x0 - 8}" y="${fmt(py + 4)}" text-anchor="end" ${FONT}>${fmt(t)}</text>`);
  }
  parts.push(`<line x1="${x0}" y1="${y0}" x2="${x1}" y2="${y0}" ${AXIS_STYLE}/>`);
  parts.push(`<line x1="${x0}" y1="${y0}" x2="${x0}" y2="${y1}" ${AXIS_STYLE}/>`);
  parts.push(`<text x="${(x0 + x1) / 2}" y="${HEIGHT - 12}" text-anchor="middle" ${FONT}>${xlabel}</text>`);
  parts.push(
    `<text x="16" y="${(y0 + y1) / 2}" text-anchor="middle" ${FONT} transform="rotate(-90 16 ${(y0 + y1) / 2})">${ylabel}</text>`,
  );
  parts.push(`<text x="${(x0 + x1) / 2}" y="22" text-anchor="middle" font-family="monospace" font-size="14">${title}</text>`);
  parts.push(...c.body);
  let ly = y1 + 10;
  for (const item of c.legend) {
    const lx = x1 - 190;
    if (item.marker === "point") {
      parts.push(`<circle cx="${lx}" cy="${ly - 4}" r="3.5" fill="${item.color}"/>`);
    } else if (item.marker === "line") {
      parts.push(`<line x1="${lx - 8}" y1="${ly - 4}" x2="${lx + 8}" y2="${ly - 4}" stroke="${item.color}" stroke-width="2"/>`);
    } else {
      parts.push(`<rect x="${lx - 8}" y="${ly - 10}" width="16" height="12" fill="${item.color}" fill-opacity="0.25"/>`);
    }
    parts.push(`<text x="${lx + 14}" y="${ly}" ${FONT}>${item.label}</text>`);
    ly += 18;
  }
  parts.push("</svg>");
  return parts.join("\n") + "\n";
}

export function addPoint(c: Chart, x: number, y: number, color: string, lo?: number, hi?: number): void {
  const px = c.x.map(x);
  if (lo !== undefined && hi !== undefined && Number.isFinite(lo) && Number.isFinite(hi)) {
    c.body.push(
      `<line x1="${fmt(px)}" y1="${fmt(c.y.map(lo))}" x2="${fmt(px)}" y2="${fmt(c.y.map(hi))}" stroke="${color}" stroke-width="1.2"/>`,
    );
  }
  c.body.push(`<circle cx="${fmt(px)}" cy="${fmt(c.y.map(y))}" r="3.5" fill="${color}"/>`);
}

export function addPolyline(c: Chart, pts: [number, number][], color: string, dashed = false): void {
  const d = pts.map(([x, y]) => `${fmt(c.x.map(x))},${fmt(c.y.map(y))}`).join(" ");
  const dash = dashed ? ' stroke-dasharray="6 4"' : "";
  c.body.push(`<polyline points="${d}" fill="none" stroke="${color}" stroke-width="2"${dash}/>`);
}

export function addBandPolygon(c: Chart, upper: [number, number][], lower: [number, number][], color: string): void {
  const pts = [...upper, ...lower.slice().reverse()]
    .map(([x, y]) => `${fmt(c.x.map(x))},${fmt(c.y.map(y))}`)
    .join(" ");
  c.body.push(`<polygon points="${pts}" fill="${color}" fill-opacity="0.25" stroke="none" class="band"/>`);
}

export function addVLine(c: Chart, x: number, color: string, label?: string): void {
  const px = c.x.map(x);
  c.body.push(
    `<line x1="${fmt(px)}" y1="${fmt(c.y.r0)}" x2="${fmt(px)}" y2="${fmt(c.y.r1)}" stroke="${color}" stroke-width="2" stroke-dasharray="4 4"/>`,
  );
  if (label) {
    c.body.push(`<text x="${fmt(px + 5)}" y="${MARGIN.top + 14}" ${FONT} fill="${color}">${label}</text>`);
  }
}

export function addBar(c: Chart, x0: number, x1: number, y: number, color: string): void {
  const px0 = c.x.map(x0);
  const px1 = c.x.map(x1);
  const py = c.y.map(y);
  const base = c.y.map(Math.max(0, c.y.d0));
  c.body.push(
    `<rect x="${fmt(px0)}" y="${fmt(py)}" width="${fmt(px1 - px0)}" height="${fmt(base - py)}" fill="${color}" fill-opacity="0.6" stroke="#333" stroke-width="0.5"/>`,
  );
}
