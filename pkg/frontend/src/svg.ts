// Minimal SVG assembly: fixed 640x420 canvas, no external assets, so
// output bytes depend only on the shapes pushed in.

export const WIDTH = 640;
export const HEIGHT = 420;
export const MARGIN = { top: 32, right: 24, bottom: 48, left: 64 };

export interface Scale {
  (v: number): number;
  ticks: number[];
  kind: "log" | "linear";
}

function esc(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;").replace(/"/g, "&quot;");
}

export function logScale(domain: [number, number], range: [number, number]): Scale {
  const [d0, d1] = domain.map(Math.log);
  const span = d1 - d0 || 1;
  const f = ((v: number) => range[0] + ((Math.log(v) - d0) / span) * (range[1] - range[0])) as Scale;
  const ticks: number[] = [];
  const lo = Math.floor(Math.log10(domain[0]));
  const hi = Math.ceil(Math.log10(domain[1]));
  for (let e = lo; e <= hi; e++) {
    const t = Math.pow(10, e);
    if (t >= domain[0] * 0.999 && t <= domain[1] * 1.001) ticks.push(t);
  }
  if (ticks.length < 2) {
    ticks.length = 0;
    ticks.push(domain[0], domain[1]);
  }
  f.ticks = ticks;
  f.kind = "log";
  return f;
}

export function linearScale(domain: [number, number], range: [number, number]): Scale {
  const span = domain[1] - domain[0] || 1;
  const f = ((v: number) => range[0] + ((v - domain[0]) / span) * (range[1] - range[0])) as Scale;
  const n = 5;
  f.ticks = Array.from({ length: n + 1 }, (_, i) => domain[0] + (i * span) / n);
  f.kind = "linear";
  return f;
}

export function padDomain(vals: number[], log: boolean): [number, number] {
  let lo = Math.min(...vals);
  let hi = Math.max(...vals);
  if (log) {
    if (lo === hi) return [lo / 2, hi * 2];
    const pad = Math.pow(hi / lo, 0.08);
    return [lo / pad, hi * pad];
  }
  if (lo === hi) return [lo - 0.5, hi + 0.5];
  const pad = (hi - lo) * 0.08;
  return [lo - pad, hi + pad];
}

function fmtTick(v: number): string {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 1e4 || a < 1e-3) return v.toExponential(0);
  return String(Number(v.toPrecision(4)));
}

export class SvgDoc {
  private parts: string[] = [];

  add(part: string) {
    this.parts.push(part);
  }

  circle(cx: number, cy: number, r: number, fill: string, cls = "dot") {
    this.add(`<circle class="${cls}" cx="${cx.toFixed(2)}" cy="${cy.toFixed(2)}" r="${r}" fill="${fill}"/>`);
  }

  line(x1: number, y1: number, x2: number, y2: number, stroke: string, cls = "line", dash = "") {
    const d = dash ? ` stroke-dasharray="${dash}"` : "";
    this.add(
      `<line class="${cls}" x1="${x1.toFixed(2)}" y1="${y1.toFixed(2)}" x2="${x2.toFixed(2)}" y2="${y2.toFixed(2)}" stroke="${stroke}" stroke-width="1.5"${d}/>`,
    );
  }

  path(points: Array<[number, number]>, stroke: string, cls: string, dash = "") {
    if (points.length === 0) return;
    const d = points.map(([x, y], i) => `${i === 0 ? "M" : "L"}${x.toFixed(2)},${y.toFixed(2)}`).join(" ");
    const dd = dash ? ` stroke-dasharray="${dash}"` : "";
    this.add(`<path class="${cls}" d="${d}" fill="none" stroke="${stroke}" stroke-width="1.5"${dd}/>`);
  }

  text(x: number, y: number, s: string, anchor = "middle", size = 11) {
    this.add(
      `<text x="${x.toFixed(2)}" y="${y.toFixed(2)}" font-family="monospace" font-size="${size}" text-anchor="${anchor}">${esc(s)}</text>`,
    );
  }

  axes(xs: Scale, ys: Scale, xLabel: string, yLabel: string, title: string) {
    const x0 = MARGIN.left;
    const x1 = WIDTH - MARGIN.right;
    const y0 = HEIGHT - MARGIN.bottom;
    const y1 = MARGIN.top;
    this.line(x0, y0, x1, y0, "#333", "axis");
    this.line(x0, y0, x0, y1, "#333", "axis");
    for (const t of xs.ticks) {
      const px = xs(t);
      this.line(px, y0, px, y0 + 4, "#333", "tick");
      this.text(px, y0 + 18, fmtTick(t));
    }
    for (const t of ys.ticks) {
      const py = ys(t);
      this.line(x0 - 4, py, x0, py, "#333", "tick");
      this.text(x0 - 8, py + 4, fmtTick(t), "end");
      this.line(x0, py, x1, py, "#eee", "grid");
    }
    this.text((x0 + x1) / 2, HEIGHT - 10, xLabel);
    this.add(
      `<text x="14" y="${(y0 + y1) / 2}" font-family="monospace" font-size="11" text-anchor="middle" transform="rotate(-90 14 ${(y0 + y1) / 2})">${esc(yLabel)}</text>`,
    );
    this.text((x0 + x1) / 2, 18, title, "middle", 13);
  }

  legend(entries: Array<[string, string]>) {
    let y = MARGIN.top + 8;
    const x = WIDTH - MARGIN.right - 150;
    for (const [label, color] of entries) {
      this.line(x, y, x + 18, y, color, "legend");
      this.text(x + 24, y + 4, label, "start");
      y += 16;
    }
  }

  render(): string {
    return (
      `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT}" viewBox="0 0 ${WIDTH} ${HEIGHT}">\n` +
      `<rect width="${WIDTH}" height="${HEIGHT}" fill="white"/>\n` +
      this.parts.join("\n") +
      `\n</svg>\n`
    );
  }
}
