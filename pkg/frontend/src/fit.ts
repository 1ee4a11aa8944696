export interface LogFit {
  slope: number;
  intercept: number; // in log space: log(y) = slope * log(x) + intercept
  r2: number;
}

// least squares on (log x, log y); null when under 2 distinct x values
export function fitLogLog(xs: number[], ys: number[]): LogFit | null {
  if (xs.length !== ys.length) throw new Error("length mismatch");
  const pts = xs
    .map((x, i) => [x, ys[i]])
    .filter(([x, y]) => x > 0 && y > 0)
    .map(([x, y]) => [Math.log(x), Math.log(y)]);
  const distinct = new Set(pts.map(([lx]) => lx));
  if (distinct.size < 2) return null;

  const n = pts.length;
  const mx = pts.reduce((a, [lx]) => a + lx, 0) / n;
  const my = pts.reduce((a, [, ly]) => a + ly, 0) / n;
  let sxx = 0;
  let sxy = 0;
  let syy = 0;
  for (const [lx, ly] of pts) {
    sxx += (lx - mx) * (lx - mx);
    sxy += (lx - mx) * (ly - my);
    syy += (ly - my) * (ly - my);
  }
  const slope = sxy / sxx;
  const intercept = my - slope * mx;
  const ssRes = pts.reduce((a, [lx, ly]) => {
    const d = ly - (slope * lx + intercept);
    return a + d * d;
  }, 0);
  const r2 = syy === 0 ? 1 : 1 - ssRes / syy;
  return { slope, intercept, r2 };
}

export function geometricMean(vals: number[]): number {
  return Math.exp(vals.reduce((a, v) => a + Math.log(v), 0) / vals.length);
}
