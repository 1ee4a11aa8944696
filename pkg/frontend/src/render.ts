import { fitLogLog, geometricMean } from "./fit.js";
import { numbers, parseTable, PlotKind, Row } from "./schema.js";
import { HEIGHT, linearScale, logScale, MARGIN, padDomain, Scale, SvgDoc, WIDTH } from "./svg.js";

export interface PlotJob {
  kind: PlotKind;
  csvText: string;
  logX?: boolean;
  logY?: boolean;
}

const PLOT_X0 = MARGIN.left;
const PLOT_X1 = WIDTH - MARGIN.right;
const PLOT_Y0 = HEIGHT - MARGIN.bottom; // y axis is flipped
const PLOT_Y1 = MARGIN.top;

function makeScales(xs: number[], ys: number[], logX: boolean, logY: boolean): [Scale, Scale] {
  const sx = (logX ? logScale : linearScale)(padDomain(xs, logX), [PLOT_X0, PLOT_X1]);
  const sy = (logY ? logScale : linearScale)(padDomain(ys, logY), [PLOT_Y0, PLOT_Y1]);
  return [sx, sy];
}

function groupMeans(xs: number[], ys: number[]): Array<[number, number]> {
  const acc = new Map<number, number[]>();
  xs.forEach((x, i) => {
    const bucket = acc.get(x) ?? [];
    bucket.push(ys[i]);
    acc.set(x, bucket);
  });
  return [...acc.entries()]
    .map(([x, bucket]): [number, number] => [x, bucket.reduce((a, v) => a + v, 0) / bucket.length])
    .sort((a, b) => a[0] - b[0]);
}

// Guide line whose shape comes from a per-row envelope column combination;
// the level is pinned at the data's geometric center, never re-derived.
function guidePoints(xs: number[], envelope: number[], data: number[]): Array<[number, number]> | null {
  const distinct = new Set(xs);
  if (distinct.size < 2) return null;
  const level = geometricMean(data) / geometricMean(envelope);
  return groupMeans(
    xs,
    envelope.map((e) => e * level),
  );
}

function renderQdScaling(rows: Row[], job: PlotJob): string {
  const n = numbers(rows, "N");
  const w = numbers(rows, "W");
  const eta = numbers(rows, "eta");
  const y = numbers(rows, "qd_ratio");
  // measured / target scale: the deviation envelope over the profile
  // envelope, W^{-3/4} eta^{-1}, assembled from the table's own columns
  const envelope = w.map((wi, i) => Math.pow(wi, -0.75) / eta[i]);
  const [sx, sy] = makeScales(n, y, job.logX ?? true, job.logY ?? true);

  const doc = new SvgDoc();
  doc.axes(sx, sy, "N", "qd_ratio", "diffusion profile deviation vs N");
  const guide = guidePoints(n, envelope, y);
  if (guide) {
    doc.path(
      guide.map(([gx, gy]) => [sx(gx), sy(gy)]),
      "#c44",
      "guide",
      "6 3",
    );
    const fit = fitLogLog(n, y);
    doc.legend([
      [`data (slope ${fit ? fit.slope.toFixed(2) : "n/a"})`, "#246"],
      ["W^-3/4 eta^-1 guide", "#c44"],
    ]);
  }
  const means = groupMeans(n, y);
  if (means.length > 1) {
    doc.path(
      means.map(([mx, my]) => [sx(mx), sy(my)]),
      "#246",
      "mean",
    );
  }
  n.forEach((xi, i) => doc.circle(sx(xi), sy(y[i]), 3, "#246"));
  return doc.render();
}

function renderLocalLaw(rows: Row[], job: PlotJob): string {
  const n = numbers(rows, "N");
  const y = numbers(rows, "local_law_max");
  const [sx, sy] = makeScales(n, [...y, 20], job.logX ?? true, job.logY ?? false);
  const doc = new SvgDoc();
  doc.axes(sx, sy, "N", "max |G - m|^2 / (W^-1 eta^-1/2)", "local law ratio vs N");
  doc.line(PLOT_X0, sy(20), PLOT_X1, sy(20), "#c44", "bound", "6 3");
  doc.legend([
    ["measured", "#246"],
    ["acceptance bound 20", "#c44"],
  ]);
  n.forEach((xi, i) => doc.circle(sx(xi), sy(y[i]), 3, "#246"));
  return doc.render();
}

function renderDeloc(rows: Row[], job: PlotJob): string {
  const seed = numbers(rows, "seed");
  const y = numbers(rows, "deloc_density");
  const [sx, sy] = makeScales(seed, [...y, 0.52], job.logX ?? false, job.logY ?? false);
  const doc = new SvgDoc();
  doc.axes(sx, sy, "seed", "localized density", "localized eigenvector density by seed");
  doc.line(PLOT_X0, sy(0.52), PLOT_X1, sy(0.52), "#c44", "bound", "6 3");
  doc.legend([
    ["density", "#246"],
    ["sqrt(eps) + kappa", "#c44"],
  ]);
  seed.forEach((xi, i) => doc.circle(sx(xi), sy(y[i]), 3, "#246"));
  return doc.render();
}

function renderHeatKernel(rows: Row[], job: PlotJob): string {
  const t = numbers(rows, "t");
  const peak = numbers(rows, "max_entry");
  const ratio = numbers(rows, "bound_ratio");
  const [sx, sy] = makeScales(t, [...peak, ...ratio], job.logX ?? false, job.logY ?? true);
  const doc = new SvgDoc();
  doc.axes(sx, sy, "t", "entry scale", "diffusion profile peak and row-sum ratio");
  const byT = (ys: number[]) =>
    t.map((ti, i): [number, number] => [sx(ti), sy(ys[i])]).sort((a, b) => a[0] - b[0]);
  doc.path(byT(peak), "#246", "mean");
  doc.path(byT(ratio), "#2a6", "mean", "6 3");
  doc.legend([
    ["max entry", "#246"],
    ["row_sum * |Im w_t|", "#2a6"],
  ]);
  t.forEach((ti, i) => doc.circle(sx(ti), sy(peak[i]), 3, "#246"));
  return doc.render();
}

function renderConjecture(rows: Row[], job: PlotJob): string {
  const w = numbers(rows, "W");
  const proved = numbers(rows, "ratio_proved");
  const conj = numbers(rows, "ratio_conjectured");
  const [sx, sy] = makeScales(w, [...proved, ...conj], job.logX ?? true, job.logY ?? true);
  const doc = new SvgDoc();
  doc.axes(sx, sy, "W", "norm / rate", "decay norm against both candidate rates");
  doc.path(
    groupMeans(w, proved).map(([gx, gy]) => [sx(gx), sy(gy)]),
    "#246",
    "mean",
  );
  doc.path(
    groupMeans(w, conj).map(([gx, gy]) => [sx(gx), sy(gy)]),
    "#c44",
    "mean",
    "6 3",
  );
  doc.legend([
    ["vs proved rate", "#246"],
    ["vs conjectured rate", "#c44"],
  ]);
  w.forEach((wi, i) => {
    doc.circle(sx(wi), sy(proved[i]), 3, "#246");
    doc.circle(sx(wi), sy(conj[i]), 3, "#c44");
  });
  return doc.render();
}

export function render(job: PlotJob): string {
  const rows = parseTable(job.csvText, job.kind);
  switch (job.kind) {
    case "qd-scaling":
      return renderQdScaling(rows, job);
    case "local-law":
      return renderLocalLaw(rows, job);
    case "deloc":
      return renderDeloc(rows, job);
    case "heat-kernel":
      return renderHeatKernel(rows, job);
    case "conjecture":
      return renderConjecture(rows, job);
  }
}
