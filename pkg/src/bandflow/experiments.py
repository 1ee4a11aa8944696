"""Seeded sweep orchestration, persistence, and exponent fits.

One job is one (point, energy, seed) triple.  A job builds the profile,
runs the Brownian flow once, monitors the two stopping functionals along
the way, and measures the t = 1 endpoint: diffusion-profile deviation,
local-law ratios, and eigenvector delocalization.  Rows are merged in
job order no matter which worker finished first, so repeated runs of
the same config write byte-identical CSV; wall times and timestamps
live in the metadata JSON only.
"""

import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .ensemble import brownian_path
from .flow import (
    StoppingConfig,
    characteristic_grid,
    duhamel_decomposition,
    stopping_monitor,
)
from .profiles import (
    ProfileSpec,
    b_matrix,
    diffusion_profile,
    heat_kernel,
    variance_profile_pair,
)
from .resolvent import (
    eigen_delocalization,
    local_law_ratios,
    qd_error,
    resolvent,
)
from .semicircle import stieltjes_semicircle

try:
    from importlib.metadata import version as _dist_version
    CODE_VERSION = _dist_version("bandflow")
except Exception:                      # running from a checkout
    CODE_VERSION = "0+unknown"

__all__ = [
    "CSV_COLUMNS",
    "SweepPoint",
    "Thresholds",
    "SweepConfig",
    "ResultRow",
    "run_sweep",
    "load_rows",
    "fit_exponent",
    "appendix_constants",
]

CSV_COLUMNS = ("N", "W", "gamma", "E", "eta", "seed", "qd_max_err",
               "qd_ratio", "local_law_max", "deloc_density", "tau1",
               "tau2", "runtime_s")

REGIME_EXPONENT = 8.0 / 11.0
MAX_N = 4096


@dataclass(frozen=True)
class SweepPoint:
    N: int
    gamma: float

    def __post_init__(self):
        if self.N < 4:
            raise ValueError(f"N must be at least 4, got {self.N}")
        if not 0.5 < self.gamma < 1.0:
            raise ValueError(f"gamma must lie in (0.5, 1), got {self.gamma}")

    @property
    def W(self) -> int:
        return math.ceil(self.N ** self.gamma)

    @property
    def regime_ok(self) -> bool:
        # marker for the W >= N^{8/11} hypothesis window
        return self.W >= self.N ** REGIME_EXPONENT


@dataclass(frozen=True)
class Thresholds:
    delta_stop: float = 0.05
    D: int = 10
    kappa: float = 0.2
    ell: float = 0.125          # fraction of N below 1, absolute count above
    eps: float = 0.1

    def ell_at(self, n: int) -> int:
        if self.ell < 1.0:
            return max(1, int(round(self.ell * n)))
        return int(min(self.ell, n))

    def stopping(self) -> StoppingConfig:
        return StoppingConfig(delta_stop=self.delta_stop, D=self.D)


@dataclass(frozen=True)
class SweepConfig:
    """Everything a sweep needs; JSON round-trips through from_json.

    eta_rule is either the string "w2n2" (eta = W^2/N^2, the default) or
    a fixed positive number.  A fixed eta must stay within a factor 2 of
    the default at every point, which keeps the spectral scale inside
    the regime the thresholds were calibrated for.
    """

    points: tuple = ()
    energies: tuple = (0.5,)
    eta_rule: object = "w2n2"
    seeds: tuple = (0,)
    grid: int = 16
    thresholds: Thresholds = field(default_factory=Thresholds)
    out_dir: str = "results"

    def __post_init__(self):
        if self.grid < 2:
            raise ValueError(f"grid must have at least 2 steps, got {self.grid}")
        if isinstance(self.eta_rule, str):
            if self.eta_rule != "w2n2":
                raise ValueError(f"unknown eta rule {self.eta_rule!r}")
        else:
            eta = float(self.eta_rule)
            if eta <= 0:
                raise ValueError(f"eta must be positive, got {eta}")
            for p in self.points:
                scale = eta * p.N ** 2 / p.W ** 2
                if not 0.5 <= scale <= 2.0:
                    raise ValueError(
                        f"fixed eta {eta} is off the W^2/N^2 scale by {scale:.3g} "
                        f"at N={p.N}")

    def eta_for(self, point: SweepPoint) -> float:
        if isinstance(self.eta_rule, str):
            return point.W ** 2 / point.N ** 2
        return float(self.eta_rule)

    def jobs(self):
        """Deterministic job order: points, then energies, then seeds."""
        out = []
        for p in self.points:
            for e in self.energies:
                for seed in self.seeds:
                    out.append((p, float(e), int(seed)))
        return out

    @classmethod
    def from_json(cls, source) -> "SweepConfig":
        if isinstance(source, (str, Path)):
            data = json.loads(Path(source).read_text())
        else:
            data = dict(source)
        points = tuple(SweepPoint(N=int(p["N"]), gamma=float(p["gamma"]))
                       for p in data.get("points", ()))
        seeds = data.get("seeds", [0])
        if isinstance(seeds, int):
            seeds = list(range(seeds))
        thr = data.get("thresholds", {})
        return cls(points=points,
                   energies=tuple(float(e) for e in data.get("E", [0.5])),
                   eta_rule=data.get("eta_rule", "w2n2"),
                   seeds=tuple(int(s) for s in seeds),
                   grid=int(data.get("grid", 16)),
                   thresholds=Thresholds(**thr),
                   out_dir=str(data.get("out_dir", "results")))

    def canonical(self) -> dict:
        d = {"points": [{"N": p.N, "gamma": p.gamma} for p in self.points],
             "E": list(self.energies), "eta_rule": self.eta_rule,
             "seeds": list(self.seeds), "grid": self.grid,
             "thresholds": asdict(self.thresholds), "out_dir": self.out_dir}
        return d


@dataclass(frozen=True)
class ResultRow:
    """One measurement; local_law_max is the bare sup ratio
    max |G - m|^2 / (W^-1 eta^-1/2), the trend the local law bounds."""

    N: int
    W: int
    gamma: float
    E: float
    eta: float
    seed: int
    qd_max_err: float
    qd_ratio: float
    local_law_max: float
    deloc_density: float
    tau1: float | None
    tau2: float | None
    runtime_s: float

    def csv_values(self):
        # runtime stays out of the data file so reruns are byte-identical
        vals = [str(self.N), str(self.W), repr(self.gamma), repr(self.E),
                repr(self.eta), str(self.seed), repr(self.qd_max_err),
                repr(self.qd_ratio), repr(self.local_law_max),
                repr(self.deloc_density),
                "" if self.tau1 is None else repr(self.tau1),
                "" if self.tau2 is None else repr(self.tau2),
                ""]
        return vals

    def key(self):
        return (self.N, self.W, self.gamma, self.E, self.eta, self.seed)


def _run_job(config: SweepConfig, point: SweepPoint, energy: float,
             seed: int) -> ResultRow:
    t0 = time.perf_counter()
    spec = ProfileSpec(N=point.N, W=point.W, shape="fejer")
    s_op, s_half = variance_profile_pair(spec)
    eta = config.eta_for(point)
    z = complex(energy, eta)
    m = stieltjes_semicircle(z)

    grid = characteristic_grid(z, config.grid)
    flow = brownian_path(spec, grid, seed=seed)
    trace = duhamel_decomposition(flow, z, grid=[1.0],
                                  config=config.thresholds.stopping())
    tau1, tau2 = stopping_monitor(trace)

    bundle = resolvent(flow.sample_at(len(grid) - 1), z, s_half=s_half)
    theta = diffusion_profile(s_op, m, 1.0)
    qd_max_err, qd_ratio = qd_error(bundle.T, theta)
    ll = local_law_ratios(bundle, m, s_op, s_half, D=config.thresholds.D,
                          w_band=point.W)
    thr = config.thresholds
    deloc = eigen_delocalization(flow.final, thr.kappa,
                                 thr.ell_at(point.N), thr.eps)
    return ResultRow(N=point.N, W=point.W, gamma=point.gamma, E=energy,
                     eta=eta, seed=seed, qd_max_err=qd_max_err,
                     qd_ratio=qd_ratio, local_law_max=ll.sup_ratio,
                     deloc_density=deloc.density, tau1=tau1, tau2=tau2,
                     runtime_s=time.perf_counter() - t0)


def _header_line() -> str:
    return ",".join(CSV_COLUMNS)


def _existing_rows(csv_path: Path):
    if not csv_path.exists():
        return []
    lines = csv_path.read_text().splitlines()
    if not lines:
        return []
    if lines[0] != _header_line():
        raise ValueError(
            f"{csv_path} has header {lines[0]!r}; expected the sweep schema. "
            "Move it aside or choose another out_dir.")
    return [ln for ln in lines[1:] if ln]


def _row_prefix(line: str):
    parts = line.split(",")
    return (int(parts[0]), float(parts[3]), int(parts[5]))


def run_sweep(config: SweepConfig, force: bool = False, workers: int = 1):
    """Run all jobs, appending to <out_dir>/sweep.csv as rows complete.

    Resumes an interrupted sweep: rows already in the CSV are kept and
    their jobs skipped, provided they line up with the job order.  The
    return value is the list of ResultRow computed IN THIS CALL (resumed
    rows are on disk, not recomputed); load_rows reads the full table.
    """
    for p in config.points:
        if p.N > MAX_N and not force:
            raise ValueError(
                f"N={p.N} exceeds the desk-scale limit {MAX_N}; pass force=True")

    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "sweep.csv"
    meta_path = out_dir / "sweep_meta.json"

    jobs = config.jobs()
    done = _existing_rows(csv_path)
    if len(done) > len(jobs):
        raise ValueError(f"{csv_path} holds {len(done)} rows but the config "
                         f"defines {len(jobs)} jobs; stale output?")
    for line, (p, e, seed) in zip(done, jobs):
        if _row_prefix(line) != (p.N, e, seed):
            raise ValueError(f"{csv_path} row {_row_prefix(line)} does not "
                             f"match job ({p.N}, {e}, {seed}); stale output?")

    started = time.time()
    fresh = csv_path.exists() is False or len(done) == 0
    if fresh:
        csv_path.write_text(_header_line() + "\n")
    remaining = list(enumerate(jobs))[len(done):]

    rows, runtimes = [], {}
    with open(csv_path, "a") as sink:
        if workers <= 1 or len(remaining) <= 1:
            results = (_run_job(config, p, e, s) for _, (p, e, s) in remaining)
            for row in results:
                sink.write(",".join(row.csv_values()) + "\n")
                sink.flush()
                rows.append(row)
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                futures = [(k, pool.submit(_run_job, config, p, e, s))
                           for k, (p, e, s) in remaining]
                buffered = {}
                next_k = remaining[0][0]
                for k, fut in futures:
                    buffered[k] = fut
                while buffered:
                    row = buffered.pop(next_k).result()
                    sink.write(",".join(row.csv_values()) + "\n")
                    sink.flush()
                    rows.append(row)
                    next_k += 1
    for row in rows:
        runtimes["N={} E={} seed={}".format(row.N, row.E, row.seed)] = row.runtime_s

    meta = {"config": config.canonical(),
            "code_version": CODE_VERSION,
            "columns": list(CSV_COLUMNS),
            "points": [{"N": p.N, "gamma": p.gamma, "W": p.W,
                        "eta": config.eta_for(p), "regime_ok": p.regime_ok}
                       for p in config.points],
            "rows_written": len(done) + len(rows),
            "resumed_rows": len(done),
            "runtime_s": runtimes,
            "started": started,
            "finished": time.time()}
    meta_path.write_text(json.dumps(meta, indent=2) + "\n")
    return rows


def load_rows(out_dir) -> list:
    """Read <out_dir>/sweep.csv back as a list of dicts with typed values."""
    csv_path = Path(out_dir) / "sweep.csv"
    lines = csv_path.read_text().splitlines()
    if not lines or lines[0] != _header_line():
        raise ValueError(f"{csv_path} is not a sweep table")
    out = []
    for ln in lines[1:]:
        if not ln:
            continue
        parts = ln.split(",")
        row = {}
        for key, raw in zip(CSV_COLUMNS, parts):
            if key in ("N", "W", "seed"):
                row[key] = int(raw)
            elif raw == "":
                row[key] = None
            else:
                row[key] = float(raw)
        out.append(row)
    return out


def _value_of(row, key):
    if isinstance(row, dict):
        return row[key]
    return getattr(row, key)


def fit_exponent(rows, x_key: str, y_key: str):
    """Least squares on (log x, log y); returns (slope, intercept, r2)."""
    xs = np.array([float(_value_of(r, x_key)) for r in rows])
    ys = np.array([float(_value_of(r, y_key)) for r in rows])
    if len(set(xs.tolist())) < 3:
        raise ValueError("need at least 3 distinct x values")
    if np.any(xs <= 0) or np.any(ys <= 0):
        raise ValueError("log-log fit needs positive data")
    lx, ly = np.log(xs), np.log(ys)
    slope, intercept = np.polyfit(lx, ly, 1)
    pred = slope * lx + intercept
    ss_res = float(np.sum((ly - pred) ** 2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return float(slope), float(intercept), r2


def appendix_constants(n: int = 512, w: int = 64, energy: float = 0.5,
                       eta: float | None = None,
                       r_grid=(0.25, 1.0, 4.0, 16.0, 64.0),
                       time_grid=(0.1, 0.3, 0.5, 0.7, 0.9, 1.0)) -> dict:
    """Fitted constants for the three decay bounds.

    heat_C:  max entry of exp{r t |m|^2 (S - Id)} against
             W^-1 (r t)^-1/2 + N^-1, maximized over the r grid at t = 1.
             Caution: the bare semigroup keeps a no-jump atom of weight
             e^{-rt|m|^2} on the diagonal, so at small rt this constant
             grows like W e^{-rt} and the envelope is only meaningful
             once the walk has actually moved.
    heat_C_smoothed: the same fit for S exp{r t |m|^2 (S - Id)}.  One
             application of S averages the atom over a band row, which
             is the form the envelope actually controls; this constant
             is stable in (N, W).
    theta_C: row sums of Theta_t against |Im w_t|^-1 over the time grid.
    b_C:     absolute row sums of B_s over the time grid (bounded by a
             plain constant).
    """
    spec = ProfileSpec(N=n, W=w, shape="fejer")
    s_op, _ = variance_profile_pair(spec)
    if eta is None:
        eta = w ** 2 / n ** 2
    z = complex(energy, eta)
    m = stieltjes_semicircle(z)

    heat_c = 0.0
    heat_c_smoothed = 0.0
    for r in r_grid:
        bound = (r * 1.0) ** -0.5 / w + 1.0 / n
        kernel = heat_kernel(s_op, m, 1.0, r)
        heat_c = max(heat_c, kernel.max_entry() / bound)
        smoothed = float(np.abs(s_op.dense() @ kernel.dense()).max())
        heat_c_smoothed = max(heat_c_smoothed, smoothed / bound)

    theta_c = 0.0
    for t in time_grid:
        w_t = z + (1.0 - t) * m
        rowsum = float(diffusion_profile(s_op, m, t).row_sum().real)
        theta_c = max(theta_c, rowsum * abs(w_t.imag))

    b_c = 0.0
    for s in time_grid:
        b_c = max(b_c, b_matrix(s_op, m, s).abs_row_sum())

    return {"heat_C": heat_c, "heat_C_smoothed": heat_c_smoothed,
            "theta_C": theta_c, "b_C": b_c,
            "N": n, "W": w, "z": z}
