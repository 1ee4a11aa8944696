"""Flow-time analysis of the deviation E_t = T_t - Theta_t.

Along the matrix Brownian path H_t, the resolvent is taken at the
moving parameter w_t = z + (1-t) m(z), so that G_0 = m Id exactly and
t = 1 lands on the original z.  T_t then starts at Theta_0 and its
deviation E_t solves a linear SDE whose Duhamel form splits into a
martingale part, a drift part, and a quadratic self-interaction:

    E_t = E^M_t + E^D_t + E^S_t,

each integral sandwiched by propagators {Id + (t-s) Theta_t}.  This
module discretizes that split pathwise, tallies the quadratic
variation of the four propagator components of E^M, monitors the two
stopping-time functionals, and measures the operator-norm quantities
behind the sharper conjectured bound.

Stochastic integrals use the left endpoint (the increment must not
peek forward); deterministic integrals use trapezoid weights on the
same grid, which matches a midpoint rule to second order without
needing path values between nodes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .circulant import CirculantOperator
from .ensemble import BrownianFlow
from .profiles import diffusion_profile, sqrt_profile, variance_profile_pair
from .resolvent import ResolventBundle
from .semicircle import stieltjes_semicircle


@dataclass(frozen=True)
class StoppingConfig:
    """Exponents for the two stopping thresholds.

    tau_1 trips when max_ab |E_t| reaches
    W^delta * W^{-3/4} |Im w_t|^{-1} * W^{-1} |Im w_t|^{-1/2};
    tau_2 trips when the regularized local-law ratio reaches
    W^{delta/10}.  D sets the W^{-D} floor in the ratio denominator.
    """

    delta_stop: float = 0.05
    D: int = 10

    def __post_init__(self):
        if not 0.0 < self.delta_stop <= 0.1:
            raise ValueError(f"delta_stop must lie in (0, 0.1], got {self.delta_stop}")
        if self.D < 5:
            raise ValueError(f"D must be at least 5, got {self.D}")

    def entry_threshold(self, w_band: int, im_w: float) -> float:
        return w_band ** (self.delta_stop - 1.75) * abs(im_w) ** (-1.5)

    def ratio_threshold(self, w_band: int) -> float:
        return w_band ** (self.delta_stop / 10.0)


@dataclass
class FlowTrace:
    """One path's record: deviations, Duhamel accumulators, tallies.

    ``accumulators`` and ``residuals`` are keyed by evaluation time.
    ``qv`` holds entrywise running sums of squared martingale
    increments for the four propagator components at the final time,
    keyed "m11" (propagator on both sides) through "m14" (bare).
    """

    times: np.ndarray
    im_w: np.ndarray
    e_path: list
    e_sup: np.ndarray
    ll_sup: np.ndarray
    accumulators: dict
    residuals: dict
    qv: dict
    qv_target: float
    tau1_flags: np.ndarray
    tau2_flags: np.ndarray
    w_band: int
    config: StoppingConfig
    z: complex
    seed: int

    @property
    def final_residual(self) -> float:
        return self.residuals[float(self.times[-1])]


def theta_error(t_mat, theta) -> np.ndarray:
    """E = T - Theta, elementwise."""
    t_mat = np.asarray(t_mat)
    th = theta.dense() if isinstance(theta, CirculantOperator) else np.asarray(theta)
    if t_mat.shape != th.shape:
        raise ValueError(f"shape mismatch: {t_mat.shape} vs {th.shape}")
    return (t_mat - th).real


def s_average(s: CirculantOperator, g: np.ndarray) -> np.ndarray:
    """The diagonal vector of the variance-weighted diagonal, (S G_diag)."""
    return s.apply(np.ascontiguousarray(g.diagonal()))


def omega_term(g: np.ndarray, m, s: CirculantOperator) -> np.ndarray:
    """Drift kernel 2 Re(conj(G) o G{S[G] - m}G); exactly real."""
    v = s_average(s, g) - complex(m)
    k = g @ (v[:, None] * g)
    return 2.0 * (np.conj(g) * k).real


def characteristic_grid(z: complex, steps: int) -> np.ndarray:
    """Time grid geometric in Im w_t, dense near t = 1 where it is smallest."""
    if steps < 1:
        raise ValueError(f"need at least one step, got {steps}")
    m = stieltjes_semicircle(z)
    eta = complex(z).imag
    sigma0 = eta + m.imag
    sig = sigma0 * (eta / sigma0) ** (np.arange(steps + 1) / steps)
    t = (sigma0 - sig) / m.imag
    t[0] = 0.0
    t[-1] = 1.0
    return t


def _propagator_sandwich(theta: CirculantOperator, c: float, x: np.ndarray) -> np.ndarray:
    # {Id + c Theta} X {Id + c Theta}, four FFT applies
    y = x + c * theta.apply(x)
    return y + c * theta.apply_right(y)


def _flow_setup(flow: BrownianFlow, z):
    if flow.spec is None:
        raise ValueError("flow carries no profile spec; build it from a ProfileSpec")
    z = complex(z)
    m = stieltjes_semicircle(z)
    s, s_half = variance_profile_pair(flow.spec)
    return z, m, s, s_half, int(flow.spec.W)


def _trapezoid_weight(times, k, j):
    # weight of node k in the trapezoid rule over nodes 0..j
    if k == j:
        return 0.5 * (times[j] - times[j - 1])
    left = 0.5 * (times[k] - times[k - 1]) if k > 0 else 0.0
    return left + 0.5 * (times[k + 1] - times[k])


def duhamel_decomposition(flow: BrownianFlow, z, grid=None,
                          config: StoppingConfig | None = None) -> FlowTrace:
    """Walk the path once and split E_t into its three integral parts.

    ``grid`` lists the evaluation times for the accumulators (default:
    every node of the flow's grid; pass a short list such as [1.0] for
    large N, since each evaluation time keeps three N x N accumulators
    and revisits every earlier node).  Evaluation times must be nodes
    of the flow grid.

    The stopping functionals and E_t itself are recorded at every node
    regardless of ``grid``.
    """
    z, m, s, s_half, w_band = _flow_setup(flow, z)
    config = config or StoppingConfig()
    times = np.asarray(flow.grid, dtype=float)
    n_nodes = len(times)
    n = flow.N

    if grid is None:
        eval_idx = list(range(n_nodes))
    else:
        eval_idx = []
        for t in np.atleast_1d(np.asarray(grid, dtype=float)):
            hits = np.nonzero(np.abs(times - t) <= 1e-12)[0]
            if len(hits) == 0:
                raise ValueError(f"evaluation time {t} is not a node of the flow grid")
            eval_idx.append(int(hits[0]))
        eval_idx = sorted(set(eval_idx))

    thetas = {j: diffusion_profile(s, m, float(times[j])) for j in eval_idx}
    theta_final = diffusion_profile(s, m, float(times[-1]))
    acc_m = {j: np.zeros((n, n)) for j in eval_idx}
    acc_d = {j: np.zeros((n, n)) for j in eval_idx}
    acc_s = {j: np.zeros((n, n)) for j in eval_idx}
    qv = {name: np.zeros((n, n)) for name in ("m11", "m12", "m13", "m14")}

    sh_dense = s_half.dense().real
    floor = float(w_band) ** (-config.D)
    eye = np.eye(n)

    im_w = np.empty(n_nodes)
    e_sup = np.empty(n_nodes)
    ll_sup = np.empty(n_nodes)
    e_path = []
    e_at = {}

    for k in range(n_nodes):
        t_k = float(times[k])
        w_k = z + (1.0 - t_k) * m
        im_w[k] = w_k.imag
        g = np.linalg.solve(flow.cumulative[k] - w_k * eye, np.eye(n, dtype=complex))
        f = g.real**2 + g.imag**2
        t_mat = np.asarray(s_half.sandwich(f)).real
        e_k = t_mat - diffusion_profile(s, m, t_k).dense().real
        e_path.append(e_k)
        e_at[k] = e_k
        e_sup[k] = np.abs(e_k).max()

        dev = g - m * eye
        den = np.asarray(s_half.sandwich(t_mat)).real + sh_dense + floor
        ll_sup[k] = ((dev.real**2 + dev.imag**2) / den).max()

        # drift integrands at this node, pushed to every later evaluation time
        s_om = np.asarray(s_half.sandwich(omega_term(g, m, s))).real
        e_sq = e_k @ e_k
        for j in eval_idx:
            if j == 0 or k > j:
                continue
            wt = _trapezoid_weight(times, k, j)
            c = float(times[j]) - t_k
            acc_d[j] += wt * _propagator_sandwich(thetas[j], c, s_om)
            acc_s[j] += wt * _propagator_sandwich(thetas[j], c, e_sq)

        if k == n_nodes - 1:
            break

        # martingale increment over [t_k, t_{k+1}], left endpoint
        dh = flow.increments[k]
        gdg = g @ dh @ g
        half = np.conj(g) * gdg
        dm = 2.0 * half.real
        x = np.asarray(s_half.sandwich(dm)).real
        for j in eval_idx:
            if times[j] < times[k + 1] - 1e-12:
                continue
            c = float(times[j]) - t_k
            acc_m[j] -= _propagator_sandwich(thetas[j], c, x)

        # quadratic-variation tallies for the four components at the final time
        x1 = s_half.sandwich(half)
        c = float(times[-1]) - t_k
        left = theta_final.apply(x1)
        qv["m11"] += np.abs(c * c * theta_final.apply_right(left)) ** 2
        qv["m12"] += np.abs(c * left) ** 2
        qv["m13"] += np.abs(c * theta_final.apply_right(x1)) ** 2
        qv["m14"] += np.abs(x1) ** 2

    im_w_final = float(im_w[-1])
    qv_target = w_band ** (-1.5) * im_w_final ** (-2.0) * w_band ** (-2.0) * im_w_final ** (-1.0)

    accumulators = {float(times[j]): {"m": acc_m[j], "d": acc_d[j], "s": acc_s[j]}
                    for j in eval_idx}
    residuals = {float(times[j]):
                 float(np.abs(e_at[j] - acc_m[j] - acc_d[j] - acc_s[j]).max())
                 for j in eval_idx}

    tau1_flags = e_sup >= np.array([config.entry_threshold(w_band, iw) for iw in im_w])
    tau2_flags = ll_sup >= config.ratio_threshold(w_band)

    return FlowTrace(times=times, im_w=im_w, e_path=e_path, e_sup=e_sup,
                     ll_sup=ll_sup, accumulators=accumulators, residuals=residuals,
                     qv=qv, qv_target=float(qv_target),
                     tau1_flags=tau1_flags, tau2_flags=tau2_flags,
                     w_band=w_band, config=config, z=z, seed=flow.seed)


def stopping_monitor(trace: FlowTrace, config: StoppingConfig | None = None):
    """First grid times at which each stopping functional crosses.

    Returns (tau1_time or None, tau2_time or None).  A crossing at the
    final time still counts as a hit here; the convention that the
    stopped time caps at 1 is applied by whoever consumes the hit.
    """
    config = config or trace.config
    if config.D != trace.config.D:
        raise ValueError(
            f"trace was built with D={trace.config.D}; rebuild it to monitor with D={config.D}")

    tau1 = None
    for t, e, iw in zip(trace.times, trace.e_sup, trace.im_w):
        if e >= config.entry_threshold(trace.w_band, iw):
            tau1 = float(t)
            break
    tau2 = None
    thr = config.ratio_threshold(trace.w_band)
    for t, r in zip(trace.times, trace.ll_sup):
        if r >= thr:
            tau2 = float(t)
            break
    return tau1, tau2


@dataclass(frozen=True)
class QvReport:
    components: dict
    target: float
    ratios: dict
    a: int
    b: int
    w_band: int
    im_w_final: float


def martingale_qv(flow: BrownianFlow, z, a: int, b: int) -> QvReport:
    """Quadratic variation of the four martingale components at (a, b).

    Component "m11" carries the propagator on both sides with weight
    (t-s)^2, "m12"/"m13" one-sided with weight (t-s), "m14" is the bare
    sandwich.  All are compared against the single target rate
    W^{-3/2} |Im w|^{-2} * W^{-2} |Im w|^{-1} at the final time.
    """
    n = flow.N
    if not (0 <= a < n and 0 <= b < n):
        raise IndexError(f"(a, b) must lie in [0, {n - 1}]^2, got ({a}, {b})")
    trace = duhamel_decomposition(flow, z, grid=[float(flow.grid[-1])])
    components = {name: float(mat[a, b]) for name, mat in trace.qv.items()}
    ratios = {name: val / trace.qv_target for name, val in components.items()}
    return QvReport(components=components, target=trace.qv_target, ratios=ratios,
                    a=int(a), b=int(b), w_band=trace.w_band,
                    im_w_final=float(trace.im_w[-1]))


@dataclass(frozen=True)
class ItoResidualReport:
    step_residuals: np.ndarray   # max-entry gap per step between dG and the SDE's prediction
    mean_residual: float
    mart_samples: np.ndarray     # one off-diagonal entry of the martingale part, per step
    mart_mean: float
    mart_se: float
    fd_rel_err: float            # frozen-H finite difference vs -m G^2
    dt: float


def ito_drift_residual(flow: BrownianFlow, z, dt: float) -> ItoResidualReport:
    """Per-step check of dG = -G dH G + G{S[G] - m}G dt along the path.

    The per-step residual is first order in the grid spacing.  ``dt``
    is the finite-difference step for the frozen-H check, where only
    w_t moves and the exact derivative is -m G^2.
    """
    z, m, s, s_half, _ = _flow_setup(flow, z)
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    times = np.asarray(flow.grid, dtype=float)
    n = flow.N
    eye = np.eye(n)

    def g_at(k, t=None):
        t = float(times[k]) if t is None else t
        w = z + (1.0 - t) * m
        return np.linalg.solve(flow.cumulative[k] - w * eye, np.eye(n, dtype=complex))

    residuals = np.empty(len(times) - 1)
    mart = np.empty(len(times) - 1)
    col = 1 if n > 1 else 0
    g = g_at(0)
    for k in range(len(times) - 1):
        step = float(times[k + 1] - times[k])
        dh = flow.increments[k]
        mart_part = -g @ dh @ g
        v = s_average(s, g) - m
        drift = g @ (v[:, None] * g)
        g_next = g_at(k + 1)
        residuals[k] = np.abs(g_next - g - mart_part - drift * step).max()
        mart[k] = mart_part[0, col].real
        g = g_next

    k_mid = (len(times) - 1) // 2
    t_mid = float(times[k_mid])
    g1 = g_at(k_mid)
    g2 = g_at(k_mid, t=t_mid + dt)
    target = -m * (g1 @ g1)
    fd_rel = float(np.abs((g2 - g1) / dt - target).max() / np.abs(target).max())

    return ItoResidualReport(step_residuals=residuals,
                             mean_residual=float(residuals.mean()),
                             mart_samples=mart, mart_mean=float(mart.mean()),
                             mart_se=float(mart.std(ddof=1) / np.sqrt(len(mart))),
                             fd_rel_err=fd_rel, dt=float(dt))


@dataclass(frozen=True)
class ConjectureReport:
    lhs_op: float          # ||G S^u G*||_op
    rhs_half_op: float     # |Im w|^{-1} ||sqrt(S^{1/2,u}) Im G sqrt(S^{1/2,u})||_op
    rhs_ward_op: float     # same with sqrt(S^u): equals lhs_op exactly
    ward_gap: float
    ratio_proved: float       # lhs / (W^{-1/2} |Im w|^{-5/4})
    ratio_conjectured: float  # lhs / (W^{-1}   |Im w|^{-3/2})
    u: int
    w: complex
    w_band: int


def _row_diag(op: CirculantOperator, u: int) -> np.ndarray:
    # row u of a symmetric circulant, as a diagonal weight vector
    return np.roll(op.first_row.real, u)


def conjecture_probe(g, s: CirculantOperator, u: int,
                     s_half: CirculantOperator | None = None,
                     w=None, w_band: int | None = None) -> ConjectureReport:
    """Operator norms probing the sharper decay bound at pivot ``u``.

    ``g`` may be a ResolventBundle (preferred; carries w) or a plain
    resolvent matrix with ``w`` passed explicitly.  Returns both norms
    of the probed pair, the Ward twin of the left side (equal to it up
    to solver precision, since G and G* commute), and the ratios to the
    proved and conjectured rates.
    """
    if isinstance(g, ResolventBundle):
        w = g.w
        g = g.G
    if w is None:
        raise ValueError("need the spectral parameter w alongside a bare matrix")
    w = complex(w)
    g = np.asarray(g)
    n = g.shape[0]
    if not 0 <= u < n:
        raise IndexError(f"u must lie in [0, {n - 1}], got {u}")

    if s_half is None:
        s_half = sqrt_profile(s)
    wb = int(w_band) if w_band is not None else int(round(1.0 / float(np.max(s.first_row.real))))

    su = _row_diag(s, u)
    a = (g * su[None, :]) @ g.conj().T
    lhs = float(np.linalg.eigvalsh(a).max())

    im_g = (g - g.conj().T) / 2j
    im_w = w.imag

    def weighted_norm(diag_row):
        if diag_row.min() < -1e-12 * max(diag_row.max(), 1e-300):
            raise ValueError("square-root profile has negative entries; "
                             "use the exact nonnegative root")
        rt = np.sqrt(np.clip(diag_row, 0.0, None))
        b = rt[:, None] * im_g * rt[None, :]
        return float(np.abs(np.linalg.eigvalsh(b)).max())

    rhs_ward = weighted_norm(su) / im_w
    rhs_half = weighted_norm(_row_diag(s_half, u)) / im_w

    return ConjectureReport(
        lhs_op=lhs, rhs_half_op=rhs_half, rhs_ward_op=rhs_ward,
        ward_gap=abs(lhs - rhs_ward) / max(lhs, 1e-300),
        ratio_proved=lhs / (wb ** (-0.5) * im_w ** (-1.25)),
        ratio_conjectured=lhs / (wb ** (-1.0) * im_w ** (-1.5)),
        u=int(u), w=w, w_band=wb)
