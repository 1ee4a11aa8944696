"""Flow decomposition, stopping functionals, quadratic variation, probes.

Convergence checks run several quadrature resolutions against one
realization via coarsen_path; independent redraws per resolution would
hide the refinement trend behind fresh martingale noise.
"""

import numpy as np
import pytest

from bandflow.circulant import CirculantOperator
from bandflow.ensemble import BrownianFlow, brownian_path, coarsen_path
from bandflow.flow import (
    StoppingConfig,
    _propagator_sandwich,
    characteristic_grid,
    conjecture_probe,
    duhamel_decomposition,
    ito_drift_residual,
    martingale_qv,
    omega_term,
    stopping_monitor,
    theta_error,
)
from bandflow.profiles import (
    ProfileSpec,
    build_variance_profile,
    diffusion_profile,
    variance_profile_pair,
)
from bandflow.resolvent import resolvent
from bandflow.semicircle import stieltjes_semicircle

SPEC = ProfileSpec(N=32, W=8, shape="fejer")
S, R = variance_profile_pair(SPEC)
ETA = SPEC.W**2 / SPEC.N**2
Z = 0.5 + 1j * ETA
M = stieltjes_semicircle(Z)


def test_stopping_config_validation():
    cfg = StoppingConfig()
    assert cfg.delta_stop == 0.05 and cfg.D == 10
    with pytest.raises(ValueError):
        StoppingConfig(delta_stop=0.0)
    with pytest.raises(ValueError):
        StoppingConfig(delta_stop=0.2)
    with pytest.raises(ValueError):
        StoppingConfig(D=4)


def test_stopping_thresholds_by_hand():
    cfg = StoppingConfig(delta_stop=0.05, D=10)
    assert cfg.entry_threshold(8, 0.5) == pytest.approx(8.0**(-1.7) * 0.5**(-1.5))
    assert cfg.ratio_threshold(8) == pytest.approx(8.0**0.005)
    # tighter window (smaller Im w) allows a larger deviation
    assert cfg.entry_threshold(8, 0.05) > cfg.entry_threshold(8, 0.5)


def test_theta_error_basics():
    th = diffusion_profile(S, M, 0.5)
    e = theta_error(th.dense().real, th)
    assert np.abs(e).max() < 1e-15
    bumped = th.dense().real.copy()
    bumped[2, 3] += 0.25
    assert theta_error(bumped, th)[2, 3] == pytest.approx(0.25)
    with pytest.raises(ValueError):
        theta_error(np.zeros((4, 4)), th)


def test_omega_vanishes_on_free_field():
    # at the start of the characteristic the self-energy S[G] equals m,
    # so the drift kernel is identically zero
    w0 = Z + M
    g0 = (-1.0 / w0) * np.eye(SPEC.N, dtype=complex)
    assert np.abs(omega_term(g0, M, S)).max() < 1e-13


def test_omega_brute_force():
    spec = ProfileSpec(N=6, W=1, shape="fejer")
    s = build_variance_profile(spec)
    rng = np.random.default_rng(8)
    a = rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6))
    g = a + a.conj().T + 1j * np.eye(6)   # any invertible-ish complex matrix works
    sd = s.dense().real
    v = np.array([sum(sd[i, p] * g[p, p] for p in range(6)) for i in range(6)]) - M
    k = np.zeros((6, 6), dtype=complex)
    for i in range(6):
        for j in range(6):
            k[i, j] = sum(g[i, p] * v[p] * g[p, j] for p in range(6))
    brute = np.conj(g) * k + np.conj(k) * g
    assert np.abs(brute.imag).max() < 1e-12
    assert np.abs(omega_term(g, M, s) - brute.real).max() < 1e-12


def test_characteristic_grid_shape():
    t = characteristic_grid(Z, 16)
    assert t[0] == 0.0 and t[-1] == 1.0 and len(t) == 17
    assert np.all(np.diff(t) > 0)
    sig = ETA + (1.0 - t) * M.imag
    ratios = sig[1:] / sig[:-1]
    assert np.abs(ratios - ratios[0]).max() < 1e-12
    with pytest.raises(ValueError):
        characteristic_grid(Z, 0)


def test_propagator_factor_row_sums():
    # row sums of Id + (t-s) Theta_t collapse to the ratio of the
    # imaginary parts of the moving spectral parameter, exactly
    for t in (0.4, 1.0):
        for s in (0.0, 0.15):
            lhs = 1.0 + (t - s) * diffusion_profile(S, M, t).row_sum()
            w_s = Z + (1.0 - s) * M
            w_t = Z + (1.0 - t) * M
            assert abs(lhs - w_s.imag / w_t.imag) < 1e-10


def test_propagator_sandwich_dense_oracle():
    th = diffusion_profile(S, M, 0.7)
    rng = np.random.default_rng(3)
    x = rng.standard_normal((SPEC.N, SPEC.N))
    c = 0.42
    p = np.eye(SPEC.N) + c * th.dense()
    dense = (p @ x @ p).real
    assert np.abs(_propagator_sandwich(th, c, x) - dense).max() < 1e-10
    ones = np.ones((SPEC.N, SPEC.N))
    expect = (1.0 + c * th.row_sum()) ** 2
    assert np.abs(_propagator_sandwich(th, c, ones) - expect).max() < 1e-10


def test_duhamel_start_is_exact():
    flow = brownian_path(SPEC, characteristic_grid(Z, 16), seed=1)
    tr = duhamel_decomposition(flow, Z)
    assert tr.e_sup[0] < 1e-12
    acc0 = tr.accumulators[0.0]
    assert all(np.abs(acc0[k]).max() == 0.0 for k in ("m", "d", "s"))
    assert tr.residuals[0.0] < 1e-12


def test_duhamel_eval_subset_matches_full_run():
    grid16 = characteristic_grid(Z, 16)
    flow = brownian_path(SPEC, grid16, seed=1)
    full = duhamel_decomposition(flow, Z)
    t_mid = float(grid16[8])
    sub = duhamel_decomposition(flow, Z, grid=[t_mid, 1.0])
    assert sub.residuals[t_mid] == full.residuals[t_mid]
    assert sub.residuals[1.0] == full.residuals[1.0]
    with pytest.raises(ValueError):
        duhamel_decomposition(flow, Z, grid=[0.123456])


def test_duhamel_residual_shrinks_on_refinement():
    fine = brownian_path(SPEC, characteristic_grid(Z, 256), seed=3)
    r_coarse = duhamel_decomposition(coarsen_path(fine, 8), Z, grid=[1.0]).final_residual
    r_fine = duhamel_decomposition(fine, Z, grid=[1.0]).final_residual
    assert r_fine < 0.25
    assert r_coarse > 1.5 * r_fine


def test_duhamel_requires_profile_spec():
    flow = brownian_path(S, [0.0, 1.0], seed=0)
    with pytest.raises(ValueError):
        duhamel_decomposition(flow, Z)


def test_zero_volatility_path():
    n = SPEC.N
    zeros = np.zeros((n, n), dtype=complex)
    flow = BrownianFlow(grid=np.array([0.0, 0.5, 1.0]),
                        increments=[zeros, zeros],
                        cumulative=[zeros, zeros, zeros], seed=0, spec=SPEC)
    tr = duhamel_decomposition(flow, Z)
    assert max(v.max() for v in tr.qv.values()) == 0.0
    assert np.abs(tr.accumulators[1.0]["m"]).max() == 0.0
    # a frozen H = 0 drifts away from the moving target, so both
    # monitors must trip at the first interior node
    assert stopping_monitor(tr) == (0.5, 0.5)


def test_stopping_monitor_logic():
    flow = brownian_path(SPEC, characteristic_grid(Z, 8), seed=2)
    tr = duhamel_decomposition(flow, Z, grid=[1.0])
    tr.e_sup = np.zeros_like(tr.e_sup)
    tr.ll_sup = np.zeros_like(tr.ll_sup)
    assert stopping_monitor(tr) == (None, None)
    tr.e_sup[0] = 1e9
    tau1, tau2 = stopping_monitor(tr)
    assert tau1 == 0.0 and tau2 is None
    assert stopping_monitor(tr, StoppingConfig(delta_stop=0.08))[0] == 0.0
    with pytest.raises(ValueError):
        stopping_monitor(tr, StoppingConfig(D=12))


def test_qv_components_dense_oracle():
    spec = ProfileSpec(N=8, W=2, shape="fejer")
    s, r = variance_profile_pair(spec)
    z = 0.3 + 0.2j
    m = stieltjes_semicircle(z)
    grid = np.linspace(0.0, 1.0, 6)
    flow = brownian_path(spec, grid, seed=11)
    tr = duhamel_decomposition(flow, z, grid=[1.0])

    rd = r.dense().real
    th = diffusion_profile(s, m, 1.0).dense()
    eye = np.eye(8, dtype=complex)
    oracle = {k: np.zeros((8, 8)) for k in ("m11", "m12", "m13", "m14")}
    for k in range(5):
        t_k = float(grid[k])
        w_k = z + (1.0 - t_k) * m
        g = np.linalg.solve(flow.cumulative[k] - w_k * np.eye(8), eye)
        half = np.conj(g) * (g @ flow.increments[k] @ g)
        x1 = rd @ half @ rd
        c = 1.0 - t_k
        oracle["m11"] += np.abs(c * c * th @ x1 @ th) ** 2
        oracle["m12"] += np.abs(c * th @ x1) ** 2
        oracle["m13"] += np.abs(c * x1 @ th) ** 2
        oracle["m14"] += np.abs(x1) ** 2
    for name in oracle:
        assert np.abs(tr.qv[name] - oracle[name]).max() < 1e-12

    rep = martingale_qv(flow, z, 2, 5)
    assert rep.components["m14"] == pytest.approx(tr.qv["m14"][2, 5], rel=1e-12)
    assert rep.target == pytest.approx(rep.w_band**-3.5 * rep.im_w_final**-3.0)
    for name, val in rep.components.items():
        assert rep.ratios[name] == pytest.approx(val / rep.target)
    with pytest.raises(IndexError):
        martingale_qv(flow, z, 8, 0)


def test_qv_magnitudes_at_scale():
    flow = brownian_path(SPEC, characteristic_grid(Z, 64), seed=3)
    rep = martingale_qv(flow, Z, 0, 1)
    assert all(v >= 0.0 for v in rep.components.values())
    # the measured rates sit two orders below the target envelope
    assert all(ratio < 1.0 for ratio in rep.ratios.values())


def test_ito_residual_and_frozen_fd():
    flow = brownian_path(SPEC, characteristic_grid(Z, 64), seed=3)
    r4 = ito_drift_residual(flow, Z, 1e-4)
    assert len(r4.step_residuals) == 64
    assert r4.fd_rel_err < 5e-4
    assert abs(r4.mart_mean) < 5 * r4.mart_se
    r3 = ito_drift_residual(flow, Z, 1e-3)
    assert 3.0 < r3.fd_rel_err / r4.fd_rel_err < 30.0
    with pytest.raises(ValueError):
        ito_drift_residual(flow, Z, 0.0)


def test_ito_residual_first_order_in_step():
    ratios = []
    for seed in range(3):
        a = ito_drift_residual(
            brownian_path(SPEC, characteristic_grid(Z, 32), seed=seed), Z, 1e-4)
        b = ito_drift_residual(
            brownian_path(SPEC, characteristic_grid(Z, 64), seed=seed), Z, 1e-4)
        ratios.append(b.mean_residual / a.mean_residual)
    assert 0.25 < np.mean(ratios) < 0.75


def test_conjecture_probe_free_field():
    w0 = Z + M
    bundle = resolvent(np.zeros((SPEC.N, SPEC.N)), w0, s_half=R)
    rep = conjecture_probe(bundle, S, u=5)
    assert rep.lhs_op == pytest.approx(S.max_entry() / abs(w0) ** 2, rel=1e-12)
    assert rep.ward_gap < 1e-12
    assert rep.w_band == 7   # fejer normalization carries the odd width


def test_conjecture_probe_at_scale():
    h = brownian_path(SPEC, characteristic_grid(Z, 16), seed=2).final
    g = np.linalg.solve(h - Z * np.eye(SPEC.N), np.eye(SPEC.N, dtype=complex))
    rep = conjecture_probe(g, S, u=3, s_half=R, w=Z)
    assert rep.ward_gap < 1e-9
    assert rep.ratio_proved == pytest.approx(
        rep.lhs_op / (rep.w_band**-0.5 * Z.imag**-1.25))
    assert rep.ratio_conjectured == pytest.approx(
        rep.lhs_op / (rep.w_band**-1.0 * Z.imag**-1.5))
    bundle = resolvent(h, Z, s_half=R)
    rep2 = conjecture_probe(bundle, S, u=3, s_half=R)
    assert rep2.lhs_op == pytest.approx(rep.lhs_op, rel=1e-12)


def test_conjecture_probe_guards():
    g = np.eye(4, dtype=complex)
    s = CirculantOperator.from_first_row(np.array([0.5, 0.25, 0.0, 0.25]))
    with pytest.raises(ValueError):
        conjecture_probe(g, s, u=0)          # bare matrix, no w
    with pytest.raises(IndexError):
        conjecture_probe(g, s, u=4, w=1j)
    bad_half = CirculantOperator.from_first_row(np.array([0.6, 0.25, -0.1, 0.25]))
    with pytest.raises(ValueError):
        conjecture_probe(g, s, u=0, s_half=bad_half, w=1j)
