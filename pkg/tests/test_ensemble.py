"""Law checks for band matrix sampling: moments, support, path refinement.

Statistical assertions use fixed seeds with 5-sigma margins, so they are
deterministic in practice and fail only on a real regression in the
variance convention.
"""

import numpy as np
import pytest

from bandflow.ensemble import (
    BandSample,
    brownian_path,
    coarsen_path,
    sample_band_matrix,
)
from bandflow.profiles import ProfileSpec, build_variance_profile

SPEC = ProfileSpec(N=6, W=2, shape="uniform")
S = build_variance_profile(SPEC)


def in_band_pairs(spec):
    pairs = []
    from bandflow.profiles import periodic_distance
    for x in range(spec.N):
        for y in range(x + 1, spec.N):
            if periodic_distance(x + 1, y + 1, spec.N) <= spec.W:
                pairs.append((x, y))
    return pairs


def test_zero_time_is_zero_matrix():
    s = sample_band_matrix(SPEC, 0.0, seed=7)
    assert np.all(s.H == 0)


def test_negative_time_rejected():
    with pytest.raises(ValueError):
        sample_band_matrix(SPEC, -0.1, seed=0)


def test_reproducible_and_seed_sensitive():
    a = sample_band_matrix(SPEC, 0.7, seed=11)
    b = sample_band_matrix(SPEC, 0.7, seed=11)
    c = sample_band_matrix(SPEC, 0.7, seed=12)
    assert np.array_equal(a.H, b.H)
    assert not np.array_equal(a.H, c.H)


def test_hermitian_with_real_diagonal():
    s = sample_band_matrix(SPEC, 1.0, seed=3)
    assert np.array_equal(s.H, s.H.conj().T)
    assert np.all(s.H.diagonal().imag == 0)


def test_support_confined_to_band():
    spec = ProfileSpec(N=12, W=2, shape="uniform")
    s = sample_band_matrix(spec, 1.0, seed=5)
    from bandflow.profiles import periodic_distance
    for x in range(12):
        for y in range(12):
            if periodic_distance(x + 1, y + 1, 12) > 2:
                assert s.H[x, y] == 0


def test_spec_threading():
    assert sample_band_matrix(SPEC, 0.5, seed=0).spec is SPEC
    assert sample_band_matrix(S, 0.5, seed=0).spec is None
    with pytest.raises(TypeError):
        sample_band_matrix(np.eye(4), 0.5, seed=0)


def test_entry_moments_match_profile():
    # |H_xy|^2 is v * Exp(1) off the diagonal and v * chi^2_1 on it,
    # so the sample means over n draws carry SE v/sqrt(n) and v*sqrt(2/n)
    t = 0.7
    n_draws = 10_000
    off = np.empty(n_draws, dtype=complex)
    diag = np.empty(n_draws)
    for k in range(n_draws):
        h = sample_band_matrix(SPEC, t, seed=k).H
        off[k] = h[0, 1]
        diag[k] = h[0, 0].real
    v_off = t * S.entry(0, 1)
    v_diag = t * S.entry(0, 0)
    assert abs(np.mean(np.abs(off) ** 2) - v_off) < 5 * v_off / np.sqrt(n_draws)
    assert abs(np.mean(diag**2) - v_diag) < 5 * v_diag * np.sqrt(2 / n_draws)
    assert abs(off.mean()) < 5 * np.sqrt(v_off / n_draws)
    assert abs(diag.mean()) < 5 * np.sqrt(v_diag / n_draws)


def test_single_step_path_matches_direct_sample_in_law():
    t = 0.6
    n_seeds = 800
    pairs = in_band_pairs(SPEC)
    v = t * S.entry(0, 1)

    def pooled_second_moment(draw):
        acc = 0.0
        for seed in range(n_seeds):
            h = draw(seed)
            acc += sum(abs(h[x, y]) ** 2 for x, y in pairs)
        return acc / (n_seeds * len(pairs))

    direct = pooled_second_moment(lambda s: sample_band_matrix(SPEC, t, seed=s).H)
    path = pooled_second_moment(
        lambda s: brownian_path(SPEC, [0.0, t], seed=s).final)
    se = v / np.sqrt(n_seeds * len(pairs))
    assert abs(direct - v) < 5 * se
    assert abs(path - v) < 5 * se


def test_quadratic_variation_tracks_profile():
    spec = ProfileSpec(N=16, W=4, shape="uniform")
    s = build_variance_profile(spec)
    grid = np.linspace(0.0, 1.0, 65)
    flow = brownian_path(spec, grid, seed=42)
    pairs = in_band_pairs(spec)
    ratios = []
    for x, y in pairs:
        qv = sum(abs(dh[x, y]) ** 2 for dh in flow.increments)
        ratios.append(qv / s.entry(x, y))
    # each ratio has mean 1 and variance 1/K; pairs are independent
    pooled = np.mean(ratios)
    se = 1.0 / np.sqrt(64 * len(pairs))
    assert abs(pooled - 1.0) < 5 * se


def test_path_nodes_hermitian_and_cumulative():
    grid = np.array([0.0, 0.2, 0.5, 1.0])
    flow = brownian_path(SPEC, grid, seed=9)
    assert np.all(flow.cumulative[0] == 0)
    for k in range(len(grid)):
        h = flow.cumulative[k]
        assert np.array_equal(h, h.conj().T)
    rebuilt = np.zeros_like(flow.cumulative[0])
    for dh, h in zip(flow.increments, flow.cumulative[1:]):
        rebuilt = rebuilt + dh
        assert np.array_equal(rebuilt, h)
    assert flow.sample_at(2).t == 0.5
    assert isinstance(flow.sample_at(2), BandSample)


def test_increments_independent_across_steps():
    flow = brownian_path(SPEC, [0.0, 0.5, 1.0], seed=9)
    assert not np.array_equal(flow.increments[0], flow.increments[1])


def test_grid_validation():
    for bad in ([0.0], [0.1, 0.5], [0.0, 0.5, 0.5], [0.0, 0.7, 0.4],
                [0.0, 1.2]):
        with pytest.raises(ValueError):
            brownian_path(SPEC, bad, seed=0)


def test_coarsen_path_restricts_same_realization():
    grid = np.linspace(0.0, 1.0, 9)
    fine = brownian_path(SPEC, grid, seed=21)
    coarse = coarsen_path(fine, 4)
    assert np.array_equal(coarse.grid, grid[::4])
    assert len(coarse.increments) == 2
    for k in range(3):
        assert np.array_equal(coarse.cumulative[k], fine.cumulative[4 * k])
    expected = fine.increments[0]
    for dh in fine.increments[1:4]:
        expected = expected + dh
    assert np.array_equal(coarse.increments[0], expected)
    assert coarse.seed == fine.seed and coarse.spec is fine.spec


def test_coarsen_path_validation():
    fine = brownian_path(SPEC, np.linspace(0.0, 1.0, 9), seed=21)
    assert coarsen_path(fine, 1) is fine
    with pytest.raises(ValueError):
        coarsen_path(fine, 3)
    with pytest.raises(ValueError):
        coarsen_path(fine, 0)


def test_grid_refinement_preserves_endpoint_law():
    n_seeds = 800
    pairs = in_band_pairs(SPEC)
    v = S.entry(0, 1)

    def pooled(grid):
        acc = 0.0
        for seed in range(n_seeds):
            h = brownian_path(SPEC, grid, seed=seed).final
            acc += sum(abs(h[x, y]) ** 2 for x, y in pairs)
        return acc / (n_seeds * len(pairs))

    coarse = pooled([0.0, 1.0])
    fine = pooled([0.0, 0.5, 1.0])
    # two independent means, each with relative SE 1/sqrt(n*pairs)
    rel_se = np.sqrt(2.0) / np.sqrt(n_seeds * len(pairs))
    assert abs(fine / coarse - 1.0) < 5 * rel_se
    assert abs(coarse - v) < 5 * v / np.sqrt(n_seeds * len(pairs))
