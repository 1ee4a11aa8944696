"""Variance profiles and their spectral calculus, checked against
closed forms and dense brute force."""

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bandflow.circulant import NegativeSpectrumError, SingularProfileError
from bandflow.profiles import (
    BandOverlapError,
    ProfileSpec,
    b_matrix,
    build_variance_profile,
    diffusion_profile,
    heat_kernel,
    offdiag_decay_check,
    periodic_distance,
    profile_from_json,
    profile_to_json,
    sqrt_profile,
    variance_profile_pair,
)
from bandflow.semicircle import stieltjes_semicircle
from bandflow.circulant import CirculantOperator


# ---- periodic distance ------------------------------------------------------

def test_periodic_distance_wraparound_neighbor():
    assert periodic_distance(1, 16, 16) == 1


def test_periodic_distance_same_site():
    assert periodic_distance(3, 3, 16) == 0


def test_periodic_distance_antipode():
    assert periodic_distance(1, 9, 16) == 8


def test_periodic_distance_rejects_out_of_range():
    with pytest.raises(ValueError):
        periodic_distance(0, 3, 16)
    with pytest.raises(ValueError):
        periodic_distance(1, 17, 16)


# ---- profile construction ---------------------------------------------------

def test_uniform_narrow_band_row():
    s = build_variance_profile(ProfileSpec(N=4, W=1, shape="uniform"))
    assert np.allclose(s.first_row, [1 / 3, 1 / 3, 0.0, 1 / 3], atol=1e-15)


def test_row_sums_exactly_one():
    for spec in (ProfileSpec(12, 3), ProfileSpec(64, 8, "uniform"),
                 ProfileSpec(50, 12), ProfileSpec(9, 2)):
        s = build_variance_profile(spec)
        dense = s.dense()
        assert np.abs(dense.sum(axis=1) - 1.0).max() < 1e-12
        assert np.abs(dense.sum(axis=0) - 1.0).max() < 1e-12


def test_uniform_normalizer_counts_support():
    s = build_variance_profile(ProfileSpec(N=64, W=8, shape="uniform"))
    assert abs(s.first_row[0] - 1.0 / 17.0) < 1e-15   # Z = 2W+1


def test_band_overlap_rejected():
    with pytest.raises(BandOverlapError):
        build_variance_profile(ProfileSpec(N=16, W=8))


def test_spec_validation():
    with pytest.raises(ValueError):
        ProfileSpec(N=0, W=1)
    with pytest.raises(ValueError):
        ProfileSpec(N=8, W=-1)
    with pytest.raises(ValueError):
        ProfileSpec(N=8, W=2, shape="gauss")


# ---- square root ------------------------------------------------------------

def test_sqrt_of_identity_is_identity():
    eye = CirculantOperator.identity(8)
    r = sqrt_profile(eye)
    assert np.abs(r.dense() - np.eye(8)).max() < 1e-12


def test_triangular_profile_has_nonnegative_root():
    s = build_variance_profile(ProfileSpec(N=64, W=8))
    assert np.asarray(s.eigenvalues).real.min() > -1e-12
    r = sqrt_profile(s)
    row = np.asarray(r.first_row).real
    assert row.min() >= 0.0
    assert np.abs((r @ r).first_row - s.first_row).max() < 1e-10
    assert abs(r.row_sum() - 1.0) < 1e-12


def test_root_via_spec_hint_matches_hint_free():
    spec = ProfileSpec(N=48, W=9)
    s = build_variance_profile(spec)
    assert np.abs(sqrt_profile(s).first_row
                  - sqrt_profile(s, spec=spec).first_row).max() < 1e-12


def test_uniform_profile_has_no_stochastic_root():
    s = build_variance_profile(ProfileSpec(N=64, W=8, shape="uniform"))
    with pytest.raises(NegativeSpectrumError):
        sqrt_profile(s)


def test_wrong_spec_hint_rejected():
    s = build_variance_profile(ProfileSpec(N=64, W=8))
    with pytest.raises(ValueError):
        sqrt_profile(s, spec=ProfileSpec(N=64, W=12))


def test_profile_pair_is_consistent():
    s, r = variance_profile_pair(ProfileSpec(N=40, W=6))
    assert np.abs((r @ r).first_row - s.first_row).max() < 1e-10


# ---- diffusion profile ------------------------------------------------------

BULK_Z = 0.5 + 0.05j


def test_diffusion_at_time_zero():
    s = build_variance_profile(ProfileSpec(N=32, W=4))
    m = stieltjes_semicircle(BULK_Z)
    th = diffusion_profile(s, m, 0.0)
    assert np.abs(th.first_row - abs(m) ** 2 * np.asarray(s.first_row)).max() < 1e-12


def test_diffusion_resolvent_identity():
    # (1 - t|m|^2 S) Theta_t = |m|^2 S
    s = build_variance_profile(ProfileSpec(N=24, W=5))
    m = stieltjes_semicircle(BULK_Z)
    a = abs(m) ** 2
    for t in (0.0, 0.4, 1.0):
        th = diffusion_profile(s, m, t).dense()
        lhs = (np.eye(24) - t * a * s.dense()) @ th
        assert np.abs(lhs - a * s.dense()).max() < 1e-10


def test_diffusion_derivative_is_its_square():
    s = build_variance_profile(ProfileSpec(N=32, W=6))
    m = stieltjes_semicircle(BULK_Z)
    t = 0.5
    for dt in (1e-3, 1e-4):
        fd = (diffusion_profile(s, m, t + dt).dense()
              - diffusion_profile(s, m, t).dense()) / dt
        sq = diffusion_profile(s, m, t).dense()
        sq = sq @ sq
        rel = np.abs(fd - sq).max() / np.abs(sq).max()
        assert rel < 10 * dt


def test_diffusion_pole_raises():
    s = build_variance_profile(ProfileSpec(N=16, W=3))
    with pytest.raises(SingularProfileError):
        diffusion_profile(s, 1.2, 1.0)   # |m| > 1 puts the top eigenvalue past the pole


# ---- B matrix ---------------------------------------------------------------

def test_b_matrix_at_zero_is_identity():
    s = build_variance_profile(ProfileSpec(N=16, W=3))
    b = b_matrix(s, stieltjes_semicircle(BULK_Z), 0.0)
    assert np.abs(b.dense() - np.eye(16)).max() < 1e-12


def test_b_matrix_matches_dense_inverse():
    s = build_variance_profile(ProfileSpec(N=8, W=2))
    m = stieltjes_semicircle(BULK_Z)
    for time in (0.3, 1.0):
        b = b_matrix(s, m, time).dense()
        ref = np.linalg.inv(np.eye(8) - time * m**2 * s.dense())
        assert np.abs(b - ref).max() < 1e-10


def test_b_matrix_time_range_and_pole():
    s = build_variance_profile(ProfileSpec(N=16, W=3))
    with pytest.raises(ValueError):
        b_matrix(s, 0.5j, 1.5)
    with pytest.raises(SingularProfileError):
        b_matrix(s, 1.0, 1.0)   # real m = 1 hits the top eigenvalue exactly


def test_b_matrix_row_abs_sums_bounded_in_bulk():
    s = build_variance_profile(ProfileSpec(N=128, W=16))
    m = stieltjes_semicircle(BULK_Z)
    sums = [b_matrix(s, m, t).abs_row_sum() for t in np.linspace(0, 1, 11)]
    assert max(sums) < 50.0


# ---- heat kernel ------------------------------------------------------------

def test_heat_kernel_at_zero_rate():
    s = build_variance_profile(ProfileSpec(N=16, W=3))
    k = heat_kernel(s, stieltjes_semicircle(BULK_Z), 1.0, 0.0)
    assert np.abs(k.dense() - np.eye(16)).max() < 1e-12


def test_heat_kernel_is_stochastic():
    s = build_variance_profile(ProfileSpec(N=64, W=8))
    m = stieltjes_semicircle(BULK_Z)
    for r in (0.5, 3.0, 50.0, 1e6):
        k = heat_kernel(s, m, 1.0, r)
        assert abs(k.row_sum() - 1.0) < 1e-10
        assert np.asarray(k.first_row).real.min() > -1e-12


def test_heat_kernel_semigroup():
    s = build_variance_profile(ProfileSpec(N=32, W=5))
    m = stieltjes_semicircle(BULK_Z)
    k1 = heat_kernel(s, m, 1.0, 0.7)
    k2 = heat_kernel(s, m, 1.0, 1.6)
    k12 = heat_kernel(s, m, 1.0, 2.3)
    assert np.abs((k1 @ k2).first_row - k12.first_row).max() < 1e-10


def test_heat_kernel_rejects_negative_rate():
    s = build_variance_profile(ProfileSpec(N=16, W=3))
    with pytest.raises(ValueError):
        heat_kernel(s, 0.5j, 1.0, -1.0)


# ---- off-diagonal decay -----------------------------------------------------

def test_decay_entries_symmetric_and_small_far_out():
    spec = ProfileSpec(N=256, W=16)
    s = build_variance_profile(spec)
    z = 0.0 + (16**2 / 256**2) * 4j
    m = stieltjes_semicircle(z)
    rep = offdiag_decay_check(s, m, 1.0, eps=0.1, w_band=spec.W)
    assert rep.peak > 0
    # smoothed profile is a symmetric circulant: lag d equals lag N-d
    a = abs(m) ** 2
    lam = np.asarray(s.eigenvalues).real
    smooth = CirculantOperator.from_eigenvalues(lam * (a * lam / (1 - a * lam)))
    row = np.asarray(smooth.first_row).real
    assert np.abs(row[1:] - row[1:][::-1]).max() < 1e-14
    far = rep.lags > 10 * rep.bound_length
    if far.any():
        assert rep.entries[far].max() < 1e-8 * rep.peak


# ---- serialization ----------------------------------------------------------

def test_profile_json_round_trip():
    spec = ProfileSpec(N=24, W=4)
    s = build_variance_profile(spec)
    spec2, s2 = profile_from_json(profile_to_json(spec))
    assert spec2 == spec
    assert np.abs(np.asarray(s2.first_row) - np.asarray(s.first_row)).max() < 1e-15


def test_profile_json_rejects_bad_payloads():
    spec = ProfileSpec(N=8, W=2)
    good = json.loads(profile_to_json(spec))
    short = dict(good, first_row=good["first_row"][:-1])
    with pytest.raises(ValueError):
        profile_from_json(json.dumps(short))
    scaled = dict(good, first_row=[2 * v for v in good["first_row"]])
    with pytest.raises(ValueError):
        profile_from_json(json.dumps(scaled))


# ---- properties -------------------------------------------------------------

@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=6, max_value=96), st.data())
def test_any_valid_profile_is_banded_doubly_stochastic(n, data):
    w = data.draw(st.integers(min_value=1, max_value=max(1, n // 4)))
    shape = data.draw(st.sampled_from(["fejer", "uniform"]))
    s = build_variance_profile(ProfileSpec(N=n, W=w, shape=shape))
    row = np.asarray(s.first_row).real
    assert abs(row.sum() - 1.0) < 1e-12
    assert row.min() >= 0.0
    assert np.abs(row[1:] - row[1:][::-1]).max() == 0.0
    assert row.max() <= 1.0 / max(1, w - 1) + 1e-12
