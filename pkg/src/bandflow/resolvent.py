"""Resolvent bundles and spectral diagnostics.

G = (H - w)^{-1} for Im w > 0 satisfies the Ward identity

    sum_y |G_xy|^2 = Im G_xx / Im w

exactly, which doubles as a solver sanity gate.  T = S^{1/2} F S^{1/2}
with F_xy = |G_xy|^2 is the object compared against the diffusion
profile.  At the scales this package targets the dense O(N^3) solve is
the right trade: every entry of F is needed downstream anyway.

A note on symmetry: for the complex Hermitian ensemble F is *not*
symmetric pathwise (|G_xy| != |G_yx| once N >= 3).  It is symmetric in
law, because H -> conj(H) preserves the Gaussian law and transposes F,
and the pathwise asymmetry of T is bounded by twice the deviation of T
from the (symmetric) diffusion profile.  Nothing here symmetrizes.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .circulant import CirculantOperator
from .ensemble import BandSample
from .profiles import variance_profile_pair

RESIDUAL_TOL = 1e-9
WARD_TOL = 1e-9


def _unpack(h):
    """Accept a BandSample or a plain matrix; return (matrix, spec or None)."""
    if isinstance(h, BandSample):
        return np.asarray(h.H), h.spec
    return np.asarray(h, dtype=complex), None


def _as_dense(op) -> np.ndarray:
    if isinstance(op, CirculantOperator):
        return op.dense()
    return np.asarray(op)


@dataclass(frozen=True)
class ResolventBundle:
    """G at one spectral parameter, with its entry-square matrix and T.

    T is None when no square-root profile was available at construction;
    ``t_matrix`` builds it on demand.  ``residual`` and ``ward_error``
    are the construction-time diagnostics (max entry of (H-w)G - Id and
    the worst relative Ward violation).
    """

    G: np.ndarray
    w: complex
    F: np.ndarray
    T: np.ndarray | None
    residual: float
    ward_error: float
    spec: object = None

    @property
    def N(self) -> int:
        return self.G.shape[0]


def resolvent(sample, w, s_half: CirculantOperator | None = None) -> ResolventBundle:
    """Invert H - w and package the Ward-checked bundle.

    ``sample`` is a BandSample or a Hermitian matrix.  When the sample
    carries a profile spec and ``s_half`` is not given, the square-root
    profile is rebuilt from the spec so the bundle ships with T.
    """
    w = complex(w)
    if w.imag <= 0:
        raise ValueError(f"need Im w > 0, got {w}")
    h, spec = _unpack(sample)
    n = h.shape[0]
    eye = np.eye(n)
    g = np.linalg.solve(h - w * eye, np.eye(n, dtype=complex))

    residual = float(np.abs((h - w * eye) @ g - eye).max())
    if not np.isfinite(residual) or residual > RESIDUAL_TOL:
        raise ArithmeticError(f"resolvent solve residual {residual:.3e} exceeds {RESIDUAL_TOL}")

    f = g.real**2 + g.imag**2
    ward_rhs = g.diagonal().imag / w.imag     # strictly positive: Im G_xx >= eta |G_xx|^2
    ward_error = float((np.abs(f.sum(axis=1) - ward_rhs) / ward_rhs).max())
    if ward_error > WARD_TOL:
        raise ArithmeticError(f"Ward identity violated at {ward_error:.3e}")

    if s_half is None and spec is not None:
        _, s_half = variance_profile_pair(spec)
    t = s_half.sandwich(f) if s_half is not None else None
    if t is not None:
        t = np.asarray(t).real
    return ResolventBundle(G=g, w=w, F=f, T=t, residual=residual,
                           ward_error=ward_error, spec=spec)


def t_matrix(bundle: ResolventBundle, s_half: CirculantOperator) -> np.ndarray:
    """T = S^{1/2} F S^{1/2} via two circulant applies (O(N^2 log N))."""
    return np.asarray(s_half.sandwich(bundle.F)).real


def qd_error(t, theta):
    """Max entry deviation of T from the diffusion profile, and its ratio.

    Returns (max_xy |T - Theta|, that maximum over max_xy |Theta|).
    """
    t = _as_dense(t)
    th = _as_dense(theta)
    if t.shape != th.shape:
        raise ValueError(f"shape mismatch: {t.shape} vs {th.shape}")
    err = float(np.abs(t - th).max())
    scale = float(np.abs(th).max())
    return err, err / scale


@dataclass(frozen=True)
class LocalLawReport:
    ratio_max: float        # max_ab |G_ab - m d_ab|^2 / ((S^{1/2} T S^{1/2})_ab + S^{1/2}_ab + W^-D)
    sup_sq: float           # max_ab |G_ab - m d_ab|^2
    sup_bound: float        # W^-1 |Im w|^-1/2
    sup_ratio: float
    w_band: int
    D: int


def _band_width_of(s: CirculantOperator, spec, w_band):
    if w_band is not None:
        return int(w_band)
    if spec is not None:
        return int(spec.W)
    # fall back on the normalization: the diagonal entry is 1/Z, Z = realized width
    return int(round(1.0 / float(np.max(s.first_row.real))))


def local_law_ratios(bundle: ResolventBundle, m, s: CirculantOperator,
                     s_half: CirculantOperator, D: int = 10,
                     w_band: int | None = None) -> LocalLawReport:
    """Entrywise local-law ratios with the regularized T-denominator.

    The numerator is |G - m Id|^2; the denominator is
    (S^{1/2} T S^{1/2})_ab + S^{1/2}_ab + W^{-D}, all taken entrywise.
    Also reports the bare sup-norm deviation against W^-1 |Im w|^-1/2.
    """
    g = bundle.G
    n = bundle.N
    wb = _band_width_of(s, bundle.spec, w_band)
    dev = g - complex(m) * np.eye(n)
    num = dev.real**2 + dev.imag**2

    t = bundle.T if bundle.T is not None else t_matrix(bundle, s_half)
    den = np.asarray(s_half.sandwich(t)).real + s_half.dense().real + float(wb) ** (-D)
    ratio_max = float((num / den).max())

    sup_sq = float(num.max())
    sup_bound = float(wb ** (-1.0) * abs(bundle.w.imag) ** (-0.5))
    return LocalLawReport(ratio_max=ratio_max, sup_sq=sup_sq, sup_bound=sup_bound,
                          sup_ratio=sup_sq / sup_bound, w_band=wb, D=int(D))


def minor_identity_check(h, w, x: int) -> float:
    """Max residual of the rank-one minor identity at row/column ``x``.

    Compares the directly inverted minor (row and column x deleted)
    against G_kl - G_kx G_xl / G_xx.  Indices are 0-based.
    """
    h, _ = _unpack(h)
    n = h.shape[0]
    if not 0 <= x < n:
        raise IndexError(f"x must lie in [0, {n - 1}], got {x}")
    w = complex(w)
    if w.imag <= 0:
        raise ValueError(f"need Im w > 0, got {w}")

    g = np.linalg.solve(h - w * np.eye(n), np.eye(n, dtype=complex))
    gxx = g[x, x]
    if abs(gxx) < 1e-12:
        warnings.warn(f"|G_xx| = {abs(gxx):.2e} at x={x}; minor identity ill conditioned")

    keep = np.r_[0:x, x + 1:n]
    sub = np.ix_(keep, keep)
    minor = np.linalg.solve(h[sub] - w * np.eye(n - 1), np.eye(n - 1, dtype=complex))
    predicted = g[sub] - np.outer(g[keep, x], g[x, keep]) / gxx
    return float(np.abs(minor - predicted).max())


@dataclass(frozen=True)
class DelocalizationReport:
    density: float              # |A| / N, A = bulk eigenvectors that look localized
    functionals: np.ndarray     # per-eigenvector sum_x |u(x)| * ||tail of u around x||
    bulk: np.ndarray            # bool mask, eigenvalue in [-2+kappa, 2-kappa]
    eigenvalues: np.ndarray
    localized: np.ndarray       # bool mask, bulk and functional <= eps


def eigen_delocalization(h, kappa: float, ell: int, eps: float,
                         periodic: bool = True) -> DelocalizationReport:
    """Count bulk eigenvectors whose localization functional is small.

    For each unit eigenvector u the functional is
    sum_x |u(x)| * || u restricted to distance >= ell from x ||.
    A delta vector scores 0, a flat vector scores ~ sqrt(N), so small
    values flag localization.  ``density`` is the localized fraction of
    all N eigenvectors.  ``periodic`` selects torus distance; the line
    variant clips windows at the edges instead of wrapping.
    """
    h, _ = _unpack(h)
    n = h.shape[0]
    if not 1 <= ell <= n:
        raise ValueError(f"ell must lie in [1, {n}], got {ell}")
    if not 0 < kappa < 2:
        raise ValueError(f"kappa must lie in (0, 2), got {kappa}")
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")

    vals, vecs = np.linalg.eigh(h)
    bulk = np.abs(vals) <= 2.0 - kappa
    sq = vecs.real**2 + vecs.imag**2          # columns sum to 1

    if periodic:
        lags = np.arange(n)
        window = (np.minimum(lags, n - lags) < ell).astype(float)
        near = CirculantOperator.from_first_row(window).apply(sq)
    else:
        # line distance: near[x] = sum_{|x-y| < ell} sq[y], edges clipped
        c = np.vstack([np.zeros((1, n)), np.cumsum(sq, axis=0)])
        hi = np.minimum(np.arange(n) + ell, n)
        lo = np.maximum(np.arange(n) - ell + 1, 0)
        near = c[hi] - c[lo]
    tail = np.sqrt(np.clip(1.0 - np.asarray(near).real, 0.0, None))
    functionals = (np.abs(vecs) * tail).sum(axis=0)

    localized = bulk & (functionals <= eps)
    return DelocalizationReport(density=float(localized.sum()) / n,
                                functionals=functionals, bulk=bulk,
                                eigenvalues=vals, localized=localized)
