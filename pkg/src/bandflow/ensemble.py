"""Seeded sampling of Gaussian band matrices and their Brownian matrix flow.

Entries are complex Gaussian with E|H_xy|^2 = t * S_xy off the diagonal and a
real diagonal with E H_xx^2 = t * S_xx (the Hermitian constraint forces the
diagonal real; the variance convention is isolated here, in
``_hermitian_increment``). The flow accumulates independent Hermitian
increments with variance S * dt, started from H_0 = 0.

Randomness is counter-based: each step k of a path owns a Philox stream
seeded by SeedSequence(master_seed, spawn_key=(k,)), and entry (x, y) sits at
a fixed offset of that stream. Paths are therefore reproducible per
(seed, entry, step) independent of scheduling, and refining the grid changes
only which (variance, step) pairs are drawn, leaving the law of the endpoint
invariant.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .circulant import CirculantOperator
from .profiles import ProfileSpec, build_variance_profile

__all__ = ["BandSample", "BrownianFlow", "sample_band_matrix", "brownian_path",
           "coarsen_path"]


def _resolve_profile(profile):
    """Accept a ProfileSpec or a prebuilt circulant S; return (spec, S)."""
    if isinstance(profile, ProfileSpec):
        return profile, build_variance_profile(profile)
    if isinstance(profile, CirculantOperator):
        return None, profile
    raise TypeError(f"expected ProfileSpec or CirculantOperator, got {type(profile)!r}")


def _step_rng(seed: int, step: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(step),))
    return np.random.Generator(np.random.Philox(ss))


def _hermitian_increment(s_dense: np.ndarray, dt: float,
                         rng: np.random.Generator) -> np.ndarray:
    """One Hermitian Gaussian matrix with entry variances S * dt.

    Diagonal convention: H_xx real with E H_xx^2 = dt * S_xx.
    """
    n = s_dense.shape[0]
    a = rng.standard_normal((n, n))
    b = rng.standard_normal((n, n))
    scale = np.sqrt(s_dense * dt)
    upper = np.triu(scale * (a + 1j * b) / np.sqrt(2.0), 1)
    h = upper + upper.conj().T
    np.fill_diagonal(h, scale.diagonal() * a.diagonal())
    return h


@dataclass(frozen=True)
class BandSample:
    """A single Hermitian draw H with variance profile t * S."""

    H: np.ndarray
    t: float
    seed: int
    spec: ProfileSpec | None = None

    @property
    def N(self) -> int:
        return self.H.shape[0]


@dataclass(frozen=True)
class BrownianFlow:
    """The matrix Ornstein path H_t on a fixed time grid, H(grid[0]) = 0."""

    grid: np.ndarray
    increments: list = field(repr=False)
    cumulative: list = field(repr=False)   # H at each grid point, length len(grid)
    seed: int = 0
    spec: ProfileSpec | None = None

    @property
    def N(self) -> int:
        return self.cumulative[0].shape[0]

    @property
    def final(self) -> np.ndarray:
        return self.cumulative[-1]

    def sample_at(self, k: int) -> BandSample:
        return BandSample(H=self.cumulative[k], t=float(self.grid[k]),
                          seed=self.seed, spec=self.spec)


def sample_band_matrix(profile, t: float, seed: int) -> BandSample:
    """One Hermitian band matrix with E|H_xy|^2 = t * S_xy.

    Bit-identical for identical (profile, t, seed).
    """
    if t < 0:
        raise ValueError(f"t must be nonnegative, got {t}")
    spec, s = _resolve_profile(profile)
    h = _hermitian_increment(s.dense(), t, _step_rng(seed, 0))
    return BandSample(H=h, t=float(t), seed=int(seed), spec=spec)


def brownian_path(profile, grid, seed: int) -> BrownianFlow:
    """Cumulative Hermitian Gaussian path over ``grid``; H(grid[0]) = 0."""
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or len(grid) < 2:
        raise ValueError("grid must contain at least two times")
    if grid[0] != 0.0:
        raise ValueError(f"grid must start at 0, got {grid[0]}")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing")
    if grid[-1] > 1.0 + 1e-12:
        raise ValueError(f"grid must end at or before 1, got {grid[-1]}")

    spec, s = _resolve_profile(profile)
    s_dense = s.dense()
    n = s_dense.shape[0]
    increments = []
    cumulative = [np.zeros((n, n), dtype=complex)]
    h = cumulative[0]
    for k, dt in enumerate(np.diff(grid), start=1):
        dh = _hermitian_increment(s_dense, float(dt), _step_rng(seed, k))
        increments.append(dh)
        h = h + dh
        cumulative.append(h)
    return BrownianFlow(grid=grid, increments=increments, cumulative=cumulative,
                        seed=int(seed), spec=spec)


def coarsen_path(flow: BrownianFlow, factor: int) -> BrownianFlow:
    """The same Brownian path restricted to every ``factor``-th grid node.

    Increments are summed, so the coarse flow visits exactly the same
    matrices at its nodes.  This is the construction for strong
    convergence measurements: run a quadrature at several resolutions
    against one realization instead of drawing fresh paths, which would
    bury the refinement trend under independent noise.
    """
    if factor < 1 or int(factor) != factor:
        raise ValueError(f"factor must be a positive integer, got {factor}")
    factor = int(factor)
    steps = len(flow.grid) - 1
    if steps % factor:
        raise ValueError(f"{steps} steps do not split into groups of {factor}")
    if factor == 1:
        return flow
    increments = []
    for i in range(0, steps, factor):
        acc = flow.increments[i]
        for dh in flow.increments[i + 1:i + factor]:
            acc = acc + dh
        increments.append(acc)
    return BrownianFlow(grid=flow.grid[::factor], increments=increments,
                        cumulative=list(flow.cumulative[::factor]),
                        seed=flow.seed, spec=flow.spec)
