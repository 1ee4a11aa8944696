"""Semicircle Stieltjes transform and the characteristic spectral path.

m(z) is the unique solution of z = -1/m - m with Im m > 0. The flow below
pairs a moving spectral parameter with the matrix Ornstein path: at time t
the resolvent is evaluated at w_t = -1/m - t*m = z + (1 - t) m, so that
w_1 = z and w_0 = -1/m sits at distance Im m above the axis. Im w_t shrinks
linearly in t, which is what concentrates all the analysis near t = 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "BULK_MARGIN",
    "SpectralPoint",
    "stieltjes_semicircle",
    "characteristic_path",
    "gap_equivalence",
]

# default bulk gate |E| <= 2 - BULK_MARGIN; keeps desk-scale runs away from
# the spectral edge where the square-root branch degenerates
BULK_MARGIN = 0.2


def stieltjes_semicircle(z: complex) -> complex:
    """m(z) = (-z + sqrt(z^2 - 4)) / 2, branch chosen so that Im m > 0."""
    z = complex(z)
    if z.imag <= 0:
        raise ValueError(f"need Im z > 0, got {z}")
    root = np.sqrt(z * z - 4.0 + 0j)
    m = (-z + root) / 2.0
    if m.imag <= 0:
        # explicit branch flip rather than a quadrant heuristic
        m = (-z - root) / 2.0
    return complex(m)


@dataclass(frozen=True)
class SpectralPoint:
    """z = E + i eta together with m(z) and the bulk flag."""

    E: float
    eta: float
    z: complex
    m: complex
    bulk: bool

    @classmethod
    def from_energy(cls, E: float, eta: float,
                    bulk_margin: float = BULK_MARGIN) -> "SpectralPoint":
        if eta <= 0:
            raise ValueError(f"eta must be positive, got {eta}")
        z = complex(E, eta)
        m = stieltjes_semicircle(z)
        return cls(E=float(E), eta=float(eta), z=z, m=m,
                   bulk=abs(E) <= 2.0 - bulk_margin)

    def self_consistency_residual(self) -> float:
        return abs(self.z + self.m + 1.0 / self.m)


def characteristic_path(point: SpectralPoint, t: float) -> complex:
    """w_t = z + (1 - t) m; equals -1/m - t*m by self-consistency."""
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t must lie in [0, 1], got {t}")
    return point.z + (1.0 - t) * point.m


def gap_equivalence(point: SpectralPoint, t: float):
    """The pair (1 - t |m|^2, |m|^2 Im w_t / Im m); equal as an identity.

    1 - t|m|^2 controls the spectral gap of 1 - t|m|^2 S and hence every
    diffusion-profile bound; the second form exposes its Im w_t scaling.
    """
    m = point.m
    w_t = characteristic_path(point, t)
    return 1.0 - t * abs(m) ** 2, abs(m) ** 2 * w_t.imag / m.imag
