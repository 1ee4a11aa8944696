"""Circulant operators on the discrete torus, with DFT spectral calculus.

Every deterministic matrix in this package (variance profile, its square
root, diffusion profiles, propagators, heat kernels) is a symmetric
circulant: entry (x, y) depends only on (y - x) mod N. Such a matrix is
diagonalized by the DFT, so we store only the first row and its cached
eigenvalues, and apply matrices in O(N log N) per column instead of
materializing dense products.

The symmetry convention first_row[k] == first_row[N - k] is enforced at
construction; it makes fft(first_row) equal to the eigenvalue at each
frequency, for complex-valued rows too.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["CirculantOperator", "SingularProfileError", "NegativeSpectrumError"]


class SingularProfileError(ValueError):
    """A spectral map hit a pole (denominator vanished for some eigenvalue)."""


class NegativeSpectrumError(ValueError):
    """Square root requested for an operator with a negative DFT eigenvalue."""


_SYMMETRY_TOL = 1e-12


@dataclass(frozen=True)
class CirculantOperator:
    """Symmetric circulant, stored as (first_row, cached DFT eigenvalues)."""

    first_row: np.ndarray
    eigenvalues: np.ndarray = field(repr=False)
    N: int = 0

    @classmethod
    def from_first_row(cls, row) -> "CirculantOperator":
        row = np.asarray(row)
        n = row.shape[0]
        if n < 1:
            raise ValueError("empty first row")
        # symmetric convention: row[k] == row[N-k]
        flipped = np.roll(row[::-1], 1)
        scale = max(1.0, float(np.abs(row).max()))
        if np.abs(row - flipped).max() > _SYMMETRY_TOL * scale:
            raise ValueError("first_row is not symmetric under k -> N - k")
        eig = np.fft.fft(row)
        if not np.iscomplexobj(row):
            eig = _real_if_close(eig)
        return cls(first_row=row, eigenvalues=eig, N=n)

    @classmethod
    def from_eigenvalues(cls, eig) -> "CirculantOperator":
        eig = np.asarray(eig)
        row = np.fft.ifft(eig)
        if np.abs(row.imag).max() <= 1e-12 * max(1.0, np.abs(row.real).max()):
            row = row.real
        return cls.from_first_row(row)

    @classmethod
    def identity(cls, n: int) -> "CirculantOperator":
        row = np.zeros(n)
        row[0] = 1.0
        return cls.from_first_row(row)

    # ---- algebra -----------------------------------------------------------

    def entry(self, x: int, y: int):
        return self.first_row[(y - x) % self.N]

    def dense(self) -> np.ndarray:
        idx = (np.arange(self.N)[None, :] - np.arange(self.N)[:, None]) % self.N
        return self.first_row[idx]

    def apply(self, v: np.ndarray) -> np.ndarray:
        """Matrix-vector (or matrix-matrix, acting on columns) product via FFT."""
        v = np.asarray(v)
        out = np.fft.ifft(self.eigenvalues.reshape(-1, *([1] * (v.ndim - 1)))
                          * np.fft.fft(v, axis=0), axis=0)
        if not np.iscomplexobj(v) and not np.iscomplexobj(self.first_row):
            return out.real
        return out

    def apply_right(self, m: np.ndarray) -> np.ndarray:
        """m @ C for a dense m; uses symmetry of C."""
        m = np.asarray(m)
        out = np.fft.ifft(np.fft.fft(m, axis=1) * self.eigenvalues[None, :], axis=1)
        if not np.iscomplexobj(m) and not np.iscomplexobj(self.first_row):
            return out.real
        return out

    def sandwich(self, m: np.ndarray) -> np.ndarray:
        """C @ m @ C."""
        return self.apply_right(self.apply(m))

    def matmul(self, other: "CirculantOperator") -> "CirculantOperator":
        if self.N != other.N:
            raise ValueError("dimension mismatch")
        return CirculantOperator.from_eigenvalues(self.eigenvalues * other.eigenvalues)

    def __matmul__(self, other):
        if isinstance(other, CirculantOperator):
            return self.matmul(other)
        return self.apply(other)

    def map_eigenvalues(self, fn) -> "CirculantOperator":
        return CirculantOperator.from_eigenvalues(fn(self.eigenvalues))

    def row_sum(self):
        """All row sums coincide with the frequency-0 eigenvalue."""
        return self.first_row.sum()

    def abs_row_sum(self) -> float:
        return float(np.abs(self.first_row).sum())

    def max_entry(self) -> float:
        return float(np.abs(self.first_row).max())


def _real_if_close(arr: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    if np.abs(arr.imag).max() <= tol * max(1.0, np.abs(arr.real).max()):
        return arr.real
    return arr
