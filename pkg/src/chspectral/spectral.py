"""Fourier machinery on a periodic box.

Fields are plain ``numpy`` arrays whose shape equals ``grid.sizes``; axis ``i``
samples ``x_i = k h_i`` for ``k = 0..N_i-1`` on ``[0, L_i)``.

Transform convention: the forward transform is unnormalised and the inverse
divides by ``prod(N_i)``, so the zero-wavenumber coefficient of ``forward(f)``
equals ``f.sum()`` and the mean of a field is ``F[0, ..., 0] / grid.n_total``.

Symbol operators are stored in the half-spectrum ("rfft") layout because every
operator the schemes need is a function of ``|xi|^2`` and therefore even.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
import scipy.fft as sfft

WORKERS_ENV = "CHSPECTRAL_THREADS"

#: relative imaginary residue above which an inverse transform is rejected
IMAG_TOL = 1e-10


def _workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


class SpectralError(ValueError):
    """Raised for non-finite input, grid mismatches or broken Hermitian symmetry."""


@dataclass(frozen=True)
class GridSpec:
    """Periodic box ``[0, L_1) x ... x [0, L_d)`` sampled with ``N_i`` points per axis."""

    sizes: tuple[int, ...]
    lengths: tuple[float, ...] = field(default=())

    def __post_init__(self):
        sizes = tuple(int(n) for n in self.sizes)
        lengths = tuple(float(v) for v in self.lengths) if self.lengths else (1.0,) * len(sizes)
        object.__setattr__(self, "sizes", sizes)
        object.__setattr__(self, "lengths", lengths)
        if len(sizes) not in (2, 3):
            raise ValueError(f"grid dimension must be 2 or 3, got {len(sizes)}")
        if len(lengths) != len(sizes):
            raise ValueError("sizes and lengths must have the same number of axes")
        for n in sizes:
            if n < 4 or n % 2:
                raise ValueError(f"grid sizes must be even and >= 4, got {n}")
        for v in lengths:
            if not np.isfinite(v) or v <= 0:
                raise ValueError(f"box lengths must be positive, got {v}")

    @classmethod
    def cube(cls, n: int, dim: int = 2, length: float = 1.0) -> "GridSpec":
        return cls((n,) * dim, (length,) * dim)

    @property
    def dim(self) -> int:
        return len(self.sizes)

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(L / n for L, n in zip(self.lengths, self.sizes))

    @property
    def n_total(self) -> int:
        return int(np.prod(self.sizes))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def volume(self) -> float:
        return float(np.prod(self.lengths))

    @cached_property
    def half_shape(self) -> tuple[int, ...]:
        return self.sizes[:-1] + (self.sizes[-1] // 2 + 1,)

    def coords(self) -> list[np.ndarray]:
        """Sample coordinates per axis, broadcastable against a field."""
        out = []
        for i, (n, h) in enumerate(zip(self.sizes, self.spacing)):
            shape = [1] * self.dim
            shape[i] = n
            out.append((np.arange(n) * h).reshape(shape))
        return out

    def mode_indices(self, half: bool = False) -> list[np.ndarray]:
        """Integer wavenumbers ``k_i`` in ``[-N_i/2, N_i/2 - 1]``, broadcastable.

        With ``half=True`` the last axis follows the rfft layout ``0..N/2``; its
        final entry is the Nyquist mode, reported as ``-N/2``.
        """
        out = []
        for i, n in enumerate(self.sizes):
            if half and i == self.dim - 1:
                k = np.arange(n // 2 + 1)
                k[-1] = -n // 2
            else:
                k = np.fft.fftfreq(n, 1.0 / n).astype(int)
            shape = [1] * self.dim
            shape[i] = k.size
            out.append(k.reshape(shape))
        return out

    def _k2(self, half: bool) -> np.ndarray:
        k2 = np.zeros(self.half_shape if half else self.sizes)
        for k, L in zip(self.mode_indices(half), self.lengths):
            k2 = k2 + (2 * np.pi * k / L) ** 2
        return k2

    @cached_property
    def k2(self) -> np.ndarray:
        """``4 pi^2 |xi|^2`` on the half spectrum."""
        return self._k2(half=True)

    @cached_property
    def k2_full(self) -> np.ndarray:
        return self._k2(half=False)

    def _ik(self, half: bool) -> list[np.ndarray]:
        out = []
        for i, (k, L, n) in enumerate(zip(self.mode_indices(half), self.lengths, self.sizes)):
            d = 2j * np.pi * k / L
            d = np.where(k == -n // 2, 0.0, d)
            out.append(d)
        return out

    @cached_property
    def ik(self) -> list[np.ndarray]:
        """First-derivative symbols ``2 pi i k_i / L_i`` (Nyquist zeroed), half spectrum."""
        return self._ik(half=True)

    @cached_property
    def ik_full(self) -> list[np.ndarray]:
        return self._ik(half=False)

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """2/3-rule mask on the half spectrum."""
        mask = np.ones(self.half_shape, dtype=bool)
        for k, n in zip(self.mode_indices(half=True), self.sizes):
            mask = mask & (np.abs(k) < n / 3.0)
        return mask

    # fast paths used by the steppers; no validation
    def rfft(self, f: np.ndarray) -> np.ndarray:
        return sfft.rfftn(f, workers=_workers())

    def irfft(self, F: np.ndarray) -> np.ndarray:
        return sfft.irfftn(F, s=self.sizes, workers=_workers())


def _check_field(grid: GridSpec, f: np.ndarray, name: str = "field") -> np.ndarray:
    f = np.asarray(f, dtype=float)
    if f.shape != grid.sizes:
        raise SpectralError(f"{name} has shape {f.shape}, grid expects {grid.sizes}")
    bad = ~np.isfinite(f)
    if bad.any():
        idx = tuple(int(i) for i in np.argwhere(bad)[0])
        raise SpectralError(f"{name} is not finite at index {idx}")
    return f


def forward(grid: GridSpec, f: np.ndarray) -> np.ndarray:
    """Unnormalised DFT over all wavenumbers (numpy ``fftn`` ordering)."""
    f = _check_field(grid, f)
    return sfft.fftn(f, workers=_workers())


def inverse(grid: GridSpec, F: np.ndarray) -> np.ndarray:
    """Inverse of :func:`forward`; returns the real part after checking the imaginary residue."""
    F = np.asarray(F)
    if F.shape != grid.sizes:
        raise SpectralError(f"spectrum has shape {F.shape}, grid expects {grid.sizes}")
    z = sfft.ifftn(F, workers=_workers())
    scale = np.abs(z).max()
    if scale > 0:
        resid = np.abs(z.imag).max() / scale
        if resid > IMAG_TOL:
            raise SpectralError(
                f"inverse transform has imaginary residue {resid:.3e} (relative); "
                "spectrum is not Hermitian-symmetric"
            )
    return np.ascontiguousarray(z.real)


def laplacian(grid: GridSpec, f: np.ndarray) -> np.ndarray:
    f = _check_field(grid, f)
    return grid.irfft(-grid.k2 * grid.rfft(f))


def gradient(grid: GridSpec, f: np.ndarray) -> list[np.ndarray]:
    f = _check_field(grid, f)
    F = grid.rfft(f)
    return [grid.irfft(d * F) for d in grid.ik]


def divergence(grid: GridSpec, v: Sequence[np.ndarray]) -> np.ndarray:
    if len(v) != grid.dim:
        raise SpectralError(f"vector field has {len(v)} components, grid has {grid.dim} axes")
    acc = np.zeros(grid.half_shape, dtype=complex)
    for i, (d, vi) in enumerate(zip(grid.ik, v)):
        acc += d * grid.rfft(_check_field(grid, vi, f"component {i}"))
    return grid.irfft(acc)


def dealias(grid: GridSpec, f: np.ndarray) -> np.ndarray:
    """Zero every mode outside the 2/3-rule box."""
    return grid.irfft(grid.rfft(f) * grid.dealias_mask)


@dataclass(frozen=True, eq=False)
class SymbolOperator:
    """Linear operator diagonal in Fourier space, one real multiplier per mode."""

    grid: GridSpec
    multipliers: np.ndarray  # half-spectrum layout, read-only

    def apply(self, f: np.ndarray) -> np.ndarray:
        return apply_symbol(self, f)

    def apply_hat(self, F: np.ndarray) -> np.ndarray:
        return self.multipliers * F

    def __matmul__(self, other: "SymbolOperator") -> "SymbolOperator":
        if other.grid != self.grid:
            raise SpectralError("cannot compose symbol operators on different grids")
        m = self.multipliers * other.multipliers
        m.setflags(write=False)
        return SymbolOperator(self.grid, m)


def build_symbol(grid: GridSpec, rule: Callable[[np.ndarray], np.ndarray]) -> SymbolOperator:
    """Tabulate ``rule(k2)`` where ``k2 = 4 pi^2 |xi|^2`` for each mode of ``grid``.

    ``rule`` must accept an array; scalar-only callables are vectorised.
    """
    k2 = grid.k2
    try:
        m = np.asarray(rule(k2), dtype=float)
    except (TypeError, ValueError):
        # scalar-only rules fail on arrays with one of these
        m = np.vectorize(rule, otypes=[float])(k2)
    m = np.broadcast_to(m, k2.shape).copy()
    bad = ~np.isfinite(m)
    if bad.any():
        pos = tuple(int(i) for i in np.argwhere(bad)[0])
        k = tuple(int(ax.ravel()[p]) for ax, p in zip(grid.mode_indices(half=True), pos))
        raise SpectralError(f"symbol rule is not finite at wavenumber {k}")
    m.setflags(write=False)
    return SymbolOperator(grid, m)


def apply_symbol(op: SymbolOperator, f: np.ndarray) -> np.ndarray:
    f = _check_field(op.grid, f)
    return op.grid.irfft(op.multipliers * op.grid.rfft(f))
