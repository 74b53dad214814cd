"""Observables computed from phase fields, and the quadrature oracles for the profile constants."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import integrate, ndimage

from .models import SimState, W
from .spectral import GridSpec

CSV_COLUMNS = ("step", "time", "energy", "mass", "volume", "u_min", "u_max", "overshoot")


def _half_weights(grid: GridSpec) -> np.ndarray:
    # multiplicity of each rfft column in the full spectrum
    n = grid.sizes[-1]
    w = np.full(n // 2 + 1, 2.0)
    w[0] = 1.0
    w[-1] = 1.0
    return w


def dirichlet_integral(grid: GridSpec, u: np.ndarray) -> float:
    """``int |grad u|^2 dx`` as ``<u, -lap u>`` with the spectral Laplacian."""
    U = grid.rfft(u)
    s = np.sum(_half_weights(grid) * grid.k2 * (U.real ** 2 + U.imag ** 2))
    return float(s) * grid.cell_volume / grid.n_total


def energy(grid: GridSpec, u: np.ndarray, eps: float) -> float:
    """Rescaled energy ``int |grad u|^2 / 2 + W(u) / eps^2``, the one the steppers dissipate."""
    return 0.5 * dirichlet_integral(grid, u) + float(W(u).sum()) * grid.cell_volume / eps ** 2


def energy_unscaled(grid: GridSpec, u: np.ndarray, eps: float) -> float:
    """``int eps |grad u|^2 / 2 + W(u) / eps``."""
    return eps * energy(grid, u, eps)


def mass(grid: GridSpec, u: np.ndarray) -> float:
    return float(u.sum()) * grid.cell_volume


def volume6G(grid: GridSpec, u: np.ndarray) -> float:
    """``int 6 G(u) dx`` with ``6 G(s) = 3 s^2 - 2 s^3``."""
    return float(np.sum(u * u * (3.0 - 2.0 * u))) * grid.cell_volume


def overshoot(u: np.ndarray) -> float:
    return max(-float(u.min()), float(u.max()) - 1.0, 0.0)


def profile_slice(grid: GridSpec, u: np.ndarray, axis: int, offsets: tuple[int, ...]):
    """1D restriction of ``u`` along ``axis`` through the grid indices ``offsets``.

    ``offsets`` lists the fixed indices of the other axes in order. Returns
    ``(coordinates, values)``.
    """
    if not 0 <= axis < grid.dim:
        raise IndexError(f"axis {axis} out of range for a {grid.dim}D grid")
    others = [i for i in range(grid.dim) if i != axis]
    if len(offsets) != len(others):
        raise IndexError(f"need {len(others)} offsets, got {len(offsets)}")
    index: list = [slice(None)] * grid.dim
    for i, o in zip(others, offsets):
        if not 0 <= o < grid.sizes[i]:
            raise IndexError(f"offset {o} out of range for axis {i} of size {grid.sizes[i]}")
        index[i] = o
    x = np.arange(grid.sizes[axis]) * grid.spacing[axis]
    return x, np.array(u[tuple(index)])


def interface_radius(grid: GridSpec, u: np.ndarray) -> float:
    """Radius of the disk (2D) or ball (3D) with the same second-order volume as ``u``."""
    v = volume6G(grid, u)
    if v < 0:
        raise ValueError(f"negative volume {v}")
    if grid.dim == 2:
        return math.sqrt(v / math.pi)
    return (3.0 * v / (4.0 * math.pi)) ** (1.0 / 3.0)


def label_components(u: np.ndarray, threshold: float = 0.5) -> tuple[np.ndarray, int]:
    """Label ``{u >= threshold}`` with face adjacency, gluing labels across periodic faces."""
    mask = u >= threshold
    labels, n = ndimage.label(mask)
    if n == 0:
        return labels, 0
    parent = np.arange(n + 1)

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for ax in range(u.ndim):
        a = np.take(labels, 0, axis=ax).ravel()
        b = np.take(labels, -1, axis=ax).ravel()
        both = (a > 0) & (b > 0)
        for i, j in set(zip(a[both].tolist(), b[both].tolist())):
            ri, rj = find(i), find(j)
            if ri != rj:
                parent[max(ri, rj)] = min(ri, rj)
    roots = np.array([find(i) for i in range(n + 1)])
    uniq, dense = np.unique(roots, return_inverse=True)
    # label 0 stays background since root(0) == 0 is the smallest root
    return dense.reshape(-1)[labels], len(uniq) - 1


def connected_components(u: np.ndarray, threshold: float = 0.5) -> int:
    return label_components(u, threshold)[1]


def component_volumes(grid: GridSpec, u: np.ndarray, threshold: float = 0.5) -> np.ndarray:
    """Cell-count volume of each component of ``{u >= threshold}``, sorted descending."""
    labels, n = label_components(u, threshold)
    counts = np.bincount(labels.ravel(), minlength=n + 1)[1:]
    return np.sort(counts * grid.cell_volume)[::-1]


# -- records ---------------------------------------------------------------

@dataclass(frozen=True)
class DiagRecord:
    step: int
    time: float
    energy: float
    mass: float
    volume: float
    u_min: float
    u_max: float
    overshoot: float

    def row(self) -> list[str]:
        out = []
        for name in CSV_COLUMNS:
            v = getattr(self, name)
            out.append(str(v) if isinstance(v, int) else f"{v:.17g}")
        return out

    def as_dict(self) -> dict:
        return asdict(self)


def record(grid: GridSpec, state: SimState, eps: float) -> DiagRecord:
    # a diverged state legitimately yields inf / nan entries
    with np.errstate(over="ignore", invalid="ignore"):
        return _record(grid, state, eps)


def _record(grid: GridSpec, state: SimState, eps: float) -> DiagRecord:
    u = state.u
    finite = bool(np.isfinite(u).all())
    return DiagRecord(
        step=state.step,
        time=state.time,
        energy=energy(grid, u, eps) if finite else math.nan,
        mass=mass(grid, u),
        volume=volume6G(grid, u),
        u_min=float(u.min()),
        u_max=float(u.max()),
        overshoot=overshoot(u) if finite else math.nan,
    )


# -- constants -------------------------------------------------------------

# mobilities written as functions of p = s (1 - s)
MOBILITIES = {
    "quartic": lambda p: p * p,
    "quadratic": lambda p: p,
}


class QuadratureError(RuntimeError):
    pass


@dataclass(frozen=True)
class Constants:
    mobility: str
    c_W: float
    c_M: float
    c_N: float
    velocity_factor: float
    c_M_printed: float  # int M(q) / (q (1 - q)) dz; inf when it diverges


def _quad(f, a, b, tol):
    val, err = integrate.quad(f, a, b, epsabs=tol * 1e-2, epsrel=tol * 1e-2, limit=400)
    if not np.isfinite(val) or err > tol:
        raise QuadratureError(f"quadrature did not converge (estimate {val}, error {err:.3g})")
    return val


def constants_oracle(mobility: str = "quartic", tolerance: float = 1e-10, cutoff: float = 40.0) -> Constants:
    """Profile constants by adaptive quadrature over ``[-cutoff, cutoff]``.

    ``c_M`` is ``int M(q(z)) dz``; ``N`` is ``1 / sqrt(M)``. The velocity factor is
    ``c_W c_M / c_N^2``.
    """
    if tolerance <= 0:
        raise ValueError("tolerance must be positive")
    M = MOBILITIES[mobility]

    def p(z):
        # q (1 - q) = -q' without the cancellation of 1 - q near q = 1
        return 0.25 / np.cosh(0.5 * z) ** 2

    c_W = _quad(lambda z: p(z) ** 2, -cutoff, cutoff, tolerance)
    c_M = _quad(lambda z: M(p(z)), -cutoff, cutoff, tolerance)
    c_N = _quad(lambda z: -p(z) * np.sqrt(M(p(z))), -cutoff, cutoff, tolerance)

    def printed(z):
        return M(p(z)) / p(z)

    short = _quad(printed, -cutoff, cutoff, tolerance)
    long = _quad(printed, -2 * cutoff, 2 * cutoff, tolerance)
    c_M_printed = short if abs(long - short) <= 10 * tolerance else math.inf
    return Constants(mobility, c_W, c_M, c_N, c_W * c_M / c_N ** 2, c_M_printed)


def order_estimate(value_coarse: float, value_fine: float, eps_coarse: float, eps_fine: float) -> float:
    """Observed convergence order ``log(v_c / v_f) / log(eps_c / eps_f)``."""
    if value_coarse <= 0 or value_fine <= 0:
        raise ValueError("order estimate needs positive values")
    if not eps_coarse > eps_fine > 0:
        raise ValueError("need eps_coarse > eps_fine > 0")
    return math.log(value_coarse / value_fine) / math.log(eps_coarse / eps_fine)
