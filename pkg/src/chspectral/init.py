"""Initial phase fields built from signed distance functions.

Sign convention: the distance is negative inside the set, so ``u = q(d/eps)`` is
close to 1 inside and the interface is ``{u = 1/2}``. Distances use the
minimum-image convention of the periodic box.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .models import profile_q
from .spectral import GridSpec

Coords = Sequence[np.ndarray]


def _wrap(delta: np.ndarray, length: float | None) -> np.ndarray:
    if length is None:
        return delta
    return delta - length * np.round(delta / length)


def _lengths(lengths, dim):
    return tuple(lengths) if lengths is not None else (None,) * dim


@dataclass(frozen=True)
class Ball:
    center: tuple[float, ...]
    radius: float

    def distance(self, x: Coords, lengths=None) -> np.ndarray:
        L = _lengths(lengths, len(x))
        r2 = sum(_wrap(xi - c, Li) ** 2 for xi, c, Li in zip(x, self.center, L))
        return np.sqrt(r2) - self.radius


@dataclass(frozen=True)
class BallUnion:
    balls: tuple[Ball, ...]

    def distance(self, x: Coords, lengths=None) -> np.ndarray:
        return np.minimum.reduce([b.distance(x, lengths) for b in self.balls])

    def min_gap(self, lengths=None) -> float:
        gaps = []
        for i, a in enumerate(self.balls):
            for b in self.balls[i + 1:]:
                d = a.distance([np.asarray(c) for c in b.center], lengths)
                gaps.append(float(d) - b.radius)
        return min(gaps) if gaps else np.inf


@dataclass(frozen=True)
class Blob:
    """Smooth union of overlapping balls (polynomial smooth minimum of width ``smoothing``)."""

    balls: tuple[Ball, ...]
    smoothing: float = 0.05

    def distance(self, x: Coords, lengths=None) -> np.ndarray:
        d = self.balls[0].distance(x, lengths)
        k = self.smoothing
        for b in self.balls[1:]:
            e = b.distance(x, lengths)
            h = np.clip(0.5 + 0.5 * (e - d) / k, 0.0, 1.0)
            d = e * (1 - h) + d * h - k * h * (1 - h)
        return d


@dataclass(frozen=True)
class Tube:
    """Capsule: all points within ``radius`` of the segment ``start``--``end``."""

    start: tuple[float, ...]
    end: tuple[float, ...]
    radius: float

    def distance(self, x: Coords, lengths=None) -> np.ndarray:
        L = _lengths(lengths, len(x))
        a = np.asarray(self.start, float)
        b = np.asarray(self.end, float)
        mid = 0.5 * (a + b)
        ab = b - a
        # positions relative to the segment midpoint, wrapped once
        rel = [_wrap(xi - c, Li) for xi, c, Li in zip(x, mid, L)]
        denom = float(ab @ ab)
        t = sum(r * v for r, v in zip(rel, ab)) / denom if denom > 0 else 0.0
        t = np.clip(t, -0.5, 0.5)
        r2 = sum((r - t * v) ** 2 for r, v in zip(rel, ab))
        return np.sqrt(r2) - self.radius


@dataclass(frozen=True)
class Plate:
    """Box of half-thickness ``half_thickness`` along ``normal_axis``.

    ``half_extents`` bounds the other axes (``None`` entries mean unbounded).
    """

    center: tuple[float, ...]
    half_thickness: float
    normal_axis: int = 0
    half_extents: tuple[float | None, ...] | None = None

    def distance(self, x: Coords, lengths=None) -> np.ndarray:
        L = _lengths(lengths, len(x))
        ext = list(self.half_extents) if self.half_extents is not None else [None] * len(x)
        if len(ext) == len(x) - 1:
            ext.insert(self.normal_axis, self.half_thickness)
        else:
            ext[self.normal_axis] = self.half_thickness
        q = []
        for xi, c, Li, e in zip(x, self.center, L, ext):
            if e is None:
                continue
            q.append(np.abs(_wrap(xi - c, Li)) - e)
        q = np.broadcast_arrays(*q)
        outside = np.sqrt(sum(np.maximum(qi, 0.0) ** 2 for qi in q))
        inside = np.minimum(np.maximum.reduce(q), 0.0)
        return outside + inside


@dataclass(frozen=True)
class Noise:
    amplitude: float = 1.0
    seed: int = 0


Shape = Union[Ball, BallUnion, Blob, Tube, Plate, Noise]


def signed_distance(shape: Shape, x, lengths=None) -> np.ndarray:
    """Signed distance at a point (sequence of floats) or on broadcastable coordinate arrays."""
    if isinstance(shape, Noise):
        raise TypeError("noise has no signed distance")
    coords = [np.asarray(c, dtype=float) for c in x]
    d = shape.distance(coords, lengths)
    return float(d) if np.ndim(d) == 0 else d


def noise_field(grid: GridSpec, amplitude: float, seed: int) -> np.ndarray:
    """I.i.d. uniform samples in ``[1/2 - a/2, 1/2 + a/2]``."""
    if not 0 <= amplitude <= 1:
        raise ValueError(f"noise amplitude must lie in [0, 1], got {amplitude}")
    rng = np.random.default_rng(seed)
    return 0.5 + amplitude * (rng.random(grid.sizes) - 0.5)


def phase_from_shape(shape: Shape, grid: GridSpec, eps: float) -> np.ndarray:
    if isinstance(shape, Noise):
        return noise_field(grid, shape.amplitude, shape.seed)
    if eps < 1.5 * max(grid.spacing):
        warnings.warn(
            f"eps={eps:.4g} is under-resolved (< 1.5 x grid spacing {max(grid.spacing):.4g})",
            stacklevel=2,
        )
    d = shape.distance(grid.coords(), grid.lengths)
    d = np.broadcast_to(d, grid.sizes)
    return np.ascontiguousarray(profile_q(d / eps))
