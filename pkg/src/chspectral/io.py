"""Snapshot, image and CSV writers.

Snapshot layout (all little-endian)::

    b"CHF1" | u32 version | u32 dim | u64 sizes[dim] | f64 lengths[dim]
    | f64 eps | f64 time | f64 u[prod(sizes)] | f64 mu[prod(sizes)]

Samples are stored in row-major order.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .diagnostics import CSV_COLUMNS, DiagRecord
from .spectral import GridSpec

MAGIC = b"CHF1"
VERSION = 1


class SnapshotError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Snapshot:
    grid: GridSpec
    eps: float
    time: float
    u: np.ndarray
    mu: np.ndarray


def write_snapshot(path, grid: GridSpec, eps: float, time: float, u: np.ndarray, mu: np.ndarray) -> None:
    head = MAGIC + struct.pack("<II", VERSION, grid.dim)
    head += struct.pack(f"<{grid.dim}Q", *grid.sizes)
    head += struct.pack(f"<{grid.dim}d", *grid.lengths)
    head += struct.pack("<dd", eps, time)
    with open(path, "wb") as fh:
        fh.write(head)
        fh.write(np.ascontiguousarray(u, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(mu, dtype="<f8").tobytes())


def read_snapshot(path) -> Snapshot:
    data = Path(path).read_bytes()
    if data[:4] != MAGIC:
        raise SnapshotError(f"{path}: not a CHF1 snapshot")
    version, dim = struct.unpack_from("<II", data, 4)
    if version != VERSION:
        raise SnapshotError(f"{path}: unsupported snapshot version {version}")
    off = 12
    sizes = struct.unpack_from(f"<{dim}Q", data, off)
    off += 8 * dim
    lengths = struct.unpack_from(f"<{dim}d", data, off)
    off += 8 * dim
    eps, time = struct.unpack_from("<dd", data, off)
    off += 16
    n = int(np.prod(sizes))
    if len(data) != off + 16 * n:
        raise SnapshotError(f"{path}: expected {off + 16 * n} bytes, found {len(data)}")
    u = np.frombuffer(data, dtype="<f8", count=n, offset=off).reshape(sizes).astype(float)
    mu = np.frombuffer(data, dtype="<f8", count=n, offset=off + 8 * n).reshape(sizes).astype(float)
    return Snapshot(GridSpec(tuple(sizes), tuple(lengths)), eps, time, u, mu)


def write_pgm(path, image: np.ndarray) -> None:
    """Binary 8-bit graymap of a 2D array; values are clamped to [0, 1].

    Array axis 0 runs left to right and axis 1 bottom to top.
    """
    img = np.flipud(np.clip(image, 0.0, 1.0).T)
    pix = np.round(img * 255.0).astype(np.uint8)
    h, w = pix.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(pix.tobytes())


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    parts = data.split(maxsplit=4)
    if parts[0] != b"P5":
        raise ValueError(f"{path}: not a binary PGM")
    w, h = int(parts[1]), int(parts[2])
    return np.frombuffer(parts[4][: w * h], dtype=np.uint8).reshape(h, w)


def mid_slices(u: np.ndarray, axes=(2,)) -> dict[int, np.ndarray]:
    """Mid-plane slice normal to each axis in ``axes``."""
    return {a: np.take(u, u.shape[a] // 2, axis=a) for a in axes}


class CsvLog:
    """Diagnostics CSV with a mandatory header and 17 significant digits."""

    def __init__(self, path):
        self.path = Path(path)
        self._fh = open(self.path, "w", newline="")
        self._writer = csv.writer(self._fh, lineterminator="\n")
        self._writer.writerow(CSV_COLUMNS)

    def write(self, rec: DiagRecord) -> None:
        self._writer.writerow(rec.row())
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [{k: (int(v) if k == "step" else float(v)) for k, v in r.items()} for r in rows]
