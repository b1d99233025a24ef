"""PGHD1 binary snapshots: one ASCII header line, then raw float64 data.

Header ``PGHD1 nx ny nz Lx Ly h`` followed by nx*ny*nz little-endian doubles,
x varying fastest.
"""

from __future__ import annotations

import os
from typing import Optional

import numpy as np

from .fields import Grid, ScalarField3

MAGIC = "PGHD1"


class SnapshotError(ValueError):
    pass


class SnapshotDimensionError(SnapshotError):
    pass


def write_snapshot(field: ScalarField3, path: str | os.PathLike) -> None:
    g = field.grid
    header = f"{MAGIC} {g.nx} {g.ny} {g.nz} {float(g.Lx)!r} {float(g.Ly)!r} {float(g.h)!r}\n"
    data = np.asarray(field.values, dtype="<f8").ravel(order="F")
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(data.tobytes())


def read_snapshot(path: str | os.PathLike, grid: Optional[Grid] = None) -> ScalarField3:
    """Load a snapshot; if ``grid`` is given the header must agree with it."""
    with open(path, "rb") as fh:
        line = fh.readline(512)
        payload = fh.read()
    parts = line.decode("ascii", errors="replace").split()
    if not parts or parts[0] != MAGIC:
        raise SnapshotError(f"{path}: not a {MAGIC} snapshot")
    if len(parts) != 7 or not line.endswith(b"\n"):
        raise SnapshotError(f"{path}: malformed header")
    try:
        nx, ny, nz = (int(p) for p in parts[1:4])
        Lx, Ly, h = (float(p) for p in parts[4:7])
    except ValueError as exc:
        raise SnapshotError(f"{path}: malformed header") from exc
    expected = nx * ny * nz * 8
    if len(payload) != expected:
        raise SnapshotError(f"{path}: size mismatch, expected {expected} data bytes, found {len(payload)}")
    if grid is None:
        grid = Grid(nx, ny, nz, Lx, Ly, h)
    elif (nx, ny, nz) != grid.shape or not np.allclose((Lx, Ly, h), (grid.Lx, grid.Ly, grid.h)):
        raise SnapshotDimensionError(
            f"{path}: snapshot grid {nx}x{ny}x{nz} ({Lx}, {Ly}, {h}) does not match "
            f"{grid.nx}x{grid.ny}x{grid.nz} ({grid.Lx}, {grid.Ly}, {grid.h})"
        )
    vals = np.frombuffer(payload, dtype="<f8").reshape((nx, ny, nz), order="F")
    return ScalarField3(grid, np.array(vals, dtype=float))
