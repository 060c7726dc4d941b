"""Space-time rasterisation of event catalogs into a density field."""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from typing import IO

import numpy as np

from .ingest import EventCatalog


@dataclass(frozen=True)
class GridSpec:
    """Regular mesh: ``nx`` x ``ny`` square cells of edge ``dx`` km, ``nt`` steps of ``dt`` days.

    ``origin`` is the (x, y) km of the lower-left corner of cell (0, 0).
    ``radius_km`` marks the study disc; cells whose centre lies inside it are
    eligible for scoring.
    """

    dx: float = 0.25
    dt: float = 1.0
    nx: int = 40
    ny: int = 40
    nt: int = 400
    origin: tuple[float, float] = (-5.0, -5.0)
    radius_km: float = 5.0

    def __post_init__(self):
        if not (self.dx > 0 and self.dt > 0):
            raise ValueError("dx and dt must be positive")
        if self.nx < 1 or self.ny < 1 or self.nt < 0:
            raise ValueError("grid must have at least one spatial cell")

    @classmethod
    def for_disc(cls, radius_km: float = 5.0, dx: float = 0.25, dt: float = 1.0, nt: int = 400) -> "GridSpec":
        """Square grid centred on the origin, just covering a disc."""
        n = math.ceil(2 * radius_km / dx - 1e-9)
        half = n * dx / 2
        return cls(dx=dx, dt=dt, nx=n, ny=n, nt=nt, origin=(-half, -half), radius_km=radius_km)

    def with_nt(self, nt: int) -> "GridSpec":
        return GridSpec(self.dx, self.dt, self.nx, self.ny, nt, self.origin, self.radius_km)

    @property
    def cell_area(self) -> float:
        return self.dx * self.dx

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.nt, self.ny, self.nx)

    def centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Cell-centre coordinates as two (ny, nx) arrays."""
        xc = self.origin[0] + (np.arange(self.nx) + 0.5) * self.dx
        yc = self.origin[1] + (np.arange(self.ny) + 0.5) * self.dx
        return np.meshgrid(xc, yc)

    def eligible_mask(self) -> np.ndarray:
        X, Y = self.centers()
        return np.hypot(X, Y) <= self.radius_km

    @property
    def n_eligible(self) -> int:
        return int(self.eligible_mask().sum())


def cell_of(x, y, spec: GridSpec):
    """Cell indices ``(i, j)`` by floor binning, or ``None`` outside the grid.

    Accepts scalars; for arrays use :func:`cells_of`.
    """
    i, j, ok = cells_of(np.asarray([x], dtype=float), np.asarray([y], dtype=float), spec)
    if not ok[0]:
        return None
    return int(i[0]), int(j[0])


def cells_of(x: np.ndarray, y: np.ndarray, spec: GridSpec):
    """Vectorised :func:`cell_of`; returns ``(i, j, inside)``."""
    fi = np.floor((np.asarray(x, dtype=float) - spec.origin[0]) / spec.dx)
    fj = np.floor((np.asarray(y, dtype=float) - spec.origin[1]) / spec.dx)
    inside = (fi >= 0) & (fi < spec.nx) & (fj >= 0) & (fj < spec.ny)
    i = np.where(inside, fi, 0).astype(np.int64)
    j = np.where(inside, fj, 0).astype(np.int64)
    return i, j, inside


@dataclass(frozen=True, eq=False)
class DensityField:
    """Event density in events/(km^2 day) on an (nt, ny, nx) mesh.

    ``event_cells`` keeps, per rasterised event, its (n, j, i) indices; the
    Green's-function estimator needs the individual events of each slice.
    """

    values: np.ndarray
    spec: GridSpec
    event_cells: np.ndarray = field(default_factory=lambda: np.empty((0, 3), dtype=np.int64))
    n_outside: int = 0

    @property
    def n_events(self) -> int:
        return len(self.event_cells)

    def total_events(self) -> float:
        return float(self.values.sum() * self.spec.cell_area * self.spec.dt)

    def to_csv(self, fh: IO[str]) -> None:
        fh.write("n,j,i,value\n")
        for n, j, i in zip(*np.nonzero(self.values)):
            fh.write(f"{n},{j},{i},{self.values[n, j, i]!r}\n")

    def dump(self, fh: IO[bytes]) -> None:
        """Binary dump: three little-endian int64 dims then float64 row-major values."""
        fh.write(struct.pack("<3q", *self.values.shape))
        fh.write(np.ascontiguousarray(self.values, dtype="<f8").tobytes())

    @staticmethod
    def load_values(fh: IO[bytes]) -> np.ndarray:
        nt, ny, nx = struct.unpack("<3q", fh.read(24))
        return np.frombuffer(fh.read(8 * nt * ny * nx), dtype="<f8").reshape(nt, ny, nx).copy()


def rasterize(catalog: EventCatalog, spec: GridSpec) -> DensityField:
    """Bin events into cells and day slices, scaled by 1/(dx^2 dt).

    Events outside the mesh (in space or time) are counted in ``n_outside``
    and otherwise ignored.
    """
    i, j, inside = cells_of(catalog.x, catalog.y, spec)
    n = np.floor(np.asarray(catalog.t, dtype=float) / spec.dt)
    inside &= (n >= 0) & (n < spec.nt)
    n = n.astype(np.int64)
    counts = np.zeros(spec.shape, dtype=float)
    np.add.at(counts, (n[inside], j[inside], i[inside]), 1.0)
    values = counts / (spec.cell_area * spec.dt)
    values.setflags(write=False)
    cells = np.stack([n[inside], j[inside], i[inside]], axis=1) if inside.any() else np.empty((0, 3), dtype=np.int64)
    return DensityField(values, spec, cells, int((~inside).sum()))
