"""Conditional intensity maps from a trigger kernel and an event history."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import IO, Protocol

import numpy as np

from .gridding import GridSpec
from .ingest import EventCatalog

CLAMP = "clamp"
KEEP = "keep"


class Kernel(Protocol):
    dx: float
    max_lag: float
    max_r: float
    method: str

    def evaluate(self, lag, r) -> np.ndarray: ...


@dataclass(frozen=True)
class PredictConfig:
    """``lambda0`` stays 0: only the triggered part of the intensity is modelled."""

    r_cut: float | None = None
    t_cut: float | None = None
    negative: str = CLAMP
    lambda0: float = 0.0

    def __post_init__(self):
        if self.negative not in (CLAMP, KEEP):
            raise ValueError(f"negative policy must be 'clamp' or 'keep', got {self.negative!r}")
        if self.lambda0 != 0.0:
            raise ValueError("background lambda0 is fixed at 0")


@dataclass(frozen=True, eq=False)
class IntensityMap:
    values: np.ndarray  # (ny, nx)
    spec: GridSpec
    target_day: int | None = None
    method: str = ""
    eligible: np.ndarray = field(default=None)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.spec.ny, self.spec.nx):
            raise ValueError(f"map shape {v.shape} does not match grid")
        if not np.all(np.isfinite(v)):
            raise ValueError("intensity map has non-finite values")
        object.__setattr__(self, "values", v)
        if self.eligible is None:
            object.__setattr__(self, "eligible", self.spec.eligible_mask())

    def ranking(self) -> np.ndarray:
        """Flat indices of eligible cells, highest value first, ties by index."""
        flat = self.values.ravel()
        idx = np.nonzero(self.eligible.ravel())[0]
        order = np.lexsort((idx, -flat[idx]))
        return idx[order]

    def to_csv(self, fh: IO[str]) -> None:
        X, Y = self.spec.centers()
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["j", "i", "x_km", "y_km", "value"])
        for j in range(self.spec.ny):
            for i in range(self.spec.nx):
                w.writerow([j, i, repr(float(X[j, i])), repr(float(Y[j, i])), repr(float(self.values[j, i]))])

    def rank_csv(self, fh: IO[str]) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rank", "j", "i", "value"])
        for rank, flat in enumerate(self.ranking()):
            j, i = divmod(int(flat), self.spec.nx)
            w.writerow([rank + 1, j, i, repr(float(self.values[j, i]))])


def _check_dx(kernel, spec: GridSpec) -> None:
    if not math.isclose(kernel.dx, spec.dx, rel_tol=1e-9):
        raise ValueError(f"kernel dx={kernel.dx} does not match grid dx={spec.dx}")


def intensity_map(kernel: Kernel, history: EventCatalog, target_day: int, spec: GridSpec,
                  cfg: PredictConfig = PredictConfig()) -> IntensityMap:
    """``lambda(target_day, x) = sum_i g(lag_i, |x - x_i|)`` on eligible cell centres.

    Lags are whole-day differences between the target day and each event's
    day; distances run from cell centres to exact event positions. Events
    past the kernel's lag range, ``cfg.t_cut`` or ``cfg.r_cut`` contribute
    nothing.
    """
    _check_dx(kernel, spec)
    days = history.day_index(spec.dt)
    if np.any(days >= target_day):
        raise ValueError("history must end before the target day")
    lag = (target_day - days) * spec.dt
    t_lim = min(kernel.max_lag, cfg.t_cut if cfg.t_cut is not None else math.inf)
    r_lim = min(kernel.max_r, cfg.r_cut if cfg.r_cut is not None else math.inf)
    use = lag <= t_lim
    ev_lag, ex, ey = lag[use], history.x[use], history.y[use]

    X, Y = spec.centers()
    elig = spec.eligible_mask()
    xc, yc = X[elig], Y[elig]
    acc = np.zeros(xc.size)
    for start in range(0, len(ev_lag), 256):
        sl = slice(start, start + 256)
        d = np.hypot(xc[:, None] - ex[None, sl], yc[:, None] - ey[None, sl])
        near = d <= r_lim
        if not near.any():
            continue
        rows, cols = np.nonzero(near)
        vals = kernel.evaluate(ev_lag[sl][cols], d[rows, cols])
        if cfg.negative == CLAMP:
            vals = np.maximum(vals, 0.0)
        # fixed-order accumulation per cell
        acc += np.bincount(rows, weights=vals, minlength=xc.size)
    values = np.zeros((spec.ny, spec.nx))
    values[elig] = acc
    return IntensityMap(values, spec, target_day, getattr(kernel, "method", ""), elig)


SINGLE = "single"
AGGREGATE = "aggregate"


def multi_day_map(kernel: Kernel, history: EventCatalog, first_day: int, n_days: int, spec: GridSpec,
                  cfg: PredictConfig = PredictConfig(), mode: str = SINGLE) -> IntensityMap:
    """Forecast ``n_days`` ahead from a frozen history.

    ``mode="single"`` returns the map for day ``first_day + n_days - 1``;
    ``"aggregate"`` sums the maps of all ``n_days`` days.
    """
    if n_days < 1:
        raise ValueError("n_days must be >= 1")
    if mode == SINGLE:
        return intensity_map(kernel, history, first_day + n_days - 1, spec, cfg)
    if mode != AGGREGATE:
        raise ValueError(f"unknown multi-day mode {mode!r}")
    maps = [intensity_map(kernel, history, first_day + d, spec, cfg) for d in range(n_days)]
    total = np.sum([m.values for m in maps], axis=0)
    return IntensityMap(total, spec, first_day + n_days - 1, maps[0].method, maps[0].eligible)
