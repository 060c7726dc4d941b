"""Comparator methods: the prospective-hotspot (PHM) kernel and a KDE map."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .gridding import GridSpec
from .ingest import EventCatalog

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PhmConfig:
    tau: float = 7.0
    dx: float = 0.25
    t_cut: float | None = 60.0
    r_cut: float | None = None

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError("tau must be positive")


def phm_weight(t, r, cfg: PhmConfig = PhmConfig()):
    """``1 / ((1 + t/tau)(1 + 2r/dx))``, zero past ``t_cut`` or ``r_cut``."""
    t = np.asarray(t, dtype=float)
    r = np.asarray(r, dtype=float)
    w = 1.0 / ((1.0 + t / cfg.tau) * (1.0 + 2.0 * r / cfg.dx))
    if cfg.t_cut is not None:
        w = np.where(t > cfg.t_cut, 0.0, w)
    if cfg.r_cut is not None:
        w = np.where(r > cfg.r_cut, 0.0, w)
    return float(w) if w.ndim == 0 else w


@dataclass(frozen=True)
class PhmKernel:
    """PHM weights behind the same ``evaluate`` interface as a tabulated kernel."""

    cfg: PhmConfig = PhmConfig()
    method: str = "phm"

    @property
    def dx(self) -> float:
        return self.cfg.dx

    @property
    def max_lag(self) -> float:
        return math.inf if self.cfg.t_cut is None else self.cfg.t_cut

    @property
    def max_r(self) -> float:
        return math.inf if self.cfg.r_cut is None else self.cfg.r_cut

    def evaluate(self, lag, r):
        return np.asarray(phm_weight(lag, r, self.cfg))


@dataclass(frozen=True)
class KdeConfig:
    bandwidth: float = 0.35

    def __post_init__(self):
        if self.bandwidth <= 0:
            raise ValueError("bandwidth must be positive")


def bell(r, bandwidth: float):
    """Isotropic 2-D Gaussian density with unit integral, 1/km^2."""
    r = np.asarray(r, dtype=float)
    return np.exp(-r ** 2 / (2 * bandwidth ** 2)) / (2 * math.pi * bandwidth ** 2)


@dataclass(frozen=True)
class KdeKernel:
    """Time-independent bell: summing it over history gives the KDE map."""

    cfg: KdeConfig = KdeConfig()
    dx: float = 0.25
    method: str = "kde"
    max_lag: float = math.inf

    @property
    def max_r(self) -> float:
        return 8 * self.cfg.bandwidth

    def evaluate(self, lag, r):
        lag, r = np.broadcast_arrays(np.asarray(lag, dtype=float), np.asarray(r, dtype=float))
        return np.where(r <= self.max_r, bell(r, self.cfg.bandwidth), 0.0)


def kde_intensity(catalog: EventCatalog, spec: GridSpec, cfg: KdeConfig = KdeConfig(), target_day: int | None = None):
    """Per-cell sum of bell kernels at every training event, time-independent."""
    from .predict import IntensityMap

    X, Y = spec.centers()
    values = np.zeros((spec.ny, spec.nx))
    if len(catalog) == 0:
        log.warning("KDE on an empty catalog: returning a zero map")
    else:
        xc, yc = X.ravel(), Y.ravel()
        acc = np.zeros(xc.size)
        for start in range(0, len(catalog), 512):
            ex = catalog.x[start:start + 512]
            ey = catalog.y[start:start + 512]
            d = np.hypot(xc[:, None] - ex[None, :], yc[:, None] - ey[None, :])
            acc += bell(d, cfg.bandwidth).sum(axis=1)
        values = acc.reshape(spec.ny, spec.nx)
    return IntensityMap(values, spec, target_day, "kde")
