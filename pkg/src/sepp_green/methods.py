"""Ready-made forecasting methods for :func:`sepp_green.evaluate.backtest`."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .baselines import KdeConfig, PhmConfig, PhmKernel, kde_intensity
from .ddgf import DdgfConfig, fit_ddgf
from .em import EmConfig, em_fit, em_kernel
from .evaluate import KernelMethod
from .gridding import GridSpec
from .predict import PredictConfig


def ddgf_method(cfg: DdgfConfig = DdgfConfig(), predict: PredictConfig = PredictConfig()) -> KernelMethod:
    return KernelMethod("ddgf", lambda train, grid: fit_ddgf(train, grid, cfg), predict)


def em_method(cfg: EmConfig = EmConfig(), predict: PredictConfig = PredictConfig()) -> KernelMethod:
    def fit(train, grid: GridSpec):
        area = math.pi * grid.radius_km ** 2
        return em_kernel(em_fit(train, area, grid.nt * grid.dt, replace(cfg, dt=grid.dt, dx=grid.dx)))

    return KernelMethod("em", fit, predict)


def phm_method(cfg: PhmConfig = PhmConfig(), predict: PredictConfig = PredictConfig()) -> KernelMethod:
    return KernelMethod("phm", lambda train, grid: PhmKernel(replace(cfg, dx=grid.dx)), predict)


@dataclass
class KdeMethod:
    cfg: KdeConfig = KdeConfig()
    name: str = "kde"

    def forecast(self, train, grid, first_day, n_days, mode):
        return kde_intensity(train, grid, self.cfg, first_day + n_days - 1)


def build(name: str, *, r_cut: float | None = None, ddgf: DdgfConfig = DdgfConfig(), em: EmConfig = EmConfig(),
          phm: PhmConfig = PhmConfig(), kde: KdeConfig = KdeConfig(), negative: str = "clamp"):
    """Method by name with an optional shared spatial cutoff."""
    predict = PredictConfig(r_cut=r_cut, negative=negative)
    if name == "ddgf":
        return ddgf_method(ddgf, predict)
    if name == "em":
        return em_method(em, predict)
    if name == "phm":
        return phm_method(replace(phm, r_cut=r_cut if r_cut is not None else phm.r_cut), predict)
    if name == "kde":
        return KdeMethod(kde)
    raise ValueError(f"unknown method {name!r}; expected ddgf, em, phm or kde")
