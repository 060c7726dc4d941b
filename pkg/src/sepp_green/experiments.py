"""Synthetic-recovery and cost experiments shared by the scripts and the acceptance suite."""

from __future__ import annotations

import math
import time
import tracemalloc
from dataclasses import dataclass, field

import numpy as np

from .ddgf import DdgfConfig, fit_ddgf
from .em import EmConfig, em_fit, em_kernel, temporal_marginal
from .evaluate import BacktestReport, Protocol, backtest
from .gridding import GridSpec
from .hawkes_sim import SimSpec, simulate
from .ingest import EventCatalog
from .kernels import exponential_rate
from .methods import build


@dataclass(frozen=True)
class RecoverySetup:
    """Synthetic truth: about ``events_per_400d`` events per 400 days on the 5 km disc."""

    events_per_400d: float = 3000.0
    branching: float = 0.5
    omega: float = 0.5
    sigma: float = 0.3
    horizon: float = 440.0
    seed: int = 0
    training_days: int = 400

    def spec(self) -> SimSpec:
        mu = self.events_per_400d * (1 - self.branching) / (math.pi * 25.0 * 400.0)
        return SimSpec(mu=mu, branching=self.branching, omega=self.omega, sigma=self.sigma,
                       horizon=self.horizon, seed=self.seed)

    def catalog(self) -> EventCatalog:
        return simulate(self.spec())

    def true_g0(self, lags) -> np.ndarray:
        return self.spec().kernel(np.asarray(lags, dtype=float), 0.0)


def em_decay_rate(train: EventCatalog, cfg: EmConfig = EmConfig(), max_lag: float = 10.0,
                  area: float = math.pi * 25.0, horizon: float = 400.0) -> tuple[float, object]:
    """Decay rate fitted to the EM temporal histogram over lags up to ``max_lag``."""
    model = em_fit(train, area, horizon, cfg)
    lags, mass = temporal_marginal(em_kernel(model))
    return exponential_rate(lags, mass, max_lag), model


@dataclass
class DdgfShape:
    lags: np.ndarray
    g0: np.ndarray
    positive: bool
    decreasing: bool
    ratio: float
    true_ratio: float

    @property
    def ratio_ok(self) -> bool:
        return self.true_ratio / 2 <= self.ratio <= 2 * self.true_ratio


def ddgf_shape(train: EventCatalog, setup: RecoverySetup, cfg: DdgfConfig = DdgfConfig(),
               first: int = 1, last: int = 10, ratio_lags: tuple[int, int] = (1, 5)) -> DdgfShape:
    """g(t, 0) on lags ``first..last`` and its ratio at ``ratio_lags`` against the truth."""
    kernel = fit_ddgf(train, GridSpec.for_disc(nt=setup.training_days), cfg)
    lags, g0 = kernel.at_origin()
    sel = g0[first:last + 1]
    a, b = ratio_lags
    true = setup.true_g0([a, b])
    return DdgfShape(lags[first:last + 1], sel, bool(np.all(sel > 0)), bool(np.all(np.diff(sel) < 0)),
                     float(g0[a] / g0[b]), float(true[0] / true[1]))


def synthetic_backtest(catalog: EventCatalog, samples: int = 20, r_cut: float | None = 0.4,
                       methods=("ddgf", "em", "phm", "kde"), training_days: int = 400,
                       workers: int = 1) -> BacktestReport:
    protocol = Protocol(training_days=training_days, samples=samples, r_cut=r_cut)
    ms = {m: build(m, r_cut=r_cut) for m in methods}
    return backtest(catalog, ms, protocol, GridSpec.for_disc(nt=training_days), workers=workers)


@dataclass
class CostSample:
    n_events: int
    peak_bytes: int
    seconds: float
    extras: dict = field(default_factory=dict)


def _measure(fn) -> tuple[int, float, object]:
    tracemalloc.start()
    tracemalloc.reset_peak()
    t0 = time.perf_counter()
    try:
        out = fn()
        secs = time.perf_counter() - t0
        _, peak = tracemalloc.get_traced_memory()
    finally:
        tracemalloc.stop()
    return peak, secs, out


def cost_catalog(n_events: int, seed: int = 0, horizon: float = 400.0) -> EventCatalog:
    """Exactly ``n_events`` simulated events: over-simulate for edge losses, then thin at random."""
    cat = simulate(SimSpec.for_expected_count(1.15 * n_events, horizon=horizon, seed=seed))
    if len(cat) < n_events:
        raise RuntimeError(f"simulation gave {len(cat)} events, fewer than {n_events}")
    keep = np.sort(np.random.default_rng(seed).choice(len(cat), n_events, replace=False))
    mask = np.zeros(len(cat), dtype=bool)
    mask[keep] = True
    return cat.select(mask)


def ddgf_cost(catalog: EventCatalog, cfg: DdgfConfig = DdgfConfig(), nt: int = 400) -> CostSample:
    peak, secs, _ = _measure(lambda: fit_ddgf(catalog, GridSpec.for_disc(nt=nt), cfg))
    return CostSample(len(catalog), peak, secs)


def em_cost(catalog: EventCatalog, cfg: EmConfig = EmConfig(), horizon: float = 400.0) -> CostSample:
    peak, secs, model = _measure(lambda: em_fit(catalog, math.pi * 25.0, horizon, cfg))
    return CostSample(len(catalog), peak, secs, {"n_pairs": model.extras["n_pairs"]})


def loglog_slope(xs, ys) -> float:
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])
