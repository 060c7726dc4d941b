"""Non-parametric EM estimation of a histogram trigger kernel.

Model: ``lambda(t, x) = mu + sum_{t_i < t} g(t - t_i, |x - x_i|)`` with
uniform background ``mu`` and ``g`` piecewise constant on (lag, annulus)
bins of widths ``dt`` and ``dx``. Each iteration assigns every event a
probability of being background or triggered by each earlier event within
the kernel support (E step), then re-estimates ``mu`` and the histogram
(M step). The compensator counts every event's full kernel mass, which makes
the M step an exact maximiser and the likelihood trace monotone.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .ingest import EventCatalog
from .kernels import HISTOGRAM, TriggerKernel


@dataclass(frozen=True)
class EmConfig:
    iterations: int = 50
    dt: float = 1.0
    t_max: float = 100.0
    dx: float = 0.25
    r_max: float = 2.0
    omega0: float = 0.5

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.t_max <= 0 or self.r_max <= 0 or self.dt <= 0 or self.dx <= 0:
            raise ValueError("t_max, r_max, dt and dx must be positive")
        if self.omega0 <= 0:
            raise ValueError("omega0 must be positive")

    @property
    def n_t(self) -> int:
        return int(math.ceil(self.t_max / self.dt - 1e-9))

    @property
    def n_r(self) -> int:
        return int(math.ceil(self.r_max / self.dx - 1e-9))

    def bin_volumes(self) -> np.ndarray:
        """dt x annulus area, shape (n_t, n_r)."""
        edges = np.arange(self.n_r + 1) * self.dx
        area = np.pi * np.diff(edges ** 2)
        return np.broadcast_to(self.dt * area, (self.n_t, self.n_r)).copy()


@dataclass(frozen=True, eq=False)
class Pairs:
    """Candidate (parent, child) pairs inside the kernel support."""

    parent: np.ndarray
    child: np.ndarray
    lag: np.ndarray
    dist: np.ndarray
    bin: np.ndarray  # flat index into the (n_t, n_r) histogram

    def __len__(self):
        return len(self.parent)

    @property
    def nbytes(self) -> int:
        return sum(a.nbytes for a in (self.parent, self.child, self.lag, self.dist, self.bin))


def candidate_pairs(t, x, y, cfg: EmConfig, block: int = 2048) -> Pairs:
    """All ``i`` before ``j`` with ``0 < t_j - t_i < t_max`` and distance ``< r_max``.

    ``t`` must be sorted. Candidates are generated in blocks of parents so the
    working set stays bounded; the result is the full pair list, O(N^2) in
    the event density.
    """
    t = np.asarray(t, dtype=float)
    n = len(t)
    hi = np.searchsorted(t, t + cfg.t_max, side="left")
    out = {k: [] for k in ("parent", "child", "lag", "dist", "bin")}
    for start in range(0, n, block):
        idx = np.arange(start, min(start + block, n))
        cnt = hi[idx] - idx - 1
        cnt = np.maximum(cnt, 0)
        if cnt.sum() == 0:
            continue
        par = np.repeat(idx, cnt)
        first = np.repeat(idx + 1 - np.concatenate([[0], np.cumsum(cnt)[:-1]]), cnt)
        chi = first + np.arange(len(par))
        lag = t[chi] - t[par]
        d = np.hypot(x[chi] - x[par], y[chi] - y[par])
        ok = (lag > 0) & (lag < cfg.t_max) & (d < cfg.r_max)
        par, chi, lag, d = par[ok], chi[ok], lag[ok], d[ok]
        bt = np.minimum((lag / cfg.dt).astype(np.int64), cfg.n_t - 1)
        br = np.minimum((d / cfg.dx).astype(np.int64), cfg.n_r - 1)
        out["parent"].append(par.astype(np.int32))
        out["child"].append(chi.astype(np.int32))
        out["lag"].append(lag)
        out["dist"].append(d)
        out["bin"].append((bt * cfg.n_r + br).astype(np.int32))
    if not out["parent"]:
        return Pairs(np.empty(0, np.int32), np.empty(0, np.int32), np.empty(0), np.empty(0), np.empty(0, np.int32))
    return Pairs(*(np.concatenate(out[k]) for k in ("parent", "child", "lag", "dist", "bin")))


@dataclass(frozen=True, eq=False)
class EmModel:
    hist: np.ndarray  # (n_t, n_r), 1/(day km^2)
    mu: float
    loglik: np.ndarray
    cfg: EmConfig
    n_events: int
    branching_mass: float
    extras: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps({"mu": self.mu, "loglik": self.loglik.tolist(), "n_events": self.n_events,
                           "branching_mass": self.branching_mass,
                           "config": {k: getattr(self.cfg, k) for k in self.cfg.__dataclass_fields__}},
                          indent=2)


def initial_pair_weights(pairs: Pairs, cfg: EmConfig) -> np.ndarray:
    """Exponential-in-time, uniform-in-space starting kernel with unit integral."""
    return cfg.omega0 * np.exp(-cfg.omega0 * pairs.lag) / (np.pi * cfg.r_max ** 2)


def e_step(g_pair: np.ndarray, mu: float, pairs: Pairs, n: int):
    """Responsibilities ``(p_pair, p_background, lam)`` for every event."""
    lam = mu + np.bincount(pairs.child, weights=g_pair, minlength=n)
    if np.any(lam <= 0):
        raise ArithmeticError("zero conditional intensity in E step")
    return g_pair / lam[pairs.child], mu / lam, lam


def m_step(p_pair: np.ndarray, p_bg: np.ndarray, pairs: Pairs, cfg: EmConfig, n: int, area: float, horizon: float):
    mu = float(p_bg.sum()) / (area * horizon)
    mass = np.bincount(pairs.bin, weights=p_pair, minlength=cfg.n_t * cfg.n_r).reshape(cfg.n_t, cfg.n_r)
    return mass / (n * cfg.bin_volumes()), mu


def log_likelihood(lam: np.ndarray, hist: np.ndarray, mu: float, cfg: EmConfig, n: int,
                   area: float, horizon: float) -> float:
    """``sum log lambda_j - mu S T - N sum_b g_b V_b``."""
    return float(np.log(lam).sum() - mu * area * horizon - n * (hist * cfg.bin_volumes()).sum())


def em_fit(catalog: EventCatalog, area: float, horizon: float, cfg: EmConfig = EmConfig(),
           pairs: Pairs | None = None) -> EmModel:
    """Run exactly ``cfg.iterations`` E/M passes from the exponential guess.

    ``area`` (km^2) and ``horizon`` (days) define the exposure of the
    uniform background.
    """
    n = len(catalog)
    if n == 0:
        raise ValueError("cannot fit EM to an empty catalog")
    if horizon <= 0 or area <= 0:
        raise ValueError("area and horizon must be positive")
    if pairs is None:
        pairs = candidate_pairs(catalog.t, catalog.x, catalog.y, cfg)

    mu = n / (2 * area * horizon)
    g_pair = initial_pair_weights(pairs, cfg)
    hist = np.zeros((cfg.n_t, cfg.n_r))
    trace = []
    for _ in range(cfg.iterations):
        p_pair, p_bg, _ = e_step(g_pair, mu, pairs, n)
        hist, mu = m_step(p_pair, p_bg, pairs, cfg, n, area, horizon)
        g_pair = hist.ravel()[pairs.bin]
        lam = mu + np.bincount(pairs.child, weights=g_pair, minlength=n)
        trace.append(log_likelihood(lam, hist, mu, cfg, n, area, horizon))
    mass = float((hist * cfg.bin_volumes()).sum())
    return EmModel(hist, mu, np.array(trace), cfg, n, mass, {"n_pairs": len(pairs), "pair_bytes": pairs.nbytes})


def em_kernel(model: EmModel) -> TriggerKernel:
    """Histogram kernel on left bin edges, piecewise-constant lookups."""
    cfg = model.cfg
    return TriggerKernel(model.hist.copy(), np.arange(cfg.n_t) * cfg.dt, np.arange(cfg.n_r) * cfg.dx,
                         cfg.dt, cfg.dx, interpolation=HISTOGRAM, method="em",
                         extras={"mu": model.mu})


def temporal_marginal(kernel: TriggerKernel) -> tuple[np.ndarray, np.ndarray]:
    """Mass per lag bin of a histogram kernel, integrated over annuli."""
    edges = np.append(kernel.r, kernel.r[-1] + kernel.dx)
    area = np.pi * np.diff(edges ** 2)
    return kernel.lags.copy(), (kernel.g * area).sum(axis=1) * kernel.dt
