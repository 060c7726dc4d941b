"""Spatio-temporal Hawkes simulation by cluster (branching) construction.

Background events form a homogeneous Poisson process on a disc; every event
spawns Poisson(``branching``) children with exponential time lags and
isotropic Gaussian displacements. Children falling outside the disc or the
horizon are dropped.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from datetime import date

import numpy as np

from .ingest import CHICAGO_CENTER, EventCatalog

RNG_ALGORITHM = "numpy.random.Generator(PCG64)"
MAX_GENERATIONS = 100


class SupercriticalError(ValueError):
    pass


@dataclass(frozen=True)
class SimSpec:
    mu: float = 0.0477
    branching: float = 0.5
    omega: float = 0.5
    sigma: float = 0.3
    radius_km: float = 5.0
    horizon: float = 400.0
    seed: int = 0
    epoch: date = date(2010, 5, 5)

    def __post_init__(self):
        if not 0 <= self.branching < 1:
            raise SupercriticalError(f"branching ratio must lie in [0, 1), got {self.branching}")
        if self.sigma <= 0 or self.omega <= 0:
            raise ValueError("sigma and omega must be positive")
        if self.mu < 0 or self.horizon <= 0 or self.radius_km <= 0:
            raise ValueError("mu must be >= 0; horizon and radius positive")

    @property
    def expected_background(self) -> float:
        return self.mu * math.pi * self.radius_km ** 2 * self.horizon

    def temporal_kernel(self, t):
        """True triggering kernel in time, ``n w exp(-w t)``."""
        t = np.asarray(t, dtype=float)
        return np.where(t >= 0, self.branching * self.omega * np.exp(-self.omega * t), 0.0)

    def kernel(self, t, r):
        """True g(t, r) in 1/(day km^2)."""
        r = np.asarray(r, dtype=float)
        space = np.exp(-r ** 2 / (2 * self.sigma ** 2)) / (2 * math.pi * self.sigma ** 2)
        return self.temporal_kernel(t) * space

    def sidecar(self) -> dict:
        d = asdict(self)
        d["epoch"] = self.epoch.isoformat()
        d["rng"] = RNG_ALGORITHM
        return d

    @classmethod
    def for_expected_count(cls, n_events: float, **kwargs) -> "SimSpec":
        """Pick ``mu`` so the expected total (ignoring edge losses) is ``n_events``."""
        probe = cls(mu=1.0, **kwargs)
        mu = n_events * (1 - probe.branching) / (math.pi * probe.radius_km ** 2 * probe.horizon)
        return cls(mu=mu, **kwargs)


@dataclass(frozen=True, eq=False)
class SimTree:
    """Simulated events with their genealogy; ``parent == -1`` marks background."""

    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    parent: np.ndarray
    generation: np.ndarray
    spec: SimSpec

    def offspring_lags(self) -> np.ndarray:
        kids = self.parent >= 0
        return self.t[kids] - self.t[self.parent[kids]]


def _uniform_disc(rng, n, radius):
    r = radius * np.sqrt(rng.random(n))
    th = 2 * math.pi * rng.random(n)
    return r * np.cos(th), r * np.sin(th)


def simulate_tree(spec: SimSpec) -> SimTree:
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    n0 = rng.poisson(spec.expected_background)
    t = [spec.horizon * rng.random(n0)]
    x0, y0 = _uniform_disc(rng, n0, spec.radius_km)
    x, y = [x0], [y0]
    parent = [np.full(n0, -1, dtype=np.int64)]
    gen = [np.zeros(n0, dtype=np.int64)]

    cur_t, cur_x, cur_y = t[0], x0, y0
    cur_idx = np.arange(n0)
    g = 0
    while len(cur_t):
        g += 1
        if g > MAX_GENERATIONS:
            raise RuntimeError(f"cascade did not die out within {MAX_GENERATIONS} generations")
        k = rng.poisson(spec.branching, len(cur_t))
        par = np.repeat(cur_idx, k)
        pt = np.repeat(cur_t, k)
        px = np.repeat(cur_x, k)
        py = np.repeat(cur_y, k)
        m = len(par)
        ct = pt + rng.exponential(1.0 / spec.omega, m)
        cx = px + spec.sigma * rng.standard_normal(m)
        cy = py + spec.sigma * rng.standard_normal(m)
        keep = (ct < spec.horizon) & (np.hypot(cx, cy) <= spec.radius_km)
        base = sum(len(a) for a in t)
        new_idx = base + np.arange(int(keep.sum()))
        t.append(ct[keep]); x.append(cx[keep]); y.append(cy[keep])
        parent.append(par[keep]); gen.append(np.full(int(keep.sum()), g, dtype=np.int64))
        cur_t, cur_x, cur_y, cur_idx = ct[keep], cx[keep], cy[keep], new_idx

    t_all = np.concatenate(t)
    order = np.argsort(t_all, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(len(order))
    par_all = np.concatenate(parent)
    par_sorted = np.where(par_all[order] >= 0, rank[np.maximum(par_all[order], 0)], -1)
    return SimTree(t_all[order], np.concatenate(x)[order], np.concatenate(y)[order],
                   par_sorted, np.concatenate(gen)[order], spec)


def simulate(spec: SimSpec, center=CHICAGO_CENTER) -> EventCatalog:
    """Draw one catalog; identical seeds give identical catalogs."""
    tree = simulate_tree(spec)
    kind = np.where(tree.parent < 0, "background", "triggered").astype(object)
    return EventCatalog.from_arrays(tree.t, tree.x, tree.y, kind=kind, epoch=spec.epoch,
                                    center=center, radius_km=spec.radius_km, meta=spec.sidecar())


def write_sidecar(spec: SimSpec, fh) -> None:
    json.dump(spec.sidecar(), fh, indent=2)
