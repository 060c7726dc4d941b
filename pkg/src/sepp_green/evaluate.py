"""Hit rate, PAI and the rolling-window backtest."""

from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from datetime import date, timedelta
from typing import IO, Callable, Mapping, Protocol as TypingProtocol, Sequence

import numpy as np

from .gridding import GridSpec, cells_of
from .ingest import EventCatalog
from .predict import AGGREGATE, SINGLE, IntensityMap, PredictConfig, multi_day_map

log = logging.getLogger(__name__)

# a/A = 1%, 2%, ..., 30%
SUMMARY_FRACTIONS = np.arange(1, 31) / 100.0


class UndefinedHitRate(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class HitCurve:
    """Hit rate and PAI at each requested area fraction.

    ``area_fraction`` is the realised ``a / A`` (``a`` rounded to whole
    cells). ``n_hits`` keeps the integer crime counts, so the identity
    ``pai * a / A == hit_rate`` holds exactly in rational arithmetic; each
    float is a single correctly rounded ratio of integers.
    """

    requested: np.ndarray
    area_fraction: np.ndarray
    hit_rate: np.ndarray
    pai: np.ndarray
    n_crimes: int
    n_eligible: int
    n_selected: np.ndarray
    n_hits: np.ndarray = None


def n_cells(fraction: float, n_eligible: int) -> int:
    """``round(fraction * A)`` with halves rounded up, at least one cell."""
    return max(1, min(n_eligible, int(math.floor(fraction * n_eligible + 0.5))))


def hit_rate_curve(imap: IntensityMap, actual: EventCatalog, fractions: Sequence[float] = SUMMARY_FRACTIONS) -> HitCurve:
    """Score a map against the crimes of its target day(s).

    Crimes outside eligible cells stay in the denominator but can never be hit.
    """
    if len(actual) == 0:
        raise UndefinedHitRate("undefined hit rate: no crimes on the target day")
    spec = imap.spec
    A = int(imap.eligible.sum())
    if A < 1:
        raise ValueError("map has no eligible cells")
    i, j, inside = cells_of(actual.x, actual.y, spec)
    flat = j * spec.nx + i
    crime_counts = np.bincount(flat[inside], minlength=spec.nx * spec.ny)
    ranked = imap.ranking()
    hits_by_rank = np.concatenate([[0], np.cumsum(crime_counts[ranked])])
    fr = np.asarray(fractions, dtype=float)
    a = np.array([n_cells(f, A) for f in fr])
    hits = hits_by_rank[a].astype(np.int64)
    N = len(actual)
    pai = (hits * A) / (N * a)
    return HitCurve(fr, a / A, hits / N, pai, N, A, a, hits)


@dataclass(frozen=True)
class Protocol:
    """Rolling-window backtest settings, all in days.

    Sample ``s`` trains on ``[start + s shift, start + s shift + training_days)``
    and forecasts ``lead_days`` ahead of the window end.
    """

    training_days: int = 400
    shift_days: int = 2
    samples: int = 50
    lead_days: int = 1
    start_day: int = 0
    mode: str = SINGLE
    r_cut: float | None = None
    pooling: str = "sample_mean"

    def __post_init__(self):
        if self.training_days < 2 or self.samples < 1 or self.shift_days < 0 or self.lead_days < 1:
            raise ValueError("invalid protocol lengths")
        if self.mode not in (SINGLE, AGGREGATE):
            raise ValueError(f"mode must be 'single' or 'aggregate', got {self.mode!r}")
        if self.pooling not in ("sample_mean", "pooled"):
            raise ValueError(f"pooling must be 'sample_mean' or 'pooled', got {self.pooling!r}")

    @property
    def span_days(self) -> int:
        """Days of data the protocol needs from ``start_day``."""
        return self.training_days + (self.samples - 1) * self.shift_days + self.lead_days

    def window(self, s: int) -> tuple[int, int]:
        lo = self.start_day + s * self.shift_days
        return lo, lo + self.training_days

    def target_days(self, s: int) -> tuple[int, int]:
        """Scored days ``[first, last]`` relative to the dataset epoch."""
        _, hi = self.window(s)
        last = hi + self.lead_days - 1
        first = hi if self.mode == AGGREGATE else last
        return first, last


class Method(TypingProtocol):
    name: str

    def forecast(self, train: EventCatalog, grid: GridSpec, first_day: int, n_days: int, mode: str) -> IntensityMap: ...


@dataclass
class KernelMethod:
    """Fit a kernel on the training window, then forecast with a frozen history."""

    name: str
    fit: Callable[[EventCatalog, GridSpec], object]
    predict_cfg: PredictConfig = PredictConfig()

    def forecast(self, train, grid, first_day, n_days, mode):
        kernel = self.fit(train, grid)
        return multi_day_map(kernel, train, first_day, n_days, grid, self.predict_cfg, mode)


@dataclass(frozen=True)
class SampleInfo:
    index: int
    train_start: str
    train_end: str
    target_first: str
    target_last: str
    n_train: int
    n_crimes: int
    skipped: str | None = None


@dataclass(eq=False)
class BacktestReport:
    protocol: Protocol
    fractions: np.ndarray
    samples: list[SampleInfo]
    curves: dict[str, list[HitCurve | None]]
    meta: dict = field(default_factory=dict)

    @property
    def methods(self) -> list[str]:
        return list(self.curves)

    def mean_curve(self, method: str) -> tuple[np.ndarray, np.ndarray]:
        """Mean hit rate and PAI over scored samples at each fraction."""
        cs = [c for c in self.curves[method] if c is not None]
        if not cs:
            nan = np.full(len(self.fractions), np.nan)
            return nan, nan
        if self.protocol.pooling == "pooled":
            hits = np.sum([c.hit_rate * c.n_crimes for c in cs], axis=0)
            total = sum(c.n_crimes for c in cs)
            hit = hits / total
            return hit, hit / cs[0].area_fraction
        return np.mean([c.hit_rate for c in cs], axis=0), np.mean([c.pai for c in cs], axis=0)

    def summary(self, method: str) -> tuple[float, float]:
        return summarize(self, method)

    def to_json(self) -> str:
        out = {"protocol": asdict(self.protocol), "fractions": self.fractions.tolist(),
               "samples": [asdict(s) for s in self.samples], "meta": self.meta, "methods": {}}
        for m in self.methods:
            hit, pai = self.mean_curve(m)
            mh, mp = summarize(self, m)
            out["methods"][m] = {
                "mean_hit_rate_pct": mh, "mean_pai": mp,
                "mean_curve": {"hit_rate": hit.tolist(), "pai": pai.tolist()},
                "per_sample": [None if c is None else {
                    "area_fraction": c.area_fraction.tolist(), "hit_rate": c.hit_rate.tolist(),
                    "pai": c.pai.tolist(), "n_hits": c.n_hits.tolist(), "n_selected": c.n_selected.tolist(),
                    "n_crimes": c.n_crimes, "n_eligible": c.n_eligible}
                    for c in self.curves[m]],
            }
        return json.dumps(out, indent=2)

    def table_csv(self, fh: IO[str], label: str = "") -> None:
        """One row, Table-1 layout: hit-rate columns then PAI columns per method."""
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["type"] + [f"hit_pct_{m}" for m in self.methods] + [f"pai_{m}" for m in self.methods])
        rows = [summarize(self, m) for m in self.methods]
        w.writerow([label] + [f"{h:.1f}" for h, _ in rows] + [f"{p:.2f}" for _, p in rows])

    def curves_csv(self, fh: IO[str]) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "area_pct", "hit_rate", "pai"])
        for m in self.methods:
            hit, pai = self.mean_curve(m)
            for f, h, p in zip(self.fractions, hit, pai):
                w.writerow([m, f"{100 * f:g}", repr(float(h)), repr(float(p))])


def summarize(report: BacktestReport, method: str, fractions=SUMMARY_FRACTIONS) -> tuple[float, float]:
    """Mean hit rate (percent) and mean PAI over ``a/A = 1..30%`` of the sample-mean curve."""
    hit, pai = report.mean_curve(method)
    sel = np.isin(np.round(report.fractions, 12), np.round(np.asarray(fractions), 12))
    return float(100 * hit[sel].mean()), float(pai[sel].mean())


def _day(epoch: date, d: int) -> str:
    return (epoch + timedelta(days=d)).isoformat()


def backtest(dataset: EventCatalog, methods: Method | Mapping[str, Method], protocol: Protocol,
             grid: GridSpec, fractions: Sequence[float] = SUMMARY_FRACTIONS,
             on_sample: Callable[[int], None] | None = None, workers: int = 1) -> BacktestReport:
    """Run every method on each rolling sample and score its forecast.

    Samples with no training events or no crimes to score are skipped and
    recorded with a reason. With ``workers > 1`` samples run on a thread
    pool; results are collected in sample order, so the report does not
    depend on scheduling.
    """
    if not isinstance(methods, Mapping):
        methods = {methods.name: methods}
    available = int(math.floor(dataset.t.max())) + 1 if len(dataset) else 0
    if protocol.start_day + protocol.span_days > max(available, 0) and len(dataset):
        log.warning("dataset spans %d days but the protocol needs %d from day %d",
                    available, protocol.span_days, protocol.start_day)
    grid = grid.with_nt(protocol.training_days)
    fr = np.asarray(fractions, dtype=float)

    def run(s: int):
        lo, hi = protocol.window(s)
        first, last = protocol.target_days(s)
        train = dataset.window(lo, hi)
        actual = dataset.window(first, last + 1)
        reason = None
        if len(train) == 0:
            reason = "no training events"
        elif len(actual) == 0:
            reason = "no crimes on target day"
        info = SampleInfo(s, _day(dataset.epoch, lo), _day(dataset.epoch, hi - 1),
                          _day(dataset.epoch, first), _day(dataset.epoch, last),
                          len(train), len(actual), reason)
        out = {}
        for name, method in methods.items():
            if reason:
                out[name] = None
                continue
            n_days = last - hi + 1 if protocol.mode == AGGREGATE else protocol.lead_days
            imap = method.forecast(train, grid, protocol.training_days, n_days, protocol.mode)
            out[name] = hit_rate_curve(imap, actual, fr)
        if reason:
            log.info("sample %d skipped: %s", s, reason)
        if on_sample:
            on_sample(s)
        return info, out

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, range(protocol.samples)))
    else:
        results = [run(s) for s in range(protocol.samples)]
    curves: dict[str, list] = {name: [r[1][name] for r in results] for name in methods}
    return BacktestReport(protocol, fr, [r[0] for r in results], curves)
