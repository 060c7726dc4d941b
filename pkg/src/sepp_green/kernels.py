"""Tabulated trigger kernels g(t, r) shared by every estimator."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field, replace
from typing import IO

import numpy as np
from scipy.integrate import trapezoid

LINEAR = "linear"
HISTOGRAM = "histogram"


@dataclass(frozen=True, eq=False)
class TriggerKernel:
    """g(t, r) in 1/(day km^2) on a lag x radius table.

    ``interpolation == "linear"``: rows are lags ``lags[n]`` (multiples of
    ``dt``), columns are radii ``r[m]``; lookups round the lag to the nearest
    row and interpolate linearly in r, returning 0 past the last radius.

    ``interpolation == "histogram"``: ``lags`` and ``r`` are left bin edges of
    width ``dt`` and ``dx``; lookups are piecewise constant.
    """

    g: np.ndarray
    lags: np.ndarray
    r: np.ndarray
    dt: float
    dx: float
    t_cut: float | None = None
    r_cut: float | None = None
    interpolation: str = LINEAR
    method: str = ""
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        g = np.asarray(self.g, dtype=float)
        if g.shape != (len(self.lags), len(self.r)):
            raise ValueError(f"g has shape {g.shape}, expected ({len(self.lags)}, {len(self.r)})")
        if not np.all(np.isfinite(g)):
            raise ValueError("kernel values must be finite")
        if self.interpolation not in (LINEAR, HISTOGRAM):
            raise ValueError(f"unknown interpolation {self.interpolation!r}")
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "lags", np.asarray(self.lags, dtype=float))
        object.__setattr__(self, "r", np.asarray(self.r, dtype=float))

    @property
    def max_lag(self) -> float:
        top = self.lags[-1] + (self.dt if self.interpolation == HISTOGRAM else 0.0)
        return top if self.t_cut is None else min(top, self.t_cut)

    @property
    def max_r(self) -> float:
        top = self.r[-1] + (self.dx if self.interpolation == HISTOGRAM else 0.0)
        return top if self.r_cut is None else min(top, self.r_cut)

    def with_cutoffs(self, t_cut: float | None = None, r_cut: float | None = None) -> "TriggerKernel":
        """Copy with g zeroed beyond the cutoffs (and lookups cut there too)."""
        g = self.g.copy()
        if t_cut is not None:
            g[self.lags > t_cut, :] = 0.0
        if r_cut is not None:
            g[:, self.r > r_cut] = 0.0
        return replace(self, g=g, t_cut=t_cut, r_cut=r_cut)

    def scaled(self, c: float) -> "TriggerKernel":
        return replace(self, g=self.g * c)

    def evaluate(self, lag, r) -> np.ndarray:
        """g at broadcastable arrays of lag (days) and distance (km)."""
        lag, r = np.broadcast_arrays(np.asarray(lag, dtype=float), np.asarray(r, dtype=float))
        out = np.zeros(lag.shape)
        if self.interpolation == HISTOGRAM:
            n = np.floor((lag - self.lags[0]) / self.dt).astype(np.int64)
            m = np.floor((r - self.r[0]) / self.dx).astype(np.int64)
            ok = (n >= 0) & (n < len(self.lags)) & (m >= 0) & (m < len(self.r))
            out[ok] = self.g[n[ok], m[ok]]
        else:
            n = np.rint((lag - self.lags[0]) / self.dt).astype(np.int64)
            ok = (n >= 0) & (n < len(self.lags)) & (r >= self.r[0]) & (r <= self.r[-1])
            if ok.any():
                rr = r[ok]
                hi = np.clip(np.searchsorted(self.r, rr, side="right"), 1, len(self.r) - 1)
                lo = hi - 1
                span = self.r[hi] - self.r[lo]
                frac = np.where(span > 0, (rr - self.r[lo]) / np.where(span > 0, span, 1.0), 0.0)
                rows = self.g[n[ok]]
                out[ok] = (1 - frac) * rows[np.arange(len(rr)), lo] + frac * rows[np.arange(len(rr)), hi]
        if self.t_cut is not None:
            out[lag > self.t_cut] = 0.0
        if self.r_cut is not None:
            out[r > self.r_cut] = 0.0
        return out

    def at_origin(self) -> tuple[np.ndarray, np.ndarray]:
        """``(lags, g(lag, r=0))``."""
        return self.lags.copy(), self.evaluate(self.lags, 0.0)

    def integral(self) -> float:
        """Space-time integral; exact for histograms, trapezoidal in r otherwise."""
        if self.interpolation == HISTOGRAM:
            edges = np.append(self.r, self.r[-1] + self.dx)
            area = np.pi * np.diff(edges ** 2)
            return float((self.g * area).sum() * self.dt)
        return float(trapezoid(self.g * 2 * np.pi * self.r, self.r, axis=1).sum() * self.dt)

    # -- serialisation -------------------------------------------------

    def header(self) -> dict:
        return {"dt": self.dt, "dx": self.dx, "t_cut": self.t_cut, "r_cut": self.r_cut,
                "interpolation": self.interpolation, "method": self.method,
                "n_lags": len(self.lags), "n_r": len(self.r)}

    def to_csv(self, fh: IO[str]) -> None:
        """``# {json header}`` then ``lag_days,r_km,g_value`` rows, lag-major."""
        fh.write("# " + json.dumps(self.header()) + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["lag_days", "r_km", "g_value"])
        for a, lag in enumerate(self.lags):
            for b, rad in enumerate(self.r):
                w.writerow([repr(float(lag)), repr(float(rad)), repr(float(self.g[a, b]))])

    @classmethod
    def from_csv(cls, source) -> "TriggerKernel":
        text = source.read() if hasattr(source, "read") else open(source).read()
        lines = text.splitlines()
        if not lines or not lines[0].startswith("#"):
            raise ValueError("kernel CSV must start with a '# {...}' header line")
        meta = json.loads(lines[0][1:])
        rows = list(csv.reader(io.StringIO("\n".join(lines[2:]))))
        arr = np.array([[float(v) for v in row] for row in rows if row])
        nl, nr = meta["n_lags"], meta["n_r"]
        arr = arr.reshape(nl, nr, 3)
        return cls(arr[:, :, 2], arr[:, 0, 0], arr[0, :, 1], meta["dt"], meta["dx"],
                   meta["t_cut"], meta["r_cut"], meta["interpolation"], meta.get("method", ""))


@dataclass(frozen=True)
class LogTailFit:
    """Least-squares fit of ``g(t) ~ -a log(b t)``."""

    a: float
    b: float
    r2: float
    n_points: int
    degenerate: bool = False


def log_tail_fit(lags, values) -> LogTailFit | None:
    """Fit ``-a log(b t)`` by linear regression of g on log t.

    Returns ``None`` with fewer than three usable points. A flat series
    yields ``r2 = 0`` and ``degenerate = True``.
    """
    t = np.asarray(lags, dtype=float)
    g = np.asarray(values, dtype=float)
    ok = (t > 0) & np.isfinite(g)
    t, g = t[ok], g[ok]
    if len(t) < 3:
        return None
    u = np.log(t)
    A = np.stack([np.ones_like(u), u], axis=1)
    (alpha, beta), *_ = np.linalg.lstsq(A, g, rcond=None)
    ss_tot = float(((g - g.mean()) ** 2).sum())
    ss_res = float(((g - (alpha + beta * u)) ** 2).sum())
    scale = max(float(np.abs(g).max()), 1e-300)
    if ss_tot <= (1e-12 * scale) ** 2 * len(g) or abs(beta) <= 1e-14 * scale:
        return LogTailFit(0.0, float("nan"), 0.0, len(g), degenerate=True)
    a = -beta
    b = float(np.exp(-alpha / a))
    return LogTailFit(float(a), b, 1.0 - ss_res / ss_tot, len(g))


def peak_lags(lags, values) -> list[float]:
    """Local maxima of a lag series, ignoring lag 0.

    The first positive lag counts as a peak when the series falls after it;
    the last lag is never a peak.
    """
    t = np.asarray(lags, dtype=float)
    g = np.asarray(values, dtype=float)
    idx = np.nonzero(t > 0)[0]
    peaks = []
    for pos, n in enumerate(idx[:-1]):
        left_ok = pos == 0 or g[n] > g[idx[pos - 1]]
        if left_ok and g[n] > g[idx[pos + 1]]:
            peaks.append(float(t[n]))
    return peaks


@dataclass(frozen=True)
class KernelDiagnostics:
    peaks: list[float]
    fit: LogTailFit | None


def kernel_diagnostics(kernel: TriggerKernel, fit_range=(50.0, 400.0)) -> KernelDiagnostics:
    """Peak lags of g(t, 0) and the logarithmic tail fit over ``fit_range`` (inclusive)."""
    if len(kernel.lags) < 10:
        raise ValueError("kernel diagnostics need at least 10 lags")
    lags, g0 = kernel.at_origin()
    sel = (lags >= fit_range[0]) & (lags <= fit_range[1])
    return KernelDiagnostics(peak_lags(lags, g0), log_tail_fit(lags[sel], g0[sel]))


def exponential_rate(lags, mass, max_lag: float | None = None) -> float:
    """Decay rate from a mass-weighted log-linear fit to a temporal histogram.

    Bins with non-positive mass are skipped. For exact exponential bins
    ``mass_k ~ exp(-w k dt)`` this returns ``w``.
    """
    t = np.asarray(lags, dtype=float)
    m = np.asarray(mass, dtype=float)
    ok = m > 0
    if max_lag is not None:
        ok &= t <= max_lag
    if ok.sum() < 2:
        raise ValueError("need at least two positive bins to fit a decay rate")
    slope, _ = np.polyfit(t[ok], np.log(m[ok]), 1, w=np.sqrt(m[ok]))
    return float(-slope)
