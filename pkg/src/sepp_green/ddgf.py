"""Data-driven Green's function estimator of the trigger kernel.

Pipeline: rasterised density -> per-slice spectra -> time-development
operator Phi(n dt, k_r) averaged over start slices -> kernel in the
generating-function domain, ``G(w) = P(w) / (1 + gamma P(w))`` with
``P(w) = sum_n Phi_n w^n`` -> power-series coefficients -> inverse Hankel
transform to g(t, r).
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from typing import IO

import numpy as np
from numpy.polynomial import polynomial as npoly

from .gridding import DensityField, GridSpec, rasterize
from .ingest import EventCatalog
from .kernels import LINEAR, TriggerKernel
from .spectral import SpectralError, coeff_extract, forward_fft2, hankel_inverse, radial_average

log = logging.getLogger(__name__)

# Feedback coefficient that makes the stationary intensity equal the stationary density.
GAMMA = math.log(2.0)

SINGULAR_TOL = 1e-8


class EmptyWindowError(ValueError):
    pass


@dataclass(frozen=True)
class DdgfConfig:
    """Settings for :func:`fit_ddgf`.

    ``nt_lag=None`` uses ``min(400, nt - 1)``. ``m_points=None`` picks a
    power of two of at least ``max(2**16, 4 (nt_lag + 1))`` samples for the
    coefficient extraction. ``weighting`` is ``"slice"`` (each eventful start
    slice counts once) or ``"event"`` (start slices weighted by their event
    count).
    """

    gamma: float = GAMMA
    nt_lag: int | None = None
    rho0: float = 1.0
    m_points: int | None = None
    weighting: str = "slice"
    r_step: float | None = None
    r_max: float | None = None
    t_cut: float | None = None
    r_cut: float | None = None

    def __post_init__(self):
        if self.weighting not in ("slice", "event"):
            raise ValueError(f"weighting must be 'slice' or 'event', got {self.weighting!r}")
        if self.nt_lag is not None and self.nt_lag < 1:
            raise ValueError("nt_lag must be >= 1")


@dataclass(frozen=True, eq=False)
class TransferOperator:
    """Phi[n, b] at lag ``n dt`` and radial wavenumber ``k[b]``."""

    phi: np.ndarray
    k: np.ndarray
    sample_counts: np.ndarray
    dt: float
    dx: float
    weights: np.ndarray = field(default_factory=lambda: np.empty(0))

    @property
    def nt_lag(self) -> int:
        return self.phi.shape[0] - 1

    def to_csv(self, fh: IO[str]) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["lag_days", "k_r", "re", "im"])
        for n in range(self.phi.shape[0]):
            for b, kr in enumerate(self.k):
                z = self.phi[n, b]
                w.writerow([repr(n * self.dt), repr(float(kr)), repr(float(z.real)), repr(float(z.imag))])


def slice_counts(field_: DensityField) -> np.ndarray:
    return np.bincount(field_.event_cells[:, 0], minlength=field_.spec.nt) if field_.n_events else \
        np.rint(field_.values.sum(axis=(1, 2)) * field_.spec.cell_area * field_.spec.dt).astype(np.int64)


def estimate_phi(field_: DensityField, nt_lag: int | None = None, weighting: str = "slice") -> TransferOperator:
    """Time-development operator averaged over eventful start slices.

    For a start slice t0 holding events j, each at cell centre x_j, the
    single-event spectrum is ``rho_j(k) = exp(i k x_j) / dt`` and

        sum_j rho(t0 + n, k) / rho_j(k) = dt^2 rho(t0 + n, k) conj(rho(t0, k)),

    so the per-event decomposition reduces to a cross-spectrum between slices.
    The result is averaged over start slices (``weighting="slice"``) or over
    events (``"event"``), then over the angle of k.
    """
    spec = field_.spec
    counts = slice_counts(field_)
    eventful = counts > 0
    if not eventful.any():
        raise EmptyWindowError("empty training window: no slice holds an event")
    nt = spec.nt
    if nt_lag is None:
        nt_lag = min(400, nt - 1)
    nt_lag = min(nt_lag, nt - 1)
    S = forward_fft2(field_.values, spec)
    Sc = np.conj(S)

    if weighting == "event":
        w = counts.astype(float)
    else:
        w = eventful.astype(float)
    # admissible start slices for lag n are t0 <= nt - 1 - n
    cum = np.cumsum(w)
    norm = cum[nt - 1 - np.arange(nt_lag + 1)]
    n_samples = np.cumsum(eventful)[nt - 1 - np.arange(nt_lag + 1)]

    dt2 = spec.dt ** 2
    full = np.empty((nt_lag + 1, spec.ny, spec.nx), dtype=complex)
    for n in range(nt_lag + 1):
        # non-eventful start slices have Sc == 0, so summing over all t0 is exact
        full[n] = np.einsum("tij,tij->ij", S[n:], Sc[: nt - n]) * dt2
    with np.errstate(invalid="ignore", divide="ignore"):
        full /= np.where(norm > 0, norm, np.inf)[:, None, None]
    prof = radial_average(full, spec)
    return TransferOperator(prof.values, prof.k, n_samples.astype(np.int64), spec.dt, spec.dx, prof.counts)


def _default_m_points(n_terms: int) -> int:
    # Truncating Phi at a finite lag puts zeros of 1 + gamma P within ~1e-4 of
    # the unit circle; 2**16 samples keep the aliasing below 1e-10 there.
    return 1 << max(16, math.ceil(math.log2(4 * n_terms)))


def poly_on_circle(coeffs: np.ndarray, w: np.ndarray, rho0: float) -> np.ndarray:
    """Evaluate ``sum_n coeffs[n] w^n`` (per column) at the equispaced circle ``w``.

    Uses an FFT when ``w`` is the standard sampling circle of
    :func:`coeff_extract`, Horner's rule otherwise.
    """
    m = len(w)
    standard = (m >= coeffs.shape[0]
                and np.allclose(w[:2], rho0 * np.exp(2j * np.pi * np.arange(2) / m), rtol=0, atol=1e-14))
    if not standard:
        return npoly.polyval(w, coeffs).T
    powers = rho0 ** np.arange(coeffs.shape[0])
    scaled = coeffs * powers.reshape((-1,) + (1,) * (coeffs.ndim - 1))
    return np.fft.ifft(scaled, n=m, axis=0) * m


def _kernel_series(phi: np.ndarray, gamma: float, rho0: float, m_points: int) -> np.ndarray:
    """Coefficients of ``P / (1 + gamma P)`` per column of ``phi``; raises on near-singular samples."""
    n_terms = phi.shape[0]

    def evaluator(w):
        P = poly_on_circle(phi, w, rho0)  # (M, nb)
        den = 1.0 + gamma * P
        small = np.abs(den) < SINGULAR_TOL
        if small.any():
            m = np.argwhere(small)[0]
            raise SpectralError(f"1 + gamma P(w) vanishes near w = {w[m[0]]!r} (bin {m[1]})")
        with np.errstate(invalid="ignore", divide="ignore"):
            return P / den  # non-finite samples are reported by coeff_extract

    return coeff_extract(evaluator, n_terms, m_points, rho0)


def kernel_spectrum(op: TransferOperator, cfg: DdgfConfig = DdgfConfig()) -> np.ndarray:
    """``dt g_n(k_b)`` coefficients, shape (nt_lag + 1, n_bins), complex.

    Retries once on the circle ``|w| = 0.99`` if the unit circle passes too
    close to a zero of ``1 + gamma P``.
    """
    n_terms = op.phi.shape[0]
    m_points = cfg.m_points or _default_m_points(n_terms)
    try:
        return _kernel_series(op.phi, cfg.gamma, cfg.rho0, m_points)
    except SpectralError as exc:
        if cfg.rho0 <= 0.99:
            raise
        log.warning("%s; retrying with rho0=0.99", exc)
        return _kernel_series(op.phi, cfg.gamma, 0.99, m_points)


def default_r_targets(spec_dx: float, r_max: float, r_step: float | None = None) -> np.ndarray:
    step = r_step or spec_dx / 2
    return np.arange(int(math.ceil(r_max / step - 1e-9)) + 1) * step


def solve_kernel(op: TransferOperator, cfg: DdgfConfig = DdgfConfig(), r_targets=None) -> TriggerKernel:
    """Trigger kernel g(n dt, r) from the transfer operator.

    Only wavenumber bins up to the Nyquist limit ``pi / dx`` enter the
    Hankel integral. The real part is kept; the largest discarded imaginary
    magnitude is stored in ``extras["max_imag"]``.
    """
    if op.phi.size == 0:
        raise ValueError("transfer operator is empty")
    coeffs = kernel_spectrum(op, cfg)
    gk = coeffs / op.dt
    if r_targets is None:
        r_targets = default_r_targets(op.dx, cfg.r_max or 10.0 * math.sqrt(2), cfg.r_step)
    r_targets = np.asarray(r_targets, dtype=float)
    g = hankel_inverse((op.k, gk), r_targets, k_max=math.pi / op.dx)
    kernel = TriggerKernel(g.real, np.arange(op.phi.shape[0]) * op.dt, r_targets, op.dt, op.dx,
                           interpolation=LINEAR, method="ddgf",
                           extras={"max_imag": float(np.abs(g.imag).max()), "n_negative": int((g.real < 0).sum())})
    if cfg.t_cut is not None or cfg.r_cut is not None:
        kernel = kernel.with_cutoffs(cfg.t_cut, cfg.r_cut)
    return kernel


def fit_ddgf(catalog: EventCatalog, spec: GridSpec, cfg: DdgfConfig = DdgfConfig()) -> TriggerKernel:
    """Rasterise ``catalog`` on ``spec`` and return the estimated kernel."""
    field_ = rasterize(catalog, spec)
    op = estimate_phi(field_, cfg.nt_lag, cfg.weighting)
    r_max = cfg.r_max or math.hypot(spec.nx * spec.dx, spec.ny * spec.dx)
    return solve_kernel(op, cfg, default_r_targets(spec.dx, r_max, cfg.r_step))
