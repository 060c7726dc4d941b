"""Transforms used by the Green's-function estimator.

Conventions
-----------
Spatial Fourier transform uses the ``+i`` sign and continuum normalisation,

    Y(k) = sum_cells exp(i k . x_c) Y(x_c) dx^2,

with ``x_c`` the cell centres and ``k`` on the signed DFT mesh
``2 pi (m / (nx dx), l / (ny dx))``. Time-domain inversion is done on the
generating function in ``w = exp(-z dt)``: coefficients of a power series are
read off by sampling it on a circle and taking a discrete Fourier transform.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import j0

from .gridding import GridSpec


class SpectralError(ArithmeticError):
    """Numerical failure inside a transform (non-finite samples, singular solve)."""


def wavenumbers(spec: GridSpec) -> tuple[np.ndarray, np.ndarray]:
    """Signed (ny, nx) wavenumber meshes ``(KX, KY)`` in rad/km."""
    kx = 2 * np.pi * np.fft.fftfreq(spec.nx, d=spec.dx)
    ky = 2 * np.pi * np.fft.fftfreq(spec.ny, d=spec.dx)
    return np.meshgrid(kx, ky)


def _center_phase(spec: GridSpec) -> np.ndarray:
    KX, KY = wavenumbers(spec)
    x0 = spec.origin[0] + spec.dx / 2
    y0 = spec.origin[1] + spec.dx / 2
    return np.exp(1j * (KX * x0 + KY * y0))


@dataclass(frozen=True, eq=False)
class SpectralSlice:
    values: np.ndarray
    spec: GridSpec

    @property
    def k(self) -> np.ndarray:
        KX, KY = wavenumbers(self.spec)
        return np.hypot(KX, KY)


def forward_fft2(values: np.ndarray, spec: GridSpec) -> SpectralSlice | np.ndarray:
    """Continuum-normalised 2-D transform of a (ny, nx) slice.

    A stack of shape (..., ny, nx) is transformed slice-wise and returned as
    a bare array; a single slice comes back as a :class:`SpectralSlice`.
    """
    values = np.asarray(values)
    if values.shape[-2:] != (spec.ny, spec.nx):
        raise ValueError(f"slice shape {values.shape[-2:]} does not match grid ({spec.ny}, {spec.nx})")
    n = spec.nx * spec.ny
    out = np.fft.ifft2(values, axes=(-2, -1)) * (n * spec.cell_area) * _center_phase(spec)
    if values.ndim == 2:
        return SpectralSlice(out, spec)
    return out


def inverse_fft2(spectrum, spec: GridSpec) -> np.ndarray:
    values = spectrum.values if isinstance(spectrum, SpectralSlice) else np.asarray(spectrum)
    if values.shape[-2:] != (spec.ny, spec.nx):
        raise ValueError(f"spectrum shape {values.shape[-2:]} does not match grid ({spec.ny}, {spec.nx})")
    n = spec.nx * spec.ny
    return np.fft.fft2(values * np.conj(_center_phase(spec)), axes=(-2, -1)) / (n * spec.cell_area)


@dataclass(frozen=True, eq=False)
class RadialProfile:
    """Angle-averaged values on annular wavenumber bins.

    ``k`` holds the bin centres (``b * dk``) of the non-empty bins, ``values``
    the averages; for a stacked input the bin axis is last.
    """

    k: np.ndarray
    values: np.ndarray
    dk: float
    counts: np.ndarray


def radial_bins(spec: GridSpec) -> tuple[np.ndarray, float]:
    """Bin index of every mesh point: ``round(|k| / dk)`` with ``dk = 2 pi / (nx dx)``."""
    dk = 2 * np.pi / (spec.nx * spec.dx)
    KX, KY = wavenumbers(spec)
    kr = np.hypot(KX, KY)
    # floor(|k|/dk + 1/2) puts the half-open interval [b dk - dk/2, b dk + dk/2) in bin b
    return np.floor(kr / dk + 0.5).astype(np.int64), dk


def radial_average(slice_, spec: GridSpec | None = None) -> RadialProfile:
    """Average over the angle of ``k``.

    Accepts a :class:`SpectralSlice` or an array of shape (..., ny, nx) with
    an explicit ``spec``. Empty bins are dropped.
    """
    if isinstance(slice_, SpectralSlice):
        values, spec = slice_.values, slice_.spec
    else:
        values = np.asarray(slice_)
        if spec is None:
            raise TypeError("spec is required for bare arrays")
    bins, dk = radial_bins(spec)
    flat_bins = bins.ravel()
    counts = np.bincount(flat_bins)
    lead = values.shape[:-2]
    flat = values.reshape(-1, spec.ny * spec.nx)
    nb = len(counts)
    # fixed-order reduction keeps sums bit-reproducible
    order = np.argsort(flat_bins, kind="stable")
    boundaries = np.searchsorted(flat_bins[order], np.arange(nb))
    sums = np.add.reduceat(flat[:, order], boundaries[counts > 0], axis=1)
    keep = np.nonzero(counts)[0]
    avg = sums / counts[keep]
    return RadialProfile(keep * dk, avg.reshape(lead + (len(keep),)), dk, counts[keep])


def coeff_extract(evaluator: Callable[[np.ndarray], np.ndarray], n_terms: int,
                  m_points: int | None = None, rho0: float = 1.0) -> np.ndarray:
    """Power-series coefficients ``c_0 .. c_{n_terms-1}`` of ``evaluator(w)``.

    ``evaluator`` is called once with the array of ``m_points`` equispaced
    points on ``|w| = rho0``. The result carries an aliasing error of order
    ``rho0 ** m_points`` times the coefficient decay.
    """
    if m_points is None:
        m_points = 2 * n_terms
    if m_points < 2 * n_terms:
        raise ValueError("m_points must be at least 2 * n_terms")
    if not 0 < rho0 <= 1:
        raise ValueError("rho0 must lie in (0, 1]")
    w = rho0 * np.exp(2j * np.pi * np.arange(m_points) / m_points)
    f = np.asarray(evaluator(w))
    bad = ~np.isfinite(f)
    if bad.any():
        raise SpectralError(f"evaluator is not finite at w = {w[np.argmax(bad)]!r}")
    c = np.fft.fft(f, axis=0)[:n_terms] / m_points
    scale = rho0 ** -np.arange(n_terms, dtype=float)
    return c * scale.reshape((-1,) + (1,) * (c.ndim - 1))


def hankel_inverse(profile: RadialProfile | tuple, r_targets, k_max: float | None = None) -> np.ndarray:
    """Order-zero inverse Hankel transform by the trapezoidal rule.

    Computes ``(1/2pi) int_0^k_max F(k) J0(k r) k dk`` on the profile's bin
    centres. ``profile.values`` may carry leading axes; the result has shape
    ``leading + (len(r_targets),)``.
    """
    if isinstance(profile, RadialProfile):
        k, values = profile.k, profile.values
    else:
        k, values = profile
    k = np.asarray(k, dtype=float)
    values = np.asarray(values)
    if k_max is not None:
        sel = k <= k_max * (1 + 1e-12)
        k, values = k[sel], values[..., sel]
    r = np.atleast_1d(np.asarray(r_targets, dtype=float))
    if len(k) < 2:
        return np.zeros(values.shape[:-1] + r.shape, dtype=values.dtype)
    wts = np.empty_like(k)
    h = np.diff(k)
    wts[0] = h[0] / 2
    wts[-1] = h[-1] / 2
    wts[1:-1] = (h[:-1] + h[1:]) / 2
    basis = j0(np.outer(k, r)) * (k * wts)[:, None] / (2 * np.pi)
    return values @ basis
