import io
import logging
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sepp_green.ddgf import (
    GAMMA, DdgfConfig, EmptyWindowError, TransferOperator, estimate_phi, fit_ddgf, kernel_spectrum, slice_counts,
    solve_kernel)
from sepp_green.gridding import GridSpec, rasterize
from sepp_green.ingest import EventCatalog
from sepp_green.spectral import SpectralError

from oracles import phi_per_event, series_division

TINY = GridSpec(dx=0.5, dt=1.0, nx=6, ny=6, nt=6, origin=(-1.5, -1.5), radius_km=1.5)


def op_from(phi, dt=1.0, dx=0.25, k=None):
    phi = np.asarray(phi, dtype=complex)
    if phi.ndim == 1:
        phi = phi[:, None]
    if k is None:
        k = np.arange(phi.shape[1]) * (2 * math.pi / 10)
    return TransferOperator(phi, np.asarray(k, float), np.ones(phi.shape[0], np.int64), dt, dx)


def test_phi_two_events_same_cell():
    g = GridSpec(nt=2)
    f = rasterize(EventCatalog.from_arrays([0.5, 1.5], [0.1, 0.1], [0.1, 0.1]), g)
    op = estimate_phi(f, nt_lag=1)
    np.testing.assert_allclose(op.phi[1], 1.0, atol=1e-12)
    np.testing.assert_allclose(op.phi[0], 1.0, atol=1e-12)


def test_phi_no_later_events():
    f = rasterize(EventCatalog.from_arrays([0.5], [1.0], [-2.0]), GridSpec(nt=5))
    op = estimate_phi(f, nt_lag=4)
    assert not op.phi[1:].any()


def test_phi_average_of_samples():
    # start slice 0 sees its event repeated at lag 1 (Phi = 1); start slice 1 sees nothing (Phi = 0)
    f = rasterize(EventCatalog.from_arrays([0.5, 1.5], [0.1, 0.1], [0.1, 0.1]), GridSpec(nt=3))
    op = estimate_phi(f, nt_lag=1)
    np.testing.assert_allclose(op.phi[1], 0.5, atol=1e-12)
    assert op.sample_counts.tolist() == [2, 2]


@settings(max_examples=15)
@given(st.lists(st.tuples(st.integers(0, 5), st.floats(-1.49, 1.49), st.floats(-1.49, 1.49)),
                min_size=1, max_size=9),
       st.sampled_from(["slice", "event"]))
def test_phi_matches_per_event_oracle(evs, weighting):
    t = [e[0] + 0.5 for e in evs]
    cat = EventCatalog.from_arrays(t, [e[1] for e in evs], [e[2] for e in evs])
    f = rasterize(cat, TINY)
    op = estimate_phi(f, nt_lag=3, weighting=weighting)
    k, phi = phi_per_event(f, 3, weighting)
    np.testing.assert_allclose(op.k, k, rtol=1e-12)
    np.testing.assert_allclose(op.phi, phi, atol=1e-10)


def test_phi_invariants(synthetic_small):
    f = rasterize(synthetic_small, GridSpec.for_disc(nt=120))
    op = estimate_phi(f)
    assert op.nt_lag == 119
    assert np.all(np.isfinite(op.phi[0]))
    assert np.all(np.diff(op.sample_counts) <= 0)
    buf = io.StringIO()
    op.to_csv(buf)
    assert len(buf.getvalue().splitlines()) == 1 + op.phi.size


def test_empty_window():
    with pytest.raises(EmptyWindowError):
        estimate_phi(rasterize(EventCatalog.empty(), GridSpec(nt=4)))


def test_slice_counts():
    f = rasterize(EventCatalog.from_arrays([0.1, 0.2, 2.5], [0, 0, 1], [0, 0, 1]), GridSpec(nt=4))
    assert slice_counts(f).tolist() == [2, 0, 1, 0]


# -- kernel solve ----------------------------------------------------------------

def test_stationary_identity():
    op = op_from(np.ones(61))
    c = kernel_spectrum(op)[:, 0]
    n = np.arange(31)
    np.testing.assert_allclose(c[:31].real, (1 + GAMMA) ** -(n + 1.0), atol=1e-6, rtol=0)
    assert c[1:].real.sum() == pytest.approx(0.8518, abs=1e-3)
    assert c[1:].real.sum() == pytest.approx(1 / ((1 + GAMMA) * GAMMA), abs=1e-3)


def test_zero_operator():
    k = solve_kernel(op_from(np.zeros((11, 21))))
    assert not k.g.any()


def test_single_term_expansion():
    eps = 0.05
    phi = np.zeros(8)
    phi[1] = eps
    c = kernel_spectrum(op_from(phi))[:, 0]
    assert c[1].real == pytest.approx(eps, abs=1e-12)
    assert c[2].real == pytest.approx(-GAMMA * eps ** 2, abs=1e-12)
    assert abs(c[0]) < 1e-12


@settings(max_examples=30)
@given(st.integers(0, 2 ** 32 - 1), st.integers(2, 40))
def test_matches_series_division(seed, n_terms):
    rng = np.random.default_rng(seed)
    raw = rng.normal(size=(n_terms, 3)) + 1j * rng.normal(size=(n_terms, 3))
    # sum |phi| < 0.9 / gamma: no zero of 1 + gamma P inside the closed unit disc
    phi = raw / np.abs(raw).sum(axis=0) * (0.9 / GAMMA)
    got = kernel_spectrum(op_from(phi))
    np.testing.assert_allclose(got, series_division(phi, GAMMA), atol=1e-10)


def test_small_amplitude_linearity():
    rng = np.random.default_rng(11)
    phi = rng.uniform(0, 1, (20, 21)) * np.exp(-np.arange(20))[:, None]
    eps = 1e-4
    lin = solve_kernel(op_from(phi), DdgfConfig(gamma=0.0)).g   # G = P exactly
    got = solve_kernel(op_from(eps * phi)).g / eps
    assert np.abs(got - lin).max() / np.abs(lin).max() < 1e-3


def test_dt_scaling():
    phi = np.ones((10, 3)) * 0.3
    a = solve_kernel(op_from(phi, dt=1.0))
    b = solve_kernel(op_from(phi, dt=0.5))
    np.testing.assert_allclose(b.g, 2 * a.g, rtol=1e-12, atol=1e-15)
    np.testing.assert_allclose(b.lags, a.lags / 2)


def test_cutoffs_zero_kernel():
    phi = np.ones((20, 21)) * 0.2
    k = solve_kernel(op_from(phi), DdgfConfig(t_cut=5, r_cut=0.6))
    assert not k.g[k.lags > 5].any()
    assert not k.g[:, k.r > 0.6].any()
    assert not k.evaluate(6.0, 0.0).any() and not k.evaluate(1.0, 0.7).any()


def test_singular_falls_back(caplog):
    # 1 + gamma P vanishes at w = 1 on the unit circle
    phi = np.zeros((6, 1), dtype=complex)
    phi[1] = -1 / GAMMA
    with caplog.at_level(logging.WARNING):
        c = kernel_spectrum(op_from(phi))
    assert "rho0=0.99" in caplog.text
    np.testing.assert_allclose(c[1:, 0].real, -1 / GAMMA, rtol=1e-6)


def test_singular_without_fallback():
    # zero of 1 + gamma P at w = 0.9, a sample point of the rho0 = 0.9 circle; no retry below 0.99
    phi = np.zeros((6, 1), dtype=complex)
    phi[1] = -1 / (GAMMA * 0.9)
    with pytest.raises(SpectralError, match="vanishes"):
        kernel_spectrum(op_from(phi), DdgfConfig(rho0=0.9))


def test_fit_deterministic(synthetic_small):
    g = GridSpec.for_disc(nt=120)
    a = fit_ddgf(synthetic_small, g, DdgfConfig(nt_lag=30))
    b = fit_ddgf(synthetic_small, g, DdgfConfig(nt_lag=30))
    assert np.array_equal(a.g, b.g)
    assert a.g.shape == (31, len(a.r))
    assert a.extras["max_imag"] >= 0 and np.all(np.isfinite(a.g))
    assert a.g[1, 0] > 0


def test_fit_shape_defaults(synthetic_small):
    k = fit_ddgf(synthetic_small, GridSpec.for_disc(nt=50))
    assert len(k.lags) == 50   # nt_lag = nt - 1
    assert k.r[-1] >= math.hypot(10, 10)
