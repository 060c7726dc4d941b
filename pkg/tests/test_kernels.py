import io
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sepp_green.kernels import (
    HISTOGRAM, LINEAR, TriggerKernel, exponential_rate, kernel_diagnostics, log_tail_fit, peak_lags)


def table_kernel(g0, r=(0.0, 0.5, 1.0)):
    lags = np.arange(len(g0), dtype=float)
    g = np.outer(g0, np.linspace(1, 0, len(r)))
    return TriggerKernel(g, lags, np.array(r), 1.0, 0.25, method="test")


def test_log_tail_fit_recovers_model():
    t = np.arange(1, 401, dtype=float)
    fit = log_tail_fit(t, -0.1 * np.log(0.01 * t))
    assert fit.a == pytest.approx(0.1, rel=1e-2)
    assert fit.b == pytest.approx(0.01, rel=1e-2)
    assert fit.r2 > 0.999 and not fit.degenerate


def test_log_tail_fit_constant_is_degenerate():
    fit = log_tail_fit(np.arange(1, 50), np.full(49, 0.3))
    assert fit.degenerate and fit.r2 == 0.0


def test_log_tail_fit_too_short():
    assert log_tail_fit([1, 2], [1, 0.5]) is None


def test_peaks_monotone():
    t = np.arange(0, 30, dtype=float)
    assert peak_lags(t, np.exp(-t)) == [1.0]


def test_peaks_interior():
    g = np.array([5, 1, 2, 3, 2, 1, 1.5, 1.4])
    assert peak_lags(np.arange(8), g) == [3.0, 6.0]


def test_diagnostics_window():
    t = np.arange(0, 401, dtype=float)
    g0 = np.where(t > 0, -0.1 * np.log(0.01 * np.maximum(t, 1)), 1.0)
    d = kernel_diagnostics(table_kernel(g0))
    assert d.fit.n_points == 351
    assert d.fit.a == pytest.approx(0.1, rel=1e-9) and d.fit.b == pytest.approx(0.01, rel=1e-9)
    with pytest.raises(ValueError):
        kernel_diagnostics(table_kernel(np.ones(5)))


def test_linear_lookup():
    k = table_kernel(np.array([4.0, 2.0, 1.0]))
    assert k.evaluate(1.0, 0.0) == 2.0
    assert k.evaluate(1.4, 0.25) == pytest.approx(1.5)   # lag rounds to 1, halfway in r
    assert k.evaluate(1.0, 1.01) == 0.0
    assert k.evaluate(3.0, 0.0) == 0.0
    assert k.at_origin()[1].tolist() == [4.0, 2.0, 1.0]


def test_histogram_lookup_and_integral():
    g = np.array([[1.0, 2.0], [3.0, 4.0]])
    k = TriggerKernel(g, np.array([0.0, 1.0]), np.array([0.0, 0.25]), 1.0, 0.25, interpolation=HISTOGRAM)
    assert k.evaluate(0.99, 0.24) == 1.0 and k.evaluate(1.0, 0.25) == 4.0 and k.evaluate(2.0, 0.0) == 0.0
    area = math.pi * np.array([0.0625, 0.25 - 0.0625])
    assert k.integral() == pytest.approx(((g * area).sum()))
    assert k.max_lag == 2.0 and k.max_r == 0.5


def test_cutoffs():
    k = table_kernel(np.ones(10)).with_cutoffs(t_cut=4, r_cut=0.5)
    assert k.evaluate(5.0, 0.0) == 0.0 and k.evaluate(4.0, 0.0) == 1.0
    assert k.evaluate(1.0, 0.6) == 0.0
    assert not k.g[5:].any()


@given(st.lists(st.floats(-5, 5), min_size=2, max_size=12), st.sampled_from([LINEAR, HISTOGRAM]))
def test_csv_roundtrip(vals, interp):
    g = np.array(vals).reshape(-1, 1) * np.array([[1.0, 0.5]])
    k = TriggerKernel(g, np.arange(len(vals)) * 1.0, np.array([0.0, 0.125]), 1.0, 0.25, 3.0, None, interp, "ddgf")
    buf = io.StringIO()
    k.to_csv(buf)
    back = TriggerKernel.from_csv(io.StringIO(buf.getvalue()))
    assert np.array_equal(back.g, k.g) and np.array_equal(back.lags, k.lags) and np.array_equal(back.r, k.r)
    assert (back.t_cut, back.r_cut, back.interpolation, back.method) == (3.0, None, interp, "ddgf")


def test_exponential_rate_exact():
    lags = np.arange(20.0)
    assert exponential_rate(lags, np.exp(-0.37 * lags)) == pytest.approx(0.37, rel=1e-12)
    with pytest.raises(ValueError):
        exponential_rate(lags, np.zeros(20))


def test_bad_shape():
    with pytest.raises(ValueError):
        TriggerKernel(np.zeros((2, 2)), np.arange(3.0), np.arange(2.0), 1, 1)
