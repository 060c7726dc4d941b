import io
import json
import math
from datetime import date
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from sepp_green.evaluate import (
    SUMMARY_FRACTIONS, BacktestReport, HitCurve, Protocol, UndefinedHitRate, backtest, hit_rate_curve, n_cells,
    summarize)
from sepp_green.gridding import GridSpec
from sepp_green.ingest import EventCatalog
from sepp_green.methods import KdeMethod, build
from sepp_green.predict import IntensityMap

FOUR = GridSpec(dx=1.0, nx=2, ny=2, nt=1, origin=(0.0, 0.0), radius_km=10.0)


def crimes_in(cells, grid, rng=None):
    X, Y = grid.centers()
    xs = [X.ravel()[c] for c in cells]
    ys = [Y.ravel()[c] for c in cells]
    return EventCatalog.from_arrays(np.full(len(cells), 0.5), xs, ys)


def test_four_cell_example():
    imap = IntensityMap(np.array([[3.0, 1.0], [2.0, 0.0]]), FOUR, eligible=np.ones((2, 2), bool))
    curve = hit_rate_curve(imap, crimes_in([0, 0, 2, 3], FOUR), [0.25, 1.0])
    assert curve.hit_rate[0] == 0.5 and curve.pai[0] == 2.0
    assert curve.hit_rate[1] == 1.0 and curve.pai[1] == 1.0


def test_no_crimes_undefined():
    imap = IntensityMap(np.zeros((2, 2)), FOUR, eligible=np.ones((2, 2), bool))
    with pytest.raises(UndefinedHitRate):
        hit_rate_curve(imap, EventCatalog.empty(), [0.5])


def test_n_cells_rounding():
    assert n_cells(0.01, 1256) == 13   # 12.56 -> 13
    assert n_cells(0.125, 4) == 1       # 0.5 rounds up
    assert n_cells(0.0001, 40) == 1
    assert n_cells(1.0, 40) == 40


def test_ineligible_crimes_never_hit():
    g = GridSpec.for_disc(5.0, 0.25, nt=1)
    vals = np.ones((40, 40))
    imap = IntensityMap(vals, g)
    corner = EventCatalog.from_arrays([0.5, 0.5], [-4.9, 0.1], [-4.9, 0.1])
    curve = hit_rate_curve(imap, corner, [1.0])
    assert curve.hit_rate[0] == 0.5


grid_vals = arrays(float, (6, 6), elements=st.floats(-10, 10))
crime_cells = st.lists(st.integers(0, 35), min_size=1, max_size=30)
SIX = GridSpec(dx=1.0, nx=6, ny=6, nt=1, origin=(-3.0, -3.0), radius_km=100.0)


def test_monotone_on_1000_random_maps():
    rng = np.random.default_rng(99)
    g = GridSpec.for_disc(5.0, 0.25, nt=1)
    X, Y = g.centers()
    elig = g.eligible_mask()
    fr = np.linspace(0.01, 1.0, 100)
    for _ in range(1000):
        vals = rng.normal(size=(40, 40))
        if rng.random() < 0.3:
            vals = np.round(vals)   # many ties
        k = rng.integers(1, 40)
        idx = rng.choice(np.flatnonzero(elig), k)
        crimes = EventCatalog.from_arrays(np.zeros(k), X.ravel()[idx], Y.ravel()[idx])
        c = hit_rate_curve(IntensityMap(vals, g), crimes, fr)
        assert np.all(np.diff(c.hit_rate) >= 0)
        assert_pai_identity(c)
        assert c.hit_rate[-1] == 1.0


def assert_pai_identity(c):
    for h, a, pai, hit, area in zip(c.n_hits, c.n_selected, c.pai, c.hit_rate, c.area_fraction):
        exact_pai = Fraction(int(h) * c.n_eligible, c.n_crimes * int(a))
        assert exact_pai * Fraction(int(a), c.n_eligible) == Fraction(int(h), c.n_crimes)
        # each stored float is the correctly rounded value of its exact ratio
        assert pai == float(exact_pai) and hit == float(Fraction(int(h), c.n_crimes))
        assert area == float(Fraction(int(a), c.n_eligible))
        assert abs(pai * area - hit) <= 2 * np.spacing(max(hit, 1e-300))


@given(grid_vals, crime_cells, st.lists(st.floats(0.001, 1.0), min_size=1, max_size=20))
def test_pai_identity_exact(vals, cells, fractions):
    assert_pai_identity(hit_rate_curve(IntensityMap(vals, SIX), crimes_in(cells, SIX), fractions))


@given(grid_vals, crime_cells)
def test_rank_invariance_under_monotone_transform(vals, cells):
    crimes = crimes_in(cells, SIX)
    a = hit_rate_curve(IntensityMap(vals, SIX), crimes)
    moved = np.arctan(vals) * 3 + 7
    b = hit_rate_curve(IntensityMap(moved, SIX), crimes)
    # the transform is strictly increasing but rounding can merge close values
    if len(np.unique(moved)) == len(np.unique(vals)):
        assert np.array_equal(a.hit_rate, b.hit_rate)


@given(grid_vals, crime_cells)
def test_tie_determinism(vals, cells):
    crimes = crimes_in(cells, SIX)
    a = hit_rate_curve(IntensityMap(vals, SIX), crimes)
    b = hit_rate_curve(IntensityMap(vals.copy(), SIX), crimes)
    assert np.array_equal(a.hit_rate, b.hit_rate) and np.array_equal(a.pai, b.pai)


def test_ties_broken_by_index():
    imap = IntensityMap(np.zeros((2, 2)), FOUR, eligible=np.ones((2, 2), bool))
    assert imap.ranking().tolist() == [0, 1, 2, 3]


def test_uniform_map_random_baseline():
    g = GridSpec.for_disc(5.0, 0.25, nt=1)
    X, Y = g.centers()
    elig = np.flatnonzero(g.eligible_mask())
    rng = np.random.default_rng(5)
    hits = []
    for _ in range(400):
        idx = rng.choice(elig, 20)
        # a random strictly ordered map is a uniform random selection
        c = hit_rate_curve(IntensityMap(rng.random((40, 40)), g),
                           EventCatalog.from_arrays(np.zeros(20), X.ravel()[idx], Y.ravel()[idx]), [0.1])
        hits.append(c.pai[0])
    hits = np.array(hits)
    assert abs(hits.mean() - 1.0) < 4 * hits.std() / math.sqrt(len(hits))


# -- protocol and report ----------------------------------------------------------

def test_protocol_dates():
    cat = EventCatalog.from_arrays([0.5, 500.0], [0, 0], [0, 0], epoch=date(2010, 5, 5))
    p = Protocol(samples=2)
    rep = backtest(cat, KdeMethod(), p, GridSpec())
    s0, s1 = rep.samples
    assert (s0.train_start, s0.train_end, s0.target_first) == ("2010-05-05", "2011-06-08", "2011-06-09")
    assert (s1.train_start, s1.train_end, s1.target_first) == ("2010-05-07", "2011-06-10", "2011-06-11")
    assert s0.skipped == "no crimes on target day"


def test_protocol_week_ahead():
    p = Protocol(lead_days=7)
    assert p.target_days(0) == (406, 406)
    assert Protocol(lead_days=7, mode="aggregate").target_days(0) == (400, 406)
    assert p.span_days == 400 + 98 + 7


class OracleMethod:
    """Puts all mass on the cells that will see crimes."""

    name = "oracle"

    def __init__(self, future):
        self.future = future

    def forecast(self, train, grid, first_day, n_days, mode):
        from sepp_green.gridding import cells_of
        i, j, ok = cells_of(self.future.x, self.future.y, grid)
        v = np.zeros((grid.ny, grid.nx))
        v[j[ok], i[ok]] = 1.0
        return IntensityMap(v, grid)


def test_oracle_upper_bound():
    rng = np.random.default_rng(0)
    n = 30
    t = np.concatenate([rng.uniform(0, 10, n), [10.2, 10.5, 10.7]])
    x = np.concatenate([rng.uniform(-3, 3, n), [0.1, 1.3, -2.2]])
    y = np.concatenate([rng.uniform(-3, 3, n), [0.1, 0.4, 2.0]])
    cat = EventCatalog.from_arrays(t, x, y)
    p = Protocol(training_days=10, samples=1)
    grid = GridSpec()
    rep = backtest(cat, OracleMethod(cat.window(10, 11)), p, grid, fractions=np.arange(1, 101) / 100)
    hit, _ = rep.mean_curve("oracle")
    need = 3 / grid.n_eligible
    assert np.all(hit[rep.fractions >= need] == 1.0)


def _report(hit_rates, fractions=SUMMARY_FRACTIONS, pooling="sample_mean"):
    curves = []
    for h in hit_rates:
        a = np.asarray(fractions)
        curves.append(HitCurve(a, a, np.asarray(h), np.asarray(h) / a, 10, 100, (a * 100).astype(int)))
    return BacktestReport(Protocol(samples=len(curves), pooling=pooling), np.asarray(fractions), [], {"m": curves})


def test_summary_constant_hit():
    h, _ = summarize(_report([np.full(30, 0.3)]), "m")
    assert h == pytest.approx(30.0, abs=1e-12)


def test_summary_random_baseline():
    _, p = summarize(_report([SUMMARY_FRACTIONS]), "m")
    assert p == pytest.approx(1.0, abs=1e-12)


def test_pooling_equal_counts_agree():
    a = _report([np.full(30, 0.2), np.full(30, 0.4)])
    b = _report([np.full(30, 0.2), np.full(30, 0.4)], pooling="pooled")
    assert summarize(a, "m") == pytest.approx(summarize(b, "m"))


def test_skips_and_outputs(synthetic_small):
    p = Protocol(training_days=60, samples=4, shift_days=10, r_cut=0.4)
    methods = {m: build(m, r_cut=0.4) for m in ("phm", "kde")}
    rep = backtest(synthetic_small, methods, p, GridSpec())
    assert len(rep.samples) == 4
    js = json.loads(rep.to_json())
    assert set(js["methods"]) == {"phm", "kde"}
    buf = io.StringIO()
    rep.table_csv(buf, "synthetic")
    header, row = buf.getvalue().splitlines()
    assert header == "type,hit_pct_phm,hit_pct_kde,pai_phm,pai_kde" and row.startswith("synthetic,")
    buf = io.StringIO()
    rep.curves_csv(buf)
    assert len(buf.getvalue().splitlines()) == 1 + 2 * 30


def test_workers_do_not_change_results(synthetic_small):
    p = Protocol(training_days=60, samples=5, shift_days=7)
    methods = {"phm": build("phm", r_cut=0.4), "ddgf": build("ddgf", r_cut=0.4)}
    a = backtest(synthetic_small, methods, p, GridSpec())
    b = backtest(synthetic_small, methods, p, GridSpec(), workers=3)
    assert a.to_json() == b.to_json()


def test_invalid_protocol():
    with pytest.raises(ValueError):
        Protocol(mode="weekly")
    with pytest.raises(ValueError):
        Protocol(samples=0)
