import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from matingtrees.exponents import (
    ball_exponent_bounds, ball_profile, bound_verdict, chi_bounds, estimate_ball_exponent,
    estimate_diameter_exponent, fit_loglog, watabiki,
)
from matingtrees.models import WindowGraph, lattice_graph, path_graph

SQ2 = math.sqrt(2)


def test_watabiki_values():
    assert watabiki(math.sqrt(8 / 3)) == 4.0
    assert watabiki(2.0) == pytest.approx(2 + 2 * SQ2, abs=1e-12)
    assert watabiki(1e-6) == pytest.approx(2.0, abs=1e-9)


def test_watabiki_matches_unexpanded_formula():
    for g in np.linspace(0.05, 2, 40):
        direct = 1 + g * g / 4 + math.sqrt((4 + g * g) ** 2 + 16 * g * g) / 4
        assert watabiki(g) == pytest.approx(direct, rel=1e-14)


def test_ball_bounds_values():
    lo, hi = ball_exponent_bounds(SQ2)
    assert hi == 5.0
    assert abs(lo - (3 + math.sqrt(5)) / 2) < 1e-12
    assert ball_exponent_bounds(1.0)[1] == pytest.approx(2.5 + SQ2, abs=1e-12)


def test_chi_bounds_values():
    lo, hi = chi_bounds(SQ2)
    assert lo == pytest.approx(1 / 5, abs=1e-15) and hi == 0.5
    g = math.sqrt(8 / 3)
    assert chi_bounds(g)[0] == pytest.approx(max(1 / ball_exponent_bounds(g)[1], 1 / 4))
    assert chi_bounds(1e-4)[0] == pytest.approx(0.5, abs=1e-3)


def test_domain_errors():
    for f in (watabiki, ball_exponent_bounds, chi_bounds):
        with pytest.raises(ValueError):
            f(0.0)
        with pytest.raises(ValueError):
            f(2.1)


def test_bounds_order_on_grid():
    for g in np.linspace(0.2, 1.9, 100):
        lo, hi = ball_exponent_bounds(g)
        assert lo <= watabiki(g) <= hi
        assert chi_bounds(g)[0] <= 0.5


@given(st.floats(0.01, 2.0))
def test_bounds_order_property(g):
    lo, hi = ball_exponent_bounds(g)
    assert lo <= watabiki(g) + 1e-12 and watabiki(g) <= hi + 1e-12


def test_verdict_band():
    lo, hi = ball_exponent_bounds(SQ2)
    assert bound_verdict(lo - 0.49, SQ2) and not bound_verdict(lo - 0.51, SQ2)
    assert bound_verdict(hi + 0.49, SQ2) and not bound_verdict(hi + 0.51, SQ2)


def test_fit_loglog_exact_power():
    xs = [2, 4, 8, 16, 32]
    fit = fit_loglog(xs, [[3 * x ** 2.5] * 5 for x in xs], resamples=50)
    assert fit.slope == pytest.approx(2.5, abs=1e-12)
    assert fit.ci[0] == pytest.approx(2.5, abs=1e-9) and fit.r2 == pytest.approx(1.0)


def test_fit_loglog_drops_nan():
    xs = [2, 4, 8]
    fit = fit_loglog(xs, [[2, np.nan], [4, 4], [np.nan, np.nan]], resamples=20)
    assert fit.slope == pytest.approx(1.0)
    with pytest.raises(ValueError):
        fit_loglog(xs, [[np.nan], [1.0], [np.nan]])


def test_fit_is_deterministic():
    rng = np.random.default_rng(1)
    xs = [8, 16, 32, 64]
    samples = [rng.random(10) * x ** 2 for x in xs]
    a, b = fit_loglog(xs, samples), fit_loglog(xs, samples)
    assert a.as_dict() == b.as_dict()


def test_ball_profile_path_and_contamination():
    wg = path_graph(20)
    prof = ball_profile(wg, 12)
    # the root sits 10 steps from either end: radii up to 10 are clean
    assert prof[:11].tolist() == [2 * r + 1 for r in range(11)]
    assert np.isnan(prof[11:]).all()


def test_ball_profile_no_boundary():
    wg = WindowGraph(3, [0, 1], [1, 2], [False] * 3, 0)
    assert ball_profile(wg, 4).tolist() == [1, 2, 3, 3, 3]


def test_lattice_control():
    fit = estimate_ball_exponent("lattice", 70, [8, 12, 16, 24, 32, 48, 64], [0], resamples=50)
    assert abs(fit.slope - 2.0) <= 0.1
    assert fit.verdict is None and fit.discarded[64] == 0


def test_path_diameter_control():
    fit = estimate_diameter_exponent("path", [2 ** k for k in range(6, 12)], [0, 1], resamples=50)
    assert abs(fit.slope - 1.0) <= 0.05
    assert fit.quantiles[64] == [64.0, 64.0, 64.0]


def test_lattice_graph_shape():
    wg = lattice_graph(3)
    assert wg.nv == 49 and len(wg.u) == 2 * 7 * 6 and wg.boundary.sum() == 24


@pytest.mark.slow
def test_mullin_diameter_slope_and_transfer():
    ns = [2 ** k for k in range(8, 14)]
    m = estimate_diameter_exponent("mullin", ns, range(10), resamples=200)
    assert 0.15 < m.slope < 0.55 and m.verdict
    c = estimate_diameter_exponent("matedCRT", ns, range(10), {"rho": 0.0}, resamples=200)
    # joint confidence intervals overlap
    assert max(m.ci[0], c.ci[0]) <= min(m.ci[1], c.ci[1])
