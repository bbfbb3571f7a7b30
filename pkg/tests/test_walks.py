import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from matingtrees.walks import (
    BrownianGrid, WalkPath, bridge_couple, correlation_from_gamma, from_bytes, gamma_from_correlation,
    is_bipolar_step, make_distribution, sample_brownian, sample_walk, sup_discrepancy, walk_from_steps,
)

BUILTIN = ("MullinSimple", "Kreweras", "BipolarUniform", "BipolarTriangulation")


def brute_mass(d, kmax=80):
    return sum(d.pmf(a) for a in d.support(kmax))


@pytest.mark.parametrize("model", BUILTIN + ("GesselOptional",))
def test_total_mass_closed_form(model):
    d = make_distribution(model)
    assert abs(d.total_mass() - 1.0) < 1e-12
    # independent check: truncated sum of the pmf converges to the same value
    assert abs(brute_mass(d) - 1.0) < 1e-12


def test_bipolar_uniform_pmf_values():
    d = make_distribution("BipolarUniform")
    assert d.pmf((-1, 1)) == 0.5
    assert d.pmf((0, 0)) == 2.0 ** -3
    assert d.pmf((2, -3)) == 2.0 ** -8
    assert d.pmf((1, 1)) == 0.0


def test_bipolar_triangulation_pmf_values():
    d = make_distribution("BipolarTriangulation")
    assert d.pmf((1, 0)) == 0.25
    assert d.pmf((1, -2)) == 2.0 ** -4
    assert d.pmf((0, -1)) == 0.0


def _series_moments(d, kmax=120):
    atoms = d.support(kmax)
    p = np.array([d.pmf(a) for a in atoms])
    x = np.array(atoms, float)
    mean = p @ x
    c = (x - mean).T @ ((x - mean) * p[:, None])
    return mean, c


@pytest.mark.parametrize("model,rho", [
    ("MullinSimple", 0.0),
    ("Kreweras", 0.5),
    ("BipolarUniform", -0.5),
    ("BipolarTriangulation", -1 / math.sqrt(2)),
])
def test_correlation_matches_series_and_gamma(model, rho):
    d = make_distribution(model)
    assert abs(d.correlation() - rho) < 1e-12
    mean, c = _series_moments(d)
    assert np.max(np.abs(mean)) < 1e-12
    assert abs(c[0, 1] / math.sqrt(c[0, 0] * c[1, 1]) - rho) < 1e-12
    g = gamma_from_correlation(d.correlation())
    assert abs(-math.cos(math.pi * g * g / 4) - rho) < 1e-12


def test_kreweras_variances():
    _, c = make_distribution("Kreweras").moments()
    assert np.allclose(c, [[2 / 3, 1 / 3], [1 / 3, 2 / 3]], atol=1e-15)


def test_triangulation_variances():
    _, c = make_distribution("BipolarTriangulation").moments()
    assert np.allclose(c, [[1, -1], [-1, 2]], atol=1e-15)


def test_gamma_examples():
    assert abs(gamma_from_correlation(0.0) - math.sqrt(2)) < 1e-12
    assert abs(gamma_from_correlation(0.5) - math.sqrt(8 / 3)) < 1e-12
    assert abs(gamma_from_correlation(-0.5) - math.sqrt(4 / 3)) < 1e-12


@pytest.mark.parametrize("rho", np.linspace(-0.99, 0.99, 99))
def test_gamma_roundtrip_grid(rho):
    assert abs(correlation_from_gamma(gamma_from_correlation(rho)) - rho) < 1e-12


@pytest.mark.parametrize("bad", [-1.0, 1.0, 1.5])
def test_gamma_domain(bad):
    with pytest.raises(ValueError):
        gamma_from_correlation(bad)


def test_gamma_inverse_domain():
    with pytest.raises(ValueError):
        correlation_from_gamma(2.0)


def test_custom_table_accepts_valid_law():
    # mean (-1/2 + 1/4 + 1/4, 1/2 - 2/4) = 0; Var L = 1, Var R = 3/2, Cov = -1
    d = make_distribution("CustomTable", {(-1, 1): 0.5, (1, 0): 0.25, (1, -2): 0.25})
    assert abs(d.correlation() + 1 / math.sqrt(1.5)) < 1e-12
    assert d.total_mass() == 1.0
    # perfectly anticorrelated law is rejected
    with pytest.raises(ValueError, match="correlation"):
        make_distribution("CustomTable", {(-1, 1): 0.5, (1, -1): 0.5})


def test_custom_table_rejections():
    with pytest.raises(ValueError, match="outside"):
        make_distribution("CustomTable", {(1, 1): 0.5, (-1, -1): 0.5})
    with pytest.raises(ValueError, match="sum"):
        make_distribution("CustomTable", {(-1, 1): 0.5, (1, -1): 0.4})
    with pytest.raises(ValueError, match="mean"):
        make_distribution("CustomTable", {(-1, 1): 0.5, (0, 0): 0.5})
    with pytest.raises(ValueError):
        make_distribution("CustomTable")


def test_unknown_model():
    with pytest.raises(ValueError):
        make_distribution("Nope")


def test_bipolar_support_in_step_set():
    for name in ("BipolarUniform", "BipolarTriangulation"):
        assert all(is_bipolar_step(*a) for a in make_distribution(name).support(10))


def test_sample_walk_support_and_anchor():
    d = make_distribution("MullinSimple")
    w = sample_walk(d, (-2, 2), 11)
    dl, dr = w.steps()
    assert len(dl) == 4
    assert set(zip(dl.tolist(), dr.tolist())) <= {(1, 0), (-1, 0), (0, 1), (0, -1)}
    assert w.value(0) == (0, 0)


def test_sample_walk_deterministic_and_nested():
    d = make_distribution("BipolarUniform")
    a = sample_walk(d, (-50, 60), 5)
    assert a == sample_walk(d, (-50, 60), 5)
    assert a != sample_walk(d, (-50, 60), 6)
    big = sample_walk(d, (-200, 300), 5)
    assert big.restrict(-50, 60) == a


def test_sample_walk_window_not_containing_zero():
    d = make_distribution("Kreweras")
    w = sample_walk(d, (3, 9), 2)
    assert (w.lo, w.hi) == (3, 9)
    assert w == sample_walk(d, (-1, 12), 2).restrict(3, 9)


@pytest.mark.parametrize("model", BUILTIN)
def test_step_frequencies_chi_square(model):
    d = make_distribution(model)
    w = sample_walk(d, (-10 ** 4, 10 ** 4), 1)
    dl, dr = w.steps()
    pairs, counts = np.unique(np.stack([dl, dr], 1), axis=0, return_counts=True)
    n = len(dl)
    obs = dict(zip(map(tuple, pairs.tolist()), counts.tolist()))
    # pool atoms with expected count < 5 into one cell
    chi, cells, pooled_e, pooled_o = 0.0, 0, 0.0, 0
    for a in d.support(40):
        e = n * d.pmf(a)
        o = obs.pop(a, 0)
        if e >= 5:
            chi += (o - e) ** 2 / e
            cells += 1
        else:
            pooled_e += e
            pooled_o += o
    assert not obs  # nothing outside the support
    pooled_e += n * max(0.0, 1 - sum(d.pmf(a) for a in d.support(40)))
    if pooled_e > 0:
        chi += (pooled_o - pooled_e) ** 2 / pooled_e
        cells += 1
    dof = cells - 1
    # 99.9% quantile via Wilson-Hilferty
    z = 3.09
    q = dof * (1 - 2 / (9 * dof) + z * math.sqrt(2 / (9 * dof))) ** 3
    assert chi < q


@pytest.mark.parametrize("model", BUILTIN)
def test_moments_monte_carlo(model):
    d = make_distribution(model)
    dl, dr = d.sample_steps(123, 1, 10 ** 5)
    x = np.stack([dl, dr], 1).astype(float)
    mean, c = d.moments()
    n = len(x)
    for k in range(2):
        assert abs(x[:, k].mean() - mean[k]) < 3 * math.sqrt(c[k, k] / n) + 1e-12
    # covariance: standard error from the fourth moments of the product
    prod = (x[:, 0] - mean[0]) * (x[:, 1] - mean[1])
    # MullinSimple steps are axis-aligned, so the product is identically 0
    assert abs(prod.mean() - c[0, 1]) <= 3 * prod.std() / math.sqrt(n)


def test_walk_from_steps():
    w = walk_from_steps([(1, 0), (0, 1), (-1, -1)], lo=-1, start=(2, 3))
    assert w.lo == -1 and w.hi == 2
    assert w.L.tolist() == [2, 3, 3, 2]
    assert w.R.tolist() == [3, 3, 4, 3]


def test_walkpath_errors():
    with pytest.raises(ValueError):
        WalkPath(0, [0, 1], [0])
    w = walk_from_steps([(1, 0)] * 3)
    with pytest.raises(ValueError):
        w.restrict(-1, 2)


def test_walk_serialization_roundtrip():
    w = sample_walk(make_distribution("BipolarUniform"), (-30, 40), 9)
    data = w.to_bytes()
    assert data[:4] == b"MTW1"
    assert from_bytes(data) == w
    assert WalkPath.from_json(w.to_json()) == w
    with pytest.raises(ValueError):
        from_bytes(b"XXXX" + data[4:])


def test_grid_serialization_roundtrip():
    g = sample_brownian(0.3, (-3, 4), 8, 2)
    g2 = from_bytes(g.to_bytes())
    assert np.array_equal(g.L, g2.L) and np.array_equal(g.R, g2.R)
    assert (g2.lo, g2.hi, g2.mesh, g2.rho) == (g.lo, g.hi, g.mesh, g.rho)
    g3 = BrownianGrid.from_json(g.to_json())
    assert np.array_equal(g.L, g3.L)


def test_brownian_moments_at_time_one():
    l1, r1 = [], []
    for s in range(10 ** 4):
        g = sample_brownian(0.0, (0, 1), 2, s)
        l1.append(g.L[-1])
        r1.append(g.R[-1])
    l1, r1 = np.array(l1), np.array(r1)
    assert abs(l1.var() - 1) < 0.05
    assert abs(np.mean(l1 * r1)) < 0.05


def test_brownian_correlated_cov():
    vals = np.array([sample_brownian(0.5, (0, 1), 2, s).at_integers() for s in range(10 ** 4)])
    l1, r1 = vals[:, 0, 1], vals[:, 1, 1]
    assert abs(np.mean(l1 * r1) - 0.5) < 0.05


def test_brownian_errors():
    with pytest.raises(ValueError):
        sample_brownian(1.0, (-1, 1), 4, 0)
    with pytest.raises(ValueError):
        sample_brownian(0.0, (-1, 1), 6, 0)
    with pytest.raises(ValueError):
        sample_brownian(0.0, (1, 3), 4, 0)


def test_cell_minima_below_endpoints():
    g = sample_brownian(-0.4, (-20, 20), 16, 4)
    gl, gr = g.at_integers()
    ml, mr = g.cell_minima
    assert np.all(ml <= np.minimum(gl[:-1], gl[1:]))
    assert np.all(mr <= np.minimum(gr[:-1], gr[1:]))


def test_bridge_couple_pinned():
    d = make_distribution("Kreweras")
    w = sample_walk(d, (-100, 100), 3)
    g = bridge_couple(w, 8, 3)
    assert sup_discrepancy(w, g) == 0.0
    sl, sr = d.scale()
    gl, gr = g.at_integers()
    assert np.array_equal(gl, w.L / sl) and np.array_equal(gr, w.R / sr)


def test_bridge_of_constant_walk_has_nonpositive_minima():
    w = WalkPath(-5, np.zeros(11, np.int64), np.zeros(11, np.int64), make_distribution("MullinSimple"))
    g = bridge_couple(w, 8, 0)
    ml, mr = g.cell_minima
    assert np.all(ml <= 0) and np.all(mr <= 0)


def test_bridge_cells_independent_of_window():
    d = make_distribution("MullinSimple")
    w = sample_walk(d, (-40, 40), 1)
    a = bridge_couple(w, 8, 7)
    b = bridge_couple(w.restrict(-10, 10), 8, 7)
    off = (-10 - w.lo) * 8
    assert np.array_equal(a.L[off:off + len(b.L)], b.L)


def test_bridge_maximum_law():
    # E[max of a standard Brownian bridge on [0,1]] = sqrt(pi/8); the cell
    # maximum above the chord of a pinned bridge has that law in each coordinate
    d = make_distribution("MullinSimple")
    w = WalkPath(0, np.zeros(1001, np.int64), np.zeros(1001, np.int64), d)
    g = bridge_couple(w, 256, 5)
    ml, _ = g.cell_maxima
    # the grid maximum underestimates slightly; 10% tolerance as stated
    assert abs(ml.mean() - math.sqrt(math.pi / 8)) < 0.1 * math.sqrt(math.pi / 8)


def test_sup_discrepancy_examples():
    w = walk_from_steps([(1, 0), (0, 1)], lo=-1)
    w2 = WalkPath(-1, w.L.copy(), w.R.copy())
    w2.L[1] += 1
    assert sup_discrepancy(w, w2) == 1.0
    with pytest.raises(ValueError):
        sup_discrepancy(w, w.restrict(-1, 0))


def test_independent_discrepancy_grows_like_sqrt_n():
    d = make_distribution("MullinSimple")
    ns = [250, 1000, 4000]
    med = []
    for n in ns:
        vals = []
        for s in range(20):
            w = sample_walk(d, (-n, n), s)
            g = sample_brownian(0.0, (-n, n), 2, 1000 + s)
            vals.append(sup_discrepancy(w, g))
        med.append(np.median(vals))
    slope = np.polyfit(np.log(ns), np.log(med), 1)[0]
    assert abs(slope - 0.5) < 0.1


@settings(max_examples=50, deadline=None)
@given(st.integers(-40, 0), st.integers(0, 40), st.integers(0, 2 ** 63 - 1))
def test_sampling_pure(a, b, seed):
    d = make_distribution("BipolarTriangulation")
    if a == b:
        b += 1
    w = sample_walk(d, (a, b), seed)
    assert w == sample_walk(d, (a, b), seed)
    dl, dr = w.steps()
    assert all(is_bipolar_step(i, j) for i, j in zip(dl.tolist(), dr.tolist()))
