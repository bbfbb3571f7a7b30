import math

import numpy as np
import pytest

from matingtrees.graphs import build_mated_crt
from matingtrees.models import (
    MODELS, WindowGraph, mated_crt_graph, model_gamma, path_graph, window_graph,
)
from matingtrees.walks import sample_brownian


@pytest.mark.parametrize("model", MODELS)
def test_window_graph_shape(model):
    wg = window_graph(model, 40, 1)
    assert 0 <= wg.root < wg.nv
    assert len(wg.u) == len(wg.v) and len(wg.boundary) == wg.nv
    assert (wg.u >= 0).all() and (wg.u < wg.nv).all() and (wg.v < wg.nv).all()
    assert wg.boundary.any()


def test_window_graph_deterministic():
    a, b = window_graph("mullin", 200, 5), window_graph("mullin", 200, 5)
    assert a.nv == b.nv and np.array_equal(a.u, b.u) and np.array_equal(a.boundary, b.boundary)


def test_unknown_model():
    with pytest.raises(ValueError):
        window_graph("torus", 10, 0)
    with pytest.raises(ValueError):
        model_gamma("lattice_of_doom")


def test_compact_drops_isolated():
    wg = WindowGraph(5, [0, 3], [3, 4], [False, True, False, True, False], 2)
    c = wg.compact()
    assert c.nv == 4 and c.u.tolist() == [0, 2] and c.v.tolist() == [2, 3]
    assert c.root == 1 and c.boundary.tolist() == [False, False, True, False]


def test_model_gamma_values():
    assert model_gamma("mullin") == pytest.approx(math.sqrt(2))
    assert model_gamma("uipt") == pytest.approx(math.sqrt(8 / 3))
    assert model_gamma("bipolar") == pytest.approx(math.sqrt(4 / 3))
    assert model_gamma("schnyder") == pytest.approx(1.0)
    assert model_gamma("matedCRT", {"rho": 0.0}) == pytest.approx(math.sqrt(2))
    assert model_gamma("path") is None


def test_path_graph():
    wg = path_graph(8)
    assert wg.nv == 9 and wg.root == 4 and wg.boundary.nonzero()[0].tolist() == [0, 8]


def test_mated_crt_boundary_against_wider_window():
    # a finite wider window can only find a subset of the marked cells; every
    # marked cell it misses must be one whose later (or earlier) cells in the
    # wide window never drop below the window's own minimum
    n, N, mesh = 15, 600, 4
    exact_hits = 0
    for seed in range(30):
        wg = mated_crt_graph(0.0, n, seed, mesh)
        grid = sample_brownian(0.0, (-N - 1, N), mesh, seed)
        wide = build_mated_crt(grid)
        seen = np.zeros(2 * n + 1, bool)
        seen[0] = seen[-1] = True
        for a, b in zip(wide.ei, wide.ej):
            for x, y in ((a, b), (b, a)):
                if -n <= x <= n and not -n <= y <= n:
                    seen[x + n] = True
        assert not (seen & ~wg.boundary).any()
        for j in np.nonzero(wg.boundary & ~seen)[0]:
            for cm in grid.cell_minima:
                c = cm[N - n:N + n + 1]
                if c[j] <= c[j + 1:].min(initial=np.inf):
                    assert cm[N + n + 1:].min() > c[j + 1:].min(initial=np.inf)
                if c[j] <= c[:j].min(initial=np.inf):
                    assert cm[:N - n].min() > c[:j].min(initial=np.inf)
        exact_hits += bool(np.array_equal(seen, wg.boundary))
    assert exact_hits >= 10
