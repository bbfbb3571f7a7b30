import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from matingtrees.graphs import (
    BIPOLAR, CONSECUTIVE, LMATCH, MULLIN, RMATCH, AdjGraph, boundary_vertices, build_h_graph,
    build_mated_crt, h_adjacent_bruteforce, h_match_records_bruteforce, mated_crt_records_bruteforce,
)
from matingtrees.walks import WalkPath, bridge_couple, make_distribution, sample_brownian, sample_walk

STEP_SETS = {
    MULLIN: [(1, 0), (-1, 0), (0, 1), (0, -1)],
    BIPOLAR: [(-1, 1), (0, 0), (1, -1), (2, 0), (0, -2), (1, 0), (0, -1)],
}


def test_example_extra_l_edge():
    # L on indices -1..3 = (0,1,2,1,0); R strictly decreasing so it gives no matches
    w = WalkPath(-1, np.array([0, 1, 2, 1, 0]), np.array([0, -1, -2, -3, -4]))
    g = build_h_graph(w, MULLIN)
    assert (0, 3) in g.pairs()
    assert g.multiplicity()[(0, 3)] == 1
    assert h_adjacent_bruteforce(w, 0, 3)


def test_constant_walk_only_consecutive():
    w = WalkPath(-6, np.zeros(12, np.int64), np.zeros(12, np.int64))
    for variant in (MULLIN, BIPOLAR):
        g = build_h_graph(w, variant)
        if variant == MULLIN:
            assert g.pairs() == {(i, i + 1) for i in range(-5, 5)}
    g = build_h_graph(w, MULLIN)
    assert boundary_vertices(g.restrict(-3, 3), g) == {-3, 3}


def test_window_too_short():
    w = WalkPath(0, np.zeros(2, np.int64), np.zeros(2, np.int64))
    with pytest.raises(ValueError):
        build_h_graph(w)
    w = WalkPath(0, np.zeros(4, np.int64), np.zeros(4, np.int64))
    with pytest.raises(ValueError):
        build_h_graph(w, "Other")


@settings(max_examples=150, deadline=None)
@given(st.sampled_from([MULLIN, BIPOLAR]), st.data())
def test_h_graph_equals_bruteforce(variant, data):
    steps = data.draw(st.lists(st.sampled_from(STEP_SETS[variant]), min_size=2, max_size=40))
    lo = data.draw(st.integers(-30, 0))
    L = np.concatenate([[0], np.cumsum([s[0] for s in steps])])
    R = np.concatenate([[0], np.cumsum([s[1] for s in steps])])
    w = WalkPath(lo, L, R)
    g = build_h_graph(w, variant)
    assert sorted(g.records()) == h_match_records_bruteforce(w, variant)
    # removing matches leaves exactly the path
    assert g.without_matches().pairs() == {(i, i + 1) for i in range(g.lo, g.hi)}


@pytest.mark.parametrize("variant,model", [(MULLIN, "MullinSimple"), (BIPOLAR, "BipolarUniform"),
                                           (MULLIN, "Kreweras")])
def test_h_graph_bruteforce_random_windows(variant, model):
    d = make_distribution(model)
    for s in range(40):
        n = 5 + s
        w = sample_walk(d, (-n - 1, n), s)
        assert sorted(build_h_graph(w, variant).records()) == h_match_records_bruteforce(w, variant)


def test_mullin_interior_degree_three():
    # each triangle has three sides: an index whose neighbours in a much wider
    # window all lie inside [-n, n] carries exactly 3 edge records (a third side
    # shared with t(i+1) gives a double edge, so distinct neighbours may be 2)
    n = 300
    wide = sample_walk(make_distribution("MullinSimple"), (-20001, 20000), 2)
    full = build_h_graph(wide, MULLIN)
    g = build_h_graph(wide.restrict(-n - 1, n), MULLIN)
    def records(graph):
        c = np.bincount(np.concatenate([graph.ei, graph.ej]) - graph.lo)
        return {graph.lo + k: int(v) for k, v in enumerate(c)}
    rec_full, rec_win = records(full), records(g)
    assert max(rec_win.values()) <= 3
    checked = 0
    for i in range(-n + 1, n):
        if all(-n <= j <= n for j in full.neighbors(i)):
            assert rec_full[i] == 3 and rec_win[i] == 3
            checked += 1
    assert checked > n


@settings(max_examples=60, deadline=None)
@given(st.floats(-0.9, 0.9), st.integers(2, 12), st.integers(0, 2 ** 32))
def test_mated_crt_bruteforce(rho, n, seed):
    g = sample_brownian(rho, (-n - 1, n), 4, seed)
    G = build_mated_crt(g)
    assert sorted(G.records()) == mated_crt_records_bruteforce(g)


def test_mated_crt_window_and_connectivity():
    g = sample_brownian(0.5, (-1001, 1000), 8, 1)
    G = build_mated_crt(g)
    assert all(G.has_edge(i, i + 1) for i in range(G.lo, G.hi))
    assert np.all(G.distances_from(0) >= 0)
    W = build_mated_crt(g, (-10, 10))
    assert W.lo == -10 and W.hi == 10
    with pytest.raises(ValueError):
        build_mated_crt(g, (-5000, 10))


def test_mated_crt_of_constant_bridge():
    w = WalkPath(-6, np.zeros(13, np.int64), np.zeros(13, np.int64), make_distribution("MullinSimple"))
    G = build_mated_crt(bridge_couple(w, 8, 3))
    assert all(G.has_edge(i, i + 1) for i in range(G.lo, G.hi))


def test_mated_crt_ties_count_as_adjacent():
    # hand-made grid on [0, 4] with mesh 2; L cell minima for cells 1..4 are (0, 0, 1, 0)
    from matingtrees.walks import BrownianGrid
    mesh = 2
    Lg = np.array([0, 0, 0, 1, 1, 1, 1, 0, 0], float)
    Rg = -np.arange(9, dtype=float)
    g = BrownianGrid(0, 4, mesh, Lg, Rg, 0.0)
    ml, _ = g.cell_minima
    assert ml.tolist() == [0, 0, 1, 0]
    G = build_mated_crt(g)
    assert (2, 4) in G.pairs()  # cells 2 and 4 have minima 0 and 0, cell 3 has 1
    assert (1, 4) in G.pairs()  # 0 v 0 <= min(0, 1)


def test_boundary_vertices_random_window():
    w = sample_walk(make_distribution("MullinSimple"), (-301, 300), 4)
    full = build_h_graph(w)
    win = full.restrict(-50, 50)
    b = boundary_vertices(win, full)
    assert -50 in b and 50 in b
    with pytest.raises(ValueError):
        boundary_vertices(full, win)


def test_path_boundary():
    g = AdjGraph(0, 10, np.arange(10), np.arange(1, 11), np.zeros(10, np.int8))
    assert boundary_vertices(g.restrict(3, 7), g) == {3, 7}


def test_adjgraph_rejects_bad_edges():
    with pytest.raises(ValueError):
        AdjGraph(0, 3, [1], [1], [CONSECUTIVE])
    with pytest.raises(ValueError):
        AdjGraph(0, 3, [1], [5], [LMATCH])


def test_export_roundtrip():
    w = sample_walk(make_distribution("Kreweras"), (-31, 30), 8)
    g = build_h_graph(w)
    g2 = AdjGraph.from_bytes(g.to_bytes())
    assert g2.records() == g.records()
    rows = g.to_csv().strip().splitlines()
    assert rows[0] == "i,j,provenance,multiplicity"
    assert len(rows) - 1 == len(g.pairs())
    assert any("L-match" in r for r in rows) and any("R-match" in r for r in rows)


def test_mesh_refinement_keeps_consecutive_edges():
    d = make_distribution("MullinSimple")
    w = sample_walk(d, (-101, 100), 6)
    coarse = build_mated_crt(bridge_couple(w, 4, 6))
    fine = build_mated_crt(bridge_couple(w, 8, 6))
    cons = lambda g: {(i, j) for i, j, p in g.records() if p == CONSECUTIVE}
    assert cons(coarse) <= cons(fine)
    assert RMATCH in set(fine.prov.tolist())
