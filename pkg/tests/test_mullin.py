from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from matingtrees import mullin
from matingtrees.graphs import MULLIN, build_h_graph
from matingtrees.maps import validate
from matingtrees.walks import WalkPath, make_distribution, sample_walk

MOVES = [(1, 0), (-1, 0), (0, 1), (0, -1)]


def anchored(steps, lo):
    """Walk on [lo, lo + len(steps)] with value (0, 0) at index 0."""
    steps = np.asarray(steps, np.int64).reshape(-1, 2)
    L = np.concatenate([[0], np.cumsum(steps[:, 0])])
    R = np.concatenate([[0], np.cumsum(steps[:, 1])])
    return WalkPath(lo, L - L[-lo], R - R[-lo])


def nonq_edge(st_, k):
    m = st_.map
    tags = m.deco["edge_tag"]
    sides = [h // 2 for h in st_.tri_half[k] if tags[h // 2] != mullin.Q]
    assert len(sides) == 1
    return sides[0], tags[sides[0]]


def test_single_up_step():
    w = anchored([(1, 0)], -1)
    m, s = mullin.sew_mullin(w)
    assert validate(m)
    assert len(s.tri_half) == 1
    assert nonq_edge(s, 0)[1] == mullin.T
    w = anchored([(0, 1)], -1)
    _, s = mullin.sew_mullin(w)
    assert nonq_edge(s, 0)[1] == mullin.TSTAR


def test_up_down_glues_along_t_edge():
    w = anchored([(1, 0), (-1, 0)], -1)
    m, s = mullin.sew_mullin(w)
    assert nonq_edge(s, 0)[0] == nonq_edge(s, 1)[0]
    assert mullin.extract_walk(m) == w
    t = mullin.triangle_graph(s)
    assert t.multiplicity()[(0, 1)] == 2  # a Q side and the T side


def test_bad_step():
    with pytest.raises(mullin.SewingError):
        mullin.sew_mullin(anchored([(1, 1)], -1))


@settings(max_examples=200, deadline=None)
@given(st.lists(st.sampled_from(MOVES), min_size=1, max_size=60), st.data())
def test_roundtrip_property(steps, data):
    lo = -data.draw(st.integers(1, len(steps)))
    w = anchored(steps, lo)
    m, s = mullin.sew_mullin(w)
    assert validate(m)
    assert m.nf == len(steps) + 1
    assert mullin.extract_walk(m) == w
    assert mullin.verify_prop_tri(w)


def test_roundtrip_random_windows():
    d = make_distribution("MullinSimple")
    for seed in range(60):
        n = 1 + (7 * seed) % 100
        w = sample_walk(d, (-n - 1, n), seed)
        m, _ = mullin.sew_mullin(w)
        assert mullin.extract_walk(m) == w


def test_prop_tri_examples():
    assert mullin.verify_prop_tri(anchored([(1, 0), (0, 1)], -1))
    assert mullin.verify_prop_tri(anchored([(1, 0)] * 40 + [(0, -1)] * 40, -40))
    assert mullin.verify_prop_tri(anchored([(-1, 0)] * 30 + [(0, 1)] * 30, -1))


def test_consecutive_triangles_share_q_edge():
    w = sample_walk(make_distribution("MullinSimple"), (-51, 50), 3)
    _, s = mullin.sew_mullin(w)
    t = mullin.triangle_graph(s)
    assert all(t.has_edge(i, i + 1) for i in range(t.lo, t.hi))
    assert max(t.degree(i) for i in t.vertices()) <= 3


def test_tree_sides_follow_contour_matching():
    # independent oracle: match +1/-1 steps of each coordinate as parentheses;
    # matched triangles must share their tree side, and its tag is T for L
    w = sample_walk(make_distribution("MullinSimple"), (-121, 120), 8)
    _, s = mullin.sew_mullin(w)
    dl, dr = w.steps()
    for coord, tag in ((dl, mullin.T), (dr, mullin.TSTAR)):
        stack = []
        for k, x in enumerate(coord.tolist()):
            if x == 1:
                stack.append(k)
            elif x == -1 and stack:
                j = stack.pop()
                e1, t1 = nonq_edge(s, j)
                e2, t2 = nonq_edge(s, k)
                assert e1 == e2 and t1 == t2 == tag


def test_phi_psi_conventions():
    d = make_distribution("MullinSimple")
    for seed in range(30):
        n = 2 + seed
        w = sample_walk(d, (-n - 1, n), seed)
        _, s = mullin.sew_mullin(w)
        im = mullin.mullin_phi_psi(s)
        assert im.root_conditions()
        for i, v in im.psi.items():
            assert abs(im.phi[v]) <= abs(i)


def test_phi_tie_goes_positive():
    # phi(v) is the smallest |j| with v on t(j); when both j and -j qualify, +j wins
    w = anchored([(0, 1), (1, 0), (-1, 0)], -1)
    _, s = mullin.sew_mullin(w)
    im = mullin.mullin_phi_psi(s)
    for v, i in im.phi.items():
        js = [s.first + k for k, tri in enumerate(s.tri_half)
              if v in {s.map.tail_label(h) for h in tri}]
        best = min(abs(j) for j in js)
        assert abs(i) == best
        if best in js and -best in js:
            assert i == best


def test_fast_primal_matches_map():
    d = make_distribution("MullinSimple")
    for seed in range(80):
        n = 1 + seed % 40
        w = sample_walk(d, (-n - 1, n), seed)
        _, s = mullin.sew_mullin(w)
        verts, pairs, bnd = mullin.primal_graph(s)
        nv, u, v, fb, root = mullin.fast_primal_graph(w)
        assert nv == len(verts) and len(u) == len(pairs) and int(fb.sum()) == len(bnd)
        cnt = Counter(x for p in pairs for x in p)
        deg_slow = sorted(cnt[y] for y in verts)
        deg_fast = sorted(np.bincount(np.concatenate([u, v]).astype(np.int64), minlength=nv).tolist())
        assert deg_slow == deg_fast


def test_h_graph_matches_triangle_graph_records():
    w = sample_walk(make_distribution("MullinSimple"), (-81, 80), 12)
    h = build_h_graph(w, MULLIN)
    _, s = mullin.sew_mullin(w)
    t = mullin.triangle_graph(s)
    assert h.pairs() == t.pairs()


def test_triangle_incidence_tail():
    # fraction of primal vertices on more than k triangles decays geometrically
    w = sample_walk(make_distribution("MullinSimple"), (-20001, 20000), 1)
    _, s = mullin.sew_mullin(w)
    m = s.map
    vt = np.asarray(m.deco["vertex_type"])
    counts = {}
    for tri in s.tri_half:
        for h in tri:
            v = m.tail_label(h)
            if vt[v] == mullin.PRIMAL:
                counts[v] = counts.get(v, 0) + 1
    c = np.array(list(counts.values()))
    ks = np.arange(10, 30)
    frac = np.array([(c > k).mean() for k in ks])
    keep = frac > 0
    rate = np.exp(np.polyfit(ks[keep], np.log(frac[keep]), 1)[0])
    assert rate <= 0.9
