"""Graph metrics and the comparison between structure graphs and the mated-CRT map.

The event E^n is checked on a coupled pair (integer walk, Brownian grid) on
the window [-n, n].  Both coordinates are measured in units of the step
standard deviation, so log n thresholds are comparable with the grid.
"""
import math

import numpy as np

from .graphs import AdjGraph, CONSECUTIVE, LMATCH, RMATCH, MULLIN, BIPOLAR, build_h_graph, \
    build_mated_crt, csr_from_pairs, _bfs
from .walks import sup_discrepancy
from ._kernels import kernel


class GraphError(ValueError):
    pass


class Graph:
    """Undirected graph on arbitrary hashable labels, stored as CSR over 0..nv-1."""

    def __init__(self, labels, u, v):
        self.labels = list(labels)
        self.index = {x: k for k, x in enumerate(self.labels)}
        self.nv = len(self.labels)
        self.u = np.asarray(u, np.int64)
        self.v = np.asarray(v, np.int64)
        self.indptr, self.indices = csr_from_pairs(self.nv, self.u, self.v)

    @classmethod
    def from_pairs(cls, vertices, pairs):
        labels = list(vertices)
        idx = {x: k for k, x in enumerate(labels)}
        pairs = [(a, b) for a, b in pairs if a != b]
        u = [idx[a] for a, _ in pairs]
        v = [idx[b] for _, b in pairs]
        return cls(labels, u, v)

    @classmethod
    def from_adj(cls, g):
        lo = g.lo
        return cls(range(g.lo, g.hi + 1), g.ei - lo, g.ej - lo)

    @classmethod
    def from_arrays(cls, nv, u, v):
        return cls(range(nv), u, v)

    def distances(self, source, maxr=-1):
        """Distance array (internal order, -1 = unreached)."""
        return _bfs(self.indptr, self.indices, int(self.index[source]), int(maxr))

    def distance(self, a, b):
        d = self.distances(a)[self.index[b]]
        return None if d < 0 else int(d)

    def edge_keys(self):
        a = np.minimum(self.u, self.v)
        b = np.maximum(self.u, self.v)
        return np.unique(a * self.nv + b)

    def has_edges(self, a, b):
        """Vectorized adjacency test on internal ids."""
        keys = self.edge_keys()
        x = np.minimum(a, b) * self.nv + np.maximum(a, b)
        return np.isin(x, keys)


def as_graph(g):
    if isinstance(g, Graph):
        return g
    if isinstance(g, AdjGraph):
        return Graph.from_adj(g)
    verts, pairs = g
    return Graph.from_pairs(verts, pairs)


def ball(graph, source, r):
    """(vertex labels of B_r(source), volume)."""
    g = as_graph(graph)
    if source not in g.index:
        raise KeyError(f"source {source!r} not in graph")
    d = g.distances(source, r)
    inside = np.flatnonzero(d >= 0)
    return {g.labels[k] for k in inside.tolist()}, int(len(inside))


class Diameter(int):
    """Integer diameter; ``exact`` is False for sampled lower bounds."""

    def __new__(cls, value, exact):
        obj = super().__new__(cls, value)
        obj.exact = exact
        return obj


@kernel
def _eccentricities(indptr, indices):
    n = indptr.shape[0] - 1
    ecc = np.zeros(n, np.int64)
    dist = np.empty(n, np.int64)
    queue = np.empty(n, np.int64)
    for s in range(n):
        dist[:] = -1
        dist[s] = 0
        queue[0] = s
        head = 0
        tail = 1
        while head < tail:
            x = queue[head]
            head += 1
            for k in range(indptr[x], indptr[x + 1]):
                y = indices[k]
                if dist[y] < 0:
                    dist[y] = dist[x] + 1
                    queue[tail] = y
                    tail += 1
        ecc[s] = dist[queue[tail - 1]]
    return ecc


def components(graph):
    g = as_graph(graph)
    seen = np.full(g.nv, -1, np.int64)
    sizes = []
    for s in range(g.nv):
        if seen[s] >= 0:
            continue
        d = _bfs(g.indptr, g.indices, s, -1)
        seen[d >= 0] = len(sizes)
        sizes.append(int((d >= 0).sum()))
    return seen, sizes


def _double_sweep(g, start):
    d = _bfs(g.indptr, g.indices, start, -1)
    far = int(np.argmax(d))
    d2 = _bfs(g.indptr, g.indices, far, -1)
    return int(d2.max()), int(np.argmax(d2))


def diameter(graph, exact_limit=10 ** 4, samples=32, seed=0):
    """Exact diameter up to ``exact_limit`` vertices, else a sampled lower bound."""
    g = as_graph(graph)
    if g.nv == 0:
        raise GraphError("empty graph")
    d0 = _bfs(g.indptr, g.indices, 0, -1)
    if (d0 < 0).any():
        _, sizes = components(g)
        raise GraphError(f"graph is disconnected: component sizes {sorted(sizes, reverse=True)[:10]}")
    sweep, _ = _double_sweep(g, 0)
    if g.nv <= exact_limit:
        ecc = _eccentricities(g.indptr, g.indices)
        value = int(ecc.max())
        if sweep > value:
            raise GraphError("double sweep exceeded the exact diameter")
        return Diameter(value, True)
    rng = np.random.default_rng(seed)
    best = sweep
    for s in rng.integers(0, g.nv, size=samples).tolist():
        best = max(best, _double_sweep(g, s)[0])
    return Diameter(best, False)


# -- rough isometries ----------------------------------------------------------------

class RoughIsometryResult:
    def __init__(self, ok, lower_witness, upper_witness, density, pairs_checked, exhaustive):
        self.ok = ok
        self.lower_witness = lower_witness
        self.upper_witness = upper_witness
        self.density = density
        self.pairs_checked = pairs_checked
        self.exhaustive = exhaustive

    def __bool__(self):
        return bool(self.ok)

    def __repr__(self):
        return (f"RoughIsometryResult(ok={self.ok}, lower={self.lower_witness}, "
                f"upper={self.upper_witness}, density={self.density}, pairs={self.pairs_checked})")


def rough_isometry_check(f, G1, G2, a, b, c, max_exhaustive=300, sources=40, seed=0):
    """Check a^-1 d1 - b <= d2(f x, f y) <= a d1 + b and that the image is c-dense.

    All pairs are checked when G1 has at most ``max_exhaustive`` vertices,
    otherwise every pair with the first point among ``sources`` random vertices.
    Witnesses are the pairs with the largest violation (or smallest slack).
    """
    g1, g2 = as_graph(G1), as_graph(G2)
    fmap = f if callable(f) else f.__getitem__
    img = np.array([g2.index[fmap(x)] for x in g1.labels], np.int64)
    exhaustive = g1.nv <= max_exhaustive
    if exhaustive:
        src = np.arange(g1.nv)
    else:
        src = np.random.default_rng(seed).choice(g1.nv, size=min(sources, g1.nv), replace=False)
    worst_lo = (-math.inf, None)
    worst_hi = (-math.inf, None)
    checked = 0
    d2_cache = {}
    for s in src.tolist():
        d1 = _bfs(g1.indptr, g1.indices, s, -1)
        t = img[s]
        if t not in d2_cache:
            d2_cache[t] = _bfs(g2.indptr, g2.indices, t, -1)
        d2 = d2_cache[t][img].astype(float)
        if (d1 < 0).any() or (d2 < 0).any():
            raise GraphError("distances undefined on a disconnected graph")
        d1 = d1.astype(float)
        lo_gap = d1 / a - b - d2  # > 0 violates the lower bound
        hi_gap = d2 - (a * d1 + b)
        k = int(np.argmax(lo_gap))
        if lo_gap[k] > worst_lo[0]:
            worst_lo = (float(lo_gap[k]), (g1.labels[s], g1.labels[k]))
        k = int(np.argmax(hi_gap))
        if hi_gap[k] > worst_hi[0]:
            worst_hi = (float(hi_gap[k]), (g1.labels[s], g1.labels[k]))
        checked += g1.nv
    dens = _multi_source(g2, np.unique(img))
    if (dens < 0).any():
        raise GraphError("G2 is disconnected")
    far = int(np.argmax(dens))
    density = (int(dens[far]), g2.labels[far])
    ok = worst_lo[0] <= 1e-12 and worst_hi[0] <= 1e-12 and density[0] <= c
    return RoughIsometryResult(ok, worst_lo, worst_hi, density, checked, exhaustive)


def _multi_source(g, srcs):
    n = g.nv
    dist = np.full(n, -1, np.int64)
    dist[srcs] = 0
    frontier = list(srcs.tolist())
    d = 0
    while frontier:
        d += 1
        nxt = []
        for x in frontier:
            for y in g.indices[g.indptr[x]:g.indptr[x + 1]].tolist():
                if dist[y] < 0:
                    dist[y] = d
                    nxt.append(y)
        frontier = nxt
    return dist


def rough_isometry_from_paths(len_forward, len_backward, close_1, close_2):
    """Rough-isometry parameters implied by path and closeness bounds.

    ``len_forward`` bounds d2(f x, f y) over adjacent x, y in G1, ``len_backward``
    bounds d1(g i, g j) over adjacent i, j in G2, and ``close_*`` bound
    d1(g f x, x) and d2(f g i, i).  With K the largest of the four, both f and g
    are rough isometries with parameters (K, 2, K).
    """
    K = max(int(len_forward), int(len_backward), int(close_1), int(close_2), 1)
    return K, 2, K


# -- the event E^n -----------------------------------------------------------------------

class CouplingReport:
    def __init__(self, **kw):
        self.__dict__.update(kw)

    def as_dict(self):
        out = {}
        for k, v in self.__dict__.items():
            if isinstance(v, np.ndarray):
                v = v.tolist()
            if isinstance(v, (np.integer,)):
                v = int(v)
            if isinstance(v, (np.floating,)):
                v = float(v)
            out[k] = v
        return out


def _normalized(walk, grid):
    if (grid.lo, grid.hi) != (walk.lo, walk.hi):
        raise ValueError("window mismatch between walk and grid")
    sl, sr = grid.scale
    return walk.L / sl, walk.R / sr


@kernel
def _excursion_scan(Lint, cellmin, hyp, setthr):
    """Pairs i1 < i2 with inf_[i1,i2](L - L_i1) >= -hyp and |L_i2 - L_i1| <= hyp.

    ``Lint[p]`` is the grid value at index lo + p and ``cellmin[p]`` the minimum
    over [lo + p - 1, lo + p] (p >= 1; index lo is not a vertex).  Returns the
    largest set #{j in [i1, i2] : cellmin_j - L_i1 <= setthr} over qualifying
    pairs and, for each j, the number of qualifying pairs whose set contains j.
    """
    n = Lint.shape[0]
    counts = np.zeros(n, np.int64)
    good = np.zeros(n, np.int64)
    best = 0
    for p1 in range(1, n):
        base = Lint[p1]
        inf = base
        stop = n
        last = -1
        for p2 in range(p1 + 1, n):
            if cellmin[p2] < inf:
                inf = cellmin[p2]
            if inf - base < -hyp:
                stop = p2
                break
            if abs(Lint[p2] - base) <= hyp:
                good[p2] = 1
                last = p2
            else:
                good[p2] = 0
        if last < 0:
            continue
        # suffix counts of qualifying right ends
        suffix = 0
        for p2 in range(last, p1, -1):
            suffix += good[p2]
            good[p2] = suffix
        good[p1] = suffix
        size = 0
        for p2 in range(p1, last + 1):
            if cellmin[p2] - base <= setthr:
                size += 1
                counts[p2] += good[p2]
        if size > best:
            best = size
        for p2 in range(p1, min(stop, n)):
            good[p2] = 0
    return best, counts


def _scan(values, cellmin, hyp, setthr):
    return _excursion_scan(np.ascontiguousarray(values, np.float64),
                           np.ascontiguousarray(cellmin, np.float64), float(hyp), float(setthr))


def _cell_minima_full(grid, coord):
    """Cell minimum per index lo..hi (entry 0 is +inf: no cell ends at lo)."""
    ml, mr = grid.cell_minima
    cm = ml if coord == 0 else mr
    return np.concatenate([[np.inf], cm])


def check_event_En(walk, grid, C0, C1, C2):
    """The four conditions of E^n on the window of ``walk`` (n = walk.hi).

    The suprema in (1) and (2) run over indices -n..n; the excursion pairs in (3)
    and (4) have -n <= i1 < i2 <= n, with the 6 C1 / 7 C1 thresholds.
    """
    n = walk.hi
    if walk.lo != -n - 1:
        raise ValueError("walk window must be [-n-1, n]")
    ln = math.log(n)
    Ln, Rn = _normalized(walk, grid)
    D = sup_discrepancy(walk.restrict(-n, n), _restrict_grid(grid, -n, n))
    c1 = D <= C0 * ln
    osc = _oscillation(grid)
    c2 = osc <= ln
    out = {"D": D, "oscillation": osc, "log_n": ln, "C0": C0, "C1": C1, "C2": C2}
    c3 = c4 = True
    sizes, loads = [], []
    gl, gr = grid.at_integers()
    for coord, vals in ((0, gl), (1, gr)):
        cm = _cell_minima_full(grid, coord)
        best, counts = _scan(vals, cm, 6 * C1 * ln, 7 * C1 * ln)
        sizes.append(int(best))
        loads.append(int(counts.max()))
        c3 = c3 and best <= C1 ** 3 * ln ** 3
        c4 = c4 and counts.max() <= C2 * ln ** 6
    out.update(cond=[bool(c1), bool(c2), bool(c3), bool(c4)], max_set=sizes, max_load=loads)
    out["holds"] = all(out["cond"])
    return CouplingReport(**out)


def _restrict_grid(grid, a, b):
    from .walks import BrownianGrid
    m = grid.mesh
    s = (a - grid.lo) * m
    e = (b - grid.lo) * m + 1
    return BrownianGrid(a, b, m, grid.L[s:e], grid.R[s:e], grid.rho, grid.scale)


def _oscillation(grid):
    """max over unit cells of sup |Z_t - Z_s| (Euclidean), cells ending at -n+... n."""
    m = grid.mesh
    L = grid.L.reshape(-1)
    R = grid.R.reshape(-1)
    best = 0.0
    for k in range(grid.hi - grid.lo):
        a = L[k * m:(k + 1) * m + 1]
        b = R[k * m:(k + 1) * m + 1]
        # sup over pairs of points: diameter of the planar point set; bound by exact scan
        dx = a[:, None] - a[None, :]
        dy = b[:, None] - b[None, :]
        best = max(best, float(np.sqrt((dx * dx + dy * dy).max())))
    return best


def fit_event_constants(walk, grid, grid_steps=60, factor=1.1):
    """Smallest (C0, C1, C2) on a geometric C1 grid for which E^n holds.

    C0 = D / log n; C1 runs over max(C0, 1) * factor^k keeping the 6:7 ratio
    of the two thresholds; C2 is then the smallest value meeting (4) and
    C2 >= max(C0, 1).  Condition (2) has no constant and is reported as is.
    """
    n = walk.hi
    ln = math.log(n)
    D = sup_discrepancy(walk.restrict(-n, n), _restrict_grid(grid, -n, n))
    C0 = D / ln
    gl, gr = grid.at_integers()
    cms = [_cell_minima_full(grid, 0), _cell_minima_full(grid, 1)]
    base = max(C0, 1.0)
    for k in range(grid_steps):
        C1 = base * factor ** k
        ok = True
        load = 0
        for vals, cm in ((gl, cms[0]), (gr, cms[1])):
            best, counts = _scan(vals, cm, 6 * C1 * ln, 7 * C1 * ln)
            if best > C1 ** 3 * ln ** 3:
                ok = False
                break
            load = max(load, int(counts.max()))
        if ok:
            C2 = max(base, load / ln ** 6)
            while load > C2 * ln ** 6:
                C2 = math.nextafter(C2, math.inf)
            return C0, C1, C2
    raise RuntimeError("no C1 on the search grid satisfies condition (3)")


# -- coupled paths ----------------------------------------------------------------------------

@kernel
def _level_paths(ei, ej, tag, lo, vals_l, vals_r, key_l, key_r, thr, mode):
    """Level-set paths for each edge (ei[k], ej[k]) tagged L/R/consecutive.

    mode 0: members j of [i1, i2] with key[j] - vals[i1] <= thr (key = cell minimum);
    mode 1: members j with min(vals[j], vals[j-1]) - vals[i1] <= thr.
    Returns CSR (ptr, members) and the incremental congestion count per vertex.
    """
    m = ei.shape[0]
    ptr = np.zeros(m + 1, np.int64)
    total = 0
    for k in range(m):
        total += ej[k] - ei[k] + 1
    buf = np.empty(total, np.int64)
    nvert = vals_l.shape[0]
    load = np.zeros(nvert, np.int64)
    pos = 0
    for k in range(m):
        a = ei[k] - lo
        b = ej[k] - lo
        if tag[k] == 0:
            buf[pos] = a
            buf[pos + 1] = b
            load[a] += 1
            load[b] += 1
            pos += 2
        else:
            if tag[k] == 1:
                vals = vals_l
                key = key_l
            else:
                vals = vals_r
                key = key_r
            base = vals[a]
            for j in range(a, b + 1):
                if mode == 0:
                    x = key[j]
                else:
                    x = min(vals[j], vals[j - 1])
                if x - base <= thr:
                    buf[pos] = j
                    load[j] += 1
                    pos += 1
        ptr[k + 1] = pos
    return ptr, buf[:pos], load


def build_coupled_paths(walk, grid, variant=MULLIN, C1=None):
    """Paths in G for each edge of H and in H for each edge of G, on [-n, n].

    H -> G: members j of [i1, i2] with inf_[j-1, j] L - L_i1 <= 2 C1 log n.
    G -> H: members j with min(L_j, L_{j-1}) - L_i1 <= 4 C1 log n (walk values).
    C1 defaults to max(1, D / log n).  Every path is checked edge by edge.
    """
    n = walk.hi
    if walk.lo != -n - 1:
        raise ValueError("walk window must be [-n-1, n]")
    ln = math.log(n)
    D = sup_discrepancy(walk.restrict(-n, n), _restrict_grid(grid, -n, n))
    if C1 is None:
        C1 = max(1.0, D / ln)
    H = build_h_graph(walk, variant)
    G = build_mated_crt(grid)
    lo = walk.lo  # array position p <-> index lo + p
    gl, gr = grid.at_integers()
    cl, cr = _cell_minima_full(grid, 0), _cell_minima_full(grid, 1)
    wl, wr = _normalized(walk, grid)
    report = {"n": n, "variant": variant, "C1": C1, "D": D, "log_n": ln}
    for name, src, dst, vl, vr, kl, kr, thr, mode in (
            ("H_to_G", H, G, gl, gr, cl, cr, 2 * C1 * ln, 0),
            ("G_to_H", G, H, wl, wr, wl, wr, 4 * C1 * ln, 1)):
        ei, ej, tg = _edge_table(src)
        ptr, members, load = _level_paths(ei, ej, tg, lo, vl.astype(float), vr.astype(float),
                                          kl.astype(float), kr.astype(float), float(thr), mode)
        ok, lengths, bad = _validate_paths(ei, ej, ptr, members, lo, dst)
        recount = np.bincount(members, minlength=len(vl))
        report[name] = {
            "edges": int(len(ei)),
            "valid": int(ok.sum()),
            "invalid": bad,
            "max_length": int(lengths.max()) if len(lengths) else 0,
            "mean_length": float(lengths.mean()) if len(lengths) else 0.0,
            "max_congestion": int(load.max()),
            "congestion_recount_ok": bool(np.array_equal(load, recount)),
        }
        report[name + "_congestion"] = load
        report[name + "_lengths"] = lengths
    return CouplingReport(**report)


def _edge_table(g):
    """Distinct pairs of an AdjGraph with one tag each (consecutive wins, then L, then R)."""
    order = np.lexsort((g.prov, g.ej, g.ei))
    ei, ej, pv = g.ei[order], g.ej[order], g.prov[order]
    first = np.ones(len(ei), bool)
    first[1:] = (ei[1:] != ei[:-1]) | (ej[1:] != ej[:-1])
    ei, ej, pv = ei[first], ej[first], pv[first]
    tag = np.where(pv == CONSECUTIVE, 0, np.where(pv == LMATCH, 1, 2)).astype(np.int64)
    tag[ej - ei == 1] = 0
    return ei.astype(np.int64), ej.astype(np.int64), tag


def _validate_paths(ei, ej, ptr, members, lo, dst):
    """Endpoints, adjacency of consecutive members, and containment in dst's window."""
    nvert = dst.hi - lo + 1
    a = np.minimum(dst.ei, dst.ej) - lo
    b = np.maximum(dst.ei, dst.ej) - lo
    keys = np.unique(a * nvert + b)
    m = len(ei)
    starts, ends = ptr[:-1], ptr[1:]
    lengths = ends - starts - 1
    ok = np.ones(m, bool)
    ok &= lengths >= 1
    nonempty = ends > starts
    first = np.where(nonempty, members[np.minimum(starts, len(members) - 1)], -1)
    last = np.where(nonempty, members[np.maximum(ends - 1, 0)], -1)
    ok &= (first == ei - lo) & (last == ej - lo)
    inwin = (members >= dst.lo - lo) & (members <= dst.hi - lo)
    step_ok = np.ones(len(members), bool)
    if len(members) > 1:
        x, y = members[:-1], members[1:]
        adj = np.isin(np.minimum(x, y) * nvert + np.maximum(x, y), keys)
        step_ok[1:] = adj
    # the first member of each path has no predecessor inside the path
    step_ok[starts[nonempty]] = True
    seg = np.zeros(m, bool)
    bad_pos = np.flatnonzero(~(step_ok & inwin))
    if len(bad_pos):
        owner = np.searchsorted(ptr, bad_pos, side="right") - 1
        seg[owner] = True
    ok &= ~seg
    bad = [(int(ei[k]), int(ej[k])) for k in np.flatnonzero(~ok)[:10]]
    return ok, lengths, bad


# -- ball containment ---------------------------------------------------------------------

def ball_containment_check(model, n, K, seed=0, dist=None, mesh=8, widen=2, detail=False):
    """B_n(0; G) inside G_{n^K}, and the map ball B_n(root; M_{n^K}) unchanged when the
    window is widened to ``widen`` * n^K (same vertices and edges under the
    identification of vertices through shared sewing steps).

    ``model`` is "mullin" or "bipolar".  With ``detail`` the two halves are
    returned separately as (graph_ok, map_ok).
    """
    from . import mullin, bipolar
    from .walks import make_distribution, sample_walk, sample_brownian
    N = int(round(n ** K))
    if N <= n:
        raise ValueError(f"K={K} too small for n={n}: window n^K={N} does not exceed n")
    W = widen * N
    if model == "mullin":
        dist = dist or make_distribution("MullinSimple")
    elif model == "bipolar":
        dist = dist or make_distribution("BipolarUniform")
    else:
        raise ValueError(f"unsupported model {model!r}")
    rho = dist.correlation()
    # mated-CRT part
    grid = sample_brownian(rho, (-W - 1, W), mesh, seed)
    G = as_graph(build_mated_crt(grid))
    bG, _ = ball(G, 0, n)
    g_ok = all(-N <= x <= N for x in bG)
    # map part
    narrow = sample_walk(dist, (-N - 1, N), seed)
    wide = sample_walk(dist, (-W - 1, W), seed)
    if model == "mullin":
        _, s1 = mullin.sew_mullin(narrow)
        _, s2 = mullin.sew_mullin(wide)
        ident = _mullin_identification(s1, s2)
        g1 = _mullin_primal(s1)
        g2 = _mullin_primal(s2)
        r1 = mullin.mullin_phi_psi(s1).psi[0]
    else:
        _, s1 = bipolar.sew_bipolar(narrow)
        _, s2 = bipolar.sew_bipolar(wide)
        ident = _bipolar_identification(s1, s2)
        g1 = Graph.from_pairs(range(s1.nv), zip(s1.eu, s1.ev))
        g2 = Graph.from_pairs(range(s2.nv), zip(s2.eu, s2.ev))
        r1 = s1.eu[s1.edge_at(0)]
    m_ok = _same_ball(g1, g2, ident, r1, n)
    if detail:
        return bool(g_ok), bool(m_ok)
    return bool(g_ok and m_ok)


def _same_ball(g1, g2, ident, r1, n):
    b1, _ = ball(g1, r1, n)
    if any(v not in ident for v in b1):
        return False
    b2, _ = ball(g2, ident[r1], n)
    image = {ident[v] for v in b1}
    if image != b2 or len(image) != len(b1):
        return False
    e1 = {tuple(sorted((ident[a], ident[b]))) for a, b in _edges_within(g1, b1)}
    e2 = {tuple(sorted(p)) for p in _edges_within(g2, b2)}
    return e1 == e2


def _edges_within(g, verts):
    out = set()
    for a, b in zip(g.u.tolist(), g.v.tolist()):
        la, lb = g.labels[a], g.labels[b]
        if la in verts and lb in verts:
            out.add((la, lb))
    return out


def _mullin_primal(st):
    from . import mullin
    verts, pairs, _ = mullin.primal_graph(st)
    vs = set(verts) | {x for p in pairs for x in p}
    return Graph.from_pairs(sorted(vs), pairs)


def _mullin_identification(s1, s2):
    """Narrow vertex -> wide vertex through the triangles of shared steps."""
    ident = {}
    off = s1.first - s2.first
    for k, tri in enumerate(s1.tri_half):
        tri2 = s2.tri_half[k + off]
        for h1, h2 in zip(tri, tri2):
            v1, v2 = s1.map.tail_label(h1), s2.map.tail_label(h2)
            if ident.setdefault(v1, v2) != v2:
                raise GraphError("inconsistent vertex identification")
    return ident


def _bipolar_identification(s1, s2):
    ident = {}
    off = s1.first - s2.first

    def put(a, b):
        if ident.setdefault(a, b) != b:
            raise GraphError("inconsistent vertex identification")

    for k, (kind, x) in enumerate(s1.lam_tilde):
        kind2, x2 = s2.lam_tilde[k + off]
        if kind == "v":
            put(x, x2)
        else:
            e1, w1, _ = s1.faces[x]
            e2, w2, _ = s2.faces[x2]
            for p, q in zip(e1 + w1, e2 + w2):
                put(s1.eu[p], s2.eu[q])
                put(s1.ev[p], s2.ev[q])
    return ident
