"""Bipolar-oriented maps from walks with steps (-1, 1) and (i, -j), i, j >= 0.

Every edge points north: half-edge 2e runs from S(e) to N(e).  The sewing keeps
the east boundary as two stacks around the marked edge e^k:

* (-1, 1): e^k moves one edge up the east boundary, creating a fresh edge at
  the top when the boundary is exhausted.
* (i, -j): a face is glued whose west side is e^(k-1) and the j boundary edges
  below it; its east side is a new chain of i + 1 edges and e^k is the lowest.

In window mode the boundary is a bi-infinite ray allocated lazily in both
directions; the finished window is itself a finite bipolar map whose west
boundary is the allocated part of the ray.

Faces are traversed counterclockwise: up the east side, down the west side.
"""
import numpy as np

from .graphs import AdjGraph, BIPOLAR, CONSECUTIVE, LMATCH, RMATCH, build_h_graph
from .maps import IndexMaps, MapError, PlanarMap, from_face_cycles, graph_isomorphic_mod_multiplicity, \
    topological_order
from .walks import WalkPath, is_bipolar_step, walk_from_steps
from ._kernels import kernel

BLUE, RED, GREEN = 0, 1, 2
COLOR_NAMES = {BLUE: "blue", RED: "red", GREEN: "green"}


class SewingError(ValueError):
    pass


class BipolarState:
    """Sewing record.  ``lam[k - first + 1]`` is the marked edge after step k
    (entry 0 is the edge before the first step); ``lam_tilde`` has one entry
    per step, ``("v", vertex)`` or ``("f", face record index)``."""

    def __init__(self):
        self.eu, self.ev = [], []
        self.nv = 0
        self.faces = []  # (east edges bottom->top, west edges bottom->top, step)
        self.lower, self.upper = [], []
        self.ray_below, self.ray_above = [], []
        self.lam, self.lam_tilde = [], []
        self.first = 0
        self.map = None

    def new_vertex(self):
        self.nv += 1
        return self.nv - 1

    def new_edge(self, u, v):
        self.eu.append(u)
        self.ev.append(v)
        return len(self.eu) - 1

    @property
    def last(self):
        return self.first + len(self.lam_tilde) - 1

    def edge_at(self, k):
        """lambda(k) for first - 1 <= k <= last."""
        return self.lam[k - self.first + 1]

    def west_boundary(self):
        return self.ray_below[::-1] + [self.initial] + self.ray_above

    def east_boundary(self):
        return self.lower + [self.marked] + self.upper[::-1]


def sew_bipolar_steps(steps, first=0, finite=False):
    steps = np.asarray(steps, dtype=np.int64).reshape(-1, 2)
    st = BipolarState()
    st.first = int(first)
    s0, n0 = st.new_vertex(), st.new_vertex()
    st.bottom, st.top = s0, n0
    st.marked = st.initial = st.new_edge(s0, n0)
    st.lam.append(st.marked)
    for k, (a, b) in enumerate(steps.tolist()):
        if not is_bipolar_step(a, b):
            raise SewingError(f"step {(a, b)} at index {st.first + k} is not a bipolar step")
        e = st.marked
        if (a, b) == (-1, 1):
            st.lower.append(e)
            if st.upper:
                e = st.upper.pop()
            else:
                x = st.new_vertex()
                e = st.new_edge(st.top, x)
                st.top = x
                st.ray_above.append(e)
            st.marked = e
            st.lam_tilde.append(("v", st.eu[e]))
        else:
            i, j = a, -b
            west = [e]
            for _ in range(j):
                if st.lower:
                    west.append(st.lower.pop())
                elif finite:
                    raise SewingError(f"step {st.first + k} leaves the quarter plane")
                else:
                    u = st.new_vertex()
                    w = st.new_edge(u, st.bottom)
                    st.bottom = u
                    st.ray_below.append(w)
                    west.append(w)
            west.reverse()
            s, n = st.eu[west[0]], st.ev[west[-1]]
            chain = [s] + [st.new_vertex() for _ in range(i)] + [n]
            east = [st.new_edge(chain[q], chain[q + 1]) for q in range(i + 1)]
            for f in reversed(east[1:]):
                st.upper.append(f)
            st.marked = east[0]
            st.faces.append((east, west, st.first + k))
            st.lam_tilde.append(("f", len(st.faces) - 1))
        st.lam.append(st.marked)
    _assemble(st)
    return st


def _assemble(st):
    ne = len(st.eu)
    cycles = []
    for east, west, _ in st.faces:
        cycles.append([2 * e for e in east] + [2 * e + 1 for e in reversed(west)])
    outer = [2 * e for e in st.west_boundary()] + [2 * e + 1 for e in reversed(st.east_boundary())]
    cycles.append(outer)
    labels = np.empty(2 * ne, np.int64)
    labels[0::2] = st.eu
    labels[1::2] = st.ev
    k0 = 0 if st.first - 1 <= 0 <= st.last else None
    root_edge = st.edge_at(0) if k0 is not None else st.initial
    deco = {
        "orient": np.ones(ne, np.int8),
        "poles": [st.bottom, st.top],
        "first_index": st.first - 1,
        "last_index": st.last,
        "boundary_edges": sorted(set(st.west_boundary()) | set(st.east_boundary())),
    }
    st.map = from_face_cycles(2 * ne, cycles, root=2 * root_edge, external_half=outer[0],
                              tail_labels=labels, deco=deco)
    st.face_id = [st.map.face_of(c[0]) for c in cycles[:-1]]


def sew_bipolar(walk):
    """Window sewing of ``walk``; lambda(walk.lo) is the ray edge e^0 of the empty window."""
    dl, dr = walk.steps()
    st = sew_bipolar_steps(np.stack([dl, dr], axis=1), first=walk.lo + 1)
    return st.map, st


def sew_finite(walk):
    """Finite sewing of a walk from (m, 0) to (0, n) in the quarter plane."""
    L0, R0 = int(walk.L[0]), int(walk.R[0])
    if R0 != 0 or L0 < 0:
        raise SewingError("finite walks start on the nonnegative x-axis")
    if walk.L.min() < 0 or walk.R.min() < 0:
        raise SewingError("walk leaves the quarter plane")
    if walk.L[-1] != 0:
        raise SewingError("finite walks end on the y-axis")
    dl, dr = walk.steps()
    st = sew_bipolar_steps(np.stack([dl, dr], axis=1), first=walk.lo + 1, finite=True)
    if len(st.ray_above) != L0 or len(st.upper) != 0:
        raise SewingError("west boundary length does not match the starting point")
    return st.map, st


# -- reading a finite bipolar map ------------------------------------------------

class BipolarView:
    """Orientation helpers on a PlanarMap carrying ``orient`` and an external face."""

    def __init__(self, m):
        if "orient" not in m.deco or m.external_face is None:
            raise MapError("map needs an orientation and an external face")
        self.m = m
        o = np.asarray(m.deco["orient"])
        nh = m.n_half
        h = np.arange(nh)
        self.up = np.where(h % 2 == 0, o[h // 2] > 0, o[h // 2] < 0)
        self.prev = np.empty(nh, np.int64)
        self.prev[m.nxt] = h
        self.ext = m.external_face
        self.face = m._face
        self.indeg = np.zeros(m.nv, np.int64)
        self.outdeg = np.zeros(m.nv, np.int64)
        for x in range(nh):
            if self.up[x]:
                self.outdeg[m.tail(x)] += 1
                self.indeg[m.head(x)] += 1
        self._faces = {}

    def up_half(self, e):
        return 2 * e if self.up[2 * e] else 2 * e + 1

    def S(self, e):
        return self.m.tail(self.up_half(e))

    def N(self, e):
        return self.m.head(self.up_half(e))

    def is_nw(self, h):
        """h is an upward half-edge; NW when its clockwise predecessor is incoming."""
        g = self.m.twin[self.prev[h]]
        if self.indeg[self.m.tail(h)] == 0:
            return self.face[h] == self.ext
        return not self.up[g]

    def is_se(self, d):
        """d is a downward half-edge (leaving the head of its edge)."""
        g = self.m.twin[self.prev[d]]
        if self.outdeg[self.m.tail(d)] == 0:
            return self.face[d] == self.ext
        return bool(self.up[g])

    def nw_edge(self, v):
        for h in self.m.rotation(self.any_half(v)):
            if self.up[h] and self.is_nw(h):
                return h // 2
        raise MapError(f"vertex {v} has no NW edge")

    def any_half(self, v):
        if not hasattr(self, "_anyhalf"):
            self._anyhalf = {}
            for h in range(self.m.n_half):
                self._anyhalf.setdefault(self.m.tail(h), h)
        return self._anyhalf[v]

    def face_sides(self, f):
        """(east edges bottom->top, west edges bottom->top, S, N) of a bounded face."""
        if f in self._faces:
            return self._faces[f]
        cyc = self.m.face_cycle(int(np.flatnonzero(self.face == f)[0]))
        k = len(cyc)
        starts = [q for q in range(k) if self.up[cyc[q]] and not self.up[cyc[q - 1]]]
        if len(starts) != 1:
            raise MapError(f"face {f} is not bipolar")
        q = starts[0]
        cyc = cyc[q:] + cyc[:q]
        ups = [h for h in cyc if self.up[h]]
        downs = [h for h in cyc if not self.up[h]]
        if cyc[: len(ups)] != ups:
            raise MapError(f"face {f} is not bipolar")
        east = [h // 2 for h in ups]
        west = [h // 2 for h in reversed(downs)]
        out = (east, west, self.m.tail(ups[0]), self.m.head(ups[-1]))
        self._faces[f] = out
        return out

    def poles(self):
        s = [v for v in range(self.m.nv) if self.indeg[v] == 0]
        n = [v for v in range(self.m.nv) if self.outdeg[v] == 0]
        if len(s) != 1 or len(n) != 1:
            raise MapError("map does not have exactly one source and one sink")
        return s[0], n[0]

    def boundaries(self):
        """(west boundary edges S->N, east boundary edges S->N)."""
        cyc = self.m.face_cycle(int(np.flatnonzero(self.face == self.ext)[0]))
        k = len(cyc)
        starts = [q for q in range(k) if self.up[cyc[q]] and not self.up[cyc[q - 1]]]
        if len(starts) != 1:
            if all(self.up[h] for h in cyc) or not any(self.up[h] for h in cyc):
                raise MapError("outer face is not bipolar")
            raise MapError("outer face is not bipolar")
        q = starts[0]
        cyc = cyc[q:] + cyc[:q]
        ups = [h // 2 for h in cyc if self.up[h]]
        downs = [h // 2 for h in reversed([h for h in cyc if not self.up[h]])]
        return ups, downs


def interface_path(m):
    """Walk, lambda and lambda-tilde of a finite bipolar map.

    Returns ``(walk, lam, lam_tilde)`` with the walk on indices 0..#E-1 starting
    at (m, 0), ``lam[t]`` edge ids and ``lam_tilde[t]`` = ("v", vertex orbit) or
    ("f", face id) for t >= 1 (entry 0 is None).
    """
    bv = BipolarView(m)
    s_pole, n_pole = bv.poles()
    west, east = bv.boundaries()
    lam = [bv.nw_edge(s_pole)]
    lam_t = [None]
    steps = []
    for _ in range(1, m.ne):
        e = lam[-1]
        d = bv.up_half(e) ^ 1
        u = m.tail(d)
        if bv.is_se(d):
            if u == n_pole:
                raise MapError("interface path reached the north pole early")
            lam.append(bv.nw_edge(u))
            lam_t.append(("v", u))
            steps.append((-1, 1))
        else:
            f = int(bv.face[d])
            if f == bv.ext:
                raise MapError("interface path entered the outer face")
            east_f, west_f, s, _ = bv.face_sides(f)
            lam.append(east_f[0])
            lam_t.append(("f", f))
            steps.append((len(east_f) - 1, -(len(west_f) - 1)))
    if len(set(lam)) != m.ne:
        raise MapError("interface path does not visit every edge once")
    walk = walk_from_steps(steps, lo=0, start=(len(west) - 1, 0))
    if walk.L[-1] != 0 or walk.R[-1] != len(east) - 1:
        raise MapError("interface walk does not end at (0, east length - 1)")
    return walk, lam, lam_t


def extract_bipolar(m):
    """Window walk recovered from a sewn window map (decorated with its index range)."""
    walk, lam, _ = interface_path(m)
    lo, hi = int(m.deco["first_index"]), int(m.deco["last_index"])
    root_edge = m.root // 2
    p0 = lam.index(root_edge)
    a, b = p0 + lo, p0 + hi
    if a < 0 or b >= len(walk.L):
        raise MapError("window does not fit inside the interface walk")
    L = walk.L[a:b + 1] - walk.L[p0]
    R = walk.R[a:b + 1] - walk.R[p0]
    return WalkPath(lo, L, R)


# -- the two adjacency conditions ---------------------------------------------------

def _extended(walk):
    """Append the (-1,1) steps before index 0 and after the last index."""
    L = np.concatenate([[walk.L[0] + 1], walk.L, [walk.L[-1] - 1]])
    R = np.concatenate([[walk.R[0] - 1], walk.R, [walk.R[-1] + 1]])
    return WalkPath(walk.lo - 1, L, R)


def lr_adjacency(walk, s, t):
    """(west_tail, east_head) conditions for indices s < t; walk values needed on s-1..t."""
    if not (walk.lo + 1 <= s < t <= walk.hi):
        raise ValueError("indices out of window")
    L = lambda i: int(walk.L[i - walk.lo])  # noqa: E731
    R = lambda i: int(walk.R[i - walk.lo])  # noqa: E731
    west_tail = max(R(s - 1), R(t) - 1) < min(R(j) for j in range(s, t))
    east_head = max(L(s - 1) - 1, L(t)) < min(L(j) for j in range(s, t))
    return west_tail, east_head


def _lr_tables(walk):
    """All pairs s < t of the extended walk at once: (west_tail, east_head) boolean matrices."""
    ext = _extended(walk)
    L, R = ext.L.astype(np.int64), ext.R.astype(np.int64)
    n = len(L) - 1  # indices 0..n-1 of the finite walk plus the appended end point
    idx = np.arange(n)  # position p <-> index p (value array offset 1)
    R_tab = np.zeros((n, n), bool)
    L_tab = np.zeros((n, n), bool)
    for s in range(n):
        mr = np.minimum.accumulate(R[s + 1:n + 1])  # min R_j, j = s..t-1 at offset t-1
        ml = np.minimum.accumulate(L[s + 1:n + 1])
        t = idx[s + 1:]
        rs1, ls1 = R[s], L[s]  # values at s-1
        R_tab[s, s + 1:] = np.maximum(rs1, R[t + 1] - 1) < mr[: len(t)]
        L_tab[s, s + 1:] = np.maximum(ls1 - 1, L[t + 1]) < ml[: len(t)]
    return R_tab, L_tab


def _visits(m, walk=None):
    """lambda-tilde on 0..#E with the two poles at the ends."""
    w, lam, lam_t = interface_path(m)
    bv = BipolarView(m)
    s, n = bv.poles()
    seq = [("v", s)] + lam_t[1:] + [("v", n)]
    return w, lam, seq, bv


def verify_lr(m):
    """Both adjacency conditions against incidences on the finite bipolar map ``m``.

    West tails: lambda~(s) is a vertex that is the tail of a west edge of the
    face lambda~(t).  East heads: lambda~(t) is a vertex that is the head of an
    east edge of the face lambda~(s).  Every pair s < t of 0..#E is compared.
    Returns (ok, mismatches) with up to 20 mismatching pairs.
    """
    w, lam, seq, bv = _visits(m)
    R_tab, L_tab = _lr_tables(w)
    R_true, L_true = _incidence_tables(seq, bv)
    upper = np.triu(np.ones_like(R_tab), 1)
    bad_mask = upper & ((R_tab != R_true) | (L_tab != L_true))
    bad = [(int(s), int(t), bool(R_true[s, t]), bool(R_tab[s, t]), bool(L_true[s, t]), bool(L_tab[s, t]))
           for s, t in zip(*np.nonzero(bad_mask))][:20]
    return not bad_mask.any(), bad


def _incidence_tables(seq, bv):
    n = len(seq)
    pos = {x: p for p, x in enumerate(seq)}
    R_true = np.zeros((n, n), bool)
    L_true = np.zeros((n, n), bool)
    for p, (kind, x) in enumerate(seq):
        if kind != "f":
            continue
        east, west, _, _ = bv.face_sides(x)
        for v in {bv.S(e) for e in west}:
            q = pos[("v", v)]
            if q < p:
                R_true[q, p] = True
        for v in {bv.N(e) for e in east}:
            q = pos[("v", v)]
            if q > p:
                L_true[p, q] = True
    return R_true, L_true


def lr_literal_mismatches(m):
    """Pairs where the east-head condition disagrees with the reading that keeps the
    face at the later index (vertex lambda~(s) a head of an east edge of lambda~(t))."""
    w, lam, seq, bv = _visits(m)
    _, L_tab = _lr_tables(w)
    n = len(seq)
    count = 0
    for s in range(n):
        for t in range(s + 1, n):
            ks, xs = seq[s]
            kt, xt = seq[t]
            lit = False
            if kt == "f" and ks == "v":
                east, _, _, _ = bv.face_sides(xt)
                lit = xs in {bv.N(e) for e in east}
            count += lit != bool(L_tab[s, t])
    return count


def build_bar_q(m):
    """Q-bar on the positions 0..#E of lambda~ for a finite bipolar map.

    Q edges join a bounded face to each of its vertices; rule 2 joins the ends
    of an edge that is the NW edge of its tail and the SE edge of its head;
    rule 3 joins the faces west and east of an edge e when S(e) is the south
    pole of the west face and N(e) the north pole of the east face.  The mirror
    configuration (S(e) south pole of the east face) does not give an edge of
    the structure graph and is left out.
    """
    w, lam, seq, bv = _visits(m)
    pos = {x: p for p, x in enumerate(seq)}
    ei, ej, pv = [], [], []

    def add(a, b, tag):
        ei.append(min(a, b))
        ej.append(max(a, b))
        pv.append(tag)

    for kind, f in seq:
        if kind != "f":
            continue
        east, west, s, n = bv.face_sides(f)
        verts = {s, n} | {bv.N(e) for e in east} | {bv.N(e) for e in west}
        for v in verts:
            add(pos[("v", v)], pos[("f", f)], LMATCH)
    for e in range(m.ne):
        h = bv.up_half(e)
        if bv.is_nw(h) and bv.is_se(h ^ 1):
            add(pos[("v", m.tail(h))], pos[("v", m.head(h))], CONSECUTIVE)
        fw, fe = int(bv.face[h]), int(bv.face[h ^ 1])
        if bv.ext in (fw, fe):
            continue
        _, _, sw, nw = bv.face_sides(fw)
        _, _, se, ne_ = bv.face_sides(fe)
        s, n = m.tail(h), m.head(h)
        if s == sw and n == ne_:
            add(pos[("f", fw)], pos[("f", fe)], RMATCH)
    return AdjGraph(0, len(seq) - 1, ei, ej, pv), w


def verify_prop_bipolar(m):
    """Q-bar equals the structure graph of the interface walk (both on 0..#E)."""
    q, w = build_bar_q(m)
    h = build_h_graph(_extended(w), BIPOLAR)
    return graph_isomorphic_mod_multiplicity(h, q, {i: i for i in h.vertices()})


def q_out_degrees(m):
    """Out-degrees in the radial map oriented face -> pole and vertex -> other faces.

    Only vertices off the outer face and all bounded faces are reported; each
    should be 2.
    """
    bv = BipolarView(m)
    outer_verts = {m.tail(h) for h in range(m.n_half) if bv.face[h] == bv.ext}
    out = {}
    for f in range(m.nf):
        if f == bv.ext:
            continue
        east, west, s, n = bv.face_sides(f)
        out[("f", f)] = 2 if s != n else 1
        for v in {bv.N(e) for e in east[:-1]} | {bv.N(e) for e in west[:-1]}:
            if v not in outer_verts:
                out[("v", v)] = out.get(("v", v), 0) + 1
    return out


# -- neighbourhoods ----------------------------------------------------------------

def neighborhoods(m):
    """W/N/E/S face classification per vertex off the outer face and |Nb| sizes.

    Returns ``(vertex_table, face_sizes, skipped)``; ``vertex_table[v]`` is
    ``(n_west, n_north, n_east, n_south, size)``.
    """
    bv = BipolarView(m)
    ext = bv.ext
    outer_verts = {m.tail(h) for h in range(m.n_half) if bv.face[h] == ext}
    faces_at = {}
    closure = {}
    for f in range(m.nf):
        if f == ext:
            continue
        east, west, s, n = bv.face_sides(f)
        verts = [s] + [bv.N(e) for e in east]
        verts += [bv.N(e) for e in west[:-1]]
        closure[f] = (set(verts), set(east) | set(west))
        for v in set(verts):
            faces_at.setdefault(v, []).append(f)

    def size(fs):
        V, E = set(), set()
        for f in fs:
            V |= closure[f][0]
            E |= closure[f][1]
        return len(V) + len(fs) + len(E)

    table = {}
    skipped = 0
    for v in range(m.nv):
        if v in outer_verts:
            skipped += 1
            continue
        w = no = ea = so = 0
        for f in faces_at.get(v, []):
            east, west, s, n = bv.face_sides(f)
            if v == s:
                no += 1
            elif v == n:
                so += 1
            elif v in {bv.N(e) for e in east[:-1]}:
                w += 1
            else:
                ea += 1
        table[v] = (w, no, ea, so, size(faces_at.get(v, [])))
    face_sizes = {}
    for f in closure:
        fs = set()
        for v in closure[f][0]:
            fs |= set(faces_at[v])
        face_sizes[f] = size(fs)
    return table, face_sizes, skipped


# -- window submaps and index maps ----------------------------------------------------

def window_submap(st, n):
    """Vertices and edges of M_n: closures of the faces lambda~(t), |t| <= n, the
    visited vertices, and the edges lambda(t-1) joining consecutive vertex visits."""
    if not (st.first <= -n and n <= st.last):
        raise ValueError("window does not contain [-n, n]")
    V, E = set(), set()
    faces = []
    for t in range(-n, n + 1):
        kind, x = st.lam_tilde[t - st.first]
        if kind == "v":
            V.add(x)
            if t - 1 >= -n and st.lam_tilde[t - 1 - st.first][0] == "v":
                E.add(st.edge_at(t - 1))
        else:
            east, west, _ = st.faces[x]
            faces.append(x)
            for e in east + west:
                E.add(e)
                V.add(st.eu[e])
                V.add(st.ev[e])
    return V, E, faces


def window_submap_from_boundaries(st, n):
    """M_n through the boundaries of the half-plane maps before step -n and after
    step n: the region between them, plus the east-boundary edges from the upper
    meeting vertex to S(lambda(n)) when lambda(n) lies above it."""
    sub = sew_bipolar_steps(_steps_between(st, -n, n), first=-n)
    west = sub.west_boundary()
    east = sub.east_boundary()
    wv = [sub.eu[west[0]]] + [sub.ev[e] for e in west]
    evs = [sub.eu[east[0]]] + [sub.ev[e] for e in east]
    a = 0
    while a < min(len(west), len(east)) and west[a] == east[a]:
        a += 1
    b = 0
    while b < min(len(west), len(east)) - a and west[-1 - b] == east[-1 - b]:
        b += 1
    shared = set(west[:a]) | set(west[len(west) - b:])
    E = {e for e in range(len(sub.eu)) if e not in shared}
    v_n = wv[len(west) - b]
    lam_n = sub.edge_at(n)
    if lam_n not in E:
        pos = east.index(lam_n)
        start = evs.index(v_n)
        for q in range(start, pos):
            E.add(east[q])
    V = set()
    for e in E:
        V.add(sub.eu[e])
        V.add(sub.ev[e])
    return V, E, sub


def _steps_between(st, a, b):
    out = []
    for t in range(a, b + 1):
        kind, x = st.lam_tilde[t - st.first]
        if kind == "v":
            out.append((-1, 1))
        else:
            east, west, _ = st.faces[x]
            out.append((len(east) - 1, -(len(west) - 1)))
    return out


def bipolar_phi_psi(st, n=None):
    """psi_n(i) = S(lambda(i)); phi_n(v) = lambda~^-1(v) (0 at S(e^0)) when |.| <= n, else the
    signed index of the face of Nb_v in M_n with the smallest |index| (ties to +)."""
    if n is None:
        n = min(-st.first, st.last)
    V, E, faces = window_submap(st, n)
    face_time = {x: st.faces[x][2] for x in faces}
    visit = {}
    for k, (kind, x) in enumerate(st.lam_tilde):
        if kind == "v":
            visit[x] = st.first + k
    root = st.eu[st.edge_at(0)]
    around = {}
    for x in faces:
        east, west, _ = st.faces[x]
        for e in east + west:
            for v in (st.eu[e], st.ev[e]):
                around.setdefault(v, set()).add(x)
    phi = {}
    for v in V:
        t = visit.get(v)
        if t is not None and abs(t) <= n:
            phi[v] = 0 if v == root else t
            continue
        cands = [face_time[x] for x in around.get(v, ())]
        if not cands:
            raise SewingError(f"vertex {v} of M_n meets no face of M_n")
        phi[v] = min(cands, key=lambda t: (abs(t), -t))
    psi = {i: st.eu[st.edge_at(i)] for i in range(-n, n + 1)}
    maps = IndexMaps(phi, psi, lam={i: st.edge_at(i) for i in range(-n, n + 1)},
                     lam_tilde={i: st.lam_tilde[i - st.first] for i in range(-n, n + 1)},
                     root_vertex=root)
    maps.vertices, maps.edges, maps.n = V, E, n
    return maps


# -- duality ---------------------------------------------------------------------------

def dual_is_bipolar(m):
    """Orient each dual edge from the face west of the primal edge to the face east of it,
    with the outer face split into its west and east parts; check acyclic with one source
    and one sink."""
    bv = BipolarView(m)
    west, east = bv.boundaries()
    wset, eset = set(west), set(east)
    F = m.nf
    W_OUT, E_OUT = F, F + 1
    src, dst = [], []
    for e in range(m.ne):
        h = bv.up_half(e)
        fw, fe = int(bv.face[h]), int(bv.face[h ^ 1])
        if fw == bv.ext:
            fw = W_OUT if e in wset else E_OUT
        if fe == bv.ext:
            fe = E_OUT if e in eset else W_OUT
        src.append(fw)
        dst.append(fe)
    nodes = [f for f in range(F) if f != bv.ext] + [W_OUT, E_OUT]
    remap = {f: k for k, f in enumerate(nodes)}
    s = np.array([remap[x] for x in src], np.int64)
    d = np.array([remap[x] for x in dst], np.int64)
    nn = len(nodes)
    indeg = np.bincount(d, minlength=nn)
    outdeg = np.bincount(s, minlength=nn)
    sources = set(np.flatnonzero(indeg == 0).tolist())
    sinks = set(np.flatnonzero(outdeg == 0).tolist())
    return (topological_order(nn, s, d) is not None and sources == {remap[W_OUT]}
            and sinks == {remap[E_OUT]})


# -- Schnyder woods ----------------------------------------------------------------------

def check_schnyder_property(m):
    """West boundary of one edge, east boundary of two, every bounded face with two east edges."""
    bv = BipolarView(m)
    west, east = bv.boundaries()
    if len(west) != 1 or len(east) != 2:
        return False
    for f in range(m.nf):
        if f != bv.ext and len(bv.face_sides(f)[0]) != 2:
            return False
    return True


def schnyder_from_bipolar(m):
    """Wooded triangulation from a bipolar map with the Schnyder boundary property.

    Each bounded face S -> x -> N (east) with west vertices u_1..u_j gets green
    edges u_k -> x; its lower east edge reversed becomes red; the remaining
    inner edges are blue.  The colour of every inner edge is then recomputed by
    the second-outgoing-edge walk and must agree.
    """
    if not check_schnyder_property(m):
        raise SewingError("map does not have the Schnyder boundary property")
    bv = BipolarView(m)
    west_b, east_b = bv.boundaries()
    outer_edges = set(west_b) | set(east_b)
    a_r, a_b = bv.poles()
    a_g = bv.N(east_b[0])
    ne = m.ne
    nxt = []
    greens = []
    cycles = []
    color = {}
    sorient = {}
    for f in range(m.nf):
        if f == bv.ext:
            cycles.append(m.face_cycle(int(np.flatnonzero(bv.face == f)[0])))
            continue
        east, west, s, n = bv.face_sides(f)
        low, high = east
        x = bv.N(low)
        ha, hb = bv.up_half(low), bv.up_half(high)
        downs = [bv.up_half(e) ^ 1 for e in west]  # d_k : u_k -> u_{k-1}, k = 1..j+1
        j = len(west) - 1
        us = [bv.N(e) for e in west[:-1]]
        if low not in outer_edges:
            color[low] = RED
            sorient[low] = -1 if ha == 2 * low else 1
        if high not in outer_edges:
            color[high] = BLUE
            sorient[high] = 1 if hb == 2 * high else -1
        if j == 0:
            cycles.append([ha, hb, downs[0]])
            continue
        g = []
        for k in range(j):
            e = ne + len(greens)
            greens.append((us[k], x))
            color[e] = GREEN
            sorient[e] = 1
            g.append(e)
        # green edge g[k-1] joins u_k and x: half 2e = u_k -> x
        cycles.append([ha, 2 * g[0] + 1, downs[0]])
        for k in range(1, j):
            cycles.append([2 * g[k] + 1, downs[k], 2 * g[k - 1]])
        cycles.append([hb, downs[j], 2 * g[j - 1]])
    ntot = ne + len(greens)
    labels = np.empty(2 * ntot, np.int64)
    for h in range(2 * ne):
        labels[h] = m.tail_label(h)
    for k, (u, x) in enumerate(greens):
        e = ne + k
        labels[2 * e] = m.vertex_label[u]
        labels[2 * e + 1] = m.vertex_label[x]
    # every M edge not yet coloured or outer is blue (NW edge of an inner vertex)
    for e in range(ne):
        if e in outer_edges or e in color:
            continue
        color[e] = BLUE
        sorient[e] = 1 if bv.up_half(e) == 2 * e else -1
    for e in outer_edges:
        # outer orientations A_r -> A_b, A_r -> A_g, A_g -> A_b agree with the bipolar ones
        sorient[e] = 1 if bv.up_half(e) == 2 * e else -1
    col = np.array([color.get(e, -1) for e in range(ntot)], np.int64)
    so = np.array([sorient[e] for e in range(ntot)], np.int64)
    ext_half = int(np.flatnonzero(bv.face == bv.ext)[0])
    outer = [int(m.vertex_label[a_b]), int(m.vertex_label[a_r]), int(m.vertex_label[a_g])]
    deco = {"schnyder_color": col, "schnyder_orient": so, "outer_vertices": outer,
            "green_edges": list(range(ne, ntot))}
    w = from_face_cycles(2 * ntot, cycles, root=m.root, external_half=ext_half, tail_labels=labels,
                         deco=deco)
    recolored = schnyder_coloring(w)
    if not np.array_equal(recolored, col):
        raise SewingError("second-outgoing-edge colouring disagrees with the construction")
    return w


def schnyder_coloring(w):
    """Colour inner edges by following second outgoing edges to an outer vertex."""
    so = np.asarray(w.deco["schnyder_orient"])
    col_in = np.asarray(w.deco["schnyder_color"])
    ab, ar, ag = w.deco["outer_vertices"]
    outer_color = {w.vertex_of_label[ab]: BLUE, w.vertex_of_label[ar]: RED, w.vertex_of_label[ag]: GREEN}
    inner = col_in >= 0
    nh = w.n_half

    def along(h):
        e = h // 2
        return (so[e] > 0) == (h % 2 == 0)

    out = np.full(w.ne, -1, np.int64)
    for e in np.flatnonzero(inner).tolist():
        h = 2 * e if along(2 * e) else 2 * e + 1
        for _ in range(4 * nh):
            u = w.head(h)
            if u in outer_color:
                out[e] = outer_color[u]
                break
            g = int(w.twin[h])  # leaves u along the arriving edge
            seen = 0
            while True:
                g = int(w.nxt[w.twin[g]])  # clockwise
                if inner[g // 2] and along(g):
                    seen += 1
                    if seen == 2:
                        break
            h = g
        else:
            raise SewingError("colouring walk did not terminate")
    return out


def bipolar_from_schnyder(w):
    """Delete green edges and reverse red ones; outer edges keep their orientation."""
    col = np.asarray(w.deco["schnyder_color"])
    so = np.asarray(w.deco["schnyder_orient"])
    nxt = w.nxt.copy()
    nh = len(nxt)
    prev = np.empty(nh, np.int64)
    prev[nxt] = np.arange(nh)
    alive = np.ones(nh, bool)
    for e in np.flatnonzero(col == GREEN).tolist():
        h, hp = 2 * e, 2 * e + 1
        a, b = prev[h], prev[hp]
        na, nb = nxt[hp], nxt[h]
        nxt[a], prev[na] = na, a
        nxt[b], prev[nb] = nb, b
        alive[h] = alive[hp] = False
    keep = np.flatnonzero(alive)
    pos = -np.ones(nh, np.int64)
    pos[keep] = np.arange(len(keep))
    new_nxt = pos[nxt[keep]]
    orient = []
    for e in range(w.ne):
        if col[e] == GREEN:
            continue
        o = int(so[e])
        orient.append(-o if col[e] == RED else o)
    ext = w._ext_half
    m = PlanarMap(new_nxt, None, int(pos[w.root]), int(pos[ext]),
                  tail_labels=w.tail_labels[keep] if w.tail_labels is not None else None,
                  deco={"orient": np.array(orient, np.int8)})
    bv = BipolarView(m)
    s, n = bv.poles()
    m.deco["poles"] = [int(m.vertex_label[s]), int(m.vertex_label[n])]
    return m


def orientation_code(m):
    """Canonical code with a per-half-edge 'points north' tag."""
    bv = BipolarView(m)
    return m.canonical_code(half_tags=bv.up.astype(int).tolist())


# -- conditioned finite samples -----------------------------------------------------------

def sample_finite_walk(dist, n_edges, seed, start=None, end=None, batch=4096, max_batches=2000):
    """Walk with n_edges - 1 steps from ``start`` to ``end`` inside the quarter plane.

    With ``start``/``end`` None the end points are (xi1, 0) and (0, xi2) with
    P[(xi1, xi2) = (i, j)] = 2^(-i-j-2), which gives the uniform law on bipolar
    maps with n_edges edges under the uniform step law.  Plain rejection.
    """
    from .walks import _rng
    count = n_edges - 1
    for b in range(max_batches):
        g = _rng(seed, 900, b)
        dl, dr = dist.sample_steps(_mix(seed, b), 3, batch * count)
        dl = dl.reshape(batch, count)
        dr = dr.reshape(batch, count)
        if start is None:
            x1 = g.geometric(0.5, size=batch) - 1
            x2 = g.geometric(0.5, size=batch) - 1
        else:
            x1 = np.full(batch, start[0])
            x2 = np.full(batch, end[1])
        s0 = np.zeros(batch, np.int64) if start is None else np.full(batch, start[1])
        L = np.concatenate([x1[:, None], x1[:, None] + np.cumsum(dl, axis=1)], axis=1)
        R = np.concatenate([s0[:, None], s0[:, None] + np.cumsum(dr, axis=1)], axis=1)
        end_l = 0 if end is None else end[0]
        ok = (L.min(axis=1) >= 0) & (R.min(axis=1) >= 0) & (L[:, -1] == end_l) & (R[:, -1] == x2)
        hit = np.flatnonzero(ok)
        if len(hit):
            k = hit[0]
            return WalkPath(0, L[k].astype(np.int64), R[k].astype(np.int64), dist)
    raise RuntimeError("no accepted walk; increase max_batches")


def _mix(seed, b):
    return (int(seed) * 0x9E3779B1 + b + 1) & ((1 << 63) - 1)


# -- fast kernel -----------------------------------------------------------------------------

@kernel
def _bipolar_graph_kernel(dl, dr, k_root, greens):
    """Vertex graph of the sewn window.

    Returns (eu, ev, boundary flag per vertex, root vertex, vertex count).  With
    ``greens`` the Schnyder green edges of every two-east-edge face are added.
    """
    n = dl.shape[0]
    cap_e = 4
    for k in range(n):
        if dl[k] >= 0:
            cap_e += dl[k] + 1 - dr[k]
        else:
            cap_e += 1
    cap_e = 2 * cap_e + 4
    eu = np.empty(cap_e, np.int64)
    ev = np.empty(cap_e, np.int64)
    lower = np.empty(cap_e, np.int64)
    upper = np.empty(cap_e, np.int64)
    ray = np.zeros(cap_e, np.bool_)
    nl = 0
    nu = 0
    nv = 2
    ne = 1
    eu[0] = 0
    ev[0] = 1
    ray[0] = True
    bottom = 0
    top = 1
    e = 0
    root = 0
    gu = np.empty(cap_e, np.int64)
    gv = np.empty(cap_e, np.int64)
    ng = 0
    wtmp = np.empty(cap_e, np.int64)
    if k_root < 0:
        root = eu[e]
    for k in range(n):
        a = dl[k]
        b = dr[k]
        if a == -1 and b == 1:
            lower[nl] = e
            nl += 1
            if nu > 0:
                nu -= 1
                e = upper[nu]
            else:
                eu[ne] = top
                ev[ne] = nv
                ray[ne] = True
                top = nv
                nv += 1
                e = ne
                ne += 1
        else:
            i = a
            j = -b
            nw = 1
            wtmp[0] = e
            for _ in range(j):
                if nl > 0:
                    nl -= 1
                    wtmp[nw] = lower[nl]
                else:
                    eu[ne] = nv
                    ev[ne] = bottom
                    ray[ne] = True
                    bottom = nv
                    nv += 1
                    wtmp[nw] = ne
                    ne += 1
                nw += 1
            # wtmp runs top -> bottom
            s = eu[wtmp[nw - 1]]
            nn = ev[wtmp[0]]
            prev = s
            first_new = ne
            for q in range(i + 1):
                if q < i:
                    x = nv
                    nv += 1
                else:
                    x = nn
                eu[ne] = prev
                ev[ne] = x
                ne += 1
                prev = x
            if greens and i == 1:
                x = ev[first_new]
                for q in range(nw - 1):
                    gu[ng] = ev[wtmp[nw - 1 - q]]
                    gv[ng] = x
                    ng += 1
            for q in range(i, 0, -1):
                upper[nu] = first_new + q
                nu += 1
            e = first_new
        if k == k_root:
            root = eu[e]
    bnd = np.zeros(nv, np.bool_)
    for q in range(ne):
        if ray[q]:
            bnd[eu[q]] = True
            bnd[ev[q]] = True
    for q in range(nl):
        bnd[eu[lower[q]]] = True
        bnd[ev[lower[q]]] = True
    for q in range(nu):
        bnd[eu[upper[q]]] = True
        bnd[ev[upper[q]]] = True
    bnd[eu[e]] = True
    bnd[ev[e]] = True
    out_u = np.empty(ne + ng, np.int64)
    out_v = np.empty(ne + ng, np.int64)
    out_u[:ne] = eu[:ne]
    out_v[:ne] = ev[:ne]
    out_u[ne:] = gu[:ng]
    out_v[ne:] = gv[:ng]
    return out_u, out_v, bnd, root, nv


def fast_bipolar_graph(walk, greens=False):
    """(nv, u, v, boundary, root) of the window map; vertex ids match the reference sewer."""
    dl, dr = walk.steps()
    k_root = -(walk.lo + 1)
    u, v, bnd, root, nv = _bipolar_graph_kernel(dl.astype(np.int64), dr.astype(np.int64), k_root,
                                                bool(greens))
    return int(nv), u, v, bnd, int(root)
