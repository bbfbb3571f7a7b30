"""Walks with steps (+-1, 0), (0, +-1) and spanning-tree decorated maps.

The sewing procedure builds a triangulation whose edges split into T (between
primal vertices), T* (between dual vertices) and Q (primal to dual).  Picture
the current map below a horizontal frontier.  The frontier reads, from left to
right, a run of T edges, the head Q edge (p, d), then a run of T* edges.  A step

  (1, 0)   glues triangle (p, d, x), x a new primal vertex; (p, x) joins the
           left run and (x, d) becomes the head;
  (0, 1)   glues triangle (p, d, x), x a new dual vertex; (x, d) joins the right
           run and (p, x) becomes the head;
  (-1, 0)  glues triangle (q, p, d) over the last left edge (q, p); head (q, d);
  (0, -1)  glues triangle (p, d, d') over the first right edge (d, d'); head (p, d').

When a run is empty the frontier is extended by a ray edge that belongs to the
initial path; ray edges are created lazily, only when a triangle needs them.

Every edge e is stored with half-edge 2e pointing left to right along the
frontier at the time it was created, so 2e faces the future and 2e+1 the past.
"""
import numpy as np

from .graphs import AdjGraph, CONSECUTIVE, LMATCH, RMATCH, build_h_graph, MULLIN
from .maps import IndexMaps, PlanarMap, from_face_cycles, graph_isomorphic_mod_multiplicity
from .walks import WalkPath
from ._kernels import kernel

T, TSTAR, Q = 0, 1, 2
PRIMAL, DUAL = 0, 1

STEP_CODES = {(1, 0): 0, (0, 1): 1, (-1, 0): 2, (0, -1): 3}


class SewingError(ValueError):
    pass


def _step_codes(steps):
    steps = np.asarray(steps, dtype=np.int64).reshape(-1, 2)
    out = np.empty(len(steps), np.int64)
    for k, (a, b) in enumerate(steps.tolist()):
        c = STEP_CODES.get((a, b))
        if c is None:
            raise SewingError(f"step {(a, b)} is not a nearest-neighbour step")
        out[k] = c
    return out


class MullinState:
    """Record of a sewing run.

    Attributes indexed by step position k (step index ``first + k``):
    ``tri_half[k]`` the three half-edges of triangle t(i) (counterclockwise),
    ``tri_edge[k]`` its non-Q edge, ``head_after[k]`` the head edge after step i.
    """

    def __init__(self):
        self.eu = []
        self.ev = []
        self.etag = []
        self.vtype = []
        self.tri_half = []
        self.tri_edge = []
        self.head_after = []
        self.left = []
        self.right = []
        self.left_rays = []
        self.right_rays = []
        self.first = 0
        self.head = -1
        self.initial_head = -1
        self.map = None

    # primitive allocation
    def new_vertex(self, t):
        self.vtype.append(t)
        return len(self.vtype) - 1

    def new_edge(self, u, v, tag):
        self.eu.append(u)
        self.ev.append(v)
        self.etag.append(tag)
        return len(self.eu) - 1

    @property
    def last(self):
        return self.first + len(self.tri_half) - 1

    def index_range(self):
        return range(self.first, self.last + 1)

    def triangle(self, i):
        return self.tri_half[i - self.first]

    def face_of_index(self, i):
        return self.map.face_of(self.tri_half[i - self.first][0])

    def initial_path(self):
        return self.left_rays[::-1] + [self.initial_head] + self.right_rays

    def final_frontier(self):
        return self.left + [self.head] + self.right[::-1]

    def primal_of_head(self, e):
        return self.eu[e]


def sew_steps(steps, first=0):
    """Run the sewing procedure on the given steps (step k has index first+k)."""
    codes = _step_codes(steps)
    st = MullinState()
    st.first = int(first)
    p = st.new_vertex(PRIMAL)
    d = st.new_vertex(DUAL)
    st.head = st.initial_head = st.new_edge(p, d, Q)
    for c in codes.tolist():
        eh = st.head
        p, d = st.eu[eh], st.ev[eh]
        if c == 0:
            x = st.new_vertex(PRIMAL)
            et = st.new_edge(p, x, T)
            eq = st.new_edge(x, d, Q)
            tri = [2 * eh, 2 * eq + 1, 2 * et + 1]
            st.left.append(et)
            nonq = et
        elif c == 1:
            x = st.new_vertex(DUAL)
            es = st.new_edge(x, d, TSTAR)
            eq = st.new_edge(p, x, Q)
            tri = [2 * eh, 2 * es + 1, 2 * eq + 1]
            st.right.append(es)
            nonq = es
        elif c == 2:
            if st.left:
                et = st.left.pop()
            else:
                q = st.new_vertex(PRIMAL)
                et = st.new_edge(q, p, T)
                st.left_rays.append(et)
            q = st.eu[et]
            eq = st.new_edge(q, d, Q)
            tri = [2 * et, 2 * eh, 2 * eq + 1]
            nonq = et
        else:
            if st.right:
                es = st.right.pop()
            else:
                dp = st.new_vertex(DUAL)
                es = st.new_edge(d, dp, TSTAR)
                st.right_rays.append(es)
            dp = st.ev[es]
            eq = st.new_edge(p, dp, Q)
            tri = [2 * eh, 2 * es, 2 * eq + 1]
            nonq = es
        st.tri_half.append(tri)
        st.tri_edge.append(nonq)
        st.head = eq
        st.head_after.append(eq)
    _assemble(st)
    return st


def _assemble(st):
    ne = len(st.eu)
    outer = [2 * e for e in st.final_frontier()] + [2 * e + 1 for e in reversed(st.initial_path())]
    cycles = list(st.tri_half) + [outer]
    labels = np.empty(2 * ne, np.int64)
    labels[0::2] = st.eu
    labels[1::2] = st.ev
    root = 2 * st.head_after[-st.first] if st.first <= 0 <= st.last else 2 * st.head_after[-1]
    deco = {
        "edge_tag": np.array(st.etag, np.int8),
        "vertex_type": np.array(st.vtype, np.int8),
        "initial_path": list(st.initial_path()),
        "first_index": st.first,
    }
    st.map = from_face_cycles(2 * ne, cycles, root=root, external_half=outer[0], tail_labels=labels,
                              deco=deco)
    st.tri_face = np.array([st.map.face_of(t[0]) for t in st.tri_half], np.int64)
    st.face_index = {int(f): st.first + k for k, f in enumerate(st.tri_face.tolist())}


def sew_mullin(walk):
    """Sew the steps of ``walk``; triangle t(i) is attached at the step into index i.

    Returns ``(map, state)``.  The map is rooted at the head after step 0,
    oriented primal to dual (so its face is t(1) and its twin's face is t(0)).
    """
    dl, dr = walk.steps()
    steps = np.stack([dl, dr], axis=1)
    st = sew_steps(steps, first=walk.lo + 1)
    return st.map, st


def extract_walk(m, initial_path=None, first_index=None):
    """Recover the steps from a decorated window map.

    Triangles are ordered along the chain of Q edges through the root: t(0) lies
    behind the root, t(1) in front of it.  A triangle's T (resp. T*) edge gives
    a first (resp. second) coordinate step, +1 if the triangle on the other side
    comes later and -1 if it comes earlier.  Outer-face partners are decided by
    whether the edge lies on the initial path (closing, -1) or not (opening, +1).
    """
    tags = np.asarray(m.deco["edge_tag"])
    init = set(m.deco["initial_path"] if initial_path is None else initial_path)
    first = m.deco["first_index"] if first_index is None else first_index
    ext = m.external_face
    cyc = m.face_halfedges()
    r = m.root
    # chain forward from t(0) via the root and backward via its other Q edge
    order_fwd = []
    f0 = m.face_of(m.twin[r])
    if f0 == ext:
        raise SewingError("root has no triangle behind it")
    order_fwd.append(f0)
    h = r
    while True:
        f = m.face_of(h)
        if f == ext:
            break
        order_fwd.append(f)
        qs = [g for g in cyc[f] if tags[g // 2] == Q and g != h]
        if len(qs) != 1:
            raise SewingError("triangle without exactly two Q sides")
        h = m.twin[qs[0]]
    order_bwd = []
    qs = [g for g in cyc[f0] if tags[g // 2] == Q and g != m.twin[r]]
    h = m.twin[qs[0]]
    while True:
        f = m.face_of(h)
        if f == ext:
            break
        order_bwd.append(f)
        qs = [g for g in cyc[f] if tags[g // 2] == Q and g != h]
        h = m.twin[qs[0]]
    order = order_bwd[::-1] + order_fwd
    base = -len(order_bwd)
    if base != first:
        raise SewingError(f"triangle chain starts at {base}, decoration says {first}")
    pos = {f: base + k for k, f in enumerate(order)}
    steps = []
    for k, f in enumerate(order):
        i = base + k
        nonq = [g for g in cyc[f] if tags[g // 2] != Q]
        if len(nonq) != 1:
            raise SewingError("triangle without exactly one tree side")
        g = nonq[0]
        e = g // 2
        other = m.face_of(m.twin[g])
        if other == ext:
            sign = -1 if e in init else 1
        else:
            sign = 1 if pos[other] > i else -1
        steps.append((sign, 0) if tags[e] == T else (0, sign))
    steps = np.array(steps, dtype=np.int64)
    # anchor: value 0 at index 0
    L = np.concatenate([[0], np.cumsum(steps[:, 0])])
    R = np.concatenate([[0], np.cumsum(steps[:, 1])])
    lo = base - 1
    if lo <= 0 <= lo + len(steps):
        L = L - L[-lo]
        R = R - R[-lo]
    return WalkPath(lo, L, R)


def triangle_graph(st):
    """Adjacency of the triangles t(i) through shared edges, on window indices."""
    m = st.map
    ext = m.external_face
    ei, ej, pv = [], [], []
    tags = m.deco["edge_tag"]
    for e in range(m.ne):
        f, g = m.face_of(2 * e), m.face_of(2 * e + 1)
        if f == ext or g == ext or f == g:
            continue
        a, b = st.face_index[f], st.face_index[g]
        ei.append(a)
        ej.append(b)
        t = tags[e]
        pv.append(CONSECUTIVE if t == Q else (LMATCH if t == T else RMATCH))
    return AdjGraph(st.first, st.last, ei, ej, pv)


def verify_prop_tri(walk):
    """Structure graph of the walk equals the triangle graph of its sewn map."""
    _, st = sew_mullin(walk)
    if len(walk) < 3:
        return len(triangle_graph(st).ei) == 0
    h = build_h_graph(walk, MULLIN)
    t = triangle_graph(st)
    return graph_isomorphic_mod_multiplicity(h, t, {i: i for i in h.vertices()})


def mullin_phi_psi(st):
    """phi: primal vertex -> smallest |i| with v on t(i) (ties to +); psi(i) = primal end of the head after step i."""
    m = st.map
    vt = np.asarray(m.deco["vertex_type"])
    best = {}
    for k, tri in enumerate(st.tri_half):
        i = st.first + k
        for h in tri:
            v = m.tail_label(h)
            if vt[v] != PRIMAL:
                continue
            b = best.get(v)
            if b is None or abs(i) < abs(b) or (abs(i) == abs(b) and i > b):
                best[v] = i
    psi = {st.first + k: st.eu[e] for k, e in enumerate(st.head_after)}
    root = m.tail_label(m.root)
    return IndexMaps(best, psi, root_vertex=root)


def primal_graph(st):
    """Primal map of the window as vertex pairs plus boundary vertices.

    Edges are the T edges and, for each T* edge with triangles on both sides,
    the edge joining the primal vertices of those two triangles.  A primal
    vertex is on the boundary when it touches the external face.
    """
    m = st.map
    ext = m.external_face
    vt = np.asarray(m.deco["vertex_type"])
    tags = np.asarray(m.deco["edge_tag"])
    cyc = m.face_halfedges()

    def primal_of(f):
        for g in cyc[f]:
            v = m.tail_label(g)
            if vt[v] == PRIMAL:
                return v
        raise SewingError("triangle without a primal vertex")

    pairs = []
    boundary = set()
    for e in range(m.ne):
        if tags[e] == T:
            pairs.append((st.eu[e], st.ev[e]))
        elif tags[e] == TSTAR:
            f, g = m.face_of(2 * e), m.face_of(2 * e + 1)
            if f != ext and g != ext:
                pairs.append((primal_of(f), primal_of(g)))
            else:
                # the dual partner of this edge lies outside the window
                boundary.add(primal_of(g if f == ext else f))
    for h in cyc[ext]:
        v = m.tail_label(h)
        if vt[v] == PRIMAL:
            boundary.add(v)
    verts = sorted({m.tail_label(h) for f in range(m.nf) if f != ext for h in cyc[f]
                    if vt[m.tail_label(h)] == PRIMAL})
    return verts, pairs, boundary


@kernel
def _primal_kernel(codes):
    """Fast primal-map builder: edge list plus per-vertex boundary flags.

    Tracks only the current primal vertex, the left run of primal vertices and
    the primal vertices that opened each pending T* edge.
    """
    n = codes.shape[0]
    left = np.empty(n + 1, np.int64)
    opened = np.empty(n + 1, np.int64)
    eu = np.empty(2 * n + 2, np.int64)
    ev = np.empty(2 * n + 2, np.int64)
    bnd = np.zeros(n + 2, np.bool_)
    nl = 0
    no = 0
    ne = 0
    nv = 1
    p = 0
    bnd[0] = True  # initial head lies on the initial path
    for k in range(n):
        c = codes[k]
        if c == 0:
            x = nv
            nv += 1
            eu[ne] = p
            ev[ne] = x
            ne += 1
            left[nl] = p
            nl += 1
            p = x
        elif c == 1:
            opened[no] = p
            no += 1
        elif c == 2:
            if nl > 0:
                nl -= 1
                q = left[nl]
            else:
                q = nv
                nv += 1
                bnd[q] = True
                bnd[p] = True
                eu[ne] = q
                ev[ne] = p
                ne += 1
            p = q
        else:
            if no > 0:
                no -= 1
                eu[ne] = opened[no]
                ev[ne] = p
                ne += 1
            else:
                bnd[p] = True
    # vertices on the final frontier
    for j in range(nl):
        bnd[left[j]] = True
    bnd[p] = True
    for j in range(no):
        bnd[opened[j]] = True
    return eu[:ne], ev[:ne], bnd[:nv], nv


def fast_primal_graph(walk):
    """Primal map of the window from the fast kernel: (nv, u, v, boundary, psi0)."""
    dl, dr = walk.steps()
    codes = _step_codes(np.stack([dl, dr], axis=1))
    k0 = -(walk.lo + 1)
    eu, ev, bnd, nv = _primal_kernel(codes)
    # recover the primal vertex after step 0 by replaying the prefix
    if 0 <= k0 < len(codes):
        root = _current_primal(codes[: k0 + 1])
    else:
        root = 0
    return nv, eu, ev, bnd, root


@kernel
def _current_primal_kernel(codes):
    n = codes.shape[0]
    left = np.empty(n + 1, np.int64)
    nl = 0
    nv = 1
    p = 0
    for k in range(n):
        c = codes[k]
        if c == 0:
            left[nl] = p
            nl += 1
            p = nv
            nv += 1
        elif c == 2:
            if nl > 0:
                nl -= 1
                p = left[nl]
            else:
                p = nv
                nv += 1
    return p


def _current_primal(codes):
    return int(_current_primal_kernel(codes))
