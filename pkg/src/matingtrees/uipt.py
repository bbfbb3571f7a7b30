"""Kreweras walks and site-percolated triangulations.

Steps a = (1, 0) and b = (0, 1) glue a triangle on the head edge; the head moves
to the triangle's right side (a) or left side (b) and the other side joins the
left or right frontier.  A step c = (-1, -1) glues the head to one of its two
frontier neighbours e_L, e_R: the one whose face behind it is older loses, the
head is glued to it and the other neighbour becomes the new head.  The vertex
shared by the glued edges is coloured red (left glue) or blue (right glue).

Frontiers are stacks of ``(edge, time)`` where ``time`` is the step that
created the face behind the edge.  Ray edges sit behind the window; their
times are sentinels with the left ray older than the right one, so a c step
with both neighbours on rays glues to the left.

Replacing every c by (-a, -b) gives a walk with nearest-neighbour steps; its
sewn map, with every (-a, -b) pair of triangles contracted, is the map above.
"""
import numpy as np

from . import mullin
from .graphs import build_h_graph, MULLIN
from .maps import IndexMaps, PlanarMap, from_face_cycles, graph_isomorphic_mod_multiplicity
from .walks import WalkPath
from ._kernels import kernel

A, B, C = 0, 1, 2
KREWERAS_CODES = {(1, 0): A, (0, 1): B, (-1, -1): C}
NEG = -(1 << 60)
LEFT_RAY_TIME = NEG - 1
RIGHT_RAY_TIME = NEG


class SewingError(ValueError):
    pass


def _codes(steps):
    steps = np.asarray(steps, dtype=np.int64).reshape(-1, 2)
    out = np.empty(len(steps), np.int64)
    for k, (a, b) in enumerate(steps.tolist()):
        c = KREWERAS_CODES.get((a, b))
        if c is None:
            raise SewingError(f"step {(a, b)} is not a Kreweras step")
        out[k] = c
    return out


class _UnionFind:
    def __init__(self):
        self.parent = []

    def add(self):
        self.parent.append(len(self.parent))
        return len(self.parent) - 1

    def find(self, x):
        p = self.parent
        while p[x] != x:
            p[x] = p[p[x]]
            x = p[x]
        return x

    def union(self, a, b):
        a, b = self.find(a), self.find(b)
        if a != b:
            self.parent[max(a, b)] = min(a, b)
        return min(a, b)


class KrewerasState:
    """Sewing record.  Per step k (position ``k - first``):

    ``head_after`` edge id of the head after step k (the edge lambda(k));
    ``lam_tilde`` ("f", triangle position) or ("v", vertex id);
    ``left_len``/``right_len`` frontier lengths minus rays used.
    """

    def __init__(self):
        self.eu, self.ev = [], []
        self.uf = _UnionFind()
        self.tri_half = []
        self.tri_step = []
        self.glued = {}
        self.glue_log = []
        self.colors = {}
        self.left, self.right = [], []
        self.left_rays, self.right_rays = [], []
        self.head_after = []
        self.lam_tilde = []
        self.left_len, self.right_len = [], []
        self.first = 0
        self.map = None

    def new_edge(self, u, v):
        self.eu.append(u)
        self.ev.append(v)
        return len(self.eu) - 1

    @property
    def last(self):
        return self.first + len(self.head_after) - 1

    def initial_path(self):
        return self.left_rays[::-1] + [self.initial_head] + self.right_rays

    def final_frontier(self):
        return [e for e, _ in self.left] + [self.head] + [e for e, _ in reversed(self.right)]


def sew_kreweras_steps(steps, first=0):
    codes = _codes(steps)
    st = KrewerasState()
    st.first = int(first)
    uf = st.uf
    hl, hr = uf.add(), uf.add()
    st.head = st.initial_head = st.new_edge(hl, hr)
    st.head_time = NEG
    for k, c in enumerate(codes.tolist()):
        t = st.first + k
        eh = st.head
        hl, hr = uf.find(st.eu[eh]), uf.find(st.ev[eh])
        if c == A or c == B:
            x = uf.add()
            el = st.new_edge(hl, x)
            er = st.new_edge(x, hr)
            st.tri_half.append([2 * eh, 2 * er + 1, 2 * el + 1])
            st.tri_step.append(t)
            if c == A:
                st.left.append((el, t))
                st.head = er
            else:
                st.right.append((er, t))
                st.head = el
            st.head_time = t
            st.lam_tilde.append(("f", len(st.tri_half) - 1))
        else:
            if st.left:
                e_l, t_l = st.left.pop()
            else:
                u = uf.add()
                e_l = st.new_edge(u, hl)
                st.left_rays.append(e_l)
                t_l = LEFT_RAY_TIME
            if st.right:
                e_r, t_r = st.right.pop()
            else:
                w = uf.add()
                e_r = st.new_edge(hr, w)
                st.right_rays.append(e_r)
                t_r = RIGHT_RAY_TIME
            if t_l < t_r:
                # glue head to e_L: its far end meets hr
                st.uf.union(st.eu[e_l], hr)
                other = e_l
                colored, col = hl, "red"
                st.head, st.head_time = e_r, t_r
            else:
                st.uf.union(st.ev[e_r], hl)
                other = e_r
                colored, col = hr, "blue"
                st.head, st.head_time = e_l, t_l
            st.glued[eh] = other
            st.glued[other] = eh
            st.glue_log.append((eh, other))
            st.colors[colored] = col
            st.lam_tilde.append(("v", colored))
        st.head_after.append(st.head)
        st.left_len.append(len(st.left) - len(st.left_rays))
        st.right_len.append(len(st.right) - len(st.right_rays))
    _assemble(st)
    return st


def _assemble(st):
    ne = len(st.eu)
    uf = st.uf
    # old half-edge -> new id; glued edges pair their inner (odd) halves
    new = -np.ones(2 * ne, np.int64)
    nid = 0
    for e in range(ne):
        if e in st.glued:
            o = st.glued[e]
            if o < e:
                continue
            new[2 * e + 1] = nid
            new[2 * o + 1] = nid + 1
        else:
            new[2 * e] = nid
            new[2 * e + 1] = nid + 1
        nid += 2
    outer = [2 * e for e in st.final_frontier()] + [2 * e + 1 for e in reversed(st.initial_path())]
    cycles = [[int(new[h]) for h in tri] for tri in st.tri_half] + [[int(new[h]) for h in outer]]
    if any(h < 0 for cyc in cycles for h in cyc):
        raise SewingError("a removed half-edge is used by a face")
    labels = np.empty(nid, np.int64)
    for h in range(2 * ne):
        if new[h] >= 0:
            e = h // 2
            labels[new[h]] = uf.find(st.eu[e] if h % 2 == 0 else st.ev[e])
    k0 = -st.first - 1  # position of step -1
    root_edge = st.head_after[k0] if 0 <= k0 < len(st.head_after) else st.initial_head
    root = int(new[2 * root_edge + 1])
    colors = {}
    for v, c in st.colors.items():
        r = uf.find(v)
        if colors.get(r, c) != c:
            raise SewingError("a vertex received two colours")
        colors[r] = c
    deco = {"vertex_color": colors}
    st.map = from_face_cycles(nid, cycles, root=root, external_half=cycles[-1][0], tail_labels=labels,
                              deco=deco)
    st.half_new = new
    st.tri_face = [st.map.face_of(cyc[0]) for cyc in cycles[:-1]]


def sew_kreweras(walk):
    """Returns ``(map, state)``; the map is rooted at the inner side of the head before step 0."""
    dl, dr = walk.steps()
    st = sew_kreweras_steps(np.stack([dl, dr], axis=1), first=walk.lo + 1)
    return st.map, st


def vertex_colors(st):
    """Colour of every vertex of the window map: red, blue or undetermined."""
    m = st.map
    cmap = st.map.deco["vertex_color"]
    return {int(v): cmap.get(int(v), "undetermined") for v in m.vertex_label.tolist()}


def extract_kreweras(st):
    """Read the walk back from the map and the exploration order.

    A vertex visit is a c step.  A triangle visit is a if lambda(k) is the
    triangle's right side and b if it is the left side; sides are compared as
    edges of the final map, after all gluing.
    """
    m = st.map
    new = st.half_new

    def edge_of(e):
        h = new[2 * e + 1]
        return int(min(h, m.twin[h]) // 2)

    steps = []
    for k, (kind, x) in enumerate(st.lam_tilde):
        if kind == "v":
            steps.append((-1, -1))
            continue
        cyc = st.tri_half[x]
        # ccw: base (hl -> hr), right side (hr -> x), left side (x -> hl)
        right = edge_of(cyc[1] // 2)
        left = edge_of(cyc[2] // 2)
        lam = edge_of(st.head_after[k])
        if right == left:
            raise SewingError("triangle sides were identified")
        if lam == right:
            steps.append((1, 0))
        elif lam == left:
            steps.append((0, 1))
        else:
            raise SewingError("head after a triangle step is not one of its sides")
    steps = np.array(steps, dtype=np.int64)
    L = np.concatenate([[0], np.cumsum(steps[:, 0])])
    R = np.concatenate([[0], np.cumsum(steps[:, 1])])
    lo = st.first - 1
    if lo <= 0 <= lo + len(steps):
        L = L - L[-lo]
        R = R - R[-lo]
    return WalkPath(lo, L, R)


class HatTransform:
    def __init__(self, hat_steps, alpha_hat, alpha, n_minus, n_plus, first):
        self.hat_steps = hat_steps
        self.alpha_hat = alpha_hat  # original index -> hat index
        self.alpha = alpha          # hat index -> original index
        self.n_minus = n_minus
        self.n_plus = n_plus
        self.first = first

    def hat_walk(self):
        steps = np.asarray(self.hat_steps, dtype=np.int64).reshape(-1, 2)
        L = np.concatenate([[0], np.cumsum(steps[:, 0])])
        R = np.concatenate([[0], np.cumsum(steps[:, 1])])
        lo = -self.n_minus - 1
        if lo <= 0 <= lo + len(steps):
            L = L - L[-lo]
            R = R - R[-lo]
        return WalkPath(lo, L, R)


def hat_transform(walk):
    """Replace each c by (-a, -b), with the time changes between the two walks."""
    dl, dr = walk.steps()
    codes = _codes(np.stack([dl, dr], axis=1))
    first = walk.lo + 1
    n_c_before = int(np.sum(codes[: max(0, -first)] == C))
    if first > 0:
        raise SewingError("window must contain step 0")
    h = first - n_c_before
    alpha_hat, alpha, hat_steps = {}, {}, []
    for k, c in enumerate(codes.tolist()):
        i = first + k
        alpha_hat[i] = h
        alpha[h] = i
        if c == A:
            hat_steps.append((1, 0))
        elif c == B:
            hat_steps.append((0, 1))
        else:
            hat_steps.extend([(-1, 0), (0, -1)])
            alpha[h + 1] = i
        h += 2 if c == C else 1
    if alpha_hat.get(0, 0) != 0:
        raise SewingError("hat time change does not fix 0")
    n_minus = -alpha_hat[first]
    last = first + len(codes) - 1
    n_plus = alpha_hat[last] + (1 if codes[-1] == C else 0)
    return HatTransform(hat_steps, alpha_hat, alpha, n_minus, n_plus, first)


def hat_alpha_sup(ht, k):
    """alpha(k) = sup{ j : alpha_hat(j) <= k } evaluated on the window."""
    best = None
    for j, h in ht.alpha_hat.items():
        if h <= k and (best is None or j > best):
            best = j
    return best


def _d_quads(ht, hst):
    """Half-edges of each (-a, -b) triangle pair in the hat map, in original step order."""
    out = []
    for i, h in sorted(ht.alpha_hat.items()):
        if ht.hat_steps[h - (-ht.n_minus)] != (-1, 0):
            continue
        k1 = h - hst.first
        t1, t2 = hst.tri_half[k1], hst.tri_half[k1 + 1]
        # t1 = [2 e4, 2 e1, 2 m + 1]; t2 = [2 m, 2 e2, 2 e3 + 1]
        out.append({"step": i, "t1": t1, "t2": t2})
    return out


def contract(hat_map, quads, older_left, root=None):
    """Contract each quadrilateral of a (-a, -b) triangle pair.

    ``quads`` lists dicts with the half-edge cycles ``t1`` = (e4, e1, m') and
    ``t2`` = (m, e2, e3') of the two triangles.  ``older_left(face_L, face_R)``
    decides the gluing: True identifies e1 with e4 and e2 with e3, False
    identifies e1 with e2 and e3 with e4.  Returns the contracted map and, for
    every contraction, the surviving half-edge whose tail is the coloured vertex.
    """
    nxt = hat_map.nxt.copy()
    twin = hat_map.twin.copy()
    alive = np.ones(len(nxt), bool)
    face = hat_map._face
    root = hat_map.root if root is None else root
    colored = []
    for q in quads:
        h4, h1, hm1 = q["t1"]
        hm2, h2, h3 = q["t2"]
        if twin[hm1] != hm2 or face[h4] != face[h1] or face[h2] != face[h3]:
            raise SewingError("D_k is not a valid quadrilateral")
        inside = {h4, h1, hm1, hm2, h2, h3}
        g1, g2, g3, g4 = twin[h1], twin[h2], twin[h3], twin[h4]
        if any(g in inside for g in (g1, g2, g3, g4)) or not all(alive[[g1, g2, g3, g4]]):
            raise SewingError("D_k is not a valid quadrilateral")
        if older_left(face[g4], face[g2]):
            twin[g1], twin[g4] = g4, g1
            twin[g2], twin[g3] = g3, g2
            colored.append((g4, "red"))
            rep3 = g2
        else:
            twin[g1], twin[g2] = g2, g1
            twin[g3], twin[g4] = g4, g3
            colored.append((g1, "blue"))
            rep3 = g4
        if root == h3:
            root = rep3
        elif root in inside:
            raise SewingError("root lies inside a contracted quadrilateral")
        for h in inside:
            alive[h] = False
    keep = np.flatnonzero(alive)
    pos = -np.ones(len(nxt), np.int64)
    # renumber so that twins are 2k, 2k+1
    k = 0
    for h in keep.tolist():
        if pos[h] >= 0:
            continue
        pos[h] = k
        pos[twin[h]] = k + 1
        k += 2
    new_nxt = np.empty(k, np.int64)
    for h in keep.tolist():
        new_nxt[pos[h]] = pos[nxt[h]]
    ext = hat_map._ext_half
    m = PlanarMap(new_nxt, None, int(pos[root]), None if ext is None else int(pos[ext]))
    colors = {m.tail(int(pos[h])): c for h, c in colored}
    return m, colors, pos


def _hat_pipeline(walk):
    ht = hat_transform(walk)
    hw = ht.hat_walk()
    hmap, hst = mullin.sew_mullin(hw)
    quads = _d_quads(ht, hst)
    ext = hmap.external_face

    def time_of(face):
        if face == ext:
            return None
        return ht.alpha[hst.face_index[face]]

    def older_left(f_l, f_r):
        tl, tr = time_of(f_l), time_of(f_r)
        if tl is None:
            return True
        if tr is None:
            return False
        return tl < tr

    # root: inner side of the hat head before hat step alpha_hat(0)
    hk = ht.alpha_hat.get(0)
    if hk is None:
        raise SewingError("window must contain step 0")
    pos = hk - hst.first - 1
    root_edge = hst.head_after[pos] if pos >= 0 else hst.initial_head
    root = 2 * root_edge + 1
    cmap, colors, newpos = contract(hmap, quads, older_left, root=root)
    return ht, hw, hmap, hst, quads, cmap, colors, newpos


def verify_prop6(walk):
    """(i) hat structure graph vs hat triangle graph; (ii) contraction vs Kreweras map."""
    ht, hw, hmap, hst, quads, cmap, colors, _ = _hat_pipeline(walk)
    if len(hw) >= 3:
        hg = build_h_graph(hw, MULLIN)
        tg = mullin.triangle_graph(hst)
        ok1 = graph_isomorphic_mod_multiplicity(hg, tg, {i: i for i in hg.vertices()})
    else:
        ok1 = len(mullin.triangle_graph(hst).ei) == 0
    kmap, kst = sew_kreweras(walk)
    kcol = kmap.deco["vertex_color"]
    code_k = kmap.canonical_code(vertex_tags=lambda v: kcol.get(v, "undetermined"))
    code_c = cmap.canonical_code(vertex_tags=lambda v: colors.get(v, "undetermined"))
    return ok1, code_k == code_c


def uipt_phi_psi(walk):
    """Index maps phi_n = alpha o phi_hat o beta_hat and psi_n = beta o psi_hat o alpha_hat.

    phi_hat(v): smallest |j| (ties to +) over hat triangles containing v;
    psi_hat(j): right end of the hat head before hat step j;
    beta_hat(w): the preimage of w with the smallest |phi_hat|, then label.
    """
    ht, hw, hmap, hst, quads, cmap, colors, newpos = _hat_pipeline(walk)
    # beta: hat vertex label -> contracted vertex
    beta = {}
    for h in range(hmap.n_half):
        p = newpos[h]
        if p >= 0:
            v = hmap.tail_label(h)
            w = cmap.tail(int(p))
            if beta.setdefault(v, w) != w:
                raise SewingError("contraction does not induce a vertex map")
    phi_hat = {}
    for k, tri in enumerate(hst.tri_half):
        j = hst.first + k
        for h in tri:
            v = hmap.tail_label(h)
            b = phi_hat.get(v)
            if b is None or abs(j) < abs(b) or (abs(j) == abs(b) and j > b):
                phi_hat[v] = j

    def psi_hat(j):
        k = j - hst.first
        e = hst.head_after[k - 1] if k >= 1 else hst.initial_head
        return hst.ev[e]

    pre = {}
    for v, w in beta.items():
        key = (abs(phi_hat[v]), -phi_hat[v], v)
        if w not in pre or key < pre[w][0]:
            pre[w] = (key, v)
    beta_hat = {w: v for w, (_, v) in pre.items()}
    phi = {w: ht.alpha[phi_hat[beta_hat[w]]] for w in beta_hat}
    psi = {i: beta[psi_hat(ht.alpha_hat[i])] for i in ht.alpha_hat}
    root = cmap.tail(cmap.root)
    maps = IndexMaps(phi, psi, root_vertex=root)
    maps.beta = beta
    maps.beta_hat = beta_hat
    maps.hat = ht
    return maps


@kernel
def _uipt_graph_kernel(codes, k_root):
    """Vertex graph of the sewn window: edge list, boundary flags, root vertex.

    ``k_root`` is the position of step -1 (or -1 when the window starts at 0);
    the root is the right end of the head after that step.
    """
    n = codes.shape[0]
    cap_v = 2 * n + 4
    cap_e = 2 * n + 4
    parent = np.arange(cap_v)
    eu = np.empty(cap_e, np.int64)
    ev = np.empty(cap_e, np.int64)
    lst_e = np.empty(n + 1, np.int64)
    lst_t = np.empty(n + 1, np.int64)
    rst_e = np.empty(n + 1, np.int64)
    rst_t = np.empty(n + 1, np.int64)
    init = np.zeros(cap_v, np.bool_)
    nl = 0
    nr = 0
    nv = 2
    eu[0] = 0
    ev[0] = 1
    init[0] = True
    init[1] = True
    ne = 1
    head = 0
    root_edge = 0
    for k in range(n):
        c = codes[k]
        a = eu[head]
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        b = ev[head]
        while parent[b] != b:
            parent[b] = parent[parent[b]]
            b = parent[b]
        if c == 0 or c == 1:
            x = nv
            nv += 1
            eu[ne] = a
            ev[ne] = x
            el = ne
            ne += 1
            eu[ne] = x
            ev[ne] = b
            er = ne
            ne += 1
            if c == 0:
                lst_e[nl] = el
                lst_t[nl] = k
                nl += 1
                head = er
            else:
                rst_e[nr] = er
                rst_t[nr] = k
                nr += 1
                head = el
        else:
            if nl > 0:
                nl -= 1
                e_l = lst_e[nl]
                t_l = lst_t[nl]
            else:
                u = nv
                nv += 1
                init[u] = True
                eu[ne] = u
                ev[ne] = a
                e_l = ne
                ne += 1
                t_l = -3
            if nr > 0:
                nr -= 1
                e_r = rst_e[nr]
                t_r = rst_t[nr]
            else:
                w = nv
                nv += 1
                init[w] = True
                eu[ne] = b
                ev[ne] = w
                e_r = ne
                ne += 1
                t_r = -2
            if t_l < t_r:
                x = eu[e_l]
                y = b
                head = e_r
            else:
                x = ev[e_r]
                y = a
                head = e_l
            while parent[x] != x:
                x = parent[x]
            while parent[y] != y:
                y = parent[y]
            if x != y:
                if x < y:
                    parent[y] = x
                else:
                    parent[x] = y
        if k == k_root:
            root_edge = head
    bnd = np.zeros(nv, np.bool_)
    for v in range(nv):
        if init[v]:
            bnd[v] = True
    for j in range(nl):
        bnd[eu[lst_e[j]]] = True
        bnd[ev[lst_e[j]]] = True
    for j in range(nr):
        bnd[eu[rst_e[j]]] = True
        bnd[ev[rst_e[j]]] = True
    bnd[eu[head]] = True
    bnd[ev[head]] = True
    # resolve representatives
    for v in range(nv):
        r = v
        while parent[r] != r:
            r = parent[r]
        parent[v] = r
    root = parent[ev[root_edge]]
    out_u = np.empty(ne, np.int64)
    out_v = np.empty(ne, np.int64)
    for e in range(ne):
        out_u[e] = parent[eu[e]]
        out_v[e] = parent[ev[e]]
    rb = np.zeros(nv, np.bool_)
    for v in range(nv):
        if bnd[v]:
            rb[parent[v]] = True
    return out_u, out_v, rb, parent[:nv].copy(), root, nv


def fast_uipt_graph(walk):
    """(nv, u, v, boundary, root, rep) for the window map, vertex ids are representatives."""
    dl, dr = walk.steps()
    codes = _codes(np.stack([dl, dr], axis=1))
    k_root = -(walk.lo + 1) - 1
    u, v, bnd, rep, root, nv = _uipt_graph_kernel(codes, k_root)
    return nv, u, v, bnd, int(root), rep
