"""Half-edge combinatorial maps.

A map is stored as two permutations of the half-edges: ``twin`` (an involution
without fixed points, normally ``h ^ 1``) and ``nxt``, the successor of a
half-edge along the boundary of the face on its left.  Vertices are the orbits
of ``sigma = nxt o twin``, which sends a half-edge to another half-edge leaving
the same vertex.
"""
import json

import numpy as np

from ._kernels import kernel


@kernel
def _orbits(perm):
    n = perm.shape[0]
    lab = np.full(n, -1, np.int64)
    k = 0
    for s in range(n):
        if lab[s] >= 0:
            continue
        h = s
        while lab[h] < 0:
            lab[h] = k
            h = perm[h]
        if h != s:
            return lab, -1
        k += 1
    return lab, k


class MapError(ValueError):
    pass


class PlanarMap:
    """Rooted combinatorial map.

    ``tail_labels`` (optional) are builder-side vertex names for each half-edge;
    when given, they must induce exactly the vertex orbits.  ``deco`` holds
    model decorations keyed by name, for example ``edge_tag`` (per edge),
    ``vertex_color`` (per vertex label) or ``orient`` (per edge, +1 when the edge
    points along half-edge 2e).
    """

    def __init__(self, nxt, twin=None, root=0, external_face=None, tail_labels=None, deco=None,
                 check=True):
        self.nxt = np.asarray(nxt, dtype=np.int64)
        nh = len(self.nxt)
        self.twin = (np.arange(nh, dtype=np.int64) ^ 1) if twin is None else np.asarray(twin, np.int64)
        self.root = int(root)
        self.deco = dict(deco or {})
        self.tail_labels = None if tail_labels is None else np.asarray(tail_labels, dtype=np.int64)
        self._ext_half = external_face  # a half-edge on the external face, or None
        self._face = self._vert = None
        self.nf = self.nv = None
        if check:
            self._derive()

    # -- derived structure -------------------------------------------------
    def _derive(self):
        nh = len(self.nxt)
        if nh % 2:
            raise MapError("odd number of half-edges")
        if not np.array_equal(np.sort(self.nxt), np.arange(nh)):
            raise MapError("nxt is not a permutation")
        face, nf = _orbits(self.nxt)
        sigma = self.nxt[self.twin]
        vert, nv = _orbits(sigma)
        if nf < 0 or nv < 0:
            raise MapError("orbit computation failed")
        self._face, self.nf = face, nf
        self._vert, self.nv = vert, nv
        if self.tail_labels is not None:
            lab = self.tail_labels
            first = {}
            for h in range(nh):
                o = int(vert[h])
                if o in first:
                    if first[o] != lab[h]:
                        raise MapError(f"vertex orbit {o} carries labels {first[o]} and {lab[h]}")
                else:
                    first[o] = int(lab[h])
            if len(set(first.values())) != nv:
                raise MapError("a vertex label splits into several rotation orbits")
            self.vertex_label = np.array([first[o] for o in range(nv)], dtype=np.int64)
            self.vertex_of_label = {l: o for o, l in enumerate(self.vertex_label.tolist())}
        else:
            self.vertex_label = np.arange(nv, dtype=np.int64)
            self.vertex_of_label = {o: o for o in range(nv)}

    @property
    def n_half(self):
        return len(self.nxt)

    @property
    def ne(self):
        return len(self.nxt) // 2

    def face_of(self, h):
        return int(self._face[h])

    def tail(self, h):
        """Vertex orbit id of the tail of half-edge h."""
        return int(self._vert[h])

    def head(self, h):
        return int(self._vert[self.twin[h]])

    def tail_label(self, h):
        return int(self.vertex_label[self._vert[h]])

    def head_label(self, h):
        return int(self.vertex_label[self._vert[self.twin[h]]])

    @property
    def external_face(self):
        return None if self._ext_half is None else self.face_of(self._ext_half)

    def face_cycle(self, f_or_h, by_half=True):
        h = int(f_or_h) if by_half else int(np.flatnonzero(self._face == f_or_h)[0])
        out = [h]
        g = self.nxt[h]
        while g != h:
            out.append(int(g))
            g = self.nxt[g]
        return out

    def faces(self):
        seen = np.zeros(self.nf, bool)
        out = []
        for h in range(self.n_half):
            f = self._face[h]
            if not seen[f]:
                seen[f] = True
                out.append(self.face_cycle(h))
        return out

    def face_halfedges(self):
        """List, indexed by face id, of the half-edge cycle of each face."""
        out = [None] * self.nf
        for cyc in self.faces():
            out[self._face[cyc[0]]] = cyc
        return out

    def rotation(self, h):
        """Half-edges leaving tail(h), following sigma from h."""
        out = [int(h)]
        g = self.nxt[self.twin[h]]
        while g != h:
            out.append(int(g))
            g = self.nxt[self.twin[g]]
        return out

    def degree_of_face(self, f):
        return int(np.sum(self._face == f))

    def edge_endpoints(self):
        """Arrays (u, v) of vertex orbit ids for each edge (tail, head of 2e)."""
        h = np.arange(0, self.n_half, 2)
        return self._vert[h], self._vert[self.twin[h]]

    def euler_characteristic(self):
        return self.nv - self.ne + self.nf

    def vertex_graph_pairs(self):
        """Distinct vertex pairs joined by an edge (loops dropped)."""
        u, v = self.edge_endpoints()
        a, b = np.minimum(u, v), np.maximum(u, v)
        keep = a != b
        return set(zip(a[keep].tolist(), b[keep].tolist()))

    def face_graph_pairs(self, exclude=()):
        """Distinct pairs of faces sharing an edge."""
        out = set()
        ex = set(exclude)
        for e in range(self.ne):
            f, g = self._face[2 * e], self._face[self.twin[2 * e]]
            if f != g and f not in ex and g not in ex:
                out.add((min(f, g), max(f, g)))
        return out

    # -- canonical code ----------------------------------------------------
    def canonical_code(self, root=None, half_tags=None, vertex_tags=None):
        """Tuple that identifies the rooted map up to orientation-preserving isomorphism.

        Half-edges are relabelled in breadth-first order from the root using
        ``nxt`` and ``twin``; optional per-half-edge and per-vertex tags are
        appended in that order.
        """
        root = self.root if root is None else int(root)
        nh = self.n_half
        lab = np.full(nh, -1, np.int64)
        order = [root]
        lab[root] = 0
        k = 0
        while k < len(order):
            h = order[k]
            k += 1
            for g in (self.nxt[h], self.twin[h]):
                if lab[g] < 0:
                    lab[g] = len(order)
                    order.append(int(g))
        if len(order) != nh:
            raise MapError("map is not connected")
        code = [(int(lab[self.nxt[h]]), int(lab[self.twin[h]])) for h in order]
        extra = []
        if half_tags is not None:
            extra.append(tuple(half_tags[h] for h in order))
        if vertex_tags is not None:
            extra.append(tuple(vertex_tags(self.tail_label(h)) for h in order))
        return (tuple(code),) + tuple(extra)

    # -- serialization -----------------------------------------------------
    def to_json(self):
        d = {
            "format": "matingtrees-map/1",
            "nxt": self.nxt.tolist(),
            "twin": self.twin.tolist(),
            "root": self.root,
            "external_half": self._ext_half,
        }
        if self.tail_labels is not None:
            d["tail_labels"] = self.tail_labels.tolist()
        deco = {}
        for k, v in self.deco.items():
            if isinstance(v, np.ndarray):
                deco[k] = v.tolist()
            elif isinstance(v, dict):
                deco[k] = {str(a): b for a, b in v.items()}
            else:
                deco[k] = v
        d["deco"] = deco
        return json.dumps(d, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        return cls(d["nxt"], d["twin"], d["root"], d.get("external_half"), d.get("tail_labels"),
                   d.get("deco"))


def from_face_cycles(n_half, cycles, root=0, external_half=None, tail_labels=None, twin=None,
                     deco=None):
    """Assemble a map from face boundary cycles listed as half-edge ids."""
    nxt = np.full(n_half, -1, np.int64)
    for cyc in cycles:
        for k, h in enumerate(cyc):
            if nxt[h] >= 0:
                raise MapError(f"half-edge {h} lies on two faces")
            nxt[h] = cyc[(k + 1) % len(cyc)]
    if np.any(nxt < 0):
        raise MapError(f"half-edge {int(np.flatnonzero(nxt < 0)[0])} lies on no face")
    return PlanarMap(nxt, twin, root, external_half, tail_labels, deco)


class Report:
    def __init__(self, ok, message="OK", counts=None):
        self.ok = ok
        self.message = message
        self.counts = counts or {}

    def __bool__(self):
        return self.ok

    def __repr__(self):
        return f"Report({self.message}, {self.counts})"


def validate(m, connected=True):
    """Check permutation axioms, Euler's formula, boundary and decorations."""
    nh = len(m.nxt)
    tw = m.twin
    if len(tw) != nh or not np.array_equal(np.sort(tw), np.arange(nh)):
        return Report(False, "twin is not a permutation")
    if np.any(tw == np.arange(nh)) or np.any(tw[tw] != np.arange(nh)):
        return Report(False, "twin involution")
    if not np.array_equal(np.sort(m.nxt), np.arange(nh)):
        return Report(False, "nxt is not a permutation")
    try:
        if m._face is None:
            m._derive()
    except MapError as e:
        return Report(False, str(e))
    counts = {"V": m.nv, "E": m.ne, "F": m.nf}
    if connected:
        try:
            m.canonical_code()
        except MapError:
            return Report(False, "map is not connected", counts)
        if m.nv - m.ne + m.nf != 2:
            return Report(False, f"Euler formula fails: V-E+F = {m.nv - m.ne + m.nf}", counts)
    if "boundary_edges" in m.deco and m.external_face is not None:
        ext = m.external_face
        want = set(int(e) for e in m.deco["boundary_edges"])
        have = {h // 2 for h in range(nh) if m._face[h] == ext}
        if want != have:
            return Report(False, "boundary edges differ from external-face edges", counts)
    for check in (_check_tree_partition, _check_bipolar, _check_schnyder, _check_colors):
        msg = check(m)
        if msg:
            return Report(False, msg, counts)
    return Report(True, "OK", counts)


def _check_tree_partition(m):
    tags = m.deco.get("edge_tag")
    if tags is None:
        return None
    tags = np.asarray(tags)
    vtype = m.deco.get("vertex_type")  # per vertex label: 0 primal, 1 dual
    u, v = m.edge_endpoints()
    lab = m.vertex_label
    for e, t in enumerate(tags.tolist()):
        tu, tv = vtype[int(lab[u[e]])], vtype[int(lab[v[e]])]
        if t == 0 and not (tu == 0 and tv == 0):
            return f"T edge {e} is not primal-primal"
        if t == 1 and not (tu == 1 and tv == 1):
            return f"T* edge {e} is not dual-dual"
        if t == 2 and tu == tv:
            return f"Q edge {e} does not join primal and dual"
    # T acyclic on primal vertices, T* acyclic on dual vertices
    for want in (0, 1):
        parent = {}

        def find(x):
            while parent.get(x, x) != x:
                parent[x] = parent.get(parent[x], parent[x])
                x = parent[x]
            return x

        for e in np.flatnonzero(tags == want).tolist():
            a, b = find(int(u[e])), find(int(v[e]))
            if a == b:
                return ("T" if want == 0 else "T*") + " contains a cycle"
            parent[a] = b
    return None


def _check_bipolar(m):
    orient = m.deco.get("orient")
    if orient is None:
        return None
    orient = np.asarray(orient)
    u, v = m.edge_endpoints()
    src = np.where(orient > 0, u, v)
    dst = np.where(orient > 0, v, u)
    indeg = np.bincount(dst, minlength=m.nv)
    outdeg = np.bincount(src, minlength=m.nv)
    poles = m.deco.get("poles")
    if poles is not None:
        s, n = m.vertex_of_label[int(poles[0])], m.vertex_of_label[int(poles[1])]
        for x in range(m.nv):
            if x == s:
                if indeg[x]:
                    return "south pole has an incoming edge"
            elif x == n:
                if outdeg[x]:
                    return "north pole has an outgoing edge"
            elif indeg[x] == 0 or outdeg[x] == 0:
                return f"vertex {x} is a source or sink"
    # acyclicity by Kahn
    order = topological_order(m.nv, src, dst)
    if order is None:
        return "orientation has a directed cycle"
    return None


def topological_order(nv, src, dst):
    indeg = np.bincount(dst, minlength=nv).astype(np.int64)
    adj = [[] for _ in range(nv)]
    for a, b in zip(src.tolist(), dst.tolist()):
        adj[a].append(b)
    stack = [x for x in range(nv) if indeg[x] == 0]
    out = []
    while stack:
        x = stack.pop()
        out.append(x)
        for y in adj[x]:
            indeg[y] -= 1
            if indeg[y] == 0:
                stack.append(y)
    return out if len(out) == nv else None


def _check_schnyder(m):
    colors = m.deco.get("schnyder_color")
    if colors is None:
        return None
    colors = np.asarray(colors)
    orient = np.asarray(m.deco["schnyder_orient"])
    outer = set(int(x) for x in m.deco["outer_vertices"])
    u, v = m.edge_endpoints()
    src = np.where(orient > 0, u, v)
    per = {}
    for e in range(m.ne):
        if colors[e] < 0:
            continue
        per.setdefault(int(m.vertex_label[src[e]]), []).append(int(colors[e]))
    for x in range(m.nv):
        lx = int(m.vertex_label[x])
        if lx in outer:
            continue
        if sorted(per.get(lx, [])) != [0, 1, 2]:
            return f"inner vertex {lx} has outgoing colors {sorted(per.get(lx, []))}"
    return None


def _check_colors(m):
    col = m.deco.get("vertex_color")
    if col is None:
        return None
    for k, c in (col.items() if isinstance(col, dict) else enumerate(col)):
        if c not in ("red", "blue", "undetermined"):
            return f"vertex {k} has color {c!r}"
    return None


def dual(m):
    """Dual map: faces become vertices.  nxt of the dual is sigma of the primal."""
    sigma = m.nxt[m.twin]
    d = PlanarMap(sigma, m.twin.copy(), m.root)
    return d


def radial_quadrangulation(m):
    """Radial map on vertices and faces; one edge per corner.

    Corner c (= half-edge h of the input) joins tail(h) to face(h).  Half-edge
    2c points vertex -> face and 2c+1 face -> vertex.  Each edge e = {h, h'} of
    the input gives the quadrilateral u -> f_right -> v -> f_left.
    """
    nh = m.n_half
    cycles = []
    for h in range(0, nh, 2):
        hp = int(m.twin[h])
        cycles.append([2 * int(m.nxt[hp]), 2 * hp + 1, 2 * int(m.nxt[h]), 2 * h + 1])
    labels = np.empty(2 * nh, np.int64)
    labels[0::2] = m._vert
    labels[1::2] = m.nv + m._face
    q = from_face_cycles(2 * nh, cycles, root=2 * m.root, tail_labels=labels)
    q.deco["vertex_kind"] = {int(x): (0 if x < m.nv else 1) for x in range(m.nv + m.nf)}
    return q


def _as_adjacency(g):
    if hasattr(g, "pairs") and callable(g.pairs):
        verts = list(g.vertices())
        pairs = g.pairs()
    else:
        verts, pairs = g
    adj = {v: set() for v in verts}
    for a, b in pairs:
        if a != b:
            adj[a].add(b)
            adj[b].add(a)
    return adj


def graph_isomorphic_mod_multiplicity(g1, g2, bijection):
    """True iff ``bijection`` (dict V1 -> V2) preserves adjacency in both directions.

    Graphs are AdjGraph objects or ``(vertices, pairs)`` tuples; multiplicity is
    ignored.
    """
    a1, a2 = _as_adjacency(g1), _as_adjacency(g2)
    if set(bijection) != set(a1):
        raise ValueError("bijection is not total on the first vertex set")
    if len(set(bijection.values())) != len(bijection) or set(bijection.values()) != set(a2):
        return False
    for x, nb in a1.items():
        if {bijection[y] for y in nb} != a2[bijection[x]]:
            return False
    return True


def first_mismatch(g1, g2, bijection):
    """A witness pair where adjacency differs, or None."""
    a1, a2 = _as_adjacency(g1), _as_adjacency(g2)
    inv = {v: k for k, v in bijection.items()}
    for x, nb in a1.items():
        img = {bijection[y] for y in nb}
        if img != a2[bijection[x]]:
            extra = img - a2[bijection[x]]
            missing = a2[bijection[x]] - img
            return x, sorted(extra), sorted(inv[y] for y in missing)
    return None


class IndexMaps:
    """Index maps between a window of integers and a window map.

    ``phi`` sends vertex labels to integers, ``psi`` integers to vertex labels,
    ``iota`` window-map elements to ambient elements (when an ambient map is
    available), ``lam`` integers to edges and ``lam_tilde`` integers to
    ``("v", label)`` or ``("f", face)``.
    """

    def __init__(self, phi, psi, iota=None, lam=None, lam_tilde=None, root_vertex=None):
        self.phi = phi
        self.psi = psi
        self.iota = iota
        self.lam = lam
        self.lam_tilde = lam_tilde
        self.root_vertex = root_vertex

    def root_conditions(self):
        return self.phi.get(self.root_vertex) == 0 and self.psi.get(0) == self.root_vertex
