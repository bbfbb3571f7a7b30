"""Walk-encoded structure graphs and the discretized mated-CRT graph.

Both graphs live on an integer window [lo, hi].  Edges carry a provenance tag:
``CONSECUTIVE`` for i ~ i+1, ``LMATCH``/``RMATCH`` for edges produced by the
first or second coordinate.  A pair may carry several records; the number of
records is its multiplicity.
"""
import csv
import io
import struct

import numpy as np

from ._kernels import kernel

CONSECUTIVE, LMATCH, RMATCH = 0, 1, 2
PROV_NAMES = {CONSECUTIVE: "Consecutive", LMATCH: "L-match", RMATCH: "R-match"}

MULLIN, BIPOLAR = "Mullin", "Bipolar"


@kernel
def _stack_matches(v, a, b):
    """Pairs (q, r) of positions with (v[q]-a) v (v[r]-b) < min v[q+1..r-1].

    Only pairs with r >= q+2 are reported.  ``a`` and ``b`` are 0 or 1 and the
    values are integers, so the surviving stack is monotone and every reported
    pair pops exactly one stack element.
    """
    n = v.shape[0]
    stack = np.empty(n, np.int64)
    out_q = np.empty(n, np.int64)
    out_r = np.empty(n, np.int64)
    top = 0
    stack[0] = 0
    m = 0
    for r in range(1, n):
        vr = v[r]
        while top >= 0 and v[stack[top]] >= vr + a:
            p = stack[top]
            if top >= 1 and v[p] > vr - b:
                out_q[m] = stack[top - 1]
                out_r[m] = r
                m += 1
            top -= 1
        top += 1
        stack[top] = r
    return out_q[:m], out_r[:m]


@kernel
def _cell_matches(c):
    """Pairs (x1, x2), x2 >= x1+2, with c[x1] v c[x2] <= min c[x1+1..x2-1]."""
    n = c.shape[0]
    stack = np.empty(n, np.int64)
    cap = 2 * n + 16
    out_q = np.empty(cap, np.int64)
    out_r = np.empty(cap, np.int64)
    top = -1
    m = 0
    for r in range(n):
        cr = c[r]
        while top >= 0 and c[stack[top]] > cr:
            if top >= 1:
                if m == cap:
                    cap *= 2
                    nq = np.empty(cap, np.int64)
                    nr = np.empty(cap, np.int64)
                    nq[:m] = out_q[:m]
                    nr[:m] = out_r[:m]
                    out_q = nq
                    out_r = nr
                out_q[m] = stack[top - 1]
                out_r[m] = r
                m += 1
            top -= 1
        # ties: each equal-valued element p also closes a match with the one below
        k = top
        while k >= 1 and c[stack[k]] == cr:
            if stack[k - 1] <= r - 2:
                if m == cap:
                    cap *= 2
                    nq = np.empty(cap, np.int64)
                    nr = np.empty(cap, np.int64)
                    nq[:m] = out_q[:m]
                    nr[:m] = out_r[:m]
                    out_q = nq
                    out_r = nr
                out_q[m] = stack[k - 1]
                out_r[m] = r
                m += 1
            k -= 1
        top += 1
        stack[top] = r
    return out_q[:m], out_r[:m]


@kernel
def _bfs(indptr, indices, src, maxr):
    n = indptr.shape[0] - 1
    dist = np.full(n, -1, np.int64)
    queue = np.empty(n, np.int64)
    dist[src] = 0
    queue[0] = src
    head = 0
    tail = 1
    while head < tail:
        u = queue[head]
        head += 1
        du = dist[u]
        if maxr >= 0 and du >= maxr:
            continue
        for k in range(indptr[u], indptr[u + 1]):
            w = indices[k]
            if dist[w] < 0:
                dist[w] = du + 1
                queue[tail] = w
                tail += 1
    return dist


def csr_from_pairs(nv, u, v):
    """Symmetric CSR adjacency (duplicates kept; harmless for BFS)."""
    u = np.asarray(u, dtype=np.int64)
    v = np.asarray(v, dtype=np.int64)
    src = np.concatenate([u, v])
    dst = np.concatenate([v, u])
    order = np.argsort(src, kind="stable")
    indices = dst[order]
    counts = np.bincount(src, minlength=nv)
    indptr = np.zeros(nv + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    return indptr, indices


def bfs_distances(indptr, indices, src, maxr=-1):
    return _bfs(indptr, indices, int(src), int(maxr))


class AdjGraph:
    """Graph on the integer window [lo, hi] with provenance-tagged edge records."""

    def __init__(self, lo, hi, ei, ej, prov):
        self.lo, self.hi = int(lo), int(hi)
        ei = np.asarray(ei, dtype=np.int64)
        ej = np.asarray(ej, dtype=np.int64)
        a, b = np.minimum(ei, ej), np.maximum(ei, ej)
        if np.any(a == b):
            raise ValueError("self-loop")
        if len(a) and (a.min() < self.lo or b.max() > self.hi):
            raise ValueError("edge outside window")
        order = np.lexsort((np.asarray(prov), b, a))
        self.ei = a[order]
        self.ej = b[order]
        self.prov = np.asarray(prov, dtype=np.int8)[order]
        self._csr = None

    @property
    def n_vertices(self):
        return self.hi - self.lo + 1

    def vertices(self):
        return range(self.lo, self.hi + 1)

    def pairs(self):
        """Distinct adjacent pairs (i < j) as a set."""
        return set(zip(self.ei.tolist(), self.ej.tolist()))

    def multiplicity(self):
        out = {}
        for i, j in zip(self.ei.tolist(), self.ej.tolist()):
            out[(i, j)] = out.get((i, j), 0) + 1
        return out

    def records(self):
        return list(zip(self.ei.tolist(), self.ej.tolist(), self.prov.tolist()))

    def csr(self):
        if self._csr is None:
            a = self.ei - self.lo
            b = self.ej - self.lo
            key = np.unique(a * self.n_vertices + b)
            u = key // self.n_vertices
            v = key % self.n_vertices
            self._csr = csr_from_pairs(self.n_vertices, u, v)
        return self._csr

    def neighbors(self, i):
        indptr, indices = self.csr()
        k = i - self.lo
        return sorted((indices[indptr[k]:indptr[k + 1]] + self.lo).tolist())

    def degree(self, i):
        return len(self.neighbors(i))

    def has_edge(self, i, j):
        return j in set(self.neighbors(i))

    def distances_from(self, i, maxr=-1):
        indptr, indices = self.csr()
        return bfs_distances(indptr, indices, i - self.lo, maxr)

    def restrict(self, lo, hi):
        keep = (self.ei >= lo) & (self.ej <= hi)
        return AdjGraph(lo, hi, self.ei[keep], self.ej[keep], self.prov[keep])

    def without_matches(self):
        keep = self.prov == CONSECUTIVE
        return AdjGraph(self.lo, self.hi, self.ei[keep], self.ej[keep], self.prov[keep])

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["i", "j", "provenance", "multiplicity"])
        mult = self.multiplicity()
        tags = {}
        for i, j, p in self.records():
            tags.setdefault((i, j), []).append(PROV_NAMES[p])
        for (i, j) in sorted(tags):
            w.writerow([i, j, "+".join(tags[(i, j)]), mult[(i, j)]])
        return buf.getvalue()

    def to_bytes(self):
        head = b"MTG1" + struct.pack("<qqq", self.lo, self.hi, len(self.ei))
        body = (
            self.ei.astype("<i8").tobytes()
            + self.ej.astype("<i8").tobytes()
            + self.prov.astype("<i1").tobytes()
        )
        return head + body

    @classmethod
    def from_bytes(cls, data):
        if data[:4] != b"MTG1":
            raise ValueError("not an MTG1 graph")
        lo, hi, m = struct.unpack("<qqq", data[4:28])
        off = 28
        ei = np.frombuffer(data, "<i8", m, off)
        off += 8 * m
        ej = np.frombuffer(data, "<i8", m, off)
        off += 8 * m
        prov = np.frombuffer(data, "<i1", m, off)
        return cls(lo, hi, ei, ej, prov)


def _walk_values(walk, coord, lo, hi):
    # values on [lo-1, hi]
    arr = walk.L if coord == 0 else walk.R
    a = lo - 1 - walk.lo
    return np.ascontiguousarray(arr[a:a + (hi - lo + 2)])


def build_h_graph(walk, variant=MULLIN, window=None):
    """Structure graph of a walk.

    Vertices are the indices ``walk.lo+1 .. walk.hi`` (or ``window``), because the
    adjacency rule for i1 reads the value at i1 - 1.

    Mullin:  i1 ~ i2 iff L[i1-1] v L[i2] < min L[i1..i2-1] (same for R).
    Bipolar: (L[i1-1]-1) v L[i2] < min L[i1..i2-1]  or  R[i1-1] v (R[i2]-1) < min R[i1..i2-1].
    """
    lo, hi = (walk.lo + 1, walk.hi) if window is None else (int(window[0]), int(window[1]))
    if lo - 1 < walk.lo or hi > walk.hi:
        raise ValueError("window needs walk values on [lo-1, hi]")
    if hi - lo + 1 < 2:
        raise ValueError("window shorter than 2")
    if variant == MULLIN:
        params = ((0, 0), (0, 0))
    elif variant == BIPOLAR:
        params = ((1, 0), (0, 1))
    else:
        raise ValueError(f"unknown variant {variant!r}")
    ei = [np.arange(lo, hi, dtype=np.int64)]
    ej = [np.arange(lo + 1, hi + 1, dtype=np.int64)]
    pv = [np.full(hi - lo, CONSECUTIVE, np.int8)]
    for coord, tag in ((0, LMATCH), (1, RMATCH)):
        v = _walk_values(walk, coord, lo, hi).astype(np.int64)
        a, b = params[coord]
        q, r = _stack_matches(v, a, b)
        # position p <-> index lo-1+p; vertex i1 = index(q)+1
        ei.append(q + lo)
        ej.append(r + lo - 1)
        pv.append(np.full(len(q), tag, np.int8))
    return AdjGraph(lo, hi, np.concatenate(ei), np.concatenate(ej), np.concatenate(pv))


def h_adjacent_bruteforce(walk, i1, i2, variant=MULLIN):
    """Direct evaluation of the adjacency inequality for a single pair (i1 < i2)."""
    if i2 - i1 == 1:
        return True
    out = False
    for coord in (0, 1):
        arr = walk.L if coord == 0 else walk.R

        def val(i):
            return int(arr[i - walk.lo])

        m = min(val(j) for j in range(i1, i2))
        if variant == MULLIN:
            a, b = 0, 0
        else:
            a, b = (1, 0) if coord == 0 else (0, 1)
        if max(val(i1 - 1) - a, val(i2) - b) < m:
            out = True
    return out


def h_match_records_bruteforce(walk, variant=MULLIN):
    """O(n^3) evaluation of every match record (including consecutive pairs)."""
    lo, hi = walk.lo + 1, walk.hi
    recs = []
    for i1 in range(lo, hi + 1):
        if i1 < hi:
            recs.append((i1, i1 + 1, CONSECUTIVE))
        for i2 in range(i1 + 1, hi + 1):
            for coord, tag in ((0, LMATCH), (1, RMATCH)):
                arr = walk.L if coord == 0 else walk.R
                vals = [int(arr[j - walk.lo]) for j in range(i1, i2)]
                if variant == MULLIN:
                    a, b = 0, 0
                else:
                    a, b = (1, 0) if coord == 0 else (0, 1)
                if max(int(arr[i1 - 1 - walk.lo]) - a, int(arr[i2 - walk.lo]) - b) < min(vals):
                    recs.append((i1, i2, tag))
    return sorted(recs)


def build_mated_crt(grid, window=None):
    """Mated-CRT graph from per-cell minima of a BrownianGrid.

    Cell x is [x-1, x].  For x2 >= x1+2: x1 ~ x2 iff c[x1] v c[x2] <= min c[x1+1..x2-1]
    (non-strict; ties count as adjacent).  Consecutive cells are always adjacent,
    and matches are only recorded for |x1 - x2| > 1.
    """
    clo, chi = grid.cell_range()
    lo, hi = (clo, chi) if window is None else (int(window[0]), int(window[1]))
    if lo < clo or hi > chi:
        raise ValueError("window exceeds grid cells")
    if hi - lo + 1 < 2:
        raise ValueError("window shorter than 2")
    ml, mr = grid.cell_minima
    a, b = lo - clo, hi - clo + 1
    ei = [np.arange(lo, hi, dtype=np.int64)]
    ej = [np.arange(lo + 1, hi + 1, dtype=np.int64)]
    pv = [np.full(hi - lo, CONSECUTIVE, np.int8)]
    for cm, tag in ((ml, LMATCH), (mr, RMATCH)):
        q, r = _cell_matches(np.ascontiguousarray(cm[a:b]))
        ei.append(q + lo)
        ej.append(r + lo)
        pv.append(np.full(len(q), tag, np.int8))
    return AdjGraph(lo, hi, np.concatenate(ei), np.concatenate(ej), np.concatenate(pv))


def mated_crt_records_bruteforce(grid, window=None):
    clo, chi = grid.cell_range()
    lo, hi = (clo, chi) if window is None else window
    ml, mr = grid.cell_minima
    recs = [(i, i + 1, CONSECUTIVE) for i in range(lo, hi)]
    for cm, tag in ((ml, LMATCH), (mr, RMATCH)):
        c = {x: float(cm[x - clo]) for x in range(lo, hi + 1)}
        for x1 in range(lo, hi + 1):
            for x2 in range(x1 + 2, hi + 1):
                if max(c[x1], c[x2]) <= min(c[y] for y in range(x1 + 1, x2)):
                    recs.append((x1, x2, tag))
    return sorted(recs)


def boundary_vertices(graph, full_graph):
    """Window vertices adjacent in ``full_graph`` to a vertex outside the window."""
    if full_graph.lo > graph.lo or full_graph.hi < graph.hi:
        raise ValueError("window not nested in the full graph")
    inside_i = (full_graph.ei >= graph.lo) & (full_graph.ei <= graph.hi)
    inside_j = (full_graph.ej >= graph.lo) & (full_graph.ej <= graph.hi)
    out = set(full_graph.ei[inside_i & ~inside_j].tolist())
    out |= set(full_graph.ej[inside_j & ~inside_i].tolist())
    return out
