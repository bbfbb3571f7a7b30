"""Step laws, seeded walk samplers and correlated Brownian surrogates.

Every sampler draws from counter-based Philox streams.  A stream is keyed by
``(seed, tag)`` where the tag names what the stream is for (forward steps,
backward steps, one unit cell of a bridge, ...), so windows nest: growing the
window never changes steps that were already inside it.
"""
import json
import math
import struct

import numpy as np

MODELS = (
    "MullinSimple",
    "Kreweras",
    "BipolarUniform",
    "BipolarTriangulation",
    "GesselOptional",
    "CustomTable",
)

_FINITE = {
    "MullinSimple": ((1, 0), (-1, 0), (0, 1), (0, -1)),
    "Kreweras": ((1, 0), (0, 1), (-1, -1)),
    "GesselOptional": ((-1, 0), (1, 0), (1, 1), (-1, -1)),
}

# stream tags
_FWD, _BWD = 1, 2
_COIN, _GEO_I, _GEO_J = 0, 1, 2
_BROWN_FWD, _BROWN_BWD, _BRIDGE = 11, 12, 13

_MASK64 = (1 << 64) - 1
_MAGIC = b"MTW1"


def _rng(seed, *tags):
    key1 = 0
    for t in tags:
        key1 = (key1 * 1000003 + int(t) + 1) & _MASK64
    key = np.array([int(seed) & _MASK64, key1], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _cell_rng(seed, tag, cell):
    # one substream per unit cell: counter high word carries the cell index
    key = np.array([int(seed) & _MASK64, tag], dtype=np.uint64)
    counter = np.array([0, 0, 0, int(cell) & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key, counter=counter))


def is_bipolar_step(i, j):
    return (i, j) == (-1, 1) or (i >= 0 and j <= 0)


class StepDistribution:
    """A step law on Z^2 with closed-form moments and an exact sampler.

    ``pmf(step)`` evaluates the law at any lattice point.  For the two bipolar
    laws the support is infinite; ``support(kmax)`` lists the atoms with
    geometric parameters up to ``kmax``.
    """

    def __init__(self, model, table=None):
        if model not in MODELS:
            raise ValueError(f"unknown model {model!r}")
        self.model = model
        self.table = dict(table) if table is not None else None
        self.tail_rate = math.log(2.0) if model.startswith("Bipolar") else math.inf
        if model == "CustomTable":
            self.tail_rate = math.inf

    def __repr__(self):
        return f"StepDistribution({self.model})"

    @property
    def bipolar(self):
        return self.model in ("BipolarUniform", "BipolarTriangulation", "CustomTable")

    def pmf(self, step):
        i, j = int(step[0]), int(step[1])
        m = self.model
        if m in _FINITE:
            atoms = _FINITE[m]
            return 1.0 / len(atoms) if (i, j) in atoms else 0.0
        if m == "CustomTable":
            return float(self.table.get((i, j), 0.0))
        if (i, j) == (-1, 1):
            return 0.5
        if m == "BipolarUniform":
            if i >= 0 and j <= 0:
                return 2.0 ** (-i + j - 3)
            return 0.0
        if i == 1 and j <= 0:
            return 2.0 ** (j - 2)
        return 0.0

    def support(self, kmax=60):
        m = self.model
        if m in _FINITE:
            return list(_FINITE[m])
        if m == "CustomTable":
            return sorted(self.table)
        out = [(-1, 1)]
        if m == "BipolarUniform":
            out += [(i, -j) for i in range(kmax + 1) for j in range(kmax + 1)]
        else:
            out += [(1, -j) for j in range(kmax + 1)]
        return out

    def moments(self):
        """Return (mean, covariance matrix) from closed forms.

        Geometric pieces use E[G] = 1 and E[G^2] = 3 for G with P(G=k) = 2^(-k-1).
        """
        m = self.model
        if m in _FINITE or m == "CustomTable":
            atoms = self.support()
            p = np.array([self.pmf(a) for a in atoms])
            x = np.array(atoms, dtype=float)
            mean = p @ x
            c = (x - mean).T @ (x * p[:, None])
            return mean, c
        if m == "BipolarUniform":
            # half mass on (-1,1); half on (G1, -G2) with G1, G2 independent
            mean = np.array([0.5 * -1 + 0.5 * 1.0, 0.5 * 1 + 0.5 * -1.0])
            var_l = 0.5 * 1 + 0.5 * 3.0
            var_r = 0.5 * 1 + 0.5 * 3.0
            cov = 0.5 * (-1) + 0.5 * (1.0 * -1.0)
        else:
            # half mass on (-1,1); half on (1, -G)
            mean = np.array([0.5 * -1 + 0.5 * 1, 0.5 * 1 + 0.5 * -1.0])
            var_l = 0.5 * 1 + 0.5 * 1
            var_r = 0.5 * 1 + 0.5 * 3.0
            cov = 0.5 * (-1) + 0.5 * (1 * -1.0)
        return mean, np.array([[var_l, cov], [cov, var_r]])

    def correlation(self):
        _, c = self.moments()
        return c[0, 1] / math.sqrt(c[0, 0] * c[1, 1])

    def scale(self):
        """Per-coordinate step standard deviations."""
        _, c = self.moments()
        return math.sqrt(c[0, 0]), math.sqrt(c[1, 1])

    def total_mass(self):
        m = self.model
        if m == "BipolarUniform":
            # sum_{i,j>=0} 2^(-i-j-3) = 2^-3 * 2 * 2
            return 0.5 + 2.0 ** -3 * 2.0 * 2.0
        if m == "BipolarTriangulation":
            return 0.5 + 2.0 ** -2 * 2.0
        return float(sum(self.pmf(a) for a in self.support()))

    def sample_steps(self, seed, direction, count):
        """Draw ``count`` i.i.d. steps from the stream ``(seed, direction)``."""
        m = self.model
        count = int(count)
        if m in _FINITE:
            atoms = np.array(_FINITE[m], dtype=np.int64)
            idx = _rng(seed, direction, _COIN).integers(0, len(atoms), size=count)
            return atoms[idx, 0].copy(), atoms[idx, 1].copy()
        if m == "CustomTable":
            atoms = np.array(self.support(), dtype=np.int64)
            p = np.array([self.table[tuple(a)] for a in atoms])
            cdf = np.cumsum(p)
            u = _rng(seed, direction, _COIN).random(count)
            idx = np.minimum(np.searchsorted(cdf, u * cdf[-1], side="right"), len(atoms) - 1)
            return atoms[idx, 0].copy(), atoms[idx, 1].copy()
        coin = _rng(seed, direction, _COIN).integers(0, 2, size=count).astype(bool)
        gj = _rng(seed, direction, _GEO_J).geometric(0.5, size=count) - 1
        if m == "BipolarUniform":
            gi = _rng(seed, direction, _GEO_I).geometric(0.5, size=count) - 1
        else:
            gi = np.ones(count, dtype=np.int64)
        dl = np.where(coin, -1, gi).astype(np.int64)
        dr = np.where(coin, 1, -gj).astype(np.int64)
        return dl, dr


def make_distribution(model, params=None):
    """Build a built-in step law, or validate a ``CustomTable`` given as {(i,j): p}."""
    if model != "CustomTable":
        return StepDistribution(model)
    if not params:
        raise ValueError("CustomTable needs a step table")
    table = {(int(k[0]), int(k[1])): float(v) for k, v in dict(params).items() if float(v) > 0}
    for (i, j) in table:
        if not is_bipolar_step(i, j):
            raise ValueError(f"step {(i, j)} outside the bipolar step set")
    d = StepDistribution("CustomTable", table)
    total = sum(table.values())
    if abs(total - 1.0) > 1e-12:
        raise ValueError(f"probabilities sum to {total}, not 1")
    mean, c = d.moments()
    if np.max(np.abs(mean)) > 1e-12:
        raise ValueError(f"nonzero mean {mean}")
    if c[0, 0] <= 0 or c[1, 1] <= 0:
        raise ValueError("degenerate coordinate")
    rho = d.correlation()
    if not -1 < rho < 1:
        raise ValueError(f"correlation {rho} outside (-1, 1)")
    return d


def gamma_from_correlation(rho):
    if not -1 < rho < 1:
        raise ValueError("correlation must lie in (-1, 1)")
    return math.sqrt(4.0 / math.pi * math.acos(-rho))


def correlation_from_gamma(gamma):
    if not 0 < gamma < 2:
        raise ValueError("gamma must lie in (0, 2)")
    return -math.cos(math.pi * gamma * gamma / 4.0)


class WalkPath:
    """Lattice path with values at indices lo..hi (inclusive)."""

    def __init__(self, lo, L, R, dist=None, anchor=0):
        self.lo = int(lo)
        self.L = np.asarray(L)
        self.R = np.asarray(R)
        if self.L.shape != self.R.shape or self.L.ndim != 1 or len(self.L) == 0:
            raise ValueError("L and R must be equal-length 1-d arrays")
        self.dist = dist
        self.anchor = anchor

    @property
    def hi(self):
        return self.lo + len(self.L) - 1

    def __len__(self):
        return len(self.L)

    def value(self, i):
        k = i - self.lo
        return self.L[k], self.R[k]

    def steps(self):
        """Increments; entry k is the step into index lo+1+k."""
        return np.diff(self.L), np.diff(self.R)

    def restrict(self, lo, hi):
        if lo < self.lo or hi > self.hi or lo > hi:
            raise ValueError("restriction outside the window")
        a, b = lo - self.lo, hi - self.lo + 1
        return WalkPath(lo, self.L[a:b].copy(), self.R[a:b].copy(), self.dist, self.anchor)

    def __eq__(self, other):
        return (
            isinstance(other, WalkPath)
            and self.lo == other.lo
            and np.array_equal(self.L, other.L)
            and np.array_equal(self.R, other.R)
        )

    def __repr__(self):
        return f"WalkPath([{self.lo}, {self.hi}])"

    def to_bytes(self):
        head = _MAGIC + b"W" + struct.pack("<qq", self.lo, len(self.L))
        return head + self.L.astype("<i8").tobytes() + self.R.astype("<i8").tobytes()

    def to_json(self):
        return json.dumps({"format": "matingtrees-walk/1", "lo": self.lo,
                           "L": self.L.tolist(), "R": self.R.tolist()}, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        return cls(d["lo"], np.array(d["L"], np.int64), np.array(d["R"], np.int64))


def walk_from_steps(steps, lo=0, start=(0, 0), dist=None):
    """Path whose value at ``lo`` is ``start`` followed by ``steps``."""
    steps = np.asarray(steps, dtype=np.int64).reshape(-1, 2)
    L = np.concatenate([[start[0]], start[0] + np.cumsum(steps[:, 0])])
    R = np.concatenate([[start[1]], start[1] + np.cumsum(steps[:, 1])])
    return WalkPath(lo, L.astype(np.int64), R.astype(np.int64), dist)


def sample_walk(dist, window, seed):
    """Two-sided walk on indices ``window = (a, b)`` with value (0,0) at 0.

    Steps into indices 1..b come from the forward stream and steps into
    indices 0, -1, ..., a+1 from the backward stream.
    """
    a, b = int(window[0]), int(window[1])
    if a > b:
        raise ValueError("empty window")
    fa, fb = max(a, 0), max(b, 0)
    ba, bb = min(a, 0), min(b, 0)
    n_fwd = fb
    n_bwd = -ba
    fl, fr = dist.sample_steps(seed, _FWD, n_fwd)
    bl, br = dist.sample_steps(seed, _BWD, n_bwd)
    # indices ba..fb; value at 0 is zero
    left_l = -np.cumsum(bl)[::-1] if n_bwd else np.zeros(0, np.int64)
    left_r = -np.cumsum(br)[::-1] if n_bwd else np.zeros(0, np.int64)
    L = np.concatenate([left_l, [0], np.cumsum(fl)]).astype(np.int64)
    R = np.concatenate([left_r, [0], np.cumsum(fr)]).astype(np.int64)
    full = WalkPath(ba, L, R, dist)
    return full.restrict(a, b) if (a, b) != (ba, fb) else full


class BrownianGrid:
    """Correlated planar Brownian path sampled at spacing 1/mesh on [lo, hi]."""

    def __init__(self, lo, hi, mesh, L, R, rho, scale=(1.0, 1.0)):
        self.lo, self.hi, self.mesh = int(lo), int(hi), int(mesh)
        self.L = np.asarray(L, dtype=float)
        self.R = np.asarray(R, dtype=float)
        if len(self.L) != (self.hi - self.lo) * self.mesh + 1:
            raise ValueError("grid length does not match window and mesh")
        self.rho = float(rho)
        self.scale = tuple(float(s) for s in scale)
        self._cells = None

    def at_integers(self):
        return self.L[:: self.mesh].copy(), self.R[:: self.mesh].copy()

    def to_bytes(self):
        head = _MAGIC + b"G" + struct.pack("<qqq", self.lo, self.hi, self.mesh)
        head += struct.pack("<ddd", self.rho, *self.scale)
        return head + self.L.astype("<f8").tobytes() + self.R.astype("<f8").tobytes()

    def to_json(self):
        return json.dumps({"format": "matingtrees-grid/1", "lo": self.lo, "hi": self.hi,
                           "mesh": self.mesh, "rho": self.rho, "scale": list(self.scale),
                           "L": self.L.tolist(), "R": self.R.tolist()}, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        return cls(d["lo"], d["hi"], d["mesh"], d["L"], d["R"], d["rho"], tuple(d["scale"]))

    def _cell_stats(self):
        if self._cells is None:
            m = self.mesh
            nc = self.hi - self.lo
            out = []
            for v in (self.L, self.R):
                blocks = np.lib.stride_tricks.sliding_window_view(v, m + 1)[::m]
                out.append((blocks.min(axis=1), blocks.max(axis=1)))
            assert len(out[0][0]) == nc
            self._cells = out
        return self._cells

    @property
    def cell_minima(self):
        """Arrays (minL, minR); entry k is the cell [lo+k, lo+k+1], i.e. cell index lo+k+1."""
        (a, _), (b, _) = self._cell_stats()
        return a, b

    @property
    def cell_maxima(self):
        (_, a), (_, b) = self._cell_stats()
        return a, b

    def cell_range(self):
        """Cell indices x for which cell [x-1, x] is covered."""
        return self.lo + 1, self.hi


def from_bytes(data):
    """Decode a walk or grid written by ``to_bytes``."""
    if data[:4] != _MAGIC:
        raise ValueError("not an MTW1 record")
    kind = data[4:5]
    if kind == b"W":
        lo, n = struct.unpack("<qq", data[5:21])
        L = np.frombuffer(data, "<i8", n, 21).astype(np.int64)
        R = np.frombuffer(data, "<i8", n, 21 + 8 * n).astype(np.int64)
        return WalkPath(lo, L, R)
    if kind == b"G":
        lo, hi, mesh = struct.unpack("<qqq", data[5:29])
        rho, sl, sr = struct.unpack("<ddd", data[29:53])
        n = (hi - lo) * mesh + 1
        L = np.frombuffer(data, "<f8", n, 53).copy()
        R = np.frombuffer(data, "<f8", n, 53 + 8 * n).copy()
        return BrownianGrid(lo, hi, mesh, L, R, rho, (sl, sr))
    raise ValueError(f"unknown record kind {kind!r}")


def _check_mesh(mesh):
    mesh = int(mesh)
    if mesh < 2 or mesh & (mesh - 1):
        raise ValueError("mesh must be a power of two >= 2")
    return mesh


def _correlated_normals(g, count, rho):
    # interleaved pairs keep a longer draw an extension of a shorter one
    z = g.standard_normal((count, 2))
    return z[:, 0], rho * z[:, 0] + math.sqrt(1.0 - rho * rho) * z[:, 1]


def sample_brownian(rho, window, mesh, seed):
    """Two-sided correlated Brownian motion pinned to 0 at time 0."""
    if not -1 < rho < 1:
        raise ValueError("rho must lie in (-1, 1)")
    mesh = _check_mesh(mesh)
    a, b = int(window[0]), int(window[1])
    if not a <= 0 <= b or a == b:
        raise ValueError("window must contain 0 and have positive length")
    s = 1.0 / math.sqrt(mesh)
    fl, fr = _correlated_normals(_rng(seed, _BROWN_FWD), b * mesh, rho)
    bl, br = _correlated_normals(_rng(seed, _BROWN_BWD), -a * mesh, rho)
    L = np.concatenate([-np.cumsum(bl * s)[::-1], [0.0], np.cumsum(fl * s)])
    R = np.concatenate([-np.cumsum(br * s)[::-1], [0.0], np.cumsum(fr * s)])
    return BrownianGrid(a, b, mesh, L, R, rho)


def bridge_couple(walk, mesh, seed, dist=None):
    """Brownian surrogate equal to the rescaled walk at every integer index.

    Inside each unit cell the path is the linear interpolation of the rescaled
    walk plus an independent correlated Brownian bridge (one substream per
    cell).  Coordinates are divided by the step standard deviations, so the
    target has Var = |t| and Cov = rho |t|.
    """
    mesh = _check_mesh(mesh)
    dist = dist or walk.dist
    if dist is None:
        raise ValueError("walk carries no step law; pass dist")
    rho = dist.correlation()
    sl, sr = dist.scale()
    wl = walk.L / sl
    wr = walk.R / sr
    ncell = len(walk) - 1
    t = np.arange(mesh + 1) / mesh
    L = np.empty(ncell * mesh + 1)
    R = np.empty(ncell * mesh + 1)
    s = 1.0 / math.sqrt(mesh)
    for c in range(ncell):
        g = _cell_rng(seed, _BRIDGE, walk.lo + c + 1)
        zl, zr = _correlated_normals(g, mesh, rho)
        bl = np.concatenate([[0.0], np.cumsum(zl * s)])
        br = np.concatenate([[0.0], np.cumsum(zr * s)])
        bl -= t * bl[-1]
        br -= t * br[-1]
        sl_ = slice(c * mesh, (c + 1) * mesh + 1)
        L[sl_] = wl[c] + t * (wl[c + 1] - wl[c]) + bl
        R[sl_] = wr[c] + t * (wr[c + 1] - wr[c]) + br
    # pin exactly at integers
    L[::mesh] = wl
    R[::mesh] = wr
    return BrownianGrid(walk.lo, walk.hi, mesh, L, R, rho, scale=(sl, sr))


def sup_discrepancy(walk, grid):
    """max over integer indices of the Euclidean distance between the two paths.

    The walk is divided by ``grid.scale`` when ``grid`` is a BrownianGrid.
    """
    if isinstance(grid, WalkPath):
        if (grid.lo, grid.hi) != (walk.lo, walk.hi):
            raise ValueError("window mismatch")
        gl, gr = grid.L.astype(float), grid.R.astype(float)
        wl, wr = walk.L.astype(float), walk.R.astype(float)
    else:
        if (grid.lo, grid.hi) != (walk.lo, walk.hi):
            raise ValueError("window mismatch")
        gl, gr = grid.at_integers()
        wl, wr = walk.L / grid.scale[0], walk.R / grid.scale[1]
    return float(np.max(np.hypot(wl - gl, wr - gr)))
