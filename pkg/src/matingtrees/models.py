"""Window graphs for every model, in one shape: (nv, u, v, boundary flags, root).

A boundary vertex is one that may have neighbours outside the window; balls
around the root that reach no boundary vertex before their last layer are
balls of the infinite graph.
"""
import math

import numpy as np

from . import bipolar, mullin, uipt
from .graphs import build_mated_crt
from .walks import gamma_from_correlation, make_distribution, sample_brownian, sample_walk

MODELS = ("mullin", "uipt", "bipolar", "schnyder", "matedCRT", "lattice", "path")


class WindowGraph:
    def __init__(self, nv, u, v, boundary, root):
        self.nv = int(nv)
        self.u = np.asarray(u, np.int64)
        self.v = np.asarray(v, np.int64)
        self.boundary = np.asarray(boundary, bool)
        self.root = int(root)

    def compact(self):
        """Drop vertices without edges (other than the root); returns a new WindowGraph."""
        used = np.zeros(self.nv, bool)
        used[self.u] = True
        used[self.v] = True
        used[self.root] = True
        new = -np.ones(self.nv, np.int64)
        new[used] = np.arange(int(used.sum()))
        return WindowGraph(int(used.sum()), new[self.u], new[self.v], self.boundary[used], new[self.root])


def model_gamma(model, params=None):
    params = params or {}
    if model == "matedCRT":
        return gamma_from_correlation(float(params.get("rho", 0.0)))
    if model in ("lattice", "path"):
        return None
    return gamma_from_correlation(model_distribution(model, params).correlation())


def model_distribution(model, params=None):
    params = params or {}
    if model == "mullin":
        return make_distribution("MullinSimple")
    if model == "uipt":
        return make_distribution("Kreweras")
    if model == "bipolar":
        nu = params.get("nu", "uniform")
        return make_distribution("BipolarUniform" if nu == "uniform" else "BipolarTriangulation")
    if model == "schnyder":
        return make_distribution("BipolarTriangulation")
    raise ValueError(f"model {model!r} has no step law")


def window_graph(model, n, seed, params=None):
    """Window graph of ``model`` on the walk window [-n-1, n] (or of size ~n for controls)."""
    params = params or {}
    if model not in MODELS:
        raise ValueError(f"unknown model {model!r}")
    if model == "lattice":
        return lattice_graph(int(n))
    if model == "path":
        return path_graph(int(n))
    if model == "matedCRT":
        return mated_crt_graph(float(params.get("rho", 0.0)), int(n), seed, int(params.get("mesh", 8)))
    walk = sample_walk(model_distribution(model, params), (-n - 1, n), seed)
    if model == "mullin":
        nv, u, v, bnd, root = mullin.fast_primal_graph(walk)
    elif model == "uipt":
        nv, u, v, bnd, root, _ = uipt.fast_uipt_graph(walk)
    else:
        nv, u, v, bnd, root = bipolar.fast_bipolar_graph(walk, greens=(model == "schnyder"))
    return WindowGraph(nv, u, v, bnd, root)


def lattice_graph(m):
    """Square lattice [-m, m]^2 rooted at the origin; the outer square is the boundary."""
    side = 2 * m + 1
    idx = np.arange(side * side).reshape(side, side)
    u = np.concatenate([idx[:, :-1].ravel(), idx[:-1, :].ravel()])
    v = np.concatenate([idx[:, 1:].ravel(), idx[1:, :].ravel()])
    bnd = np.zeros((side, side), bool)
    bnd[0, :] = bnd[-1, :] = bnd[:, 0] = bnd[:, -1] = True
    return WindowGraph(side * side, u, v, bnd.ravel(), idx[m, m])


def path_graph(n):
    """Path on 0..n rooted at its midpoint; the two ends are the boundary."""
    u = np.arange(n)
    bnd = np.zeros(n + 1, bool)
    bnd[0] = bnd[-1] = True
    return WindowGraph(n + 1, u, u + 1, bnd, n // 2)


def mated_crt_graph(rho, n, seed, mesh=8):
    """Mated-CRT window on cells -n..n rooted at cell 0.

    A cell j has a neighbour beyond the right end iff its minimum is at most the
    minimum of every later cell in the window (the path eventually goes lower),
    and symmetrically on the left; this is exact, with no wider window needed.
    """
    grid = sample_brownian(rho, (-n - 1, n), mesh, seed)
    g = build_mated_crt(grid)
    bnd = np.zeros(2 * n + 1, bool)
    bnd[0] = bnd[-1] = True
    for cm in grid.cell_minima:
        suf = np.minimum.accumulate(cm[::-1])[::-1]
        pre = np.minimum.accumulate(cm)
        right = np.append(suf[1:], np.inf)
        left = np.concatenate([[np.inf], pre[:-1]])
        bnd |= (cm <= right) | (cm <= left)
    return WindowGraph(2 * n + 1, g.ei + n, g.ej + n, bnd, n)


def boundary_distance(wg, dist):
    """Smallest BFS distance from the root to a boundary vertex (inf if none reached)."""
    d = dist[wg.boundary]
    d = d[d >= 0]
    return float(d.min()) if len(d) else math.inf
