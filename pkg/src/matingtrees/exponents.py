"""Closed-form dimension exponents and Monte Carlo slope fitting."""
import math

import numpy as np


def _check_gamma(gamma, upper_closed=True):
    ok = 0 < gamma <= 2 if upper_closed else 0 < gamma < 2
    if not ok:
        raise ValueError(f"gamma={gamma} outside (0, 2]")


def watabiki(gamma):
    """Watabiki's prediction d = 1 + g^2/4 + sqrt((4+g^2)^2 + 16 g^2)/4.

    Evaluated with the radicand expanded to g^4 + 24 g^2 + 16, which rounds
    to exactly 4 at g^2 = 8/3.
    """
    _check_gamma(gamma)
    g2 = gamma * gamma
    return 1.0 + (g2 + math.sqrt(g2 * g2 + 24.0 * g2 + 16.0)) / 4.0


def ball_exponent_bounds(gamma):
    """Lower and upper ball-volume growth exponents (d_minus, d_plus)."""
    _check_gamma(gamma)
    g2 = gamma * gamma
    d_minus = 2.0 * g2 / (4.0 + g2 - math.sqrt(16.0 + g2 * g2))
    d_plus = 2.0 + g2 / 2.0 + math.sqrt(2.0) * gamma
    return d_minus, d_plus


def chi_bounds(gamma):
    _check_gamma(gamma)
    g2 = gamma * gamma
    lower = max(1.0 / (2.0 + g2 / 2.0 + math.sqrt(2.0) * gamma), 1.0 - 2.0 / g2)
    return lower, 0.5


class SlopeFit:
    def __init__(self, slope, intercept, ci, r2, x, y, discarded=0):
        self.slope = slope
        self.intercept = intercept
        self.ci = ci
        self.r2 = r2
        self.x = x
        self.y = y
        self.discarded = discarded

    def as_dict(self):
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "ci": list(self.ci),
            "r2": self.r2,
            "x": [float(v) for v in self.x],
            "y": [float(v) for v in self.y],
            "discarded": self.discarded,
        }

    def __repr__(self):
        return f"SlopeFit(slope={self.slope:.4f}, ci=({self.ci[0]:.4f}, {self.ci[1]:.4f}), r2={self.r2:.4f})"


def _ols(x, y):
    slope, intercept = np.polyfit(x, y, 1)
    pred = slope * x + intercept
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), r2


def fit_loglog(xs, samples, resamples=1000, seed=0):
    """Fit log(median sample) against log(x) with a seed-level bootstrap CI.

    ``samples[k]`` is the list of per-seed values at ``xs[k]``; NaN entries mark
    discarded seeds and are dropped before taking medians.
    """
    xs = np.asarray(xs, dtype=float)
    cols = [np.asarray(s, dtype=float) for s in samples]
    cols = [c[~np.isnan(c)] for c in cols]
    keep = [k for k, c in enumerate(cols) if len(c) > 0]
    if len(keep) < 2:
        raise ValueError("need at least two x values with surviving samples")
    lx = np.log(xs[keep])
    med = np.array([np.median(cols[k]) for k in keep])
    ly = np.log(med)
    slope, intercept, r2 = _ols(lx, ly)
    rng = np.random.default_rng(seed)
    boots = np.empty(resamples)
    for b in range(resamples):
        yb = np.array([np.median(rng.choice(cols[k], size=len(cols[k]))) for k in keep])
        boots[b] = np.polyfit(lx, np.log(yb), 1)[0]
    ci = (float(np.quantile(boots, 0.025)), float(np.quantile(boots, 0.975)))
    return SlopeFit(slope, intercept, ci, r2, lx, ly)


def bound_verdict(slope, gamma, margin=0.5):
    """True when slope lies in (d_minus - margin, d_plus + margin)."""
    lo, hi = ball_exponent_bounds(gamma)
    return lo - margin < slope < hi + margin


# -- Monte Carlo pipelines ------------------------------------------------------------

def ball_profile(wg, r_max):
    """Ball volumes around the root for r = 0..r_max, NaN where the ball is contaminated.

    B_r is a ball of the infinite graph when every vertex at distance < r is
    interior, i.e. when the nearest boundary vertex is at distance >= r.
    """
    from .graphs import csr_from_pairs, bfs_distances
    from .models import boundary_distance
    indptr, indices = csr_from_pairs(wg.nv, wg.u, wg.v)
    d = bfs_distances(indptr, indices, wg.root, r_max)
    reached = d[d >= 0]
    counts = np.bincount(reached, minlength=r_max + 1)[: r_max + 1]
    vol = np.cumsum(counts).astype(float)
    db = boundary_distance(wg, d)
    r = np.arange(r_max + 1)
    vol[r > db] = np.nan
    return vol


def estimate_ball_exponent(model, n, r_grid, seeds, params=None, r_min=8, resamples=1000, margin=0.5):
    """Slope of log median ball volume against log r over seeds.

    Contaminated balls are discarded (not clipped) and counted per radius.  Only
    radii >= r_min enter the fit.  For the controls ``n`` is the lattice
    half-width or path length.
    """
    from .models import model_gamma, window_graph
    r_grid = [int(r) for r in r_grid]
    rmax = max(r_grid)
    seeds = list(seeds)
    vols = np.full((len(seeds), len(r_grid)), np.nan)
    for k, s in enumerate(seeds):
        prof = ball_profile(window_graph(model, n, s, params), rmax)
        vols[k] = prof[r_grid]
    discarded = {r: int(np.isnan(vols[:, j]).sum()) for j, r in enumerate(r_grid)}
    keep = [j for j, r in enumerate(r_grid) if r >= r_min and not np.isnan(vols[:, j]).all()]
    fit = fit_loglog([r_grid[j] for j in keep], [vols[:, j] for j in keep], resamples=resamples)
    fit.discarded = discarded
    gamma = model_gamma(model, params)
    fit.model, fit.n, fit.seeds = model, n, len(seeds)
    fit.gamma = gamma
    fit.medians = {r_grid[j]: float(np.nanmedian(vols[:, j])) if not np.isnan(vols[:, j]).all() else None
                   for j in range(len(r_grid))}
    fit.verdict = None if gamma is None else bound_verdict(fit.slope, gamma, margin)
    return fit


def estimate_diameter_exponent(model, n_grid, seeds, params=None, resamples=1000, margin=0.05):
    """Slope of log median diam(M_n) against log n; exact diameters up to 10^4 vertices,
    sampled lower bounds beyond (the fit records how many were approximate)."""
    from .coupling import Graph, diameter
    from .models import model_gamma, window_graph
    seeds = list(seeds)
    diams = np.zeros((len(seeds), len(n_grid)))
    approx = 0
    for j, n in enumerate(n_grid):
        for k, s in enumerate(seeds):
            wg = window_graph(model, n, s, params).compact()
            d = diameter(Graph.from_arrays(wg.nv, wg.u, wg.v), seed=s)
            approx += not d.exact
            diams[k, j] = max(int(d), 1)
    fit = fit_loglog(list(n_grid), [diams[:, j] for j in range(len(n_grid))], resamples=resamples)
    fit.approximate = approx
    # the lower tail matters: diameters are only bounded below with small probability
    fit.quantiles = {int(n): [float(q) for q in np.quantile(diams[:, j], [0.1, 0.5, 0.9])]
                     for j, n in enumerate(n_grid)}
    gamma = model_gamma(model, params)
    fit.model, fit.seeds, fit.gamma = model, len(seeds), gamma
    if gamma is None:
        fit.verdict = None
    else:
        lo, hi = chi_bounds(gamma)
        fit.verdict = lo - margin < fit.slope < hi + margin
    return fit
