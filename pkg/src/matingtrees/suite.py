"""Per-window verification routines shared by the CLI, selfcheck and the tests.

Each routine returns a dict of named booleans; a window passes when all are true.
"""
import math

import numpy as np

from . import bipolar, mullin, uipt
from .exponents import ball_exponent_bounds, chi_bounds, watabiki
from .maps import validate
from .walks import make_distribution, sample_walk

ROUNDTRIP_MODELS = ("mullin", "kreweras", "bipolar", "bipolar_tri")
_DIST = {"mullin": "MullinSimple", "kreweras": "Kreweras", "bipolar": "BipolarUniform",
         "bipolar_tri": "BipolarTriangulation"}


def window_size(seed, n_max):
    """Deterministic window half-width in 1..n_max for a seed."""
    return 1 + int(np.random.default_rng([int(seed), 7919]).integers(0, n_max))


def _same(a, b):
    return bool(np.array_equal(a.L, b.L) and np.array_equal(a.R, b.R) and a.lo == b.lo)


def roundtrip(model, n, seed):
    """walk -> map -> walk on the window [-n-1, n], plus the structural validator."""
    walk = sample_walk(make_distribution(_DIST[model]), (-n - 1, n), seed)
    if model == "mullin":
        m, st = mullin.sew_mullin(walk)
        back = mullin.extract_walk(m)
    elif model == "kreweras":
        m, st = uipt.sew_kreweras(walk)
        back = uipt.extract_kreweras(st)
    else:
        m, st = bipolar.sew_bipolar(walk)
        back = bipolar.extract_bipolar(m)
    return {"valid": bool(validate(m)), "roundtrip": _same(walk, back)}


def oracle(model, n, seed):
    """Isomorphism oracles for one window."""
    walk = sample_walk(make_distribution(_DIST[model]), (-n - 1, n), seed)
    if model == "mullin":
        return {"prop_tri": bool(mullin.verify_prop_tri(walk))}
    if model == "kreweras":
        ok1, ok2 = uipt.verify_prop6(walk)
        return {"prop6_i": bool(ok1), "prop6_ii": bool(ok2)}
    m, _ = bipolar.sew_bipolar(walk)
    return {"lr": bool(bipolar.verify_lr(m)[0]), "prop_bipolar": bool(bipolar.verify_prop_bipolar(m))}


def finite_bipolar(n_edges, seed, schnyder=False):
    """Finite conditioned sample: interface path round trip, validator, and for
    the Schnyder case the wood round trip."""
    if schnyder:
        if n_edges % 2 == 0:
            n_edges += 1
        d = make_distribution("BipolarTriangulation")
        walk = bipolar.sample_finite_walk(d, n_edges, seed, start=(0, 0), end=(0, 1))
    else:
        walk = bipolar.sample_finite_walk(make_distribution("BipolarUniform"), n_edges, seed)
    m, _ = bipolar.sew_finite(walk)
    w2, _, _ = bipolar.interface_path(m)
    out = {"valid": bool(validate(m)), "roundtrip": _same(walk, w2), "dual": bipolar.dual_is_bipolar(m)}
    if schnyder:
        wood = bipolar.schnyder_from_bipolar(m)
        back = bipolar.bipolar_from_schnyder(wood)
        out["wood_valid"] = bool(validate(wood))
        out["wood_roundtrip"] = bipolar.orientation_code(back) == bipolar.orientation_code(m)
    return out


def formula_checks():
    grid = np.linspace(0.2, 1.9, 100)
    ordered = all(ball_exponent_bounds(g)[0] <= watabiki(g) <= ball_exponent_bounds(g)[1] for g in grid)
    return {
        "watabiki_sqrt_8_3": watabiki(math.sqrt(8 / 3)) == 4.0,
        "d_plus_sqrt2": ball_exponent_bounds(math.sqrt(2))[1] == 5.0,
        "d_minus_sqrt2": abs(ball_exponent_bounds(math.sqrt(2))[0] - (3 + math.sqrt(5)) / 2) < 1e-12,
        "ordered_on_grid": ordered,
        "chi_lower_le_half": all(chi_bounds(g)[0] <= 0.5 for g in grid),
    }


def step_law_checks():
    out = {}
    for name in ("MullinSimple", "Kreweras", "BipolarUniform", "BipolarTriangulation"):
        d = make_distribution(name)
        out[name + "_mass"] = abs(d.total_mass() - 1.0) < 1e-12
    return out


def selfcheck(seeds=8, n_max=50):
    """Fast invariant suite; returns (ok, report) with a deterministic report."""
    report = {"formulas": formula_checks(), "step_laws": step_law_checks()}
    for model in ROUNDTRIP_MODELS:
        fails = []
        for s in range(seeds):
            n = window_size(s, n_max)
            res = roundtrip(model, n, s)
            res.update(oracle(model, min(n, 30), s))
            if not all(res.values()):
                fails.append({"seed": s, "n": n, "checks": res})
        report[model] = {"windows": seeds, "failures": fails}
    fin = []
    for s in range(seeds):
        res = finite_bipolar(3 + s % 10, s)
        res.update(finite_bipolar(3 + 2 * (s % 6), s, schnyder=True))
        if not all(res.values()):
            fin.append({"seed": s, "checks": res})
    report["finite_bipolar"] = {"samples": seeds, "failures": fin}
    ok = all(report["formulas"].values()) and all(report["step_laws"].values())
    ok = ok and all(not report[m]["failures"] for m in ROUNDTRIP_MODELS) and not fin
    report["ok"] = bool(ok)
    return ok, report
