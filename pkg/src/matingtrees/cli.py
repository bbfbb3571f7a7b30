"""Command-line front end.

Exit codes: 0 when every check passes, 1 on an invariant violation, 2 on a
usage error.  All JSON output is written with sorted keys and no timestamps,
so identical inputs give byte-identical files.
"""
import functools
import hashlib
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import click
import numpy as np

from . import __version__, suite
from ._kernels import backend

log = logging.getLogger("matingtrees")

EXIT_OK, EXIT_VIOLATION, EXIT_USAGE = 0, 1, 2


def _dumps(obj):
    return json.dumps(_plain(obj), sort_keys=True, indent=2) + "\n"


def _plain(x):
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def _emit(obj, out):
    text = _dumps(obj)
    if out:
        Path(out).write_text(text)
    else:
        click.echo(text, nl=False)


def _seed_list(seeds, seed_count, master_seed):
    if seeds:
        return [int(s) for s in seeds.split(",")]
    master = int(os.environ.get("MATINGTREES_SEED", master_seed))
    return list(range(master, master + seed_count))


def _usage_errors(fn):
    """Report bad parameters (ValueError) as a usage error, exit code 2."""
    @functools.wraps(fn)
    def wrapped(*a, **kw):
        try:
            return fn(*a, **kw)
        except ValueError as exc:
            raise click.UsageError(str(exc))
    return wrapped


@click.group()
@click.version_option(__version__)
@click.option("-v", "--verbose", is_flag=True)
def main(verbose):
    """Walk encodings of decorated planar maps: bijections, coupling and exponents."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(message)s")


# -- bijection groups ----------------------------------------------------------------

def _verify_cmd(model_names):
    @click.option("--n-max", default=50, show_default=True, help="largest window half-width")
    @click.option("--count", default=20, show_default=True, help="number of windows")
    @click.option("--seed", default=0, show_default=True, help="first seed")
    @click.option("--out", default=None, help="write JSON here instead of stdout")
    def verify(n_max, count, seed, out):
        """Round trips, validators and isomorphism oracles on random windows."""
        res = {}
        ok = True
        for model in model_names:
            fails = []
            for s in range(seed, seed + count):
                n = suite.window_size(s, n_max)
                r = suite.roundtrip(model, n, s)
                r.update(suite.oracle(model, n, s))
                if not all(r.values()):
                    fails.append({"seed": s, "n": n, "checks": r})
            res[model] = {"windows": count, "failures": fails}
            ok = ok and not fails
        res["ok"] = ok
        _emit(res, out)
        sys.exit(EXIT_OK if ok else EXIT_VIOLATION)
    return verify


def _sample_cmd(model):
    @click.option("--n", "n", default=10, show_default=True)
    @click.option("--seed", default=0, show_default=True)
    @click.option("--out", default=None)
    def sample(n, seed, out):
        """Sew one window and print the map as JSON."""
        from .walks import make_distribution, sample_walk
        from . import mullin, uipt, bipolar
        from .maps import validate
        walk = sample_walk(make_distribution(suite._DIST[model]), (-n - 1, n), seed)
        sew = {"mullin": mullin.sew_mullin, "kreweras": uipt.sew_kreweras, "bipolar": bipolar.sew_bipolar}
        m, _ = sew[model](walk)
        rep = validate(m)
        text = m.to_json()
        if out:
            Path(out).write_text(text + "\n")
        else:
            click.echo(text)
        sys.exit(EXIT_OK if rep else EXIT_VIOLATION)
    return sample


@main.group()
def mullin():
    """Spanning-tree decorated maps."""


mullin.command("verify")(_verify_cmd(["mullin"]))
mullin.command("sample")(_sample_cmd("mullin"))


@main.group()
def uipt():
    """Site-percolated triangulations (Kreweras walks)."""


uipt.command("verify")(_verify_cmd(["kreweras"]))
uipt.command("sample")(_sample_cmd("kreweras"))


@main.group()
def bipolar():
    """Bipolar-oriented maps and Schnyder woods."""


bipolar.command("verify")(_verify_cmd(["bipolar", "bipolar_tri"]))
bipolar.command("sample")(_sample_cmd("bipolar"))


@bipolar.command("schnyder")
@click.option("--edges", default=15, show_default=True, help="edges of the bipolar map (odd)")
@click.option("--seed", default=0, show_default=True)
@click.option("--out", default=None)
def bipolar_schnyder(edges, seed, out):
    """Sample a wooded triangulation; one line per edge: endpoints, colour, direction bit."""
    from . import bipolar as bp
    from .maps import validate
    from .walks import make_distribution
    if edges % 2 == 0:
        raise click.UsageError("--edges must be odd")
    walk = bp.sample_finite_walk(make_distribution("BipolarTriangulation"), edges, seed,
                                 start=(0, 0), end=(0, 1))
    m, _ = bp.sew_finite(walk)
    w = bp.schnyder_from_bipolar(m)
    u, v = w.edge_endpoints()
    col = w.deco["schnyder_color"]
    so = w.deco["schnyder_orient"]
    edges_out = [{"u": int(w.vertex_label[a]), "v": int(w.vertex_label[b]),
                  "color": bp.COLOR_NAMES.get(int(c), "outer"), "forward": int(o > 0)}
                 for a, b, c, o in zip(u, v, col, so)]
    rep = validate(w)
    _emit({"outer_vertices": w.deco["outer_vertices"], "edges": edges_out, "valid": bool(rep)}, out)
    sys.exit(EXIT_OK if rep else EXIT_VIOLATION)


def _ball_cmd(model, with_nu):
    @click.option("--n", "n", default=100000, show_default=True)
    @click.option("--r", "r", default="8,12,16,24,32", show_default=True)
    @click.option("--seeds", default=None)
    @click.option("--seed-count", default=10, show_default=True)
    @click.option("--out", default=None)
    @_usage_errors
    def ball(n, r, seeds, seed_count, out, nu=None):
        """Ball-volume growth around the root of the window map."""
        from .exponents import estimate_ball_exponent
        fit = estimate_ball_exponent(model, n, _ints(r), _seed_list(seeds, seed_count, 0),
                                     {"nu": nu} if nu else None)
        _emit(_fit_dict(fit), out)
    if with_nu:
        ball = click.option("--nu", type=click.Choice(["uniform", "triangulation"]),
                            default="uniform")(ball)
    return ball


bipolar.command("ball")(_ball_cmd("bipolar", True))
uipt.command("ball")(_ball_cmd("uipt", False))


# -- coupling ----------------------------------------------------------------------------

@main.group()
def couple():
    """Structure graphs against the mated-CRT map."""


@couple.command("run")
@click.option("--model", type=click.Choice(["mullin", "kreweras", "bipolar", "bipolar_tri"]),
              default="mullin")
@click.option("--n", "n", default=1000, show_default=True)
@click.option("--seeds", default=None, help="comma separated seeds")
@click.option("--seed-count", default=5, show_default=True)
@click.option("--mesh", default=64, show_default=True)
@click.option("--fit-constants", is_flag=True, help="also fit minimal (C0, C1, C2)")
@click.option("--out", default=None)
def couple_run(model, n, seeds, seed_count, mesh, fit_constants, out):
    """Bridge-couple each walk, build both path families and validate them."""
    res = [couple_one(model, n, s, mesh, fit_constants) for s in _seed_list(seeds, seed_count, 0)]
    ok = all(r["all_valid"] for r in res)
    _emit({"model": model, "n": n, "mesh": mesh, "seeds": res, "ok": ok}, out)
    sys.exit(EXIT_OK if ok else EXIT_VIOLATION)


def couple_one(model, n, seed, mesh, fit_constants=False):
    from .coupling import build_coupled_paths, check_event_En, fit_event_constants
    from .graphs import BIPOLAR, MULLIN
    from .walks import bridge_couple, make_distribution, sample_walk
    walk = sample_walk(make_distribution(suite._DIST[model]), (-n - 1, n), seed)
    grid = bridge_couple(walk, mesh, seed)
    variant = BIPOLAR if model.startswith("bipolar") else MULLIN
    rep = build_coupled_paths(walk, grid, variant)
    out = {"seed": seed, "D": rep.D, "C1": rep.C1, "H_to_G": rep.H_to_G, "G_to_H": rep.G_to_H}
    out["all_valid"] = not rep.H_to_G["invalid"] and not rep.G_to_H["invalid"] and \
        rep.H_to_G["valid"] == rep.H_to_G["edges"] and rep.G_to_H["valid"] == rep.G_to_H["edges"]
    if fit_constants:
        C = fit_event_constants(walk, grid)
        ev = check_event_En(walk, grid, *C)
        out["constants"] = list(C)
        out["event"] = ev.cond
    return out


# -- exponents ---------------------------------------------------------------------------

def _ints(text):
    return [int(x) for x in str(text).split(",") if x]


def _fit_dict(fit):
    d = fit.as_dict()
    for k in ("model", "n", "seeds", "gamma", "verdict", "medians", "approximate", "quantiles"):
        if hasattr(fit, k):
            d[k] = getattr(fit, k)
    return d


def _params(gamma, rho, nu):
    from .walks import correlation_from_gamma
    p = {}
    if gamma is not None:
        p["rho"] = correlation_from_gamma(gamma)
    if rho is not None:
        p["rho"] = rho
    if nu:
        p["nu"] = nu
    return p


@main.group()
def exponent():
    """Ball and diameter growth exponents."""


_MODEL_CHOICE = click.Choice(["mullin", "uipt", "bipolar", "schnyder", "matedCRT", "lattice", "path"])


@exponent.command("ball")
@click.option("--model", type=_MODEL_CHOICE, required=True)
@click.option("--gamma", type=float, default=None, help="matedCRT: LQG parameter")
@click.option("--rho", type=float, default=None, help="matedCRT: correlation")
@click.option("--nu", type=click.Choice(["uniform", "triangulation"]), default=None)
@click.option("--n", "n", default=100000, show_default=True)
@click.option("--r", "r", default="8,12,16,24,32", show_default=True)
@click.option("--seeds", default=None)
@click.option("--seed-count", default=10, show_default=True)
@click.option("--out", default=None)
@click.option("--format", "fmt", type=click.Choice(["json", "csv"]), default="json")
@_usage_errors
def exponent_ball(model, gamma, rho, nu, n, r, seeds, seed_count, out, fmt):
    """Median ball volume against r, log-log slope with bootstrap CI."""
    from .exponents import estimate_ball_exponent
    fit = estimate_ball_exponent(model, n, _ints(r), _seed_list(seeds, seed_count, 0),
                                 _params(gamma, rho, nu))
    _emit_fit(fit, out, fmt, "log_r", "log_volume")


@exponent.command("diam")
@click.option("--model", type=_MODEL_CHOICE, required=True)
@click.option("--gamma", type=float, default=None)
@click.option("--rho", type=float, default=None)
@click.option("--nu", type=click.Choice(["uniform", "triangulation"]), default=None)
@click.option("--n", "n", default="1000,4000,16000", show_default=True)
@click.option("--seeds", default=None)
@click.option("--seed-count", default=5, show_default=True)
@click.option("--out", default=None)
@click.option("--format", "fmt", type=click.Choice(["json", "csv"]), default="json")
@_usage_errors
def exponent_diam(model, gamma, rho, nu, n, seeds, seed_count, out, fmt):
    """Median diameter of the window graph against n."""
    from .exponents import estimate_diameter_exponent
    fit = estimate_diameter_exponent(model, _ints(n), _seed_list(seeds, seed_count, 0),
                                     _params(gamma, rho, nu))
    _emit_fit(fit, out, fmt, "log_n", "log_diameter")


def _csv(fit, xname, yname):
    rows = [f"{xname},{yname}"] + [f"{float(x)!r},{float(y)!r}" for x, y in zip(fit.x, fit.y)]
    return "\n".join(rows) + "\n"


def _emit_fit(fit, out, fmt, xname, yname):
    if out in ("csv", "json"):  # `--out csv` selects the format and writes to stdout
        fmt, out = out, None
    if fmt == "json":
        _emit(_fit_dict(fit), out)
        return
    text = _csv(fit, xname, yname)
    if out:
        Path(out).write_text(text)
    else:
        click.echo(text, nl=False)


# -- selfcheck and manifests -------------------------------------------------------------------

@main.command("selfcheck")
@click.option("--out", default=None)
def selfcheck_cmd(out):
    """Fast invariant suite (round trips n <= 50, oracles, formula checks)."""
    ok, report = suite.selfcheck()
    _emit(report, out)
    sys.exit(EXIT_OK if ok else EXIT_VIOLATION)


def manifest_hash(manifest):
    return hashlib.sha256(json.dumps(manifest, sort_keys=True).encode()).hexdigest()


def _task_seeds(task, manifest, name):
    if "seeds" in task:
        return [int(s) for s in task["seeds"]]
    master = task.get("master_seed", manifest.get("master_seed"))
    if master is None:
        master = 0
        log.warning("no seed given for task %s; defaulting to master seed 0", name)
    master = int(os.environ.get("MATINGTREES_SEED", master))
    count = int(task.get("count", manifest.get("count", 1)))
    return list(range(master, master + count))


_TASK_MODELS = {
    "verify": suite.ROUNDTRIP_MODELS,
    "couple": suite.ROUNDTRIP_MODELS,
    "exponent_ball": ("mullin", "uipt", "bipolar", "schnyder", "matedCRT", "lattice", "path"),
    "exponent_diam": ("mullin", "uipt", "bipolar", "schnyder", "matedCRT", "lattice", "path"),
}


def _check_model(kind, task, name):
    allowed = _TASK_MODELS.get(kind)
    if allowed is not None and task.get("model") not in allowed:
        raise click.UsageError(f"unknown model {task.get('model')!r} in task {name}")


def _run_seed(args):
    kind, task, seed = args
    try:
        if kind == "verify":
            n = suite.window_size(seed, int(task.get("n_max", 50)))
            r = suite.roundtrip(task["model"], n, seed)
            r.update(suite.oracle(task["model"], n, seed))
            return {"seed": seed, "n": n, "checks": r, "ok": all(r.values())}
        if kind == "couple":
            r = couple_one(task["model"], int(task["n"]), seed, int(task.get("mesh", 64)),
                           bool(task.get("fit_constants", False)))
            return {"seed": seed, "result": r, "ok": r["all_valid"]}
        raise ValueError(f"unknown task kind {kind!r}")
    except Exception as exc:  # recorded per seed, the batch continues
        return {"seed": seed, "ok": False, "error": f"{type(exc).__name__}: {exc}"}


def run_manifest(manifest, out_dir, workers=1):
    """Execute every task; returns (ok, {file name: text})."""
    h = manifest_hash(manifest)
    files = {}
    ok = True
    for k, task in enumerate(manifest.get("tasks", [])):
        kind = task.get("kind")
        name = task.get("name", f"task{k}_{kind}")
        seeds = _task_seeds(task, manifest, name)
        _check_model(kind, task, name)
        if kind in ("verify", "couple"):
            if not seeds:
                log.warning("task %s has an empty seed list; nothing to do", name)
            jobs = [(kind, task, s) for s in seeds]
            if workers > 1 and len(jobs) > 1:
                with ProcessPoolExecutor(max_workers=workers) as pool:
                    results = list(pool.map(_run_seed, jobs))
            else:
                results = [_run_seed(j) for j in jobs]
            task_ok = all(r["ok"] for r in results)
            body = {"results": results}
        elif kind in ("exponent_ball", "exponent_diam"):
            from .exponents import estimate_ball_exponent, estimate_diameter_exponent
            params = task.get("params", {})
            if not seeds:
                log.warning("task %s has an empty seed list; nothing to do", name)
                body, task_ok = {"results": []}, True
            elif kind == "exponent_ball":
                fit = estimate_ball_exponent(task["model"], int(task["n"]), task["r"], seeds, params)
                body, task_ok = {"fit": _fit_dict(fit)}, True
                files[f"{name}.csv"] = f"# manifest_hash={h}\n" + _csv(fit, "log_r", "log_volume")
            else:
                fit = estimate_diameter_exponent(task["model"], task["n"], seeds, params)
                body, task_ok = {"fit": _fit_dict(fit)}, True
                files[f"{name}.csv"] = f"# manifest_hash={h}\n" + _csv(fit, "log_n", "log_diameter")
        elif kind == "selfcheck":
            task_ok, body = suite.selfcheck()
        else:
            raise click.UsageError(f"unknown task kind {kind!r} in task {name}")
        ok = ok and task_ok
        files[f"{name}.json"] = _dumps({"manifest_hash": h, "task": task, "ok": task_ok, **body})
    log_body = {
        "manifest_hash": h,
        "package_version": __version__,
        "numpy_version": np.__version__,
        "backend": backend(),
        "ok": ok,
        "outputs": {f: hashlib.sha256(t.encode()).hexdigest() for f, t in sorted(files.items())},
    }
    files["run_log.json"] = _dumps(log_body)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for f, t in files.items():
        (out / f).write_text(t)
    return ok, files


@main.command("run")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out-dir", default=None, help="defaults to the manifest's output_dir")
@click.option("--workers", default=None, type=int, help="worker processes (env MATINGTREES_THREADS)")
def run_cmd(manifest_path, out_dir, workers):
    """Run a JSON experiment manifest; every output embeds the manifest hash."""
    try:
        manifest = json.loads(Path(manifest_path).read_text())
    except json.JSONDecodeError as exc:
        raise click.UsageError(f"manifest is not valid JSON: {exc}")
    out_dir = out_dir or manifest.get("output_dir")
    if not out_dir:
        raise click.UsageError("no output directory: pass --out-dir or set output_dir")
    workers = workers or int(os.environ.get("MATINGTREES_THREADS", manifest.get("workers", 1)))
    ok, files = run_manifest(manifest, out_dir, workers)
    click.echo(f"{'PASS' if ok else 'FAIL'} {len(files)} files in {out_dir}")
    sys.exit(EXIT_OK if ok else EXIT_VIOLATION)


if __name__ == "__main__":
    main()
