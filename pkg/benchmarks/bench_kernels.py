"""Compiled kernels against the interpreted fallback.

Each backend runs in its own subprocess because the switch is read at import.
The child times every workload and hashes its output; the parent prints a
table and checks that both backends produced identical hashes.

    python3 benchmarks/bench_kernels.py [--n 20000] [--repeat 3]
"""
import argparse
import json
import os
import subprocess
import sys

CHILD = r"""
import hashlib, json, sys, time
import numpy as np
from matingtrees import _kernels, mullin, uipt, bipolar
from matingtrees.graphs import build_h_graph, build_mated_crt, MULLIN
from matingtrees.walks import make_distribution, sample_walk, bridge_couple
from matingtrees.coupling import build_coupled_paths, Graph, diameter

n, repeat = int(sys.argv[1]), int(sys.argv[2])

def h(*arrs):
    d = hashlib.sha256()
    for a in arrs:
        d.update(np.ascontiguousarray(np.asarray(a, dtype=np.float64)).tobytes())
    return d.hexdigest()[:16]

wm = sample_walk(make_distribution("MullinSimple"), (-n - 1, n), 1)
wk = sample_walk(make_distribution("Kreweras"), (-n - 1, n), 1)
wb = sample_walk(make_distribution("BipolarUniform"), (-n - 1, n), 1)
small = sample_walk(make_distribution("MullinSimple"), (-min(n, 2000) - 1, min(n, 2000)), 1)
grid = bridge_couple(small, 16, 1)

def primal():
    return h(*mullin.fast_primal_graph(wm)[1:3])

def kreweras():
    return h(*uipt.fast_uipt_graph(wk)[1:3])

def bip():
    return h(*bipolar.fast_bipolar_graph(wb)[1:3])

def hgraph():
    g = build_h_graph(wm, MULLIN)
    return h(g.ei, g.ej)

def bfs():
    g = Graph.from_adj(build_h_graph(wm, MULLIN))
    return h(g.distances(0))

def mated():
    g = build_mated_crt(grid)
    return h(g.ei, g.ej)

def paths():
    rep = build_coupled_paths(small, grid, MULLIN)
    return h(rep.H_to_G_congestion, rep.G_to_H_congestion)

def diam():
    nv, u, v, _, _ = mullin.fast_primal_graph(small)
    return str(int(diameter(Graph.from_arrays(nv, u, v), exact_limit=3000)))

out = {"backend": _kernels.backend(), "rows": []}
for name, fn in [("primal_graph", primal), ("uipt_graph", kreweras), ("bipolar_graph", bip),
                 ("h_graph", hgraph), ("bfs", bfs), ("mated_crt", mated),
                 ("coupled_paths", paths), ("diameter", diam)]:
    t0 = time.perf_counter(); digest = fn(); first = time.perf_counter() - t0
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter(); fn(); best = min(best, time.perf_counter() - t0)
    out["rows"].append({"name": name, "first": first, "best": best, "hash": digest})
print(json.dumps(out))
"""


def run_backend(no_numba, n, repeat):
    env = dict(os.environ)
    env["MATINGTREES_NO_NUMBA"] = "1" if no_numba else "0"
    res = subprocess.run([sys.executable, "-c", CHILD, str(n), str(repeat)], env=env,
                         capture_output=True, text=True, check=True)
    return json.loads(res.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=20000, help="walk window half-width")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    fast = run_backend(False, args.n, args.repeat)
    slow = run_backend(True, args.n, args.repeat)
    print(f"n = {args.n}, best of {args.repeat} (first call includes compilation)")
    print(f"{'kernel':<15}{'numba first':>13}{'numba best':>12}{'python':>10}{'speedup':>9}  same")
    agree = True
    for a, b in zip(fast["rows"], slow["rows"]):
        same = a["hash"] == b["hash"]
        agree &= same
        print(f"{a['name']:<15}{a['first']:>13.3f}{a['best']:>12.4f}{b['best']:>10.3f}"
              f"{b['best'] / max(a['best'], 1e-9):>9.1f}  {'yes' if same else 'NO'}")
    if not agree:
        sys.exit("backends disagree")


if __name__ == "__main__":
    main()
