import importlib.util
import os
import subprocess
import sys
from pathlib import Path

from matingtrees import _kernels

BENCH = Path(__file__).resolve().parent.parent / "benchmarks" / "bench_kernels.py"


def load_bench():
    spec = importlib.util.spec_from_file_location("bench_kernels", BENCH)
    mod = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(mod)
    return mod


def test_backend_name():
    assert _kernels.backend() in ("numba", "python")


def test_fallback_selected_by_env():
    env = dict(os.environ, MATINGTREES_NO_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", "from matingtrees._kernels import backend; print(backend())"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_backends_agree():
    bench = load_bench()
    fast = bench.run_backend(False, 400, 0)
    slow = bench.run_backend(True, 400, 0)
    assert slow["backend"] == "python"
    assert [r["name"] for r in fast["rows"]] == [r["name"] for r in slow["rows"]]
    for a, b in zip(fast["rows"], slow["rows"]):
        assert a["hash"] == b["hash"], a["name"]
