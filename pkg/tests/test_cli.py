import json

import pytest
from click.testing import CliRunner

from matingtrees.cli import main


@pytest.fixture
def runner():
    return CliRunner()


def run(runner, *args, **kw):
    return runner.invoke(main, list(args), catch_exceptions=False, **kw)


def test_version_and_help(runner):
    assert run(runner, "--version").exit_code == 0
    assert "exponent" in run(runner, "--help").output


@pytest.mark.parametrize("group", ["mullin", "uipt", "bipolar"])
def test_verify_passes(runner, group):
    r = run(runner, group, "verify", "--n-max", "20", "--count", "5")
    assert r.exit_code == 0
    assert json.loads(r.output)["ok"] is True


def test_sample_writes_map(runner, tmp_path):
    out = tmp_path / "m.json"
    r = run(runner, "mullin", "sample", "--n", "6", "--seed", "2", "--out", str(out))
    assert r.exit_code == 0 and out.read_text().strip().startswith("{")


def test_schnyder_edges(runner):
    r = run(runner, "bipolar", "schnyder", "--edges", "9", "--seed", "1")
    assert r.exit_code == 0
    body = json.loads(r.output)
    assert body["valid"] and len(body["outer_vertices"]) == 3
    inner = [e for e in body["edges"] if e["color"] != "outer"]
    assert {e["color"] for e in inner} <= {"blue", "red", "green"}
    bad = run(runner, "bipolar", "schnyder", "--edges", "8")
    assert bad.exit_code == 2


def test_exponent_csv_and_json(runner):
    args = ["exponent", "ball", "--model", "lattice", "--n", "40", "--r", "8,16,32", "--seeds", "0"]
    csv = run(runner, *args, "--format", "csv")
    assert csv.exit_code == 0
    lines = csv.output.strip().splitlines()
    assert lines[0] == "log_r,log_volume" and len(lines) == 4
    assert run(runner, *args, "--out", "csv").output == csv.output
    js = json.loads(run(runner, *args).output)
    assert abs(js["slope"] - 2) < 0.2


def test_exponent_bad_params_is_usage_error(runner):
    r = run(runner, "exponent", "ball", "--model", "matedCRT", "--rho", "1.5", "--n", "20",
            "--r", "2,4", "--seeds", "0")
    assert r.exit_code == 2
    assert run(runner, "exponent", "ball", "--model", "torus").exit_code == 2


def test_selfcheck(runner):
    r = run(runner, "selfcheck")
    assert r.exit_code == 0 and json.loads(r.output)["ok"]


MANIFEST = {
    "master_seed": 3,
    "tasks": [
        {"kind": "verify", "name": "v", "model": "mullin", "count": 3, "n_max": 15},
        {"kind": "couple", "name": "c", "model": "mullin", "n": 60, "seeds": [0, 1], "mesh": 8},
        {"kind": "exponent_diam", "name": "d", "model": "path", "n": [16, 32, 64], "seeds": [0]},
    ],
}


def write_manifest(tmp_path, manifest):
    p = tmp_path / "m.json"
    p.write_text(json.dumps(manifest))
    return str(p)


def read_dir(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir())}


def test_manifest_rerun_byte_identical(runner, tmp_path):
    mpath = write_manifest(tmp_path, MANIFEST)
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    assert run(runner, "run", "--manifest", mpath, "--out-dir", str(a)).exit_code == 0
    assert run(runner, "run", "--manifest", mpath, "--out-dir", str(b)).exit_code == 0
    assert run(runner, "run", "--manifest", mpath, "--out-dir", str(c), "--workers", "2").exit_code == 0
    fa = read_dir(a)
    assert fa == read_dir(b) == read_dir(c)
    assert set(fa) == {"v.json", "c.json", "d.json", "d.csv", "run_log.json"}
    h = json.loads(fa["run_log.json"])["manifest_hash"]
    assert all(h in t.decode() for t in fa.values())


def test_manifest_seed_override(runner, tmp_path, monkeypatch):
    mpath = write_manifest(tmp_path, {"tasks": [{"kind": "verify", "name": "v", "model": "kreweras",
                                                 "count": 2, "n_max": 10}]})
    monkeypatch.setenv("MATINGTREES_SEED", "40")
    assert run(runner, "run", "--manifest", mpath, "--out-dir", str(tmp_path / "o")).exit_code == 0
    seeds = [r["seed"] for r in json.loads((tmp_path / "o" / "v.json").read_text())["results"]]
    assert seeds == [40, 41]


def test_manifest_empty_seeds_and_errors(runner, tmp_path, caplog):
    mpath = write_manifest(tmp_path, {"tasks": [{"kind": "verify", "name": "v", "model": "mullin",
                                                 "seeds": []}]})
    r = run(runner, "run", "--manifest", mpath, "--out-dir", str(tmp_path / "o"))
    assert r.exit_code == 0
    assert any("empty seed list" in m for m in caplog.messages)
    bad = write_manifest(tmp_path, {"tasks": [{"kind": "verify", "model": "torus", "seeds": [0]}]})
    assert run(runner, "run", "--manifest", bad, "--out-dir", str(tmp_path / "p")).exit_code == 2
    (tmp_path / "broken.json").write_text("{")
    r = run(runner, "run", "--manifest", str(tmp_path / "broken.json"), "--out-dir", str(tmp_path / "q"))
    assert r.exit_code == 2
    nodir = write_manifest(tmp_path, {"tasks": []})
    assert run(runner, "run", "--manifest", nodir).exit_code == 2


def test_violation_exit_code(runner, tmp_path, monkeypatch):
    from matingtrees import suite
    monkeypatch.setattr(suite, "roundtrip", lambda model, n, seed: {"valid": True, "roundtrip": False})
    r = run(runner, "mullin", "verify", "--n-max", "5", "--count", "2")
    assert r.exit_code == 1 and json.loads(r.output)["ok"] is False
