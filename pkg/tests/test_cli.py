import hashlib
import json
import subprocess
import sys

import numpy as np
import pytest

from phaselab import cli, entropy, extractor, samples, statevec
from phaselab.circuits import Circuit, CircuitSpec, build_circuit


@pytest.fixture
def spec_file(tmp_path):
    p = tmp_path / "spec.json"
    p.write_text(json.dumps(CircuitSpec(n=4, depth_cycles=3, seed=5).to_dict()))
    return p


def run(*args):
    return cli.main([str(a) for a in args])


def _manifest(out):
    return json.loads(cli.manifest_path(out).read_text())


# ---------------------------------------------------------------- exit codes and validation

def test_gen_writes_circuit_and_manifest(tmp_path, spec_file):
    out = tmp_path / "c.json"
    assert run("gen", "--spec", spec_file, "--out", out) == 0
    circ = Circuit.from_json(out.read_text())
    assert circ.n == 4
    doc = json.loads(out.read_text())
    assert {"version", "spec", "gates"} <= set(doc)
    assert {"cycle", "kind", "qubits", "params"} <= set(doc["gates"][0])
    m = _manifest(out)
    assert m["command"] == "gen" and m["seeds"]["root"] == 5
    assert {"config", "version", "code", "threads"} <= set(m)


def test_invalid_json_exits_2_with_path(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{ not json")
    assert run("gen", "--spec", bad, "--out", tmp_path / "c.json") == 2
    err = capsys.readouterr().err
    assert str(bad) in err and "invalid JSON" in err


def test_bad_spec_field_exits_2_with_field(tmp_path, capsys):
    d = CircuitSpec(n=4, depth_cycles=3).to_dict()
    d["gate_ensemble"] = "magic"
    p = tmp_path / "s.json"
    p.write_text(json.dumps(d))
    assert run("gen", "--spec", p, "--out", tmp_path / "c.json") == 2
    err = capsys.readouterr().err
    assert str(p) in err and "gate_ensemble" in err


def test_argparse_errors_exit_2(capsys):
    assert run("nosuchcommand") == 2
    assert run("entropy", "--F", "0.1") == 2


def test_missing_input_file_exits_2(tmp_path):
    assert run("gen", "--spec", tmp_path / "absent.json", "--out", tmp_path / "c.json") == 2


def test_threads_env_validation(tmp_path, monkeypatch):
    out = tmp_path / "e.json"
    for bad in ("zero", "0", "-3"):
        monkeypatch.setenv("PHASELAB_THREADS", bad)
        assert run("entropy", "--F", "0.01", "--k", "1000000", "--n", "30", "--out", out) == 2
    monkeypatch.setenv("PHASELAB_THREADS", "2")
    assert run("entropy", "--F", "0.01", "--k", "1000000", "--n", "30", "--out", out) == 0
    assert _manifest(out)["threads"] == 2


def test_runtime_failure_exits_1(tmp_path, monkeypatch, spec_file):
    def boom(*a, **k):
        raise RuntimeError("disk on fire")

    monkeypatch.setattr(cli.circuits, "build_circuit", boom)
    assert run("gen", "--spec", spec_file, "--out", tmp_path / "c.json") == 1


def test_version_flag():
    assert run("--version") == 0


# ---------------------------------------------------------------- commands

def test_sim_samples_probs_and_summary(tmp_path, spec_file):
    out, probs, summ = tmp_path / "s.hex", tmp_path / "p.csv", tmp_path / "sum.json"
    assert run("sim", "--spec", spec_file, "--samples", 500, "--out", out,
               "--probs-out", probs, "--summary", summ, "--mode", "depolarizing", "--p2", "0.01") == 0
    ss = samples.read_hex(out)
    assert ss.n == 4 and len(ss) == 500
    assert probs.read_text().splitlines()[0] == "prob"
    circ = build_circuit(CircuitSpec(n=4, depth_cycles=3, seed=5))
    ideal = statevec.run_ideal(circ).probabilities()
    assert np.allclose(samples.read_probs_csv(probs), ideal[ss.bitstrings])
    s = json.loads(summ.read_text())
    assert 0 < s["fidelity"] < 1
    # the xeb command reads the same files back
    xo = tmp_path / "x.json"
    assert run("xeb", "--samples", out, "--probs", probs, "--out", xo) == 0
    assert json.loads(xo.read_text())["value"] == pytest.approx(s["xeb_samples"])


def test_sim_needs_one_source(tmp_path, spec_file):
    assert run("sim", "--out", tmp_path / "s.hex") == 2
    c = tmp_path / "c.json"
    run("gen", "--spec", spec_file, "--out", c)
    assert run("sim", "--spec", spec_file, "--circuit", c, "--out", tmp_path / "s.hex") == 2
    assert run("sim", "--circuit", c, "--out", tmp_path / "s.hex") == 0


def test_sim_trace_csv(tmp_path, spec_file):
    out = tmp_path / "t.csv"
    assert run("sim", "--spec", spec_file, "--trace", 4, "--instances", 3, "--out", out) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "d,xeb,stderr" and len(lines) == 6


def test_popdyn_trace_and_scan(tmp_path):
    out = tmp_path / "pd.csv"
    assert run("popdyn", "--n", 6, "--d-max", 5, "--out", out) == 0
    assert out.read_text().splitlines()[0].startswith("d,")
    out2 = tmp_path / "scan.csv"
    assert run("popdyn", "--n", 8, "--T", 4, "--depths", "8,12", "--scan", "eps=0:0.5:0.25", "--out", out2) == 0
    assert len(out2.read_text().splitlines()) > 1
    assert run("popdyn", "--n", 6, "--out", out) == 2
    assert run("popdyn", "--d-max", 4, "--out", out) == 2
    assert run("popdyn", "--n", 6, "--d-max", 4, "--scan", "f=0:1:0.5", "--out", out) == 2


def test_phase_tables(tmp_path):
    out, fc = tmp_path / "ph.csv", tmp_path / "fc.csv"
    assert run("phase", "--n", 64, "--scan", "f=0:1:0.25", "--out", out, "--fc-out", fc) == 0
    assert "alpha" in fc.read_text().splitlines()[0]
    assert run("phase", "--n", 64, "--scan", "f=1:0:0.25", "--out", out) == 2


def test_spoof_and_entropy_json(tmp_path):
    out = tmp_path / "sp.json"
    assert run("spoof", "--dl", 20, "--dr", 20, "--k", 1e6, "--d", 4, "--out", out) == 0
    assert json.loads(out.read_text())["linear_bound"] > 0
    out = tmp_path / "en.json"
    assert run("entropy", "--F", "0.01", "--k", "1000000", "--n", "30", "--out", out) == 0
    want = entropy.report(entropy.EntropyParams(F=0.01, k=10**6, D=2.0**30, unit="bits"))
    assert json.loads(out.read_text())["smooth_bits"] == pytest.approx(want["smooth_bits"])
    assert run("entropy", "--F", "2", "--k", "10", "--n", "5", "--out", out) == 2


def test_extract_with_seed_file(tmp_path):
    raw = tmp_path / "raw.bin"
    raw.write_bytes(np.random.default_rng(0).bytes(2000))
    tp = extractor.trevisan_params(16000, 256, 1e-6)
    seed = tmp_path / "seed.bin"
    seed.write_bytes(np.random.default_rng(1).bytes(-(-tp.d // 8)))
    out = tmp_path / "o.bin"
    assert run("extract", "--in", raw, "--k-bits", 8000, "--m", 256, "--seed", seed, "--out", out) == 0
    audit = json.loads((tmp_path / "o.bin.audit.json").read_text())
    assert audit["output_bits"] == 256
    assert audit["output_sha256"] == hashlib.sha256(out.read_bytes()).hexdigest()
    first = out.read_bytes()
    assert run("extract", "--in", raw, "--k-bits", 8000, "--m", 256, "--seed", seed, "--out", out) == 0
    assert out.read_bytes() == first
    # over budget and short seed are validation failures
    assert run("extract", "--in", raw, "--k-bits", 500, "--m", 256, "--seed", seed, "--out", out) == 2
    short = tmp_path / "short.bin"
    short.write_bytes(b"\x00" * 4)
    assert run("extract", "--in", raw, "--k-bits", 8000, "--m", 256, "--seed", short, "--out", out) == 2
    assert run("extract", "--in", raw, "--k-bits", 10**6, "--seed", seed, "--out", out) == 2


def test_extract_hmac(tmp_path):
    raw = tmp_path / "raw.bin"
    raw.write_bytes(b"abc" * 100)
    seed = tmp_path / "seed.bin"
    seed.write_bytes(bytes(range(128)))
    out = tmp_path / "o.bin"
    assert run("extract", "--in", raw, "--k-bits", 100, "--m", 512, "--extractor", "hmac",
               "--seed", seed, "--out", out) == 0
    want = extractor.hmac_extract(raw.read_bytes(), seed.read_bytes(), 512)
    assert out.read_bytes() == np.packbits(want).tobytes()


def test_schmidt_table_and_chi(tmp_path):
    out = tmp_path / "sc.csv"
    assert run("schmidt", "--n", 8, "--depth", 6, "--instances", 2, "--chi", "1,4", "--out", out) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "n,d,chi,purity,bound,true_F,xeb" and len(lines) == 5
    out = tmp_path / "chi.json"
    assert run("schmidt", "--target-F", "1e-4", "--purity", "1", "--out", out) == 0
    assert json.loads(out.read_text())["ratio"] == pytest.approx(25.5, rel=0.01)


def test_staircase_cut_halves_grid():
    cut = cli.staircase_cut(4, 4)
    assert len(cut) == 8 and cut[0] == 0 and 15 not in cut


# ---------------------------------------------------------------- recipes and reproducibility

def test_recipe_list_and_unknown(capsys, tmp_path):
    assert run("recipe", "list") == 0
    names = capsys.readouterr().out.split()
    assert "weaklink-transition" in names and "randomness-pipeline" in names
    assert run("recipe", "nope", "--out-dir", tmp_path) == 2


def test_recipe_reruns_are_manifest_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run("recipe", "spoof-budget", "--out-dir", a) == 0
    assert run("recipe", "spoof-budget", "--out-dir", b) == 0
    ma, mb = (json.loads((d / "manifest.json").read_text()) for d in (a, b))
    ma.pop("outputs"), mb.pop("outputs")
    assert ma == mb
    assert (a / "spoof_budget.csv").read_bytes() == (b / "spoof_budget.csv").read_bytes()
    assert (a / "summary.json").read_bytes() == (b / "summary.json").read_bytes()


def test_randomness_recipe_quick(tmp_path):
    assert run("recipe", "randomness-pipeline", "--quick", "--out-dir", tmp_path) == 0
    s = json.loads((tmp_path / "summary.json").read_text())
    assert s["output_bits"] > 0 and s["pass"]


def test_identical_config_gives_identical_bytes(tmp_path, spec_file):
    out = tmp_path / "x.hex"
    snaps = []
    for _ in range(2):
        assert run("sim", "--spec", spec_file, "--samples", 300, "--seed", 9, "--out", out) == 0
        snaps.append((out.read_bytes(), cli.manifest_path(out).read_bytes()))
    assert snaps[0] == snaps[1]


def test_console_script_runs():
    r = subprocess.run([sys.executable, "-m", "phaselab.cli", "recipe", "list"], capture_output=True, text=True)
    assert r.returncode == 0 and "spoof-budget" in r.stdout
