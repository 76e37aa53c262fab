import json
import shutil
import subprocess

import numpy as np
import pytest

from apwtk import cli, commands, selection
from apwtk.errors import CertificateError
from apwtk.serialize import read_set_signal, read_signal

SIN = '{"kind": "trig", "terms": [{"c": 1.0, "lambda": 1.0, "form": "sin"}]}'
BRANCHES = json.dumps(
    {
        "kind": "branches",
        "branches": [
            {"kind": "trig", "terms": [{"c": 1.0, "lambda": 1.0, "form": "sin"}]},
            {"kind": "sum", "parts": [
                {"kind": "trig", "terms": [{"c": 1.0, "lambda": 1.0, "form": "sin"}]},
                {"kind": "trig", "terms": [{"c": 5.0, "lambda": 0.0}]},
            ]},
        ],
    }
)


def run(*argv):
    return cli.main([str(a) for a in argv])


def gen(tmp_path, spec, name="f", grid="0,0.1,600", *extra):
    assert run("gen", "--grid", grid, "--spec", spec, "--name", name, "--out", tmp_path, *extra) == 0
    return tmp_path / f"{name}.csv"


def test_gen_trig(tmp_path):
    f = read_signal(gen(tmp_path, SIN))
    assert f.grid.n == 600
    assert np.allclose(f.scalar, np.sin(f.grid.times), atol=1e-15)


def test_gen_branches(tmp_path):
    F = read_set_signal(gen(tmp_path, BRANCHES, "F"))
    assert all(len(s) == 2 for s in F.sets)
    assert np.allclose(F.padded[:, 1, 0] - F.padded[:, 0, 0], 5.0)


def test_gen_seeded_noise(tmp_path):
    spec = '{"kind": "noise", "sigma": 0.1, "base": ' + SIN + "}"
    a = gen(tmp_path / "a", spec, "n", "0,0.1,600", "--seed", 7).read_bytes()
    b = gen(tmp_path / "b", spec, "n", "0,0.1,600", "--seed", 7).read_bytes()
    c = gen(tmp_path / "c", spec, "n", "0,0.1,600", "--seed", 8).read_bytes()
    assert a == b and a != c


def test_gen_noise_needs_seed(tmp_path):
    spec = '{"kind": "noise", "sigma": 0.1, "base": ' + SIN + "}"
    assert run("gen", "--grid", "0,0.1,10", "--spec", spec, "--out", tmp_path) == 2


def test_force_flag(tmp_path):
    gen(tmp_path, SIN)
    assert run("gen", "--grid", "0,0.1,600", "--spec", SIN, "--name", "f", "--out", tmp_path) == 2
    assert run("gen", "--grid", "0,0.1,600", "--spec", SIN, "--name", "f", "--out", tmp_path, "--force") == 0


def test_bad_inputs_exit_two(tmp_path):
    assert run("gen", "--grid", "0,0.1", "--spec", SIN, "--out", tmp_path) == 2
    assert run("gen", "--grid", "0,0.1,10", "--spec", "{not json", "--out", tmp_path) == 2
    bad = tmp_path / "bad.csv"
    bad.write_text("t,v1\n0,1\n0.1,nan\n")
    assert run("analyze", "--input", bad, "--out", tmp_path) == 2
    assert run("analyze", "--input", tmp_path / "missing.csv", "--out", tmp_path) == 2


def _report(tmp_path, spec, grid="0,0.1,2000"):
    src = gen(tmp_path, spec, "in", grid)
    assert run("analyze", "--input", src, "--out", tmp_path, "--tau-step", "0.5") == 0
    return json.loads((tmp_path / "report.json").read_text())


def test_analyze_constant(tmp_path):
    rep = _report(tmp_path, '{"kind": "trig", "terms": [{"c": 2.0, "lambda": 0.0}]}')
    assert rep["class"] == "bohr"
    lams = [e["lambda"] for e in rep["fourier"]["entries"]]
    assert len(lams) == 1 and abs(lams[0]) < 2 * np.pi / 200


def test_analyze_sin(tmp_path):
    rep = _report(tmp_path, SIN)
    lams = sorted(e["lambda"] for e in rep["fourier"]["entries"])
    assert len(lams) == 2
    assert lams[0] == pytest.approx(-1.0, abs=2 * np.pi / 200)
    assert lams[1] == pytest.approx(1.0, abs=2 * np.pi / 200)


def test_analyze_spikes_fail_msharp(tmp_path):
    spec = json.dumps({"kind": "spikes", "times": [10.0 * k for k in range(1, 12)], "heights": [2.0**k for k in range(1, 12)]})
    rep = _report(tmp_path, spec)
    assert rep["j_p"]["in_msharp"] is False


def test_decompose_parity_and_determinism(tmp_path):
    src = gen(tmp_path, SIN, "in", "0,0.1,1000")
    for out in ("a", "b"):
        assert run("decompose", "--input", src, "--eps", 0.5, "--b", 6.283185307179586, "--tau-step", 0.5,
                   "--out", tmp_path / out) == 0
    a = (tmp_path / "a" / "family.json").read_bytes()
    assert a == (tmp_path / "b" / "family.json").read_bytes()
    files = commands.run_decompose(read_signal(src), 0.5, b=6.283185307179586, tau_step=0.5)
    assert files["family.json"].encode() == a
    assert files["masks.csv"] == (tmp_path / "a" / "masks.csv").read_text()
    fam = json.loads(a)
    assert fam["max_center_distance"] < 0.5


def test_select_parity_and_plot(tmp_path):
    F = gen(tmp_path, BRANCHES, "F")
    g = gen(tmp_path, '{"kind": "trig", "terms": [{"c": 1.0, "lambda": 1.0, "form": "sin"}, {"c": 0.1, "lambda": 0.0}]}', "g")
    assert run("select", "--input-set", F, "--input", g, "--eps", 0.5, "--plot", "--out", tmp_path / "o") == 0
    files = commands.run_select(read_set_signal(F), read_signal(g), eps=0.5, plot=True)
    for name in ("selection.json", "selection.csv", "plot.csv"):
        assert files[name] == (tmp_path / "o" / name).read_text()
    rep = json.loads(files["selection.json"])
    assert rep["membership_defect"] == 0.0 and rep["distance_certificate"] <= 0
    plot = np.loadtxt(tmp_path / "o" / "plot.csv", delimiter=",", skiprows=1)
    assert (tmp_path / "o" / "plot.csv").read_text().splitlines()[0] == "t,rho_g_F,rho_f_g"
    assert np.allclose(plot[:, 1], 0.1) and np.allclose(plot[:, 2], 0.1)


@pytest.mark.parametrize("mode,extra", [("modulus", ["--eta", "linear,1"]), ("net", ["--n", "2"]), ("dense", ["--count", "2"])])
def test_select_modes(tmp_path, mode, extra):
    F = gen(tmp_path, BRANCHES, "F", "0,0.1,300")
    g = gen(tmp_path, SIN, "g", "0,0.1,300")
    assert run("select", "--input-set", F, "--input", g, "--mode", mode, "--out", tmp_path, *extra) == 0
    assert json.loads((tmp_path / "selection.json").read_text())["mode"] == mode


def test_select_needs_target(tmp_path):
    F = gen(tmp_path, BRANCHES, "F", "0,0.1,100")
    assert run("select", "--input-set", F, "--out", tmp_path) == 2


def test_certificate_violation_exits_three(tmp_path, monkeypatch):
    F = gen(tmp_path, BRANCHES, "F", "0,0.1,100")
    g = gen(tmp_path, SIN, "g", "0,0.1,100")

    def broken(*a, **k):
        raise CertificateError("distance bound violated after projection")

    monkeypatch.setattr(selection, "select_eps", broken)
    assert run("select", "--input-set", F, "--input", g, "--out", tmp_path) == 3
    assert not (tmp_path / "selection.json").exists()


def test_construction_failure_exits_four(tmp_path):
    src = gen(tmp_path, SIN, "in", "0,0.1,200")
    # 2*pi/b beyond the usable frequency band leaves the separator search empty
    assert run("decompose", "--input", src, "--eps", 0.5, "--b", 0.2, "--out", tmp_path) == 4


def test_threads_flag(tmp_path, monkeypatch):
    monkeypatch.delenv("APWTK_THREADS", raising=False)
    src = gen(tmp_path, SIN, "in", "0,0.1,400")
    assert run("analyze", "--input", src, "--threads", 2, "--out", tmp_path / "t2") == 0
    assert run("analyze", "--input", src, "--threads", 1, "--out", tmp_path / "t1") == 0
    assert (tmp_path / "t1" / "report.json").read_bytes() == (tmp_path / "t2" / "report.json").read_bytes()
    assert run("analyze", "--input", src, "--threads", 0, "--out", tmp_path) == 2


@pytest.mark.skipif(shutil.which("apwtk") is None, reason="console script not installed")
def test_console_script(tmp_path):
    proc = subprocess.run(["apwtk", "gen", "--grid", "0,0.1,10", "--spec", SIN, "--out", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.strip().endswith("signal.csv")
