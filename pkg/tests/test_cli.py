import json
import math
import subprocess
import sys

import numpy as np
import pytest

from qlga import __version__, cli, state as st
from qlga.config import parse_config


def write(tmp_path, text, name="exp.ini"):
    p = tmp_path / name
    p.write_text(text)
    return p


def run_cli(*args):
    return cli.main([str(a) for a in args])


BRICK_RUN = """[lattice]
l = 16
epsilon = 0.5
[run]
steps = 6
observe_every = 2
shots = 5
[initial]
kind = gaussian
centers = 3
widths = 1
momenta = 0.5
[potential]
external = harmonic
strength = 0.2
"""


def test_run_brick_outputs(tmp_path):
    out = tmp_path / "out"
    assert run_cli("run", "--config", write(tmp_path, BRICK_RUN), "--out", out) == 0
    comments, rows = cli.read_csv(out / "trace.csv")
    assert comments[0] == f"qlga {__version__}"
    assert "[potential]" in comments and "external = harmonic" in comments
    assert [int(r["step"]) for r in rows] == [0, 2, 4, 6]
    assert abs(float(rows[-1]["norm"]) - 1) < 1e-12
    summary = json.loads((out / "summary.json").read_text())
    assert summary["version"] == __version__
    assert summary["config"]["lattice"]["l"] == 16
    assert len(summary["samples"]) == 5 and all(len(s) == 16 for s in summary["samples"])
    snap = cli.read_snapshot(out / "snapshot.csv")
    assert st.norm(snap) == pytest.approx(1)


def test_floats_reload_bit_faithfully(tmp_path):
    out = tmp_path / "out"
    run_cli("run", "--config", write(tmp_path, BRICK_RUN), "--out", out)
    _, rows = cli.read_csv(out / "trace.csv")
    for r in rows:
        x = float(r["mean_x1"])
        assert cli.fmt(x) == r["mean_x1"]


def test_determinism(tmp_path):
    cfg = write(tmp_path, BRICK_RUN + "[experiment]\nseed = 5\n")
    for name in ("a", "b"):
        assert run_cli("run", "--config", cfg, "--out", tmp_path / name) == 0
    for f in ("trace.csv", "snapshot.csv", "summary.json"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_seed_flag_changes_samples(tmp_path):
    cfg = write(tmp_path, BRICK_RUN)
    run_cli("run", "--config", cfg, "--out", tmp_path / "a", "--seed", 1)
    run_cli("run", "--config", cfg, "--out", tmp_path / "b", "--seed", 2)
    sa = json.loads((tmp_path / "a" / "summary.json").read_text())
    sb = json.loads((tmp_path / "b" / "summary.json").read_text())
    assert sa["config"]["experiment"]["seed"] == 1
    assert sa["samples"] != sb["samples"]


def test_run_qlga_dense(tmp_path):
    text = "[lattice]\nmode = qlga\nd = 2\nl = 2\nepsilon = 0.5\n[run]\nsteps = 3\nrepresentation = dense\n"
    assert run_cli("run", "--config", write(tmp_path, text), "--out", tmp_path / "o") == 0
    assert (tmp_path / "o" / "snapshot.csv").exists()


def test_dispersion_outputs(tmp_path):
    text = "[lattice]\nl = 128\nepsilon = 0.05\n[kinetic]\na = 0+0.5j\nb = 0.8660254037844386\n"
    out = tmp_path / "d"
    assert run_cli("dispersion", "--config", write(tmp_path, text), "--out", out) == 0
    _, rows = cli.read_csv(out / "dispersion.csv")
    assert list(rows[0]) == ["k", "kappa", "omega_measured", "omega_model", "residual"]
    s = json.loads((out / "summary.json").read_text())
    assert s["target_mass"] == pytest.approx(math.sqrt(3))
    assert s["rel_error"] < 0.01


def test_converge_outputs(tmp_path):
    text = "[converge]\nlength = 10\ntime = 0.16\nh = 0.1\nlevels = 2, 1\nrefine = 2\n"
    out = tmp_path / "c"
    assert run_cli("converge", "--config", write(tmp_path, text), "--out", out) == 0
    _, rows = cli.read_csv(out / "convergence.csv")
    assert [int(r["l"]) for r in rows] == [50, 100]
    assert "order" in json.loads((out / "summary.json").read_text())


def test_oracle_check(tmp_path):
    text = "[lattice]\nl = 6\n[run]\nsteps = 10\nstatistics = fermion\n[initial]\noccupied = 0, 3\n" \
           "[potential]\npair = contact\npair_strength = 2\npair_range = 0.1\n"
    out = tmp_path / "o"
    assert run_cli("oracle-check", "--config", write(tmp_path, text), "--out", out) == 0
    assert json.loads((out / "summary.json").read_text())["max_deviation"] < 1e-12


def test_oracle_check_respects_dense_limit(tmp_path):
    text = "[lattice]\nl = 32\n"
    assert run_cli("oracle-check", "--config", write(tmp_path, text), "--out", tmp_path / "o") == cli.EXIT_CONFIG


def test_gate_count(tmp_path):
    text = "[lattice]\nmode = qlga\nd = 3\nl = 20\n[gate-count]\nn = 20\n"
    out = tmp_path / "g"
    assert run_cli("gate-count", "--config", write(tmp_path, text), "--out", out) == 0
    counts = json.loads((out / "gate_count.json").read_text())["counts"]
    assert counts["paper_estimate"] == 36 * 20**6
    assert counts["classical_log10"] == pytest.approx(60 * math.log10(20))


def test_m_inverse(tmp_path):
    text = "[m-inverse]\nl_list = 4, 16\n"
    out = tmp_path / "m"
    assert run_cli("m-inverse", "--config", write(tmp_path, text), "--out", out) == 0
    _, rows = cli.read_csv(out / "m_inverse.csv")
    assert [r["l"] for r in rows] == ["4", "16"]
    s = json.loads((out / "summary.json").read_text())
    assert set(s["histograms"]) == {"4", "16"}


def test_default_config_without_file(tmp_path):
    assert run_cli("gate-count", "--out", tmp_path / "g") == 0


def test_exit_codes(tmp_path):
    assert run_cli("run", "--config", write(tmp_path, "[kinetic]\nbogus = 1\n"), "--out", tmp_path) == cli.EXIT_CONFIG
    assert run_cli("run", "--config", tmp_path / "missing.ini", "--out", tmp_path) == cli.EXIT_IO
    assert run_cli("run", "--config", write(tmp_path, BRICK_RUN), "--seed", -1) == cli.EXIT_CONFIG
    gate = write(tmp_path, "[experiment]\nkind = gate-count\n", "g.ini")
    assert run_cli("run", "--config", gate) == cli.EXIT_CONFIG
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert run_cli("gate-count", "--out", blocker / "sub") == cli.EXIT_IO


def test_invariant_breach_exit_code(tmp_path):
    text = BRICK_RUN + "[tolerance]\nnorm = 1e-300\n"
    # round-off alone exceeds this tolerance
    assert run_cli("run", "--config", write(tmp_path, text), "--out", tmp_path / "x") == cli.EXIT_INVARIANT


def test_singular_m_is_config_error(tmp_path):
    # b = 0 passes validation but b + 2a cos(2 pi k / 4) vanishes at k = 1
    text = "[m-inverse]\na = 0+0.7071067811865476j\nb = 0\nl_list = 4\n"
    cfg = parse_config(text, kind="m-inverse")
    assert cli.run_experiment(cfg, tmp_path) == cli.EXIT_CONFIG


def test_atomic_write_leaves_no_temp(tmp_path):
    cli.write_atomic(tmp_path / "x.txt", "hello")
    assert [p.name for p in tmp_path.iterdir()] == ["x.txt"]


def test_snapshot_roundtrip(tmp_path, rng):
    from qlga.lattice import build_lattice

    lat = build_lattice(1, 4, 0.5, "qlga")
    s = st.random_sector_state(lat, 2, "fermion", rng)
    cli.write_atomic(tmp_path / "s.csv", cli.snapshot_text(s, lat))
    back = cli.read_snapshot(tmp_path / "s.csv")
    np.testing.assert_array_equal(back.vector, s.vector)
    with pytest.raises(TypeError):
        cli.snapshot_text(st.sector_to_dense(s), lat)


def test_console_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "qlga.cli", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and __version__ in r.stdout
