import json
import re
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from tripletlink import cli


def run_cli(args, cwd):
    return subprocess.run([sys.executable, "-m", "tripletlink.cli", *args],
                          capture_output=True, text=True, cwd=cwd)


def write_cfg(tmp_path, name, data):
    path = tmp_path / name
    path.write_text(json.dumps(data), encoding="utf-8")
    return str(path)


def test_validate_ok(tmp_path):
    cfg = write_cfg(tmp_path, "c.json", {"params": "demf"})
    res = run_cli(["validate", "--config", cfg, "--out", str(tmp_path / "o")],
                  cwd=tmp_path)
    assert res.returncode == 0
    rep = json.loads((tmp_path / "o" / "validate.json").read_text())
    assert rep["regimes"]["+1"] == "symmetric"
    assert rep["perturbative_ok"] is True


def test_validate_rejects_zero_zeeman(tmp_path):
    cfg = write_cfg(tmp_path, "c.json", {"params": {
        "omega_n": 1.0, "omega_n_prime": 1.0, "omega_e": 0.0,
        "A": 1.0, "A_prime": 1.0, "D": -10.0}})
    res = run_cli(["validate", "--config", cfg, "--out", str(tmp_path / "o")],
                  cwd=tmp_path)
    assert res.returncode == 2
    err = json.loads(res.stderr)
    assert "omega_e" in err["error"]["message"]


def test_unknown_config_key_has_path(tmp_path):
    cfg = write_cfg(tmp_path, "c.json", {"params": "demf",
                                         "protocol": {"nmae": "shelving"}})
    res = run_cli(["protocol", "--config", cfg, "--out", str(tmp_path / "o")],
                  cwd=tmp_path)
    assert res.returncode == 2
    err = json.loads(res.stderr)
    assert err["error"]["path"] == "$.protocol.nmae"


def test_unknown_figure(tmp_path):
    cfg = write_cfg(tmp_path, "c.json", {"params": "demf",
                                         "figure": {"name": "fig99"}})
    res = run_cli(["figure", "--config", cfg, "--out", str(tmp_path / "o")],
                  cwd=tmp_path)
    assert res.returncode == 2
    assert json.loads(res.stderr)["error"]["type"] == "UnknownFigureError"


def test_grid_too_large(tmp_path):
    cfg = write_cfg(tmp_path, "c.json", {"params": "dmfph", "sweep": {
        "target": {"kind": "protocol", "name": "shelving"},
        "axes": [{"name": "bound", "start": 0.001, "stop": 0.1,
                  "num": 2_000_000}]}})
    res = run_cli(["sweep", "--config", cfg, "--out", str(tmp_path / "o")],
                  cwd=tmp_path)
    assert res.returncode == 2
    assert json.loads(res.stderr)["error"]["type"] == "GridTooLargeError"


def test_spectrum_and_figures(tmp_path):
    cfg = write_cfg(tmp_path, "c.json", {"params": "demf",
                                         "figure": {"name": "fig4", "points": 32}})
    out = str(tmp_path / "o")
    assert run_cli(["spectrum", "--config", cfg, "--out", out], cwd=tmp_path).returncode == 0
    assert run_cli(["figure", "--config", cfg, "--out", out], cwd=tmp_path).returncode == 0
    assert (tmp_path / "o" / "spectrum.json").exists()
    assert (tmp_path / "o" / "fig4.csv").exists()
    assert (tmp_path / "o" / "fig4.png").exists()
    cfg9 = write_cfg(tmp_path, "c9.json", {"params": "demf",
                                           "figure": {"name": "fig9", "points": 9}})
    assert run_cli(["figure", "--config", cfg9, "--out", out], cwd=tmp_path).returncode == 0
    assert (tmp_path / "o" / "fig9_m_zero.png").exists()


def test_csv_number_format(tmp_path):
    cfg = write_cfg(tmp_path, "c.json", {"params": "demf",
                                         "figure": {"name": "fig4", "points": 8}})
    out = tmp_path / "o"
    assert run_cli(["figure", "--config", cfg, "--out", str(out)],
                   cwd=tmp_path).returncode == 0
    lines = (out / "fig4.csv").read_text(encoding="utf-8").split("\n")
    assert lines[0] == "a_plus_t,e_plus,e_zero"
    cell = lines[2].split(",")[0]
    assert re.fullmatch(r"-?\d\.\d{11}e[+-]\d{2,3}", cell)


def test_decay_trajectory_export(tmp_path):
    cfg = write_cfg(tmp_path, "c.json", {"params": "demf",
                                         "decay": {"initial": "rho3",
                                                   "samples": 16,
                                                   "t_end_factor": 6.0}})
    out = tmp_path / "o"
    res = run_cli(["decay", "--config", cfg, "--out", str(out)], cwd=tmp_path)
    assert res.returncode == 0
    lines = (out / "decay.csv").read_text().strip().split("\n")
    header = lines[0].split(",")
    assert header[:4] == ["t", "purity", "excited_population", "EF"]
    assert "rho_00_re" in header and "rho_33_im" in header
    assert len(lines) == 17


def test_single_point_sweep_matches_protocol(tmp_path):
    base = {"params": "dmfph", "protocol": {"name": "shelving", "bound": 0.01}}
    cfg_p = write_cfg(tmp_path, "p.json", base)
    out_p = tmp_path / "op"
    assert run_cli(["protocol", "--config", cfg_p, "--out", str(out_p)],
                   cwd=tmp_path).returncode == 0
    ef_direct = json.loads((out_p / "protocol.json").read_text())["ef"]

    cfg_s = write_cfg(tmp_path, "s.json", {"params": "dmfph", "sweep": {
        "target": {"kind": "protocol", "name": "shelving"},
        "axes": [{"name": "bound", "values": [0.01]}]}})
    out_s = tmp_path / "os"
    assert run_cli(["sweep", "--config", cfg_s, "--out", str(out_s), "--jobs", "1"],
                   cwd=tmp_path).returncode == 0
    row = (out_s / "sweep.csv").read_text().strip().split("\n")[1].split(",")
    assert abs(float(row[1]) - ef_direct) < 1e-12


def test_sweep_deterministic_and_parallel(tmp_path):
    cfg = write_cfg(tmp_path, "s.json", {"params": "dmfph", "sweep": {
        "target": {"kind": "protocol", "name": "shelving"},
        "axes": [{"name": "bound", "values": [0.005, 0.01, 0.02, 0.05]}]}})
    outs = []
    for tag, jobs in (("a", "1"), ("b", "1"), ("c", "2")):
        out = tmp_path / tag
        assert run_cli(["sweep", "--config", cfg, "--out", str(out),
                        "--jobs", jobs], cwd=tmp_path).returncode == 0
        outs.append((out / "sweep.csv").read_bytes())
    assert outs[0] == outs[1]          # byte-identical rerun
    assert outs[0] == outs[2]          # order independent of worker count


def test_mc_seed_sweep_variance(tmp_path):
    cfg = write_cfg(tmp_path, "s.json", {"params": "demf", "sweep": {
        "target": {"kind": "entangling-power-mc", "gate": "cnot",
                   "samples": 20000},
        "axes": [{"name": "seed", "values": list(range(12))}]}})
    out = tmp_path / "o"
    assert run_cli(["sweep", "--config", cfg, "--out", str(out), "--jobs", "2"],
                   cwd=tmp_path).returncode == 0
    lines = (out / "sweep.csv").read_text().strip().split("\n")[1:]
    means = np.array([float(l.split(",")[1]) for l in lines])
    errs = np.array([float(l.split(",")[2]) for l in lines])
    spread = means.std(ddof=1)
    assert 0.5 * errs.mean() <= spread <= 2.0 * errs.mean()


def test_config_dir_env(tmp_path, monkeypatch):
    cfgdir = tmp_path / "configs"
    cfgdir.mkdir()
    (cfgdir / "c.json").write_text(json.dumps({"params": "demf"}))
    monkeypatch.setenv("TRIPLETLINK_CONFIG_DIR", str(cfgdir))
    monkeypatch.chdir(tmp_path)
    assert cli.main(["validate", "--config", "c.json",
                     "--out", str(tmp_path / "o")]) == 0
