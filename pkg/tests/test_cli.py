import json

import pytest

from nspr.cli import main

SOLVER = {"n": 16, "dt": 0.01, "t_end": 0.7, "amplitude": 0.1}
DESK = {"eps2": 1e-3, "R": 0.4, "derive_eps2": False}


def write_config(path, **sections):
    path.write_text(json.dumps(sections))
    return str(path)


@pytest.fixture(scope="module")
def traj_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg = write_config(root / "cfg.json", solver=SOLVER)
    out = root / "traj"
    assert main(["simulate", "--config", cfg, "--out", str(out), "--quiet"]) == 0
    return out


def run_twice(tmp_path, argv, name):
    outs = []
    for tag in ("a", "b"):
        csv = tmp_path / tag / f"{name}.csv"
        csv.parent.mkdir()
        code = main([*argv, "--out", str(csv), "--quiet"])
        outs.append((code, csv.read_bytes()))
    assert outs[0] == outs[1], "rerun is not byte-identical"
    return outs[0][0], tmp_path / "a" / f"{name}.csv"


def test_simulate_writes_summary_and_config(traj_dir):
    summary = json.loads((traj_dir / "summary.json").read_text())
    config = json.loads((traj_dir / "config.json").read_text())
    assert summary["pass"] and summary["snapshots"] == 71
    assert config["solver"]["n"] == 16 and config["solver"]["viscosity"] == 1.0
    assert (traj_dir / "index.json").exists()


def test_diagnose(traj_dir, tmp_path):
    code, csv = run_twice(tmp_path, ["diagnose", "--traj", str(traj_dir),
                                     "--point", "1,2,3,0.4", "--radii", "0.4:0.5:3"], "s")
    assert code == 0
    lines = csv.read_text().splitlines()
    assert lines[0] == "x,y,z,t,r,C_r,N_r,E_r" and len(lines) == 4
    sidecar = json.loads((tmp_path / "a" / "s.config.json").read_text())
    assert sidecar["sampling"]["n_volume"] > 0 and sidecar["command"]["name"] == "diagnose"


def test_flag_and_boxcount(traj_dir, tmp_path):
    cfg = write_config(tmp_path / "c.json", thresholds=DESK)
    code, flags = run_twice(tmp_path, ["flag", "--config", cfg, "--traj", str(traj_dir),
                                       "--stride", "4", "--time-stride", "10"], "flags")
    assert code == 0
    summary = json.loads((tmp_path / "a" / "flags.summary.json").read_text())
    assert summary["counts"]["suspect"] == 0 and summary["counts"]["regular"] > 0
    out = tmp_path / "bc"
    code = main(["boxcount", "--flags", str(flags), "--radii", "0.05,0.1,0.5",
                 "--out", str(out), "--quiet"])
    assert code == 0
    assert json.loads((out / "summary.json").read_text())["empty"]
    assert (out / "boxcount.csv").read_text().splitlines()[0] == "r,N"


def test_flag_failure_exits_two(traj_dir, tmp_path):
    cfg = write_config(tmp_path / "c.json",
                       thresholds={"eps2": 1e-9, "R": 0.4, "derive_eps2": False})
    assert main(["flag", "--config", cfg, "--traj", str(traj_dir), "--stride", "8",
                 "--out", str(tmp_path / "o"), "--quiet"]) == 2


def test_decay(traj_dir, tmp_path):
    code, csv = run_twice(tmp_path, ["decay", "--traj", str(traj_dir), "--point",
                                     "1,2,0.5,0.7", "--lam", "0.5", "--k-max", "1",
                                     "--r-base", "0.8"], "d")
    assert code == 0
    assert csv.read_text().splitlines()[0] == "k,lambda_k,V1,V2,V3,C_val,drift"


def test_energy(traj_dir, tmp_path):
    code, csv = run_twice(tmp_path, ["energy", "--traj", str(traj_dir), "--bumps", "2",
                                     "--seed", "3", "--tau", "0.1"], "e")
    assert code == 0
    assert len(csv.read_text().splitlines()) == 3


def test_verify(tmp_path):
    code, csv = run_twice(tmp_path, ["verify", "--lemma", "interp", "--trials", "1",
                                     "--n", "16"], "v")
    assert code == 0 and len(csv.read_text().splitlines()) > 1


def test_simulate_rerun_byte_identical(tmp_path):
    cfg = write_config(tmp_path / "c.json", solver=dict(SOLVER, t_end=0.05))
    for tag in ("a", "b"):
        assert main(["simulate", "--config", cfg, "--out", str(tmp_path / tag), "--quiet"]) == 0
    for name in ("index.json", "snap_00001.json", "summary.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


@pytest.mark.parametrize("payload", [
    {"solverr": {}},
    {"solver": {"n": 16, "bogus": 1}},
    {"thresholds": {"eps2": 1e-3}},
    {"sampling": {"n_volume": 10}},
])
def test_bad_config_exits_one(tmp_path, payload, capsys):
    cfg = write_config(tmp_path / "c.json", **payload)
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "o")]) == 1
    assert "error" in capsys.readouterr().err.lower()


@pytest.mark.parametrize("argv", [
    ["diagnose", "--out", "x"],
    ["diagnose", "--traj", "/nonexistent", "--point", "1,2,3,4", "--radii", "1:1:1",
     "--out", "x"],
    ["boxcount", "--flags", "/nonexistent.csv", "--radii", "0.1,0.2,1", "--out", "x"],
    ["nosuchcommand"],
    [],
])
def test_usage_errors_exit_one(argv):
    assert main(argv) == 1


def test_domain_error_exits_two(traj_dir, tmp_path):
    # the cylinder reaches before t = 0
    assert main(["diagnose", "--traj", str(traj_dir), "--point", "1,2,3,0.1",
                 "--radii", "0.5:0.5:1", "--out", str(tmp_path / "o"), "--quiet"]) == 2
