import json

import numpy as np

from positonkit import cli
from positonkit import wvn_example as wvn

WVN_POT = {"kind": "wvn_example", "rho": 2.0, "right_cutoff": 0.0}


def run_cli(tmp_path, name, cfg, command):
    cfg_path = tmp_path / f"{name}.json"
    cfg_path.write_text(json.dumps(cfg))
    prefix = str(tmp_path / name)
    code = cli.main([command, "--config", str(cfg_path), "--output", prefix])
    return code, prefix


def test_scatter_matches_closed_form(tmp_path):
    cfg = {"potential": WVN_POT,
           "k_grid": {"k_min": 0.2, "k_max": 3.0, "n": 40,
                      "exclusions": [[1.0, 1e-3]]}}
    code, prefix = run_cli(tmp_path, "scatter", cfg, "scatter")
    assert code == 0
    data = np.loadtxt(prefix + ".csv", delimiter=",", skiprows=1)
    ks = data[:, 0]
    r = data[:, 1] + 1j * data[:, 2]
    rc = np.array([wvn.scattering_closed(2.0, k)[1] for k in ks])
    assert np.max(np.abs(r - rc)) < 1e-6
    meta = json.loads(open(prefix + ".meta.json").read())
    assert meta["diagnostics"]["max_unitarity_defect"] < 1e-6


def test_scatter_deterministic(tmp_path):
    cfg = {"potential": WVN_POT,
           "k_grid": {"k_min": 0.5, "k_max": 2.0, "n": 7, "exclusions": [[1.0, 1e-3]]}}
    _, p1 = run_cli(tmp_path, "det1", cfg, "scatter")
    _, p2 = run_cli(tmp_path, "det2", cfg, "scatter")
    assert open(p1 + ".csv", "rb").read() == open(p2 + ".csv", "rb").read()


def test_insert_empty_states_identity(tmp_path):
    cfg = {"potential": WVN_POT,
           "grid": {"x_min": -5.0, "x_max": 5.0, "n": 201},
           "states": []}
    code, prefix = run_cli(tmp_path, "ins0", cfg, "insert")
    assert code == 0
    data = np.loadtxt(prefix + ".csv", delimiter=",", skiprows=1)
    assert np.array_equal(data[:, 1], data[:, 2])   # q_new == q_seed


def test_insert_with_state(tmp_path):
    cfg = {"potential": WVN_POT,
           "grid": {"x_min": -20.0, "x_max": 20.0, "n": 2001},
           "states": [{"omega": 1.0, "alpha": 1.0}]}
    code, prefix = run_cli(tmp_path, "ins1", cfg, "insert")
    assert code == 0
    data = np.loadtxt(prefix + ".csv", delimiter=",", skiprows=1)
    qc = wvn.q_plus1(2.0, 1.0, data[:, 0])
    assert np.max(np.abs(data[:, 2] - qc)) < 1e-6
    meta = json.loads(open(prefix + ".meta.json").read())
    assert abs(meta["diagnostics"]["eigenfunction_norms"][0] - 1.0) < 1e-6


def test_remove_round_trip(tmp_path):
    cfg = {"potential": WVN_POT,
           "grid": {"x_min": -20.0, "x_max": 20.0, "n": 2001},
           "states": [{"omega": 1.0, "alpha": 0.8}]}
    code, prefix = run_cli(tmp_path, "rem", cfg, "remove")
    assert code == 0
    meta = json.loads(open(prefix + ".meta.json").read())
    assert meta["diagnostics"]["round_trip_max_error"] < 1e-6


def test_evolve_seed_only(tmp_path):
    cfg = {"potential": WVN_POT,
           "grid": {"x_min": -3.0, "x_max": 3.0, "n": 7},
           "states": [],
           "time": {"t_values": [0.0]}}
    code, prefix = run_cli(tmp_path, "evo", cfg, "evolve")
    assert code == 0
    data = np.loadtxt(prefix + ".csv", delimiter=",", skiprows=1)
    qc = wvn.q_seed(2.0, data[:, 0])
    assert np.max(np.abs(data[:, 2] - qc)) < 1e-3
    meta = json.loads(open(prefix + ".meta.json").read())
    assert "t=0.0" in meta["diagnostics"]


def test_bad_config_exit_code(tmp_path):
    code, _ = run_cli(tmp_path, "bad", {"potential": {"kind": "nope"}}, "scatter")
    assert code == cli.EXIT_BAD_CONFIG


def test_missing_config_file(tmp_path):
    code = cli.main(["scatter", "--config", str(tmp_path / "absent.json"),
                     "--output", str(tmp_path / "x")])
    assert code == cli.EXIT_BAD_CONFIG


def test_verify_example_passes(tmp_path, capsys):
    code = cli.main(["verify-example", "--rho", "2.0", "--alpha", "1.0",
                     "--output", str(tmp_path / "verify")])
    out = capsys.readouterr().out
    assert code == 0
    assert "FAIL" not in out
    meta = json.loads(open(str(tmp_path / "verify") + ".meta.json").read())
    assert all(c["passed"] for c in meta["diagnostics"]["checks"])


def test_worker_env(monkeypatch, tmp_path):
    monkeypatch.setenv("DARBOUX_THREADS", "2")
    cfg = {"potential": WVN_POT,
           "k_grid": {"k_min": 0.5, "k_max": 2.0, "n": 5, "exclusions": [[1.0, 1e-3]]}}
    code, prefix = run_cli(tmp_path, "thr", cfg, "scatter")
    assert code == 0
    meta = json.loads(open(prefix + ".meta.json").read())
    assert meta["diagnostics"]["workers"] == 2
