import json
import math

import numpy as np
import pytest

from kinetic_brw import cli
from kinetic_brw.config import config_from_dict, load_config
from kinetic_brw.errors import ConfigError

FLAGSHIP_P = 1.0 + math.sqrt(2.0)


def _write_cfg(tmp_path, name="cfg.json", **overrides):
    cfg = {
        "weight_model": {"type": "power_uniform", "n": 2, "p": FLAGSHIP_P},
        "initial_law": {"type": "finite_mean", "m0": 1.0, "base": "degenerate"},
        "times": [1.0],
        "replicates": 2000,
        "pool": {"size": 2000, "iterations": 5},
        "xi_grid": {"min": -2.0, "max": 2.0, "points": 21},
        "seed": 1729,
        "out_dir": str(tmp_path / "out"),
    }
    cfg.update(overrides)
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def _read_csv(path):
    meta = {}
    rows = []
    header = None
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("#"):
                k, v = line[2:].split("=", 1)
                meta[k] = v
            elif header is None:
                header = line.split(",")
            else:
                rows.append(line.split(","))
    return meta, header, rows


def test_spectral_command(tmp_path, capsys):
    cfg = _write_cfg(tmp_path, weight_model={"type": "power_uniform", "n": 2, "p": 2.414213562})
    rc = cli.main(["spectral", "--config", cfg, "--label", "x"])
    assert rc == 0
    out = capsys.readouterr().out
    gamma = float(out.splitlines()[0].split("=")[1])
    assert abs(gamma - (1.0 + math.sqrt(2.0)) / 2.414213562) <= 1e-9
    meta, header, rows = _read_csv(tmp_path / "out" / "spectral_x.csv")
    assert header == ["s", "phi", "mu"]
    assert meta["seed"] == "1729"
    first = rows[0]
    assert float(first[0]) == 0.0
    assert float(first[1]) == 1.0  # phi(0) = N - 1 exactly


def test_spectral_no_minimizer_exit_2(tmp_path, capsys):
    cfg = _write_cfg(tmp_path, weight_model={"type": "deterministic", "weights": [1.0, 1.0]})
    rc = cli.main(["spectral", "--config", cfg])
    assert rc == 2
    assert "no interior minimizer" in capsys.readouterr().err


def test_unknown_config_key_exit_2(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"weight_model": {"type": "kac_angle"}, "bogus": 1}))
    assert cli.main(["spectral", "--config", str(path)]) == 2
    assert "unknown keys" in capsys.readouterr().err


def test_unknown_law_and_model_types():
    with pytest.raises(ConfigError):
        config_from_dict({"weight_model": {"type": "nope"}})
    with pytest.raises(ConfigError):
        config_from_dict({"weight_model": {"type": "kac_angle"},
                          "initial_law": {"type": "nope"}})
    with pytest.raises(ConfigError):
        config_from_dict({"weight_model": {"type": "power_uniform", "n": 2, "p": 1.0, "zz": 0}})


def test_invalid_json_exit_2(tmp_path, capsys):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    assert cli.main(["spectral", "--config", str(path)]) == 2
    assert "not valid JSON" in capsys.readouterr().err


def test_verify_unknown_suite_exit_2(tmp_path, capsys):
    cfg = _write_cfg(tmp_path)
    assert cli.main(["verify", "nosuch", "--config", cfg]) == 2
    assert "unknown suite" in capsys.readouterr().err


def test_verify_boundary_tail_mismatch_exit_2(tmp_path, capsys):
    cfg = _write_cfg(tmp_path, initial_law={"type": "finite_variance_normal", "sigma": 1.0})
    assert cli.main(["verify", "boundary", "--config", cfg]) == 2
    assert "tail index" in capsys.readouterr().err


def test_verify_yule_pass_and_csv(tmp_path, capsys):
    cfg = _write_cfg(tmp_path, replicates=8000)
    rc = cli.main(["verify", "yule", "--config", cfg, "--label", "y"])
    assert rc == 0
    out = capsys.readouterr().out
    assert "PASS" in out and "FAIL" not in out
    meta, header, rows = _read_csv(tmp_path / "out" / "verify_yule_y.csv")
    assert header == ["name", "statistic", "threshold", "p_value", "passed", "n", "metadata"]
    assert all(r[4] == "true" for r in rows)


def test_simulate_csv_schema_and_determinism(tmp_path):
    cfg = _write_cfg(tmp_path, times=[0.0, 1.0])
    assert cli.main(["simulate", "--config", cfg, "--label", "w1", "--workers", "1"]) == 0
    assert cli.main(["simulate", "--config", cfg, "--label", "w2", "--workers", "2"]) == 0
    b1 = (tmp_path / "out" / "simulate_w1.csv").read_bytes()
    b2 = (tmp_path / "out" / "simulate_w2.csv").read_bytes()
    assert b1 == b2
    meta, header, rows = _read_csv(tmp_path / "out" / "simulate_w1.csv")
    assert header == ["t", "mean_M", "stderr_M", "mean_D", "stderr_D", "mean_secmom",
                      "median_sqrt_t_max", "n_ok", "n_aborted"]
    t0 = rows[0]
    assert float(t0[0]) == 0.0
    assert float(t0[1]) == 1.0   # additive martingale starts at 1
    assert float(t0[3]) == 0.0   # derivative starts at 0
    assert float(t0[6]) == 1.0   # max term with the value-1-at-zero convention
    assert t0[7] == "2000"


def test_ecf_command(tmp_path):
    cfg = _write_cfg(tmp_path, times=[1.0])
    assert cli.main(["ecf", "--config", cfg, "--label", "e"]) == 0
    meta, header, rows = _read_csv(tmp_path / "out" / "ecf_t1_e.csv")
    assert header == ["xi", "re", "im", "stderr_re", "stderr_im", "n"]
    mid = rows[len(rows) // 2]
    assert float(mid[0]) == 0.0
    assert float(mid[1]) == 1.0
    assert float(mid[3]) == 0.0


def test_ecf_rescaled_roundtrip(tmp_path):
    cfg = _write_cfg(tmp_path, times=[2.0])
    assert cli.main(["ecf", "--config", cfg, "--label", "r", "--rescaled"]) == 0
    assert (tmp_path / "out" / "ecf_t2_r.csv").exists()


def test_fixed_point_command(tmp_path, capsys):
    cfg = _write_cfg(tmp_path)
    assert cli.main(["fixed-point", "--config", cfg, "--label", "f"]) == 0
    meta, header, rows = _read_csv(tmp_path / "out" / "fixed_point_f.csv")
    assert header == ["value"]
    assert len(rows) == 2000
    assert all(float(r[0]) >= 0.0 for r in rows)
    assert "config_hash" in meta


def test_ode_check_command(tmp_path, capsys):
    cfg = _write_cfg(
        tmp_path,
        weight_model={"type": "deterministic", "weights": [0.3, 0.3]},
        initial_law={"type": "finite_variance_normal", "sigma": 1.0},
        times=[0.5],
        replicates=8000,
        xi_grid={"min": -2.0, "max": 2.0, "points": 101},
    )
    assert cli.main(["ode-check", "--config", cfg, "--label", "o"]) == 0
    assert "PASS" in capsys.readouterr().out


def test_seed_override_changes_hash(tmp_path):
    cfg = _write_cfg(tmp_path)
    assert cli.main(["simulate", "--config", cfg, "--label", "s1"]) == 0
    assert cli.main(["simulate", "--config", cfg, "--label", "s2", "--seed", "7"]) == 0
    m1, _, r1 = _read_csv(tmp_path / "out" / "simulate_s1.csv")
    m2, _, r2 = _read_csv(tmp_path / "out" / "simulate_s2.csv")
    assert m1["config_hash"] != m2["config_hash"]
    assert m2["seed"] == "7"
    assert r1 != r2


def test_config_defaults_and_roundtrip(tmp_path):
    cfg = load_config(_write_cfg(tmp_path))
    assert cfg.seed == 1729
    assert cfg.workers == 1
    assert cfg.particle_cap == 10**7
    grid = cfg.xi_grid()
    assert grid[0] == -2.0 and grid[-1] == 2.0 and grid.size == 21
    assert np.all(np.diff(grid) > 0)


def test_simulate_all_aborted_exit_1(tmp_path, capsys):
    cfg = _write_cfg(tmp_path, times=[12.0], replicates=50, particle_cap=100)
    assert cli.main(["simulate", "--config", cfg, "--label", "a"]) == 1
    assert "aborted" in capsys.readouterr().err
