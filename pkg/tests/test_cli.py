import json
import math

import numpy as np
import pytest

from lrquench import cli


def conf(tmp_path, text, name="run.conf"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_parse_numbers_lists_and_defaults():
    cfg = cli.parse_config_text("M_alpha = -4*pi  # comment\nL_list = 8, 16\nkac = false\nalpha = 1.5\n")
    assert cfg["M_alpha"] == pytest.approx(-4 * math.pi)
    assert cfg["L_list"] == (8, 16) and cfg["kac"] is False
    assert cfg["n_times"] == cli.KEYS["n_times"].default


def test_every_bad_key_is_reported():
    with pytest.raises(cli.ConfigError) as exc:
        cli.parse_config_text("L = 7\nJ = 0\nbogus = 1\ntier = fast\nseed = __import__('os')\n")
    msg = str(exc.value)
    for key in ("L:", "J:", "bogus:", "tier:", "seed:"):
        assert key in msg


def test_config_error_exit_code(tmp_path, capsys):
    assert cli.main(["dos", "--config", conf(tmp_path, "L = 5\n"), "--out", str(tmp_path / "o")]) == 2
    assert "L: 5" in capsys.readouterr().err


def test_quench_zero_interaction_is_flat(tmp_path):
    out = tmp_path / "o"
    c = conf(tmp_path, "L = 8\nU = 0\nM_alpha = -2*pi\nn_times = 16\nsvg = false\n")
    assert cli.main(["quench", "--config", c, "--out", str(out)]) == 0
    vals = np.loadtxt(out / "quench_L8.csv", delimiter=",", skiprows=1, usecols=1)
    assert np.ptp(vals) == 0


def test_sidecar_replay_is_byte_identical(tmp_path):
    c = conf(tmp_path, "L = 8\nM_alpha = -2*pi\nn_realizations = 2\nn_times = 32\nseed = 9\n")
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["quench", "--config", c, "--out", str(a)]) == 0
    assert cli.main(["quench", "--config", str(a / "quench_L8.json"), "--out", str(b)]) == 0
    assert (a / "quench_L8.csv").read_bytes() == (b / "quench_L8.csv").read_bytes()
    assert b"\r\n" not in (a / "quench_L8.csv").read_bytes()


def test_workers_do_not_change_results(tmp_path):
    c = conf(tmp_path, "L = 8\nM_alpha = -2*pi\nn_realizations = 3\nn_times = 16\nsvg = false\n")
    a, b = tmp_path / "a", tmp_path / "b"
    cli.main(["quench", "--config", c, "--out", str(a), "--workers", "1"])
    cli.main(["quench", "--config", c, "--out", str(b), "--workers", "3"])
    assert (a / "quench_L8.csv").read_bytes() == (b / "quench_L8.csv").read_bytes()


def test_env_overrides_out(tmp_path, monkeypatch):
    monkeypatch.setenv("LRQUENCH_OUT", str(tmp_path / "env"))
    assert cli.main(["dmft-check", "--config", conf(tmp_path, "svg = false\n"), "--out", str(tmp_path / "x")]) == 0
    assert (tmp_path / "env" / "dmft_exponents.csv").exists()
    rows = (tmp_path / "env" / "dmft_exponents.csv").read_text().splitlines()[1:]
    assert [r.split(",")[2] for r in rows] == ["true"] * 3


def test_oracle_compare_table(tmp_path, capsys):
    c = conf(tmp_path, "L = 4\nalpha = 0.5\nM_alpha = 1\nkac = false\nn_times = 41\n")
    assert cli.main(["oracle-compare", "--config", c, "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "oracle_compare.csv").read_text().splitlines()
    assert lines[0] == "U,max_abs_error,max_abs_change,error_ratio" and len(lines) == 4
    assert "error_ratio" in capsys.readouterr().out


def test_oracle_rejects_large_ring(tmp_path):
    c = conf(tmp_path, "L = 10\nM_alpha = 1\nkac = false\n")
    assert cli.main(["oracle-compare", "--config", c, "--out", str(tmp_path)]) == 2


def test_dos_outputs_and_zero_disorder_warning(tmp_path):
    c = conf(tmp_path, "L = 64\nM_alpha = -4*pi\n")
    assert cli.main(["dos", "--config", c, "--out", str(tmp_path / "a")]) == 0
    for name in ("eigenvalues_L64_r0.csv", "report_L64_r0.txt", "outliers_L64_r0.csv", "dos_L64_r0.svg",
                 "dos_summary.csv", "meta.json"):
        assert (tmp_path / "a" / name).exists()
    assert json.loads((tmp_path / "a" / "meta.json").read_text())["failures"] == []
    c0 = conf(tmp_path, "L = 16\nsigma = 0\nM_alpha = -1\n", "zero.conf")
    with pytest.warns(RuntimeWarning, match="degenerate"):
        assert cli.main(["dos", "--config", c0, "--out", str(tmp_path / "b")]) == 0


def test_fidelity_command(tmp_path):
    c = conf(tmp_path, "L = 16\nM_alpha = -2*pi\nn_realizations = 2\nn_times = 32\n")
    assert cli.main(["fidelity", "--config", c, "--out", str(tmp_path)]) == 0
    F = np.loadtxt(tmp_path / "fidelity_L16_mean.csv", delimiter=",", skiprows=1, usecols=1)
    assert F[0] == 1.0 and np.all(F <= 1)


def test_shipped_configs_parse():
    from pathlib import Path
    for p in sorted((Path(__file__).parents[1] / "configs").glob("*.conf")):
        cli.load_config(p)
