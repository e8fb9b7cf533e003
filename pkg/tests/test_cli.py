import subprocess
import sys

import numpy as np
import pytest

from fbmchaos import cli
from fbmchaos.cli import EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE, RunConfig, UsageError, main, parse_config, read_config
from fbmchaos.errors import NumericalError
from fbmchaos.prediction import coeff_table
from fbmchaos.spectral import SpectralModel


@pytest.fixture(autouse=True)
def in_tmp(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


def read_rows(path):
    lines = path.read_text().splitlines()
    return lines[0].split(","), [line.split(",") for line in lines[1:] if not line.startswith("#")]


# Configuration -------------------------------------------------------------------


def test_defaults():
    cfg = parse_config(["coeffs"])
    assert cfg == RunConfig("coeffs")
    assert (cfg.hurst, cfg.t, cfg.window, cfg.grid_l, cfg.grid_n, cfg.paths) == (0.7, 1.0, (-512, 512), 16.0, 2048, 1)
    assert cfg.grid.step == 32 / 2048


def test_config_file_with_flag_precedence(in_tmp):
    (in_tmp / "run.cfg").write_text("# settings\nhurst = 0.3\njmin=-4  # low\n--jmax = 4\ngrid-n = 64\n\n")
    cfg = parse_config(["coeffs", "--config", "run.cfg", "--hurst", "0.6"])
    assert cfg.hurst == 0.6
    assert cfg.window == (-4, 4)
    assert cfg.grid_n == 64


def test_config_file_errors(in_tmp):
    (in_tmp / "bad.cfg").write_text("colour = blue\n")
    with pytest.raises(UsageError):
        read_config("bad.cfg")
    (in_tmp / "typed.cfg").write_text("jmin = minus four\n")
    with pytest.raises(UsageError):
        read_config("typed.cfg")
    with pytest.raises(UsageError):
        read_config("missing.cfg")


@pytest.mark.parametrize("argv", [
    ["coeffs", "--hurst", "1.0"],
    ["coeffs", "--hurst", "0"],
    ["coeffs", "--jmin", "3", "--jmax", "2"],
    ["coeffs", "--jmin", "-5000"],
    ["simulate", "--grid-n", "5"],
    ["simulate", "--grid-n", "8192"],
    ["simulate", "--paths", "0"],
    ["coeffs", "--format", "pdf"],
    ["coeffs", "--tol-abs", "-1"],
    ["frobnicate"],
    [],
    ["coeffs", "--t"],
])
def test_usage_errors_exit_2(argv, capsys):
    assert main(argv) == EXIT_USAGE
    assert "usage error" in capsys.readouterr().err


def test_domain_errors_exit_2(capsys):
    # Monte Carlo Gram matrices need at least 1000 paths
    assert main(["gram", "--jmin", "0", "--jmax", "1", "--paths", "10"]) == EXIT_USAGE
    assert main(["verify", "--only", "one"]) == EXIT_USAGE


def test_numerical_failure_exit_3(monkeypatch, capsys):
    def boom(cfg):
        raise NumericalError("integration did not converge", panels=1)

    monkeypatch.setitem(cli.COMMANDS, "coeffs", boom)
    assert main(["coeffs"]) == EXIT_NUMERICAL
    assert "numerical failure" in capsys.readouterr().err


# Outputs -------------------------------------------------------------------------


def test_coeffs_csv_footer_and_line_endings(in_tmp):
    assert main(["coeffs", "--jmin", "-20", "--jmax", "20", "--out", "c.csv"]) == EXIT_OK
    raw = (in_tmp / "c.csv").read_bytes()
    assert b"\r" not in raw and raw.endswith(b"\n")
    header, rows = read_rows(in_tmp / "c.csv")
    assert header == ["j", "r", "abs_err", "class"]
    assert len(rows) == 41
    footer = raw.decode().splitlines()[-1]
    assert footer.startswith("# variance_check sum_r2=")
    fields = dict(item.split("=") for item in footer.split()[2:])
    tbl = coeff_table(SpectralModel(0.7), 1.0, -20, 20)
    assert float(fields["sum_r2"]) == tbl.energy
    assert float(fields["expected"]) == 1.0
    assert fields["within_2pct"] == ("true" if abs(tbl.energy - 1) < 0.02 else "false")
    assert not (in_tmp / "c.svg").exists()


def test_coeffs_at_time_zero_is_zero_column(in_tmp):
    assert main(["coeffs", "--t", "0", "--jmin", "-5", "--jmax", "5", "--out", "z", "--format", "both"]) == EXIT_OK
    _, rows = read_rows(in_tmp / "z.csv")
    assert all(float(r[1]) == 0.0 for r in rows)
    assert (in_tmp / "z.svg").read_text().lstrip().startswith("<svg")


def test_outputs_are_deterministic(in_tmp):
    for name in ("a", "b"):
        assert main(["simulate", "--grid-l", "2", "--grid-n", "16", "--paths", "3", "--seed", "7",
                     "--out", name, "--format", "both"]) == EXIT_OK
    assert (in_tmp / "a.csv").read_bytes() == (in_tmp / "b.csv").read_bytes()
    assert (in_tmp / "a.svg").read_bytes() == (in_tmp / "b.svg").read_bytes()
    header, rows = read_rows(in_tmp / "a.csv")
    assert header == ["path", "t", "x"] and len(rows) == 3 * 17
    x = np.array([[float(v) for v in r] for r in rows])
    assert np.all(x[x[:, 1] == 0, 2] == 0)


def test_default_output_stem(in_tmp):
    assert main(["simulate", "--grid-l", "1", "--grid-n", "4"]) == EXIT_OK
    assert (in_tmp / "simulate.csv").exists()


def test_gram_command(in_tmp):
    assert main(["gram", "--jmin", "-1", "--jmax", "1", "--paths", "1000", "--grid-l", "8", "--grid-n", "512",
                 "--seed", "3", "--out", "g"]) == EXIT_OK
    header, rows = read_rows(in_tmp / "g.csv")
    assert header == ["i", "j", "empirical", "stderr", "discretized"] and len(rows) == 9


def test_finite_horizon_command(in_tmp):
    assert main(["finite-horizon", "--count", "3", "--T", "2", "--out", "fh", "--format", "both"]) == EXIT_OK
    header, rows = read_rows(in_tmp / "fh.csv")
    assert header == ["i", "j", "value"] and len(rows) == 9
    gram = np.array([float(r[2]) for r in rows]).reshape(3, 3)
    assert np.max(np.abs(gram - np.eye(3))) < 1e-2
    zh, zrows = read_rows(in_tmp / "fh_zeros.csv")
    assert zh == ["n", "zero", "node", "norm"] and len(zrows) == 3
    assert (in_tmp / "fh.svg").exists()


def test_error_curve_command(in_tmp):
    assert main(["error-curve", "--jmin", "-64", "--jmax", "64", "--out", "e"]) == EXIT_OK
    header, rows = read_rows(in_tmp / "e.csv")
    assert header == ["k", "residual_after_k_coeffs", "exact"]
    resid = np.array([float(r[1]) for r in rows])
    assert np.all(np.diff(resid) <= 1e-15)


def test_verify_quick_skips_monte_carlo(capsys):
    assert main(["verify", "--quick", "--only", "1,2,6"]) == EXIT_OK
    out, err = capsys.readouterr()
    lines = out.splitlines()
    assert lines[0] == "criterion,name,status,seconds,budget_seconds,detail"
    status = {int(line.split(",")[0]): line.split(",")[2] for line in lines[1:]}
    assert status == {1: "PASS", 2: "PASS", 6: "SKIP"}
    assert err.count("[PASS]") == 2 and "[SKIP]" in err


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "fbmchaos.cli", "coeffs", "--hurst", "2"],
                         capture_output=True, text=True)
    assert res.returncode == EXIT_USAGE
    assert "hurst" in res.stderr


def test_brownian_error_curve_is_flat(in_tmp):
    assert main(["error-curve", "--hurst", "0.5", "--jmin", "-64", "--jmax", "64", "--out", "bm"]) == EXIT_OK
    _, rows = read_rows(in_tmp / "bm.csv")
    resid = np.array([float(r[1]) for r in rows])
    assert np.all(np.abs(resid - 1.0) < 1e-3)
    assert all(float(r[2]) == 1.0 for r in rows)


def test_render_path_split_and_determinism(in_tmp):
    argv = ["render-path", "--jmin", "-16", "--jmax", "16", "--grid-l", "8", "--grid-n", "512", "--seed", "5"]
    assert main(argv + ["--out", "p1"]) == EXIT_OK
    assert main(argv + ["--out", "p2"]) == EXIT_OK
    assert (in_tmp / "p1.csv").read_bytes() == (in_tmp / "p2.csv").read_bytes()
    header, rows = read_rows(in_tmp / "p1.csv")
    assert header == ["t", "past_component", "future_component", "total"]
    v = np.array([[float(x) for x in r] for r in rows])
    assert np.all(v[:, 3] == v[:, 1] + v[:, 2])
    assert np.all(np.abs(v[:, 0]) <= 2.0)
    scale = np.max(np.abs(v[:, 3]))
    assert np.max(np.abs(v[v[:, 0] <= 0, 2])) < 0.02 * scale
