from unittest.mock import patch

import numpy as np
import orjson
import pandas as pd
import pytest
from typer.testing import CliRunner

from src.cli.main import (
    EXIT_BLOWUP,
    EXIT_CHECK_FAILED,
    EXIT_CONFIG,
    EXIT_OK,
    app,
)
from src.errors import OutOfDomainError

runner = CliRunner()

SMALL = ["--n", "16", "--dt", "0.1", "--t-end", "0.5"]


@pytest.fixture(autouse=True)
def isolated_settings(monkeypatch, tmp_path):
    """Keeps a developer's MUDP_* variables and .env out of the runs."""
    for name in ("MUDP_OUT_DIR", "MUDP_N", "MUDP_DT", "MUDP_N_JOBS", "MUDP_LOG_LEVEL"):
        monkeypatch.delenv(name, raising=False)
    monkeypatch.chdir(tmp_path)


def invoke(*args):
    return runner.invoke(app, list(args))


def test_solve_constant(tmp_path):
    result = invoke("solve", "--init", "0.3", *SMALL, "--out", str(tmp_path))
    assert result.exit_code == EXIT_OK, result.output

    frame = pd.read_csv(tmp_path / "solve_trajectory.csv")
    assert sorted(frame["t"].unique()) == pytest.approx([0.0, 0.1, 0.2, 0.3, 0.4, 0.5])
    assert np.allclose(frame["u"], 0.3, atol=1e-12)

    manifest = orjson.loads((tmp_path / "solve_manifest.json").read_bytes())
    assert manifest["termination"] == "completed"
    assert manifest["config"]["n"] == 16
    assert "solve_monitors.csv" in manifest["files"]


def test_geodesic_wide_layout(tmp_path):
    args = ["--init", "0.2 + 0.05*cos(2*pi*x)", *SMALL, "--format", "wide"]
    result = invoke("geodesic", *args, "--out", str(tmp_path))
    assert result.exit_code == EXIT_OK, result.output

    frame = pd.read_csv(tmp_path / "geodesic_trajectory.csv")
    assert list(frame.columns[:3]) == ["t", "field", "x_0"]
    monitors = pd.read_csv(tmp_path / "geodesic_monitors.csv")
    assert monitors["momentum_drift"].max() < 1e-3


@pytest.mark.parametrize(
    "args, fragment",
    [
        (["--init", "0.3", "--dt", "0"], "dt"),
        (["--init", "0.3", "--n", "15"], "n"),
        (["--init", "x"], "initial data"),
        (["--init", "cos(2*pi*x"], "position"),
        ([], "--init"),
        (["--init", "0.3", "--rhs", "burgers"], "burgers"),
    ],
)
def test_bad_configuration_exits_2(tmp_path, args, fragment):
    result = invoke("solve", *args, "--out", str(tmp_path))
    assert result.exit_code == EXIT_CONFIG
    assert fragment in result.output


def test_unknown_layout(tmp_path):
    args = ["--init", "0.3", "--format", "tall"]
    result = invoke("solve", *args, "--out", str(tmp_path))
    assert result.exit_code == EXIT_CONFIG


def test_blowup_exits_3_and_keeps_files(tmp_path):
    args = ["--init", "5*sin(2*pi*x)", "--n", "64", "--dt", "1e-3", "--t-end", "0.1"]
    result = invoke("solve", *args, "--u-x-cap", "200", "--out", str(tmp_path))
    assert result.exit_code == EXIT_BLOWUP

    manifest = orjson.loads((tmp_path / "solve_manifest.json").read_bytes())
    assert manifest["termination"] == "blowup_detected"
    assert manifest["extra"]["final_time"] < 0.1
    assert (tmp_path / "solve_trajectory.csv").exists()


def test_outputs_are_deterministic(tmp_path):
    for run in ("a", "b"):
        args = ["--init", "0.2 + 0.05*cos(2*pi*x)", *SMALL]
        result = invoke("solve", *args, "--out", str(tmp_path / run))
        assert result.exit_code == EXIT_OK
    for name in ("solve_trajectory.csv", "solve_monitors.csv"):
        first, second = tmp_path / "a" / name, tmp_path / "b" / name
        assert first.read_bytes() == second.read_bytes()


def test_fourier_input(tmp_path):
    path = tmp_path / "u0.json"
    path.write_bytes(orjson.dumps([[0, 0.2, 0.0], [1, 0.05, 0.0]]))
    result = invoke("solve", "--fourier", str(path), *SMALL, "--out", str(tmp_path))
    assert result.exit_code == EXIT_OK, result.output


def test_validate_passes_and_fails_with_fault(tmp_path):
    result = invoke("validate", "--only", "rhs", "--out", str(tmp_path))
    assert result.exit_code == EXIT_OK, result.output
    assert "All 3 checks passed." in result.output

    report = orjson.loads((tmp_path / "validation_report.json").read_bytes())
    assert report["passed"] is True
    assert {c["name"] for c in report["checks"]} == {
        "rhs_cross_mode",
        "b_diagonal",
        "rhs_mean_zero",
    }

    args = ["--only", "rhs", "--inject-fault"]
    result = invoke("validate", *args, "--out", str(tmp_path))
    assert result.exit_code == EXIT_CHECK_FAILED
    assert "FAIL" in result.output


def test_validate_rejects_unknown_check(tmp_path):
    result = invoke("validate", "--only", "nonsense", "--out", str(tmp_path))
    assert result.exit_code == EXIT_CONFIG


def test_expmap_with_jacobian(tmp_path):
    args = ["--init", "0.1*cos(2*pi*x)", "--n", "16", "--dt", "0.25", "--modes", "1"]
    result = invoke("expmap", *args, "--out", str(tmp_path))
    assert result.exit_code == EXIT_OK, result.output
    assert "smallest singular value" in result.output

    diffeo = pd.read_csv(tmp_path / "expmap_diffeo.csv")
    assert list(diffeo.columns) == ["x", "displacement", "phi"]
    jacobian = pd.read_csv(tmp_path / "expmap_jacobian.csv")
    assert jacobian.shape == (3, 4)
    manifest = orjson.loads((tmp_path / "expmap_manifest.json").read_bytes())
    assert len(manifest["extra"]["singular_values"]) == 3


def test_expmap_blowup_still_writes_manifest(tmp_path):
    """A geodesic that stops before t=1 leaves a manifest saying so."""
    stopped = OutOfDomainError("Geodesic stopped at t=0.400000 < 1.0")
    args = ["--init", "0.1*cos(2*pi*x)", "--n", "16", "--dt", "0.25"]
    with patch("src.cli.main.exp_map", side_effect=stopped):
        result = invoke("expmap", *args, "--out", str(tmp_path))
    assert result.exit_code == EXIT_BLOWUP

    manifest = orjson.loads((tmp_path / "expmap_manifest.json").read_bytes())
    assert manifest["termination"] == "blowup_detected"
    assert "t=0.4" in manifest["message"]
    assert manifest["files"] == ["expmap_manifest.json"]
    assert not (tmp_path / "expmap_diffeo.csv").exists()


def test_non_numeric_fourier_coefficient_is_a_config_error(tmp_path):
    path = tmp_path / "u0.json"
    path.write_bytes(b'[[1, "abc", 0]]')
    result = invoke("solve", "--fourier", str(path), *SMALL, "--out", str(tmp_path))
    assert result.exit_code == EXIT_CONFIG


def test_converge(tmp_path):
    args = ["--values", "0.1,0.05,0.025", "--n", "16", "--t-end", "0.2"]
    result = invoke("converge", *args, "--out", str(tmp_path))
    assert result.exit_code == EXIT_OK, result.output
    assert "observed order" in result.output
    assert (tmp_path / "convergence.dat").exists()

    report = orjson.loads((tmp_path / "convergence_report.json").read_bytes())
    assert report["values"] == [0.1, 0.05, 0.025]


@pytest.mark.parametrize("values", ["0.1,0.05", "0.1,abc,0.05"])
def test_converge_rejects_bad_ladders(tmp_path, values):
    result = invoke("converge", "--values", values, "--out", str(tmp_path))
    assert result.exit_code == EXIT_CONFIG
