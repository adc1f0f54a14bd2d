import math

import pytest

from src.cli.suites import (
    CHECKS,
    CheckResult,
    SuiteContext,
    report,
    run_checks,
    select_checks,
    summary_table,
)
from src.errors import MuDPError


@pytest.fixture
def clean():
    return SuiteContext(n=32, dt=0.05)


@pytest.fixture
def faulty():
    return SuiteContext(n=32, dt=0.05, inject_fault=True)


def test_check_names_are_unique():
    names = [c.name for c in CHECKS]
    assert len(names) == len(set(names))
    assert {"grid", "operators", "rhs", "conservation", "expmap"} <= {
        c.group for c in CHECKS
    }


def test_select_by_group_and_name():
    assert {c.name for c in select_checks(["conservation"])} == {
        "momentum_drift",
        "mean_drift",
    }
    picked = select_checks(["b_diagonal", "grid"])
    assert "b_diagonal" in {c.name for c in picked}
    assert all(c.group in ("grid", "rhs") for c in picked)
    assert len(select_checks(None)) == len(CHECKS)


def test_unknown_selection():
    with pytest.raises(MuDPError, match="no_such_check"):
        select_checks(["no_such_check"])


@pytest.mark.parametrize("group", ["grid", "operators", "rhs"])
def test_cheap_groups_pass(clean, group):
    results = run_checks(clean, [group])
    assert results
    assert all(r.passed for r in results), summary_table(results)


@pytest.mark.parametrize(
    "name", ["inverse_realizations", "two_sided_inverse", "rhs_cross_mode"]
)
def test_injected_fault_is_caught(faulty, name):
    """A small perturbation of A^-1 must fail the identities that involve it."""
    (result,) = run_checks(faulty, [name])
    assert not result.passed
    assert result.measured > 10 * result.tolerance


def test_fault_leaves_grid_checks_alone(faulty):
    assert all(r.passed for r in run_checks(faulty, ["grid"]))


def test_report_layout(clean):
    results = run_checks(clean, ["rhs"])
    payload = report(results, clean)
    assert payload["n"] == 32
    assert payload["inject_fault"] is False
    assert payload["passed"] is True
    assert set(payload["checks"][0]) == {
        "name",
        "group",
        "paper_anchor",
        "measured",
        "tolerance",
        "pass",
    }


def test_nan_measurement_fails():
    result = CheckResult("x", "grid", "x = x", math.nan, 1.0)
    assert not result.passed
    table = summary_table([result, CheckResult("y", "grid", "y = y", 0.5, 1.0)])
    assert "FAIL" in table
    assert "PASS" in table


def test_two_sided_inverse_at_reference_resolution():
    """Both composition orders of A and A^-1 stay within 1e-11."""
    (result,) = run_checks(SuiteContext(n=256, dt=1e-3), ["two_sided_inverse"])
    assert result.passed, result.measured


def test_every_check_names_its_anchor():
    momentum = next(c for c in CHECKS if c.name == "momentum_drift")
    assert "m0" in momentum.anchor
    assert all(c.anchor for c in CHECKS)
