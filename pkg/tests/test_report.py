"""Tests for JSON reports and text rendering."""

from fractions import Fraction

import pytest

from src.arena import fingerprint
from src.equilibria import INCENTIVE, LEADER, SECURE, EquilibriumSolver, Mode
from src.errors import ReportMismatchError
from src.report import (
    RunReport,
    decimal,
    load_report,
    render_comparison,
    render_result,
    report_to_dict,
    write_report,
)


def test_decimal():
    """Test six significant digits."""
    assert decimal(Fraction(2, 3)) == "0.666667"
    assert decimal(Fraction(8)) == "8"


def test_report_reload(fig1, tmp_path):
    """Test that a written report reloads to the same results."""
    solver = EquilibriumSolver(fig1)
    results = {
        INCENTIVE: solver.solve(Mode(INCENTIVE)),
        SECURE: solver.solve(Mode(SECURE, Fraction(1, 10))),
    }
    path = tmp_path / "report.json"
    write_report(path, fig1, RunReport(fingerprint(fig1), results, dict(solver.timings)))

    loaded = load_report(path, fig1)
    assert loaded.fingerprint == fingerprint(fig1)
    for kind, result in results.items():
        again = loaded.results[kind]
        assert again.mode == result.mode
        assert again.region == result.region
        assert again.solution == result.solution
        assert again.leader_payoff == result.leader_payoff
        assert again.follower_payoffs == result.follower_payoffs


def test_report_fields(fig1):
    """Test the JSON layout of one result."""
    result = EquilibriumSolver(fig1).solve(Mode(INCENTIVE))
    data = report_to_dict(fig1, RunReport("abc", {INCENTIVE: result}, {"lp": 0.1234567}))
    item = data["results"][INCENTIVE]
    assert data["timings"] == {"lp": 0.123457}
    assert item["epsilon"] is None
    assert item["raw_payoffs"] == {"0": "0", "1": "9", "2": "-9"}
    assert item["edge_ratios"] == [{"source": "3", "target": "3", "ratio": "1"}]
    assert item["vertex_ratios"] == {"3": "1"}
    assert item["thresholds"] == {"0": "1", "2": "-9"}


def test_load_report_rejects_other_arena(fig1, secure, tmp_path):
    """Test the fingerprint check."""
    result = EquilibriumSolver(fig1).solve(Mode(LEADER))
    path = tmp_path / "report.json"
    write_report(path, fig1, RunReport(fingerprint(fig1), {LEADER: result}))
    with pytest.raises(ReportMismatchError, match="does not match"):
        load_report(path, secure)


def test_render_result(fig1):
    """Test exact and decimal values side by side."""
    result = EquilibriumSolver(fig1).solve(Mode(INCENTIVE))
    lines = render_result(fig1, result)
    assert lines[0] == "Mode: incentive"
    assert "  1 leader   raw 9 (~9)" in lines
    assert "  3 -> 3: 1 (~1)" in lines


def test_render_comparison(fig1):
    """Test one row per mode."""
    solver = EquilibriumSolver(fig1)
    lines = render_comparison({k: solver.solve(Mode(k)) for k in (LEADER, INCENTIVE)})
    assert lines[1].split() == ["leader", "1", "1"]
    assert lines[2].split() == ["incentive", "8", "8"]
