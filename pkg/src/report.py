"""Run reports: exact JSON documents, text rendering, and bench CSV rows."""

import json
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .arena import GameArena, fingerprint
from .equilibria import (
    EquilibriumResult,
    FrequencySolution,
    Mode,
    Region,
    result_from_solution,
)
from .errors import ReportMismatchError

logger = logging.getLogger(__name__)

BENCH_COLUMNS = [
    "family",
    "n",
    "d",
    "seed",
    "vertices",
    "players",
    "nash",
    "leader",
    "incentive",
    "ordering_ok",
    "incentive_useful",
    "frontier_predicted",
    "values_s",
    "enumeration_s",
    "lp_s",
    "total_s",
]


def decimal(value: Fraction) -> str:
    """Six significant digits, for display next to the exact fraction."""
    return f"{float(value):.6g}"


@dataclass
class RunReport:
    """Results of one CLI run on one arena."""

    fingerprint: str
    results: dict[str, EquilibriumResult] = field(default_factory=dict)
    timings: dict[str, float] = field(default_factory=dict)


def result_to_dict(arena: GameArena, result: EquilibriumResult) -> dict:
    name = arena.vertices
    return {
        "mode": result.mode.kind,
        "epsilon": None if result.mode.epsilon is None else str(result.mode.epsilon),
        "leader": arena.leader,
        "leader_payoff": str(result.leader_payoff),
        "raw_payoffs": {str(p): str(v) for p, v in result.raw_payoffs.items()},
        "follower_payoffs": {str(p): str(v) for p, v in result.follower_payoffs.items()},
        "incentives": {str(p): str(v) for p, v in result.solution.incentives.items()},
        "Q": [name[v] for v in sorted(result.region.q)],
        "S": [name[v] for v in sorted(result.region.s)],
        "thresholds": {str(p): str(t) for p, t in result.region.thresholds.items()},
        "edge_ratios": [
            {"source": name[arena.edges[e][0]], "target": name[arena.edges[e][1]], "ratio": str(r)}
            for e, r in sorted(result.solution.edge_ratio.items())
        ],
        "vertex_ratios": {name[v]: str(r) for v, r in sorted(result.solution.vertex_ratio.items())},
    }


def result_from_dict(arena: GameArena, data: dict) -> EquilibriumResult:
    """Rebuild a result from its JSON form; payoffs are recomputed from the frequencies."""
    epsilon = data.get("epsilon")
    mode = Mode(data["mode"], None if epsilon is None else Fraction(epsilon))
    q = frozenset(arena.vertex_index(v) for v in data["Q"])
    s = frozenset(arena.vertex_index(v) for v in data["S"])
    thresholds = {int(p): Fraction(t) for p, t in data.get("thresholds", {}).items()}
    edge_ratio = {}
    for item in data["edge_ratios"]:
        pair = (arena.vertex_index(item["source"]), arena.vertex_index(item["target"]))
        edge_ratio[arena.edge_lookup[pair]] = Fraction(item["ratio"])
    vertex_ratio = {arena.vertex_index(v): Fraction(r) for v, r in data["vertex_ratios"].items()}
    incentives = {int(p): Fraction(v) for p, v in data["incentives"].items()}
    solution = FrequencySolution(edge_ratio, vertex_ratio, incentives)
    return result_from_solution(arena, Region(q, s, thresholds), mode, solution)


def report_to_dict(arena: GameArena, report: RunReport) -> dict:
    return {
        "fingerprint": report.fingerprint,
        "results": {kind: result_to_dict(arena, r) for kind, r in report.results.items()},
        "timings": {phase: round(seconds, 6) for phase, seconds in report.timings.items()},
    }


def write_report(path: str | Path, arena: GameArena, report: RunReport) -> None:
    Path(path).write_text(json.dumps(report_to_dict(arena, report), indent=2) + "\n")
    logger.info("Wrote report to %s", path)


def load_report(path: str | Path, arena: GameArena) -> RunReport:
    """Read a JSON report and bind it to ``arena``.

    Raises:
        ReportMismatchError: if the report was computed for another arena.
    """
    data = json.loads(Path(path).read_text())
    expected = fingerprint(arena)
    if data.get("fingerprint") != expected:
        raise ReportMismatchError(
            f"Report fingerprint {data.get('fingerprint', '?')[:12]} does not match arena {expected[:12]}"
        )
    results = {kind: result_from_dict(arena, item) for kind, item in data["results"].items()}
    return RunReport(expected, results, data.get("timings", {}))


def render_result(arena: GameArena, result: EquilibriumResult) -> list[str]:
    """Human-readable lines for one result, exact fractions beside decimals."""
    name = arena.vertices
    lines = [
        f"Mode: {result.mode}",
        f"Leader (player {arena.leader}) payoff: {result.leader_payoff} (~{decimal(result.leader_payoff)})",
        "",
        "Players:",
    ]
    for p in range(arena.n_players):
        raw = result.raw_payoffs[p]
        if p == arena.leader:
            lines.append(f"  {p} leader   raw {raw} (~{decimal(raw)})")
            continue
        incentive = result.solution.incentives.get(p, Fraction(0))
        total = result.follower_payoffs[p]
        lines.append(
            f"  {p} follower raw {raw} (~{decimal(raw)})  incentive {incentive} (~{decimal(incentive)})"
            f"  total {total} (~{decimal(total)})"
        )
    lines.append("")
    lines.append(f"Q: {', '.join(name[v] for v in sorted(result.region.q))}")
    lines.append(f"S: {', '.join(name[v] for v in sorted(result.region.s))}")
    lines.append("Edge ratios:")
    for e, r in sorted(result.solution.edge_ratio.items()):
        src, tgt = arena.edges[e]
        lines.append(f"  {name[src]} -> {name[tgt]}: {r} (~{decimal(r)})")
    return lines


def render_comparison(results: dict[str, EquilibriumResult]) -> list[str]:
    lines = [f"{'mode':<10} {'leader payoff':>15} {'decimal':>10}"]
    for kind, result in results.items():
        v = result.leader_payoff
        lines.append(f"{kind:<10} {str(v):>15} {decimal(v):>10}")
    return lines
