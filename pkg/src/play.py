"""Turn optimal frequencies into concrete plays and audit their payoffs."""

import logging
import math
from collections import Counter, deque
from collections.abc import Iterator
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import islice, pairwise

import networkx as nx
import numpy as np

from .arena import GameArena, max_reward, punishment_game
from .equilibria import EquilibriumResult, FrequencySolution, Region
from .errors import InvariantViolation
from .zerosum import PositionalStrategy, punish_strategy, vertex_values

logger = logging.getLogger(__name__)


def shortest_path(arena: GameArena, start: int, goals: set[int], within: frozenset[int]) -> list[int]:
    """BFS path from ``start`` to the nearest goal inside ``within``; lower indices win ties.

    Raises:
        InvariantViolation: if no goal is reachable.
    """
    if start in goals:
        return [start]
    parent = {start: None}
    queue = deque([start])
    while queue:
        v = queue.popleft()
        for u in sorted(arena.graph.successors(v)):
            if u in parent or u not in within:
                continue
            parent[u] = v
            if u in goals:
                path = [u]
                while parent[path[-1]] is not None:
                    path.append(parent[path[-1]])
                return path[::-1]
            queue.append(u)
    raise InvariantViolation(
        f"no path from {arena.vertices[start]} to {sorted(arena.vertices[g] for g in goals)}"
    )


class _Counters:
    """Per-vertex edge counters: take the first edge used less than its share of visits."""

    def __init__(self, arena: GameArena, solution: FrequencySolution):
        self.arena = arena
        self.order: dict[int, list[int]] = {}
        self.share: dict[int, Fraction] = {}
        for v, pv in solution.vertex_ratio.items():
            edges = [e for e in arena.out_edges[v] if solution.edge_ratio.get(e, 0) > 0]
            self.order[v] = edges
            for e in edges:
                self.share[e] = solution.edge_ratio[e] / pv
        self.visits: Counter[int] = Counter()
        self.used: Counter[int] = Counter()

    def step(self, v: int) -> int:
        self.visits[v] += 1
        edges = self.order[v]
        chosen = next((e for e in edges if self.used[e] < self.share[e] * self.visits[v]), edges[0])
        self.used[chosen] += 1
        return self.arena.edges[chosen][1]


def islands(arena: GameArena, solution: FrequencySolution) -> list[frozenset[int]]:
    """Strongly connected parts of the support, ordered by smallest vertex."""
    support = nx.DiGraph()
    support.add_nodes_from(solution.vertex_ratio)
    support.add_edges_from(arena.edges[e] for e, r in solution.edge_ratio.items() if r > 0)
    parts = [frozenset(c) for c in nx.strongly_connected_components(support)]
    return sorted(parts, key=min)


def island_constants(solution: FrequencySolution, parts: list[frozenset[int]]) -> list[int]:
    """Smallest integer vector proportional to the islands' probability masses."""
    masses = [sum((solution.vertex_ratio[v] for v in part), Fraction(0)) for part in parts]
    scale = math.lcm(*(m.denominator for m in masses))
    ints = [int(m * scale) for m in masses]
    common = math.gcd(*ints)
    return [i // common for i in ints]


class PlaySchedule:
    """Deterministic well-behaved play for a frequency solution.

    The play walks from v0 into the first island, then cycles through the
    islands in round ``i`` for ``i * c_j`` steps each, transferring along
    shortest paths and resuming each island where it was left.
    """

    def __init__(self, arena: GameArena, solution: FrequencySolution, region: Region):
        self.arena = arena
        self.region = region
        self.islands = islands(arena, solution)
        if not self.islands:
            raise ValueError("solution has empty support")
        self.constants = island_constants(solution, self.islands)
        self.counters = _Counters(arena, solution)
        self.prefix = shortest_path(arena, arena.initial, set(self.islands[0]), region.q)
        self.round = 0

    def walk(self, rounds: int | None = None) -> Iterator[int]:
        """Yield vertices of the play; stops after ``rounds`` complete rounds if given."""
        yield from self.prefix
        current = self.prefix[-1]
        resume: dict[int, int] = {}
        i = 1
        while rounds is None or i <= rounds:
            self.round = i
            for j, island in enumerate(self.islands):
                goal = {resume[j]} if j in resume else set(island)
                path = shortest_path(self.arena, current, goal, self.region.q)
                yield from path[1:]
                current = path[-1]
                for _ in range(i * self.constants[j]):
                    current = self.counters.step(current)
                    yield current
                resume[j] = current
            i += 1

    def take(self, steps: int) -> list[int]:
        return list(islice(self.walk(), steps))


def schedule_single_scc(
    arena: GameArena, solution: FrequencySolution, region: Region, steps: int
) -> list[int]:
    """First ``steps`` vertices of the counter-driven play of a one-island solution."""
    if steps < 1:
        raise ValueError("steps must be at least 1")
    schedule = PlaySchedule(arena, solution, region)
    if len(schedule.islands) != 1:
        raise ValueError(f"support splits into {len(schedule.islands)} islands")
    return schedule.take(steps)


def schedule_multi_scc(
    arena: GameArena, solution: FrequencySolution, region: Region, rounds: int
) -> list[int]:
    """The play through ``rounds`` complete rounds of island segments."""
    return list(PlaySchedule(arena, solution, region).walk(rounds))


def iter_play(arena: GameArena, result: EquilibriumResult) -> Iterator[int]:
    return PlaySchedule(arena, result.solution, result.region).walk()


@dataclass
class EmpiricalPayoffs:
    """Averages along a finite play, as floats."""

    raw: np.ndarray
    total: np.ndarray
    running: np.ndarray  # players x steps, totals after each edge


def empirical_payoffs(
    arena: GameArena, sequence: list[int], incentives: dict[int, Fraction]
) -> EmpiricalPayoffs:
    """Average edge rewards along ``sequence``; followers add their incentive, the leader pays all."""
    if len(sequence) < 2:
        raise ValueError("need at least two vertices to average over an edge")
    try:
        ids = [arena.edge_lookup[pair] for pair in pairwise(sequence)]
    except KeyError as exc:
        raise ValueError(f"sequence leaves the arena at {exc.args[0]}") from None

    rewards = np.array([[float(r) for r in row] for row in arena.rewards])
    steps = np.arange(1, len(ids) + 1)[:, None]
    running_raw = np.cumsum(rewards[ids], axis=0) / steps

    offset = np.zeros(arena.n_players)
    for p, amount in incentives.items():
        offset[p] += float(amount)
        offset[arena.leader] -= float(amount)
    running = (running_raw + offset).T
    return EmpiricalPayoffs(raw=running_raw[-1], total=running[:, -1], running=running)


@dataclass
class ConvergenceReport:
    """Empirical totals against LP payoffs at one horizon."""

    horizon: int
    tolerance: float
    expected: dict[int, Fraction]
    empirical: dict[int, float]
    islands: int
    passed: bool = field(init=False)

    def __post_init__(self):
        self.passed = all(
            abs(self.empirical[p] - float(v)) <= self.tolerance for p, v in self.expected.items()
        )


def expected_payoffs(arena: GameArena, result: EquilibriumResult) -> dict[int, Fraction]:
    expected = dict(result.follower_payoffs)
    expected[arena.leader] = result.leader_payoff
    return expected


def check_convergence(arena: GameArena, result: EquilibriumResult, horizon: int) -> ConvergenceReport:
    """Replay ``horizon`` vertices and compare against the LP payoffs.

    One-island plays must land within max|reward| * 2n / horizon. Multi-island
    plays converge like 1/sqrt(horizon), so their bound is scaled by the island
    count over sqrt(horizon) instead.
    """
    if horizon < 2:
        raise ValueError("horizon must be at least 2")
    schedule = PlaySchedule(arena, result.solution, result.region)
    sequence = schedule.take(horizon)
    payoffs = empirical_payoffs(arena, sequence, result.solution.incentives)

    scale = float(max(abs(r) for row in arena.rewards for r in row)) * 2 * arena.n_vertices
    k = len(schedule.islands)
    tolerance = scale / horizon if k == 1 else scale * k / math.sqrt(horizon)
    empirical = {p: float(payoffs.total[p]) for p in range(arena.n_players)}
    report = ConvergenceReport(horizon, tolerance, expected_payoffs(arena, result), empirical, k)
    logger.info("Convergence at %d steps: %s (tolerance %.3g)", horizon, report.passed, tolerance)
    return report


@dataclass
class PspDescription:
    """Perfectly incentivised profile: on-path incentives plus punishment table."""

    incentives: dict[int, Fraction]
    punishments: dict[int, PositionalStrategy]
    top_up: Fraction
    arena: GameArena = field(repr=False)

    def punisher_move(self, deviator: int, vertex: int) -> int:
        """Edge the coalition takes at ``vertex`` while punishing ``deviator``."""
        return self.punishments[deviator].choice[vertex]

    def incentive_after_deviation(self, deviator: int, edge: int) -> Fraction:
        """Top-up paid to the compliant follower who moves along ``edge`` while punishing."""
        punisher = self.arena.owner[self.arena.edges[edge][0]]
        if punisher == deviator or punisher not in self.incentives:
            return Fraction(0)
        return self.top_up - self.arena.reward(punisher, edge)


def punishment_strategies(arena: GameArena) -> dict[int, PositionalStrategy]:
    strategies = {}
    for p in arena.followers:
        game = punishment_game(arena, p)
        strategies[p] = punish_strategy(game, vertex_values(game))
    return strategies


def psp_description(
    arena: GameArena, result: EquilibriumResult, strategies: dict[int, PositionalStrategy]
) -> PspDescription:
    missing = set(arena.followers) - set(strategies)
    if missing:
        raise ValueError(f"missing punishment strategies for players {sorted(missing)}")
    return PspDescription(
        incentives=dict(result.solution.incentives),
        punishments={p: strategies[p] for p in arena.followers},
        top_up=max_reward(arena).value + 1,
        arena=arena,
    )
