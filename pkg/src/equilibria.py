"""Leader-optimal equilibria: region enumeration, constraint systems, mode selection."""

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from contextlib import nullcontext
from dataclasses import dataclass, field, replace
from fractions import Fraction

import networkx as nx

from .arena import GameArena, leader_game, punishment_game
from .errors import InfeasibleError, InvariantViolation
from .lp import OPTIMAL, LinearProgram, LpOutcome, solve_lp
from .zerosum import VertexValues, vertex_values

logger = logging.getLogger(__name__)

INCENTIVE = "incentive"
LEADER = "leader"
NASH = "nash"
SECURE = "secure_incentive"
MODES = (INCENTIVE, LEADER, NASH, SECURE)

DEFAULT_JOBS = 1


@dataclass(frozen=True)
class Mode:
    """Equilibrium notion to optimise for."""

    kind: str
    epsilon: Fraction | None = None

    def __post_init__(self):
        if self.kind not in MODES:
            raise ValueError(f"Unknown mode '{self.kind}', expected one of {', '.join(MODES)}")
        if self.kind == SECURE and (self.epsilon is None or self.epsilon <= 0):
            raise ValueError("secure_incentive needs epsilon > 0")

    @property
    def has_incentives(self) -> bool:
        return self.kind in (INCENTIVE, SECURE)

    def __str__(self) -> str:
        return f"{self.kind}(epsilon={self.epsilon})" if self.kind == SECURE else self.kind


@dataclass(frozen=True)
class Region:
    """Visited set Q, recurrent SCC S, and the constraint-5 bound per player owning part of Q."""

    q: frozenset[int]
    s: frozenset[int]
    thresholds: dict[int, Fraction] = field(default_factory=dict, compare=False, hash=False)

    def key(self) -> tuple[tuple[int, ...], tuple[int, ...]]:
        """Deterministic tie-break order for regions with equal leader payoff."""
        return tuple(sorted(self.s)), tuple(sorted(self.q))


@dataclass
class FrequencySolution:
    """Limit ratios of edges and vertices plus constant incentives."""

    edge_ratio: dict[int, Fraction]
    vertex_ratio: dict[int, Fraction]
    incentives: dict[int, Fraction]


@dataclass
class EquilibriumResult:
    """Leader-optimal profile for one mode."""

    mode: Mode
    region: Region
    solution: FrequencySolution
    leader_payoff: Fraction
    follower_payoffs: dict[int, Fraction]
    raw_payoffs: dict[int, Fraction]


def follower_thresholds(
    arena: GameArena, values: dict[int, VertexValues]
) -> dict[int, list[Fraction]]:
    """Sorted distinct punishment values over the vertices each follower owns."""
    return {
        p: sorted({values[p][v] for v in arena.owned_by(p)})
        for p in arena.followers
        if p in values
    }


def _restrict(arena: GameArena, allowed: set[int] | frozenset[int]) -> frozenset[int]:
    """Drop dead ends repeatedly, then keep what is reachable from v0."""
    alive = set(allowed)
    out = arena.out_edges
    changed = True
    while changed:
        changed = False
        for v in list(alive):
            if not any(arena.edges[e][1] in alive for e in out[v]):
                alive.discard(v)
                changed = True
    if arena.initial not in alive:
        return frozenset()
    reach = nx.descendants(arena.graph.subgraph(alive), arena.initial)
    return frozenset(reach | {arena.initial})


def _admitted(
    arena: GameArena, values: dict[int, VertexValues], player: int, threshold: Fraction | None
) -> set[int]:
    """Vertices a threshold option lets through; ``None`` bars every vertex of the player."""
    return {
        v
        for v in range(arena.n_vertices)
        if arena.owner[v] != player or (threshold is not None and values[player][v] <= threshold)
    }


def _thresholds(
    arena: GameArena, q: frozenset[int], values: dict[int, VertexValues]
) -> dict[int, Fraction]:
    """Constraint-5 bound max r_p(v) over Q∩V_p for every player owning part of Q."""
    thresholds = {}
    for p, vals in values.items():
        owned = [vals[v] for v in q if arena.owner[v] == p]
        if owned:
            thresholds[p] = max(owned)
    return thresholds


def bind_region(
    arena: GameArena, q: frozenset[int], s: frozenset[int], values: dict[int, VertexValues]
) -> Region:
    return Region(q, s, _thresholds(arena, q, values))


def _regions_of(arena: GameArena, q: frozenset[int], values: dict[int, VertexValues]) -> list[Region]:
    thresholds = _thresholds(arena, q, values)
    sub = arena.graph.subgraph(q)
    regions = []
    for comp in nx.strongly_connected_components(sub):
        if len(comp) > 1 or any(sub.has_edge(v, v) for v in comp):
            regions.append(Region(q, frozenset(comp), thresholds))
    return sorted(regions, key=Region.key)


def candidate_regions(
    arena: GameArena,
    values: dict[int, VertexValues],
    combo: dict[int, Fraction | None],
) -> list[Region]:
    """Regions for one threshold combination.

    Q is the most liberal vertex set respecting the thresholds, closed under
    successors and reachable from v0; one Region per nontrivial SCC of Q.
    """
    allowed = set(range(arena.n_vertices))
    for player, threshold in combo.items():
        allowed &= _admitted(arena, values, player, threshold)
    q = _restrict(arena, allowed)
    if not q:
        return []
    return _regions_of(arena, q, values)


def enumerate_regions(
    arena: GameArena, values: dict[int, VertexValues], players: list[int]
) -> list[Region]:
    """All distinct regions over every threshold combination of ``players``.

    Players are fixed one at a time and subtrees are memoised on the pruned set,
    so combinations collapsing to the same Q are explored once.
    """
    options = {p: [None, *values[p].distinct()] for p in players}
    seen: set[tuple[int, frozenset[int]]] = set()
    liberal: set[frozenset[int]] = set()

    def descend(level: int, current: frozenset[int]) -> None:
        if (level, current) in seen:
            return
        seen.add((level, current))
        if level == len(players):
            liberal.add(current)
            return
        p = players[level]
        for t in options[p]:
            narrowed = _restrict(arena, current & _admitted(arena, values, p, t))
            if narrowed:
                descend(level + 1, narrowed)

    descend(0, _restrict(arena, set(range(arena.n_vertices))))

    regions: dict[tuple, Region] = {}
    for q in liberal:
        for region in _regions_of(arena, q, values):
            regions.setdefault(region.key(), region)
    logger.info("Enumerated %d liberal sets, %d regions", len(liberal), len(regions))
    return [regions[k] for k in sorted(regions)]


def _pv(v: int) -> str:
    return f"pv_{v}"


def _pe(e: int) -> str:
    return f"pe_{e}"


def _iota(p: int) -> str:
    return f"iota_{p}"


def solution_assignment(
    arena: GameArena, solution: FrequencySolution, mode: Mode
) -> dict[str, Fraction]:
    """Variable assignment of ``build_constraint_system`` encoded by a solution."""
    zero = Fraction(0)
    assignment = {_pv(v): solution.vertex_ratio.get(v, zero) for v in range(arena.n_vertices)}
    assignment.update({_pe(e): solution.edge_ratio.get(e, zero) for e in range(len(arena.edges))})
    if mode.has_incentives:
        assignment.update({_iota(p): solution.incentives.get(p, zero) for p in arena.followers})
    return assignment


def build_constraint_system(arena: GameArena, region: Region, mode: Mode) -> LinearProgram:
    """Constraints 1-5 for a region; maximises leader reward minus incentives."""
    prog = LinearProgram()
    s = region.s
    leader = arena.leader
    for v in range(arena.n_vertices):
        prog.add_variable(_pv(v))
    for e in range(len(arena.edges)):
        prog.add_variable(_pe(e))
    if mode.has_incentives:
        for p in arena.followers:
            prog.add_variable(_iota(p))

    for v in range(arena.n_vertices):
        if v not in s:
            prog.add_constraint({_pv(v): 1}, "=", 0, name=f"off_s_{v}")
    for e, (src, tgt) in enumerate(arena.edges):
        if src not in s or tgt not in s:
            prog.add_constraint({_pe(e): 1}, "=", 0, name=f"off_ss_{e}")

    prog.add_constraint({_pv(v): 1 for v in range(arena.n_vertices)}, "=", 1, name="total")

    for v in sorted(s):
        outflow = {_pv(v): Fraction(1)}
        for e in arena.out_edges[v]:
            outflow[_pe(e)] = Fraction(-1)
        prog.add_constraint(outflow, "=", 0, name=f"out_{v}")
        inflow = {_pv(v): Fraction(1)}
        for e in arena.in_edges[v]:
            inflow[_pe(e)] = inflow.get(_pe(e), Fraction(0)) - 1
        prog.add_constraint(inflow, "=", 0, name=f"in_{v}")

    constrained = list(arena.followers)
    if mode.kind == NASH:
        constrained.append(leader)
    for p in constrained:
        if p not in region.thresholds:
            continue
        row = {_pe(e): arena.reward(p, e) for e in range(len(arena.edges))}
        if mode.has_incentives and p != leader:
            row[_iota(p)] = Fraction(1)
        prog.add_constraint(row, ">=", region.thresholds[p], name=f"stable_{p}")

    objective = {_pe(e): arena.reward(leader, e) for e in range(len(arena.edges))}
    if mode.has_incentives:
        for p in arena.followers:
            objective[_iota(p)] = Fraction(-1)
    prog.objective = {x: c for x, c in objective.items() if c != 0}
    return prog


def _result_from(
    arena: GameArena, region: Region, mode: Mode, outcome: LpOutcome
) -> EquilibriumResult:
    a = outcome.assignment
    edge_ratio = {e: a[_pe(e)] for e in range(len(arena.edges)) if a[_pe(e)] != 0}
    vertex_ratio = {v: a[_pv(v)] for v in range(arena.n_vertices) if a[_pv(v)] != 0}
    incentives = {
        p: (a[_iota(p)] if mode.has_incentives else Fraction(0)) for p in arena.followers
    }
    solution = FrequencySolution(edge_ratio, vertex_ratio, incentives)
    return result_from_solution(arena, region, mode, solution)


def result_from_solution(
    arena: GameArena, region: Region, mode: Mode, solution: FrequencySolution
) -> EquilibriumResult:
    """Derive raw and total payoffs from frequencies and incentives."""
    raw = {
        p: sum(
            (r * arena.reward(p, e) for e, r in solution.edge_ratio.items()), Fraction(0)
        )
        for p in range(arena.n_players)
    }
    total_incentive = sum(solution.incentives.values(), Fraction(0))
    follower_payoffs = {p: raw[p] + solution.incentives.get(p, Fraction(0)) for p in arena.followers}
    return EquilibriumResult(
        mode=mode,
        region=region,
        solution=solution,
        leader_payoff=raw[arena.leader] - total_incentive,
        follower_payoffs=follower_payoffs,
        raw_payoffs=raw,
    )


def region_bound(arena: GameArena, region: Region) -> Fraction | None:
    """Largest leader reward on an edge inside S; no region value can exceed it.

    Frequencies sum to one and incentives only subtract, so this bounds every mode.
    None when S carries no edge.
    """
    rewards = [
        arena.reward(arena.leader, e)
        for e, (src, tgt) in enumerate(arena.edges)
        if src in region.s and tgt in region.s
    ]
    return max(rewards, default=None)


def _solve_region(job: tuple[GameArena, Region, Mode]) -> LpOutcome:
    arena, region, mode = job
    return solve_lp(build_constraint_system(arena, region, mode))


def secure_epsilon(result: EquilibriumResult, epsilon: Fraction) -> EquilibriumResult:
    """Raise every follower incentive by epsilon/|P| so deviations never help for free."""
    epsilon = Fraction(epsilon)
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if result.mode.kind != INCENTIVE:
        raise ValueError(f"secure uplift applies to incentive results, got {result.mode}")
    n_players = len(result.raw_payoffs)
    uplift = epsilon / n_players
    incentives = {p: i + uplift for p, i in result.solution.incentives.items()}
    solution = replace(result.solution, incentives=incentives)
    return replace(
        result,
        mode=Mode(SECURE, epsilon),
        solution=solution,
        leader_payoff=result.leader_payoff - uplift * len(incentives),
        follower_payoffs={p: v + uplift for p, v in result.follower_payoffs.items()},
    )


class EquilibriumSolver:
    """Solves one arena in several modes, sharing punishment values between them."""

    def __init__(self, arena: GameArena, config: dict | None = None, jobs: int | None = None):
        self.arena = arena
        solver_config = (config or {}).get("solver", {})
        self.jobs = max(1, jobs if jobs is not None else int(solver_config.get("jobs", DEFAULT_JOBS)))
        self.timings: dict[str, float] = {"values": 0.0, "enumeration": 0.0, "lp": 0.0, "total": 0.0}
        self._values: dict[int, VertexValues] = {}

    def values(self, players: list[int] | None = None) -> dict[int, VertexValues]:
        """Punishment values per player, computed on first use."""
        players = self.arena.followers if players is None else players
        start = time.perf_counter()
        for p in players:
            if p in self._values:
                continue
            game = leader_game(self.arena) if p == self.arena.leader else punishment_game(self.arena, p)
            self._values[p] = vertex_values(game)
            logger.info("Player %d: %d distinct punishment values", p, len(self._values[p].distinct()))
        self.timings["values"] += time.perf_counter() - start
        return {p: self._values[p] for p in players}

    def _solve_all(
        self, regions: list[Region], mode: Mode, pool: ProcessPoolExecutor | None = None
    ) -> list[LpOutcome]:
        jobs = [(self.arena, region, mode) for region in regions]
        if pool is None or len(jobs) < 2:
            return [_solve_region(job) for job in jobs]
        return list(pool.map(_solve_region, jobs))

    def solve(self, mode: Mode) -> EquilibriumResult:
        """Leader-optimal result in ``mode``.

        Regions are tried in order of their reward bound; once no remaining bound can
        beat the best value found, the rest are skipped unsolved.

        Raises:
            InfeasibleError: if no region admits a feasible constraint system.
        """
        begin = time.perf_counter()
        if mode.kind == SECURE:
            base = self.solve(Mode(INCENTIVE))
            return secure_epsilon(base, mode.epsilon)

        players = list(self.arena.followers)
        if mode.kind == NASH:
            players.append(self.arena.leader)
        values = self.values(players)

        start = time.perf_counter()
        regions = enumerate_regions(self.arena, values, players)
        self.timings["enumeration"] += time.perf_counter() - start

        start = time.perf_counter()
        bounded = [(region_bound(self.arena, region), region) for region in regions]
        ranked = sorted(
            ((b, r) for b, r in bounded if b is not None), key=lambda item: (-item[0], item[1].key())
        )
        size = 1 if self.jobs == 1 else 2 * self.jobs
        best: tuple[Region, LpOutcome] | None = None
        solved = 0

        def can_win(bound: Fraction, region: Region) -> bool:
            if best is None:
                return True
            return bound > best[1].value or (bound == best[1].value and region.key() < best[0].key())

        pool_context = ProcessPoolExecutor(max_workers=self.jobs) if self.jobs > 1 else nullcontext()
        with pool_context as pool:
            for i in range(0, len(ranked), size):
                if best is not None and ranked[i][0] < best[1].value:
                    break
                batch = [region for bound, region in ranked[i : i + size] if can_win(bound, region)]
                outcomes = self._solve_all(batch, mode, pool)
                solved += len(batch)
                for region, outcome in zip(batch, outcomes, strict=True):
                    logger.debug("Region S=%s: %s %s", sorted(region.s), outcome.status, outcome.value)
                    if outcome.status != OPTIMAL:
                        continue
                    if (
                        best is None
                        or outcome.value > best[1].value
                        or (outcome.value == best[1].value and region.key() < best[0].key())
                    ):
                        best = (region, outcome)
        self.timings["lp"] += time.perf_counter() - start
        self.timings["total"] += time.perf_counter() - begin
        logger.info("Solved %d of %d regions, %d pruned by bound", solved, len(regions), len(regions) - solved)

        if best is None:
            raise InfeasibleError(f"No feasible region in {mode} mode ({len(regions)} tried)")
        region, outcome = best
        logger.info("Best %s region S=%s value %s", mode, sorted(region.s), outcome.value)
        return _result_from(self.arena, region, mode, outcome)


def solve_equilibrium(arena: GameArena, mode: Mode, jobs: int = 1) -> EquilibriumResult:
    return EquilibriumSolver(arena, jobs=jobs).solve(mode)


def compare_modes(solver: EquilibriumSolver) -> dict[str, EquilibriumResult]:
    """Nash, leader and incentive optima; the leader payoffs must be ordered in that sequence.

    Raises:
        InvariantViolation: when the ordering fails.
    """
    results = {kind: solver.solve(Mode(kind)) for kind in (NASH, LEADER, INCENTIVE)}
    nash, leader, incentive = (results[k].leader_payoff for k in (NASH, LEADER, INCENTIVE))
    if not nash <= leader <= incentive:
        raise InvariantViolation(
            f"Mode ordering violated: nash {nash}, leader {leader}, incentive {incentive}"
        )
    return results
