"""Tests for region enumeration and leader-optimal equilibria."""

import itertools
from fractions import Fraction
from unittest.mock import MagicMock, patch

import networkx as nx
import pytest

from src import zerosum
from src.equilibria import (
    INCENTIVE,
    LEADER,
    NASH,
    SECURE,
    EquilibriumSolver,
    Mode,
    bind_region,
    build_constraint_system,
    candidate_regions,
    compare_modes,
    enumerate_regions,
    follower_thresholds,
    region_bound,
    secure_epsilon,
    solution_assignment,
    solve_equilibrium,
)
from src.errors import InfeasibleError, InvariantViolation
from src.generators import RandomGameParams, random_game
from src.lp import INFEASIBLE, OPTIMAL, LpOutcome, check_solution, solve_lp


def _random_arena(seed: int, vertices: int = 6, players: int = 3):
    params = RandomGameParams(
        seed=seed, vertices=vertices, players=players, edges_max=2, weight_range=(-3, 3)
    )
    return random_game(params)


def test_mode_validation():
    """Test that unknown modes and secure mode without epsilon are rejected."""
    with pytest.raises(ValueError, match="Unknown mode"):
        Mode("stackelberg")
    with pytest.raises(ValueError, match="epsilon > 0"):
        Mode(SECURE)
    with pytest.raises(ValueError, match="epsilon > 0"):
        Mode(SECURE, Fraction(0))
    assert Mode(INCENTIVE).has_incentives
    assert not Mode(NASH).has_incentives
    assert str(Mode(SECURE, Fraction(1, 100))) == "secure_incentive(epsilon=1/100)"


def test_follower_thresholds(fig1):
    """Test the distinct values each follower owns."""
    values = EquilibriumSolver(fig1).values()
    assert follower_thresholds(fig1, values) == {0: [1], 2: [-9, -2, -1]}


def test_candidate_regions_fig1(fig1):
    """Test the liberal region for fixed thresholds."""
    values = EquilibriumSolver(fig1).values()

    regions = candidate_regions(fig1, values, {0: Fraction(1), 2: Fraction(-9)})
    assert [r.q for r in regions] == [frozenset({0, 1, 2})]
    assert [r.s for r in regions] == [frozenset({2})]
    assert regions[0].thresholds == {0: 1, 2: -9}

    regions = candidate_regions(fig1, values, {0: Fraction(1), 2: Fraction(-1)})
    assert all(r.q == frozenset(range(5)) for r in regions)
    assert [r.s for r in regions] == [frozenset({2}), frozenset({3}), frozenset({4})]


def test_candidate_regions_absent_player_bars_initial(fig1):
    """Test that barring the owner of v0 leaves nothing."""
    values = EquilibriumSolver(fig1).values()
    assert candidate_regions(fig1, values, {0: None}) == []


def test_enumerate_regions_fig1(fig1):
    """Test every distinct region of the three-player example."""
    values = EquilibriumSolver(fig1).values()
    regions = enumerate_regions(fig1, values, fig1.followers)
    assert [r.key() for r in regions] == [
        ((2,), (0, 1, 2)),
        ((2,), (0, 1, 2, 3, 4)),
        ((2,), (0, 1, 2, 4)),
        ((3,), (0, 1, 2, 3, 4)),
        ((4,), (0, 1, 2, 3, 4)),
        ((4,), (0, 1, 2, 4)),
    ]


@pytest.mark.parametrize("seed", range(40))
def test_enumeration_covers_every_combination(seed):
    """Test that memoised enumeration misses no threshold combination."""
    arena = _random_arena(seed)
    values = EquilibriumSolver(arena).values()
    found = {r.key() for r in enumerate_regions(arena, values, arena.followers)}

    options = [[None, *values[p].distinct()] for p in arena.followers]
    for combo in itertools.product(*options):
        chosen = dict(zip(arena.followers, combo, strict=True))
        for region in candidate_regions(arena, values, chosen):
            assert region.key() in found


def test_build_constraint_system_names(fig1):
    """Test variables and constraint labels of the incentive system."""
    values = EquilibriumSolver(fig1).values()
    region = candidate_regions(fig1, values, {0: Fraction(1), 2: Fraction(-9)})[0]
    prog = build_constraint_system(fig1, region, Mode(INCENTIVE))

    assert prog.variables[:5] == [f"pv_{v}" for v in range(5)]
    assert prog.variables[-2:] == ["iota_0", "iota_2"]
    names = [c.name for c in prog.constraints]
    assert names[:4] == ["off_s_0", "off_s_1", "off_s_3", "off_s_4"]
    assert "total" in names
    assert names[-4:] == ["out_2", "in_2", "stable_0", "stable_2"]
    assert prog.objective == {"pe_4": 9, "pe_6": 1, "iota_0": -1, "iota_2": -1}


def test_build_constraint_system_leader_has_no_incentives(fig1):
    """Test that leader mode declares no incentive variables."""
    values = EquilibriumSolver(fig1).values()
    region = candidate_regions(fig1, values, {0: Fraction(1), 2: Fraction(-9)})[0]
    prog = build_constraint_system(fig1, region, Mode(LEADER))
    assert not any(x.startswith("iota_") for x in prog.variables)


def test_incentive_fig1(fig1):
    """Test the incentive equilibrium of the three-player example."""
    result = EquilibriumSolver(fig1).solve(Mode(INCENTIVE))
    assert result.leader_payoff == 8
    assert result.raw_payoffs == {0: 0, 1: 9, 2: -9}
    assert result.follower_payoffs == {0: 1, 2: -9}
    assert result.solution.incentives == {0: 1, 2: 0}
    assert result.region.s == frozenset({2})
    assert result.solution.edge_ratio == {4: 1}


def test_leader_fig1(fig1):
    """Test the leader equilibrium of the three-player example."""
    result = EquilibriumSolver(fig1).solve(Mode(LEADER))
    assert result.leader_payoff == 1
    assert result.region.s == frozenset({4})
    assert result.follower_payoffs == {0: 1, 2: -2}


def test_nash_fig1(fig1):
    """Test the Nash equilibrium of the three-player example."""
    result = EquilibriumSolver(fig1).solve(Mode(NASH))
    assert result.leader_payoff == 0
    assert result.region.s == frozenset({3})
    assert result.region.q == frozenset({0, 3})


def test_incentive_fig2(fig2):
    """Test that four followers are paid a twelfth each on the inner ring."""
    result = EquilibriumSolver(fig2).solve(Mode(INCENTIVE))
    assert result.leader_payoff == Fraction(2, 3)
    assert result.follower_payoffs == {p: Fraction(1, 3) for p in (1, 2, 3, 4)}
    assert result.solution.incentives == {p: Fraction(1, 12) for p in (1, 2, 3, 4)}


def test_leader_and_nash_fig2(fig2):
    """Test the token-ring example without incentives."""
    solver = EquilibriumSolver(fig2)
    assert solver.solve(Mode(LEADER)).leader_payoff == Fraction(1, 3)
    assert solver.solve(Mode(NASH)).leader_payoff == Fraction(1, 3)


def test_secure_incentive(secure):
    """Test that the secure uplift is epsilon over the player count."""
    result = EquilibriumSolver(secure).solve(Mode(SECURE, Fraction(1, 100)))
    assert result.leader_payoff == 1 - Fraction(1, 200)
    assert result.follower_payoffs == {0: Fraction(1, 200)}
    assert result.solution.incentives == {0: Fraction(1, 200)}
    assert result.mode == Mode(SECURE, Fraction(1, 100))


def test_secure_epsilon_guards(secure):
    """Test that the uplift needs a positive epsilon and an incentive result."""
    solver = EquilibriumSolver(secure)
    with pytest.raises(ValueError, match="positive"):
        secure_epsilon(solver.solve(Mode(INCENTIVE)), Fraction(0))
    with pytest.raises(ValueError, match="incentive results"):
        secure_epsilon(solver.solve(Mode(LEADER)), Fraction(1, 10))


def test_client_server(client_server):
    """Test that paying the client to signal pays off for the server."""
    solver = EquilibriumSolver(client_server)
    assert solver.solve(Mode(INCENTIVE)).leader_payoff == 9
    assert solver.solve(Mode(LEADER)).leader_payoff == 0


def test_client_server_signalling_region(client_server):
    """Test paying the client a quarter to send s' on every free signal."""
    solver = EquilibriumSolver(client_server)
    values = solver.values()
    names = ["sig0", "sig1_s", "sig1_sp", "sig2_s", "sig2_sp", "sig3_s", "sig3_sp"]
    trap = frozenset(client_server.vertex_index(name) for name in names)
    assert all(values[0][v] == Fraction(-1, 2) for v in trap)

    region = bind_region(client_server, trap, trap, values)
    assert region.thresholds == {0: Fraction(-1, 2)}
    outcome = solve_lp(build_constraint_system(client_server, region, Mode(INCENTIVE)))
    assert outcome.value == Fraction(9, 4)
    assert outcome.assignment["iota_0"] == Fraction(1, 4)

    index = client_server.vertex_index
    cycle = [("sig0", "sig1_sp"), ("sig1_sp", "sig2_sp"), ("sig2_sp", "sig3_sp"), ("sig3_sp", "sig0")]
    used = {client_server.edge_lookup[(index(a), index(b))] for a, b in cycle}
    ratios = {e: outcome.assignment[f"pe_{e}"] for e in range(len(client_server.edges))}
    assert {e for e, r in ratios.items() if r} == used
    assert all(ratios[e] == Fraction(1, 4) for e in used)
    s_share = sum(r for e, r in ratios.items() if client_server.rewards[e] == (0, 1, -1))
    assert s_share == Fraction(1, 4)
    assert 1 - s_share == Fraction(3, 4)

    leader = solve_lp(build_constraint_system(client_server, region, Mode(LEADER)))
    assert leader.value == 2


def test_solution_satisfies_its_system(fig2):
    """Test that a solved result re-checks exactly against its constraints."""
    solver = EquilibriumSolver(fig2)
    for kind in (NASH, LEADER, INCENTIVE):
        result = solver.solve(Mode(kind))
        prog = build_constraint_system(fig2, result.region, result.mode)
        assignment = solution_assignment(fig2, result.solution, result.mode)
        assert check_solution(prog, assignment) == []


def test_tampered_solution_is_caught(fig1):
    """Test that dropping the incentive violates the follower's stability row."""
    result = EquilibriumSolver(fig1).solve(Mode(INCENTIVE))
    result.solution.incentives[0] = Fraction(0)
    prog = build_constraint_system(fig1, result.region, result.mode)
    violations = check_solution(prog, solution_assignment(fig1, result.solution, result.mode))
    assert violations == ["stable_0: 0 >= 1 fails"]


def test_compare_modes_fig1(fig1):
    """Test the Nash <= leader <= incentive ordering on the example."""
    results = compare_modes(EquilibriumSolver(fig1))
    assert [results[k].leader_payoff for k in (NASH, LEADER, INCENTIVE)] == [0, 1, 8]


@pytest.mark.parametrize("seed", range(200))
def test_compare_modes_random(seed):
    """Test the mode ordering on three-player arenas of 3 to 12 vertices."""
    compare_modes(EquilibriumSolver(_random_arena(seed, vertices=3 + seed % 10)))


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(40, 200))
def test_compare_modes_random_sweep(seed):
    """Test the mode ordering on a wider sweep of random arenas."""
    compare_modes(EquilibriumSolver(_random_arena(seed, vertices=8, players=4)))


def test_compare_modes_detects_misordering():
    """Test that a broken ordering raises."""
    payoffs = {NASH: Fraction(2), LEADER: Fraction(1), INCENTIVE: Fraction(3)}
    solver = MagicMock()
    solver.solve.side_effect = lambda mode: MagicMock(leader_payoff=payoffs[mode.kind])
    with pytest.raises(InvariantViolation, match="ordering"):
        compare_modes(solver)


def test_solve_infeasible(fig1):
    """Test that no feasible region raises InfeasibleError."""
    with patch("src.equilibria.solve_lp", return_value=LpOutcome(INFEASIBLE)):
        with pytest.raises(InfeasibleError, match="No feasible region"):
            EquilibriumSolver(fig1).solve(Mode(LEADER))


def test_values_are_cached(fig1):
    """Test that punishment values are computed once per player."""
    solver = EquilibriumSolver(fig1)
    with patch("src.equilibria.vertex_values", wraps=zerosum.vertex_values) as spy:
        solver.solve(Mode(LEADER))
        solver.solve(Mode(INCENTIVE))
    assert spy.call_count == 2
    assert set(solver.timings) == {"values", "enumeration", "lp", "total"}


def test_jobs_from_config(fig1):
    """Test that the worker count comes from config unless given explicitly."""
    assert EquilibriumSolver(fig1, config={"solver": {"jobs": 3}}).jobs == 3
    assert EquilibriumSolver(fig1, config={"solver": {"jobs": 3}}, jobs=2).jobs == 2
    assert EquilibriumSolver(fig1).jobs == 1


def test_parallel_matches_serial(fig2):
    """Test that a process pool picks the same region as the serial path."""
    serial = solve_equilibrium(fig2, Mode(INCENTIVE))
    parallel = solve_equilibrium(fig2, Mode(INCENTIVE), jobs=2)
    assert parallel.region.key() == serial.region.key()
    assert parallel.leader_payoff == serial.leader_payoff


@pytest.mark.slow
def test_scale_hundred_vertices():
    """Test a 100-vertex, 10-player random arena end to end."""
    arena = random_game(RandomGameParams(seed=7, vertices=100, players=10))
    solver = EquilibriumSolver(arena, jobs=4)
    assert solver.solve(Mode(INCENTIVE)).leader_payoff >= solver.solve(Mode(LEADER)).leader_payoff


def test_region_bound_prunes_fig1(fig1):
    """Test that regions whose reward bound is below the best value are never solved."""
    solver = EquilibriumSolver(fig1)
    regions = enumerate_regions(fig1, solver.values(), fig1.followers)
    assert sorted(region_bound(fig1, r) for r in regions) == [0, 1, 1, 9, 9, 9]
    with patch("src.equilibria.solve_lp", wraps=solve_lp) as spy:
        result = solver.solve(Mode(INCENTIVE))
    assert result.leader_payoff == 8
    assert spy.call_count == 3


@pytest.mark.parametrize("seed", range(30))
def test_pruned_solve_matches_exhaustive(seed):
    """Test that the pruned search finds the best value over all regions."""
    arena = _random_arena(seed)
    solver = EquilibriumSolver(arena)
    for kind in (LEADER, INCENTIVE):
        regions = enumerate_regions(arena, solver.values(), arena.followers)
        outcomes = [solve_lp(build_constraint_system(arena, r, Mode(kind))) for r in regions]
        feasible = [o.value for o in outcomes if o.status == OPTIMAL]
        if not feasible:
            with pytest.raises(InfeasibleError):
                solver.solve(Mode(kind))
            continue
        assert solver.solve(Mode(kind)).leader_payoff == max(feasible)


@pytest.mark.parametrize("seed", range(20))
def test_regions_are_stable(seed):
    """Test that every solved region pays each follower its best punishment value in Q."""
    arena = _random_arena(seed)
    values = EquilibriumSolver(arena).values()
    for region in enumerate_regions(arena, values, arena.followers):
        for p, threshold in region.thresholds.items():
            assert threshold == max(values[p][v] for v in region.q if arena.owner[v] == p)
        outcome = solve_lp(build_constraint_system(arena, region, Mode(INCENTIVE)))
        if outcome.status != OPTIMAL:
            continue
        a = outcome.assignment
        for p in region.thresholds:
            payoff = sum(
                (a[f"pe_{e}"] * arena.reward(p, e) for e in range(len(arena.edges))), Fraction(0)
            )
            payoff += a[f"iota_{p}"]
            assert all(payoff >= values[p][v] for v in region.q if arena.owner[v] == p)


def _stable_lasso_payoffs(arena, values) -> list[Fraction]:
    """Leader means of simple-cycle lassos from v0 that no follower deviates from."""
    graph = arena.graph
    payoffs = []
    for cycle in nx.simple_cycles(graph):
        edges = [arena.edge_lookup[(a, b)] for a, b in zip(cycle, cycle[1:] + cycle[:1], strict=True)]
        mean = {
            p: sum((arena.reward(p, e) for e in edges), Fraction(0)) / len(edges)
            for p in range(arena.n_players)
        }
        for start in cycle:
            if start == arena.initial:
                paths = [[arena.initial]]
            else:
                paths = nx.all_simple_paths(graph, arena.initial, start)
            for path in paths:
                visited = set(path) | set(cycle)
                if all(
                    mean[p] >= values[p][v] for p in values for v in visited if arena.owner[v] == p
                ):
                    payoffs.append(mean[arena.leader])
    return payoffs


@pytest.mark.parametrize("seed", range(40))
def test_enumeration_reaches_every_stable_lasso(seed):
    """Test the leader optimum against brute-force simple-cycle profiles on small arenas."""
    arena = _random_arena(seed, vertices=4 + seed % 3)
    solver = EquilibriumSolver(arena)
    payoffs = _stable_lasso_payoffs(arena, solver.values())
    if payoffs:
        assert solver.solve(Mode(LEADER)).leader_payoff >= max(payoffs)


def test_secure_incentive_fig2(fig2):
    """Test that four followers each cost the leader epsilon over five players."""
    result = EquilibriumSolver(fig2).solve(Mode(SECURE, Fraction(1, 10)))
    assert result.leader_payoff == Fraction(2, 3) - 4 * Fraction(1, 10) / 5
    assert result.solution.incentives == {p: Fraction(1, 12) + Fraction(1, 50) for p in (1, 2, 3, 4)}


@pytest.mark.parametrize("seed", range(10))
def test_secure_uplift_several_followers(seed):
    """Test the secure leader payoff drop of followers * epsilon / |P|."""
    arena = _random_arena(seed, players=4)
    epsilon = Fraction(1, 7)
    solver = EquilibriumSolver(arena)
    base = solver.solve(Mode(INCENTIVE))
    secure = solver.solve(Mode(SECURE, epsilon))
    drop = len(arena.followers) * epsilon / arena.n_players
    assert secure.leader_payoff == base.leader_payoff - drop
    assert secure.region.key() == base.region.key()
