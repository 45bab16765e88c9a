"""Tests for zero-sum mean-payoff values and punishment strategies."""

from fractions import Fraction
from unittest.mock import patch

import pytest

from src.arena import GameArena, leader_game, parse_game, punishment_game
from src.generators import RandomGameParams, random_game
from src.zerosum import (
    alpha_mean_partition,
    brute_force_values,
    candidate_fractions,
    punish_strategy,
    vertex_values,
    zero_mean_partition,
)


def _coalition_fixed(arena: GameArena, choice: dict[int, int]) -> GameArena:
    """Copy of ``arena`` where every chosen vertex keeps only its chosen edge."""
    keep = [
        e for e, (src, _) in enumerate(arena.edges) if src not in choice or choice[src] == e
    ]
    return GameArena(
        players=arena.players,
        vertices=arena.vertices,
        owner=arena.owner,
        initial=arena.initial,
        edges=tuple(arena.edges[e] for e in keep),
        rewards=tuple(arena.rewards[e] for e in keep),
    )


def _small_random(seed: int) -> GameArena:
    params = RandomGameParams(
        seed=seed, vertices=6, players=2, edges_min=1, edges_max=2, weight_range=(-5, 5)
    )
    return random_game(params)


def test_values_fig1_vertex1_owner(fig1):
    """Test punishment values for the player owning vertex 1."""
    values = vertex_values(punishment_game(fig1, 0))
    assert values.values == {0: 1, 1: 0, 2: 0, 3: 1, 4: 1}


def test_values_fig1_loop_owner(fig1):
    """Test punishment values for the player owning the three loops."""
    values = vertex_values(punishment_game(fig1, 2))
    assert values.values == {0: -9, 1: -9, 2: -9, 3: -1, 4: -2}
    assert values.distinct() == [-9, -2, -1]


def test_values_fig1_leader(fig1):
    """Test the leader's own values, where the leader picks at vertex 2."""
    values = vertex_values(leader_game(fig1))
    assert values.values == {0: 0, 1: 9, 2: 9, 3: 0, 4: 1}


def test_values_single_vertex(loop_game):
    """Test the one-vertex arena."""
    assert vertex_values(punishment_game(loop_game, 0)).values == {0: 0}


def test_values_rational_rewards():
    """Test that fractional rewards give exact fractional values."""
    arena = parse_game(
        "players 2 leader 1\n"
        "vertex a owner 0 initial\n"
        "vertex b owner 1\n"
        "edge a b 1/2 0\n"
        "edge b a 0 0\n"
        "edge a a -1/3 0\n"
    )
    values = vertex_values(punishment_game(arena, 0))
    assert values[0] == Fraction(1, 4)
    assert values[1] == Fraction(1, 4)


def test_values_fig2_followers(fig2):
    """Test that each follower secures a third by looping its outer ring."""
    for p in fig2.followers:
        values = vertex_values(punishment_game(fig2, p))
        assert values[fig2.vertex_index(str(p))] == Fraction(1, 3)
        assert values.distinct() == [Fraction(0), Fraction(1, 3)]


@pytest.mark.parametrize("seed", range(100))
def test_values_match_brute_force(seed):
    """Test exact values against positional strategy enumeration."""
    arena = _small_random(seed)
    for g in (punishment_game(arena, 1), leader_game(arena)):
        assert vertex_values(g) == brute_force_values(g)


def test_zero_mean_partition(fig1):
    """Test the threshold-zero split for the owner of vertex 1."""
    partition = zero_mean_partition(punishment_game(fig1, 0))
    assert partition.at_least == frozenset(range(5))
    assert partition.below == frozenset()

    partition = zero_mean_partition(punishment_game(fig1, 2))
    assert partition.at_least == frozenset()


def test_zero_mean_partition_rejects_fractions():
    """Test that fractional weights must be scaled first."""
    arena = parse_game("players 1 leader 0\nvertex a owner 0 initial\nedge a a 1/2\n")
    with pytest.raises(ValueError, match="integer weights"):
        zero_mean_partition(leader_game(arena))


def test_alpha_mean_partition(fig1):
    """Test partitions at thresholds between the loop values."""
    g = punishment_game(fig1, 2)
    assert alpha_mean_partition(g, Fraction(-2)).at_least == frozenset({3, 4})
    assert alpha_mean_partition(g, Fraction(-3, 2)).at_least == frozenset({3})
    assert alpha_mean_partition(g, Fraction(-9)).at_least == frozenset(range(5))
    assert alpha_mean_partition(g, Fraction(0)).below == frozenset(range(5))


def test_candidate_fractions():
    """Test the Farey-style candidate list."""
    assert candidate_fractions(Fraction(0), Fraction(1), 3) == [
        Fraction(0),
        Fraction(1, 3),
        Fraction(1, 2),
        Fraction(2, 3),
        Fraction(1),
    ]
    assert candidate_fractions(Fraction(-1), Fraction(-1), 4) == [Fraction(-1)]


def test_punish_strategy_fig1(fig1):
    """Test the coalition's positional punishment choices."""
    assert punish_strategy(punishment_game(fig1, 2)).choice == {0: 0, 1: 3}
    assert punish_strategy(punishment_game(fig1, 0)).choice == {1: 3, 2: 4, 3: 5, 4: 6}


def test_punish_strategy_leaves_neutral_loop():
    """Test that the coalition does not idle on a zero loop next to a losing loop."""
    arena = parse_game(
        "players 2 leader 1\n"
        "vertex u owner 1 initial\n"
        "vertex w owner 1\n"
        "edge u u 0 0\n"
        "edge u w 0 0\n"
        "edge w w -1 0\n"
    )
    g = punishment_game(arena, 0)
    assert vertex_values(g).values == {0: Fraction(-1), 1: Fraction(-1)}
    assert punish_strategy(g).choice == {0: 1, 1: 2}


@pytest.mark.parametrize("seed", range(30))
def test_punish_strategy_is_optimal(seed):
    """Test that fixing the coalition's choice leaves the protagonist no better off."""
    arena = _small_random(seed)
    g = punishment_game(arena, 1)
    values = vertex_values(g)
    strategy = punish_strategy(g, values)
    assert set(strategy.choice) == g.coalition_vertices

    fixed = _coalition_fixed(arena, strategy.choice)
    assert brute_force_values(punishment_game(fixed, 1)) == values


@pytest.mark.parametrize("seed", range(20))
def test_alpha_partition_shrinks_along_thresholds(seed):
    """Test that raising the threshold only ever removes vertices, in line with the values."""
    g = punishment_game(_small_random(seed), 0)
    values = vertex_values(g)
    chain = candidate_fractions(Fraction(-6), Fraction(6), 3) + [Fraction(1, 7), Fraction(-5, 11)]
    previous = frozenset(range(g.n_vertices))
    for alpha in sorted(chain):
        at_least = alpha_mean_partition(g, alpha).at_least
        assert at_least <= previous
        assert at_least == frozenset(v for v in range(g.n_vertices) if values[v] >= alpha)
        previous = at_least


def test_values_only_list_candidates_in_narrow_intervals(fig1):
    """Test that candidate fractions are generated only once an interval is narrower than their spacing."""
    g = punishment_game(fig1, 2)
    n = g.n_vertices
    with patch("src.zerosum.candidate_fractions", wraps=candidate_fractions) as spy:
        values = vertex_values(g)
    assert values.values == {0: -9, 1: -9, 2: -9, 3: -1, 4: -2}
    assert spy.call_count >= 1
    for call in spy.call_args_list:
        lo, hi, max_denominator = call.args
        assert max_denominator == n
        assert hi - lo < Fraction(1, n * (n - 1))
        assert len(candidate_fractions(lo, hi, n)) <= 1


def test_values_wide_weight_range():
    """Test exact values when rewards span thousands of units."""
    arena = parse_game(
        "players 2 leader 1\n"
        "vertex a owner 0 initial\n"
        "vertex b owner 1\n"
        "vertex c owner 1\n"
        "edge a b 5000 0\n"
        "edge b a -4001 0\n"
        "edge a c 0 0\n"
        "edge c c -7 0\n"
        "edge b b 600 0\n"
    )
    g = punishment_game(arena, 0)
    assert vertex_values(g) == brute_force_values(g)
    assert vertex_values(g)[0] == Fraction(999, 2)
