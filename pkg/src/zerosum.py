"""Two-player zero-sum mean-payoff games: mean partitions, exact values, punishment strategies.

Partitions come from an energy progress measure (small energy progress
measures lifting): the protagonist can force limit average >= 0 exactly where
she wins the energy game with a finite initial credit.
"""

import itertools
import logging
import math
from collections import deque
from collections.abc import Sequence
from dataclasses import dataclass, field
from fractions import Fraction

from .arena import ZeroSumGame

logger = logging.getLogger(__name__)

TOP = math.inf


@dataclass(frozen=True)
class MeanPartition:
    """Vertices whose value is at least ``threshold`` versus the rest."""

    threshold: Fraction
    at_least: frozenset[int]
    below: frozenset[int]


@dataclass(frozen=True)
class VertexValues:
    """Exact protagonist value per vertex."""

    values: dict[int, Fraction] = field(default_factory=dict)

    def __getitem__(self, vertex: int) -> Fraction:
        return self.values[vertex]

    def distinct(self) -> list[Fraction]:
        return sorted(set(self.values.values()))


@dataclass(frozen=True)
class PositionalStrategy:
    """One chosen outgoing edge per controlled vertex."""

    choice: dict[int, int] = field(default_factory=dict)


def _lcm_denominator(values: Sequence[Fraction]) -> int:
    scale = 1
    for v in values:
        scale = math.lcm(scale, v.denominator)
    return scale


def _integer_weights(g: ZeroSumGame) -> tuple[list[int], int]:
    scale = _lcm_denominator(g.reward)
    return [int(w * scale) for w in g.reward], scale


def _progress_measure(
    g: ZeroSumGame, weights: Sequence[int], minimizer: Sequence[bool] | None = None
) -> list[float]:
    """Least energy progress measure; ``TOP`` marks vertices lost by the energy player.

    The energy player owns the vertices flagged in ``minimizer``, the protagonist's by default.
    """
    arena = g.base
    n = arena.n_vertices
    out = arena.out_edges
    targets = [tgt for _, tgt in arena.edges]
    protagonist = minimizer if minimizer is not None else [g.is_protagonist(v) for v in range(n)]
    bound = _bound(out, weights)

    measure: list[float] = [0] * n

    def lifted(v: int) -> float:
        best = None
        for e in out[v]:
            m = measure[targets[e]]
            cand = TOP if m == TOP else max(0, m - weights[e])
            if cand > bound:
                cand = TOP
            if best is None:
                best = cand
            elif protagonist[v]:
                best = min(best, cand)
            else:
                best = max(best, cand)
        return best

    queue = deque(range(n))
    queued = [True] * n
    while queue:
        v = queue.popleft()
        queued[v] = False
        if measure[v] == TOP:
            continue
        new = lifted(v)
        if new > measure[v]:
            measure[v] = new
            for e in arena.in_edges[v]:
                src = arena.edges[e][0]
                if not queued[src] and measure[src] != TOP:
                    queued[src] = True
                    queue.append(src)
    return measure


def _shifted(weights: Sequence[int], alpha: Fraction) -> list[int]:
    return [w * alpha.denominator - alpha.numerator for w in weights]


def _partition(g: ZeroSumGame, weights: Sequence[int], alpha: Fraction) -> frozenset[int]:
    measure = _progress_measure(g, _shifted(weights, alpha))
    return frozenset(v for v, m in enumerate(measure) if m != TOP)


def zero_mean_partition(g: ZeroSumGame) -> MeanPartition:
    """Vertices from which the protagonist forces limit average >= 0.

    Requires integer rewards; rational games go through ``alpha_mean_partition``.
    """
    if any(w.denominator != 1 for w in g.reward):
        raise ValueError("zero_mean_partition needs integer weights; scale the game first")
    weights = [int(w) for w in g.reward]
    at_least = frozenset(v for v, m in enumerate(_progress_measure(g, weights)) if m != TOP)
    below = frozenset(range(g.n_vertices)) - at_least
    return MeanPartition(Fraction(0), at_least, below)


def alpha_mean_partition(g: ZeroSumGame, alpha: Fraction) -> MeanPartition:
    """Partition at threshold ``alpha`` by reweighting w -> w*b - a on integer-scaled rewards."""
    alpha = Fraction(alpha)
    weights, scale = _integer_weights(g)
    at_least = _partition(g, weights, alpha * scale)
    return MeanPartition(alpha, at_least, frozenset(range(g.n_vertices)) - at_least)


def candidate_fractions(lo: Fraction, hi: Fraction, max_denominator: int) -> list[Fraction]:
    """Sorted reduced fractions in [lo, hi] with denominator at most ``max_denominator``."""
    found = set()
    for den in range(1, max_denominator + 1):
        for num in range(math.ceil(lo * den), math.floor(hi * den) + 1):
            if math.gcd(num, den) == 1:
                found.add(Fraction(num, den))
    return sorted(found)


def _simplest_between(lo: Fraction, hi: Fraction) -> Fraction:
    """Fraction with the smallest denominator in [lo, hi]."""
    if math.ceil(lo) <= hi:
        return Fraction(math.ceil(lo))
    whole = math.floor(lo)
    return whole + 1 / _simplest_between(1 / (hi - whole), 1 / (lo - whole))


def _integer_values(g: ZeroSumGame, weights: list[int]) -> dict[int, Fraction]:
    n = g.n_vertices
    # distinct values with denominators <= n are at least this far apart
    gap = Fraction(1, n * (n - 1)) if n > 1 else Fraction(1)
    cache: dict[Fraction, frozenset[int]] = {}

    def at_least(alpha: Fraction) -> frozenset[int]:
        if alpha not in cache:
            cache[alpha] = _partition(g, weights, alpha)
        return cache[alpha]

    values: dict[int, Fraction] = {}
    # every block holds vertices whose value lies in [lo, hi]
    stack = [(frozenset(range(n)), Fraction(min(weights)), Fraction(max(weights)))]
    while stack:
        block, lo, hi = stack.pop()
        if not block:
            continue
        width = hi - lo
        if width >= gap:
            mid = _simplest_between(lo + width / 4, hi - width / 4)
            upper = block & at_least(mid)
            stack.append((upper, mid, hi))
            stack.append((block - upper, lo, mid))
            continue
        values.update(_resolve_block(block, candidate_fractions(lo, hi, n), at_least))
    logger.debug("Resolved %d values with %d partition queries", n, len(cache))
    return values


def _resolve_block(
    block: frozenset[int], cands: list[Fraction], at_least
) -> dict[int, Fraction]:
    """Assign each vertex of ``block`` one of the sorted candidates by bisection."""
    values: dict[int, Fraction] = {}
    stack = [(block, 0, len(cands))]
    while stack:
        block, lo, hi = stack.pop()
        if not block:
            continue
        if hi - lo == 1:
            values.update(dict.fromkeys(block, cands[lo]))
            continue
        mid = (lo + hi) // 2
        upper = block & at_least(cands[mid])
        stack.append((upper, mid, hi))
        stack.append((block - upper, lo, mid))
    return values


def vertex_values(g: ZeroSumGame) -> VertexValues:
    """Exact value r_p(v) of every vertex.

    Values are fractions a/l with l <= |V|. Blocks of vertices are split by
    partition queries at simple thresholds until each interval is narrower than
    the spacing of such fractions, then the few candidates left are bisected.
    """
    weights, scale = _integer_weights(g)
    values = _integer_values(g, weights)
    return VertexValues({v: values[v] / scale for v in sorted(values)})


def punish_strategy(g: ZeroSumGame, values: VertexValues | None = None) -> PositionalStrategy:
    """Optimal positional strategy for the coalition, lowest edge index among optimal edges.

    For each value x the coalition plays the energy game in which every cycle
    must keep its mean below a threshold just above x. No candidate value lies
    strictly between x and that threshold, so every cycle it admits has mean at
    most x. Edges consistent with the coalition's progress measure win that game.
    """
    if values is None:
        values = vertex_values(g)
    weights, scale = _integer_weights(g)
    n = g.n_vertices
    arena = g.base
    targets = [tgt for _, tgt in arena.edges]
    gap = Fraction(1, n * n + 1)
    coalition = [not g.is_protagonist(v) for v in range(n)]

    choice: dict[int, int] = {}
    by_value: dict[Fraction, list[int]] = {}
    for v in sorted(g.coalition_vertices):
        by_value.setdefault(values[v] * scale, []).append(v)

    for x, vertices in sorted(by_value.items()):
        # a cycle of length <= n has nonnegative dual weight iff its shifted sum is <= -1
        dual = [-n * w - 1 for w in _shifted(weights, x + gap)]
        measure = _progress_measure(g, dual, coalition)
        bound = _bound(arena.out_edges, dual)
        for v in vertices:
            if measure[v] == TOP:
                raise ArithmeticError(f"vertex {v} is not held below value {x / scale}")
            for e in arena.out_edges[v]:
                m = measure[targets[e]]
                if m != TOP and max(0, m - dual[e]) <= min(measure[v], bound):
                    choice[v] = e
                    break
            else:
                raise ArithmeticError(f"no value-preserving edge at vertex {v}")
    logger.debug("Punishment strategy fixes %d coalition vertices", len(choice))
    return PositionalStrategy(choice)


def _bound(out: list[list[int]], weights: Sequence[int]) -> int:
    return sum(max(0, -min(weights[e] for e in edges)) for edges in out)


def _lasso_mean(start: int, succ: list[int], weight: list[Fraction]) -> Fraction:
    """Mean of the cycle reached from ``start`` under a successor-edge map."""
    seen: dict[int, int] = {}
    path: list[int] = []
    v = start
    while v not in seen:
        seen[v] = len(path)
        path.append(v)
        v = succ[v]
    cycle = path[seen[v]:]
    return sum((weight[u] for u in cycle), Fraction(0)) / len(cycle)


def brute_force_values(g: ZeroSumGame) -> VertexValues:
    """Max-min over all positional strategy pairs; exponential, for small games only."""
    arena = g.base
    n = arena.n_vertices
    targets = [tgt for _, tgt in arena.edges]
    mine = sorted(g.protagonist_vertices)
    theirs = sorted(g.coalition_vertices)

    best = [None] * n
    for own in itertools.product(*(arena.out_edges[v] for v in mine)):
        worst = [None] * n
        for other in itertools.product(*(arena.out_edges[v] for v in theirs)):
            edge_of = dict(zip(mine, own, strict=True))
            edge_of.update(zip(theirs, other, strict=True))
            succ = [targets[edge_of[v]] for v in range(n)]
            weight = [g.reward[edge_of[v]] for v in range(n)]
            for v in range(n):
                mean = _lasso_mean(v, succ, weight)
                if worst[v] is None or mean < worst[v]:
                    worst[v] = mean
        for v in range(n):
            if best[v] is None or worst[v] > best[v]:
                best[v] = worst[v]
    return VertexValues({v: best[v] for v in range(n)})
