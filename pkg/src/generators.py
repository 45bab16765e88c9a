"""Benchmark arenas: the token-ring family, random games, and checked-in examples."""

import importlib.resources
import logging
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .arena import GameArena, make_players, parse_game, validate
from .errors import GameValidationError

logger = logging.getLogger(__name__)

BUILTINS = ("fig1", "fig2", "secure", "client_server")

DEFAULT_EDGES_MIN = 1
DEFAULT_EDGES_MAX = 3
DEFAULT_DENSITY = 0.5


@dataclass(frozen=True)
class TokenRingParams:
    """n players on the inner ring, outer cycles of length d."""

    n: int
    d: int

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f"token ring needs n >= 2, got {self.n}")
        if self.d < 1:
            raise ValueError(f"token ring needs d >= 1, got {self.d}")

    def incentives_useful(self) -> bool:
        """Closed-form frontier n > d > n(n-1)/(2n-1)."""
        return self.n > self.d > Fraction(self.n * (self.n - 1), 2 * self.n - 1)

    def incentive_value(self) -> Fraction:
        """Closed-form incentive-mode leader payoff."""
        n, d = self.n, self.d
        value = 1 - (n - 1) * (Fraction(1, d) - Fraction(1, n))
        return min(Fraction(1), max(Fraction(0), value))


@dataclass(frozen=True)
class RandomGameParams:
    """Seeded random arena with round-robin owners."""

    seed: int
    vertices: int
    players: int
    density: float = DEFAULT_DENSITY
    edges_min: int = DEFAULT_EDGES_MIN
    edges_max: int = DEFAULT_EDGES_MAX
    weight_range: tuple[int, int] | None = None

    def __post_init__(self):
        if self.vertices < 1 or self.players < 1:
            raise ValueError("random games need at least one vertex and one player")
        if not 0.0 <= self.density <= 1.0:
            raise ValueError(f"density must lie in [0, 1], got {self.density}")
        if not 1 <= self.edges_min <= self.edges_max:
            raise ValueError("need 1 <= edges_min <= edges_max")


def token_ring(params: TokenRingParams) -> GameArena:
    """Ring of n vertices, each closing a private outer cycle of length d.

    The leader (player 0) owns ring vertex r0, follower i owns ri, and every
    outer vertex belongs to the leader. Entering ri pays follower i one unit,
    so it earns 1/n on the inner ring and 1/d on its own outer ring. The
    leader earns one unit per inner-ring edge and nothing on outer rings.

    The built-in fig2 arena is drawn differently: there the leader is also paid
    on outer rings, so its payoffs differ from the closed forms above. Follower
    punishment values agree between the two for n=5, d=3.
    """
    n, d = params.n, params.d
    names = [f"r{i}" for i in range(n)]
    owners = list(range(n))
    for i in range(n):
        for k in range(1, d):
            names.append(f"o{i}_{k}")
            owners.append(0)
    index = {name: v for v, name in enumerate(names)}

    zero = Fraction(0)
    edges: list[tuple[int, int]] = []
    rewards: list[tuple[Fraction, ...]] = []

    def entering(i: int, inner: bool) -> tuple[Fraction, ...]:
        row = [zero] * n
        if i != 0:
            row[i] = Fraction(1)
        if inner:
            row[0] = Fraction(1)
        return tuple(row)

    for i in range(n):
        edges.append((index[f"r{i}"], index[f"r{(i + 1) % n}"]))
        rewards.append(entering((i + 1) % n, inner=True))
        ring = [f"r{i}"] + [f"o{i}_{k}" for k in range(1, d)] + [f"r{i}"]
        for a, b in zip(ring, ring[1:], strict=False):
            edges.append((index[a], index[b]))
            rewards.append(entering(i, inner=False) if b == f"r{i}" else (zero,) * n)

    arena = GameArena(
        players=make_players(n, 0),
        vertices=tuple(names),
        owner=tuple(owners),
        initial=0,
        edges=tuple(edges),
        rewards=tuple(rewards),
    )
    logger.debug("Token ring n=%d d=%d: %d vertices", n, d, arena.n_vertices)
    return arena


def random_game(params: RandomGameParams) -> GameArena:
    """Deterministic random arena; players take turns owning vertices, leader is player 0."""
    rng = np.random.default_rng(params.seed)
    n = params.vertices
    edges: list[tuple[int, int]] = []
    rewards: list[tuple[Fraction, ...]] = []
    for v in range(n):
        hi = min(params.edges_max, n)
        lo = min(params.edges_min, hi)
        count = int(rng.integers(lo, hi + 1))
        targets = sorted(int(t) for t in rng.choice(n, size=count, replace=False))
        for t in targets:
            edges.append((v, t))
            if params.weight_range is None:
                draws = rng.random(params.players) < params.density
                rewards.append(tuple(Fraction(int(x)) for x in draws))
            else:
                low, high = params.weight_range
                draws = rng.integers(low, high + 1, size=params.players)
                rewards.append(tuple(Fraction(int(x)) for x in draws))

    arena = GameArena(
        players=make_players(params.players, 0),
        vertices=tuple(str(v) for v in range(n)),
        owner=tuple(v % params.players for v in range(n)),
        initial=0,
        edges=tuple(edges),
        rewards=tuple(rewards),
    )
    violations = validate(arena)
    if violations:
        raise GameValidationError(violations)
    return arena


def builtin_text(name: str) -> str:
    if name not in BUILTINS:
        raise KeyError(f"Unknown built-in game '{name}', choose from {', '.join(BUILTINS)}")
    return importlib.resources.files("src").joinpath("games", f"{name}.game").read_text()


def builtin(name: str) -> GameArena:
    """One of the checked-in example arenas."""
    return parse_game(builtin_text(name))
