"""Game arena model, text format, and derived zero-sum projections."""

import hashlib
import logging
import re
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

import networkx as nx

from .errors import GameFormatError, GameValidationError

logger = logging.getLogger(__name__)

LEADER = "leader"
FOLLOWER = "follower"

_RATIONAL = re.compile(r"^-?\d+(/\d+)?$")
_TOKEN = re.compile(r"\S+")


@dataclass(frozen=True)
class PlayerId:
    """A player and its role in the game."""

    index: int
    role: str  # "leader" or "follower"

    @property
    def is_leader(self) -> bool:
        return self.role == LEADER


@dataclass(frozen=True)
class RMax:
    """Largest edge reward over all players and edges."""

    value: Fraction


@dataclass(frozen=True)
class GameArena:
    """Multi-player mean-payoff game arena.

    Vertices and edges are addressed by their position in the input; ``owner[v]``
    and the reward vectors are indexed by player index.
    """

    players: tuple[PlayerId, ...]
    vertices: tuple[str, ...]
    owner: tuple[int, ...]
    initial: int
    edges: tuple[tuple[int, int], ...]
    rewards: tuple[tuple[Fraction, ...], ...]

    @property
    def n_players(self) -> int:
        return len(self.players)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def leader(self) -> int:
        leaders = [p.index for p in self.players if p.is_leader]
        if len(leaders) != 1:
            raise ValueError(f"Arena has {len(leaders)} leaders, expected exactly one")
        return leaders[0]

    @property
    def followers(self) -> list[int]:
        return [p.index for p in self.players if not p.is_leader]

    def reward(self, player: int, edge: int) -> Fraction:
        return self.rewards[edge][player]

    def owned_by(self, player: int) -> list[int]:
        return [v for v, p in enumerate(self.owner) if p == player]

    def vertex_index(self, name: str) -> int:
        try:
            return self.vertices.index(name)
        except ValueError:
            raise KeyError(f"Unknown vertex: {name}") from None

    @cached_property
    def out_edges(self) -> list[list[int]]:
        """Outgoing edge indices per vertex, in input order."""
        out: list[list[int]] = [[] for _ in self.vertices]
        for e, (src, _) in enumerate(self.edges):
            out[src].append(e)
        return out

    @cached_property
    def in_edges(self) -> list[list[int]]:
        inc: list[list[int]] = [[] for _ in self.vertices]
        for e, (_, tgt) in enumerate(self.edges):
            inc[tgt].append(e)
        return inc

    @cached_property
    def edge_lookup(self) -> dict[tuple[int, int], int]:
        return {edge: e for e, edge in enumerate(self.edges)}

    @cached_property
    def graph(self) -> nx.DiGraph:
        """Directed graph over vertex indices; each edge carries its ``index``."""
        g = nx.DiGraph()
        g.add_nodes_from(range(self.n_vertices))
        for e, (src, tgt) in enumerate(self.edges):
            g.add_edge(src, tgt, index=e)
        return g


@dataclass(frozen=True)
class ZeroSumGame:
    """Two-player projection G_p: the protagonist maximises r_p, everyone else minimises it."""

    base: GameArena
    protagonist: int
    reward: tuple[Fraction, ...]

    @property
    def n_vertices(self) -> int:
        return self.base.n_vertices

    def is_protagonist(self, vertex: int) -> bool:
        return self.base.owner[vertex] == self.protagonist

    @property
    def protagonist_vertices(self) -> frozenset[int]:
        return frozenset(v for v in range(self.n_vertices) if self.is_protagonist(v))

    @property
    def coalition_vertices(self) -> frozenset[int]:
        return frozenset(v for v in range(self.n_vertices) if not self.is_protagonist(v))

    def coalition_reward(self, edge: int) -> Fraction:
        return -self.reward[edge]


def make_players(count: int, leader: int) -> tuple[PlayerId, ...]:
    return tuple(PlayerId(i, LEADER if i == leader else FOLLOWER) for i in range(count))


def _parse_rational(token: str, line: int, column: int) -> Fraction:
    if not _RATIONAL.match(token):
        raise GameFormatError(f"expected integer or a/b rational, got '{token}'", line, column)
    try:
        return Fraction(token)
    except ZeroDivisionError:
        raise GameFormatError("zero denominator", line, column) from None


def _parse_index(token: str, line: int, column: int) -> int:
    if not token.isdigit():
        raise GameFormatError(f"expected nonnegative integer, got '{token}'", line, column)
    return int(token)


def parse_game(text: str) -> GameArena:
    """Parse the line-oriented game format and return a validated arena.

    Raises:
        GameFormatError: on syntax errors and unresolved references.
        GameValidationError: when the arena breaks a structural invariant.
    """
    header: tuple[int, int] | None = None
    names: list[str] = []
    owners: list[int] = []
    initials: list[int] = []
    raw_edges: list[tuple[str, str, list[Fraction], int, int, int]] = []

    for lineno, raw in enumerate(text.splitlines(), start=1):
        content = raw.split("#", 1)[0]
        tokens = [(m.group(), m.start() + 1) for m in _TOKEN.finditer(content)]
        if not tokens:
            continue
        keyword, col = tokens[0]

        if keyword == "players":
            if header is not None:
                raise GameFormatError("duplicate players header", lineno, col)
            if len(tokens) != 4 or tokens[2][0] != "leader":
                raise GameFormatError("expected 'players <k> leader <index>'", lineno, col)
            count = _parse_index(tokens[1][0], lineno, tokens[1][1])
            leader = _parse_index(tokens[3][0], lineno, tokens[3][1])
            if count < 1:
                raise GameFormatError("at least one player required", lineno, tokens[1][1])
            if leader >= count:
                raise GameFormatError(f"leader {leader} out of range", lineno, tokens[3][1])
            header = (count, leader)

        elif keyword == "vertex":
            if header is None:
                raise GameFormatError("vertex before players header", lineno, col)
            if len(tokens) not in (4, 5) or tokens[2][0] != "owner":
                raise GameFormatError("expected 'vertex <name> owner <index> [initial]'", lineno, col)
            name, name_col = tokens[1]
            if name in names:
                raise GameFormatError(f"duplicate vertex '{name}'", lineno, name_col)
            owner = _parse_index(tokens[3][0], lineno, tokens[3][1])
            if owner >= header[0]:
                raise GameFormatError(f"owner {owner} is not a player", lineno, tokens[3][1])
            if len(tokens) == 5:
                if tokens[4][0] != "initial":
                    raise GameFormatError(f"unexpected token '{tokens[4][0]}'", lineno, tokens[4][1])
                initials.append(len(names))
            names.append(name)
            owners.append(owner)

        elif keyword == "edge":
            if header is None:
                raise GameFormatError("edge before players header", lineno, col)
            expected = 3 + header[0]
            if len(tokens) != expected:
                raise GameFormatError(
                    f"edge needs {header[0]} rewards, got {len(tokens) - 3}", lineno, col
                )
            rewards = [_parse_rational(tok, lineno, c) for tok, c in tokens[3:]]
            raw_edges.append((tokens[1][0], tokens[2][0], rewards, lineno, tokens[1][1], tokens[2][1]))

        else:
            raise GameFormatError(f"unknown keyword '{keyword}'", lineno, col)

    if header is None:
        raise GameFormatError("missing 'players <k> leader <index>' header (no leader)", 1)
    if len(initials) > 1:
        raise GameValidationError(["more than one initial vertex"])
    if not initials:
        raise GameValidationError(["no initial vertex"])

    index = {name: i for i, name in enumerate(names)}
    edges: list[tuple[int, int]] = []
    rewards: list[tuple[Fraction, ...]] = []
    for src, tgt, values, lineno, src_col, tgt_col in raw_edges:
        if src not in index:
            raise GameFormatError(f"unknown vertex '{src}'", lineno, src_col)
        if tgt not in index:
            raise GameFormatError(f"unknown vertex '{tgt}'", lineno, tgt_col)
        edges.append((index[src], index[tgt]))
        rewards.append(tuple(values))

    arena = GameArena(
        players=make_players(*header),
        vertices=tuple(names),
        owner=tuple(owners),
        initial=initials[0],
        edges=tuple(edges),
        rewards=tuple(rewards),
    )
    violations = validate(arena)
    if violations:
        raise GameValidationError(violations)
    logger.debug("Parsed arena: %d vertices, %d edges", arena.n_vertices, len(arena.edges))
    return arena


def validate(arena: GameArena) -> list[str]:
    """Return every invariant violation of the arena; an empty list means valid."""
    violations = []
    k = len(arena.players)
    n = len(arena.vertices)

    leaders = [p.index for p in arena.players if p.is_leader]
    if len(leaders) != 1:
        violations.append(f"expected exactly one leader, found {len(leaders)}")
    if [p.index for p in arena.players] != list(range(k)):
        violations.append("player indices must be 0..k-1 in order")

    if len(arena.owner) != n:
        violations.append("owner is not total on vertices")
    for v, p in enumerate(arena.owner):
        if not 0 <= p < k:
            violations.append(f"vertex '{arena.vertices[v]}' has unknown owner {p}")
    if not 0 <= arena.initial < n:
        violations.append("initial vertex is not a vertex")

    if len(arena.rewards) != len(arena.edges):
        violations.append("reward table does not cover every edge")
    seen = set()
    has_successor = [False] * n
    for e, (src, tgt) in enumerate(arena.edges):
        if not (0 <= src < n and 0 <= tgt < n):
            violations.append(f"edge {e} references an unknown vertex")
            continue
        if (src, tgt) in seen:
            violations.append(
                f"duplicate edge {arena.vertices[src]} -> {arena.vertices[tgt]}"
            )
        seen.add((src, tgt))
        has_successor[src] = True
        if e < len(arena.rewards) and len(arena.rewards[e]) != k:
            violations.append(f"edge {e} has {len(arena.rewards[e])} rewards, expected {k}")

    for v in range(n):
        if not has_successor[v]:
            violations.append(f"dead-end vertex '{arena.vertices[v]}' has no successor")
    return violations


def format_game(arena: GameArena, comment: str | None = None) -> str:
    """Serialize an arena to the text format accepted by ``parse_game``."""
    lines = []
    if comment:
        lines.extend(f"# {c}" for c in comment.splitlines())
    lines.append(f"players {arena.n_players} leader {arena.leader}")
    for v, name in enumerate(arena.vertices):
        suffix = " initial" if v == arena.initial else ""
        lines.append(f"vertex {name} owner {arena.owner[v]}{suffix}")
    for (src, tgt), rewards in zip(arena.edges, arena.rewards, strict=True):
        values = " ".join(str(r) for r in rewards)
        lines.append(f"edge {arena.vertices[src]} {arena.vertices[tgt]} {values}")
    return "\n".join(lines) + "\n"


def fingerprint(arena: GameArena) -> str:
    """Content hash used to tie reports to the arena they were computed on."""
    return hashlib.sha256(format_game(arena).encode()).hexdigest()


def _projection(arena: GameArena, player: int) -> ZeroSumGame:
    return ZeroSumGame(
        base=arena,
        protagonist=player,
        reward=tuple(arena.reward(player, e) for e in range(len(arena.edges))),
    )


def punishment_game(arena: GameArena, player: int) -> ZeroSumGame:
    """Build G_p for a follower: p owns V_p, all other vertices belong to the coalition."""
    if arena.players[player].is_leader:
        raise ValueError("punishment_game expects a follower, got the leader")
    return _projection(arena, player)


def leader_game(arena: GameArena) -> ZeroSumGame:
    """The leader's own punishment game G_l, used by nash mode."""
    return _projection(arena, arena.leader)


def max_reward(arena: GameArena) -> RMax:
    return RMax(max(r for rewards in arena.rewards for r in rewards))
