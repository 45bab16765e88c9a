"""Shared test fixtures for mmpg."""

import pytest

from src.arena import parse_game
from src.generators import builtin, builtin_text

LOOP_GAME = """\
players 2 leader 1
vertex a owner 0 initial
edge a a 0 0
"""


@pytest.fixture
def fig1():
    """Three-player example where incentives beat the leader equilibrium."""
    return builtin("fig1")


@pytest.fixture
def fig2():
    """Four followers on a token ring, leader-owned outer cycles."""
    return builtin("fig2")


@pytest.fixture
def secure():
    return builtin("secure")


@pytest.fixture
def client_server():
    return builtin("client_server")


@pytest.fixture
def loop_game():
    """Smallest legal arena: one vertex with a zero self-loop."""
    return parse_game(LOOP_GAME)


@pytest.fixture
def game_file(tmp_path):
    """Write a built-in (or literal) game to a temporary file and return its path."""

    def _write(name_or_text: str) -> str:
        if "\n" in name_or_text:
            text, name = name_or_text, "game"
        else:
            text, name = builtin_text(name_or_text), name_or_text
        path = tmp_path / f"{name}.game"
        path.write_text(text)
        return str(path)

    return _write
