"""CLI interface for the mean-payoff equilibrium solver."""

import csv
import importlib.resources
import logging
import shutil
import sys
import time
from fractions import Fraction
from pathlib import Path

import click
import yaml
from dotenv import load_dotenv

from .errors import EXIT_USAGE, MmpgError

load_dotenv()

CONFIG_DIR = Path.home() / ".config" / "mmpg"

logger = logging.getLogger(__name__)


def setup_logging(verbose: bool = False, level: str = "WARNING") -> None:
    """Configure logging based on verbosity."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else getattr(logging, level.upper(), logging.WARNING),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        datefmt="%H:%M:%S",
    )


def resolve_config_path(explicit: str | None) -> Path:
    """Resolve the config file path.

    Priority: --config flag > ~/.config/mmpg/config.yaml > ./config.yaml > packaged default
    """
    if explicit:
        path = Path(explicit)
        if not path.exists():
            raise click.BadParameter(f"Config file not found: {explicit}", param_hint="--config")
        return path

    xdg_config = CONFIG_DIR / "config.yaml"
    if xdg_config.exists():
        return xdg_config

    cwd_config = Path("config.yaml")
    if cwd_config.exists():
        return cwd_config

    return Path(str(importlib.resources.files("src").joinpath("default_config.yaml")))


def load_config(config_path: Path) -> dict:
    """Load configuration from YAML file."""
    with open(config_path) as f:
        return yaml.safe_load(f) or {}


def parse_fraction(value: str, name: str) -> Fraction:
    try:
        return Fraction(value)
    except (ValueError, ZeroDivisionError):
        raise click.BadParameter(f"'{value}' is not a rational number", param_hint=name) from None


def parse_range(value: str, name: str) -> range:
    """Inclusive ``a:b`` range; a single integer means just that value."""
    try:
        if ":" in value:
            lo, hi = value.split(":", 1)
            return range(int(lo), int(hi) + 1)
        return range(int(value), int(value) + 1)
    except ValueError:
        raise click.BadParameter(f"'{value}' is not a range like 3:8", param_hint=name) from None


def resolve_jobs(ctx: click.Context, jobs: int | None) -> int:
    if jobs is not None:
        return max(1, jobs)
    return max(1, int(ctx.obj["config"].get("solver", {}).get("jobs", 1)))


def load_arena(path: str):
    from .arena import parse_game

    return parse_game(Path(path).read_text())


class MmpgGroup(click.Group):
    """Root group mapping usage errors to exit 1 and solver errors to their own codes."""

    def main(self, args=None, prog_name=None, complete_var=None, standalone_mode=True, **extra):
        try:
            rv = super().main(args, prog_name, complete_var, standalone_mode=False, **extra)
        except click.UsageError as exc:
            exc.show()
            sys.exit(EXIT_USAGE)
        except click.ClickException as exc:
            exc.show()
            sys.exit(exc.exit_code)
        except click.Abort:
            click.echo("Aborted!", err=True)
            sys.exit(EXIT_USAGE)
        except MmpgError as exc:
            click.echo(f"Error: {exc}", err=True)
            sys.exit(exc.exit_code)
        if standalone_mode:
            sys.exit(rv if isinstance(rv, int) else 0)
        return rv


jobs_option = click.option(
    "-j", "--jobs", type=int, default=None, envvar="MMPG_JOBS", help="Parallel LP workers"
)


@click.group(cls=MmpgGroup)
@click.option("-v", "--verbose", is_flag=True, help="Enable verbose output")
@click.option("-c", "--config", default=None, help="Path to config file")
@click.pass_context
def main(ctx: click.Context, verbose: bool, config: str | None) -> None:
    """mmpg - equilibria of multi-player mean-payoff games."""
    ctx.ensure_object(dict)
    config_path = resolve_config_path(config)
    ctx.obj["config_path"] = str(config_path)
    ctx.obj["config"] = load_config(config_path)
    ctx.obj["verbose"] = verbose
    setup_logging(verbose, ctx.obj["config"].get("logging", {}).get("level", "WARNING"))


@main.command()
def init() -> None:
    """Initialize configuration in ~/.config/mmpg/."""
    target = CONFIG_DIR / "config.yaml"
    if target.exists():
        click.echo(f"Config already exists: {target}")
        return

    CONFIG_DIR.mkdir(parents=True, exist_ok=True)
    default_config = importlib.resources.files("src").joinpath("default_config.yaml")
    shutil.copy2(str(default_config), str(target))
    click.echo(f"Created config: {target}")


@main.command()
@click.argument("game", type=click.Path(exists=True, dir_okay=False))
@click.option("-p", "--player", type=int, required=True, help="Protagonist player index")
@click.option("--check", is_flag=True, help="Compare against brute force (small games only)")
def values(game: str, player: int, check: bool) -> None:
    """Print the punishment value of every vertex for one player."""
    from .arena import leader_game, punishment_game
    from .errors import InvariantViolation
    from .zerosum import brute_force_values, vertex_values

    arena = load_arena(game)
    if not 0 <= player < arena.n_players:
        raise click.BadParameter(f"player {player} does not exist", param_hint="--player")
    g = leader_game(arena) if player == arena.leader else punishment_game(arena, player)
    result = vertex_values(g)
    for v, name in enumerate(arena.vertices):
        click.echo(f"{name} {result[v]}")

    if check:
        oracle = brute_force_values(g)
        if oracle.values != result.values:
            raise InvariantViolation("vertex values disagree with the brute-force oracle")
        click.echo("brute-force check: ok")


@main.command()
@click.argument("game", type=click.Path(exists=True, dir_okay=False))
@click.option(
    "-m",
    "--mode",
    type=click.Choice(["incentive", "leader", "nash", "secure"]),
    default=None,
    help="Equilibrium notion (default from config)",
)
@click.option("-e", "--epsilon", default=None, help="Slack for secure mode, e.g. 1/100")
@jobs_option
@click.option("-r", "--report", "report_path", default=None, help="Write JSON report here")
@click.option("--psp", is_flag=True, help="Print the punishment table")
@click.option("--cross-check", is_flag=True, help="Re-solve the optimal LP with HiGHS")
@click.option("--dump-lp", default=None, help="Write the optimal LP in LP text format")
@click.pass_context
def solve(
    ctx: click.Context,
    game: str,
    mode: str | None,
    epsilon: str | None,
    jobs: int | None,
    report_path: str | None,
    psp: bool,
    cross_check: bool,
    dump_lp: str | None,
) -> None:
    """Compute the leader-optimal equilibrium in one mode."""
    from .arena import fingerprint
    from .equilibria import SECURE, EquilibriumSolver, Mode, build_constraint_system
    from .errors import InvariantViolation
    from .lp import float_cross_check, solve_lp, to_lp_text
    from .play import psp_description, punishment_strategies
    from .report import RunReport, render_result, write_report

    mode = mode or ctx.obj["config"].get("solver", {}).get("mode", "incentive")
    if mode == "secure":
        if epsilon is None:
            raise click.UsageError("--mode secure needs --epsilon")
        try:
            chosen = Mode(SECURE, parse_fraction(epsilon, "--epsilon"))
        except ValueError as exc:
            raise click.BadParameter(str(exc), param_hint="--epsilon") from None
    else:
        chosen = Mode(mode)

    arena = load_arena(game)
    solver = EquilibriumSolver(arena, config=ctx.obj["config"], jobs=resolve_jobs(ctx, jobs))
    result = solver.solve(chosen)

    for line in render_result(arena, result):
        click.echo(line)

    if psp:
        description = psp_description(arena, result, punishment_strategies(arena))
        click.echo("")
        click.echo(f"Punishment table (compliant punishers topped up to {description.top_up}):")
        for deviator, strategy in description.punishments.items():
            moves = ", ".join(
                f"{arena.vertices[v]}->{arena.vertices[arena.edges[e][1]]}"
                for v, e in sorted(strategy.choice.items())
            )
            click.echo(f"  player {deviator} deviates: {moves}")

    if cross_check or dump_lp:
        lp_mode = Mode("incentive") if chosen.kind == SECURE else chosen
        prog = build_constraint_system(arena, result.region, lp_mode)
        if dump_lp:
            Path(dump_lp).write_text(to_lp_text(prog))
            click.echo(f"\nLP written to {dump_lp}")
        if cross_check:
            if not float_cross_check(prog, solve_lp(prog)):
                raise InvariantViolation("floating point cross-check disagrees with exact optimum")
            click.echo("\nHiGHS cross-check: ok")

    if report_path:
        report = RunReport(fingerprint(arena), {chosen.kind: result}, dict(solver.timings))
        write_report(report_path, arena, report)
        click.echo(f"\nReport written to {report_path}")


@main.command()
@click.argument("game", type=click.Path(exists=True, dir_okay=False))
@jobs_option
@click.option("-r", "--report", "report_path", default=None, help="Write JSON report here")
@click.pass_context
def compare(ctx: click.Context, game: str, jobs: int | None, report_path: str | None) -> None:
    """Leader payoff under nash, leader and incentive equilibria."""
    from .arena import fingerprint
    from .equilibria import EquilibriumSolver, compare_modes
    from .report import RunReport, render_comparison, write_report

    arena = load_arena(game)
    solver = EquilibriumSolver(arena, config=ctx.obj["config"], jobs=resolve_jobs(ctx, jobs))
    results = compare_modes(solver)
    for line in render_comparison(results):
        click.echo(line)

    if report_path:
        write_report(report_path, arena, RunReport(fingerprint(arena), results, dict(solver.timings)))
        click.echo(f"\nReport written to {report_path}")


@main.command()
@click.argument("game", type=click.Path(exists=True, dir_okay=False))
@click.argument("report_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--horizon", type=int, default=None, help="Play length to replay")
@click.pass_context
def verify(ctx: click.Context, game: str, report_file: str, horizon: int | None) -> None:
    """Check a report's solutions exactly and replay their plays."""
    from .equilibria import NASH, EquilibriumSolver, bind_region, build_constraint_system
    from .equilibria import solution_assignment
    from .errors import InfeasibleError, InvariantViolation
    from .lp import check_solution
    from .play import check_convergence
    from .report import decimal, load_report

    horizon = horizon or int(ctx.obj["config"].get("play", {}).get("horizon", 10000))
    if horizon < 2:
        raise click.BadParameter("horizon must be at least 2 (too short)", param_hint="--horizon")

    arena = load_arena(game)
    report = load_report(report_file, arena)
    solver = EquilibriumSolver(arena, config=ctx.obj["config"])

    violated: list[str] = []
    diverged: list[str] = []
    for kind, result in report.results.items():
        players = list(arena.followers)
        if kind == NASH:
            players.append(arena.leader)
        region = bind_region(arena, result.region.q, result.region.s, solver.values(players))
        prog = build_constraint_system(arena, region, result.mode)
        violations = check_solution(prog, solution_assignment(arena, result.solution, result.mode))

        click.echo(f"[{kind}]")
        if violations:
            for v in violations:
                click.echo(f"  violated: {v}")
            violated.append(kind)
            continue

        convergence = check_convergence(arena, result, horizon)
        for p in range(arena.n_players):
            expected = convergence.expected[p]
            click.echo(
                f"  player {p}: lp {expected} (~{decimal(expected)})"
                f"  empirical {convergence.empirical[p]:.6g}"
            )
        status = "pass" if convergence.passed else "FAIL"
        click.echo(f"  tolerance {convergence.tolerance:.3g} at horizon {horizon}: {status}")
        if not convergence.passed:
            diverged.append(kind)

    if violated:
        raise InfeasibleError(f"report violates its constraint system in: {', '.join(violated)}")
    if diverged:
        raise InvariantViolation(f"plays did not converge in: {', '.join(diverged)}")
    click.echo("verify: pass")


@main.group()
def generate() -> None:
    """Emit benchmark arenas in the game text format."""


def _emit(text: str, output: str | None) -> None:
    if output:
        Path(output).write_text(text)
        click.echo(f"Wrote {output}")
    else:
        click.echo(text, nl=False)


@generate.command("token-ring")
@click.option("--n", "n", type=int, required=True, help="Players / inner ring length")
@click.option("--d", "d", type=int, required=True, help="Outer cycle length")
@click.option("-o", "--output", default=None, help="Output file (default: stdout)")
def generate_token_ring(n: int, d: int, output: str | None) -> None:
    """Token-ring arena with n players and outer cycles of length d."""
    from .arena import format_game
    from .generators import TokenRingParams, token_ring

    try:
        params = TokenRingParams(n, d)
    except ValueError as exc:
        raise click.BadParameter(str(exc)) from None
    _emit(format_game(token_ring(params), comment=f"token ring n={n} d={d}"), output)


@generate.command("random")
@click.option("--seed", type=int, required=True, help="Random seed")
@click.option("--vertices", type=int, required=True, help="Number of vertices")
@click.option("--players", type=int, default=3, show_default=True, help="Number of players")
@click.option("-o", "--output", default=None, help="Output file (default: stdout)")
@click.pass_context
def generate_random(
    ctx: click.Context, seed: int, vertices: int, players: int, output: str | None
) -> None:
    """Seeded random arena with round-robin owners."""
    from .arena import format_game
    from .generators import random_game

    params = _random_params(ctx.obj["config"], seed, vertices, players)
    comment = f"random seed={seed} vertices={vertices} players={players}"
    _emit(format_game(random_game(params), comment=comment), output)


@generate.command("builtin")
@click.argument("name", type=click.Choice(["fig1", "fig2", "secure", "client_server"]))
@click.option("-o", "--output", default=None, help="Output file (default: stdout)")
def generate_builtin(name: str, output: str | None) -> None:
    """One of the checked-in example games."""
    from .generators import builtin_text

    _emit(builtin_text(name), output)


def _random_params(config: dict, seed: int, vertices: int, players: int):
    from .generators import RandomGameParams

    knobs = config.get("random", {})
    try:
        return RandomGameParams(
            seed=seed,
            vertices=vertices,
            players=players,
            density=float(knobs.get("density", 0.5)),
            edges_min=int(knobs.get("edges_min", 1)),
            edges_max=int(knobs.get("edges_max", 3)),
        )
    except ValueError as exc:
        raise click.BadParameter(str(exc)) from None


def _bench_row(arena, jobs: int, config: dict, **params) -> dict:
    from .equilibria import INCENTIVE, LEADER, NASH, EquilibriumSolver, Mode
    from .errors import InfeasibleError

    solver = EquilibriumSolver(arena, config=config, jobs=jobs)
    payoffs = {}
    for kind in (NASH, LEADER, INCENTIVE):
        try:
            payoffs[kind] = solver.solve(Mode(kind)).leader_payoff
        except InfeasibleError:
            logger.warning("No %s equilibrium for %s", kind, params)
    ordered = [payoffs.get(k) for k in (NASH, LEADER, INCENTIVE)]
    row = dict.fromkeys(
        ["family", "n", "d", "seed", "vertices", "players", "frontier_predicted"], ""
    )
    row.update(params)
    row.update(
        {
            "vertices": arena.n_vertices,
            "players": arena.n_players,
            "nash": "" if ordered[0] is None else str(ordered[0]),
            "leader": "" if ordered[1] is None else str(ordered[1]),
            "incentive": "" if ordered[2] is None else str(ordered[2]),
            "ordering_ok": None not in ordered and ordered[0] <= ordered[1] <= ordered[2],
            "incentive_useful": None not in ordered[1:] and ordered[2] > ordered[1],
        }
    )
    for phase in ("values", "enumeration", "lp", "total"):
        row[f"{phase}_s"] = f"{solver.timings[phase]:.4f}"
    return row


def _write_csv(output: str, rows) -> int:
    from .report import BENCH_COLUMNS

    count = 0
    with open(output, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=BENCH_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
            f.flush()
            count += 1
    return count


@main.group()
def bench() -> None:
    """Sweep a benchmark family and write one CSV row per instance."""


@bench.command("token-ring")
@click.option("--n", "n_range", default="3:8", show_default=True, help="Inclusive range a:b")
@click.option("--d", "d_range", default="2:7", show_default=True, help="Inclusive range a:b")
@click.option("-o", "--output", default=None, help="CSV path (default from config)")
@jobs_option
@click.pass_context
def bench_token_ring(
    ctx: click.Context, n_range: str, d_range: str, output: str | None, jobs: int | None
) -> None:
    """Token-ring sweep; frontier_predicted is the closed-form n > d > n(n-1)/(2n-1)."""
    from .generators import TokenRingParams, token_ring

    ns = parse_range(n_range, "--n")
    ds = parse_range(d_range, "--d")
    if any(n < 2 for n in ns) or any(d < 1 for d in ds):
        raise click.BadParameter("token ring needs n >= 2 and d >= 1")
    output = output or ctx.obj["config"].get("bench", {}).get("output", "bench.csv")
    workers = resolve_jobs(ctx, jobs)

    def rows():
        for n in ns:
            for d in ds:
                params = TokenRingParams(n, d)
                start = time.perf_counter()
                row = _bench_row(
                    token_ring(params),
                    workers,
                    ctx.obj["config"],
                    family="token-ring",
                    n=n,
                    d=d,
                    frontier_predicted=params.incentives_useful(),
                )
                logger.info("token ring n=%d d=%d in %.2fs", n, d, time.perf_counter() - start)
                yield row

    count = _write_csv(output, rows())
    click.echo(f"Wrote {count} rows to {output}")


@bench.command("random")
@click.option("--seeds", type=int, default=20, show_default=True, help="Number of seeds")
@click.option("--seed-start", type=int, default=0, show_default=True, help="First seed")
@click.option("--vertices", type=int, default=10, show_default=True, help="Vertices per game")
@click.option("--players", type=int, default=3, show_default=True, help="Players per game")
@click.option("-o", "--output", default=None, help="CSV path (default from config)")
@jobs_option
@click.pass_context
def bench_random(
    ctx: click.Context,
    seeds: int,
    seed_start: int,
    vertices: int,
    players: int,
    output: str | None,
    jobs: int | None,
) -> None:
    """Random-game sweep over consecutive seeds."""
    from .generators import random_game

    if seeds < 0:
        raise click.BadParameter("seeds must be nonnegative", param_hint="--seeds")
    output = output or ctx.obj["config"].get("bench", {}).get("output", "bench.csv")
    workers = resolve_jobs(ctx, jobs)

    def rows():
        for seed in range(seed_start, seed_start + seeds):
            params = _random_params(ctx.obj["config"], seed, vertices, players)
            yield _bench_row(random_game(params), workers, ctx.obj["config"], family="random", seed=seed)

    count = _write_csv(output, rows())
    click.echo(f"Wrote {count} rows to {output}")


if __name__ == "__main__":
    main()
