"""Exception hierarchy shared by the solver and the CLI."""

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_PARSE = 2
EXIT_INFEASIBLE = 3
EXIT_INVARIANT = 4


class MmpgError(Exception):
    """Base error; the CLI exits with ``exit_code`` when one escapes a command."""

    exit_code = EXIT_INVARIANT


class GameFormatError(MmpgError):
    """Syntax error in a game description."""

    exit_code = EXIT_PARSE

    def __init__(self, message: str, line: int, column: int = 1):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class GameValidationError(MmpgError):
    """Arena violates one or more structural invariants."""

    exit_code = EXIT_PARSE

    def __init__(self, violations: list[str]):
        super().__init__("; ".join(violations))
        self.violations = violations


class ReportMismatchError(MmpgError):
    """Report was produced for a different arena."""

    exit_code = EXIT_PARSE


class MalformedProgramError(MmpgError):
    """Linear program references an undeclared variable."""

    exit_code = EXIT_INVARIANT


class InfeasibleError(MmpgError):
    """No candidate region admits a feasible constraint system."""

    exit_code = EXIT_INFEASIBLE


class InvariantViolation(MmpgError):
    """An internal guarantee failed at runtime."""

    exit_code = EXIT_INVARIANT
