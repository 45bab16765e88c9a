"""Exact rational linear programming: certified HiGHS vertices, Bland simplex fallback."""

import itertools
import logging
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.optimize import linprog

from .errors import MalformedProgramError

logger = logging.getLogger(__name__)

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

RELATIONS = ("=", ">=", "<=")

HIGHS = "highs"
SIMPLEX = "simplex"

_HIGHS_TOL = 1e-9
_DUAL_DENOMINATOR = 10**6


@dataclass(frozen=True)
class Constraint:
    """``sum(coeffs[x] * x) <relation> rhs``."""

    coeffs: dict[str, Fraction]
    relation: str
    rhs: Fraction
    name: str = ""

    def lhs(self, assignment: dict[str, Fraction]) -> Fraction:
        return sum((c * assignment[x] for x, c in self.coeffs.items()), Fraction(0))

    def holds(self, assignment: dict[str, Fraction]) -> bool:
        value = self.lhs(assignment)
        if self.relation == "=":
            return value == self.rhs
        if self.relation == ">=":
            return value >= self.rhs
        return value <= self.rhs


@dataclass
class LinearProgram:
    """Maximisation problem; every declared variable is implicitly nonnegative."""

    variables: list[str] = field(default_factory=list)
    constraints: list[Constraint] = field(default_factory=list)
    objective: dict[str, Fraction] = field(default_factory=dict)

    def add_variable(self, name: str) -> str:
        if name in self.variables:
            raise MalformedProgramError(f"variable {name} declared twice")
        self.variables.append(name)
        return name

    def add_constraint(
        self, coeffs: dict[str, Fraction], relation: str, rhs, name: str = ""
    ) -> None:
        if relation not in RELATIONS:
            raise MalformedProgramError(f"unknown relation '{relation}'")
        terms = {x: Fraction(c) for x, c in coeffs.items() if c != 0}
        self.constraints.append(Constraint(terms, relation, Fraction(rhs), name))

    def check_declared(self) -> None:
        declared = set(self.variables)
        for c in self.constraints:
            for x in c.coeffs:
                if x not in declared:
                    raise MalformedProgramError(f"constraint {c.name or '?'} uses undeclared {x}")
        for x in self.objective:
            if x not in declared:
                raise MalformedProgramError(f"objective uses undeclared {x}")


@dataclass
class LpOutcome:
    """Solver status plus optimal assignment and value when optimal."""

    status: str
    assignment: dict[str, Fraction] = field(default_factory=dict)
    value: Fraction | None = None


class _Tableau:
    """Dense simplex tableau over Fractions, maximising ``cost``."""

    def __init__(self, rows: list[list[Fraction]], rhs: list[Fraction], basis: list[int]):
        self.rows = rows
        self.rhs = rhs
        self.basis = basis
        self.cost: list[Fraction] = []
        self.value = Fraction(0)

    def set_objective(self, c: list[Fraction]) -> None:
        """Install objective coefficients and price out the current basis."""
        reduced = list(c)
        value = Fraction(0)
        for i, b in enumerate(self.basis):
            cb = c[b]
            if cb:
                row = self.rows[i]
                reduced = [d - cb * a for d, a in zip(reduced, row, strict=True)]
                value += cb * self.rhs[i]
        self.cost = reduced
        self.value = value

    def pivot(self, r: int, col: int) -> None:
        row = self.rows[r]
        piv = row[col]
        row = [a / piv for a in row]
        self.rows[r] = row
        self.rhs[r] /= piv
        for i, other in enumerate(self.rows):
            f = other[col]
            if i != r and f:
                self.rows[i] = [a - f * b for a, b in zip(other, row, strict=True)]
                self.rhs[i] -= f * self.rhs[r]
        f = self.cost[col]
        if f:
            self.cost = [d - f * b for d, b in zip(self.cost, row, strict=True)]
            self.value += f * self.rhs[r]
        self.basis[r] = col

    def run(self, allowed: int) -> str:
        """Pivot with Bland's rule over columns < ``allowed`` until optimal or unbounded."""
        while True:
            entering = next((j for j in range(allowed) if self.cost[j] > 0), None)
            if entering is None:
                return OPTIMAL
            leaving = None
            best = None
            for i, row in enumerate(self.rows):
                a = row[entering]
                if a > 0:
                    ratio = self.rhs[i] / a
                    if (
                        best is None
                        or ratio < best
                        or (ratio == best and self.basis[i] < self.basis[leaving])
                    ):
                        best, leaving = ratio, i
            if leaving is None:
                return UNBOUNDED
            self.pivot(leaving, entering)

    def drop_row(self, r: int) -> None:
        del self.rows[r]
        del self.rhs[r]
        del self.basis[r]


def _fixed_zero(prog: LinearProgram) -> set[str]:
    """Variables pinned by a single-variable ``x = 0`` row; their columns are dropped."""
    fixed = set()
    for c in prog.constraints:
        if c.relation == "=" and c.rhs == 0 and len(c.coeffs) == 1:
            fixed.update(c.coeffs)
    return fixed


@dataclass
class _Reduced:
    """Program after dropping pinned columns and the rows they settle."""

    columns: list[str]
    col_of: dict[str, int]
    active: list[Constraint]


def _presolve(prog: LinearProgram) -> _Reduced | None:
    """None when a row over pinned columns alone already fails."""
    fixed = _fixed_zero(prog)
    columns = [x for x in prog.variables if x not in fixed]
    col_of = {x: j for j, x in enumerate(columns)}
    active = [c for c in prog.constraints if not set(c.coeffs) <= fixed]
    for c in prog.constraints:
        if set(c.coeffs) <= fixed and not c.holds(dict.fromkeys(c.coeffs, Fraction(0))):
            return None
    return _Reduced(columns, col_of, active)


def solve_lp(prog: LinearProgram, method: str = HIGHS) -> LpOutcome:
    """Maximise the objective exactly; deterministic for identical programs.

    With ``method="highs"`` HiGHS proposes an optimal vertex, which is rebuilt in
    rationals and accepted only with an exact primal and dual certificate.
    Otherwise, and with ``method="simplex"``, the exact two-phase simplex decides.
    """
    if method not in (HIGHS, SIMPLEX):
        raise ValueError(f"Unknown LP method '{method}', expected {HIGHS} or {SIMPLEX}")
    prog.check_declared()
    reduced = _presolve(prog)
    if reduced is None:
        return LpOutcome(INFEASIBLE)
    if method == HIGHS and reduced.columns and reduced.active:
        outcome = _solve_highs(prog, reduced)
        if outcome is not None:
            return outcome
        logger.debug("HiGHS vertex not certified, falling back to the exact simplex")
    return _solve_simplex(prog, reduced)


def _solve_sparse(
    rows: list[dict[int, Fraction]], rhs: list[Fraction]
) -> tuple[dict[int, Fraction], set[int]] | None:
    """Gaussian elimination on sparse rows; unknowns left free are set to zero.

    Returns the solution with the set of pivot unknowns, or None if inconsistent.
    """
    pivots: list[tuple[int, dict[int, Fraction], Fraction]] = []
    for row, b in zip(rows, rhs, strict=True):
        row = dict(row)
        for col, prow, pb in pivots:
            f = row.pop(col, None)
            if f is None:
                continue
            for j, a in prow.items():
                v = row.get(j, Fraction(0)) - f * a
                if v:
                    row[j] = v
                else:
                    row.pop(j, None)
            b -= f * pb
        if not row:
            if b != 0:
                return None
            continue
        col = min(row)
        p = row.pop(col)
        pivots.append((col, {j: a / p for j, a in row.items()}, b / p))

    solution: dict[int, Fraction] = {}
    for col, prow, pb in reversed(pivots):
        solution[col] = pb - sum(
            (a * solution.get(j, Fraction(0)) for j, a in prow.items()), Fraction(0)
        )
    return solution, {col for col, _, _ in pivots}


def _float_system(constraints: list[Constraint], index: dict[str, int]) -> tuple[dict, list, list]:
    """linprog keyword arguments; ``>=`` rows are negated into ``<=`` form."""
    k = len(index)
    a_ub, b_ub, a_eq, b_eq = [], [], [], []
    ub_rows, eq_rows = [], []
    for i, con in enumerate(constraints):
        row = np.zeros(k)
        for x, a in con.coeffs.items():
            if x in index:
                row[index[x]] = float(a)
        if con.relation == "=":
            a_eq.append(row)
            b_eq.append(float(con.rhs))
            eq_rows.append(i)
        else:
            sign = 1.0 if con.relation == "<=" else -1.0
            a_ub.append(sign * row)
            b_ub.append(sign * float(con.rhs))
            ub_rows.append(i)
    kwargs = {
        "A_ub": np.array(a_ub) if a_ub else None,
        "b_ub": np.array(b_ub) if b_ub else None,
        "A_eq": np.array(a_eq) if a_eq else None,
        "b_eq": np.array(b_eq) if b_eq else None,
    }
    return kwargs, ub_rows, eq_rows


def _solve_highs(prog: LinearProgram, reduced: _Reduced) -> LpOutcome | None:
    """Exact outcome from a HiGHS vertex, or None when it cannot be certified."""
    columns, col_of, active = reduced.columns, reduced.col_of, reduced.active
    k = len(columns)
    cost = [Fraction(0)] * k
    for x, a in prog.objective.items():
        if x in col_of:
            cost[col_of[x]] = Fraction(a)

    kwargs, ub_rows, eq_rows = _float_system(active, col_of)
    res = linprog(
        -np.array([float(c) for c in cost]), bounds=(0, None), method="highs-ds", **kwargs
    )
    if res.status == 2:
        return LpOutcome(INFEASIBLE)
    if res.status == 3:
        return LpOutcome(UNBOUNDED)
    if res.status != 0:
        return None

    # standard form: column k + i is the slack of inequality row i
    sign = {i: (Fraction(1) if active[i].relation == "<=" else Fraction(-1)) for i in ub_rows}
    basic = {j for j in range(k) if res.x[j] > _HIGHS_TOL}
    basic |= {k + i for t, i in enumerate(ub_rows) if res.ineqlin.residual[t] > _HIGHS_TOL}

    rows = []
    for i, con in enumerate(active):
        row = {col_of[x]: a for x, a in con.coeffs.items() if col_of.get(x, -1) in basic}
        if k + i in basic:
            row[k + i] = sign[i]
        rows.append(row)
    solved = _solve_sparse(rows, [con.rhs for con in active])
    if solved is None or solved[1] != basic:
        return None
    point = solved[0]
    if any(v < 0 for v in point.values()):
        return None

    assignment = dict.fromkeys(prog.variables, Fraction(0))
    for j in range(k):
        assignment[columns[j]] = point.get(j, Fraction(0))
    if check_solution(prog, assignment):
        return None
    value = sum((Fraction(a) * assignment[x] for x, a in prog.objective.items()), Fraction(0))

    by_column: list[dict[int, Fraction]] = [{} for _ in range(k)]
    for i, con in enumerate(active):
        for x, a in con.coeffs.items():
            if x in col_of:
                by_column[col_of[x]][i] = a

    def certifies(y: dict[int, Fraction]) -> bool:
        if any(sign[i] * y.get(i, 0) < 0 for i in ub_rows):
            return False
        for j in range(k):
            priced = sum((a * y.get(i, Fraction(0)) for i, a in by_column[j].items()), Fraction(0))
            if cost[j] > priced:
                return False
        return sum((con.rhs * y.get(i, Fraction(0)) for i, con in enumerate(active)), Fraction(0)) == value

    marginals = {}
    for t, i in enumerate(eq_rows):
        marginals[i] = -res.eqlin.marginals[t]
    for t, i in enumerate(ub_rows):
        marginals[i] = -float(sign[i]) * res.ineqlin.marginals[t]
    rounded = {i: Fraction(m).limit_denominator(_DUAL_DENOMINATOR) for i, m in marginals.items()}
    if certifies(rounded):
        return LpOutcome(OPTIMAL, assignment, value)

    # dual from the basic columns, rows left free priced at zero
    dual_rows, dual_rhs = [], []
    for j in sorted(basic):
        if j < k:
            dual_rows.append(dict(by_column[j]))
            dual_rhs.append(cost[j])
        else:
            dual_rows.append({j - k: sign[j - k]})
            dual_rhs.append(Fraction(0))
    dual = _solve_sparse(dual_rows, dual_rhs)
    if dual is not None and certifies(dual[0]):
        return LpOutcome(OPTIMAL, assignment, value)
    return None


def _solve_simplex(prog: LinearProgram, reduced: _Reduced) -> LpOutcome:
    """Two-phase Bland simplex over the reduced program."""
    columns, col_of, active = reduced.columns, reduced.col_of, reduced.active
    m = len(active)
    n_struct = len(columns)
    n_slack = sum(1 for c in active if c.relation != "=")
    n_art = sum(1 for c in active if c.relation != "<=" or c.rhs < 0)
    width = n_struct + n_slack + n_art

    rows: list[list[Fraction]] = []
    rhs: list[Fraction] = []
    basis: list[int] = []
    artificial_rows: list[int] = []
    slack = n_struct
    art = n_struct + n_slack
    for i, c in enumerate(active):
        row = [Fraction(0)] * width
        for x, a in c.coeffs.items():
            if x in col_of:
                row[col_of[x]] = a
        b = c.rhs
        relation = c.relation
        if c.relation != "=":
            row[slack] = Fraction(1) if c.relation == "<=" else Fraction(-1)
            slack += 1
        if b < 0:
            row = [-a for a in row]
            b = -b
            relation = {"<=": ">=", ">=": "<=", "=": "="}[relation]
        if relation == "<=":
            basis.append(slack - 1)
        else:
            row[art] = Fraction(1)
            basis.append(art)
            artificial_rows.append(i)
            art += 1
        rows.append(row)
        rhs.append(b)

    tab = _Tableau(rows, rhs, basis)
    n_art = art - (n_struct + n_slack)
    width = n_struct + n_slack + n_art
    for row in tab.rows:
        del row[width:]

    if artificial_rows:
        phase1 = [Fraction(0)] * (n_struct + n_slack) + [Fraction(-1)] * n_art
        tab.set_objective(phase1)
        tab.run(width)
        if tab.value < 0:
            logger.debug("LP infeasible after phase 1 (%d rows)", m)
            return LpOutcome(INFEASIBLE)
        first_art = n_struct + n_slack
        r = 0
        while r < len(tab.rows):
            if tab.basis[r] >= first_art:
                col = next((j for j in range(first_art) if tab.rows[r][j] != 0), None)
                if col is None:
                    tab.drop_row(r)
                    continue
                tab.pivot(r, col)
            r += 1
        for row in tab.rows:
            del row[first_art:]
        width = first_art

    costs = [Fraction(0)] * width
    for x, a in prog.objective.items():
        if x in col_of:
            costs[col_of[x]] = Fraction(a)
    tab.set_objective(costs)
    status = tab.run(width)
    if status == UNBOUNDED:
        return LpOutcome(UNBOUNDED)

    assignment = dict.fromkeys(prog.variables, Fraction(0))
    for i, b in enumerate(tab.basis):
        if b < n_struct:
            assignment[columns[b]] = tab.rhs[i]
    value = sum((Fraction(a) * assignment[x] for x, a in prog.objective.items()), Fraction(0))
    return LpOutcome(OPTIMAL, assignment, value)


def check_solution(prog: LinearProgram, assignment: dict[str, Fraction]) -> list[str]:
    """Exact feasibility check; returns the violated constraints, empty when feasible."""
    violations = []
    for x in prog.variables:
        if assignment[x] < 0:
            violations.append(f"nonnegativity of {x} ({assignment[x]})")
    for i, c in enumerate(prog.constraints):
        if not c.holds(assignment):
            label = c.name or f"row {i}"
            violations.append(f"{label}: {c.lhs(assignment)} {c.relation} {c.rhs} fails")
    return violations


def _solve_square(matrix: list[list[Fraction]], rhs: list[Fraction]) -> list[Fraction] | None:
    """Gauss-Jordan elimination; None when the system is singular."""
    n = len(matrix)
    aug = [list(row) + [b] for row, b in zip(matrix, rhs, strict=True)]
    for col in range(n):
        pivot = next((r for r in range(col, n) if aug[r][col] != 0), None)
        if pivot is None:
            return None
        aug[col], aug[pivot] = aug[pivot], aug[col]
        p = aug[col][col]
        aug[col] = [a / p for a in aug[col]]
        for r in range(n):
            if r != col and aug[r][col] != 0:
                f = aug[r][col]
                aug[r] = [a - f * b for a, b in zip(aug[r], aug[col], strict=True)]
    return [aug[r][n] for r in range(n)]


def brute_force_optimum(prog: LinearProgram) -> LpOutcome:
    """Best basic feasible point over all hyperplane intersections; for tiny programs.

    Unboundedness is not detected: a feasible program reports its best vertex.
    """
    prog.check_declared()
    names = prog.variables
    k = len(names)
    planes = [([c.coeffs.get(x, Fraction(0)) for x in names], c.rhs) for c in prog.constraints]
    planes += [([Fraction(int(i == j)) for j in range(k)], Fraction(0)) for i in range(k)]

    best: LpOutcome | None = None
    for subset in itertools.combinations(planes, k):
        point = _solve_square([p[0] for p in subset], [p[1] for p in subset])
        if point is None:
            continue
        assignment = dict(zip(names, point, strict=True))
        if check_solution(prog, assignment):
            continue
        value = sum((Fraction(a) * assignment[x] for x, a in prog.objective.items()), Fraction(0))
        if best is None or value > best.value:
            best = LpOutcome(OPTIMAL, assignment, value)
    return best or LpOutcome(INFEASIBLE)


def _fmt(coeff: Fraction) -> str:
    return f"{float(coeff):.17g}"


def _expression(coeffs: dict[str, Fraction]) -> str:
    if not coeffs:
        return "0"
    parts = []
    for x, c in coeffs.items():
        sign = "-" if c < 0 else "+"
        parts.append(f"{sign} {_fmt(abs(c))} {x}")
    text = " ".join(parts)
    return text[2:] if text.startswith("+ ") else text


def to_lp_text(prog: LinearProgram) -> str:
    """Render in the CPLEX LP text layout (decimal coefficients) for external solvers."""
    lines = ["Maximize", f" obj: {_expression(prog.objective)}", "Subject To"]
    for i, c in enumerate(prog.constraints):
        op = {"=": "=", ">=": ">=", "<=": "<="}[c.relation]
        lines.append(f" {c.name or f'c{i}'}: {_expression(c.coeffs)} {op} {_fmt(c.rhs)}")
    lines.append("Bounds")
    lines.extend(f" {x} >= 0" for x in prog.variables)
    lines.append("End")
    return "\n".join(lines) + "\n"


def float_cross_check(prog: LinearProgram, outcome: LpOutcome, tol: float = 1e-7) -> bool:
    """Re-solve in floating point with HiGHS and compare against the exact outcome."""
    index = {x: j for j, x in enumerate(prog.variables)}
    c = np.zeros(len(index))
    for x, a in prog.objective.items():
        c[index[x]] = -float(a)

    kwargs, _, _ = _float_system(prog.constraints, index)
    res = linprog(c, bounds=(0, None), method="highs", **kwargs)
    status = {0: OPTIMAL, 2: INFEASIBLE, 3: UNBOUNDED}.get(res.status)
    if status != outcome.status:
        logger.warning("Cross-check status mismatch: exact %s, highs %s", outcome.status, status)
        return False
    if status != OPTIMAL:
        return True
    agree = abs(-res.fun - float(outcome.value)) <= tol * max(1.0, abs(float(outcome.value)))
    if not agree:
        logger.warning("Cross-check value mismatch: exact %s, highs %.9g", outcome.value, -res.fun)
    return agree
