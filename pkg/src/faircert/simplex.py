"""Exact rational simplex (Bland's rule) over closed linear-inequality systems.

Solves max/min of an affine objective subject to ``LinIneq`` constraints with
free rational variables (internally split into nonnegative pairs). Bland's
pivoting rule guarantees termination; all arithmetic is exact, so feasibility
answers are decisive.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from faircert import kernels
from faircert.numeric import LinExpr, LinIneq, Rat

OPTIMAL = "optimal"
UNBOUNDED = "unbounded"
INFEASIBLE = "infeasible"

try:  # exact C-backed rationals make tableau pivots ~10x faster
    from gmpy2 import mpq as _num
except ImportError:  # pragma: no cover - gmpy2 is optional
    _num = Fraction

_ZERO = _num(0)
_ONE = _num(1)


def _to_fraction(value) -> Fraction:
    return Fraction(int(value.numerator), int(value.denominator))


@dataclass
class LPResult:
    status: str
    value: Rat | None = None
    point: dict | None = None


class _Tableau:
    """Primal simplex tableau for max c.z s.t. Az = b, z >= 0, b >= 0.

    ``data`` holds the constraint rows plus, as its last row, the negated
    reduced costs; the Bland loop itself runs inside the kernel module.
    """

    def __init__(self, rows: list[list], basis: list[int], width: int):
        self.data = rows + [[_ZERO] * width]
        self.basis = basis

    @property
    def obj(self) -> list:
        return self.data[-1]

    def set_objective(self, cost: list) -> None:
        width = len(self.data[0])
        obj = [-c for c in cost] + [_ZERO] * (width - len(cost))
        for i, b in enumerate(self.basis):
            cb = cost[b] if b < len(cost) else _ZERO
            if cb != 0:
                row = self.data[i]
                for t in range(width):
                    if row[t] != 0:
                        obj[t] += cb * row[t]
        self.data[-1] = obj

    def optimize(self, allowed_cols: int) -> str:
        code = kernels.simplex_optimize(self.data, self.basis, allowed_cols)
        return OPTIMAL if code == 0 else UNBOUNDED

    def _pivot(self, pr: int, pc: int) -> None:
        kernels.pivot_dense(self.data, pr, pc)
        self.basis[pr] = pc

    def rhs(self, i: int) -> Fraction:
        return self.data[i][-1]


def solve(
    ineqs: Sequence[LinIneq],
    objective: LinExpr | None = None,
    maximize: bool = True,
) -> LPResult:
    """Optimize ``objective`` over the closed system; ``None`` = feasibility.

    Strict inequalities are rejected here; callers encode them with an
    explicit slack variable (see ``polyhedra.has_interior``).
    """
    variables: set = set()
    clean: list[LinIneq] = []
    for iq in ineqs:
        if iq.strict:
            raise ValueError("simplex operates on closed systems only")
        if iq.is_trivial_true():
            continue
        if iq.is_trivial_false():
            return LPResult(INFEASIBLE)
        variables.update(iq.variables())
        clean.append(iq)
    obj = objective if objective is not None else LinExpr()
    variables.update(obj.variables())
    order = sorted(variables, key=repr)
    col_of = {v: 2 * k for k, v in enumerate(order)}  # +0 positive, +1 negative part
    nz = 2 * len(order)
    m = len(clean)

    # columns: z split vars | slacks | artificials | rhs
    art_rows = [i for i, iq in enumerate(clean) if iq.const > 0]
    na = len(art_rows)
    width = nz + m + na + 1
    rows: list[list] = []
    basis: list[int] = []
    art_col = {}
    for k, i in enumerate(art_rows):
        art_col[i] = nz + m + k
    for i, iq in enumerate(clean):
        row = [_ZERO] * width
        for v, c in iq.coeffs:
            row[col_of[v]] = _num(c)
            row[col_of[v] + 1] = _num(-c)
        row[nz + i] = _ONE
        rhs = _num(-iq.const)
        if rhs < 0:
            row = [-x for x in row]
            rhs = -rhs
            row[art_col[i]] = _ONE
            basis.append(art_col[i])
        else:
            basis.append(nz + i)
        row[-1] = rhs
        rows.append(row)

    tab = _Tableau(rows, basis, width)

    if na:
        cost1 = [_ZERO] * (nz + m) + [_num(-1)] * na
        tab.set_objective(cost1)
        status = tab.optimize(allowed_cols=width - 1)
        assert status == OPTIMAL  # phase-1 objective is bounded by 0
        if tab.obj[-1] != 0:
            return LPResult(INFEASIBLE)
        _drive_out_artificials(tab, nz + m)

    sign = _ONE if maximize else _num(-1)
    cost2 = [_ZERO] * (nz + m + na)
    for v, c in obj.coeffs.items():
        cost2[col_of[v]] = sign * _num(c)
        cost2[col_of[v] + 1] = -sign * _num(c)
    tab.set_objective(cost2)
    status = tab.optimize(allowed_cols=nz + m)
    point = _extract_point(tab, order, nz)
    if status == UNBOUNDED:
        return LPResult(UNBOUNDED, point=point)
    value = _to_fraction(tab.obj[-1] * sign) + obj.const
    return LPResult(OPTIMAL, value=value, point=point)


def _drive_out_artificials(tab: _Tableau, real_cols: int) -> None:
    for i, b in enumerate(list(tab.basis)):
        if b < real_cols:
            continue
        row = tab.data[i]
        pivot_col = next((j for j in range(real_cols) if row[j] != 0), None)
        if pivot_col is not None:
            tab._pivot(i, pivot_col)
        # else: the row is redundant (all-zero over real columns, rhs 0);
        # the artificial stays basic at value 0, which is harmless.


def _extract_point(tab: _Tableau, order: list, nz: int) -> dict:
    z = [_ZERO] * nz
    for i, b in enumerate(tab.basis):
        if b < nz:
            z[b] = tab.rhs(i)
    return {v: _to_fraction(z[2 * k] - z[2 * k + 1]) for k, v in enumerate(order)}


def feasible_point(ineqs: Sequence[LinIneq]) -> dict | None:
    """A rational point satisfying all inequalities, or ``None`` if empty."""
    res = solve(ineqs, None)
    return res.point if res.status == OPTIMAL else None
