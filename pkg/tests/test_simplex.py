"""Exact LP engine: known solutions plus randomized cross-checks against a
dense-grid feasibility oracle."""

import random
from fractions import Fraction as F

import pytest

from faircert import simplex
from faircert.numeric import LinExpr, ineq_ge, ineq_le


def box(n):
    out = []
    for k in range(n):
        v = f"x{k}"
        out.append(ineq_le(LinExpr({v: F(1)}, F(-2))))   # x <= 2
        out.append(ineq_ge(LinExpr({v: F(1)}, F(2))))    # x >= -2
    return out


def random_system(rng, n_vars, n_extra):
    ineqs = box(n_vars)
    for _ in range(n_extra):
        coeffs = {f"x{k}": F(rng.randint(-3, 3)) for k in range(n_vars)}
        const = F(rng.randint(-4, 4), rng.choice([1, 2]))
        ineqs.append(ineq_le(LinExpr(coeffs, const)))
    return ineqs


def grid_feasible(ineqs, n_vars, step=F(1, 4)):
    values = []
    v = F(-2)
    while v <= 2:
        values.append(v)
        v += step
    names = [f"x{k}" for k in range(n_vars)]

    def rec(i, point):
        if i == len(names):
            return point.copy() if all(iq.satisfied_by(point) for iq in ineqs) else None
        for val in values:
            point[names[i]] = val
            hit = rec(i + 1, point)
            if hit:
                return hit
        return None

    return rec(0, {})


class TestKnownSolutions:
    def test_bounded_maximum(self):
        iqs = [ineq_le(LinExpr({"x": F(1)}, F(-1))), ineq_ge(LinExpr({"x": F(1)}))]
        res = simplex.solve(iqs, LinExpr({"x": F(1)}))
        assert (res.status, res.value) == (simplex.OPTIMAL, F(1))

    def test_minimum(self):
        iqs = [ineq_le(LinExpr({"x": F(1)}, F(-1))), ineq_ge(LinExpr({"x": F(1)}))]
        res = simplex.solve(iqs, LinExpr({"x": F(1)}), maximize=False)
        assert res.value == 0

    def test_infeasible(self):
        iqs = [ineq_le(LinExpr({"x": F(1)})), ineq_ge(LinExpr({"x": F(1)}, F(-1)))]
        assert simplex.solve(iqs, None).status == simplex.INFEASIBLE

    def test_unbounded(self):
        res = simplex.solve([ineq_ge(LinExpr({"x": F(1)}))], LinExpr({"x": F(1)}))
        assert res.status == simplex.UNBOUNDED

    def test_equality_by_opposed_pair(self):
        iqs = [
            ineq_le(LinExpr({"x": F(3)}, F(-1))),
            ineq_ge(LinExpr({"x": F(3)}, F(-1))),
        ]
        res = simplex.solve(iqs, None)
        assert res.status == simplex.OPTIMAL
        assert res.point == {"x": F(1, 3)}

    def test_triangle_vertex(self):
        iqs = [
            ineq_le(LinExpr({"x": F(1), "y": F(2)}, F(-2))),
            ineq_ge(LinExpr({"x": F(1)})),
            ineq_ge(LinExpr({"y": F(1)})),
        ]
        res = simplex.solve(iqs, LinExpr({"x": F(1), "y": F(1)}))
        assert res.value == F(2)  # (2, 0)

    def test_objective_with_constant_term(self):
        iqs = [ineq_le(LinExpr({"x": F(1)}, F(-1))), ineq_ge(LinExpr({"x": F(1)}))]
        res = simplex.solve(iqs, LinExpr({"x": F(1)}, F(5)))
        assert res.value == F(6)

    def test_strict_rejected(self):
        from faircert.numeric import LinIneq

        with pytest.raises(ValueError):
            simplex.solve([LinIneq(LinExpr({"x": F(1)}), strict=True)], None)


class TestRandomizedCrossCheck:
    @pytest.mark.parametrize("seed", range(30))
    def test_feasibility_agrees_with_grid(self, seed):
        rng = random.Random(seed)
        n = rng.choice([2, 3])
        ineqs = random_system(rng, n, rng.randint(1, 5))
        point = simplex.feasible_point(ineqs)
        grid_hit = grid_feasible(ineqs, n)
        if point is not None:
            # the solver's witness is exact
            assert all(iq.satisfied_by(point) for iq in ineqs)
        if grid_hit is not None:
            assert point is not None, "grid found a point the solver missed"

    @pytest.mark.parametrize("seed", range(15))
    def test_optimum_dominates_grid(self, seed):
        rng = random.Random(1000 + seed)
        n = 2
        ineqs = random_system(rng, n, rng.randint(1, 4))
        obj = LinExpr({f"x{k}": F(rng.randint(-2, 2)) for k in range(n)})
        res = simplex.solve(ineqs, obj, maximize=True)
        if res.status != simplex.OPTIMAL:
            return
        v = F(-2)
        values = []
        while v <= 2:
            values.append(v)
            v += F(1, 4)
        for a in values:
            for b in values:
                point = {"x0": a, "x1": b}
                if all(iq.satisfied_by(point) for iq in ineqs):
                    from faircert.numeric import linexpr_eval

                    assert linexpr_eval(obj, point) <= res.value
