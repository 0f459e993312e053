"""Constraint-based convex polyhedra with exact backward transfer functions.

A ``Polyhedron`` is a finite conjunction of canonical rational inequalities
over an explicit variable scope; a ``PolySet`` is a finite disjunction of
polyhedra sharing one scope. The backward ReLU/assignment transformers, the
outcome assumption, Fourier-Motzkin projection, and the LP-backed emptiness,
bounding-box and interior tests all live here and are exact: no operation in
this module over- or under-approximates.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from faircert import simplex
from faircert.model import NetworkModel, out_var, pre_var
from faircert.numeric import (
    LinExpr,
    LinIneq,
    Rat,
    ineq_ge,
    ineq_le,
    unique_ineqs,
)

LP_REDUCE_THRESHOLD = 64

ACTIVE = "active"
INACTIVE = "inactive"


class UnboundedRegion(ValueError):
    """A bounding-box query hit an unbounded direction."""


@dataclass(frozen=True)
class Polyhedron:
    scope: frozenset
    ineqs: tuple[LinIneq, ...]

    @classmethod
    def make(cls, scope: Iterable, ineqs: Iterable[LinIneq]) -> "Polyhedron":
        kept = unique_ineqs(iq for iq in ineqs if not iq.is_trivial_true())
        scope = frozenset(scope)
        for iq in kept:
            missing = iq.variables() - scope
            if missing:
                raise ValueError(f"constraint mentions out-of-scope variables {missing}")
        return cls(scope, tuple(kept))

    def is_trivially_empty(self) -> bool:
        return any(iq.is_trivial_false() for iq in self.ineqs)

    def contains(self, point: Mapping[object, Rat]) -> bool:
        return all(iq.satisfied_by(point) for iq in self.ineqs)

    def __repr__(self) -> str:
        return f"Polyhedron({len(self.ineqs)} ineqs over {len(self.scope)} vars)"


@dataclass(frozen=True)
class PolySet:
    """Finite disjunction of polyhedra over one shared scope."""

    disjuncts: tuple[Polyhedron, ...]

    @classmethod
    def of(cls, *polys: Polyhedron) -> "PolySet":
        return cls(tuple(polys))

    def is_empty_syntactic(self) -> bool:
        return not self.disjuncts

    def contains(self, point: Mapping[object, Rat]) -> bool:
        return any(p.contains(point) for p in self.disjuncts)


def poly_from_box(box: Mapping[object, tuple[Rat, Rat]]) -> Polyhedron:
    """Axis-aligned box as a polyhedron (lo <= v <= hi per variable)."""
    ineqs = []
    for v, (lo, hi) in box.items():
        e = LinExpr.var(v)
        ineqs.append(ineq_le(e.add_const(-hi)))   # v - hi <= 0
        ineqs.append(ineq_ge(e.add_const(-lo)))   # v - lo >= 0
    return Polyhedron.make(box.keys(), ineqs)


def assume_outcome(m: NetworkModel, j: int) -> Polyhedron:
    """Polyhedron over output variables assuming class ``j`` has the maximal
    score: ``o_j - o_i >= 0`` for all other classes (ties included)."""
    if not 0 <= j < m.output_size:
        raise ValueError(f"class index {j} out of range")
    scope = [out_var(i) for i in range(m.output_size)]
    ineqs = [
        ineq_le(LinExpr({out_var(i): Fraction(1), out_var(j): Fraction(-1)}))
        for i in range(m.output_size)
        if i != j
    ]
    return Polyhedron.make(scope, ineqs)


def backward_assign(p: Polyhedron, node, rhs: LinExpr) -> Polyhedron:
    """Exact affine preimage: substitute ``node := rhs`` and drop it from scope."""
    if node not in p.scope:
        raise ValueError(f"{node!r} not in scope")
    scope = (p.scope - {node}) | rhs.variables()
    return Polyhedron.make(scope, (iq.substitute(node, rhs) for iq in p.ineqs))


def backward_relu(p: Polyhedron, node, flag: str | None) -> PolySet:
    """Exact ReLU preimage of the post-activation variable ``node``.

    ``node`` must be a ``("post", layer, j)`` id; the fresh pre-activation
    variable is the matching ``("pre", layer, j)``. A fixed flag keeps only
    that branch; ``None`` keeps both.
    """
    kind, layer, j = node
    assert kind == "post"
    pre = pre_var(layer, j)
    branches = []
    if flag in (ACTIVE, None):
        q = backward_assign(p, node, LinExpr.var(pre))
        branches.append(
            Polyhedron.make(q.scope | {pre}, q.ineqs + (ineq_ge(LinExpr.var(pre)),))
        )
    if flag in (INACTIVE, None):
        q = backward_assign(p, node, LinExpr())
        branches.append(
            Polyhedron.make(q.scope | {pre}, q.ineqs + (ineq_le(LinExpr.var(pre)),))
        )
    return PolySet(tuple(branches))


def meet(p: Polyhedron, q: Polyhedron | Mapping) -> Polyhedron:
    """Constraint-set union (set intersection); no normalization beyond
    de-duplication."""
    if not isinstance(q, Polyhedron):
        q = poly_from_box(q)
    return Polyhedron.make(p.scope | q.scope, p.ineqs + q.ineqs)


def _coeff_of(iq: LinIneq, v) -> int:
    for w, c in iq.coeffs:
        if w == v:
            return c
    return 0


def project_out(p: Polyhedron, variables: Iterable) -> Polyhedron:
    """Exact shadow by Fourier-Motzkin elimination of ``variables``."""
    drop = set(variables)
    if not drop <= p.scope:
        raise ValueError("can only project out in-scope variables")
    ineqs = list(p.ineqs)
    for v in sorted(drop, key=repr):
        keep, lowers, uppers = [], [], []
        for iq in ineqs:
            c = _coeff_of(iq, v)
            if c == 0:
                keep.append(iq)
            elif c > 0:
                uppers.append((iq, c))
            else:
                lowers.append((iq, c))
        for up, cu in uppers:
            for lo, cl in lowers:
                # cu > 0 > cl; positive combination cancelling v
                combined = up.expr().scale(Fraction(-cl)).add(lo.expr().scale(Fraction(cu)))
                keep.append(LinIneq(combined, strict=up.strict or lo.strict))
        ineqs = unique_ineqs(iq for iq in keep if not iq.is_trivial_true())
        if len(ineqs) > LP_REDUCE_THRESHOLD:
            ineqs = _lp_reduce(ineqs)
    return Polyhedron.make(p.scope - drop, ineqs)


def _lp_reduce(ineqs: list[LinIneq]) -> list[LinIneq]:
    """Full redundancy elimination: drop constraints implied by the rest."""
    kept = list(ineqs)
    i = 0
    while i < len(kept):
        candidate = kept[i]
        rest = kept[:i] + kept[i + 1 :]
        res = simplex.solve(rest, candidate.expr(), maximize=True)
        if res.status == simplex.OPTIMAL and res.value <= 0:
            kept = rest
        else:
            i += 1
    return kept


def is_empty(p: Polyhedron) -> bool:
    empty, _ = emptiness_witness(p)
    return empty


def emptiness_witness(p: Polyhedron) -> tuple[bool, dict | None]:
    """(empty?, witness point). The witness satisfies every inequality exactly."""
    if p.is_trivially_empty():
        return True, None
    closed = [iq for iq in p.ineqs if not iq.strict]
    stricts = [iq for iq in p.ineqs if iq.strict]
    if not stricts:
        point = simplex.feasible_point(closed)
        if point is None:
            return True, None
        return False, _complete_point(p, point)
    # strict rows get a shared positive slack; feasible iff sup slack > 0
    t = ("aux", "slack")
    system = list(closed)
    for iq in stricts:
        system.append(ineq_le(iq.expr().add(LinExpr.var(t))))
    system.append(ineq_le(LinExpr.var(t).add_const(Fraction(-1))))  # t <= 1
    res = simplex.solve(system, LinExpr.var(t), maximize=True)
    if res.status != simplex.OPTIMAL or res.value <= 0:
        return True, None
    point = {v: val for v, val in res.point.items() if v != t}
    return False, _complete_point(p, point)


def _complete_point(p: Polyhedron, point: dict) -> dict:
    for v in p.scope:
        point.setdefault(v, Fraction(0))
    return point


def bounding_box(p: Polyhedron, variables: Sequence | None = None) -> dict:
    """Exact per-variable min/max; raises ``UnboundedRegion`` if unbounded."""
    out = {}
    for v in sorted(variables if variables is not None else p.scope, key=repr):
        lo = simplex.solve(p.ineqs, LinExpr.var(v), maximize=False)
        hi = simplex.solve(p.ineqs, LinExpr.var(v), maximize=True)
        if lo.status == simplex.INFEASIBLE or hi.status == simplex.INFEASIBLE:
            raise ValueError("bounding box of an empty polyhedron")
        if lo.status == simplex.UNBOUNDED or hi.status == simplex.UNBOUNDED:
            raise UnboundedRegion(f"unbounded in direction {v!r}")
        out[v] = (lo.value, hi.value)
    return out


def interior_point(p: Polyhedron) -> tuple[Rat, dict | None]:
    """(best uniform slack, deep point). Slack > 0 iff the polyhedron is
    full-dimensional over its scope (its interior is non-empty)."""
    if p.is_trivially_empty():
        return Fraction(-1), None
    t = ("aux", "slack")
    system = [ineq_le(iq.expr().add(LinExpr.var(t))) for iq in p.ineqs]
    system.append(ineq_le(LinExpr.var(t).add_const(Fraction(-1))))  # cap t <= 1
    res = simplex.solve(system, LinExpr.var(t), maximize=True)
    if res.status != simplex.OPTIMAL:
        return Fraction(-1), None
    point = {v: val for v, val in res.point.items() if v != t}
    return res.value, _complete_point(p, point)
