"""Exact rational arithmetic and linear-expression algebra.

Every quantity in the analyzer is an exact ``fractions.Fraction``; no value is
ever rounded. Decimal tokens such as ``0.99`` are parsed as decimal fractions
(99/100), never as binary floats.

Variable identifiers are opaque hashable, totally-ordered values (the model
layer uses tuples like ``("in", 0)`` or ``("pre", 1, 2)``).
"""

from __future__ import annotations

import math
import re
from fractions import Fraction
from typing import Iterable, Mapping

Rat = Fraction

_TOKEN_RE = re.compile(r"^[+-]?(\d+(\.\d+)?|\d+/\d+)$")


class MissingVariable(KeyError):
    """A variable required for evaluation has no value."""


def parse_rational(token: str) -> Rat:
    """Parse ``d``, ``d.d`` or ``p/q`` tokens into an exact rational."""
    if not _TOKEN_RE.match(token):
        raise ValueError(f"not a rational token: {token!r}")
    return Fraction(token)


def format_rational(value: Rat) -> str:
    return f"{value.numerator}/{value.denominator}"


class LinExpr:
    """Sparse affine expression ``sum(coeffs[v] * v) + const``.

    Canonical form: no zero coefficients are stored. Instances are treated as
    immutable; all operations return new expressions.
    """

    __slots__ = ("coeffs", "const")

    def __init__(self, coeffs: Mapping[object, Rat] | None = None, const: Rat = Fraction(0)):
        self.coeffs = {v: c for v, c in (coeffs or {}).items() if c != 0}
        self.const = Fraction(const)

    @classmethod
    def var(cls, v, coeff: Rat = Fraction(1)) -> "LinExpr":
        return cls({v: Fraction(coeff)})

    @classmethod
    def constant(cls, c: Rat) -> "LinExpr":
        return cls({}, Fraction(c))

    def variables(self) -> set:
        return set(self.coeffs)

    def is_constant(self) -> bool:
        return not self.coeffs

    def coeff(self, v) -> Rat:
        return self.coeffs.get(v, Fraction(0))

    def add(self, other: "LinExpr") -> "LinExpr":
        coeffs = dict(self.coeffs)
        for v, c in other.coeffs.items():
            coeffs[v] = coeffs.get(v, Fraction(0)) + c
        return LinExpr(coeffs, self.const + other.const)

    def sub(self, other: "LinExpr") -> "LinExpr":
        return self.add(other.scale(Fraction(-1)))

    def scale(self, k: Rat) -> "LinExpr":
        if k == 0:
            return LinExpr({}, Fraction(0))
        return LinExpr({v: c * k for v, c in self.coeffs.items()}, self.const * k)

    def add_const(self, c: Rat) -> "LinExpr":
        return LinExpr(self.coeffs, self.const + c)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, LinExpr)
            and self.coeffs == other.coeffs
            and self.const == other.const
        )

    def __hash__(self):
        return hash((frozenset(self.coeffs.items()), self.const))

    def __repr__(self) -> str:
        terms = [f"{c}*{v}" for v, c in sorted(self.coeffs.items(), key=lambda it: repr(it[0]))]
        terms.append(str(self.const))
        return " + ".join(terms)


def linexpr_substitute(e: LinExpr, v, r: LinExpr) -> LinExpr:
    """Replace every occurrence of ``v`` in ``e`` by the expression ``r``."""
    c = e.coeffs.get(v)
    if c is None:
        return e
    coeffs = {w: k for w, k in e.coeffs.items() if w != v}
    base = LinExpr(coeffs, e.const)
    return base.add(r.scale(c))


def linexpr_eval(e: LinExpr, point: Mapping[object, Rat]) -> Rat:
    """Exact value of ``e`` at ``point``; every variable must be assigned."""
    total = e.const
    for v, c in e.coeffs.items():
        if v not in point:
            raise MissingVariable(f"no value for variable {v!r}")
        total += c * point[v]
    return total


def interval_of(e: LinExpr, box: Mapping[object, tuple[Rat, Rat]]) -> tuple[Rat, Rat]:
    """Exact (tight) range of an affine expression over an axis-aligned box."""
    lo = hi = e.const
    for v, c in e.coeffs.items():
        if v not in box:
            raise MissingVariable(f"no interval for variable {v!r}")
        vlo, vhi = box[v]
        if c > 0:
            lo += c * vlo
            hi += c * vhi
        else:
            lo += c * vhi
            hi += c * vlo
    return lo, hi


class LinIneq:
    """Canonical linear inequality ``expr <= 0`` (or ``< 0``).

    Canonicalization multiplies by the positive lcm of the denominators and
    divides by the gcd of all integer coefficients (constant included), which
    yields a unique integer representative per half-space and makes syntactic
    de-duplication sound.
    """

    __slots__ = ("coeffs", "const", "strict", "_key")

    def __init__(self, expr: LinExpr, strict: bool = False):
        nums = list(expr.coeffs.values()) + [expr.const]
        denom_lcm = 1
        for q in nums:
            denom_lcm = denom_lcm * q.denominator // math.gcd(denom_lcm, q.denominator)
        ints = {v: int(c * denom_lcm) for v, c in expr.coeffs.items()}
        const = int(expr.const * denom_lcm)
        g = 0
        for k in ints.values():
            g = math.gcd(g, k)
        g = math.gcd(g, const)
        if g > 1:
            ints = {v: k // g for v, k in ints.items()}
            const //= g
        self.coeffs = tuple(sorted(ints.items(), key=lambda item: repr(item[0])))
        self.const = const
        self.strict = strict
        self._key = (self.coeffs, self.const, self.strict)

    def expr(self) -> LinExpr:
        return LinExpr({v: Fraction(c) for v, c in self.coeffs}, Fraction(self.const))

    def variables(self) -> set:
        return {v for v, _ in self.coeffs}

    def is_trivial_true(self) -> bool:
        if self.coeffs:
            return False
        return self.const < 0 or (self.const == 0 and not self.strict)

    def is_trivial_false(self) -> bool:
        if self.coeffs:
            return False
        return self.const > 0 or (self.const == 0 and self.strict)

    def substitute(self, v, r: LinExpr) -> "LinIneq":
        return LinIneq(linexpr_substitute(self.expr(), v, r), self.strict)

    def satisfied_by(self, point: Mapping[object, Rat]) -> bool:
        val = linexpr_eval(self.expr(), point)
        return val < 0 if self.strict else val <= 0

    def key(self):
        return self._key

    def __eq__(self, other) -> bool:
        return isinstance(other, LinIneq) and self._key == other._key

    def __hash__(self):
        return hash(self._key)

    def __repr__(self) -> str:
        rel = "<" if self.strict else "<="
        return f"LinIneq({self.expr()!r} {rel} 0)"


def ineq_le(expr: LinExpr) -> LinIneq:
    """``expr <= 0``."""
    return LinIneq(expr, strict=False)


def ineq_ge(expr: LinExpr) -> LinIneq:
    """``expr >= 0`` stored as ``-expr <= 0``."""
    return LinIneq(expr.scale(Fraction(-1)), strict=False)


def dominance_normal(ineq: LinIneq) -> tuple[tuple, Fraction]:
    """(coefficient direction, scaled constant) for parallel-constraint pruning.

    Two inequalities with equal direction describe parallel half-spaces; the
    one with the larger scaled constant is the stronger of the pair.
    """
    g = 0
    for _, c in ineq.coeffs:
        g = math.gcd(g, c)
    if g == 0:
        return ((), Fraction(ineq.const))
    direction = tuple((v, Fraction(c, g)) for v, c in ineq.coeffs)
    return (direction, Fraction(ineq.const, g))


def unique_ineqs(ineqs: Iterable[LinIneq]) -> list[LinIneq]:
    """Drop syntactic duplicates and parallel-dominated inequalities."""
    best: dict[tuple, tuple[tuple[Fraction, bool], LinIneq]] = {}
    for iq in ineqs:
        direction, const = dominance_normal(iq)
        strength = (const, iq.strict)  # larger constant, then strict, is stronger
        prev = best.get(direction)
        if prev is None or strength > prev[0]:
            best[direction] = (strength, iq)
    return sorted((iq for _, iq in best.values()), key=LinIneq.key)
