"""Forward pre-analysis: the partition queue, L/U budget, and feasible map.

Partitions split only along non-sensitive dimensions: unsplit categorical
features enumerate their values first (halving a one-hot box would create
boxes containing no valid one-hot point), then continuous dimensions halve
at the midpoint in round-robin order. A partition is excluded when it is
neither classified nor feasible and no non-sensitive continuous dimension can
be halved without its width falling below L and no non-sensitive categorical
feature remains unsplit.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Sequence

from faircert.domains import ActivationPattern, forward, uniquely_classified
from faircert.model import (
    CATEGORICAL,
    CONTINUOUS,
    InputSpec,
    NetworkModel,
    Query,
    in_var,
)
from faircert.numeric import Rat


class NoSplittableDimension(ValueError):
    """Every non-sensitive dimension is at the budget floor."""


@dataclass(frozen=True)
class Partition:
    """Axis-aligned box over continuous features plus categorical fixings.

    ``box`` holds one (name, lo, hi) triple per continuous feature in
    declaration order; sensitive features always span their full declared
    range. ``cat_fix`` holds (name, value) pairs for the non-sensitive
    categorical features fixed so far. ``split_cursor`` indexes the
    round-robin order over splittable continuous features.
    """

    box: tuple[tuple[str, Rat, Rat], ...]
    cat_fix: tuple[tuple[str, int], ...] = ()
    split_cursor: int = 0

    @classmethod
    def initial(cls, spec: InputSpec, query: Query | None = None) -> "Partition":
        ranges = {name: (lo, hi) for name, lo, hi in (query.ranges if query else ())}
        fixings = tuple((query.fixings if query else ()))
        box = []
        for f in spec.features:
            if f.kind == CONTINUOUS:
                lo, hi = ranges.get(f.name, (f.lo, f.hi))
                box.append((f.name, lo, hi))
        return cls(tuple(box), tuple(sorted(fixings)))

    def range_of(self, name: str) -> tuple[Rat, Rat]:
        for n, lo, hi in self.box:
            if n == name:
                return lo, hi
        raise KeyError(name)

    def fixed_value(self, name: str) -> int | None:
        for n, k in self.cat_fix:
            if n == name:
                return k
        return None

    def input_box(self, spec: InputSpec) -> dict:
        """Interval per input-node variable (one-hot nodes as 0/1 boxes)."""
        out = {}
        for f in spec.features:
            if f.kind == CONTINUOUS:
                out[in_var(f.offset)] = self.range_of(f.name)
            else:
                fixed = self.fixed_value(f.name)
                for k in range(f.arity):
                    if fixed is None:
                        out[in_var(f.offset + k)] = (Fraction(0), Fraction(1))
                    else:
                        bit = Fraction(1 if k == fixed else 0)
                        out[in_var(f.offset + k)] = (bit, bit)
        return out

    def volume(self, spec: InputSpec) -> Rat:
        """Width product over continuous features times 1/arity per fixed
        categorical feature (unsplit categorical features contribute 1)."""
        v = Fraction(1)
        for _, lo, hi in self.box:
            v *= hi - lo
        for name, _ in self.cat_fix:
            v /= spec.feature(name).arity
        return v

    def key(self) -> tuple:
        return (self.box, self.cat_fix)

    def describe(self) -> dict:
        return {
            "box": {name: [str(lo), str(hi)] for name, lo, hi in self.box},
            "fixed": {name: k for name, k in self.cat_fix},
        }


def _splittable_continuous(p: Partition, spec: InputSpec, lower: Rat) -> list[int]:
    """Indices (within p.box) of non-sensitive dims whose halves stay >= L."""
    out = []
    for i, (name, lo, hi) in enumerate(p.box):
        if spec.feature(name).sensitive:
            continue
        if (hi - lo) / 2 >= lower:
            out.append(i)
    return out


def split(p: Partition, spec: InputSpec, lower: Rat = Fraction(0)) -> list[Partition]:
    """Children of ``p``: arity-way on the first unsplit non-sensitive
    categorical feature, else halves of the round-robin continuous dim."""
    for f in spec.nonsensitive_features():
        if f.kind == CATEGORICAL and p.fixed_value(f.name) is None:
            fixed = lambda k: tuple(sorted(p.cat_fix + ((f.name, k),)))
            return [
                Partition(p.box, fixed(k), p.split_cursor) for k in range(f.arity)
            ]
    candidates = _splittable_continuous(p, spec, lower)
    if not candidates:
        raise NoSplittableDimension(
            "no non-sensitive dimension can be split within the budget"
        )
    # round-robin: the cursor counts over non-sensitive continuous dims
    ns_dims = [
        i for i, (name, _, _) in enumerate(p.box) if not spec.feature(name).sensitive
    ]
    order = ns_dims[p.split_cursor % len(ns_dims):] + ns_dims[: p.split_cursor % len(ns_dims)]
    target = next(i for i in order if i in candidates)
    cursor = (ns_dims.index(target) + 1) % len(ns_dims)
    name, lo, hi = p.box[target]
    mid = (lo + hi) / 2
    left = p.box[:target] + ((name, lo, mid),) + p.box[target + 1:]
    right = p.box[:target] + ((name, mid, hi),) + p.box[target + 1:]
    return [
        Partition(left, p.cat_fix, cursor),
        Partition(right, p.cat_fix, cursor),
    ]


@dataclass(frozen=True)
class BudgetConfig:
    lower: Rat = Fraction(0)   # L: minimum continuous dimension width
    upper: int = 0             # U: max ReLUs left unknown per pattern

    def __post_init__(self):
        if self.lower < 0:
            raise ValueError("L must be >= 0")
        if self.upper < 0:
            raise ValueError("U must be >= 0")


class FeasibleMap:
    """Pattern-keyed feasible partitions with subsumption merging.

    Inserting (p, P) first looks for an existing key that subsumes p (fewer
    flags) and attaches P there; otherwise existing keys subsumed by p fold
    into a new entry keyed p. Incomparable patterns keep separate entries.
    """

    def __init__(self):
        self.entries: dict[ActivationPattern, list[Partition]] = {}

    def insert(self, pattern: ActivationPattern, partition: Partition) -> None:
        hosts = sorted(
            (key for key in self.entries if key.subsumes(pattern)),
            key=lambda k: k.flags,
        )
        if hosts:
            self.entries[hosts[0]].append(partition)
            return
        folded = [partition]
        for key in sorted(self.entries, key=lambda k: k.flags):
            if pattern.subsumes(key):
                folded.extend(self.entries.pop(key))
        self.entries[pattern] = folded

    def groups(self) -> list[tuple[ActivationPattern, list[Partition]]]:
        out = []
        for key in sorted(self.entries, key=lambda k: k.flags):
            out.append((key, sorted(self.entries[key], key=Partition.key)))
        return out

    def __len__(self) -> int:
        return len(self.entries)


@dataclass
class PreResult:
    classified: list[tuple[Partition, int]] = field(default_factory=list)
    feasible: FeasibleMap = field(default_factory=FeasibleMap)
    raw_feasible: list[tuple[ActivationPattern, Partition]] = field(default_factory=list)
    excluded: list[tuple[ActivationPattern, Partition]] = field(default_factory=list)
    timed_out: bool = False

    def covered_volume(self, spec: InputSpec) -> Rat:
        total = sum((p.volume(spec) for p, _ in self.classified), Fraction(0))
        total += sum((p.volume(spec) for _, p in self.raw_feasible), Fraction(0))
        return total

    def excluded_volume(self, spec: InputSpec) -> Rat:
        return sum((p.volume(spec) for _, p in self.excluded), Fraction(0))


MapFn = Callable[[Callable, Sequence], list]


def run_preanalysis(
    m: NetworkModel,
    spec: InputSpec,
    initial: Iterable[Partition],
    domain: str,
    budget: BudgetConfig,
    map_fn: MapFn | None = None,
    deadline: float | None = None,
) -> PreResult:
    """Drive the partition queue until every piece is classified, feasible,
    or excluded. ``map_fn`` evaluates the forward analysis over a frontier
    (order-preserving; may fan out to worker processes)."""
    upper = min(budget.upper, m.n_hidden)
    result = PreResult()
    frontier = sorted(initial, key=Partition.key)
    if map_fn is None:
        map_fn = lambda fn, items: [fn(it) for it in items]
    fwd = _ForwardTask(m, spec, domain)

    while frontier:
        if deadline is not None and time.monotonic() > deadline:
            empty = ActivationPattern.of({})
            result.excluded.extend((empty, p) for p in frontier)
            result.timed_out = True
            break
        outcomes = map_fn(fwd, frontier)
        next_frontier: list[Partition] = []
        for partition, (bounds, pattern) in zip(frontier, outcomes):
            klass = uniquely_classified(bounds)
            if klass is not None:
                result.classified.append((partition, klass))
            elif m.n_hidden - len(pattern) <= upper:
                result.raw_feasible.append((pattern, partition))
            else:
                try:
                    next_frontier.extend(split(partition, spec, budget.lower))
                except NoSplittableDimension:
                    result.excluded.append((pattern, partition))
        frontier = next_frontier

    # canonical insertion order keeps the grouping scheduler-independent
    result.classified.sort(key=lambda item: item[0].key())
    result.excluded.sort(key=lambda item: item[1].key())
    result.raw_feasible.sort(key=lambda item: item[1].key())
    for pattern, partition in result.raw_feasible:
        result.feasible.insert(pattern, partition)
    return result


class _ForwardTask:
    """Picklable forward closure for worker pools."""

    def __init__(self, m: NetworkModel, spec: InputSpec, domain: str):
        self.m = m
        self.spec = spec
        self.domain = domain

    def __call__(self, partition: Partition):
        return forward(self.m, self.spec, self.domain, partition)
