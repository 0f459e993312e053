"""Backward analysis: outcome preimages per activation pattern, restriction
to partitions, projection over the non-sensitive inputs, and the pairwise
fairness check.

The backward pass is exact: starting from the (non-strict) outcome
assumption, each ReLU either follows its fixed flag or forks both branches,
and every assignment is an exact affine preimage. Restricting the resulting
disjunction to a partition, fixing a sensitive value choice, and projecting
out the sensitive inputs yields the exact set of non-sensitive points that
can reach the outcome under that choice; two such sets for different classes
and different choices must be disjoint for the partition to be fair.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from typing import Mapping, Sequence

from faircert.domains import ActivationPattern
from faircert.model import (
    CATEGORICAL,
    CONTINUOUS,
    InputSpec,
    NetworkModel,
    eval_concrete,
    in_var,
    out_var,
    post_var,
    pre_var,
)
from faircert.numeric import LinExpr, Rat
from faircert.polyhedra import (
    Polyhedron,
    PolySet,
    assume_outcome,
    backward_assign,
    backward_relu,
    bounding_box,
    emptiness_witness,
    interior_point,
    meet,
    poly_from_box,
    project_out,
)
from faircert.preanalysis import Partition

MAX_WITNESS_PROBES = 10_000


@dataclass
class BackwardStats:
    """Live (non-pruned) disjunct high-water mark per backward run."""

    max_live: int = 1

    def observe(self, count: int) -> None:
        if count > self.max_live:
            self.max_live = count


def backward(
    m: NetworkModel,
    j: int,
    pattern: ActivationPattern,
    stats: BackwardStats | None = None,
) -> PolySet:
    """Exact union of input-space polyhedra whose execution, restricted to
    activation statuses compatible with ``pattern``, can make class ``j``
    maximal. At most ``2**(hidden - len(pattern))`` disjuncts are live at any
    point; empty ones are pruned eagerly."""
    flags = pattern.as_dict()
    live = [assume_outcome(m, j)]
    n = m.n_layers
    for jj in reversed(range(m.output_size)):
        live = [backward_assign(p, out_var(jj), m.node_affine(n, jj)) for p in live]
    live = _prune(live)
    if stats:
        stats.observe(len(live))
    for layer_idx in range(n - 1, 0, -1):
        rows = m.layers[layer_idx - 1].rows
        for jj in reversed(range(rows)):
            node = (layer_idx, jj)
            nxt: list[Polyhedron] = []
            for p in live:
                branched = backward_relu(p, post_var(layer_idx, jj), flags.get(node))
                for q in branched.disjuncts:
                    nxt.append(
                        backward_assign(q, pre_var(layer_idx, jj), m.node_affine(layer_idx, jj))
                    )
            live = _prune(nxt)
            if stats:
                stats.observe(len(live))
        if not live:
            break
    return PolySet(tuple(live))


def _prune(polys: Sequence[Polyhedron]) -> list[Polyhedron]:
    kept = []
    for p in polys:
        if p.is_trivially_empty():
            continue
        empty, _ = emptiness_witness(p)
        if not empty:
            kept.append(p)
    return kept


def check(regions: Mapping, keyfn=None) -> list[tuple[object, object, Polyhedron]]:
    """All pairwise non-empty intersections across keys with distinct classes
    (and distinct value choices, when keys carry one).

    ``regions`` maps a key - either a class index or a (class, choice) pair -
    to a sequence of polyhedra over the non-sensitive inputs. An empty result
    means the projections tile disjointly: the partition is certified fair.
    """
    keys = sorted(regions, key=repr)
    out = []
    for a_idx, ka in enumerate(keys):
        for kb in keys[a_idx + 1:]:
            ca, va = _class_choice(ka)
            cb, vb = _class_choice(kb)
            if ca == cb:
                continue
            if va is not None and va == vb:
                continue
            for pa in regions[ka]:
                for pb in regions[kb]:
                    cand = meet(pa, pb)
                    empty, _ = emptiness_witness(cand)
                    if not empty:
                        out.append((ka, kb, cand))
    return out


def _class_choice(key) -> tuple[int, object]:
    if isinstance(key, tuple):
        return key[0], key[1]
    return key, None


@dataclass
class BiasRegion:
    """One overlap between two outcome preimages within a partition."""

    partition: Partition
    classes: tuple[int, int]
    choice_indices: tuple[int, int]
    cat_combo: tuple[tuple[str, int], ...]
    region: Polyhedron                  # over continuous non-sensitive inputs
    bbox: dict                          # var -> (lo, hi)
    full_dimensional: bool
    witness: tuple[list[Rat], list[Rat], int, int] | None = None

    @property
    def tie_only(self) -> bool:
        return self.witness is None and not self.full_dimensional

    def sort_key(self):
        return (
            self.partition.key(),
            self.cat_combo,
            self.classes,
            self.choice_indices,
            tuple(iq.key() for iq in self.region.ineqs),
        )


@dataclass
class PartitionOutcome:
    partition: Partition
    verdict: str                        # "fair" | "biased"
    regions: list[BiasRegion] = field(default_factory=list)
    potential: list[BiasRegion] = field(default_factory=list)


def _partition_box_ineqs(spec: InputSpec, partition: Partition) -> Polyhedron:
    """Box polyhedron over the continuous input variables of the partition
    (sensitive continuous features span their declared range)."""
    box = {}
    for f in spec.features:
        if f.kind != CONTINUOUS:
            continue
        if f.sensitive:
            box[in_var(f.offset)] = (f.lo, f.hi)
        else:
            box[in_var(f.offset)] = partition.range_of(f.name)
    return poly_from_box(box)


def _fix_nodes(poly: Polyhedron, values: Mapping) -> Polyhedron:
    for v, value in sorted(values.items(), key=lambda item: repr(item[0])):
        if v in poly.scope:
            poly = backward_assign(poly, v, LinExpr.constant(value))
    return poly


def _choice_regions(
    spec: InputSpec,
    disjuncts: Sequence[Polyhedron],
    box_poly: Polyhedron,
    combo_values: Mapping,
    choice: tuple[tuple[str, object], ...],
) -> list[tuple[Polyhedron, Polyhedron]]:
    """(projected region over continuous non-sensitive vars, pre-projection
    source) per surviving disjunct."""
    sens_values = {}
    sens_ranges = {}
    for name, payload in choice:
        f = spec.feature(name)
        if f.kind == CATEGORICAL:
            for k in range(f.arity):
                sens_values[in_var(f.offset + k)] = Fraction(1 if k == payload else 0)
        else:
            sens_ranges[in_var(f.offset)] = payload
    project_vars = set(sens_ranges)
    out = []
    seen = set()
    for d in disjuncts:
        p = meet(d, box_poly)
        p = _fix_nodes(p, combo_values)
        p = _fix_nodes(p, sens_values)
        if sens_ranges:
            p = meet(p, poly_from_box(sens_ranges))
        empty, _ = emptiness_witness(p)
        if empty:
            continue
        proj = project_out(p, project_vars & p.scope) if project_vars else p
        key = tuple(iq.key() for iq in proj.ineqs)
        if key in seen:
            continue
        seen.add(key)
        out.append((proj, p))
    return out


def _stable_seed(*parts) -> int:
    digest = hashlib.sha256(repr(parts).encode()).digest()
    return int.from_bytes(digest[:8], "big")


def _point_from_poly(source: Polyhedron, assignments: Mapping) -> dict | None:
    """Extend fixed assignments to a full point of ``source``."""
    p = _fix_nodes(source, assignments)
    empty, wit = emptiness_witness(p)
    if empty:
        return None
    point = dict(assignments)
    for v in p.scope:
        point[v] = wit[v]
    return point


def _assemble_vector(
    spec: InputSpec,
    cont_values: Mapping,
    cat_values: Mapping[str, int],
) -> list[Rat]:
    x: list[Rat] = [Fraction(0)] * spec.total_nodes
    for f in spec.features:
        if f.kind == CONTINUOUS:
            x[f.offset] = cont_values[in_var(f.offset)]
        else:
            k = cat_values[f.name]
            for i in range(f.arity):
                x[f.offset + i] = Fraction(1 if i == k else 0)
    return x


def _sensitive_candidates(
    spec: InputSpec, choice, rng: random.Random, extra: int = 6
) -> list[tuple[dict, dict[str, int]]]:
    """Per-feature sensitive assignments sampled from a value choice: the
    continuous candidates walk midpoint/quartiles/endpoints plus a few seeded
    random points; categorical features are pinned by the choice itself."""
    cats: dict[str, int] = {}
    axes: list[list[tuple[tuple, Rat]]] = []
    for name, payload in choice:
        f = spec.feature(name)
        if f.kind == CATEGORICAL:
            cats[name] = payload
            continue
        lo, hi = payload
        span = hi - lo
        values = [
            lo + span / 2,
            lo + span / 4,
            lo + 3 * span / 4,
            lo,
            hi,
        ]
        values += [lo + span * Fraction(rng.randrange(0, 257), 256) for _ in range(extra)]
        axes.append([(in_var(f.offset), v) for v in values])
    if not axes:
        return [({}, cats)]
    combos: list[dict] = [{}]
    for axis in axes:
        combos = [{**prev, var: val} for prev in combos for (var, val) in axis]
    return [(assign, cats) for assign in combos]


def _search_witness(
    m: NetworkModel,
    spec: InputSpec,
    region: Polyhedron,
    bbox: dict,
    sides: tuple,
    cat_values: dict[str, int],
    probe_budget: int = MAX_WITNESS_PROBES,
) -> tuple[list[Rat], list[Rat], int, int] | None:
    """Concrete pair differing only on sensitive features with different
    oracle classes, or ``None`` (tie-sourced overlap).

    Cheap probes run first: the bounding-box midpoint with a sweep of
    sensitive values across the two choices usually confirms a genuine
    region within a handful of oracle calls; LP-derived probes (deep interior
    point, preimage extensions, seeded in-box samples) follow only if needed.
    """
    (choice_a, source_a), (choice_b, source_b) = sides
    rng = random.Random(_stable_seed("sens", tuple(iq.key() for iq in region.ineqs)))
    sens_a = _sensitive_candidates(spec, choice_a, rng)
    sens_b = _sensitive_candidates(spec, choice_b, rng)
    attempts = 0

    def try_probe(probe: dict, extend_sources: bool):
        nonlocal attempts
        pairs_a = list(sens_a)
        pairs_b = list(sens_b)
        if extend_sources:
            pa = _point_from_poly(source_a, probe)
            if pa is not None:
                pairs_a.insert(
                    0, ({v: pa[v] for v in pa if v not in probe}, _choice_cats(spec, choice_a))
                )
            pb = _point_from_poly(source_b, probe)
            if pb is not None:
                pairs_b.insert(
                    0, ({v: pb[v] for v in pb if v not in probe}, _choice_cats(spec, choice_b))
                )
        for assign_a, cats_a in pairs_a:
            for assign_b, cats_b in pairs_b:
                if attempts >= probe_budget:
                    return None
                attempts += 1
                xa = _assemble_vector(spec, {**probe, **assign_a}, {**cat_values, **cats_a})
                xb = _assemble_vector(spec, {**probe, **assign_b}, {**cat_values, **cats_b})
                ca, cb = eval_concrete(m, xa), eval_concrete(m, xb)
                if ca != cb:
                    return (xa, xb, ca, cb)
        return None

    mid = {v: (lo + hi) / 2 for v, (lo, hi) in bbox.items()}
    if region.contains(mid):
        found = try_probe(mid, extend_sources=False)
        if found:
            return found

    probes: list[tuple[dict, bool]] = []
    slack, center = interior_point(region)
    if center is not None and slack > 0:
        probes.append((center, True))
    empty, wit = emptiness_witness(region)
    if empty:
        return None
    if wit is not None:
        probes.append((wit, True))
    if region.contains(mid):
        probes.append((mid, True))
    if region.scope:
        for _ in range(16):
            cand = {
                v: lo + (hi - lo) * Fraction(rng.randrange(0, 257), 256)
                for v, (lo, hi) in bbox.items()
            }
            if region.contains(cand):
                probes.append((cand, False))
    else:
        probes.append(({}, True))

    for probe, extend in probes:
        found = try_probe(probe, extend)
        if found:
            return found
    return None


def _choice_cats(spec: InputSpec, choice) -> dict[str, int]:
    return {
        name: payload
        for name, payload in choice
        if spec.feature(name).kind == CATEGORICAL
    }


def analyze_pattern_group(
    m: NetworkModel,
    spec: InputSpec,
    pattern: ActivationPattern,
    partitions: Sequence[Partition],
    stats: BackwardStats | None = None,
) -> list[PartitionOutcome]:
    """Run the backward analysis once per class for ``pattern``, then check
    fairness of every partition in the group."""
    per_class: dict[int, PolySet] = {}
    for j in range(m.output_size):
        cstats = BackwardStats()
        per_class[j] = backward(m, j, pattern, cstats)
        if stats:
            stats.observe(cstats.max_live)

    choices = spec.choices()
    unsplit_cats = [
        f
        for f in spec.nonsensitive_features()
        if f.kind == CATEGORICAL
    ]
    outcomes = []
    for partition in sorted(partitions, key=Partition.key):
        box_poly = _partition_box_ineqs(spec, partition)
        combos = _cat_combos(partition, unsplit_cats)
        regions: list[BiasRegion] = []
        potential: list[BiasRegion] = []
        for combo in combos:
            combo_values = {}
            for name, k in list(partition.cat_fix) + list(combo):
                f = spec.feature(name)
                for i in range(f.arity):
                    combo_values[in_var(f.offset + i)] = Fraction(1 if i == k else 0)
            keyed: dict[tuple[int, int], list[Polyhedron]] = {}
            sources: dict[tuple[int, int], list[Polyhedron]] = {}
            for j in range(m.output_size):
                for v_idx, choice in enumerate(choices):
                    pairs = _choice_regions(
                        spec, per_class[j].disjuncts, box_poly, combo_values, choice
                    )
                    if pairs:
                        keyed[(j, v_idx)] = [proj for proj, _ in pairs]
                        sources[(j, v_idx)] = [src for _, src in pairs]
            overlaps = _paired_overlaps(keyed, sources)
            cat_fixed = dict(partition.cat_fix)
            cat_fixed.update(dict(combo))
            for ka, kb, region, source_a, source_b in overlaps:
                bbox = bounding_box(region) if region.scope else {}
                witness = _search_witness(
                    m,
                    spec,
                    region,
                    bbox,
                    ((choices[ka[1]], source_a), (choices[kb[1]], source_b)),
                    cat_fixed,
                )
                slack, _ = interior_point(region)
                full_dim = slack > 0
                record = BiasRegion(
                    partition=partition,
                    classes=(ka[0], kb[0]),
                    choice_indices=(ka[1], kb[1]),
                    cat_combo=tuple(sorted(combo)),
                    region=region,
                    bbox=bbox,
                    full_dimensional=full_dim,
                    witness=witness,
                )
                if record.tie_only:
                    potential.append(record)
                else:
                    regions.append(record)
        regions.sort(key=BiasRegion.sort_key)
        potential.sort(key=BiasRegion.sort_key)
        verdict = "biased" if regions else "fair"
        outcomes.append(PartitionOutcome(partition, verdict, regions, potential))
    return outcomes


def _cat_combos(partition: Partition, unsplit_cats) -> list[tuple[tuple[str, int], ...]]:
    axes = []
    for f in unsplit_cats:
        if partition.fixed_value(f.name) is None:
            axes.append([(f.name, k) for k in range(f.arity)])
    if not axes:
        return [()]
    return [tuple(combo) for combo in product(*axes)]


def _paired_overlaps(keyed: Mapping, sources: Mapping):
    """check() plus the matching pre-projection sources per overlap;
    syntactically identical regions from different disjunct pairs collapse."""
    out = []
    keys = sorted(keyed)
    for a_idx, ka in enumerate(keys):
        for kb in keys[a_idx + 1:]:
            if ka[0] == kb[0] or ka[1] == kb[1]:
                continue
            seen = set()
            for pa, sa in zip(keyed[ka], sources[ka]):
                for pb, sb in zip(keyed[kb], sources[kb]):
                    cand = meet(pa, pb)
                    key = tuple(iq.key() for iq in cand.ineqs)
                    if key in seen:
                        continue
                    empty, _ = emptiness_witness(cand)
                    if not empty:
                        seen.add(key)
                        out.append((ka, kb, cand, sa, sb))
    return out
