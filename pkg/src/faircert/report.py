"""Report assembly: coverage/bias percentages, serialization, resume data.

All fractions are exact rationals; the emitted document carries each one both
as a ``p/q`` string and as a float approximation. Arrays are sorted by
partition lower bounds so the report bytes are independent of scheduling and
worker count.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from faircert.analysis import AnalysisResult
from faircert.backward import BiasRegion
from faircert.model import CATEGORICAL, CONTINUOUS, InputSpec, in_var
from faircert.numeric import Rat, format_rational, parse_rational
from faircert.preanalysis import Partition


@dataclass
class AnalysisReport:
    verdict: str
    covered_fraction: Rat
    fair_fraction: Rat
    bias_fraction: Rat
    bias_fraction_analyzed: Rat
    excluded_fraction: Rat
    biased_regions: list[dict] = field(default_factory=list)
    potential_regions: list[dict] = field(default_factory=list)
    completed: list[dict] = field(default_factory=list)
    excluded: list[dict] = field(default_factory=list)
    config: dict = field(default_factory=dict)
    timed_out: bool = False


def _box_union_volume(boxes: Sequence[dict]) -> Rat:
    """Exact volume of a union of axis-aligned boxes by coordinate sweep."""
    if not boxes:
        return Fraction(0)
    dims = sorted(boxes[0].keys())
    if not dims:
        return Fraction(1)
    cuts = {d: sorted({b[d][0] for b in boxes} | {b[d][1] for b in boxes}) for d in dims}
    total = Fraction(0)
    cells = [()]
    for d in dims:
        cells = [cell + (i,) for cell in cells for i in range(len(cuts[d]) - 1)]
    for cell in cells:
        lows = {d: cuts[d][i] for d, i in zip(dims, cell)}
        highs = {d: cuts[d][i + 1] for d, i in zip(dims, cell)}
        vol = Fraction(1)
        for d in dims:
            vol *= highs[d] - lows[d]
        if vol == 0:
            continue
        covered = any(
            all(b[d][0] <= lows[d] and highs[d] <= b[d][1] for d in dims) for b in boxes
        )
        if covered:
            total += vol
    return total


def quantify_bias(regions: Iterable[BiasRegion], spec: InputSpec) -> Rat:
    """Bias measure relative to the full declared input space: fused
    bounding-box volume per fixed-categorical context, weighted 1/arity per
    fixed categorical feature, with sensitive dimensions spanning fully."""
    groups: dict[tuple, list[dict]] = {}
    for r in regions:
        ctx = tuple(sorted(set(r.partition.cat_fix) | set(r.cat_combo)))
        groups.setdefault(ctx, []).append(r.bbox)
    full = Fraction(1)
    for f in spec.features:
        if f.kind == CONTINUOUS:
            full *= f.hi - f.lo
    sens_span = Fraction(1)
    for f in spec.features:
        if f.kind == CONTINUOUS and f.sensitive:
            sens_span *= f.hi - f.lo
    total = Fraction(0)
    for ctx, boxes in groups.items():
        weight = Fraction(1)
        for name, _ in ctx:
            weight /= spec.feature(name).arity
        total += weight * sens_span * _box_union_volume(boxes)
    return total / full


def _fr(value: Rat) -> str:
    return format_rational(Fraction(value))


def _partition_json(p: Partition) -> dict:
    return {
        "box": {name: [_fr(lo), _fr(hi)] for name, lo, hi in p.box},
        "fixed": {name: k for name, k in p.cat_fix},
    }


def _choice_json(spec: InputSpec, choice) -> list[dict]:
    out = []
    for name, payload in choice:
        if spec.feature(name).kind == CATEGORICAL:
            out.append({"feature": name, "value": payload})
        else:
            out.append({"feature": name, "range": [_fr(payload[0]), _fr(payload[1])]})
    return out


def _region_json(spec: InputSpec, r: BiasRegion) -> dict:
    choices = spec.choices()
    var_names = {}
    for f in spec.features:
        if f.kind == CONTINUOUS:
            var_names[in_var(f.offset)] = f.name
    doc = {
        "partition": _partition_json(r.partition),
        "classes": list(r.classes),
        "choices": [
            _choice_json(spec, choices[r.choice_indices[0]]),
            _choice_json(spec, choices[r.choice_indices[1]]),
        ],
        "fixed": {name: k for name, k in r.cat_combo},
        "box": {var_names[v]: [_fr(lo), _fr(hi)] for v, (lo, hi) in sorted(r.bbox.items())},
        "full_dimensional": r.full_dimensional,
        "tie_only": r.tie_only,
    }
    if r.witness is not None:
        xa, xb, ca, cb = r.witness
        doc["witness"] = {
            "a": [_fr(v) for v in xa],
            "b": [_fr(v) for v in xb],
            "class_a": ca,
            "class_b": cb,
        }
    else:
        doc["witness"] = None
    return doc


def build_report(
    spec: InputSpec,
    initial: Sequence[Partition],
    result: AnalysisResult,
    config: dict,
) -> AnalysisReport:
    vol_y = sum((p.volume(spec) for p in initial), Fraction(0))
    excluded_vol = result.pre.excluded_volume(spec)
    # timeouts can move feasible partitions to E, so coverage is what is left
    covered = vol_y - excluded_vol

    fair_vol = sum((p.volume(spec) for p, _ in result.pre.classified), Fraction(0))
    confirmed: list[BiasRegion] = []
    potential: list[BiasRegion] = []
    completed_json: list[tuple[tuple, dict]] = []
    for p, klass in result.pre.classified:
        completed_json.append(
            (p.key(), {"partition": _partition_json(p), "verdict": "fair", "class": klass})
        )
    for outcome in result.outcomes:
        if outcome.verdict == "fair":
            fair_vol += outcome.partition.volume(spec)
        confirmed.extend(outcome.regions)
        potential.extend(outcome.potential)
        completed_json.append(
            (
                outcome.partition.key(),
                {
                    "partition": _partition_json(outcome.partition),
                    "verdict": outcome.verdict,
                    "class": None,
                },
            )
        )
    completed_json.sort(key=lambda item: item[0])

    bias_fraction = quantify_bias(confirmed, spec)
    full = Fraction(1)
    for f in spec.features:
        if f.kind == CONTINUOUS:
            full *= f.hi - f.lo
    covered_fraction = covered / vol_y if vol_y else Fraction(0)
    analyzed = bias_fraction * full / covered if covered else Fraction(0)

    confirmed.sort(key=BiasRegion.sort_key)
    potential.sort(key=BiasRegion.sort_key)
    excluded_json = [
        {"pattern": [[list(node), st] for node, st in pat.flags], "partition": _partition_json(p)}
        for pat, p in result.pre.excluded
    ]
    return AnalysisReport(
        verdict="biased" if confirmed else "fair",
        covered_fraction=covered_fraction,
        fair_fraction=fair_vol / vol_y if vol_y else Fraction(0),
        bias_fraction=bias_fraction,
        bias_fraction_analyzed=analyzed,
        excluded_fraction=excluded_vol / vol_y if vol_y else Fraction(0),
        biased_regions=[_region_json(spec, r) for r in confirmed],
        potential_regions=[_region_json(spec, r) for r in potential],
        completed=[doc for _, doc in completed_json],
        excluded=excluded_json,
        config=config,
        timed_out=result.timed_out,
    )


def emit_report(report: AnalysisReport) -> bytes:
    doc = {
        "verdict": report.verdict,
        "covered_fraction": _fr(report.covered_fraction),
        "covered_fraction_approx": float(report.covered_fraction),
        "fair_fraction": _fr(report.fair_fraction),
        "fair_fraction_approx": float(report.fair_fraction),
        "bias_fraction": _fr(report.bias_fraction),
        "bias_fraction_approx": float(report.bias_fraction),
        "bias_fraction_analyzed": _fr(report.bias_fraction_analyzed),
        "bias_fraction_analyzed_approx": float(report.bias_fraction_analyzed),
        "excluded_fraction": _fr(report.excluded_fraction),
        "excluded_fraction_approx": float(report.excluded_fraction),
        "biased_regions": report.biased_regions,
        "potential_bias_regions": report.potential_regions,
        "completed": report.completed,
        "excluded": report.excluded,
        "config": report.config,
        "timed_out": report.timed_out,
    }
    return (json.dumps(doc, indent=2, ensure_ascii=False) + "\n").encode("utf-8")


def parse_resume(text: bytes | str, spec: InputSpec) -> list[Partition]:
    """Re-seed the queue from a report's ``excluded`` array."""
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    doc = json.loads(text)
    entries = doc["excluded"] if isinstance(doc, dict) else doc
    partitions = []
    for entry in entries:
        pdoc = entry["partition"] if "partition" in entry else entry
        box = []
        for f in spec.features:
            if f.kind != CONTINUOUS:
                continue
            lo_s, hi_s = pdoc["box"][f.name]
            box.append((f.name, parse_rational(lo_s), parse_rational(hi_s)))
        fixed = tuple(sorted((name, int(k)) for name, k in pdoc.get("fixed", {}).items()))
        partitions.append(Partition(tuple(box), fixed))
    return partitions
