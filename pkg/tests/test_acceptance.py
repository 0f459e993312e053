"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines. The random-network battery (20 seeded nets, three domains each,
checked against the dense-grid oracle) is computed once and shared.
"""

import time
from fractions import Fraction as F
from pathlib import Path

import pytest

from faircert.analysis import run_analysis
from faircert.domains import BOXES, DEEPPOLY, DOMAINS, SYMBOLIC, forward, uniquely_classified
from faircert.model import parse_model, parse_spec
from faircert.preanalysis import BudgetConfig, Partition, run_preanalysis
from faircert.report import build_report, emit_report
from tests.helpers.netgen import random_net
from tests.helpers.oracle_grid import build_oracle, partition_has_bias

FIXTURES = Path(__file__).parent / "fixtures"
SEEDS = range(20)


def _announce(name: str, detail: str = ""):
    print(f"[ACCEPTANCE] PASS {name}" + (f" ({detail})" if detail else ""))


@pytest.fixture(scope="module")
def battery():
    """Full-budget analysis of the 20 random nets under all three domains,
    plus the dense-grid oracle per net."""
    started = time.monotonic()
    out = {}
    for seed in SEEDS:
        m, spec = random_net(seed)
        initial = Partition.initial(spec)
        oracle = build_oracle(m, spec)
        runs = {}
        for domain in DOMAINS:
            runs[domain] = run_analysis(
                m, spec, [initial], domain, BudgetConfig(lower=F(0), upper=m.n_hidden)
            )
        out[seed] = (m, spec, initial, oracle, runs)
    out["elapsed"] = time.monotonic() - started
    return out


class TestOracleSoundnessExactness:
    def test_verdicts_match_grid_oracle(self, battery):
        fair_checked = biased_checked = 0
        for seed in SEEDS:
            m, spec, initial, oracle, runs = battery[seed]
            for domain, res in runs.items():
                for p, _ in res.pre.classified:
                    assert not partition_has_bias(oracle, p), (
                        f"seed {seed} {domain}: uniquely-classified partition "
                        f"has an oracle counterexample"
                    )
                    fair_checked += 1
                for o in res.outcomes:
                    if o.verdict == "fair":
                        assert not partition_has_bias(oracle, o.partition), (
                            f"seed {seed} {domain}: fair verdict refuted by grid"
                        )
                        fair_checked += 1
                    else:
                        biased_checked += 1
                        for r in o.regions:
                            if r.full_dimensional:
                                assert r.witness is not None, (
                                    f"seed {seed} {domain}: full-dimensional bias "
                                    f"region without a concrete witness pair"
                                )
        _announce(
            "oracle soundness+exactness",
            f"{fair_checked} fair / {biased_checked} biased partition checks, "
            f"battery built in {battery['elapsed']:.0f}s",
        )

    def test_battery_within_runtime_budget(self, battery):
        assert battery["elapsed"] < 600
        _announce("runtime budget", f"{battery['elapsed']:.0f}s < 600s")


class TestWalkthroughShape:
    def test_covered_three_quarters_and_exact_exclusion(self):
        started = time.monotonic()
        m = parse_model((FIXTURES / "walkthrough.net").read_bytes())
        spec = parse_spec((FIXTURES / "walkthrough.spec").read_bytes())
        pre = run_preanalysis(
            m, spec, [Partition.initial(spec)], BOXES, BudgetConfig(F(1, 4), 2)
        )
        initial_volume = Partition.initial(spec).volume(spec)
        assert pre.covered_volume(spec) / initial_volume == F(3, 4)
        assert [p.range_of("amount") for _, p in pre.excluded] == [(F(3, 4), F(1))]
        elapsed = time.monotonic() - started
        assert elapsed < 1
        _announce("walkthrough covered_fraction=3/4", f"{elapsed * 1000:.0f}ms")


class TestSeededBiasFixture:
    def test_bias_half_and_fair_low_amounts(self):
        started = time.monotonic()
        m = parse_model((FIXTURES / "andgate.net").read_bytes())
        spec = parse_spec((FIXTURES / "andgate.spec").read_bytes())
        initial = [Partition.initial(spec)]
        res = run_analysis(m, spec, initial, BOXES, BudgetConfig(F(1, 4), 1))
        rep = build_report(spec, initial, res, {})
        assert rep.bias_fraction == F(1, 2)
        low = [o for o in res.outcomes if o.partition.range_of("amount") == (F(0), F(1, 2))]
        assert low and all(o.verdict == "fair" for o in low)
        elapsed = time.monotonic() - started
        assert elapsed < 1
        _announce("seeded-bias fixture bias_fraction=1/2, fair below 1/2", f"{elapsed * 1000:.0f}ms")


class TestTilingInvariant:
    def test_fixtures_and_battery_tile_exactly(self, battery):
        cases = 0
        for seed in SEEDS:
            m, spec, initial, _, runs = battery[seed]
            for res in runs.values():
                covered = sum(
                    (p.volume(spec) for p, _ in res.pre.classified), F(0)
                ) + sum((o.partition.volume(spec) for o in res.outcomes), F(0))
                excluded = res.pre.excluded_volume(spec)
                assert covered + excluded == initial.volume(spec), f"seed {seed}"
                cases += 1
        for net, specfile, budget in [
            ("andgate.net", "andgate.spec", BudgetConfig(F(1, 4), 1)),
            ("walkthrough.net", "walkthrough.spec", BudgetConfig(F(1, 4), 2)),
        ]:
            m = parse_model((FIXTURES / net).read_bytes())
            spec = parse_spec((FIXTURES / specfile).read_bytes())
            initial = Partition.initial(spec)
            res = run_analysis(m, spec, [initial], BOXES, budget)
            covered = sum(
                (p.volume(spec) for p, _ in res.pre.classified), F(0)
            ) + sum((o.partition.volume(spec) for o in res.outcomes), F(0))
            assert covered + res.pre.excluded_volume(spec) == initial.volume(spec)
            cases += 1
        _announce("tiling volume(C)+volume(E)=volume(Y)", f"{cases} runs")


class TestBudgetMonotonicity:
    def test_covered_fraction_monotone(self):
        checked = 0
        for seed in SEEDS:
            m, spec = random_net(seed)
            initial = Partition.initial(spec)
            prev = None
            for upper in range(m.n_hidden + 1):
                pre = run_preanalysis(
                    m, spec, [initial], BOXES, BudgetConfig(F(1, 4), upper)
                )
                covered = pre.covered_volume(spec)
                if prev is not None:
                    assert covered >= prev, f"seed {seed}: U={upper} shrank coverage"
                prev = covered
                checked += 1
            # L sweep at U = hidden count (always feasible, so L = 0 halts)
            prev = None
            for lower in [F(1, 2), F(1, 4), F(1, 8), F(0)]:
                pre = run_preanalysis(
                    m, spec, [initial], BOXES, BudgetConfig(lower, m.n_hidden)
                )
                covered = pre.covered_volume(spec)
                if prev is not None:
                    assert covered >= prev, f"seed {seed}: smaller L shrank coverage"
                prev = covered
                checked += 1
            # stronger probe below the full budget (positive L keeps it finite)
            prev = None
            for lower in [F(1, 2), F(1, 4), F(1, 8)]:
                pre = run_preanalysis(
                    m,
                    spec,
                    [initial],
                    BOXES,
                    BudgetConfig(lower, max(m.n_hidden - 1, 0)),
                )
                covered = pre.covered_volume(spec)
                if prev is not None:
                    assert covered >= prev, f"seed {seed}: smaller L shrank coverage"
                prev = covered
                checked += 1
        _announce("budget monotonicity in U and L", f"{checked} sweep points")


class TestDisjunctBound:
    def test_backward_never_exceeds_two_to_the_unknowns(self, battery):
        groups = 0
        for seed in SEEDS:
            _, _, _, _, runs = battery[seed]
            for res in runs.values():
                for unknowns, max_live in res.group_disjuncts:
                    assert max_live <= 2**unknowns
                    groups += 1
        _announce("disjunct bound <= 2^U", f"{groups} pattern groups")


class TestDeterminism:
    def test_reports_byte_identical_for_1_and_4_workers(self):
        cases = []
        for net, specfile, budget in [
            ("andgate.net", "andgate.spec", BudgetConfig(F(1, 4), 1)),
            ("walkthrough.net", "walkthrough.spec", BudgetConfig(F(1, 4), 2)),
        ]:
            m = parse_model((FIXTURES / net).read_bytes())
            spec = parse_spec((FIXTURES / specfile).read_bytes())
            initial = [Partition.initial(spec)]
            payloads = []
            for workers in (1, 4):
                res = run_analysis(m, spec, initial, BOXES, budget, workers=workers)
                payloads.append(
                    emit_report(build_report(spec, initial, res, {"domain": BOXES}))
                )
            assert payloads[0] == payloads[1], net
            cases.append(net)
        m, spec = random_net(3)
        initial = [Partition.initial(spec)]
        payloads = []
        for workers in (1, 4):
            res = run_analysis(
                m, spec, initial, BOXES, BudgetConfig(F(0), m.n_hidden), workers=workers
            )
            payloads.append(emit_report(build_report(spec, initial, res, {})))
        assert payloads[0] == payloads[1]
        cases.append("random-seed-3")
        _announce("determinism across workers {1,4}", ", ".join(cases))


class TestDomainRefinement:
    def test_boxes_certification_implies_refined_domains(self):
        counts = {d: 0 for d in DOMAINS}
        partitions_checked = 0
        cases = [("andgate.net", "andgate.spec"), ("walkthrough.net", "walkthrough.spec")]
        nets = [
            (
                parse_model((FIXTURES / net).read_bytes()),
                parse_spec((FIXTURES / spec).read_bytes()),
            )
            for net, spec in cases
        ] + [random_net(seed) for seed in range(8)]
        for m, spec in nets:
            pre = run_preanalysis(
                m,
                spec,
                [Partition.initial(spec)],
                BOXES,
                BudgetConfig(F(1, 8), max(m.n_hidden - 2, 0)),
            )
            seen = [p for p, _ in pre.classified]
            seen += [p for _, p in pre.raw_feasible]
            seen += [p for _, p in pre.excluded]
            for partition in seen:
                partitions_checked += 1
                results = {}
                for domain in DOMAINS:
                    bounds, _ = forward(m, spec, domain, partition)
                    results[domain] = uniquely_classified(bounds)
                    if results[domain] is not None:
                        counts[domain] += 1
                if results[BOXES] is not None:
                    assert results[SYMBOLIC] == results[BOXES]
                    assert results[DEEPPOLY] == results[BOXES]
        assert counts[SYMBOLIC] >= counts[BOXES]
        assert counts[DEEPPOLY] >= counts[BOXES]
        _announce(
            "domain refinement",
            f"{partitions_checked} partitions; certified counts boxes={counts[BOXES]} "
            f"symbolic={counts[SYMBOLIC]} deeppoly={counts[DEEPPOLY]}",
        )
