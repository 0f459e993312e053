"""Backward analysis: hand-checked preimages, the pairwise check, verdicts
against the dense-grid oracle, witnesses, and the disjunct bound."""

from fractions import Fraction as F
from pathlib import Path

import pytest

from faircert.analysis import run_analysis
from faircert.backward import (
    BackwardStats,
    analyze_pattern_group,
    backward,
    check,
)
from faircert.domains import ActivationPattern
from faircert.model import in_var, parse_model, parse_spec
from faircert.numeric import LinExpr, ineq_ge, ineq_le
from faircert.polyhedra import Polyhedron, PolySet
from faircert.preanalysis import BudgetConfig, Partition
from tests.helpers.netgen import random_net
from tests.helpers.oracle_grid import build_oracle, partition_has_bias

FIXTURES = Path(__file__).parent / "fixtures"

# one hidden node n = relu(x); outputs o0 = n, o1 = 1 - n
ONE_NODE = parse_model(
    "inputs 1\nlayer 1 1 relu\n1\nbias 0\nlayer 2 1 identity\n1\n-1\nbias 0 1"
)


class TestBackward:
    def test_active_pattern_single_disjunct(self):
        ps = backward(ONE_NODE, 0, ActivationPattern.of({(1, 0): "active"}))
        (d,) = ps.disjuncts
        # o0 >= o1 and the active flag give exactly x >= 1/2
        assert d.ineqs == (ineq_ge(LinExpr({in_var(0): F(2)}, F(-1))),)

    def test_empty_pattern_prunes_inactive_branch(self):
        ps = backward(ONE_NODE, 0, ActivationPattern.of({}))
        (d,) = ps.disjuncts  # the inactive branch yields 1 <= 0 and is pruned
        assert d.ineqs == (ineq_ge(LinExpr({in_var(0): F(2)}, F(-1))),)

    def test_contradictory_full_pattern_is_empty(self):
        # n1 = relu(x), n2 = relu(-x - 1): both active forces x >= 0, x <= -1
        m = parse_model(
            "inputs 1\nlayer 2 1 relu\n1\n-1\nbias 0 -1\n"
            "layer 2 2 identity\n1 1\n0 0\nbias 0 0"
        )
        full = ActivationPattern.of({(1, 0): "active", (1, 1): "active"})
        for j in range(2):
            assert backward(m, j, full).disjuncts == ()

    def test_disjunct_high_water_mark_bounded(self):
        m, _spec = random_net(3)
        for pattern, budget in [
            (ActivationPattern.of({}), m.n_hidden),
            (ActivationPattern.of({(1, 0): "active"}), m.n_hidden - 1),
        ]:
            for j in range(m.output_size):
                stats = BackwardStats()
                backward(m, j, pattern, stats)
                assert stats.max_live <= 2**budget


def interval_poly(lo, hi):
    v = in_var(0)
    return Polyhedron.make(
        {v},
        [
            ineq_ge(LinExpr({v: F(1)}, -F(lo))),
            ineq_le(LinExpr({v: F(1)}, -F(hi))),
        ],
    )


class TestCheck:
    def test_disjoint_projections_are_fair(self):
        regions = {0: [interval_poly(F(0), F(2, 5))], 1: [interval_poly(F(3, 5), F(1))]}
        assert check(regions) == []

    def test_overlap_reported(self):
        regions = {0: [interval_poly(F(0), F(3, 5))], 1: [interval_poly(F(1, 2), F(1))]}
        out = check(regions)
        assert len(out) == 1
        _, _, region = out[0]
        from faircert.polyhedra import bounding_box

        assert bounding_box(region)[in_var(0)] == (F(1, 2), F(3, 5))

    def test_three_classes_pairwise(self):
        shared = interval_poly(F(2, 5), F(3, 5))
        regions = {0: [shared], 1: [shared], 2: [shared]}
        out = check(regions)
        assert sorted((a, b) for a, b, _ in out) == [(0, 1), (0, 2), (1, 2)]

    def test_same_class_not_compared(self):
        regions = {(0, 0): [interval_poly(F(0), F(1))], (0, 1): [interval_poly(F(0), F(1))]}
        assert check(regions) == []

    def test_same_choice_not_compared(self):
        regions = {(0, 0): [interval_poly(F(0), F(1))], (1, 0): [interval_poly(F(0), F(1))]}
        assert check(regions) == []


ANDGATE = parse_model((FIXTURES / "andgate.net").read_bytes())
ANDGATE_SPEC = parse_spec((FIXTURES / "andgate.spec").read_bytes())


def andgate_partition(lo, hi):
    return Partition((("amount", F(lo), F(hi)), ("age", F(0), F(1))))


class TestAnalyzePatternGroup:
    def test_low_amounts_fair(self):
        outcomes = analyze_pattern_group(
            ANDGATE,
            ANDGATE_SPEC,
            ActivationPattern.of({(1, 0): "inactive", (1, 1): "active"}),
            [andgate_partition(0, "1/2")],
        )
        (o,) = outcomes
        assert o.verdict == "fair"
        assert o.regions == []

    def test_high_amounts_biased_with_witness(self):
        outcomes = analyze_pattern_group(
            ANDGATE,
            ANDGATE_SPEC,
            ActivationPattern.of({(1, 0): "active", (1, 1): "inactive"}),
            [andgate_partition("1/2", 1)],
        )
        (o,) = outcomes
        assert o.verdict == "biased"
        assert o.regions
        for r in o.regions:
            assert r.witness is not None
            xa, xb, ca, cb = r.witness
            assert ca != cb
            assert xa[0] == xb[0]  # same amount, different age

    def test_network_ignoring_sensitive_input_is_fair(self):
        # weights from the age input are all zero
        m = parse_model(
            "inputs 2\nlayer 2 2 relu\n1 0\n-1 0\nbias -1/2 1/2\n"
            "layer 2 2 identity\n1 -1\n-1 1\nbias 0 0"
        )
        outcomes = analyze_pattern_group(
            m, ANDGATE_SPEC, ActivationPattern.of({}), [andgate_partition(0, 1)]
        )
        assert outcomes[0].verdict == "fair"
        assert outcomes[0].regions == []
        # the fold of the two ReLUs leaves only measure-zero tie slivers
        assert all(not r.full_dimensional for r in outcomes[0].potential)


class TestVerdictsMatchGridOracle:
    @pytest.mark.parametrize("seed", [3, 4, 8, 11])
    def test_fair_verdicts_have_no_grid_counterexample(self, seed):
        m, spec = random_net(seed)
        oracle = build_oracle(m, spec)
        res = run_analysis(
            m,
            spec,
            [Partition.initial(spec)],
            "boxes",
            BudgetConfig(lower=F(0), upper=m.n_hidden),
        )
        for p, _ in res.pre.classified:
            assert not partition_has_bias(oracle, p)
        for o in res.outcomes:
            if o.verdict == "fair":
                assert not partition_has_bias(oracle, o.partition)
            else:
                assert any(r.witness or r.full_dimensional for r in o.regions)

    def test_andgate_partition_verdicts(self):
        oracle = build_oracle(ANDGATE, ANDGATE_SPEC)
        assert not partition_has_bias(oracle, andgate_partition(0, "1/2"))
        assert partition_has_bias(oracle, andgate_partition("1/2", 1))


class TestGroupIndependence:
    def test_group_order_does_not_change_verdicts(self):
        from faircert.preanalysis import run_preanalysis

        pre = run_preanalysis(
            ANDGATE,
            ANDGATE_SPEC,
            [Partition.initial(ANDGATE_SPEC)],
            "boxes",
            BudgetConfig(lower=F(1, 4), upper=1),
        )
        groups = pre.feasible.groups()
        assert len(groups) == 2
        one = [
            (o.partition.key(), o.verdict, [r.sort_key() for r in o.regions])
            for pat, parts in groups
            for o in analyze_pattern_group(ANDGATE, ANDGATE_SPEC, pat, parts)
        ]
        other = [
            (o.partition.key(), o.verdict, [r.sort_key() for r in o.regions])
            for pat, parts in reversed(groups)
            for o in analyze_pattern_group(ANDGATE, ANDGATE_SPEC, pat, parts)
        ]
        assert sorted(one) == sorted(other)
