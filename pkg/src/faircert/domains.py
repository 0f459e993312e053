"""Forward pre-analysis domains: boxes, symbolic propagation, deeppoly.

All three produce sound per-node bounds (pre-activation for hidden nodes,
plain for outputs) plus the abstract activation pattern derived from them:
a ReLU is flagged active when its pre-activation lower bound is >= 0 and
inactive when its upper bound is <= 0.

The symbolic domain keeps an exact affine form per node over the inputs and
over opaque symbols introduced at unknown ReLUs; deeppoly keeps one lower and
one upper relational bound per node w.r.t. the previous layer and concretizes
by full back-substitution to the inputs. Both are intersected with the plain
interval (boxes) step so refinement over boxes holds per node by
construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

from faircert import kernels
from faircert.model import RELU, InputSpec, NetworkModel, in_var, post_var
from faircert.numeric import LinExpr, Rat, interval_of
from faircert.polyhedra import ACTIVE, INACTIVE

BOXES = "boxes"
SYMBOLIC = "symbolic"
DEEPPOLY = "deeppoly"
DOMAINS = (BOXES, SYMBOLIC, DEEPPOLY)

_ZERO = Fraction(0)


@dataclass(frozen=True)
class ActivationPattern:
    """Partial map from hidden node (layer, index) to a fixed ReLU status."""

    flags: tuple[tuple[tuple[int, int], str], ...] = ()

    @classmethod
    def of(cls, mapping: Mapping[tuple[int, int], str]) -> "ActivationPattern":
        return cls(tuple(sorted(mapping.items())))

    def as_dict(self) -> dict[tuple[int, int], str]:
        return dict(self.flags)

    def get(self, node: tuple[int, int]) -> str | None:
        return self.as_dict().get(node)

    def __len__(self) -> int:
        return len(self.flags)

    def subsumes(self, other: "ActivationPattern") -> bool:
        """True if this (more abstract) pattern's flags are a subset of
        ``other``'s, i.e. ``other`` is one of its refinements."""
        return set(self.flags) <= set(other.flags)

    def __str__(self) -> str:
        if not self.flags:
            return "<empty>"
        bits = []
        for (layer, j), st in self.flags:
            mark = "" if st == ACTIVE else "!"
            bits.append(f"{mark}n{layer}_{j}")
        return " ".join(bits)


@dataclass
class NodeBounds:
    """Pre-activation bounds per hidden node and bounds per output node."""

    pre: dict[tuple[int, int], tuple[Rat, Rat]] = field(default_factory=dict)
    post: dict[tuple[int, int], tuple[Rat, Rat]] = field(default_factory=dict)
    out: dict[int, tuple[Rat, Rat]] = field(default_factory=dict)


def input_box_list(m: NetworkModel, box: Mapping) -> tuple[list[Rat], list[Rat]]:
    los, his = [], []
    for j in range(m.input_size):
        lo, hi = box[in_var(j)]
        los.append(lo)
        his.append(hi)
    return los, his


def _flag_of(lo: Rat, hi: Rat) -> str | None:
    if lo >= 0:
        return ACTIVE
    if hi <= 0:
        return INACTIVE
    return None


def _clamp(lo: Rat, hi: Rat) -> tuple[Rat, Rat]:
    return (max(_ZERO, lo), max(_ZERO, hi))


def _meet_interval(a: tuple[Rat, Rat], b: tuple[Rat, Rat]) -> tuple[Rat, Rat]:
    return (max(a[0], b[0]), min(a[1], b[1]))


def forward(
    m: NetworkModel, spec: InputSpec, domain: str, partition
) -> tuple[NodeBounds, ActivationPattern]:
    """Sound bounds and abstract activation pattern for one input partition."""
    box = partition.input_box(spec)
    if domain == BOXES:
        return _forward_boxes(m, box)
    if domain == SYMBOLIC:
        return _forward_symbolic(m, box)
    if domain == DEEPPOLY:
        return _forward_deeppoly(m, box)
    raise ValueError(f"unknown forward domain {domain!r}")


def _forward_boxes(m: NetworkModel, box: Mapping) -> tuple[NodeBounds, ActivationPattern]:
    bounds = NodeBounds()
    flags: dict[tuple[int, int], str] = {}
    los, his = input_box_list(m, box)
    for idx, layer in enumerate(m.layers):
        layer_no = idx + 1
        nlos, nhis = [], []
        for j, (row, bias) in enumerate(zip(layer.weights, layer.biases)):
            lo, hi = kernels.interval_dense(list(row), bias, los, his)
            if layer.activation == RELU:
                bounds.pre[(layer_no, j)] = (lo, hi)
                flag = _flag_of(lo, hi)
                if flag is not None:
                    flags[(layer_no, j)] = flag
                lo, hi = _clamp(lo, hi)
                bounds.post[(layer_no, j)] = (lo, hi)
            else:
                bounds.out[j] = (lo, hi)
            nlos.append(lo)
            nhis.append(hi)
        los, his = nlos, nhis
    return bounds, ActivationPattern.of(flags)


def _forward_symbolic(m: NetworkModel, box: Mapping) -> tuple[NodeBounds, ActivationPattern]:
    bounds = NodeBounds()
    flags: dict[tuple[int, int], str] = {}
    env: dict = dict(box)  # interval per input var and per opaque symbol
    exprs = [LinExpr.var(in_var(j)) for j in range(m.input_size)]
    ivals = [box[in_var(j)] for j in range(m.input_size)]
    for idx, layer in enumerate(m.layers):
        layer_no = idx + 1
        nexprs, nivals = [], []
        for j, (row, bias) in enumerate(zip(layer.weights, layer.biases)):
            expr = LinExpr({}, bias)
            blo = bhi = bias  # stepwise interval (boxes) for the defensive meet
            for w, sub, (slo, shi) in zip(row, exprs, ivals):
                if w == 0:
                    continue
                expr = expr.add(sub.scale(w))
                if w > 0:
                    blo += w * slo
                    bhi += w * shi
                else:
                    blo += w * shi
                    bhi += w * slo
            lo, hi = _meet_interval(interval_of(expr, env), (blo, bhi))
            if layer.activation == RELU:
                node = (layer_no, j)
                bounds.pre[node] = (lo, hi)
                flag = _flag_of(lo, hi)
                if flag is not None:
                    flags[node] = flag
                if flag == ACTIVE:
                    post_expr, post_iv = expr, (lo, hi)
                elif flag == INACTIVE:
                    post_expr, post_iv = LinExpr(), (_ZERO, _ZERO)
                else:
                    sym = post_var(layer_no, j)
                    post_iv = _clamp(lo, hi)
                    env[sym] = post_iv
                    post_expr = LinExpr.var(sym)
                bounds.post[node] = post_iv
                nexprs.append(post_expr)
                nivals.append(post_iv)
            else:
                bounds.out[j] = (lo, hi)
                nexprs.append(expr)
                nivals.append((lo, hi))
        exprs, ivals = nexprs, nivals
    return bounds, ActivationPattern.of(flags)


# deeppoly relational rows are dense over the previous layer with the
# constant in the trailing slot: [c_0, ..., c_{k-1}, const]


def _dense_row(row: tuple, bias: Rat) -> list[Rat]:
    return list(row) + [bias]


def _back_substitute(
    row: list[Rat],
    rels: list[tuple[list[list[Rat]], list[list[Rat]]]],
    los: list[Rat],
    his: list[Rat],
) -> tuple[Rat, Rat]:
    """Concretize an affine row over layer ``len(rels)`` down to the inputs.

    ``rels[t]`` holds (lower rows, upper rows) of layer ``t+1``'s post values
    over layer ``t``'s post values (layer 0 = inputs).
    """
    lower = list(row)
    upper = list(row)
    for lo_rows, up_rows in reversed(rels):
        width = len(lo_rows[0]) if lo_rows else 1
        zeros = [_ZERO] * width
        lsel, lw, usel, uw = [], [], [], []
        for k, c in enumerate(lower[:-1]):
            if c == 0:
                continue
            lw.append(c)
            lsel.append(lo_rows[k] if c > 0 else up_rows[k])
        for k, c in enumerate(upper[:-1]):
            if c == 0:
                continue
            uw.append(c)
            usel.append(up_rows[k] if c > 0 else lo_rows[k])
        lbias = zeros[:-1] + [lower[-1]]
        ubias = zeros[:-1] + [upper[-1]]
        lower = kernels.combine_dense(lw, lsel, lbias)
        upper = kernels.combine_dense(uw, usel, ubias)
    lo, _ = kernels.interval_dense(lower[:-1], lower[-1], los, his)
    _, hi = kernels.interval_dense(upper[:-1], upper[-1], los, his)
    return lo, hi


def _forward_deeppoly(m: NetworkModel, box: Mapping) -> tuple[NodeBounds, ActivationPattern]:
    bounds = NodeBounds()
    flags: dict[tuple[int, int], str] = {}
    los, his = input_box_list(m, box)
    step_los, step_his = list(los), list(his)  # stepwise boxes, for the meet
    rels: list[tuple[list[list[Rat]], list[list[Rat]]]] = []
    for idx, layer in enumerate(m.layers):
        layer_no = idx + 1
        lo_rows: list[list[Rat]] = []
        up_rows: list[list[Rat]] = []
        nslos, nshis = [], []
        for j, (wrow, bias) in enumerate(zip(layer.weights, layer.biases)):
            affine = _dense_row(wrow, bias)
            blo, bhi = kernels.interval_dense(list(wrow), bias, step_los, step_his)
            lo, hi = _meet_interval(_back_substitute(affine, rels, los, his), (blo, bhi))
            zeros = [_ZERO] * len(affine)
            if layer.activation == RELU:
                node = (layer_no, j)
                bounds.pre[node] = (lo, hi)
                flag = _flag_of(lo, hi)
                if flag is not None:
                    flags[node] = flag
                if flag == ACTIVE:
                    lo_rows.append(affine)
                    up_rows.append(affine)
                    plo, phi = lo, hi
                elif flag == INACTIVE:
                    lo_rows.append(zeros)
                    up_rows.append(zeros)
                    plo, phi = _ZERO, _ZERO
                else:
                    # triangle relaxation: 0 <= post <= hi/(hi-lo) * (pre - lo)
                    slope = hi / (hi - lo)
                    up = [slope * c for c in affine]
                    up[-1] = slope * (affine[-1] - lo)
                    lo_rows.append(zeros)
                    up_rows.append(up)
                    plo, phi = _ZERO, hi
                bounds.post[node] = (plo, phi)
                nslos.append(plo)
                nshis.append(phi)
            else:
                bounds.out[j] = (lo, hi)
                nslos.append(lo)
                nshis.append(hi)
        rels.append((lo_rows, up_rows))
        step_los, step_his = nslos, nshis
    return bounds, ActivationPattern.of(flags)


def uniquely_classified(b: NodeBounds) -> int | None:
    """Class whose lower bound strictly dominates every other upper bound."""
    for j, (lo, _) in b.out.items():
        if all(lo > hi for i, (_, hi) in b.out.items() if i != j):
            return j
    return None
