"""Network model, input-layer specification, query parsing, concrete oracle.

The model file is a line-oriented text format with exact decimal/rational
weight tokens; hidden layers are ReLU and the output layer is the identity.
The concrete evaluator is the analyzer's ground truth: exact rational forward
execution with argmax classing (ties break to the lowest class index).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator

from faircert.numeric import LinExpr, Rat, parse_rational

RELU = "relu"
IDENTITY = "identity"


class ParseError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


def in_var(j: int) -> tuple:
    return ("in", j)


def pre_var(layer: int, j: int) -> tuple:
    return ("pre", layer, j)


def post_var(layer: int, j: int) -> tuple:
    return ("post", layer, j)


def out_var(j: int) -> tuple:
    return ("out", j)


@dataclass(frozen=True)
class Layer:
    weights: tuple[tuple[Rat, ...], ...]
    biases: tuple[Rat, ...]
    activation: str

    def __post_init__(self):
        if len(self.biases) != len(self.weights):
            raise ParseError("bias length does not match weight row count")
        if self.activation not in (RELU, IDENTITY):
            raise ParseError(f"unsupported activation {self.activation!r}")

    @property
    def rows(self) -> int:
        return len(self.weights)

    @property
    def cols(self) -> int:
        return len(self.weights[0])


@dataclass(frozen=True)
class NetworkModel:
    layers: tuple[Layer, ...]
    input_size: int

    def __post_init__(self):
        prev = self.input_size
        for idx, layer in enumerate(self.layers):
            if any(len(row) != prev for row in layer.weights):
                raise ParseError(
                    f"layer {idx + 1}: weight rows must have {prev} columns"
                )
            hidden = idx < len(self.layers) - 1
            if hidden and layer.activation != RELU:
                raise ParseError(f"layer {idx + 1}: hidden activation must be relu")
            if not hidden and layer.activation != IDENTITY:
                raise ParseError("output layer activation must be identity")
            prev = layer.rows
        if self.output_size < 2:
            raise ParseError("output layer must have at least 2 classes")

    @property
    def output_size(self) -> int:
        return self.layers[-1].rows

    @property
    def n_layers(self) -> int:
        return len(self.layers)

    def hidden_nodes(self) -> list[tuple[int, int]]:
        """(layer, index) pairs for every ReLU node; layers are 1-based."""
        out = []
        for idx, layer in enumerate(self.layers[:-1]):
            out.extend((idx + 1, j) for j in range(layer.rows))
        return out

    @property
    def n_hidden(self) -> int:
        return sum(layer.rows for layer in self.layers[:-1])

    def prev_layer_vars(self, layer_idx: int) -> list[tuple]:
        """Variable ids feeding layer ``layer_idx`` (1-based)."""
        if layer_idx == 1:
            return [in_var(j) for j in range(self.input_size)]
        return [post_var(layer_idx - 1, j) for j in range(self.layers[layer_idx - 2].rows)]

    def node_affine(self, layer_idx: int, j: int) -> LinExpr:
        """Pre-activation of node ``j`` of layer ``layer_idx`` over the
        preceding layer's variables."""
        layer = self.layers[layer_idx - 1]
        prev = self.prev_layer_vars(layer_idx)
        coeffs = {v: w for v, w in zip(prev, layer.weights[j]) if w != 0}
        return LinExpr(coeffs, layer.biases[j])


def eval_scores(m: NetworkModel, x: list[Rat]) -> list[Rat]:
    """Exact output scores of the network at point ``x``."""
    if len(x) != m.input_size:
        raise ValueError(f"expected {m.input_size} inputs, got {len(x)}")
    values = list(x)
    for idx, layer in enumerate(m.layers):
        nxt = []
        for row, bias in zip(layer.weights, layer.biases):
            acc = bias
            for w, v in zip(row, values):
                if w != 0:
                    acc += w * v
            if layer.activation == RELU and acc < 0:
                acc = Fraction(0)
            nxt.append(acc)
        values = nxt
    return values


def eval_concrete(m: NetworkModel, x: list[Rat]) -> int:
    """Class index with the highest output score; ties break low."""
    scores = eval_scores(m, x)
    best = 0
    for j in range(1, len(scores)):
        if scores[j] > scores[best]:
            best = j
    return best


def _content_lines(text: bytes | str) -> Iterator[tuple[int, list[str]]]:
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    for lineno, raw in enumerate(text.split("\n"), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield lineno, line.split()


def _rat(token: str, lineno: int) -> Rat:
    try:
        return parse_rational(token)
    except ValueError as exc:
        raise ParseError(str(exc), lineno) from None


def parse_model(text: bytes | str) -> NetworkModel:
    """Parse the line-oriented model format (see README for the grammar)."""
    lines = list(_content_lines(text))
    if not lines:
        raise ParseError("empty model file")
    pos = 0
    lineno, words = lines[pos]
    if words[0] != "inputs" or len(words) != 2:
        raise ParseError("expected 'inputs <k>'", lineno)
    try:
        input_size = int(words[1])
    except ValueError:
        raise ParseError("input count must be an integer", lineno) from None
    if input_size < 1:
        raise ParseError("input count must be positive", lineno)
    pos += 1

    layers: list[Layer] = []
    while pos < len(lines):
        lineno, words = lines[pos]
        if words[0] != "layer" or len(words) != 4:
            raise ParseError("expected 'layer <rows> <cols> <relu|identity>'", lineno)
        try:
            rows, cols = int(words[1]), int(words[2])
        except ValueError:
            raise ParseError("layer shape must be integers", lineno) from None
        activation = words[3]
        if activation not in (RELU, IDENTITY):
            raise ParseError(f"unknown activation {activation!r}", lineno)
        if rows < 1 or cols < 1:
            raise ParseError("layer shape must be positive", lineno)
        pos += 1

        weights = []
        for r in range(rows):
            if pos >= len(lines):
                raise ParseError(f"missing weight row {r + 1} of {rows}", lineno)
            wline, tokens = lines[pos]
            if len(tokens) != cols:
                raise ParseError(
                    f"weight row has {len(tokens)} entries, expected {cols}", wline
                )
            weights.append(tuple(_rat(t, wline) for t in tokens))
            pos += 1
        if pos >= len(lines):
            raise ParseError("missing bias line", lineno)
        bline, tokens = lines[pos]
        if tokens[0] != "bias" or len(tokens) != rows + 1:
            raise ParseError(f"expected 'bias' with {rows} entries", bline)
        biases = tuple(_rat(t, bline) for t in tokens[1:])
        pos += 1
        layers.append(Layer(tuple(weights), biases, activation))

    if not layers:
        raise ParseError("model has no layers")
    return NetworkModel(tuple(layers), input_size)


CONTINUOUS = "continuous"
CATEGORICAL = "categorical"


@dataclass(frozen=True)
class Feature:
    name: str
    kind: str
    sensitive: bool
    lo: Rat = Fraction(0)
    hi: Rat = Fraction(1)
    arity: int = 0
    offset: int = 0  # first input-node index of this feature

    @property
    def width(self) -> int:
        return self.arity if self.kind == CATEGORICAL else 1

    def node_ids(self) -> list[tuple]:
        return [in_var(self.offset + k) for k in range(self.width)]


@dataclass(frozen=True)
class InputSpec:
    features: tuple[Feature, ...]
    # per continuous sensitive feature name: list of closed subranges
    range_choices: dict[str, tuple[tuple[Rat, Rat], ...]] = field(default_factory=dict)

    @property
    def total_nodes(self) -> int:
        return sum(f.width for f in self.features)

    def feature(self, name: str) -> Feature:
        for f in self.features:
            if f.name == name:
                return f
        raise KeyError(f"unknown feature {name!r}")

    def sensitive_features(self) -> list[Feature]:
        return [f for f in self.features if f.sensitive]

    def nonsensitive_features(self) -> list[Feature]:
        return [f for f in self.features if not f.sensitive]

    def sensitive_node_ids(self) -> list[tuple]:
        out = []
        for f in self.sensitive_features():
            out.extend(f.node_ids())
        return out

    def choices(self) -> list[tuple[tuple[str, object], ...]]:
        """Joint value choices over all sensitive features.

        Each choice is a tuple of (feature name, payload) pairs; the payload
        is a value index for a categorical feature and a closed (lo, hi)
        subrange for a continuous one.
        """
        per_feature: list[list[tuple[str, object]]] = []
        for f in self.sensitive_features():
            if f.kind == CATEGORICAL:
                per_feature.append([(f.name, k) for k in range(f.arity)])
            else:
                per_feature.append([(f.name, rng) for rng in self.range_choices[f.name]])
        out: list[tuple[tuple[str, object], ...]] = [()]
        for options in per_feature:
            out = [prev + (opt,) for prev in out for opt in options]
        return out

    def validate_against(self, m: NetworkModel) -> None:
        if self.total_nodes != m.input_size:
            raise ParseError(
                f"spec declares {self.total_nodes} input nodes, model has {m.input_size}"
            )


def parse_spec(text: bytes | str) -> InputSpec:
    """Parse the input-layer specification format."""
    features: list[Feature] = []
    range_choices: dict[str, tuple[tuple[Rat, Rat], ...]] = {}
    names: set[str] = set()
    offset = 0
    last_cont_sensitive: str | None = None

    for lineno, words in _content_lines(text):
        kind = words[0]
        if kind == CONTINUOUS:
            if len(words) not in (4, 5):
                raise ParseError("expected 'continuous <name> <lo> <hi> [sensitive]'", lineno)
            name = words[1]
            lo, hi = _rat(words[2], lineno), _rat(words[3], lineno)
            if lo >= hi:
                raise ParseError(f"range of {name!r} must have lo < hi", lineno)
            sensitive = len(words) == 5
            if sensitive and words[4] != "sensitive":
                raise ParseError(f"unexpected token {words[4]!r}", lineno)
            feat = Feature(name, CONTINUOUS, sensitive, lo=lo, hi=hi, offset=offset)
            if sensitive:
                last_cont_sensitive = name
            offset += 1
        elif kind == CATEGORICAL:
            if len(words) not in (3, 4):
                raise ParseError("expected 'categorical <name> <k> [sensitive]'", lineno)
            name = words[1]
            try:
                arity = int(words[2])
            except ValueError:
                raise ParseError("categorical arity must be an integer", lineno) from None
            if arity < 2:
                raise ParseError(f"categorical {name!r} needs arity >= 2", lineno)
            sensitive = len(words) == 4
            if sensitive and words[3] != "sensitive":
                raise ParseError(f"unexpected token {words[3]!r}", lineno)
            feat = Feature(name, CATEGORICAL, sensitive, arity=arity, offset=offset)
            offset += arity
        elif kind == "choices":
            if last_cont_sensitive is None:
                raise ParseError("'choices' must follow a continuous sensitive feature", lineno)
            spans = []
            for part in " ".join(words[1:]).split(","):
                part = part.strip()
                if ":" not in part:
                    raise ParseError(f"bad choice {part!r}, expected lo:hi", lineno)
                lo_s, hi_s = part.split(":", 1)
                spans.append((_rat(lo_s, lineno), _rat(hi_s, lineno)))
            range_choices[last_cont_sensitive] = tuple(spans)
            continue
        else:
            raise ParseError(f"unknown declaration {kind!r}", lineno)
        if feat.name in names:
            raise ParseError(f"duplicate feature {feat.name!r}", lineno)
        names.add(feat.name)
        features.append(feat)

    spec = InputSpec(tuple(features), range_choices)
    sens = spec.sensitive_features()
    if not features:
        raise ParseError("spec declares no features")
    if not sens:
        raise ParseError("no sensitive feature declared")
    if not spec.nonsensitive_features():
        raise ParseError("every feature is sensitive; nothing to analyze over")
    for f in sens:
        if f.kind == CONTINUOUS:
            spans = range_choices.get(f.name)
            if not spans:
                raise ParseError(f"continuous sensitive {f.name!r} requires a 'choices' line")
            _check_choice_cover(f, spans)
    for name in range_choices:
        if not (spec.feature(name).sensitive and spec.feature(name).kind == CONTINUOUS):
            raise ParseError(f"'choices' given for non-sensitive feature {name!r}")
    return spec


def _check_choice_cover(f: Feature, spans: tuple[tuple[Rat, Rat], ...]) -> None:
    ordered = sorted(spans)
    for lo, hi in ordered:
        if lo >= hi:
            raise ParseError(f"choice {lo}:{hi} of {f.name!r} is empty")
    if ordered[0][0] != f.lo or ordered[-1][1] != f.hi:
        raise ParseError(f"choices of {f.name!r} must cover [{f.lo}, {f.hi}]")
    for (_, hi1), (lo2, _) in zip(ordered, ordered[1:]):
        if hi1 != lo2:
            raise ParseError(
                f"choices of {f.name!r} must be disjoint and covering; "
                f"gap or overlap at {hi1} vs {lo2}"
            )


@dataclass(frozen=True)
class Query:
    """Initial-state restriction: per-feature subrange or value fixing."""

    ranges: tuple[tuple[str, Rat, Rat], ...] = ()
    fixings: tuple[tuple[str, int], ...] = ()


def parse_query(text: bytes | str, spec: InputSpec) -> Query:
    """Parse 'assume' lines; the empty file means the full input space."""
    ranges: list[tuple[str, Rat, Rat]] = []
    fixings: list[tuple[str, int]] = []
    for lineno, words in _content_lines(text):
        if words[0] != "assume":
            raise ParseError(f"expected 'assume', got {words[0]!r}", lineno)
        try:
            feat = spec.feature(words[1])
        except KeyError as exc:
            raise ParseError(str(exc), lineno) from None
        if feat.sensitive:
            raise ParseError(
                f"query may not restrict sensitive feature {feat.name!r}", lineno
            )
        if len(words) == 4 and words[2] == "in":
            if feat.kind != CONTINUOUS:
                raise ParseError(f"{feat.name!r} is categorical; use '= <index>'", lineno)
            if ":" not in words[3]:
                raise ParseError("expected <lo:hi>", lineno)
            lo_s, hi_s = words[3].split(":", 1)
            lo, hi = _rat(lo_s, lineno), _rat(hi_s, lineno)
            if lo >= hi or lo < feat.lo or hi > feat.hi:
                raise ParseError(
                    f"subrange [{lo}, {hi}] invalid for {feat.name!r} in "
                    f"[{feat.lo}, {feat.hi}]",
                    lineno,
                )
            ranges.append((feat.name, lo, hi))
        elif len(words) == 4 and words[2] == "=":
            if feat.kind != CATEGORICAL:
                raise ParseError(f"{feat.name!r} is continuous; use 'in <lo:hi>'", lineno)
            try:
                k = int(words[3])
            except ValueError:
                raise ParseError("value index must be an integer", lineno) from None
            if not 0 <= k < feat.arity:
                raise ParseError(f"value index {k} out of range for {feat.name!r}", lineno)
            fixings.append((feat.name, k))
        else:
            raise ParseError("expected 'assume <name> in <lo:hi>' or 'assume <name> = <k>'", lineno)
    return Query(tuple(ranges), tuple(fixings))
