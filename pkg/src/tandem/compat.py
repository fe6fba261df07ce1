"""Which layers a fixed-function accelerator can run, and where that splits a model.

Restrictions are data, not code: a rule set is a list of `CompatRule` records,
loadable from JSON, each constraining one layer field for some set of layer
kinds. A layer is accelerator-compatible when every applicable rule passes.
Walking the linearized model then yields the maximal runs of compatible
layers: the accelerator subgraphs. Everything between runs falls back to the
GPU. Hardware caps how many such subgraphs one network may contribute, so
`assert_subgraph_limit` turns a fragmented model into a hard error.

Precision handling: accelerators here take FP16 and INT8 only, and runtimes
silently rebuild FP32 engines at FP16. `coerce_fp32=True` (the default)
mirrors that, so FP32 layers are judged as FP16.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .errors import SchemaError, SubgraphLimitError
from .graph_ir import (
    ActivationFn,
    DataType,
    LayerKind,
    LayerSpec,
    ModelGraph,
    PoolMode,
    dumps_json,
    loads_json,
)

DLA_SUBGRAPH_LIMIT = 16

_RULE_FIELDS = frozenset(
    {"dtype", "kernel", "stride", "padding", "dilation", "groups",
     "in_channels", "out_channels"}
)
_OPS = frozenset({"eq", "in", "range"})


def _valid_selector(sel: str) -> bool:
    head, _, sub = sel.partition(".")
    try:
        kind = LayerKind(head)
    except ValueError:
        return False
    if not sub:
        return True
    if kind is LayerKind.ACTIVATION:
        return sub in {f.value for f in ActivationFn}
    if kind is LayerKind.POOL:
        return sub in {m.value for m in PoolMode}
    return False


def _selector_matches(sel: str, layer: LayerSpec) -> bool:
    head, _, sub = sel.partition(".")
    if layer.kind.value != head:
        return False
    if not sub:
        return True
    if layer.kind is LayerKind.ACTIVATION:
        return layer.activation.value == sub
    return layer.pool_mode.value == sub


@dataclass(frozen=True, slots=True)
class CompatRule:
    """One constraint: for layers matching `kinds`, `field` must satisfy `op`.

    `kinds` is a tuple of selectors like "Deconv" or "Activation.softmax";
    None applies the rule to every layer. A layer that lacks the field
    passes vacuously. `op` is "eq" (value), "in" (value is a tuple of
    admissible values) or "range" (value is an inclusive (lo, hi) pair).
    """

    rule_id: str
    description: str
    field: str
    op: str
    value: object
    kinds: tuple[str, ...] | None = None

    def __post_init__(self):
        if not self.rule_id:
            raise SchemaError("rule: rule_id must be non-empty")
        if self.field not in _RULE_FIELDS:
            raise SchemaError(f"rule {self.rule_id}: unknown field {self.field!r}")
        if self.op not in _OPS:
            raise SchemaError(f"rule {self.rule_id}: unknown op {self.op!r}")
        if self.op == "in":
            if not isinstance(self.value, tuple) or not self.value:
                raise SchemaError(
                    f"rule {self.rule_id}: 'in' needs a non-empty tuple of values"
                )
        elif self.op == "range":
            ok = (
                isinstance(self.value, tuple)
                and len(self.value) == 2
                and all(isinstance(v, int) and not isinstance(v, bool)
                        for v in self.value)
                and self.value[0] <= self.value[1]
            )
            if not ok:
                raise SchemaError(
                    f"rule {self.rule_id}: 'range' needs an ordered (lo, hi) pair"
                )
        if self.kinds is not None:
            if not self.kinds:
                raise SchemaError(f"rule {self.rule_id}: empty kinds list")
            for sel in self.kinds:
                if not _valid_selector(sel):
                    raise SchemaError(
                        f"rule {self.rule_id}: bad kind selector {sel!r}"
                    )

    def applies_to(self, layer: LayerSpec) -> bool:
        if self.kinds is None:
            return True
        return any(_selector_matches(sel, layer) for sel in self.kinds)

    def passes(self, layer: LayerSpec, effective_dtype: DataType) -> bool:
        if self.field == "dtype":
            actual: object = effective_dtype.value
        else:
            actual = getattr(layer, self.field)
        if actual is None:
            return True
        if self.op == "eq":
            return actual == self.value
        if self.op == "in":
            return actual in self.value
        lo, hi = self.value  # type: ignore[misc]
        return lo <= actual <= hi


def default_dla_rules() -> tuple[CompatRule, ...]:
    """Restrictions of the deep-learning accelerator on Jetson-class parts."""
    return (
        CompatRule("R1", "accelerator engines run FP16 or INT8 only",
                   "dtype", "in", ("FP16", "INT8")),
        CompatRule("R2", "Equal is supported in INT8 only",
                   "dtype", "eq", "INT8", kinds=("Equal",)),
        CompatRule("R3", "Slice and softmax are supported in FP16 only",
                   "dtype", "eq", "FP16", kinds=("Slice", "Activation.softmax")),
        CompatRule("R4", "deconvolution must be unpadded",
                   "padding", "eq", 0, kinds=("Deconv",)),
        CompatRule("R5", "kernel sides must lie in [1, 32]",
                   "kernel", "range", (1, 32), kinds=("Conv", "Deconv", "Pool")),
        CompatRule("R6a", "deconvolution must be undilated",
                   "dilation", "eq", 1, kinds=("Deconv",)),
        CompatRule("R6b", "deconvolution must be ungrouped",
                   "groups", "eq", 1, kinds=("Deconv",)),
    )


def effective_dtype(layer: LayerSpec, coerce_fp32: bool) -> DataType:
    if coerce_fp32 and layer.dtype is DataType.FP32:
        return DataType.FP16
    return layer.dtype


def check_layer(layer: LayerSpec, rules: Sequence[CompatRule],
                coerce_fp32: bool = True) -> tuple[str, ...]:
    """Ids of the rules this layer violates, in rule-set order."""
    dtype = effective_dtype(layer, coerce_fp32)
    return tuple(
        r.rule_id for r in rules if r.applies_to(layer) and not r.passes(layer, dtype)
    )


@dataclass(frozen=True, slots=True)
class LayerVerdict:
    layer_id: str
    compatible: bool
    violations: tuple[str, ...]


@dataclass(frozen=True, slots=True)
class CompatReport:
    """Per-layer verdicts plus the accelerator runs they induce.

    `layer_ids` is the linearized order; `dla_subgraphs` are half-open
    [start, end) index ranges into it, maximal and non-adjacent.
    """

    model_name: str
    layer_ids: tuple[str, ...]
    verdicts: tuple[LayerVerdict, ...]
    dla_subgraphs: tuple[tuple[int, int], ...]

    @property
    def subgraph_count(self) -> int:
        return len(self.dla_subgraphs)

    @property
    def incompatible_count(self) -> int:
        return sum(1 for v in self.verdicts if not v.compatible)

    @property
    def compatible_mask(self) -> tuple[bool, ...]:
        return tuple(v.compatible for v in self.verdicts)

    def to_json_dict(self) -> dict:
        return {
            "model": self.model_name,
            "layers": [
                {"id": v.layer_id, "compatible": v.compatible,
                 "violations": list(v.violations)}
                for v in self.verdicts
            ],
            "dla_subgraphs": [[s, e] for s, e in self.dla_subgraphs],
            "subgraph_count": self.subgraph_count,
            "incompatible_count": self.incompatible_count,
            "version": 1,
        }


def compatible_runs(mask: Sequence[bool]) -> tuple[tuple[int, int], ...]:
    """Maximal [start, end) runs of True in `mask`."""
    runs: list[tuple[int, int]] = []
    start: int | None = None
    for i, ok in enumerate(mask):
        if ok and start is None:
            start = i
        elif not ok and start is not None:
            runs.append((start, i))
            start = None
    if start is not None:
        runs.append((start, len(mask)))
    return tuple(runs)


def check_graph(graph: ModelGraph, rules: Sequence[CompatRule] | None = None,
                coerce_fp32: bool = True) -> CompatReport:
    """Judge every layer and segment the model into accelerator runs."""
    if rules is None:
        rules = default_dla_rules()
    order = graph.order
    verdicts = []
    for lid in order:
        violations = check_layer(graph.by_id[lid], rules, coerce_fp32)
        verdicts.append(LayerVerdict(lid, not violations, violations))
    runs = compatible_runs([v.compatible for v in verdicts])
    return CompatReport(graph.name, order, tuple(verdicts), runs)


def assert_subgraph_limit(report: CompatReport,
                          limit: int = DLA_SUBGRAPH_LIMIT) -> None:
    if report.subgraph_count > limit:
        raise SubgraphLimitError(report.subgraph_count, limit)


# ---------------------------------------------------------------------------
# rule sets on disk: a bare JSON list, strict on shape
# ---------------------------------------------------------------------------


def _rule_to_json(rule: CompatRule) -> dict:
    value = list(rule.value) if isinstance(rule.value, tuple) else rule.value
    out = {
        "rule_id": rule.rule_id,
        "description": rule.description,
        "field": rule.field,
        "op": rule.op,
        "value": value,
    }
    if rule.kinds is not None:
        out["kind"] = rule.kinds[0] if len(rule.kinds) == 1 else list(rule.kinds)
    return out


def _rule_from_json(obj, where: str) -> CompatRule:
    if not isinstance(obj, dict):
        raise SchemaError(f"{where}: expected an object")
    required = {"rule_id", "description", "field", "op", "value"}
    missing = required - obj.keys()
    if missing:
        raise SchemaError(f"{where}: missing {sorted(missing)}")
    unknown = obj.keys() - required - {"kind"}
    if unknown:
        raise SchemaError(f"{where}: unknown fields {sorted(unknown)}")
    for k in ("rule_id", "description", "field", "op"):
        if not isinstance(obj[k], str):
            raise SchemaError(f"{where}.{k}: expected a string")
    value = obj["value"]
    if isinstance(value, list):
        value = tuple(value)
    kinds = obj.get("kind")
    if kinds is not None:
        if isinstance(kinds, str):
            kinds = (kinds,)
        elif isinstance(kinds, list) and all(isinstance(k, str) for k in kinds):
            kinds = tuple(kinds)
        else:
            raise SchemaError(
                f"{where}.kind: expected a kind name or a list of kind names"
            )
    return CompatRule(obj["rule_id"], obj["description"], obj["field"],
                      obj["op"], value, kinds)


def rules_to_json(rules: Iterable[CompatRule]) -> list:
    return [_rule_to_json(r) for r in rules]


def rules_from_json(obj) -> tuple[CompatRule, ...]:
    if not isinstance(obj, list):
        raise SchemaError("rules: expected a JSON list")
    return tuple(_rule_from_json(r, f"rules[{i}]") for i, r in enumerate(obj))


def save_rules(rules: Iterable[CompatRule], path: str | Path) -> None:
    Path(path).write_text(dumps_json(rules_to_json(rules)))


def load_rules(path: str | Path) -> tuple[CompatRule, ...]:
    return rules_from_json(loads_json(Path(path).read_text(), "rules"))
