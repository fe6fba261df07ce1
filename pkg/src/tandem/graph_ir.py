"""Model graphs and the size algebra the rest of the toolkit runs on.

A model is a DAG of layers over 2-D feature maps. Shapes are (channels,
height, width); spatial formulas treat height and width identically. The
three formulas that matter:

    deconv:  s*(n - 1) + k - 2*p        (transposed convolution)
    conv:    (n - k + 2*p) // s + 1     (requires n + 2*p >= k)
    crop:    n - 2*border               (trim a uniform border)

From these, a stride-2 kernel-4 deconv with padding 1 maps n -> 2n, the same
deconv without padding maps n -> 2n + 2, and the extra 2 can be shaved off
either by a border-1 crop or by a padding-free 3x3 convolution. That identity
is what the rewrite pass in `tandem.rewrite` is built on.

Graphs are immutable; "mutation" means building a new graph.
"""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass, fields
from enum import Enum
from functools import cached_property
from pathlib import Path
from typing import Iterable, Mapping

from .errors import (
    GraphError,
    InvalidGeometryError,
    SchemaError,
    ShapeMismatchError,
)

SCHEMA_VERSION = 1


class DataType(Enum):
    FP32 = "FP32"
    FP16 = "FP16"
    INT8 = "INT8"


class LayerKind(Enum):
    CONV = "Conv"
    DECONV = "Deconv"
    BATCH_NORM = "BatchNorm"
    ACTIVATION = "Activation"
    POOL = "Pool"
    CROP = "Crop"
    CONCAT = "Concat"
    DROPOUT = "Dropout"
    SLICE = "Slice"
    EQUAL = "Equal"


class ActivationFn(Enum):
    RELU = "relu"
    LEAKY_RELU = "leaky_relu"
    TANH = "tanh"
    SOFTMAX = "softmax"


class PoolMode(Enum):
    MAX = "max"
    AVG = "avg"


@dataclass(frozen=True, slots=True)
class TensorShape:
    """Channels-first shape of one feature map."""

    channels: int
    height: int
    width: int

    def __post_init__(self):
        for name in ("channels", "height", "width"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or v < 1:
                raise InvalidGeometryError(f"{name} must be a positive integer, got {v!r}")


# ---------------------------------------------------------------------------
# spatial size formulas
# ---------------------------------------------------------------------------


def _check_positive(name: str, v: int, minimum: int = 1) -> None:
    if not isinstance(v, int) or isinstance(v, bool) or v < minimum:
        raise InvalidGeometryError(f"{name} must be an integer >= {minimum}, got {v!r}")


def deconv_output_size(n: int, kernel: int, stride: int, padding: int) -> int:
    """Output extent of a transposed convolution along one spatial axis."""
    _check_positive("input size", n)
    _check_positive("kernel", kernel)
    _check_positive("stride", stride)
    _check_positive("padding", padding, minimum=0)
    out = stride * (n - 1) + kernel - 2 * padding
    if out < 1:
        raise InvalidGeometryError(
            f"deconv(n={n}, k={kernel}, s={stride}, p={padding}) yields size {out}"
        )
    return out


def conv_output_size(n: int, kernel: int, stride: int, padding: int) -> int:
    """Output extent of a convolution along one spatial axis."""
    _check_positive("input size", n)
    _check_positive("kernel", kernel)
    _check_positive("stride", stride)
    _check_positive("padding", padding, minimum=0)
    if n + 2 * padding < kernel:
        raise InvalidGeometryError(
            f"conv kernel {kernel} does not fit input {n} with padding {padding}"
        )
    return (n - kernel + 2 * padding) // stride + 1


def crop_output_size(n: int, border: int) -> int:
    """Output extent after trimming `border` pixels from each side."""
    _check_positive("input size", n)
    _check_positive("border", border)
    out = n - 2 * border
    if out < 1:
        raise InvalidGeometryError(f"crop border {border} consumes input of size {n}")
    return out


# ---------------------------------------------------------------------------
# layers
# ---------------------------------------------------------------------------

# Which optional fields each kind must / may carry. Everything else must be
# absent, so a BatchNorm with a kernel is rejected up front.
_FIELD_RULES: dict[LayerKind, tuple[frozenset[str], frozenset[str]]] = {
    LayerKind.CONV: (
        frozenset(
            {"kernel", "stride", "padding", "dilation", "groups",
             "in_channels", "out_channels", "has_bias"}
        ),
        frozenset(),
    ),
    LayerKind.DECONV: (
        frozenset(
            {"kernel", "stride", "padding", "dilation", "groups",
             "in_channels", "out_channels", "has_bias"}
        ),
        frozenset(),
    ),
    LayerKind.BATCH_NORM: (frozenset({"in_channels", "out_channels"}), frozenset()),
    LayerKind.ACTIVATION: (frozenset({"activation"}), frozenset()),
    LayerKind.POOL: (
        frozenset({"pool_mode", "kernel", "stride", "padding"}),
        frozenset(),
    ),
    LayerKind.CROP: (frozenset({"crop_border"}), frozenset()),
    LayerKind.CONCAT: (frozenset(), frozenset()),
    LayerKind.DROPOUT: (frozenset(), frozenset()),
    LayerKind.SLICE: (frozenset(), frozenset({"slice_shape"})),
    LayerKind.EQUAL: (frozenset(), frozenset()),
}

_ALWAYS = frozenset({"id", "kind", "dtype"})


@dataclass(frozen=True, slots=True)
class LayerSpec:
    """One layer. Only the fields its kind uses may be set."""

    id: str
    kind: LayerKind
    dtype: DataType = DataType.FP32
    kernel: int | None = None
    stride: int | None = None
    padding: int | None = None
    dilation: int | None = None
    groups: int | None = None
    in_channels: int | None = None
    out_channels: int | None = None
    has_bias: bool | None = None
    activation: ActivationFn | None = None
    pool_mode: PoolMode | None = None
    crop_border: int | None = None
    slice_shape: TensorShape | None = None

    def __post_init__(self):
        if not self.id or not isinstance(self.id, str):
            raise GraphError(f"layer id must be a non-empty string, got {self.id!r}")
        required, optional = _FIELD_RULES[self.kind]
        for f in fields(self):
            if f.name in _ALWAYS:
                continue
            value = getattr(self, f.name)
            if f.name in required:
                if value is None:
                    raise GraphError(f"{self.id}: {self.kind.value} requires {f.name}")
            elif f.name not in optional and value is not None:
                raise GraphError(
                    f"{self.id}: {self.kind.value} does not take {f.name}"
                )
        if self.kind in (LayerKind.CONV, LayerKind.DECONV):
            _check_positive(f"{self.id}: kernel", self.kernel)
            _check_positive(f"{self.id}: stride", self.stride)
            _check_positive(f"{self.id}: padding", self.padding, minimum=0)
            _check_positive(f"{self.id}: dilation", self.dilation)
            _check_positive(f"{self.id}: groups", self.groups)
            _check_positive(f"{self.id}: in_channels", self.in_channels)
            _check_positive(f"{self.id}: out_channels", self.out_channels)
            if self.in_channels % self.groups != 0:
                raise GraphError(
                    f"{self.id}: in_channels {self.in_channels} not divisible "
                    f"by groups {self.groups}"
                )
        elif self.kind is LayerKind.BATCH_NORM:
            _check_positive(f"{self.id}: in_channels", self.in_channels)
            if self.in_channels != self.out_channels:
                raise GraphError(f"{self.id}: BatchNorm cannot change channel count")
        elif self.kind is LayerKind.POOL:
            _check_positive(f"{self.id}: kernel", self.kernel)
            _check_positive(f"{self.id}: stride", self.stride)
            _check_positive(f"{self.id}: padding", self.padding, minimum=0)
        elif self.kind is LayerKind.CROP:
            _check_positive(f"{self.id}: crop_border", self.crop_border)

    def param_count(self) -> int:
        """Trainable plus stored parameters contributed by this layer."""
        if self.kind in (LayerKind.CONV, LayerKind.DECONV):
            weights = (
                self.kernel * self.kernel
                * (self.in_channels // self.groups)
                * self.out_channels
            )
            return weights + (self.out_channels if self.has_bias else 0)
        if self.kind is LayerKind.BATCH_NORM:
            # scale, shift, running mean, running variance
            return 4 * self.out_channels
        return 0


# Factory helpers: the graph builders below read much better with these.


def conv(layer_id: str, in_channels: int, out_channels: int, kernel: int,
         stride: int = 1, padding: int = 0, *, dilation: int = 1, groups: int = 1,
         bias: bool = True, dtype: DataType = DataType.FP32) -> LayerSpec:
    return LayerSpec(
        layer_id, LayerKind.CONV, dtype, kernel=kernel, stride=stride,
        padding=padding, dilation=dilation, groups=groups,
        in_channels=in_channels, out_channels=out_channels, has_bias=bias,
    )


def deconv(layer_id: str, in_channels: int, out_channels: int, kernel: int,
           stride: int = 1, padding: int = 0, *, dilation: int = 1, groups: int = 1,
           bias: bool = True, dtype: DataType = DataType.FP32) -> LayerSpec:
    return LayerSpec(
        layer_id, LayerKind.DECONV, dtype, kernel=kernel, stride=stride,
        padding=padding, dilation=dilation, groups=groups,
        in_channels=in_channels, out_channels=out_channels, has_bias=bias,
    )


def batch_norm(layer_id: str, channels: int, dtype: DataType = DataType.FP32) -> LayerSpec:
    return LayerSpec(layer_id, LayerKind.BATCH_NORM, dtype,
                     in_channels=channels, out_channels=channels)


def activation(layer_id: str, fn: ActivationFn, dtype: DataType = DataType.FP32) -> LayerSpec:
    return LayerSpec(layer_id, LayerKind.ACTIVATION, dtype, activation=fn)


def pool(layer_id: str, mode: PoolMode, kernel: int, stride: int,
         padding: int = 0, dtype: DataType = DataType.FP32) -> LayerSpec:
    return LayerSpec(layer_id, LayerKind.POOL, dtype, pool_mode=mode,
                     kernel=kernel, stride=stride, padding=padding)


def crop(layer_id: str, border: int, dtype: DataType = DataType.FP32) -> LayerSpec:
    return LayerSpec(layer_id, LayerKind.CROP, dtype, crop_border=border)


def concat(layer_id: str, dtype: DataType = DataType.FP32) -> LayerSpec:
    return LayerSpec(layer_id, LayerKind.CONCAT, dtype)


def dropout(layer_id: str, dtype: DataType = DataType.FP32) -> LayerSpec:
    return LayerSpec(layer_id, LayerKind.DROPOUT, dtype)


def slice_layer(layer_id: str, output: TensorShape | None = None,
                dtype: DataType = DataType.FP32) -> LayerSpec:
    return LayerSpec(layer_id, LayerKind.SLICE, dtype, slice_shape=output)


def equal(layer_id: str, dtype: DataType = DataType.FP32) -> LayerSpec:
    return LayerSpec(layer_id, LayerKind.EQUAL, dtype)


# ---------------------------------------------------------------------------
# graphs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ModelGraph:
    """Immutable layer DAG.

    `layers` keeps author order (serialization preserves it); algorithms that
    need a canonical order use `order`, the linearization. Declared inputs are
    exactly the layers with no incoming edge; they all receive the graph input
    shape during inference.
    """

    name: str
    layers: tuple[LayerSpec, ...]
    edges: tuple[tuple[str, str], ...]
    inputs: tuple[str, ...]
    outputs: tuple[str, ...]

    def __post_init__(self):
        if not self.name or not isinstance(self.name, str):
            raise GraphError("graph name must be a non-empty string")
        ids = [l.id for l in self.layers]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise GraphError(f"duplicate layer ids: {dupes}")
        known = set(ids)
        seen_edges = set()
        for src, dst in self.edges:
            if src not in known or dst not in known:
                raise GraphError(f"edge ({src!r}, {dst!r}) references unknown layer")
            if src == dst:
                raise GraphError(f"self loop on {src!r}")
            if (src, dst) in seen_edges:
                raise GraphError(f"duplicate edge ({src!r}, {dst!r})")
            seen_edges.add((src, dst))
        indeg = {i: 0 for i in ids}
        for _, dst in self.edges:
            indeg[dst] += 1
        sources = {i for i, d in indeg.items() if d == 0}
        declared = set(self.inputs)
        if len(self.inputs) != len(declared):
            raise GraphError("duplicate declared inputs")
        if declared != sources:
            raise GraphError(
                f"declared inputs {sorted(declared)} do not match "
                f"source layers {sorted(sources)}"
            )
        for out in self.outputs:
            if out not in known:
                raise GraphError(f"declared output {out!r} is not a layer")
        by_id = {l.id: l for l in self.layers}
        for lid, d in indeg.items():
            kind = by_id[lid].kind
            if kind is LayerKind.CONCAT:
                if d < 2:
                    raise GraphError(f"{lid}: Concat needs at least 2 inputs, has {d}")
            elif kind is LayerKind.EQUAL:
                if d > 2:
                    raise GraphError(f"{lid}: Equal takes at most 2 inputs, has {d}")
            elif d > 1:
                raise GraphError(f"{lid}: {kind.value} takes one input, has {d}")
        # cycle check doubles as the linearization; cache the result
        object.__setattr__(self, "_order_cache", _kahn_order(ids, self.edges))

    @cached_property
    def by_id(self) -> Mapping[str, LayerSpec]:
        return {l.id: l for l in self.layers}

    @property
    def order(self) -> tuple[str, ...]:
        """Linearized layer ids (topological, lexicographic tie-break)."""
        return self._order_cache  # type: ignore[attr-defined]

    @cached_property
    def predecessors(self) -> Mapping[str, tuple[str, ...]]:
        pred: dict[str, list[str]] = {l.id: [] for l in self.layers}
        for src, dst in self.edges:
            pred[dst].append(src)
        return {k: tuple(v) for k, v in pred.items()}

    @cached_property
    def successors(self) -> Mapping[str, tuple[str, ...]]:
        succ: dict[str, list[str]] = {l.id: [] for l in self.layers}
        for src, dst in self.edges:
            succ[src].append(dst)
        return {k: tuple(v) for k, v in succ.items()}

    def layer(self, layer_id: str) -> LayerSpec:
        try:
            return self.by_id[layer_id]
        except KeyError:
            raise GraphError(f"no layer {layer_id!r} in graph {self.name!r}") from None


def _kahn_order(ids: list[str], edges: Iterable[tuple[str, str]]) -> tuple[str, ...]:
    indeg = {i: 0 for i in ids}
    succ: dict[str, list[str]] = {i: [] for i in ids}
    for src, dst in edges:
        indeg[dst] += 1
        succ[src].append(dst)
    ready = [i for i, d in indeg.items() if d == 0]
    heapq.heapify(ready)
    out: list[str] = []
    while ready:
        cur = heapq.heappop(ready)
        out.append(cur)
        for nxt in succ[cur]:
            indeg[nxt] -= 1
            if indeg[nxt] == 0:
                heapq.heappush(ready, nxt)
    if len(out) != len(ids):
        stuck = sorted(i for i, d in indeg.items() if d > 0)
        raise GraphError(f"graph contains a cycle through {stuck}")
    return tuple(out)


def linearize(graph: ModelGraph) -> tuple[str, ...]:
    """Canonical execution order used for profiles, segments and reports."""
    return graph.order


# ---------------------------------------------------------------------------
# shape inference and parameter counting
# ---------------------------------------------------------------------------


def infer_shapes(graph: ModelGraph, input_shape: TensorShape) -> dict[str, TensorShape]:
    """Output shape of every layer, keyed by id.

    Every declared input layer receives `input_shape`. The result depends
    only on the graph and the input shape, not on edge listing order.
    """
    shapes: dict[str, TensorShape] = {}
    preds = graph.predecessors
    for lid in graph.order:
        layer = graph.by_id[lid]
        incoming = [shapes[p] for p in preds[lid]]
        if not incoming:
            incoming = [input_shape]
        shapes[lid] = _layer_output(layer, incoming)
    return shapes


def _layer_output(layer: LayerSpec, incoming: list[TensorShape]) -> TensorShape:
    kind = layer.kind
    if kind is LayerKind.CONCAT:
        first = incoming[0]
        for other in incoming[1:]:
            if (other.height, other.width) != (first.height, first.width):
                raise ShapeMismatchError(
                    f"concat inputs {first} vs {other} differ spatially", layer.id
                )
        return TensorShape(sum(s.channels for s in incoming),
                           first.height, first.width)
    if kind is LayerKind.EQUAL:
        first = incoming[0]
        for other in incoming[1:]:
            if other != first:
                raise ShapeMismatchError(
                    f"equal inputs {first} vs {other} differ", layer.id
                )
        return first
    if len(incoming) != 1:
        raise ShapeMismatchError("expected exactly one input", layer.id)
    src = incoming[0]
    try:
        if kind is LayerKind.CONV or kind is LayerKind.POOL:
            h = conv_output_size(src.height, layer.kernel, layer.stride, layer.padding)
            w = conv_output_size(src.width, layer.kernel, layer.stride, layer.padding)
            if kind is LayerKind.POOL:
                return TensorShape(src.channels, h, w)
            if src.channels != layer.in_channels:
                raise ShapeMismatchError(
                    f"expects {layer.in_channels} channels, got {src.channels}",
                    layer.id,
                )
            return TensorShape(layer.out_channels, h, w)
        if kind is LayerKind.DECONV:
            if src.channels != layer.in_channels:
                raise ShapeMismatchError(
                    f"expects {layer.in_channels} channels, got {src.channels}",
                    layer.id,
                )
            h = deconv_output_size(src.height, layer.kernel, layer.stride, layer.padding)
            w = deconv_output_size(src.width, layer.kernel, layer.stride, layer.padding)
            return TensorShape(layer.out_channels, h, w)
        if kind is LayerKind.CROP:
            return TensorShape(
                src.channels,
                crop_output_size(src.height, layer.crop_border),
                crop_output_size(src.width, layer.crop_border),
            )
        if kind is LayerKind.BATCH_NORM:
            if src.channels != layer.in_channels:
                raise ShapeMismatchError(
                    f"normalizes {layer.in_channels} channels, got {src.channels}",
                    layer.id,
                )
            return src
        if kind is LayerKind.SLICE:
            return layer.slice_shape if layer.slice_shape is not None else src
        # Activation, Dropout: shape preserving
        return src
    except InvalidGeometryError as exc:
        if exc.layer_id is None:
            raise InvalidGeometryError(str(exc), layer.id) from None
        raise


def param_count(graph: ModelGraph) -> int:
    """Total parameters. Purely per-layer, so it is additive over any split."""
    return sum(layer.param_count() for layer in graph.layers)


# ---------------------------------------------------------------------------
# JSON serialization
# ---------------------------------------------------------------------------


def _expect_keys(obj: dict, required: set[str], optional: set[str], where: str) -> None:
    if not isinstance(obj, dict):
        raise SchemaError(f"{where}: expected an object")
    missing = required - obj.keys()
    if missing:
        raise SchemaError(f"{where}: missing {sorted(missing)}")
    unknown = obj.keys() - required - optional
    if unknown:
        raise SchemaError(f"{where}: unknown fields {sorted(unknown)}")


def _expect_int(value, where: str) -> int:
    if not isinstance(value, int) or isinstance(value, bool):
        raise SchemaError(f"{where}: expected an integer, got {value!r}")
    return value


def _expect_str(value, where: str) -> str:
    if not isinstance(value, str):
        raise SchemaError(f"{where}: expected a string, got {value!r}")
    return value


_PARAM_KEYS: dict[LayerKind, tuple[set[str], set[str]]] = {
    LayerKind.CONV: (
        {"kernel", "stride", "padding", "dilation", "groups",
         "in_channels", "out_channels", "has_bias"}, set()),
    LayerKind.DECONV: (
        {"kernel", "stride", "padding", "dilation", "groups",
         "in_channels", "out_channels", "has_bias"}, set()),
    LayerKind.BATCH_NORM: ({"channels"}, set()),
    LayerKind.ACTIVATION: ({"function"}, set()),
    LayerKind.POOL: ({"mode", "kernel", "stride", "padding"}, set()),
    LayerKind.CROP: ({"border"}, set()),
    LayerKind.CONCAT: (set(), set()),
    LayerKind.DROPOUT: (set(), set()),
    LayerKind.SLICE: (set(), {"output"}),
    LayerKind.EQUAL: (set(), set()),
}


def _layer_to_json(layer: LayerSpec) -> dict:
    params: dict = {}
    k = layer.kind
    if k in (LayerKind.CONV, LayerKind.DECONV):
        params = {
            "kernel": layer.kernel, "stride": layer.stride,
            "padding": layer.padding, "dilation": layer.dilation,
            "groups": layer.groups, "in_channels": layer.in_channels,
            "out_channels": layer.out_channels, "has_bias": layer.has_bias,
        }
    elif k is LayerKind.BATCH_NORM:
        params = {"channels": layer.out_channels}
    elif k is LayerKind.ACTIVATION:
        params = {"function": layer.activation.value}
    elif k is LayerKind.POOL:
        params = {"mode": layer.pool_mode.value, "kernel": layer.kernel,
                  "stride": layer.stride, "padding": layer.padding}
    elif k is LayerKind.CROP:
        params = {"border": layer.crop_border}
    elif k is LayerKind.SLICE and layer.slice_shape is not None:
        s = layer.slice_shape
        params = {"output": {"channels": s.channels, "height": s.height,
                             "width": s.width}}
    return {"id": layer.id, "kind": k.value, "params": params,
            "dtype": layer.dtype.value}


def _layer_from_json(obj: dict, where: str) -> LayerSpec:
    _expect_keys(obj, {"id", "kind", "params", "dtype"}, set(), where)
    lid = _expect_str(obj["id"], f"{where}.id")
    kind_name = _expect_str(obj["kind"], f"{where}.kind")
    try:
        kind = LayerKind(kind_name)
    except ValueError:
        raise SchemaError(f"{where}: unknown layer kind {kind_name!r}") from None
    dtype_name = _expect_str(obj["dtype"], f"{where}.dtype")
    try:
        dtype = DataType(dtype_name)
    except ValueError:
        raise SchemaError(f"{where}: unknown dtype {dtype_name!r}") from None
    params = obj["params"]
    required, optional = _PARAM_KEYS[kind]
    _expect_keys(params, required, optional, f"{where}.params")
    try:
        if kind in (LayerKind.CONV, LayerKind.DECONV):
            if not isinstance(params["has_bias"], bool):
                raise SchemaError(f"{where}.params.has_bias: expected a boolean")
            builder = conv if kind is LayerKind.CONV else deconv
            return builder(
                lid,
                _expect_int(params["in_channels"], where),
                _expect_int(params["out_channels"], where),
                _expect_int(params["kernel"], where),
                _expect_int(params["stride"], where),
                _expect_int(params["padding"], where),
                dilation=_expect_int(params["dilation"], where),
                groups=_expect_int(params["groups"], where),
                bias=params["has_bias"],
                dtype=dtype,
            )
        if kind is LayerKind.BATCH_NORM:
            return batch_norm(lid, _expect_int(params["channels"], where), dtype)
        if kind is LayerKind.ACTIVATION:
            fn_name = _expect_str(params["function"], f"{where}.params.function")
            try:
                fn = ActivationFn(fn_name)
            except ValueError:
                raise SchemaError(
                    f"{where}: unknown activation {fn_name!r}"
                ) from None
            return activation(lid, fn, dtype)
        if kind is LayerKind.POOL:
            mode_name = _expect_str(params["mode"], f"{where}.params.mode")
            try:
                mode = PoolMode(mode_name)
            except ValueError:
                raise SchemaError(f"{where}: unknown pool mode {mode_name!r}") from None
            return pool(lid, mode, _expect_int(params["kernel"], where),
                        _expect_int(params["stride"], where),
                        _expect_int(params["padding"], where), dtype)
        if kind is LayerKind.CROP:
            return crop(lid, _expect_int(params["border"], where), dtype)
        if kind is LayerKind.SLICE:
            out = None
            if "output" in params:
                o = params["output"]
                _expect_keys(o, {"channels", "height", "width"}, set(),
                             f"{where}.params.output")
                out = TensorShape(_expect_int(o["channels"], where),
                                  _expect_int(o["height"], where),
                                  _expect_int(o["width"], where))
            return slice_layer(lid, out, dtype)
        if kind is LayerKind.CONCAT:
            return concat(lid, dtype)
        if kind is LayerKind.DROPOUT:
            return dropout(lid, dtype)
        return equal(lid, dtype)
    except GraphError as exc:
        raise SchemaError(f"{where}: {exc}") from None


def graph_to_json_dict(graph: ModelGraph) -> dict:
    return {
        "name": graph.name,
        "layers": [_layer_to_json(l) for l in graph.layers],
        "edges": [[src, dst] for src, dst in graph.edges],
        "inputs": list(graph.inputs),
        "outputs": list(graph.outputs),
        "version": SCHEMA_VERSION,
    }


def graph_from_json_dict(obj: dict) -> ModelGraph:
    _expect_keys(obj, {"name", "layers", "edges", "inputs", "outputs", "version"},
                 set(), "model")
    if obj["version"] != SCHEMA_VERSION:
        raise SchemaError(f"model: unsupported version {obj['version']!r}")
    name = _expect_str(obj["name"], "model.name")
    if not isinstance(obj["layers"], list):
        raise SchemaError("model.layers: expected a list")
    layers = tuple(
        _layer_from_json(l, f"model.layers[{i}]") for i, l in enumerate(obj["layers"])
    )
    if not isinstance(obj["edges"], list):
        raise SchemaError("model.edges: expected a list")
    edges = []
    for i, e in enumerate(obj["edges"]):
        if not isinstance(e, list) or len(e) != 2:
            raise SchemaError(f"model.edges[{i}]: expected [src, dst]")
        edges.append((_expect_str(e[0], f"model.edges[{i}]"),
                      _expect_str(e[1], f"model.edges[{i}]")))
    inputs = tuple(_expect_str(x, "model.inputs") for x in obj["inputs"])
    outputs = tuple(_expect_str(x, "model.outputs") for x in obj["outputs"])
    try:
        return ModelGraph(name, layers, tuple(edges), inputs, outputs)
    except GraphError as exc:
        raise SchemaError(f"model: {exc}") from None


def save_graph(graph: ModelGraph, path: str | Path) -> None:
    Path(path).write_text(dumps_json(graph_to_json_dict(graph)))


def load_graph(path: str | Path) -> ModelGraph:
    return graph_from_json_dict(loads_json(Path(path).read_text(), "model"))


def dumps_json(obj) -> str:
    """Canonical JSON used for every file this package writes."""
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def loads_json(text: str, what: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{what}: not valid JSON ({exc})") from None
