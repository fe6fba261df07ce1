"""Rewrite padded stride-2 deconvolutions into accelerator-friendly form.

The accelerator rejects padded deconvolution outright, and in encoder-decoder
generators that single restriction shatters the whole decoder into GPU
fallback. The fix is a local identity: a kernel-4 stride-2 deconvolution with
padding 1 maps n to 2n, while the same deconvolution unpadded maps n to
2n + 2, two pixels too wide in each axis. Trimming those pixels restores the
original geometry, and both trims are themselves accelerator-friendly:

    crop strategy:  unpadded deconv, then Crop(border=1); adds no parameters
    conv strategy:  unpadded deconv, then bias-free 3x3 Conv with padding 0,
                    channel-preserving; adds 9 * C^2 parameters per site

The crop is cheaper; the conv keeps the result learnable so the network can
be fine-tuned to compensate. `verify_equivalence` checks the claim the only
way a shape algebra can: every surviving layer, and every model output, must
keep its inferred shape.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .errors import GraphError, UnsupportedGeometryError
from .graph_ir import (
    LayerKind,
    LayerSpec,
    ModelGraph,
    TensorShape,
    conv,
    crop,
    infer_shapes,
    param_count,
)


class Strategy(Enum):
    CROP = "crop"
    CONV = "conv"


@dataclass(frozen=True, slots=True)
class RewriteReport:
    """What a substitution pass did to a graph."""

    strategy: Strategy
    substitutions: tuple[tuple[str, tuple[str, ...]], ...]
    param_delta: int
    shape_preserved: bool

    def to_json_dict(self) -> dict:
        return {
            "strategy": self.strategy.value,
            "substitutions": [
                {"original": orig, "inserted": list(ins)}
                for orig, ins in self.substitutions
            ],
            "param_delta": self.param_delta,
            "shape_preserved": self.shape_preserved,
            "version": 1,
        }


@dataclass(frozen=True, slots=True)
class EquivalenceResult:
    ok: bool
    divergence: tuple[str, TensorShape | None, TensorShape | None] | None = None


def _probe_shape(graph: ModelGraph) -> TensorShape:
    # Channel count must satisfy the first real layer; spatial 256 survives
    # eight stride-2 halvings, which covers the generators this was built for.
    channels = 1
    for lid in graph.order:
        layer = graph.by_id[lid]
        if lid in graph.inputs and layer.in_channels is not None:
            channels = layer.in_channels
            break
    return TensorShape(channels, 256, 256)


def verify_equivalence(original: ModelGraph, rewritten: ModelGraph,
                       input_shape: TensorShape | None = None) -> EquivalenceResult:
    """Check the rewritten graph is shape-identical where it overlaps the original.

    Surviving layers (same id, same spec in both graphs) must produce the
    same inferred shape, and the two graphs must agree output-for-output.
    First divergence wins, reported as (where, original shape, new shape).
    """
    if input_shape is None:
        input_shape = _probe_shape(original)
    shapes_a = infer_shapes(original, input_shape)
    shapes_b = infer_shapes(rewritten, input_shape)
    for lid in original.order:
        if lid not in rewritten.by_id:
            continue
        if original.by_id[lid] != rewritten.by_id[lid]:
            continue
        if shapes_a[lid] != shapes_b[lid]:
            return EquivalenceResult(False, (lid, shapes_a[lid], shapes_b[lid]))
    if len(original.outputs) != len(rewritten.outputs):
        return EquivalenceResult(False, ("outputs", None, None))
    for pos, (oa, ob) in enumerate(zip(original.outputs, rewritten.outputs)):
        if shapes_a[oa] != shapes_b[ob]:
            return EquivalenceResult(
                False, (f"output[{pos}]", shapes_a[oa], shapes_b[ob])
            )
    return EquivalenceResult(True)


def _trim_layer(target: LayerSpec, strategy: Strategy) -> LayerSpec:
    if strategy is Strategy.CROP:
        return crop(f"{target.id}.crop", 1, dtype=target.dtype)
    c = target.out_channels
    return conv(f"{target.id}.conv", c, c, 3, 1, 0, bias=False, dtype=target.dtype)


def substitute_deconv_padding(graph: ModelGraph,
                              strategy: Strategy) -> tuple[ModelGraph, RewriteReport]:
    """Replace every padded deconvolution by its unpadded-plus-trim form.

    Only the kernel-4 stride-2 padding-1 shape (the standard 2x upsampler)
    is rewritable; any other padded deconvolution raises
    UnsupportedGeometryError. A graph without padded deconvolutions comes
    back unchanged, so the pass is idempotent.
    """
    targets = [l for l in graph.layers
               if l.kind is LayerKind.DECONV and l.padding > 0]
    if not targets:
        return graph, RewriteReport(strategy, (), 0, True)

    for t in targets:
        geom = (t.kernel, t.stride, t.padding, t.dilation, t.groups)
        if geom != (4, 2, 1, 1, 1):
            raise UnsupportedGeometryError(
                f"{t.id}: cannot rewrite deconv(kernel={t.kernel}, "
                f"stride={t.stride}, padding={t.padding}, dilation={t.dilation}, "
                f"groups={t.groups}); only kernel 4, stride 2, padding 1 "
                f"has an unpadded equivalent here"
            )

    trim_of: dict[str, LayerSpec] = {}
    new_layers: list[LayerSpec] = []
    for layer in graph.layers:
        if layer.kind is LayerKind.DECONV and layer.padding > 0:
            trim = _trim_layer(layer, strategy)
            if trim.id in graph.by_id:
                raise GraphError(
                    f"cannot insert {trim.id!r}: a layer with that id exists"
                )
            trim_of[layer.id] = trim
            new_layers.append(LayerSpec(
                layer.id, LayerKind.DECONV, layer.dtype,
                kernel=layer.kernel, stride=layer.stride, padding=0,
                dilation=layer.dilation, groups=layer.groups,
                in_channels=layer.in_channels, out_channels=layer.out_channels,
                has_bias=layer.has_bias,
            ))
            new_layers.append(trim)
        else:
            new_layers.append(layer)

    # Outgoing edges of a rewritten deconv now leave its trim layer instead;
    # the deconv-to-trim edge goes where the first outgoing edge used to be.
    new_edges: list[tuple[str, str]] = []
    linked: set[str] = set()
    for src, dst in graph.edges:
        if src in trim_of:
            if src not in linked:
                new_edges.append((src, trim_of[src].id))
                linked.add(src)
            new_edges.append((trim_of[src].id, dst))
        else:
            new_edges.append((src, dst))
    for t in targets:
        if t.id not in linked:
            new_edges.append((t.id, trim_of[t.id].id))

    outputs = tuple(
        trim_of[o].id if o in trim_of else o for o in graph.outputs
    )
    rewritten = ModelGraph(graph.name, tuple(new_layers), tuple(new_edges),
                           graph.inputs, outputs)

    substitutions = tuple((t.id, (trim_of[t.id].id,)) for t in targets)
    delta = param_count(rewritten) - param_count(graph)
    equiv = verify_equivalence(graph, rewritten)
    return rewritten, RewriteReport(strategy, substitutions, delta, equiv.ok)
