"""Built-in model builders.

The main resident is the pix2pix U-Net generator: eight stride-2
convolution blocks down to a 1x1 bottleneck, then eight stride-2
deconvolution blocks back up, with skip connections concatenating each
decoder stage onto its mirror encoder activation. All eight deconvolutions
use kernel 4, stride 2, padding 1, which is exactly the geometry the
accelerator refuses, so this generator is the motivating rewrite target.

Three variants are exposed. "original" is the network as described above.
"crop" and "conv" are produced by running the padded-deconvolution rewrite
over the original, so the zoo can never drift from what the rewrite pass
actually emits. Parameter totals, for reference:

    original  54,425,859
    crop      54,425,859  (cropping adds nothing)
    conv      64,637,268  (eight bias-free 3x3 convolutions)

Only the final deconvolution carries a bias; every other conv and deconv
is bias-free because a batch normalization immediately follows it.
"""

from __future__ import annotations

from dataclasses import replace
from enum import Enum

from .errors import GraphError
from .graph_ir import (
    ActivationFn,
    DataType,
    LayerSpec,
    ModelGraph,
    activation,
    batch_norm,
    concat,
    conv,
    deconv,
    dropout,
)
from .rewrite import Strategy, substitute_deconv_padding

ENCODER_FILTERS = (64, 128, 256, 512, 512, 512, 512, 512)
DECODER_FILTERS = (512, 512, 512, 512, 256, 128, 64)


class Pix2PixVariant(Enum):
    ORIGINAL = "original"
    CROP = "crop"
    CONV = "conv"


def build_pix2pix_generator(
    variant: Pix2PixVariant = Pix2PixVariant.ORIGINAL,
    in_channels: int = 3,
    out_channels: int = 3,
    dtype: DataType = DataType.FP16,
) -> ModelGraph:
    """The U-Net generator, named "pix2pix-<variant>"."""
    layers: list[LayerSpec] = []
    edges: list[tuple[str, str]] = []
    prev: str | None = None

    def emit(layer: LayerSpec) -> None:
        nonlocal prev
        layers.append(layer)
        if prev is not None:
            edges.append((prev, layer.id))
        prev = layer.id

    # Encoder: the first block skips normalization (its statistics would be
    # dominated by the raw input range).
    channels = in_channels
    for b, filters in enumerate(ENCODER_FILTERS, start=1):
        emit(conv(f"enc{b}.conv", channels, filters, 4, 2, 1,
                  bias=False, dtype=dtype))
        if b > 1:
            emit(batch_norm(f"enc{b}.norm", filters, dtype=dtype))
        emit(activation(f"enc{b}.act", ActivationFn.LEAKY_RELU, dtype=dtype))
        channels = filters

    # Decoder: block b upsamples, then concatenates the activation of
    # encoder block 8-b, doubling the channel count the next block sees.
    # Dropout on the first three blocks keeps the generator stochastic.
    for b, filters in enumerate(DECODER_FILTERS, start=1):
        emit(deconv(f"dec{b}.deconv", channels, filters, 4, 2, 1,
                    bias=False, dtype=dtype))
        emit(batch_norm(f"dec{b}.norm", filters, dtype=dtype))
        if b <= 3:
            emit(dropout(f"dec{b}.drop", dtype=dtype))
        emit(activation(f"dec{b}.act", ActivationFn.RELU, dtype=dtype))
        emit(concat(f"dec{b}.cat", dtype=dtype))
        skip = f"enc{8 - b}.act"
        edges.append((skip, f"dec{b}.cat"))
        channels = filters + ENCODER_FILTERS[8 - b - 1]

    # Output head: maps back to image channels, tanh squashes to [-1, 1].
    # This is the one deconvolution with a bias; nothing normalizes after it.
    emit(deconv("out.deconv", channels, out_channels, 4, 2, 1,
                bias=True, dtype=dtype))
    emit(activation("out.act", ActivationFn.TANH, dtype=dtype))

    graph = ModelGraph(
        name=f"pix2pix-{Pix2PixVariant.ORIGINAL.value}",
        layers=tuple(layers),
        edges=tuple(edges),
        inputs=("enc1.conv",),
        outputs=("out.act",),
    )
    if variant is Pix2PixVariant.ORIGINAL:
        return graph
    strategy = Strategy.CROP if variant is Pix2PixVariant.CROP else Strategy.CONV
    rewritten, report = substitute_deconv_padding(graph, strategy)
    if not report.shape_preserved:
        raise GraphError("pix2pix rewrite unexpectedly changed output shapes")
    return replace(rewritten, name=f"pix2pix-{variant.value}")


def build_chain(name: str, layer_count: int,
                dtype: DataType = DataType.FP16) -> ModelGraph:
    """A straight chain of relu activations, for scheduling experiments.

    Activations are shape-preserving and accelerator-compatible, so a chain
    is the simplest model whose profile can be shaped freely.
    """
    if layer_count < 1:
        raise GraphError(f"chain needs at least one layer, got {layer_count}")
    layers = tuple(
        activation(f"l{i:04d}", ActivationFn.RELU, dtype=dtype)
        for i in range(layer_count)
    )
    edges = tuple(
        (f"l{i:04d}", f"l{i + 1:04d}") for i in range(layer_count - 1)
    )
    return ModelGraph(name, layers, edges,
                      inputs=(layers[0].id,), outputs=(layers[-1].id,))
