"""Tandem: plan and simulate dual-engine neural-network inference.

The package models an embedded platform with one programmable GPU and one
fixed-function accelerator. It answers four questions about a pair of
networks that must run concurrently: which layers the accelerator can
execute at all, how a padded-deconvolution network can be rewritten so
that it qualifies, where to split each network between the two engines so
they stay busy in counterphase, and what throughput a given placement
actually achieves once queueing and engine transitions are replayed
event by event.
"""

from .compat import (
    DLA_SUBGRAPH_LIMIT,
    CompatReport,
    CompatRule,
    LayerVerdict,
    check_graph,
    check_layer,
    compatible_runs,
    default_dla_rules,
    effective_dtype,
    load_rules,
    rules_from_json,
    rules_to_json,
    save_rules,
    assert_subgraph_limit,
)
from .errors import (
    GraphError,
    InfeasiblePartitionError,
    InvalidGeometryError,
    MetricsError,
    NoFeasiblePartitionError,
    PgmFormatError,
    ProfileConsistencyError,
    SchemaError,
    ShapeMismatchError,
    SimulationError,
    SubgraphLimitError,
    TandemError,
    UnsupportedGeometryError,
)
from .graph_ir import (
    ActivationFn,
    DataType,
    LayerKind,
    LayerSpec,
    ModelGraph,
    PoolMode,
    TensorShape,
    activation,
    batch_norm,
    concat,
    conv,
    conv_output_size,
    crop,
    crop_output_size,
    deconv,
    deconv_output_size,
    dropout,
    dumps_json,
    equal,
    graph_from_json_dict,
    graph_to_json_dict,
    infer_shapes,
    linearize,
    load_graph,
    param_count,
    pool,
    save_graph,
    slice_layer,
)
from .metrics import (
    GrayImage,
    MetricsReport,
    SsimParams,
    compute_report,
    load_pgm,
    mse,
    psnr,
    save_pgm,
    ssim,
)
from .profiles import (
    LatencyProfile,
    PrefixSums,
    ProfileEntry,
    load_profile,
    prefix_sums,
    profile_from_json_dict,
    profile_to_json_dict,
    quantize_ms,
    save_profile,
    synthesize_profile,
    validate_profile_against,
)
from .rewrite import (
    EquivalenceResult,
    RewriteReport,
    Strategy,
    substitute_deconv_padding,
    verify_equivalence,
)
from .scheduler import (
    Engine,
    ModelSchedule,
    Schedule,
    ScheduleEstimate,
    ScheduleKind,
    Segment,
    SwapPlan,
    estimate_swap,
    load_schedule,
    naive_schedule,
    save_schedule,
    schedule_from_json_dict,
    schedule_to_json_dict,
    search_swap,
    single_engine_schedule,
    swap_schedule,
)
from .simulator import (
    EventKind,
    SimResult,
    TimelineEntry,
    export_timeline,
    parse_timeline,
    simulate,
)
from .zoo import (
    DECODER_FILTERS,
    ENCODER_FILTERS,
    Pix2PixVariant,
    build_chain,
    build_pix2pix_generator,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
