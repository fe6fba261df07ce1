"""Exception types shared across the toolkit.

Every domain failure derives from TandemError so the CLI can map the whole
family to exit code 1. Usage errors (bad flags) are argparse's business and
exit with 2; anything else escaping is a bug.
"""

from __future__ import annotations


class TandemError(Exception):
    """Base class for all domain errors raised by this package."""


class GraphError(TandemError):
    """Structurally invalid model graph (cycles, bad edges, bad layer fields)."""


class InvalidGeometryError(GraphError):
    """A size formula produced an empty or impossible tensor.

    Carries the offending layer id when raised during shape inference.
    """

    def __init__(self, message: str, layer_id: str | None = None):
        super().__init__(message if layer_id is None else f"{layer_id}: {message}")
        self.layer_id = layer_id


class ShapeMismatchError(GraphError):
    """Incompatible input shapes met at a multi-input layer."""

    def __init__(self, message: str, layer_id: str | None = None):
        super().__init__(message if layer_id is None else f"{layer_id}: {message}")
        self.layer_id = layer_id


class SchemaError(TandemError):
    """A JSON document does not match its declared schema."""


class UnsupportedGeometryError(TandemError):
    """A rewrite was asked to substitute a geometry it has no identity for."""


class ProfileConsistencyError(TandemError):
    """A latency profile disagrees with the model graph it claims to time."""


class SubgraphLimitError(TandemError):
    """More accelerator subgraphs than the runtime allows."""

    def __init__(self, count: int, limit: int):
        super().__init__(
            f"graph splits into {count} accelerator subgraphs, limit is {limit}"
        )
        self.count = count
        self.limit = limit


class InfeasiblePartitionError(TandemError):
    """A specific split point is not executable on the requested engines."""


class NoFeasiblePartitionError(TandemError):
    """No split point at all satisfies the engine constraints."""


class SimulationError(TandemError):
    """The simulator was handed an unrunnable scenario."""


class MetricsError(TandemError):
    """Image metric inputs are unusable (dimension or level mismatch)."""


class PgmFormatError(SchemaError):
    """A PGM file is malformed or truncated."""
