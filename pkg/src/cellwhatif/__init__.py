"""What-if workbench for cellular transmission-power / CIO adjustments."""

__version__ = "0.1.0"

from cellwhatif.geometry import (  # noqa: F401
    AdjustmentDelta,
    area_multiplier,
    beta_from_delta,
)
