"""Location-aware secure transmission through an intelligent reflecting surface.

Stage 1 places the surface from channel statistics alone; stage 2 designs the
beamformer and phase shifts against a statistically known eavesdropper under a
secrecy-outage constraint.
"""
from .channel import (
    EveStatModel,
    Rect,
    SystemParams,
    Vec2,
    eve_stat_model,
    sample_channels,
)
from .config import ConfigError, RunConfig, load_config
from .outage import QuantilePair, empirical_secrecy_outage, quantiles
from .pipeline import (
    SCHEMES,
    ScenarioResult,
    run_benchmark,
    two_stage_known_eve,
    two_stage_suspicious_area,
)
from .placement import (
    PlacementResult,
    global_search_location,
    maxmin_location,
    sca_location,
    worst_eve,
)
from .sdp import SolverFailure

__all__ = [
    "SCHEMES",
    "ConfigError",
    "EveStatModel",
    "PlacementResult",
    "QuantilePair",
    "Rect",
    "RunConfig",
    "ScenarioResult",
    "SolverFailure",
    "SystemParams",
    "Vec2",
    "empirical_secrecy_outage",
    "eve_stat_model",
    "global_search_location",
    "load_config",
    "maxmin_location",
    "quantiles",
    "run_benchmark",
    "sample_channels",
    "sca_location",
    "two_stage_known_eve",
    "two_stage_suspicious_area",
    "worst_eve",
]
