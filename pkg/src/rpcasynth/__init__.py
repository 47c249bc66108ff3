"""Robust PCA synthetic control for counterfactual estimation on panel data."""

from .errors import NumericalError, RpcaSynthError, StageError, ValidationError
from .panel import Panel, load_panel, validate
from .synth import PipelineConfig, SynthFit, run_pipeline

__all__ = [
    "NumericalError",
    "Panel",
    "PipelineConfig",
    "RpcaSynthError",
    "StageError",
    "SynthFit",
    "ValidationError",
    "load_panel",
    "run_pipeline",
    "validate",
]
