"""Token-adaptive confidence-threshold decoding for masked-diffusion LMs.

The decoder commits masked positions whose predicted confidence clears a
per-position threshold built in three stages: a two-level initial map
(low over decoded positions, high over masked), spatial smoothing with a
small symmetric kernel, and a multiplicative relaxation for positions
whose argmax id has stayed stable across steps. Baseline policies, a
synthetic denoiser, a trace format, stability analysis, and a benchmark
harness share the same loop machinery.
"""

from .analyzer import (
    SpatialStabilityReport,
    TemporalStabilityReport,
    spatial_stability,
    temporal_stability,
    write_report,
)
from .baselines import (
    AnchorDualPolicy,
    BaselineConfig,
    FixedThresholdPolicy,
    HalfStepPolicy,
    POLICY_NAMES,
    TopKPolicy,
    anchor_dual_commit,
    build_policy,
    fixed_threshold_commit,
    half_step_commit,
    topk_commit,
)
from .bench import (
    BenchResult,
    PolicySpec,
    run_cell,
    run_matrix,
    speedup_report,
    write_results_csv,
    write_results_json,
    write_summary_md,
)
from .core import (
    BOUNDARY_POLICIES,
    KERNEL_KINDS,
    STAGE_INITIAL,
    STAGE_SPATIAL,
    STAGE_SPATIO_TEMPORAL,
    DecodeState,
    DecoderConfig,
    StepPrediction,
    ThresholdMap,
    Vocab,
    commit,
    force_commit,
    new_state,
)
from .decoder import (
    Denoiser,
    Policy,
    RelaxationVector,
    StdecPolicy,
    StepOutcome,
    adaptive_thresholds,
    decode,
    initial_threshold_map,
    relaxation_factors,
    select_commit_set,
    update_streaks,
)
from .denoisers import (
    PRESETS,
    ScriptedDenoiser,
    SyntheticDenoiser,
    SyntheticPreset,
    get_preset,
    ground_truth,
    load_preset,
    resolve_preset,
    scripted_predict,
    synthetic_predict,
)
from .errors import ConfigError, DecodeError, ReplayError, TraceError
from .smoothing import SmoothingKernel, build_kernel, kernel_from_config, smooth
from .trace import (
    FORMAT_VERSION,
    DecodeTrace,
    TraceHeader,
    TraceStep,
    read_trace,
    validate_trace,
    write_trace,
)

__version__ = "0.1.0"

__all__ = [
    "AnchorDualPolicy",
    "BaselineConfig",
    "BenchResult",
    "BOUNDARY_POLICIES",
    "ConfigError",
    "DecodeError",
    "DecodeState",
    "DecodeTrace",
    "DecoderConfig",
    "Denoiser",
    "FORMAT_VERSION",
    "FixedThresholdPolicy",
    "HalfStepPolicy",
    "KERNEL_KINDS",
    "POLICY_NAMES",
    "PRESETS",
    "Policy",
    "PolicySpec",
    "RelaxationVector",
    "ReplayError",
    "ScriptedDenoiser",
    "SmoothingKernel",
    "STAGE_INITIAL",
    "STAGE_SPATIAL",
    "STAGE_SPATIO_TEMPORAL",
    "SpatialStabilityReport",
    "StdecPolicy",
    "StepOutcome",
    "StepPrediction",
    "SyntheticDenoiser",
    "SyntheticPreset",
    "TemporalStabilityReport",
    "ThresholdMap",
    "TopKPolicy",
    "TraceError",
    "TraceHeader",
    "TraceStep",
    "Vocab",
    "adaptive_thresholds",
    "anchor_dual_commit",
    "build_kernel",
    "build_policy",
    "commit",
    "decode",
    "fixed_threshold_commit",
    "force_commit",
    "get_preset",
    "ground_truth",
    "load_preset",
    "resolve_preset",
    "half_step_commit",
    "initial_threshold_map",
    "kernel_from_config",
    "new_state",
    "read_trace",
    "relaxation_factors",
    "run_cell",
    "run_matrix",
    "scripted_predict",
    "select_commit_set",
    "smooth",
    "spatial_stability",
    "speedup_report",
    "synthetic_predict",
    "temporal_stability",
    "topk_commit",
    "update_streaks",
    "validate_trace",
    "write_report",
    "write_results_csv",
    "write_results_json",
    "write_summary_md",
    "write_trace",
]
