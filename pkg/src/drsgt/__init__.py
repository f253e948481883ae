"""Decentralized Riemannian stochastic gradient tracking on the Stiefel manifold.

A numpy library plus a synchronous multi-agent simulator: manifold geometry
primitives, doubly stochastic mixing over communication graphs, stochastic
gradient oracles with variable batch-size schedules, the gradient-tracking
engine and an SGD baseline, and an experiment harness that records the
standard convergence metrics to CSV.
"""

from .engine import AgentState, AlgoConfig, DrsgdEngine, DrsgtEngine, RunSummary, build_engine
from .errors import (
    ConfigError,
    DegenerateMeanError,
    DimensionError,
    EngineFault,
    ManifoldError,
    OracleError,
    ParameterError,
    ScheduleError,
    TopologyError,
)
from .experiment import (
    ExperimentConfig,
    MetricsRow,
    compute_metrics,
    replicate_figure,
    run_experiment,
    run_sweep,
)
from .network import NetworkSpec, SpectralDiagnostics, build_topology, mix, spectral_diagnostics
from .oracles import (
    ExactOracle,
    GradientSample,
    InstanceBounds,
    PcaProblem,
    SampleSchedule,
    SamplingOracle,
    SyntheticNoiseOracle,
    exact_riemannian_gradient,
    full_batch_riemannian_gradient,
    generate_pca_instance,
    instance_bounds,
    load_instance,
    sample_size,
    save_instance,
    stochastic_riemannian_gradient,
)
from .stiefel import (
    AmbientMatrix,
    RegionReport,
    StiefelPoint,
    TangentVector,
    consensus_error,
    induced_arithmetic_mean,
    nearest_point,
    polar_retraction,
    procrustes_distance,
    random_point,
    random_tangent,
    region_membership,
    tangent_projection,
)

__version__ = "0.1.0"

__all__ = [
    "AgentState",
    "AlgoConfig",
    "AmbientMatrix",
    "ConfigError",
    "DegenerateMeanError",
    "DimensionError",
    "DrsgdEngine",
    "DrsgtEngine",
    "EngineFault",
    "ExactOracle",
    "ExperimentConfig",
    "GradientSample",
    "InstanceBounds",
    "ManifoldError",
    "MetricsRow",
    "NetworkSpec",
    "OracleError",
    "ParameterError",
    "PcaProblem",
    "RegionReport",
    "RunSummary",
    "SampleSchedule",
    "SamplingOracle",
    "ScheduleError",
    "SpectralDiagnostics",
    "StiefelPoint",
    "SyntheticNoiseOracle",
    "TangentVector",
    "TopologyError",
    "build_engine",
    "build_topology",
    "compute_metrics",
    "consensus_error",
    "exact_riemannian_gradient",
    "full_batch_riemannian_gradient",
    "generate_pca_instance",
    "induced_arithmetic_mean",
    "instance_bounds",
    "load_instance",
    "mix",
    "nearest_point",
    "polar_retraction",
    "procrustes_distance",
    "random_point",
    "random_tangent",
    "region_membership",
    "replicate_figure",
    "run_experiment",
    "run_sweep",
    "sample_size",
    "save_instance",
    "spectral_diagnostics",
    "stochastic_riemannian_gradient",
    "tangent_projection",
]
