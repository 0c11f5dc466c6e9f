"""Remote real-time reconstruction of a Poisson counting process through a queue.

A source emits a Poisson event stream; a sampler (uniform clock, event
threshold, or zero-wait) pushes snapshots through a FIFO exponential server;
the monitor holds the last delivered value.  The package computes the exact
time-averaged reconstruction distortion of that pipeline both in closed form
and by simulation, plus the interpolation floor and the optimal sampling
parameters.
"""

from .analytic import (
    AnalyticModel,
    DelayDistribution,
    DistortionBreakdown,
    ErlangChainSolution,
    erlang_chain,
    lower_bound_theta,
    lower_bound_theta_flattened,
    mean_polygon_areas_threshold,
    mean_polygon_areas_uniform,
    mean_polygon_areas_zero_wait,
    overflow_probability,
    solve_chain_truncated,
    solve_sigma,
    solve_z0,
    theta_threshold,
    theta_uniform,
    theta_zero_wait,
)
from .errors import InstabilityError, NumericalError, ParameterError
from .interpolate import InterpolationPlan, oracle_reconstruction, reconstruct_with_interpolation
from .optimize import RateOptimum, ThresholdOptimum, optimal_rate, optimal_threshold
from .simulate import (
    DistortionReport,
    PolygonDecomposition,
    RunArtifacts,
    SamplePacket,
    SimConfig,
    decompose_polygons,
    measure_aoi,
    run_pipeline,
    sample_trigger_threshold,
    sample_trigger_uniform,
    sample_trigger_zero_wait,
    simulate,
)
from .stochastic import (
    ProcessPath,
    ServiceModel,
    StepTrace,
    generate_poisson_path,
    integrate_difference,
    order_statistics_oracle,
    stream_rng,
)

__version__ = "0.1.0"

__all__ = [
    "AnalyticModel",
    "DelayDistribution",
    "DistortionBreakdown",
    "DistortionReport",
    "ErlangChainSolution",
    "InstabilityError",
    "InterpolationPlan",
    "NumericalError",
    "ParameterError",
    "PolygonDecomposition",
    "ProcessPath",
    "RateOptimum",
    "RunArtifacts",
    "SamplePacket",
    "ServiceModel",
    "SimConfig",
    "StepTrace",
    "ThresholdOptimum",
    "decompose_polygons",
    "erlang_chain",
    "generate_poisson_path",
    "integrate_difference",
    "lower_bound_theta",
    "lower_bound_theta_flattened",
    "mean_polygon_areas_threshold",
    "mean_polygon_areas_uniform",
    "mean_polygon_areas_zero_wait",
    "measure_aoi",
    "optimal_rate",
    "optimal_threshold",
    "oracle_reconstruction",
    "order_statistics_oracle",
    "overflow_probability",
    "reconstruct_with_interpolation",
    "run_pipeline",
    "sample_trigger_threshold",
    "sample_trigger_uniform",
    "sample_trigger_zero_wait",
    "simulate",
    "solve_chain_truncated",
    "solve_sigma",
    "solve_z0",
    "stream_rng",
    "theta_threshold",
    "theta_uniform",
    "theta_zero_wait",
]
