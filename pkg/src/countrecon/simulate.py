"""Event-driven simulation of the sample-queue-reconstruct pipeline.

One run generates a Poisson source path, fires the sampler (uniform grid,
every beta-th event, or whenever the server goes idle), pushes the samples
through a FIFO exponential server, rebuilds the monitor-side step function,
and integrates the gap between source and reconstruction exactly via
breakpoint merging.  All delays come from one Lindley recursion, so the run
is reproducible from (config, seed) alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .errors import ParameterError
from .stochastic import (
    STREAM_SERVICES,
    ProcessPath,
    StepTrace,
    exponential_draws,
    generate_poisson_path,
    integrate_difference,
    stream_rng,
)

POLICIES = ("uniform", "threshold", "zero_wait")
INTERPOLATION_MODES = ("off", "single_point", "uniform_J", "oracle")

# A run is flagged unstable when this many samples are still queued at the end.
BACKLOG_LIMIT = 1000


@dataclass(frozen=True)
class SamplePacket:
    """Lifecycle of one sample through the pipeline."""

    index: int
    sample_time: float
    sampled_value: int
    enqueue_time: float
    service_start: float
    wait: float
    service: float
    delivery_time: float


@dataclass(frozen=True)
class SimConfig:
    lam: float
    mu: float
    policy: str
    horizon: float
    rate: float | None = None   # uniform sampling rate r
    beta: int | None = None     # threshold
    seed: int = 0
    interpolation: str = "off"

    def __post_init__(self):
        if self.lam <= 0 or self.mu <= 0:
            raise ParameterError("lam and mu must be positive")
        if self.horizon <= 0:
            raise ParameterError(f"horizon must be positive, got {self.horizon}")
        if self.policy not in POLICIES:
            raise ParameterError(f"policy must be one of {POLICIES}, got {self.policy!r}")
        if self.policy == "uniform" and (self.rate is None or self.rate <= 0):
            raise ParameterError("uniform policy requires rate > 0")
        if self.policy == "threshold" and (
                self.beta is None or self.beta < 1 or self.beta != int(self.beta)):
            raise ParameterError("threshold policy requires integer beta >= 1")
        if self.interpolation not in INTERPOLATION_MODES:
            raise ParameterError(
                f"interpolation must be one of {INTERPOLATION_MODES}, got {self.interpolation!r}")

    @property
    def param(self) -> float | None:
        if self.policy == "uniform":
            return self.rate
        if self.policy == "threshold":
            return float(self.beta)
        return None


def sample_trigger_uniform(rate_or_interval: float, horizon: float,
                           as_interval: bool = False) -> np.ndarray:
    """Sampling instants d, 2d, ... up to the horizon (d = 1/rate by default)."""
    d = rate_or_interval if as_interval else 1.0 / rate_or_interval
    if d <= 0:
        raise ParameterError("sampling interval must be positive")
    count = int(math.floor(horizon / d + 1e-9))
    return np.arange(1, count + 1, dtype=float) * d


def sample_trigger_threshold(beta: int, path: ProcessPath) -> np.ndarray:
    """Sampling instants at every beta-th source event (the event instant itself)."""
    if beta < 1 or beta != int(beta):
        raise ParameterError(f"beta must be an integer >= 1, got {beta}")
    return path.arrival_times[beta - 1::beta].copy()


def sample_trigger_zero_wait(services: np.ndarray, horizon: float
                             ) -> tuple[np.ndarray, np.ndarray]:
    """Sampling instants for a sampler that fires whenever the server idles.

    The first sample is taken at t = 0; each next one the moment the previous
    delivery completes, so the trigger gaps are the service draws themselves.
    Returns (trigger_times, services_used).
    """
    starts = np.concatenate([[0.0], np.cumsum(services)[:-1]])
    keep = starts <= horizon
    return starts[keep], services[: int(keep.sum())]


def lindley_waits(triggers: np.ndarray, services: np.ndarray) -> np.ndarray:
    """FIFO waiting time of each sample before an exponential server.

    w_1 = 0 and w_i = max(0, w_{i-1} + v_{i-1} - (t_i - t_{i-1})), evaluated
    in closed scan form (running cumulative sum minus its prefix minimum).
    """
    if triggers.size == 0:
        return np.empty(0)
    increments = services[:-1] - np.diff(triggers)
    cum = np.concatenate([[0.0], np.cumsum(increments)])
    prefix_min = np.minimum.accumulate(np.concatenate([[0.0], cum[:-1]]))
    return np.maximum(0.0, cum - prefix_min)


@dataclass(frozen=True)
class RunArtifacts:
    """Raw arrays of one pipeline run (inputs to scoring and decomposition)."""

    config: SimConfig
    path: ProcessPath
    trigger_times: np.ndarray
    sampled_values: np.ndarray    # N(t_i), int64
    waits: np.ndarray
    services: np.ndarray
    delivery_times: np.ndarray

    @property
    def sample_count(self) -> int:
        return self.trigger_times.size

    def packets(self) -> Iterator[SamplePacket]:
        for i in range(self.sample_count):
            t = self.trigger_times[i]
            w = self.waits[i]
            v = self.services[i]
            yield SamplePacket(
                index=i + 1,
                sample_time=float(t),
                sampled_value=int(self.sampled_values[i]),
                enqueue_time=float(t),
                service_start=float(t + w),
                wait=float(w),
                service=float(v),
                delivery_time=float(t + w + v),
            )

    def reconstruction_trace(self) -> StepTrace:
        """Monitor-side step function: jumps to N(t_i) at the delivery instant."""
        return StepTrace.from_steps(self.delivery_times,
                                    self.sampled_values.astype(float))


def run_pipeline(config: SimConfig) -> RunArtifacts:
    """Generate the source path and push every sample through the queue."""
    path = generate_poisson_path(config.lam, config.horizon, config.seed)
    service_rng = stream_rng(config.seed, STREAM_SERVICES)

    if config.policy == "uniform":
        triggers = sample_trigger_uniform(config.rate, config.horizon)
        services = exponential_draws(service_rng, config.mu, triggers.size)
        waits = lindley_waits(triggers, services)
    elif config.policy == "threshold":
        triggers = sample_trigger_threshold(config.beta, path)
        services = exponential_draws(service_rng, config.mu, triggers.size)
        waits = lindley_waits(triggers, services)
    else:  # zero_wait: triggers are self-clocked by the service draws
        expect = config.mu * config.horizon
        size = int(expect + 6.0 * math.sqrt(expect) + 16.0)
        draws = exponential_draws(service_rng, config.mu, size)
        while draws.sum() <= config.horizon:
            draws = np.concatenate(
                [draws, exponential_draws(service_rng, config.mu, max(size // 4, 64))])
        triggers, services = sample_trigger_zero_wait(draws, config.horizon)
        waits = np.zeros_like(triggers)

    # An event at exactly a sampling instant is included in the sample.
    values = np.searchsorted(path.arrival_times, triggers, side="right")
    deliveries = triggers + waits + services
    return RunArtifacts(config, path, triggers, values, waits, services, deliveries)


@dataclass(frozen=True)
class PolygonDecomposition:
    """Per-sample distortion areas split by cause, plus the post-sampling tail.

    s_a: area accrued between an event and the next sampling instant.
    s_b: waiting-room rectangles (None for zero-wait runs, which never wait).
    s_c: in-service rectangles.
    tail: area of events after the last sampling instant, cut at the horizon.
    All rectangle pieces are clipped at the horizon so that
    total == integral of the reconstruction deficit over [0, horizon].
    """

    s_a: np.ndarray
    s_b: np.ndarray | None
    s_c: np.ndarray
    tail: float

    @property
    def total(self) -> float:
        wait_part = 0.0 if self.s_b is None else float(self.s_b.sum())
        return float(self.s_a.sum()) + wait_part + float(self.s_c.sum()) + self.tail


def decompose_polygons(artifacts: RunArtifacts) -> PolygonDecomposition:
    """Split the run's distortion area into per-sample cause-attributed pieces."""
    horizon = artifacts.config.horizon
    s = artifacts.path.arrival_times
    t = artifacts.trigger_times
    counts = artifacts.sampled_values
    heights = np.diff(counts, prepend=0).astype(float)

    cum = np.concatenate([[0.0], np.cumsum(s)])
    hi = counts
    lo = np.concatenate([[0], counts[:-1]])
    s_a = heights * t - (cum[hi] - cum[lo])

    service_start = t + artifacts.waits
    s_b = heights * (np.minimum(service_start, horizon) - np.minimum(t, horizon))
    s_c = heights * (np.minimum(artifacts.delivery_times, horizon)
                     - np.minimum(service_start, horizon))

    covered = int(counts[-1]) if counts.size else 0
    tail = float(np.sum(horizon - s[covered:]))

    if artifacts.config.policy == "zero_wait":
        return PolygonDecomposition(s_a=s_a, s_b=None, s_c=s_c, tail=tail)
    return PolygonDecomposition(s_a=s_a, s_b=s_b, s_c=s_c, tail=tail)


def measure_aoi(packets: "Sequence[SamplePacket] | RunArtifacts", horizon: float) -> float:
    """Time-averaged age of the freshest delivered sample over [0, horizon].

    The monitor starts with age 0 at t = 0 (its initial zero value counts as
    knowledge generated at time 0); each delivery resets the age to the
    sample's delay.  Raises if nothing is delivered within the horizon.
    """
    if horizon <= 0:
        raise ParameterError(f"horizon must be positive, got {horizon}")
    if isinstance(packets, RunArtifacts):
        gen = packets.trigger_times
        dlv = packets.delivery_times
    else:
        gen = np.array([p.sample_time for p in packets])
        dlv = np.array([p.delivery_time for p in packets])
        if dlv.size and np.any(np.diff(dlv) <= 0):
            raise ParameterError("packets must be sorted by delivery time (FIFO)")
    inside = dlv <= horizon
    gen, dlv = gen[inside], dlv[inside]
    if gen.size == 0:
        raise ParameterError("no deliveries within the horizon; age undefined")
    starts = np.concatenate([[0.0], dlv])
    ends = np.concatenate([dlv, [horizon]])
    gens = np.concatenate([[0.0], gen])
    area = 0.5 * np.sum((ends - gens) ** 2 - (starts - gens) ** 2)
    return float(area) / horizon


@dataclass(frozen=True)
class DistortionReport:
    """Scored outcome of one simulation run."""

    config: SimConfig
    theta_hat: float          # time average of (source - reconstruction)
    abs_theta_hat: float      # time average of |source - reconstruction|
    mean_delay: float         # mean wait + service over all generated samples
    mean_aoi: float           # NaN when nothing was delivered in the window
    sample_count: int
    backlog: int              # samples generated but undelivered at the horizon
    unstable: bool
    areas: PolygonDecomposition
    delivered_count: int = 0
    notes: dict = field(default_factory=dict)

    @property
    def mean_s_a(self) -> float:
        return float(self.areas.s_a.mean()) if self.areas.s_a.size else math.nan

    @property
    def mean_s_b(self) -> float:
        if self.areas.s_b is None or not self.areas.s_b.size:
            return math.nan
        return float(self.areas.s_b.mean())

    @property
    def mean_s_c(self) -> float:
        return float(self.areas.s_c.mean()) if self.areas.s_c.size else math.nan


def simulate(config: SimConfig) -> DistortionReport:
    """Run the full pipeline once and score it exactly.

    Unstable configurations still return their finite-horizon estimate; the
    report only flags them once the terminal backlog exceeds BACKLOG_LIMIT.
    """
    artifacts = run_pipeline(config)
    horizon = config.horizon
    source = artifacts.path.to_trace()

    if config.interpolation == "off":
        recon = artifacts.reconstruction_trace()
    else:
        from .interpolate import InterpolationPlan, oracle_reconstruction, \
            reconstruct_with_interpolation
        if config.interpolation == "oracle":
            recon = oracle_reconstruction(artifacts.path, artifacts)
        else:
            plan = InterpolationPlan(mode=config.interpolation, seed=config.seed)
            recon = reconstruct_with_interpolation(artifacts, plan)

    theta = integrate_difference(source, recon, horizon) / horizon
    if config.interpolation == "off":
        abs_theta = theta      # reconstruction never exceeds the source
    else:
        abs_theta = integrate_difference(source, recon, horizon, absolute=True) / horizon

    delays = artifacts.waits + artifacts.services
    mean_delay = float(delays.mean()) if delays.size else math.nan
    try:
        aoi = measure_aoi(artifacts, horizon)
    except ParameterError:
        aoi = math.nan
    delivered = int(np.sum(artifacts.delivery_times <= horizon))
    backlog = artifacts.sample_count - delivered
    return DistortionReport(
        config=config,
        theta_hat=theta,
        abs_theta_hat=abs_theta,
        mean_delay=mean_delay,
        mean_aoi=aoi,
        sample_count=artifacts.sample_count,
        backlog=backlog,
        unstable=backlog > BACKLOG_LIMIT,
        areas=decompose_polygons(artifacts),
        delivered_count=delivered,
    )
