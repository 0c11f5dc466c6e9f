"""Seeded generation of Poisson event streams and exact step-function algebra.

Everything here is deterministic given (inputs, seed).  Random streams are
derived from a root seed plus a stream path, so the arrival stream, the
service stream, and any per-packet guessing streams never share state and a
replication can be replayed piecewise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError

# Stream identifiers under one root seed.  Keeping them fixed means a run's
# arrival process does not change when a downstream consumer draws more (or
# fewer) service times or guessing points.
STREAM_ARRIVALS = 0
STREAM_SERVICES = 1
STREAM_INTERPOLATION = 2


def stream_rng(seed: int, *path: int) -> np.random.Generator:
    """Independent generator for stream `path` under root `seed`."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=path))


def exponential_draws(rng: np.random.Generator, rate: float, size: int) -> np.ndarray:
    """Exponential(rate) variates via inverse CDF on uniform draws."""
    if rate <= 0:
        raise ParameterError(f"rate must be positive, got {rate}")
    return -np.log1p(-rng.random(size)) / rate


@dataclass(frozen=True)
class ServiceModel:
    """Memoryless transmission server with mean service time 1/rate_mu."""

    rate_mu: float

    def __post_init__(self):
        if self.rate_mu <= 0:
            raise ParameterError(f"rate_mu must be positive, got {self.rate_mu}")

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return exponential_draws(rng, self.rate_mu, size)


@dataclass(frozen=True)
class ProcessPath:
    """One realization of the source counting process on [0, horizon].

    `arrival_times` holds the event instants, strictly increasing, all in
    (0, horizon].  The value of the process at time t is the number of
    arrivals <= t (right-continuous, events count at their own instant).
    """

    rate_lambda: float
    horizon: float
    arrival_times: np.ndarray

    def __post_init__(self):
        if self.rate_lambda <= 0:
            raise ParameterError(f"rate_lambda must be positive, got {self.rate_lambda}")
        if self.horizon < 0:
            raise ParameterError(f"horizon must be non-negative, got {self.horizon}")
        times = np.asarray(self.arrival_times, dtype=float)
        if times.ndim != 1:
            raise ParameterError("arrival_times must be one-dimensional")
        if times.size:
            if np.any(np.diff(times) <= 0):
                raise ParameterError("arrival_times must be strictly increasing")
            if times[0] <= 0 or times[-1] > self.horizon:
                raise ParameterError("arrival_times must lie in (0, horizon]")
        times.setflags(write=False)
        object.__setattr__(self, "arrival_times", times)

    def __len__(self) -> int:
        return self.arrival_times.size

    def count_at(self, t) -> np.ndarray | int:
        """Process value N(t); an event at exactly t is included."""
        counts = np.searchsorted(self.arrival_times, t, side="right")
        return counts if np.ndim(t) else int(counts)

    def interarrival_gaps(self) -> np.ndarray:
        """The generative exponential gaps, recovered exactly from the times."""
        return np.diff(self.arrival_times, prepend=0.0)

    def to_trace(self) -> "StepTrace":
        return StepTrace.from_event_times(self.arrival_times)


def generate_poisson_path(lam: float, horizon: float, seed: int) -> ProcessPath:
    """Generate a Poisson(lam) path on [0, horizon] from the arrival stream of `seed`.

    A zero horizon yields an empty path.  Identical (lam, horizon, seed)
    always reproduce the identical path.
    """
    if lam <= 0:
        raise ParameterError(f"lam must be positive, got {lam}")
    if horizon < 0:
        raise ParameterError(f"horizon must be non-negative, got {horizon}")
    rng = stream_rng(seed, STREAM_ARRIVALS)
    if horizon == 0:
        return ProcessPath(lam, horizon, np.empty(0))
    chunks = []
    total = 0.0
    mean_n = lam * horizon
    size = int(mean_n + 6.0 * np.sqrt(mean_n) + 16.0)
    while total <= horizon:
        gaps = exponential_draws(rng, lam, size)
        chunks.append(gaps)
        total += float(gaps.sum())
        size = max(size // 4, 64)
    times = np.cumsum(np.concatenate(chunks))
    times = times[times <= horizon]
    return ProcessPath(lam, horizon, times)


class StepTrace:
    """A right-continuous piecewise-constant function on [0, inf).

    The function equals `initial` on [0, times[0]) and `values[i]` on
    [times[i], times[i+1]).  Breakpoint times are strictly increasing and
    positive; construction collapses duplicate times (last value wins) and
    drops no-op breakpoints.  Instances are immutable.
    """

    __slots__ = ("times", "values", "initial")

    def __init__(self, times, values, initial: float = 0.0):
        times = np.asarray(times, dtype=float)
        values = np.asarray(values, dtype=float)
        if times.shape != values.shape or times.ndim != 1:
            raise ParameterError("times and values must be 1-d arrays of equal length")
        if times.size:
            if np.any(times <= 0):
                raise ParameterError("breakpoint times must be positive")
            if np.any(np.diff(times) <= 0):
                raise ParameterError("breakpoint times must be strictly increasing")
        times.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "initial", float(initial))

    def __setattr__(self, name, value):
        raise AttributeError("StepTrace is immutable")

    @staticmethod
    def from_steps(times, values, initial: float = 0.0) -> "StepTrace":
        """Build a trace from possibly duplicated breakpoints (last value wins)."""
        times = np.asarray(times, dtype=float)
        values = np.asarray(values, dtype=float)
        order = np.argsort(times, kind="stable")
        times, values = times[order], values[order]
        if times.size:
            last = np.r_[times[1:] != times[:-1], True]  # keep final entry per time
            times, values = times[last], values[last]
            keep = np.r_[values[0] != initial, np.diff(values) != 0]
            times, values = times[keep], values[keep]
        return StepTrace(times, values, initial)

    @staticmethod
    def from_event_times(times) -> "StepTrace":
        """Unit-step counting trace: value n from the n-th event time onward."""
        times = np.asarray(times, dtype=float)
        return StepTrace(times, np.arange(1, times.size + 1, dtype=float))

    def __len__(self) -> int:
        return self.times.size

    def value_at(self, t) -> np.ndarray | float:
        """Trace value at time t (right-continuous)."""
        idx = np.searchsorted(self.times, t, side="right")
        padded = np.concatenate([[self.initial], self.values])
        out = padded[idx]
        return out if np.ndim(t) else float(out)

    __call__ = value_at


def integrate_difference(a: StepTrace, b: StepTrace, horizon: float,
                         absolute: bool = False) -> float:
    """Exact integral of (a - b), or |a - b|, over [0, horizon].

    Computed by merging breakpoints; never by time discretization.
    Breakpoints beyond the horizon are trimmed, never extrapolated.
    """
    if horizon < 0:
        raise ParameterError(f"horizon must be non-negative, got {horizon}")
    times = np.concatenate([a.times, b.times])
    deltas = np.concatenate([np.diff(a.values, prepend=a.initial),
                             -np.diff(b.values, prepend=b.initial)])
    order = np.argsort(times, kind="stable")
    times, deltas = times[order], deltas[order]
    inside = times < horizon
    times, deltas = times[inside], deltas[inside]
    levels = (a.initial - b.initial) + np.cumsum(deltas)
    widths = np.diff(times, append=horizon)
    head = times[0] if times.size else horizon
    if absolute:
        return abs(a.initial - b.initial) * head + float(np.abs(levels) @ widths)
    return (a.initial - b.initial) * head + float(levels @ widths)


def order_statistics_oracle(n: int, d: float, trials: int, seed: int) -> float:
    """Monte-Carlo mean of the summed event times of a Poisson path on (0, d),
    conditioned on exactly n events in the window.

    Conditioning is by rejection on genuinely exponential-gap paths (the
    window rate is immaterial for the conditional law; n/d maximizes the
    acceptance rate).  Estimates n*d/2.
    """
    if n < 1:
        raise ParameterError(f"n must be >= 1, got {n}")
    if d <= 0:
        raise ParameterError(f"d must be positive, got {d}")
    if trials < 1:
        raise ParameterError(f"trials must be >= 1, got {trials}")
    rng = stream_rng(seed, STREAM_ARRIVALS)
    rate = n / d
    accepted = 0
    total = 0.0
    while accepted < trials:
        batch = max(1024, int(1.5 * (trials - accepted) / 0.15))
        batch = min(batch, max(1024, 4_000_000 // (n + 1)))  # bound memory per batch
        gaps = exponential_draws(rng, rate, batch * (n + 1)).reshape(batch, n + 1)
        arrivals = np.cumsum(gaps, axis=1)
        ok = (arrivals[:, n - 1] <= d) & (arrivals[:, n] > d)
        sums = arrivals[ok, :n].sum(axis=1)
        if accepted + sums.size > trials:
            sums = sums[: trials - accepted]
        accepted += sums.size
        total += float(sums.sum())
    return total / trials
