"""Monitor-side reconstruction enhancements.

When a delivery raises the monitor's value by more than one, the omitted
events can be guessed: unit steps are inserted between the two delivery
instants.  `reconstruct_with_interpolation` implements the random-insertion
schemes; `oracle_reconstruction` rebuilds the best possible interpolated
trace using the true source path (test/benchmark use only) and so realizes
the theoretical floor computed by `analytic.lower_bound_theta`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ParameterError
from .simulate import RunArtifacts, SamplePacket
from .stochastic import STREAM_INTERPOLATION, ProcessPath, StepTrace, stream_rng

MODES = ("off", "single_point", "uniform_J", "oracle")


@dataclass(frozen=True)
class InterpolationPlan:
    """How to fill in the gaps between deliveries.

    single_point: one guessed unit step per qualifying delivery.
    uniform_J: one unit step per omitted event, at sorted uniform instants.
    Guessing draws are keyed by (seed, packet index), so turning guessing on
    never perturbs the underlying run and paired comparisons stay paired.
    """

    mode: str
    seed: int = 0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ParameterError(f"mode must be one of {MODES}, got {self.mode!r}")


def _delivery_view(packets: "Sequence[SamplePacket] | RunArtifacts"
                   ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(sample_times, delivery_times, sampled_values) in FIFO order."""
    if isinstance(packets, RunArtifacts):
        return (packets.trigger_times, packets.delivery_times,
                packets.sampled_values.astype(np.int64))
    sample_times = np.array([p.sample_time for p in packets], dtype=float)
    deliveries = np.array([p.delivery_time for p in packets], dtype=float)
    values = np.array([p.sampled_value for p in packets], dtype=np.int64)
    if deliveries.size and np.any(np.diff(deliveries) <= 0):
        raise ParameterError("packets out of order: delivery times must increase (FIFO)")
    return sample_times, deliveries, values


def reconstruct_with_interpolation(packets: "Sequence[SamplePacket] | RunArtifacts",
                                   plan: InterpolationPlan) -> StepTrace:
    """Reconstruction trace with guessed unit steps between deliveries.

    For delivery i the number of omitted events is J = value_i - value_{i-1} - 1.
    With J > 0, uniform_J inserts J steps at sorted uniform draws inside the
    open delivery interval, reaching value_{i-1} + j at the j-th draw;
    single_point inserts a single +1 step at one uniform draw.
    """
    if plan.mode == "oracle":
        raise ParameterError("oracle mode needs the source path; "
                             "use oracle_reconstruction")
    _, deliveries, values = _delivery_view(packets)
    base_times = [deliveries]
    base_values = [values.astype(float)]
    if plan.mode != "off":
        prev_dlv = np.concatenate([[0.0], deliveries[:-1]])
        prev_val = np.concatenate([[0], values[:-1]])
        jumps = values - prev_val
        for i in np.flatnonzero(jumps >= 2):
            j_count = int(jumps[i]) - 1
            rng = stream_rng(plan.seed, STREAM_INTERPOLATION, i + 1)
            if plan.mode == "uniform_J":
                draws = np.sort(rng.uniform(prev_dlv[i], deliveries[i], j_count))
                levels = prev_val[i] + np.arange(1, j_count + 1, dtype=float)
            else:  # single_point
                draws = rng.uniform(prev_dlv[i], deliveries[i], 1)
                levels = np.array([prev_val[i] + 1.0])
            base_times.append(draws)
            base_values.append(levels)
    return StepTrace.from_steps(np.concatenate(base_times),
                                np.concatenate(base_values))


def oracle_reconstruction(path: ProcessPath,
                          packets: "Sequence[SamplePacket] | RunArtifacts") -> StepTrace:
    """Best achievable interpolated reconstruction, built from the true path.

    Between consecutive deliveries the trace is rewritten optimally subject
    to starting at the previous delivered value and ending at the next one:
    if the previous delivery already postdates the next sampling instant,
    jump to the incoming value immediately; otherwise reveal everything that
    has already happened, then follow the source exactly until the sampling
    instant and hold.  The result never exceeds the source process.
    """
    sample_times, deliveries, values = _delivery_view(packets)
    if deliveries.size == 0:
        return StepTrace.from_steps(np.empty(0), np.empty(0))
    events = path.arrival_times
    prev_dlv = np.concatenate([[0.0], deliveries[:-1]])

    case1 = prev_dlv >= sample_times
    case2 = ~case1

    # Known-count reveal at each case-2 boundary, then exact tracking of every
    # event inside (prev delivery, sampling instant].
    lo = np.searchsorted(events, prev_dlv[case2], side="right")
    hi = np.searchsorted(events, sample_times[case2], side="right")
    lengths = hi - lo
    span_starts = np.cumsum(lengths) - lengths
    flat = (np.repeat(lo, lengths)
            + np.arange(int(lengths.sum())) - np.repeat(span_starts, lengths))
    tracked_times = events[flat]
    tracked_levels = flat.astype(float) + 1.0

    pieces_t = [deliveries,                 # base: delivered values
                prev_dlv[case1],            # immediate jump to the incoming value
                prev_dlv[case2],            # reveal of everything already seen
                tracked_times]
    pieces_v = [values.astype(float),
                values[case1].astype(float),
                lo.astype(float),
                tracked_levels]
    times = np.concatenate(pieces_t)
    levels = np.concatenate(pieces_v)
    keep = times > 0  # the t = 0 boundary reveal is always the initial value 0
    return StepTrace.from_steps(times[keep], levels[keep])
