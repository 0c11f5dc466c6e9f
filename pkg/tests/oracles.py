"""Independent reference implementations used only to check the package.

Everything here deliberately avoids the code paths it verifies: integrals by
dense Riemann sums, queues by per-packet replay, roots by plain bisection,
and expectations by closed forms derived separately.
"""

from __future__ import annotations

import math

import numpy as np


def riemann_integral_difference(a, b, horizon: float, dt: float = 1e-4) -> float:
    """Dense left-endpoint Riemann sum of (a - b) over [0, horizon]."""
    grid = np.arange(0.0, horizon, dt)
    return float(np.sum(a.value_at(grid) - b.value_at(grid)) * dt)


def lindley_replay(triggers: np.ndarray, services: np.ndarray) -> np.ndarray:
    """Per-packet FIFO wait replay: each sample waits for the previous
    departure if it arrives before it."""
    waits = np.zeros(len(triggers))
    prev_departure = -math.inf
    for i, (t, v) in enumerate(zip(triggers, services)):
        waits[i] = max(0.0, prev_departure - t)
        prev_departure = t + waits[i] + v
    return waits


def bisect_sigma(r: float, mu: float, iters: int = 200) -> float:
    """Plain bisection for the D/M/1 root on g(s) = s - exp(-(mu/r)(1-s))."""
    lo, hi = 0.0, 1.0 - 1e-14

    def g(s):
        return s - math.exp(-(mu / r) * (1.0 - s))

    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if g(mid) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def exact_interpolation_floor(r: float, lam: float, mu: float, sigma: float) -> float:
    """Closed form of the ideal-guessing distortion floor under uniform sampling.

    Derived directly: with delay density h(x) = a e^(-a x), a = mu (1 - sigma),
    window d = 1/r, events mean lam d, and conditional event positions uniform,
    the per-window residual is n (x - d/2) when x >= d and n x^2 / (2 d) when
    x < d; taking expectations and multiplying by the window rate r gives

        lam * [ e^(-a d) (d/2 + 1/a) + (2/a^2 - e^(-a d)(d^2 + 2d/a + 2/a^2)) / (2 d) ].
    """
    d = 1.0 / r
    a = mu * (1.0 - sigma)
    ead = math.exp(-a * d)
    late = ead * (0.5 * d + 1.0 / a)
    early = (2.0 / a ** 2 - ead * (d * d + 2.0 * d / a + 2.0 / a ** 2)) / (2.0 * d)
    return lam * (late + early)


def mean_age_periodic(delay: float, period: float) -> float:
    """Sawtooth mean for periodic deliveries with constant delay."""
    return delay + period / 2.0


def solve_balance_equations(beta: int, lam: float, mu: float, k_max: int
                            ) -> np.ndarray:
    """Stationary law of the joint (queue, phase) process, truncated at k_max.

    Returns the (k_max + 1, beta) matrix of state probabilities.  Written as
    an explicit global-balance system, independently of the package's
    generator-based construction.
    """
    n = (k_max + 1) * beta
    idx = lambda k, b: k * beta + b
    A = np.zeros((n, n))
    for k in range(k_max + 1):
        for b in range(beta):
            i = idx(k, b)
            out_rate = lam if (b < beta - 1 or k < k_max) else 0.0
            if k >= 1:
                out_rate += mu
            A[i, i] -= out_rate
            # inflows written from the perspective of state (k, b)
            if b >= 1:
                A[i, idx(k, b - 1)] += lam
            elif k >= 1:
                A[i, idx(k - 1, beta - 1)] += lam
            if k + 1 <= k_max:
                A[i, idx(k + 1, b)] += mu
    A[-1, :] = 1.0  # replace one redundant equation with normalization
    rhs = np.zeros(n)
    rhs[-1] = 1.0
    pi = np.linalg.solve(A, rhs)
    return pi.reshape(k_max + 1, beta)


def observed_queue_mean(beta: int, lam: float, mu: float, k_max: int = 200) -> float:
    """Mean queue length found by arriving samples, from the balance equations.

    A sample is generated on the transition out of phase beta - 1, so the
    arrival-observed law is that phase slice renormalized (all such
    transitions carry the same rate).
    """
    pi = solve_balance_equations(beta, lam, mu, k_max)
    slice_ = pi[:, beta - 1]
    slice_ = slice_ / slice_.sum()
    return float(np.arange(k_max + 1) @ slice_)
