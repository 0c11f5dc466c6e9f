"""Distortion-minimizing sampling parameters.

The uniform-rate objective has no explicit derivative (the queue root enters
transcendentally), so the rate search is derivative-free: a coarse grid scan
picks a bracketing triple, golden-section refines it.  The threshold search
is exhaustive over the stable integers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .analytic import theta_threshold, theta_uniform
from .errors import InstabilityError, NumericalError, ParameterError

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
GRID_POINTS = 64


@dataclass(frozen=True)
class RateOptimum:
    r_star: float
    theta_star: float
    grid_unimodal: bool     # False if the scan saw multiple local minima


@dataclass(frozen=True)
class ThresholdOptimum:
    beta_star: int
    theta_star: float
    beta_min: int           # smallest stable threshold that was searched


def optimal_rate(lam: float, mu: float, bracket: tuple[float, float] | None = None,
                 tol: float = 1e-4) -> RateOptimum:
    """Sampling rate minimizing the uniform-policy average distortion.

    Scans GRID_POINTS rates across the bracket to locate the bracketing
    triple (guarding against non-unimodality), then golden-section refines
    to within tol in the rate.  The bracket is trimmed away from the
    instability boundary at mu.
    """
    if lam <= 0 or mu <= 0:
        raise ParameterError("lam and mu must be positive")
    if tol <= 0:
        raise ParameterError(f"tol must be positive, got {tol}")
    lo, hi = bracket if bracket is not None else (mu * 1e-3, mu)
    lo = max(lo, mu * 1e-9)
    hi = min(hi, mu - 1e-6)
    if not lo < hi:
        raise ParameterError(f"empty bracket after trimming: ({lo}, {hi})")

    def f(r: float) -> float:
        value = theta_uniform(r, lam, mu).total
        if not math.isfinite(value):
            raise NumericalError(f"distortion not finite at r={r}")
        return value

    grid = np.linspace(lo, hi, GRID_POINTS)
    values = np.array([f(r) for r in grid])
    signs = np.sign(np.diff(values))
    signs = signs[signs != 0]
    unimodal = int(np.sum(np.diff(signs) != 0)) <= 1
    k = int(np.argmin(values))
    a = grid[max(k - 1, 0)]
    b = grid[min(k + 1, GRID_POINTS - 1)]

    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    r_star = 0.5 * (a + b)
    return RateOptimum(r_star, f(r_star), unimodal)


def optimal_threshold(lam: float, mu: float, beta_max: int) -> ThresholdOptimum:
    """Integer threshold minimizing the threshold-policy average distortion.

    Exhaustive over the stable thresholds up to beta_max; ties break toward
    the smaller threshold.
    """
    if lam <= 0 or mu <= 0:
        raise ParameterError("lam and mu must be positive")
    if beta_max < 1:
        raise ParameterError(f"beta_max must be >= 1, got {beta_max}")
    beta_min = int(math.floor(lam / mu)) + 1  # lam == k*mu is itself unstable at beta=k
    if beta_min > beta_max:
        raise InstabilityError(
            f"no stable threshold <= {beta_max} for lam={lam}, mu={mu} "
            f"(need beta > lam/mu = {lam / mu})")
    best_beta = beta_min
    best_theta = theta_threshold(beta_min, lam, mu).total
    for beta in range(beta_min + 1, beta_max + 1):
        value = theta_threshold(beta, lam, mu).total
        if value < best_theta:
            best_beta, best_theta = beta, value
    return ThresholdOptimum(best_beta, best_theta, beta_min)
