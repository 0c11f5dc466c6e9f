"""Closed-form average distortion under the three sampling policies.

Uniform sampling feeds a D/M/1 queue whose delay is governed by the root
sigma of  sigma = exp(-(mu/r)(1 - sigma));  threshold sampling feeds an
Erlang-arrival E_b/M/1 queue governed by the real root z0 > 1 of the
characteristic polynomial  (lam/mu) z^(b+1) - (1 + lam/mu) z^b + 1.
Both roots are found by safeguarded bracketing and verified by residual,
so no special-function library is involved.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InstabilityError, NumericalError, ParameterError

SIGMA_RESIDUAL_TOL = 1e-12
Z0_RESIDUAL_TOL = 1e-10


def _check_rates(lam: float, mu: float) -> None:
    if lam <= 0:
        raise ParameterError(f"lam must be positive, got {lam}")
    if mu <= 0:
        raise ParameterError(f"mu must be positive, got {mu}")


def solve_sigma(r: float, mu: float) -> float:
    """Delay root of the D/M/1 queue with deterministic interarrival 1/r.

    Returns the unique sigma in (0, 1) with sigma = exp(-(mu/r)(1 - sigma)),
    to residual below 1e-12.  Safeguarded Newton with a maintained bracket.
    """
    if r <= 0:
        raise ParameterError(f"r must be positive, got {r}")
    if mu <= 0:
        raise ParameterError(f"mu must be positive, got {mu}")
    if r >= mu:
        raise InstabilityError(f"D/M/1 requires r < mu, got r={r}, mu={mu}")
    c = mu / r

    def g(s: float) -> float:
        return s - math.exp(-c * (1.0 - s))

    lo, hi = 0.0, 1.0 - 1e-14   # g(lo) < 0 < g(hi) whenever r < mu
    s = math.exp(-c)            # g(0) root guess: the no-wait fixed-point seed
    for _ in range(200):
        gs = g(s)
        if gs < 0:
            lo = s
        else:
            hi = s
        dgs = 1.0 - c * math.exp(-c * (1.0 - s))
        step_ok = dgs != 0.0
        if step_ok:
            s_new = s - gs / dgs
            step_ok = lo < s_new < hi
        if not step_ok:
            s_new = 0.5 * (lo + hi)
        if abs(s_new - s) <= 1e-17 + 1e-16 * s:
            s = s_new
            break
        s = s_new
    if abs(g(s)) > SIGMA_RESIDUAL_TOL:
        raise NumericalError(f"sigma solve did not converge: residual {g(s):.3e}")
    return s


def solve_z0(beta: int, lam: float, mu: float) -> float:
    """Real root above one of the E_b/M/1 characteristic polynomial.

    z = 1 is always a root; the root that governs the queue exists iff
    lam < beta * mu and is isolated by bisection on (1, inf).
    """
    if beta < 1 or beta != int(beta):
        raise ParameterError(f"beta must be an integer >= 1, got {beta}")
    _check_rates(lam, mu)
    if lam >= beta * mu:
        raise InstabilityError(
            f"threshold queue requires lam < beta*mu, got lam={lam}, beta={beta}, mu={mu}")
    rho = lam / mu

    # Solve the z^beta-normalized form g(z) = rho z - (1 + rho) + z^(-beta):
    # same roots above one, but g evaluates with O(eps) error for any beta,
    # where the raw polynomial loses eps * z^beta of absolute accuracy.
    def g(z: float) -> float:
        return rho * z - (1.0 + rho) + z ** (-float(beta))

    lo = 1.0 + 1e-12            # g < 0 just above the z = 1 root (g'(1) = rho - beta < 0)
    hi = 2.0
    while g(hi) <= 0.0:
        hi *= 2.0
        if hi > 1e12:
            raise NumericalError("no sign change found for z0 bracket")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if g(mid) <= 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-16 * hi:
            break
    z0 = 0.5 * (lo + hi)
    for _ in range(3):          # Newton polish to rounding level
        dg = rho - beta * z0 ** (-float(beta) - 1.0)
        if dg == 0.0:
            break
        z0 -= g(z0) / dg
    residual = rho * z0 ** (beta + 1) - (1.0 + rho) * z0 ** beta + 1.0
    scale = max(1.0, (1.0 + rho) * z0 ** beta)   # rounding floor of the raw polynomial
    if not z0 > 1.0 or abs(residual) > Z0_RESIDUAL_TOL * scale:
        raise NumericalError(f"z0 solve did not converge: z0={z0}, residual {residual:.3e}")
    return z0


@dataclass(frozen=True)
class DistortionBreakdown:
    """Average distortion split into its sampling / waiting / service parts."""

    total: float
    sampling: float
    waiting: float
    service: float


@dataclass(frozen=True)
class AnalyticModel:
    """Solved queue parameters for one policy at one operating point."""

    lam: float
    mu: float
    policy: str                 # "uniform" | "threshold" | "zero_wait"
    param: float | None = None  # r for uniform, beta for threshold
    sigma: float | None = None
    z0: float | None = None

    @staticmethod
    def uniform(r: float, lam: float, mu: float) -> "AnalyticModel":
        _check_rates(lam, mu)
        return AnalyticModel(lam, mu, "uniform", r, sigma=solve_sigma(r, mu))

    @staticmethod
    def threshold(beta: int, lam: float, mu: float) -> "AnalyticModel":
        _check_rates(lam, mu)
        return AnalyticModel(lam, mu, "threshold", beta, z0=solve_z0(beta, lam, mu))

    @staticmethod
    def zero_wait(lam: float, mu: float) -> "AnalyticModel":
        _check_rates(lam, mu)
        return AnalyticModel(lam, mu, "zero_wait")

    def theta(self) -> DistortionBreakdown:
        if self.policy == "uniform":
            return theta_uniform(self.param, self.lam, self.mu)
        if self.policy == "threshold":
            return theta_threshold(int(self.param), self.lam, self.mu)
        if self.policy == "zero_wait":
            return theta_zero_wait(self.lam, self.mu)
        raise ParameterError(f"unknown policy {self.policy!r}")


def theta_uniform(r: float, lam: float, mu: float) -> DistortionBreakdown:
    """Average distortion of uniform sampling at rate r.

    Terms: lam/(2r) from sampling blindness, lam * E{wait} from queueing,
    lam/mu from transmission.
    """
    _check_rates(lam, mu)
    sigma = solve_sigma(r, mu)
    sampling = lam / (2.0 * r)
    waiting = lam * sigma / (mu * (1.0 - sigma))
    service = lam / mu
    return DistortionBreakdown(sampling + waiting + service, sampling, waiting, service)


def theta_threshold(beta: int, lam: float, mu: float) -> DistortionBreakdown:
    """Average distortion of threshold sampling (one sample per beta events)."""
    z0 = solve_z0(beta, lam, mu)
    sampling = (beta - 1) / 2.0
    waiting = lam / (mu * (z0 ** beta - 1.0))
    service = lam / mu
    return DistortionBreakdown(sampling + waiting + service, sampling, waiting, service)


def theta_zero_wait(lam: float, mu: float) -> DistortionBreakdown:
    """Average distortion of zero-wait sampling: 2 lam / mu, no queueing term."""
    _check_rates(lam, mu)
    half = lam / mu
    return DistortionBreakdown(2.0 * half, half, 0.0, half)


def mean_polygon_areas_uniform(r: float, lam: float, mu: float) -> tuple[float, float, float]:
    """Expected per-interval sub-areas (sampling, waiting, service) under uniform
    sampling.  Their sum times r equals theta_uniform(r).total."""
    bd = theta_uniform(r, lam, mu)
    return (bd.sampling / r, bd.waiting / r, bd.service / r)


def mean_polygon_areas_threshold(beta: int, lam: float, mu: float) -> tuple[float, float, float]:
    """Expected per-polygon sub-areas under threshold sampling (rate lam/beta)."""
    bd = theta_threshold(beta, lam, mu)
    per = beta / lam
    return (bd.sampling * per, bd.waiting * per, bd.service * per)


def mean_polygon_areas_zero_wait(lam: float, mu: float) -> tuple[float, float]:
    """Expected per-polygon (sampling, service) areas under zero-wait sampling."""
    _check_rates(lam, mu)
    return (lam / mu ** 2, lam / mu ** 2)


@dataclass(frozen=True)
class DelayDistribution:
    """Steady-state D/M/1 delay (wait + transmission) of a delivered sample.

    The true delay is exponential with rate mu*(1 - sigma); `pdf` is that
    density.  `positive_wait_pdf` is sigma * pdf: the literal kernel used in
    the published bound series.  It integrates to sigma, not to one, because
    it is really the density of the waiting time restricted to the event
    "the sample had to wait" (mass sigma); see `lower_bound_theta`.
    """

    sigma: float
    mu: float

    @property
    def rate(self) -> float:
        return self.mu * (1.0 - self.sigma)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x >= 0, self.rate * np.exp(-self.rate * x), 0.0)

    def positive_wait_pdf(self, x):
        return self.sigma * self.pdf(x)

    def survival(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x >= 0, np.exp(-self.rate * x), 1.0)


@dataclass(frozen=True)
class ErlangChainSolution:
    """Steady-state of the threshold-sampling queue as seen by new samples.

    The queue length found by an arriving sample is geometric over blocks of
    size beta: pmf(k) = z0^(-k*beta) * (1 - z0^(-beta)).
    """

    beta: int
    lam: float
    mu: float
    z0: float

    @property
    def mean_queue(self) -> float:
        return 1.0 / (self.z0 ** self.beta - 1.0)

    @property
    def mean_wait(self) -> float:
        return self.mean_queue / self.mu

    def pmf(self, k) -> np.ndarray:
        k = np.asarray(k)
        q = self.z0 ** (-float(self.beta))
        return np.where(k >= 0, q ** k * (1.0 - q), 0.0)


def erlang_chain(beta: int, lam: float, mu: float) -> ErlangChainSolution:
    """Solve the threshold-sampling queue for the sample-observed state law."""
    return ErlangChainSolution(beta, lam, mu, solve_z0(beta, lam, mu))


def solve_chain_truncated(beta: int, lam: float, mu: float, k_max: int = 200) -> float:
    """Mean queue length observed by arriving samples, from the raw joint chain.

    Independent cross-check for `erlang_chain`: builds the generator of the
    joint (queue length, events since last sample) process on k <= k_max,
    solves the balance equations directly, and averages the queue length over
    the states a freshly generated sample finds.  Sample generation departs
    from phase beta - 1, so the observed law is that phase slice, renormalized.
    """
    if k_max < 5:
        raise ParameterError(f"k_max must be >= 5, got {k_max}")
    if beta < 1 or beta != int(beta):
        raise ParameterError(f"beta must be an integer >= 1, got {beta}")
    _check_rates(lam, mu)
    if lam >= beta * mu:
        raise InstabilityError("truncated chain solve requires a stable configuration")
    n = (k_max + 1) * beta

    def idx(k: int, b: int) -> int:
        return k * beta + b

    gen = np.zeros((n, n))
    for k in range(k_max + 1):
        for b in range(beta):
            i = idx(k, b)
            if b < beta - 1:
                gen[i, idx(k, b + 1)] += lam        # another source event
            elif k < k_max:
                gen[i, idx(k + 1, 0)] += lam        # beta-th event: sample enqueued
            if k >= 1:
                gen[i, idx(k - 1, b)] += mu         # service completion
    np.fill_diagonal(gen, gen.diagonal() - gen.sum(axis=1))
    system = np.vstack([gen.T, np.ones(n)])
    rhs = np.zeros(n + 1)
    rhs[-1] = 1.0
    pi, *_ = np.linalg.lstsq(system, rhs, rcond=None)
    pi = pi.reshape(k_max + 1, beta)
    observed = pi[:, beta - 1]
    observed = observed / observed.sum()
    return float(np.arange(k_max + 1) @ observed)


def overflow_probability(k_bits: int, lam: float, d: float) -> float:
    """Probability one fixed-width sample cannot encode the events of a window.

    A k-bit payload represents counts 0..2^k - 1; overflow means the window
    count strictly exceeds that range.
    """
    if k_bits < 0:
        raise ParameterError(f"k_bits must be >= 0, got {k_bits}")
    if lam <= 0 or d <= 0:
        raise ParameterError("lam and d must be positive")
    m_max = 2 ** k_bits - 1
    mean = lam * d
    # 1 - CDF(m_max) accumulated in pmf terms (stable for the sizes used here)
    term = math.exp(-mean)
    cdf = term
    for n in range(1, m_max + 1):
        term *= mean / n
        cdf += term
    return max(0.0, 1.0 - cdf)


# ---------------------------------------------------------------------------
# Interpolation lower bound
# ---------------------------------------------------------------------------

def _poisson_pmf_table(mean: float, n_max: int) -> np.ndarray:
    out = np.empty(n_max + 1)
    out[0] = math.exp(-mean)
    for n in range(n_max):
        out[n + 1] = out[n] * mean / (n + 1)
    return out


def _adaptive_simpson(f, a: float, b: float, tol: float) -> float:
    """Adaptive Simpson quadrature with absolute tolerance `tol` on [a, b]."""

    def node(a, fa, m, fm, b, fb, whole, tol, depth):
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        flm, frm = f(lm), f(rm)
        left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
        right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
        err = left + right - whole
        if depth >= 48 or abs(err) <= 15.0 * tol:
            return left + right + err / 15.0
        return (node(a, fa, lm, flm, m, fm, left, 0.5 * tol, depth + 1)
                + node(m, fm, rm, frm, b, fb, right, 0.5 * tol, depth + 1))

    m = 0.5 * (a + b)
    fa, fm, fb = f(a), f(m), f(b)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    return node(a, fa, m, fm, b, fb, whole, tol, 0)


def _truncated_poisson_mean(mean: float, n: int) -> float:
    """E{K; K <= n} for K ~ Poisson(mean), i.e. mean * P(K <= n - 1)."""
    term = math.exp(-mean)
    cdf = term
    for j in range(1, n):
        term *= mean / j
        cdf += term
    return mean * cdf


def lower_bound_theta(r: float, lam: float, mu: float, n_max: int = 2000,
                      tol: float = 1e-9, variant: str = "exact") -> float:
    """Least average distortion achievable by any guessing-based reconstruction
    under uniform sampling at rate r.

    The bound is a series over the window event count n.  Each term splits by
    whether the previous delivery lands after the next sampling instant
    (closed-form inner integral) or before it (adaptive Simpson on [0, d]).
    Truncation stops once the Poisson tail weight drops below tol times the
    partial sum.

    variant="exact" (default) scores the ideal catch-up strategy exactly: the
    delivery delay is the true exponential D/M/1 sojourn and the events
    revealed early in a window of length x follow the conditional thinning
    law, mean n*x/d.  This is the value the oracle reconstruction measures in
    simulation.

    variant="paper" reproduces the published series verbatim: the delay
    kernel carries an extra factor sigma (it integrates to sigma, not one)
    and the early-event count is approximated by a Poisson mean truncated at
    n.  It is kept for comparison and for the flattened-series cross-check;
    it undershoots the achievable distortion by roughly that sigma factor.
    """
    if variant not in ("exact", "paper"):
        raise ParameterError(f"unknown variant {variant!r}")
    if n_max < 1:
        raise ParameterError(f"n_max must be >= 1, got {n_max}")
    _check_rates(lam, mu)
    sigma = solve_sigma(r, mu)          # raises InstabilityError for r >= mu
    d = 1.0 / r
    a = mu * (1.0 - sigma)
    scale = sigma if variant == "paper" else 1.0
    mean_n = lam * d

    # Late-delivery inner integral: int_d^inf (x - d/2) kernel(x) dx.
    late_inner = scale * math.exp(-a * d) * (0.5 * d + 1.0 / a)

    pmf = math.exp(-mean_n)             # P(N(d) = 0)
    cdf = pmf
    s1 = 0.0
    s2 = 0.0
    for n in range(1, n_max + 1):
        pmf *= mean_n / n
        cdf += pmf
        if pmf > 0.0:
            s1 += n * pmf * late_inner

            if variant == "exact":
                def integrand(x, n=n):
                    return 0.5 * x * (n * x / d) * scale * a * math.exp(-a * x)
            else:
                def integrand(x, n=n):
                    return (0.5 * x * _truncated_poisson_mean(lam * x, n)
                            * scale * a * math.exp(-a * x))

            s2 += pmf * _adaptive_simpson(integrand, 0.0, d, 1e-10)
        tail = 1.0 - cdf
        partial = r * (s1 + s2)
        if tail <= tol * max(partial, 1e-300) and n >= mean_n:
            return partial
    raise NumericalError(
        f"lower bound series not converged after n_max={n_max} terms (tail={1.0 - cdf:.3e})")


def lower_bound_theta_flattened(r: float, lam: float, mu: float, n_max: int = 2000,
                                tol: float = 1e-9, truncate_inner: bool = True) -> float:
    """Flattened single-series evaluation of the published bound (cross-check).

    Algebraically expands the two-part bound into one series with the kernel
    constants pulled out front, evaluating the early-delivery part by one
    quadrature of the summed integrand per term.  With truncate_inner=True
    the inner event sum stops at n and the value must agree with
    lower_bound_theta(..., variant="paper") to rounding; with
    truncate_inner=False the inner sum runs to infinity exactly as printed in
    the flattened published expression, which changes the value.
    """
    if n_max < 1:
        raise ParameterError(f"n_max must be >= 1, got {n_max}")
    _check_rates(lam, mu)
    sigma = solve_sigma(r, mu)
    d = 1.0 / r
    a = mu * (1.0 - sigma)
    mean_n = lam * d
    prefactor = r * sigma * a           # r * sigma * mu * (1 - sigma)

    late = math.exp(-a * d) * (0.5 * d + 1.0 / a) / a   # int_d^inf (x-d/2) e^{-a x} dx

    def early(n: int) -> float:
        # int_0^d x e^{-(lam + a) x} sum_{m=1}^{n or inf} (lam x)^m / (m-1)! dx
        if truncate_inner:
            def inner_sum(x):
                if x == 0.0:
                    return 0.0
                term = lam * x
                total = term
                for m in range(2, n + 1):
                    term *= lam * x / (m - 1)
                    total += term
                return total
        else:
            def inner_sum(x):
                return lam * x * math.exp(lam * x)

        def integrand(x):
            return x * math.exp(-(lam + a) * x) * inner_sum(x)

        return _adaptive_simpson(integrand, 0.0, d, 1e-12)

    weight = math.exp(-mean_n)          # e^{-lam d}; series weights lam^n/(n! r^n) fold in
    pmf = weight
    cdf = pmf
    total = 0.0
    for n in range(1, n_max + 1):
        pmf *= mean_n / n
        cdf += pmf
        if pmf > 0.0:
            total += pmf * (n * late + 0.5 * early(n))
        tail = 1.0 - cdf
        value = prefactor * total
        if tail <= tol * max(value, 1e-300) and n >= mean_n:
            return value
    raise NumericalError(
        f"flattened bound series not converged after n_max={n_max} terms")
