"""Sim-versus-theory reconciliation battery behind the `validate` CLI command.

Each check pairs a simulated quantity with its closed-form counterpart (or
two independent evaluation routes of the same quantity) at a pinned seed and
tolerance, so a pass means the analytics and the event engine agree.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .analytic import (
    erlang_chain,
    lower_bound_theta,
    solve_chain_truncated,
    solve_sigma,
    solve_z0,
    theta_threshold,
    theta_uniform,
    theta_zero_wait,
)
from .optimize import optimal_rate, optimal_threshold
from .simulate import SimConfig, decompose_polygons, run_pipeline, simulate

BASE_SEED = 20260810


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _mean_theta(policy: str, lam: float, mu: float, horizon: float, reps: int,
                seed0: int, rate: float | None = None, beta: int | None = None) -> float:
    vals = []
    for j in range(reps):
        cfg = SimConfig(lam=lam, mu=mu, policy=policy, horizon=horizon,
                        rate=rate, beta=beta, seed=seed0 + j)
        vals.append(simulate(cfg).theta_hat)
    return float(np.mean(vals))


def check_uniform_grid(fast: bool) -> CheckResult:
    """Uniform-policy distortion: simulation within 3% of theory on the r grid."""
    horizon = 2e4 if fast else 1e5
    reps = 3 if fast else 5
    worst = 0.0
    worst_r = None
    for i, r in enumerate(np.arange(1, 10) / 10.0):
        theory = theta_uniform(r, 0.9, 1.0).total
        est = _mean_theta("uniform", 0.9, 1.0, horizon, reps,
                          BASE_SEED + 100 * i, rate=r)
        rel = abs(est - theory) / theory
        if rel > worst:
            worst, worst_r = rel, r
    return CheckResult("uniform grid vs closed form (3%)", worst < 0.03,
                       f"worst rel err {worst:.2%} at r={worst_r}")


def check_mm1_reduction() -> CheckResult:
    """Threshold formula at beta=1 equals the memoryless single-server form."""
    worst = 0.0
    for lam in (0.1, 0.3, 0.5, 0.7, 0.9):
        for mu in (1.0, 1.5, 2.0, 3.0, 5.0):
            got = theta_threshold(1, lam, mu).total
            want = lam * (lam / (mu * (mu - lam)) + 1.0 / mu)
            worst = max(worst, abs(got - want))
    return CheckResult("beta=1 reduces to M/M/1 closed form (1e-10)", worst < 1e-10,
                       f"worst abs err {worst:.2e}")


def check_zero_wait(fast: bool) -> CheckResult:
    """Zero-wait distortion lands within 2% of its constant."""
    horizon = 1e5 if fast else 1e6
    est = _mean_theta("zero_wait", 0.9, 1.0, horizon, 1, BASE_SEED + 7)
    want = theta_zero_wait(0.9, 1.0).total
    rel = abs(est - want) / want
    return CheckResult("zero-wait vs constant (2%)", rel < 0.02,
                       f"sim {est:.4f} vs {want:.4f} ({rel:.2%})")


def check_root_residuals() -> CheckResult:
    """Queue-root residuals below 1e-10 on a 100-point stable grid."""
    worst = 0.0
    for r in np.linspace(0.02, 0.98, 50):
        s = solve_sigma(r, 1.0)
        worst = max(worst, abs(s - math.exp(-(1.0 / r) * (1.0 - s))))
        if not 0.0 <= s < 1.0:
            return CheckResult("root residuals (1e-10)", False, f"sigma out of range at r={r}")
    for beta, load in [(1, 0.3), (2, 0.5), (3, 0.6), (4, 0.7), (5, 0.8),
                       (2, 0.9), (3, 0.9), (6, 0.9), (8, 0.95), (10, 0.99)]:
        for mu in (0.5, 1.0, 2.0, 4.0, 8.0):
            lam = load * beta * mu
            z0 = solve_z0(beta, lam, mu)
            rho = lam / mu
            worst = max(worst, abs(rho * z0 ** (beta + 1) - (1 + rho) * z0 ** beta + 1))
            if not z0 > 1.0:
                return CheckResult("root residuals (1e-10)", False, f"z0 <= 1 at beta={beta}")
    return CheckResult("root residuals (1e-10)", worst < 1e-10, f"worst {worst:.2e}")


def check_optimal_rate() -> CheckResult:
    """Rate optimum for the reference operating point sits in [0.47, 0.57]."""
    opt = optimal_rate(0.9, 1.0)
    ok = 0.47 <= opt.r_star <= 0.57 and opt.grid_unimodal
    return CheckResult("optimal uniform rate near 0.52", ok,
                       f"r*={opt.r_star:.4f}, theta*={opt.theta_star:.4f}")


def check_optimal_thresholds() -> CheckResult:
    """Exhaustive threshold optima reproduce the reference table exactly."""
    table = {0.3: 1, 0.5: 1, 0.7: 2, 0.9: 2, 1.5: 3, 2.0: 4, 3.0: 6, 4.0: 8, 5.0: 10}
    bad = []
    for lam, want in table.items():
        got = optimal_threshold(lam, 1.0, beta_max=40).beta_star
        if got != want:
            bad.append((lam, got, want))
    return CheckResult("optimal thresholds table", not bad,
                       "all match" if not bad else f"mismatches {bad}")


def check_chain_oracle() -> CheckResult:
    """Closed-form observed queue length vs direct balance-equation solve (1e-6)."""
    worst = 0.0
    for beta in (1, 2, 3, 5):
        for load in (0.3, 0.6, 0.9):
            lam = load * beta * 1.0
            formula = erlang_chain(beta, lam, 1.0).mean_queue
            direct = solve_chain_truncated(beta, lam, 1.0, k_max=200)
            worst = max(worst, abs(formula - direct))
    return CheckResult("observed-queue chain vs truncated solve (1e-6)", worst < 1e-6,
                       f"worst abs err {worst:.2e}")


def check_polygon_reconciliation(fast: bool) -> CheckResult:
    """Per-sample area pieces re-sum to the exact distortion integral; the
    sampling piece matches its expectation within 3%."""
    horizon = 1e5 if fast else 1e6
    cfg = SimConfig(lam=0.9, mu=1.0, policy="uniform", horizon=horizon,
                    rate=0.5, seed=BASE_SEED + 11)
    report = simulate(cfg)
    arts = run_pipeline(cfg)
    areas = decompose_polygons(arts)
    integral = report.theta_hat * cfg.horizon
    rel = abs(areas.total - integral) / integral
    sa_rel = abs(report.mean_s_a - 1.8) / 1.8
    ok = rel < 1e-6 and sa_rel < 0.03
    return CheckResult("polygon areas reconcile (1e-6) and sampling area (3%)", ok,
                       f"area rel {rel:.2e}, mean sampling piece {report.mean_s_a:.4f}")


def check_lower_bound_order() -> CheckResult:
    """Interpolation floor stays below the no-guessing distortion on the grid."""
    for r in np.arange(1, 10) / 10.0:
        if lower_bound_theta(r, 0.9, 1.0) > theta_uniform(r, 0.9, 1.0).total:
            return CheckResult("interpolation floor below plain distortion", False,
                               f"violated at r={r}")
    return CheckResult("interpolation floor below plain distortion", True, "holds on grid")


def run_validation(fast: bool = False) -> list[CheckResult]:
    checks: list[Callable[[], CheckResult]] = [
        lambda: check_uniform_grid(fast),
        check_mm1_reduction,
        lambda: check_zero_wait(fast),
        check_root_residuals,
        check_optimal_rate,
        check_optimal_thresholds,
        check_chain_oracle,
        lambda: check_polygon_reconciliation(fast),
        check_lower_bound_order,
    ]
    return [c() for c in checks]
