"""Reproducible experiment runner.

Subcommands: analytic, simulate, sweep, optimize, lowerbound, validate.
Every grid command writes one CSV row per (grid point, replication) plus a
JSON summary with means, standard errors, and the analytic overlays.  CSV
bodies are byte-identical across reruns of the same spec and seeds;
timestamps live only in the JSON.

Configuration precedence: command-line flags > config file > defaults.  The
config file is flat `key = value` text; list-valued keys (lambda, mu, rate,
beta) may repeat.  The default output directory comes from $COUNTRECON_OUT.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .analytic import lower_bound_theta, theta_threshold, theta_uniform, theta_zero_wait
from .errors import InstabilityError, NumericalError, ParameterError
from .optimize import optimal_rate, optimal_threshold
from .simulate import INTERPOLATION_MODES, POLICIES, SimConfig, simulate
from .validate import run_validation

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERICAL = 2
EXIT_IO = 3

CSV_HEADER = ("policy,lambda,mu,param,T,seed,theta_hat,abs_theta_hat,"
              "mean_delay,mean_aoi,samples,unstable,theta_analytic,theta_lower_bound")

INTERP_FLAG_TO_MODE = {"off": "off", "single": "single_point",
                       "uniform": "uniform_J", "oracle": "oracle"}

LIST_KEYS = {"lambda", "mu", "rate", "beta"}
DEFAULT_HORIZON = 1e6          # reference simulation window
DEFAULT_CAP = 30.0             # plotted stand-in value for unstable points


@dataclass(frozen=True)
class ExperimentSpec:
    """Fully resolved description of one grid experiment."""

    command: str
    policy: str = "uniform"
    lambdas: tuple[float, ...] = (0.9,)
    mus: tuple[float, ...] = (1.0,)
    rates: tuple[float, ...] = ()
    betas: tuple[int, ...] = ()
    interps: tuple[str, ...] = ("off",)
    horizon: float = DEFAULT_HORIZON
    reps: int = 1
    seed: int = 1
    preset: str | None = None
    out: Path = Path(".")
    workers: int = 1
    cap: float = DEFAULT_CAP
    variant: str = "exact"
    beta_max: int = 40
    label: str = "run"

    def validate(self) -> None:
        if not self.lambdas or not self.mus:
            raise ParameterError("empty grid: need at least one lambda and one mu")
        if self.policy not in POLICIES:
            raise ParameterError(f"unknown policy {self.policy!r}")
        grid_commands = ("analytic", "simulate", "sweep", "lowerbound")
        if self.policy == "uniform" and self.command in grid_commands and not self.rates:
            raise ParameterError("uniform policy needs at least one rate")
        if self.policy == "threshold" and self.command in grid_commands and not self.betas:
            raise ParameterError("threshold policy needs at least one beta")
        if self.reps < 1:
            raise ParameterError(f"reps must be >= 1, got {self.reps}")
        if self.horizon <= 0:
            raise ParameterError("horizon must be positive")
        if self.workers < 1:
            raise ParameterError("workers must be >= 1")
        for mode in self.interps:
            if mode not in INTERPOLATION_MODES:
                raise ParameterError(f"unknown interpolation mode {mode!r}")

    def params(self) -> tuple:
        if self.policy == "uniform":
            return self.rates
        if self.policy == "threshold":
            return self.betas
        return (None,)

    def config_hash(self) -> str:
        payload = {k: (str(v) if isinstance(v, Path) else v)
                   for k, v in self.__dict__.items()}
        blob = json.dumps(payload, sort_keys=True, default=list).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


# ---------------------------------------------------------------------------
# Presets: the reference experiment grids (horizon defaults to 1e6, override
# with --horizon for quick desk runs).
# ---------------------------------------------------------------------------

def _preset(spec: ExperimentSpec) -> ExperimentSpec:
    name = spec.preset
    r_grid = tuple(round(0.1 * k, 10) for k in range(1, 10))
    presets = {
        "fig7a": dict(policy="uniform", lambdas=(0.9,), mus=(1.0,), rates=r_grid),
        "fig7b": dict(policy="uniform", lambdas=(0.5, 0.9, 1.5), mus=(1.0,), rates=r_grid),
        "fig8": dict(policy="uniform", lambdas=(0.9,), mus=(1.0,),
                     rates=(0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 0.9),
                     interps=("off", "single_point", "uniform_J")),
        "fig9a": dict(policy="threshold", lambdas=(0.3, 0.5, 0.7, 0.9, 1.5, 2.0, 3.0, 4.0, 5.0),
                      mus=(1.0,), betas=tuple(range(1, 13))),
        "fig9b": dict(policy="threshold", lambdas=(0.3, 0.5, 0.7, 0.9), mus=(1.0,),
                      betas=tuple(range(1, 9))),
        "fig9c": dict(policy="threshold", lambdas=(1.5, 2.0, 3.0, 4.0, 5.0), mus=(1.0,),
                      betas=tuple(range(1, 13))),
        "fig10a": dict(policy="zero_wait",
                       lambdas=tuple(round(0.2 * k, 10) for k in range(1, 11)),
                       mus=(1.0,)),
        "fig10b": dict(policy="zero_wait", lambdas=(1.0,),
                       mus=(0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0)),
    }
    if name is None or name == "none":
        return spec
    if name not in presets:
        raise ParameterError(f"unknown preset {name!r}; choose from {sorted(presets)}")
    return replace(spec, label=name, **presets[name])


# ---------------------------------------------------------------------------
# Row execution
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RowTask:
    policy: str
    lam: float
    mu: float
    param: float | None     # rate or beta
    interp: str
    horizon: float
    seed: int
    grid_index: int
    rep: int
    want_lower_bound: bool = False
    analytic_only: bool = False


@dataclass(frozen=True)
class RowResult:
    task: RowTask
    theta_hat: float | None
    abs_theta_hat: float | None
    mean_delay: float | None
    mean_aoi: float | None
    samples: int | None
    unstable: bool | None
    theta_analytic: float | None
    theta_lower_bound: float | None


def derive_seed(base: int, *path: int) -> int:
    """Deterministic per-row seed from the experiment seed and grid position."""
    digest = hashlib.blake2b(digest_size=8)
    for part in (base, *path):
        digest.update(int(part).to_bytes(16, "little", signed=True))
    return int.from_bytes(digest.digest(), "little") >> 1


def _theta_analytic(policy: str, lam: float, mu: float, param: float | None) -> float | None:
    try:
        if policy == "uniform":
            return theta_uniform(param, lam, mu).total
        if policy == "threshold":
            return theta_threshold(int(param), lam, mu).total
        return theta_zero_wait(lam, mu).total
    except InstabilityError:
        return None


def run_row(task: RowTask) -> RowResult:
    analytic = _theta_analytic(task.policy, task.lam, task.mu, task.param)
    bound = None
    if task.want_lower_bound and task.policy == "uniform":
        try:
            bound = lower_bound_theta(task.param, task.lam, task.mu)
        except InstabilityError:
            bound = None
    if task.analytic_only:
        return RowResult(task, None, None, None, None, None, None, analytic, bound)
    cfg = SimConfig(
        lam=task.lam, mu=task.mu, policy=task.policy, horizon=task.horizon,
        rate=task.param if task.policy == "uniform" else None,
        beta=int(task.param) if task.policy == "threshold" else None,
        seed=task.seed, interpolation=task.interp)
    report = simulate(cfg)
    return RowResult(
        task, report.theta_hat, report.abs_theta_hat, report.mean_delay,
        report.mean_aoi, report.sample_count, report.unstable, analytic, bound)


def _build_tasks(spec: ExperimentSpec, analytic_only: bool,
                 want_lower_bound: bool) -> list[RowTask]:
    tasks = []
    grid_index = 0
    for interp in spec.interps:
        for lam in spec.lambdas:
            for mu in spec.mus:
                for param in spec.params():
                    reps = 1 if analytic_only else spec.reps
                    for rep in range(reps):
                        tasks.append(RowTask(
                            policy=spec.policy, lam=lam, mu=mu, param=param,
                            interp=interp, horizon=spec.horizon,
                            seed=derive_seed(spec.seed, grid_index, rep),
                            grid_index=grid_index, rep=rep,
                            want_lower_bound=want_lower_bound,
                            analytic_only=analytic_only))
                    grid_index += 1
    if not tasks:
        raise ParameterError("empty grid: nothing to run")
    return tasks


def _execute(tasks: list[RowTask], workers: int) -> list[RowResult]:
    if workers <= 1 or len(tasks) == 1:
        return [run_row(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run_row, tasks, chunksize=1))


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------

def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, float):
        if math.isnan(value):
            return ""
        return repr(float(value))   # builtin repr: shortest exact round-trip
    return str(value)


def _policy_tag(policy: str, interp: str) -> str:
    return policy if interp == "off" else f"{policy}+{interp}"


def write_csv(path: Path, results: list[RowResult]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER.split(","))
        for res in results:
            t = res.task
            writer.writerow([
                _policy_tag(t.policy, t.interp),
                _fmt(t.lam), _fmt(t.mu),
                _fmt(t.param) if t.param is not None else "",
                _fmt(t.horizon),
                "" if res.theta_hat is None else _fmt(t.seed),
                _fmt(res.theta_hat), _fmt(res.abs_theta_hat),
                _fmt(res.mean_delay), _fmt(res.mean_aoi),
                _fmt(res.samples), _fmt(res.unstable),
                _fmt(res.theta_analytic), _fmt(res.theta_lower_bound),
            ])


def _summarize(spec: ExperimentSpec, results: list[RowResult]) -> dict:
    groups: dict[int, list[RowResult]] = {}
    for res in results:
        groups.setdefault(res.task.grid_index, []).append(res)
    points = []
    for gi in sorted(groups):
        rows = groups[gi]
        t0 = rows[0].task
        thetas = [r.theta_hat for r in rows if r.theta_hat is not None]
        entry = {
            "policy": _policy_tag(t0.policy, t0.interp),
            "lambda": t0.lam,
            "mu": t0.mu,
            "param": t0.param,
            "horizon": t0.horizon,
            "reps": len(thetas),
            "seeds": [r.task.seed for r in rows if r.theta_hat is not None],
            "theta_analytic": rows[0].theta_analytic,
            "theta_lower_bound": rows[0].theta_lower_bound,
        }
        if thetas:
            arr = np.asarray(thetas)
            unstable_any = any(bool(r.unstable) for r in rows)
            entry.update({
                "theta_hat_mean": float(arr.mean()),
                "theta_hat_se": (float(arr.std(ddof=1) / math.sqrt(arr.size))
                                 if arr.size > 1 else None),
                "abs_theta_hat_mean": float(np.mean(
                    [r.abs_theta_hat for r in rows if r.abs_theta_hat is not None])),
                "mean_delay": float(np.mean(
                    [r.mean_delay for r in rows if r.mean_delay is not None])),
                "mean_aoi": float(np.nanmean(
                    [math.nan if r.mean_aoi is None else r.mean_aoi for r in rows])),
                "unstable": unstable_any,
                "theta_plot": spec.cap if unstable_any else float(arr.mean()),
            })
        points.append(entry)
    return points


def _write_outputs(spec: ExperimentSpec, results: list[RowResult]) -> tuple[Path, Path]:
    out_dir = spec.out
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = f"{spec.command}_{spec.label}"
    csv_path = out_dir / f"{stem}.csv"
    json_path = out_dir / f"{stem}.json"
    write_csv(csv_path, results)
    summary = {
        "command": spec.command,
        "preset": spec.preset,
        "created_utc": datetime.now(timezone.utc).isoformat(),
        "version": __version__,
        "config_hash": spec.config_hash(),
        "spec": {k: (str(v) if isinstance(v, Path) else v)
                 for k, v in spec.__dict__.items()},
        "csv": csv_path.name,
        "points": _summarize(spec, results),
    }
    with open(json_path, "w") as fh:
        json.dump(summary, fh, indent=2, default=list)
        fh.write("\n")
    return csv_path, json_path


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_grid(spec: ExperimentSpec) -> int:
    spec = _preset(spec)
    spec.validate()
    analytic_only = spec.command == "analytic"
    want_bound = spec.command == "lowerbound" or (
        spec.command in ("sweep",) and spec.policy == "uniform")
    tasks = _build_tasks(spec, analytic_only, want_bound)
    results = _execute(tasks, spec.workers)
    csv_path, json_path = _write_outputs(spec, results)
    print(f"wrote {csv_path} and {json_path} ({len(results)} rows)")
    return EXIT_OK


def cmd_optimize(spec: ExperimentSpec) -> int:
    spec.validate()
    out_dir = spec.out
    out_dir.mkdir(parents=True, exist_ok=True)
    records = []
    for lam in spec.lambdas:
        for mu in spec.mus:
            if spec.policy == "threshold":
                opt = optimal_threshold(lam, mu, beta_max=spec.beta_max)
                rec = {"policy": "threshold", "lambda": lam, "mu": mu,
                       "beta_star": opt.beta_star, "theta_star": opt.theta_star,
                       "beta_min": opt.beta_min}
                print(f"lambda={lam} mu={mu}: beta*={opt.beta_star} "
                      f"theta*={opt.theta_star:.6f}")
            else:
                opt = optimal_rate(lam, mu)
                rec = {"policy": "uniform", "lambda": lam, "mu": mu,
                       "r_star": opt.r_star, "theta_star": opt.theta_star,
                       "grid_unimodal": opt.grid_unimodal}
                print(f"lambda={lam} mu={mu}: r*={opt.r_star:.4f} "
                      f"theta*={opt.theta_star:.6f}")
            records.append(rec)
    json_path = out_dir / "optimize.json"
    with open(json_path, "w") as fh:
        json.dump({"command": "optimize",
                   "created_utc": datetime.now(timezone.utc).isoformat(),
                   "version": __version__, "results": records}, fh, indent=2)
        fh.write("\n")
    print(f"wrote {json_path}")
    return EXIT_OK


def cmd_validate(fast: bool) -> int:
    results = run_validation(fast=fast)
    width = max(len(r.name) for r in results)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name:<{width}}  {r.detail}")
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return EXIT_OK if not failed else EXIT_NUMERICAL


# ---------------------------------------------------------------------------
# Argument handling
# ---------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2; we reserve that
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def read_config_file(path: Path) -> dict:
    """Flat `key = value` config; list keys may repeat; `#` starts a comment."""
    values: dict[str, object] = {}
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParameterError(f"cannot read config file {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParameterError(f"{path}:{lineno}: expected 'key = value'")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key in LIST_KEYS:
            values.setdefault(key, []).append(val)
        else:
            values[key] = val
    return values


def _build_parser() -> _Parser:
    parser = _Parser(prog="countrecon",
                     description="Counting-process reconstruction experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, with_grid=True):
        p.add_argument("--config", type=Path, help="flat key=value config file")
        if with_grid:
            p.add_argument("--lambda", dest="lambdas", type=float, action="append",
                           metavar="RATE", help="source event rate (repeatable)")
            p.add_argument("--mu", dest="mus", type=float, action="append",
                           help="service rate (repeatable)")
            p.add_argument("--rate", dest="rates", type=float, action="append",
                           help="uniform sampling rate r (repeatable)")
            p.add_argument("--beta", dest="betas", type=int, action="append",
                           help="sampling threshold (repeatable)")
            p.add_argument("--policy", choices=POLICIES)
            p.add_argument("--horizon", type=float, help="simulation window T")
            p.add_argument("--reps", type=int, help="replications per grid point")
            p.add_argument("--seed", type=int, help="experiment base seed")
            p.add_argument("--interp", choices=sorted(INTERP_FLAG_TO_MODE),
                           help="monitor-side guessing mode")
            p.add_argument("--preset",
                           choices=["fig7a", "fig7b", "fig8", "fig9a", "fig9b",
                                    "fig9c", "fig10a", "fig10b", "none"])
            p.add_argument("--cap", type=float,
                           help="plotted stand-in for unstable points (default 30)")
        p.add_argument("--out", type=Path, help="output directory "
                       "(default $COUNTRECON_OUT or ./countrecon-out)")
        p.add_argument("--workers", type=int, help="parallel row workers")

    for name in ("analytic", "simulate", "sweep", "lowerbound"):
        add_common(sub.add_parser(name))
    p_opt = sub.add_parser("optimize")
    add_common(p_opt)
    p_opt.add_argument("--beta-max", type=int, default=None,
                       help="largest threshold searched (threshold policy)")
    p_val = sub.add_parser("validate")
    add_common(p_val, with_grid=False)
    p_val.add_argument("--fast", action="store_true",
                       help="reduced horizons for a quick smoke run")
    return parser


def _spec_from_args(args: argparse.Namespace) -> ExperimentSpec:
    file_vals = read_config_file(args.config) if getattr(args, "config", None) else {}

    def pick(flag, key, default, conv):
        cli_val = getattr(args, flag, None)
        if cli_val is not None:
            return cli_val
        if key in file_vals:
            raw = file_vals[key]
            if isinstance(raw, list):
                return tuple(conv(v) for v in raw)
            return conv(raw)
        return default

    interp_flag = pick("interp", "interp", "off", str)
    interps = (INTERP_FLAG_TO_MODE.get(interp_flag, interp_flag),)
    out = pick("out", "out", None, Path)
    if out is None:
        out = Path(os.environ.get("COUNTRECON_OUT", "countrecon-out"))
    policy = pick("policy", "policy", "uniform", str)
    spec = ExperimentSpec(
        command=args.command,
        policy=policy,
        lambdas=tuple(pick("lambdas", "lambda", (0.9,), float)),
        mus=tuple(pick("mus", "mu", (1.0,), float)),
        rates=tuple(pick("rates", "rate", (), float)),
        betas=tuple(int(b) for b in pick("betas", "beta", (), int)),
        interps=interps,
        horizon=float(pick("horizon", "horizon", DEFAULT_HORIZON, float)),
        reps=int(pick("reps", "reps", 1, int)),
        seed=int(pick("seed", "seed", 1, int)),
        preset=pick("preset", "preset", None, str),
        out=Path(out),
        workers=int(pick("workers", "workers", 1, int)),
        cap=float(pick("cap", "cap", DEFAULT_CAP, float)),
        beta_max=int(getattr(args, "beta_max", None) or file_vals.get("beta_max", 40)),
    )
    return spec


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "validate":
            return cmd_validate(fast=args.fast)
        spec = _spec_from_args(args)
        if args.command == "optimize":
            return cmd_optimize(spec)
        return cmd_grid(spec)
    except ParameterError as exc:
        print(f"countrecon: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InstabilityError, NumericalError) as exc:
        print(f"countrecon: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"countrecon: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
