"""Command-line front end.

Subcommands: spectral, simulate, ecf, fixed-point, verify, ode-check.
Exit codes: 0 success, 1 runtime or statistical failure, 2 configuration
error.  Outputs are CSV files with '#'-prefixed metadata headers carrying the
config hash, master seed and package version; the metadata deliberately
excludes anything scheduling-dependent so reruns with different worker
counts stay byte-identical.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from dataclasses import replace

import numpy as np

from . import __version__
from . import branching, fixed_point, initial_laws, solver, spectral, streams, verify
from .config import ExperimentConfig, config_hash, load_config
from .errors import CapExceededError, ConfigError, DomainError, NoMinimizerError

__all__ = ["main"]


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _write_csv(path: str, columns: list[str], rows, cfg: ExperimentConfig) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# config_hash={config_hash(cfg)}\n")
        fh.write(f"# seed={cfg.seed}\n")
        fh.write(f"# version={__version__}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _out_path(cfg: ExperimentConfig, name: str, label: str | None) -> str:
    tag = label if label else time.strftime("%Y%m%dT%H%M%S")
    return os.path.join(cfg.out_dir, f"{name}_{tag}.csv")


def _cmd_spectral(cfg: ExperimentConfig, args) -> int:
    profile = spectral.find_gamma_star(cfg.weight_model, tol=cfg.tolerances.spectral_tol)
    print(f"gamma_star      = {profile.gamma_star!r}")
    print(f"phi(gamma_star) = {profile.phi_at!r}")
    print(f"mu(gamma_star)  = {profile.mu_at!r}")
    print(f"phi''           = {profile.phi_second_at!r}")
    print(f"c_gamma         = {profile.c_gamma!r}")
    s_hi = args.s_max if args.s_max is not None else min(4.0 * profile.gamma_star, profile.s_infinity / 2.0 if math.isfinite(profile.s_infinity) else 4.0 * profile.gamma_star)
    grid = np.linspace(args.s_min, s_hi, args.s_points)
    rows = []
    for s in grid:
        ph = spectral.phi_value(cfg.weight_model, float(s))
        mu = ph / s if s > 0.0 else math.nan
        rows.append((float(s), ph, mu))
    _write_csv(_out_path(cfg, "spectral", args.label), ["s", "phi", "mu"], rows, cfg)
    return 0


def _cmd_simulate(cfg: ExperimentConfig, args) -> int:
    profile = spectral.find_gamma_star(cfg.weight_model, tol=cfg.tolerances.spectral_tol)
    stats = branching.run_replicates(cfg.weight_model, cfg.times, cfg.replicates, cfg.seed,
                                     profile=profile, gammas=(profile.gamma_star,),
                                     particle_cap=cfg.particle_cap, workers=cfg.workers,
                                     domain=streams.POPULATION)
    rows = []
    any_empty = False
    for ci, t in enumerate(stats.checkpoints):
        m = stats.additive[:, ci, 0]
        good = ~np.isnan(m)
        n_ok = int(good.sum())
        if n_ok == 0:
            any_empty = True
            rows.append((float(t), math.nan, math.nan, math.nan, math.nan, math.nan,
                         math.nan, 0, cfg.replicates))
            continue
        d = stats.derivative[good, ci]
        s2 = stats.second_moment[good, ci]
        mx = stats.max_norm[good, ci]
        est_m = verify.mean_ci(m[good]) if n_ok > 1 else None
        est_d = verify.mean_ci(d) if n_ok > 1 else None
        rows.append((
            float(t),
            float(np.mean(m[good])), est_m.stderr if est_m else math.nan,
            float(np.mean(d)), est_d.stderr if est_d else math.nan,
            float(np.mean(s2)),
            float(np.median(spectral.sqrt_time_factor(float(t)) * mx)),
            n_ok, cfg.replicates - n_ok,
        ))
    _write_csv(_out_path(cfg, "simulate", args.label),
               ["t", "mean_M", "stderr_M", "mean_D", "stderr_D", "mean_secmom",
                "median_sqrt_t_max", "n_ok", "n_aborted"], rows, cfg)
    if any_empty:
        print("error: all replicates aborted at some checkpoint", file=sys.stderr)
        return 1
    return 0


def _cmd_ecf(cfg: ExperimentConfig, args) -> int:
    if cfg.initial_law is None:
        raise ConfigError("ecf needs an initial_law in the config")
    xi = cfg.xi_grid()
    profile = None
    if args.rescaled:
        profile = spectral.find_gamma_star(cfg.weight_model, tol=cfg.tolerances.spectral_tol)
        if abs(initial_laws.tail_index(cfg.initial_law) - profile.gamma_star) > 1e-6:
            raise ConfigError("rescaled ecf needs the law tail index to match gamma_star")
    stats = branching.run_replicates(cfg.weight_model, [t for t in cfg.times if t >= 0.0],
                                     cfg.replicates, cfg.seed, law=cfg.initial_law,
                                     particle_cap=cfg.particle_cap, workers=cfg.workers,
                                     domain=streams.SMOOTHING)
    code = 0
    for ci, t in enumerate(stats.checkpoints):
        samples = stats.smoothing[stats.ok(), ci]
        samples = samples[~np.isnan(samples)]
        if samples.size < 2:
            print(f"error: no surviving replicates at t={t:g}", file=sys.stderr)
            code = 1
            continue
        if args.rescaled:
            samples = spectral.scaling_factor(profile, float(t)) * samples
        est = solver.empirical_cf(samples, xi)
        rows = [(x, v.real, v.imag, sre, sim, est.n_samples)
                for x, v, sre, sim in zip(est.xi, est.values, est.stderr_re, est.stderr_im)]
        _write_csv(_out_path(cfg, f"ecf_t{t:g}", args.label),
                   ["xi", "re", "im", "stderr_re", "stderr_im", "n"], rows, cfg)
    return code


def _cmd_fixed_point(cfg: ExperimentConfig, args) -> int:
    profile = spectral.find_gamma_star(cfg.weight_model, tol=cfg.tolerances.spectral_tol)
    sample = fixed_point.iterate_fixed_point(profile, cfg.weight_model, cfg.pool_size,
                                             cfg.pool_iterations,
                                             streams.stream(cfg.seed, streams.FIXED_POINT))
    path = _out_path(cfg, "fixed_point", args.label)
    _write_csv(path, ["value"], [(v,) for v in sample.values], cfg)
    print(f"pool size {cfg.pool_size}, iterations {cfg.pool_iterations}")
    print(f"final pool mean {float(sample.mean_trace[-1])!r}, std {float(sample.std_trace[-1])!r}")
    print(f"wrote {path}")
    return 0


def _print_reports(reports) -> bool:
    all_pass = True
    for r in reports:
        flag = "PASS" if r.passed else "FAIL"
        if r.p_value is not None:
            detail = f"stat={r.statistic:.6g} p={r.p_value:.3g} alpha={r.metadata.get('alpha')}"
        elif math.isfinite(r.threshold):
            detail = f"stat={r.statistic:.6g} thr={r.threshold:.6g}"
        else:
            detail = f"stat={r.statistic:.6g} (reported)"
        print(f"{flag}  {r.name}: {detail} (n={r.n})")
        all_pass &= r.passed
    return all_pass


def _write_reports(cfg: ExperimentConfig, name: str, label, reports) -> None:
    rows = [(r.name, r.statistic,
             "" if r.threshold is None else _fmt(r.threshold),
             "" if r.p_value is None else _fmt(r.p_value),
             r.passed, r.n, json.dumps(r.metadata, sort_keys=True, default=str))
            for r in reports]
    _write_csv(_out_path(cfg, name, label),
               ["name", "statistic", "threshold", "p_value", "passed", "n", "metadata"], rows, cfg)


def _cmd_verify(cfg: ExperimentConfig, args) -> int:
    suite = verify.SUITES.get(args.suite)
    if suite is None:
        raise ConfigError(f"unknown suite {args.suite!r}; choose from {sorted(verify.SUITES)}")
    reports = suite(cfg)
    _write_reports(cfg, f"verify_{args.suite}", args.label, reports)
    return 0 if _print_reports(reports) else 1


def _cmd_ode_check(cfg: ExperimentConfig, args) -> int:
    reports = verify.suite_ode_crosscheck(cfg)
    _write_reports(cfg, "ode_check", args.label, reports)
    return 0 if _print_reports(reports) else 1


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kinetic-brw",
                                     description="branching-random-walk Monte Carlo for kinetic-type equations")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="JSON experiment config")
        p.add_argument("--seed", type=int, default=None, help="override master seed")
        p.add_argument("--workers", type=int, default=None, help="override worker count")
        p.add_argument("--out", default=None, help="override output directory")
        p.add_argument("--label", default=None, help="output file label (default: timestamp)")

    p = sub.add_parser("spectral", help="spectral constants and phi/mu table")
    common(p)
    p.add_argument("--s-min", type=float, default=0.0)
    p.add_argument("--s-max", type=float, default=None)
    p.add_argument("--s-points", type=int, default=201)
    p.set_defaults(func=_cmd_spectral)

    p = sub.add_parser("simulate", help="martingale observables per checkpoint")
    common(p)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("ecf", help="empirical characteristic function of the solution")
    common(p)
    p.add_argument("--rescaled", action="store_true", help="apply the boundary-case rescaling")
    p.set_defaults(func=_cmd_ecf)

    p = sub.add_parser("fixed-point", help="pool iteration of the fixed-point map")
    common(p)
    p.set_defaults(func=_cmd_fixed_point)

    p = sub.add_parser("verify", help="run a named verification suite")
    common(p)
    p.add_argument("suite", help=f"one of {sorted(verify.SUITES)}")
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("ode-check", help="Monte Carlo vs direct CF integration")
    common(p)
    p.set_defaults(func=_cmd_ode_check)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        overrides = {}
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.workers is not None:
            overrides["workers"] = args.workers
        if args.out is not None:
            overrides["out_dir"] = args.out
        if overrides:
            cfg = replace(cfg, **overrides)
        return args.func(cfg, args)
    except (ConfigError, DomainError, NoMinimizerError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except CapExceededError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
