"""Statistical verification suites.

Turns the model's exact identities and limit statements into pass/fail
experiments: mean/CI gates, chi-square goodness of fit against closed-form
laws, two-sample Kolmogorov-Smirnov checks, and the end-to-end boundary-case
characteristic-function experiment.

Gates follow two conventions: distributional tests reject below a small
significance level (default 1e-3), mean tests use a 4-sigma band.  These are
correctness gates for the implementation, loose enough not to flicker, tight
enough to catch real defects.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import special

from . import branching, fixed_point, initial_laws, solver, spectral, streams
from .config import ExperimentConfig, config_hash
from .errors import ConfigError

__all__ = [
    "TestReport",
    "ConfidenceEstimate",
    "mean_ci",
    "ks_two_sample",
    "kolmogorov_sf",
    "chi_square_pmf",
    "bootstrap_median_ci",
    "suite_yule",
    "suite_martingale",
    "suite_fixed_point",
    "suite_ode_crosscheck",
    "suite_boundary",
    "run_max_decrease",
    "run_boundary_convergence",
    "SUITES",
]


@dataclass
class TestReport:
    """One decision: pass iff statistic <= threshold, or p_value >= alpha."""

    name: str
    statistic: float
    threshold: float | None
    p_value: float | None
    passed: bool
    n: int
    metadata: dict = field(default_factory=dict)


def _gate_threshold(name: str, statistic: float, threshold: float, n: int, **meta) -> TestReport:
    return TestReport(name=name, statistic=float(statistic), threshold=float(threshold),
                      p_value=None, passed=bool(statistic <= threshold), n=int(n), metadata=meta)


def _gate_p(name: str, statistic: float, p: float, alpha: float, n: int, **meta) -> TestReport:
    meta = dict(meta, alpha=alpha)
    return TestReport(name=name, statistic=float(statistic), threshold=None,
                      p_value=float(p), passed=bool(p >= alpha), n=int(n), metadata=meta)


def _info(name: str, statistic: float, n: int, **meta) -> TestReport:
    return TestReport(name=name, statistic=float(statistic), threshold=math.inf,
                      p_value=None, passed=True, n=int(n), metadata=meta)


@dataclass
class ConfidenceEstimate:
    mean: float
    stderr: float
    n: int


def mean_ci(samples) -> ConfidenceEstimate:
    x = np.asarray(samples, dtype=float)
    if x.size < 2:
        raise ConfigError("need at least two samples")
    return ConfidenceEstimate(mean=float(x.mean()), stderr=float(x.std(ddof=1) / math.sqrt(x.size)),
                              n=int(x.size))


def _mean_gate(name: str, samples, target: float, sigmas: float, **meta) -> TestReport:
    est = mean_ci(samples)
    dev = abs(est.mean - target)
    stat = dev / est.stderr if est.stderr > 0.0 else (0.0 if dev == 0.0 else math.inf)
    meta = dict(meta, mean=est.mean, stderr=est.stderr, target=target)
    return _gate_threshold(name, stat, sigmas, est.n, **meta)


def kolmogorov_sf(x: float) -> float:
    """Survival function of the Kolmogorov distribution.

    Alternating series 2 sum (-1)^(k-1) exp(-2 k^2 x^2) for moderate x; the
    Jacobi-transformed series for small x, where the alternating form needs
    thousands of terms.
    """
    if x <= 0.0:
        return 1.0
    if x < 0.3:
        cdf = 0.0
        for k in range(1, 20):
            cdf += math.exp(-((2 * k - 1) ** 2) * math.pi**2 / (8.0 * x * x))
        cdf *= math.sqrt(2.0 * math.pi) / x
        return min(max(1.0 - cdf, 0.0), 1.0)
    total = 0.0
    for k in range(1, 101):
        term = 2.0 * (-1.0) ** (k - 1) * math.exp(-2.0 * k * k * x * x)
        total += term
        if abs(term) < 1e-16:
            break
    return min(max(total, 0.0), 1.0)


def ks_two_sample(a, b) -> tuple[float, float]:
    """Two-sample KS statistic with the asymptotic Kolmogorov p-value."""
    x = np.sort(np.asarray(a, dtype=float))
    y = np.sort(np.asarray(b, dtype=float))
    if x.size < 25 or y.size < 25:
        raise ConfigError("KS test needs at least 25 points per sample")
    grid = np.concatenate([x, y])
    cdf_x = np.searchsorted(x, grid, side="right") / x.size
    cdf_y = np.searchsorted(y, grid, side="right") / y.size
    d = float(np.max(np.abs(cdf_x - cdf_y)))
    en = math.sqrt(x.size * y.size / (x.size + y.size))
    return d, kolmogorov_sf(en * d)


def chi_square_pmf(counts, pmf: Callable[[np.ndarray], np.ndarray],
                   min_expected: float = 5.0) -> tuple[float, float]:
    """Pearson test of integer counts (index = value) against an exact pmf.

    Adjacent values are pooled until every expected count reaches
    ``min_expected``; the final bin absorbs the tail beyond the observed
    range so expectations sum to n exactly.
    """
    obs = np.asarray(counts, dtype=float)
    n = obs.sum()
    if n <= 0:
        raise ConfigError("empty histogram")
    k = np.arange(obs.size)
    probs = np.asarray(pmf(k), dtype=float)
    tail = max(0.0, 1.0 - probs.sum())

    pooled_o: list[float] = []
    pooled_e: list[float] = []
    acc_o = 0.0
    acc_e = 0.0
    for i in range(obs.size):
        acc_o += obs[i]
        acc_e += n * probs[i]
        if acc_e >= min_expected:
            pooled_o.append(acc_o)
            pooled_e.append(acc_e)
            acc_o = 0.0
            acc_e = 0.0
    # leftovers plus the analytic tail go into the last bin
    acc_e += n * tail
    if pooled_o:
        pooled_o[-1] += acc_o
        pooled_e[-1] += acc_e
    else:
        raise ConfigError("histogram too sparse to form bins")
    if len(pooled_o) < 2:
        raise ConfigError("need at least two bins after pooling")
    o = np.asarray(pooled_o)
    e = np.asarray(pooled_e)
    stat = float(np.sum((o - e) ** 2 / e))
    df = o.size - 1
    p = float(special.gammaincc(df / 2.0, stat / 2.0))
    return stat, p


def bootstrap_median_ci(values, rng: np.random.Generator, n_boot: int = 2000,
                        level: float = 0.95) -> tuple[float, float]:
    x = np.asarray(values, dtype=float)
    meds = np.empty(n_boot)
    for i in range(n_boot):
        meds[i] = np.median(x[rng.integers(0, x.size, x.size)])
    lo = float(np.quantile(meds, (1.0 - level) / 2.0))
    hi = float(np.quantile(meds, 1.0 - (1.0 - level) / 2.0))
    return lo, hi


# ---------------------------------------------------------------------------
# Suites.
# ---------------------------------------------------------------------------


def _meta(cfg: ExperimentConfig) -> dict:
    return {"config": config_hash(cfg), "seed": cfg.seed}


def suite_yule(cfg: ExperimentConfig) -> list[TestReport]:
    """Closed-form population laws: split-count pmf, size identity, pgf."""
    model = cfg.weight_model
    n = spectral.n_children(model)
    tol = cfg.tolerances
    stats = branching.run_replicates(model, cfg.times, cfg.replicates, cfg.seed,
                                     particle_cap=cfg.particle_cap, workers=cfg.workers,
                                     domain=streams.VERIFY)
    reports = []
    ok = stats.ok()
    emitted = stats.population >= 0
    violations = int(np.sum(stats.population[emitted] != (n - 1) * stats.split_count[emitted] + 1))
    reports.append(_gate_threshold("yule_size_identity", violations, 0,
                                   int(emitted.sum()), **_meta(cfg)))
    for ci, t in enumerate(stats.checkpoints):
        nus = stats.split_count[ok, ci]
        nus = nus[nus >= 0]
        counts = np.bincount(nus)
        stat, p = chi_square_pmf(counts, lambda k: branching.split_count_pmf(n, float(t), k))
        reports.append(_gate_p(f"yule_split_pmf_t{t:g}", stat, p, tol.significance,
                               nus.size, **_meta(cfg)))
        y = stats.population[ok, ci].astype(float)
        y = y[y > 0]
        for s in (0.3, 0.7):
            target = branching.population_pgf(n, float(t), s).real
            reports.append(_mean_gate(f"yule_pgf_t{t:g}_s{s}", s**y, target,
                                      tol.mean_sigmas, **_meta(cfg)))
    return reports


def _martingale_gammas(profile: spectral.SpectralProfile) -> tuple[float, ...]:
    gs = profile.gamma_star
    hi = 2.0 * gs if not math.isfinite(profile.s_infinity) else min(2.0 * gs, profile.s_infinity / 2.0)
    return (gs / 2.0, gs, hi)


def suite_martingale(cfg: ExperimentConfig) -> list[TestReport]:
    """Mean-one additive martingale, derivative-martingale moments, max decrease.

    The mean gates run at cfg.times with cfg.replicates; the max-decrease
    ordering runs its own schedule (5, 10, 20) with a tenth of the replicates,
    matching the scale at which the decrease is measurable.
    """
    model = cfg.weight_model
    tol = cfg.tolerances
    profile = spectral.find_gamma_star(model, tol=tol.spectral_tol)
    gammas = _martingale_gammas(profile)
    stats = branching.run_replicates(model, cfg.times, cfg.replicates, cfg.seed,
                                     profile=profile, gammas=gammas,
                                     particle_cap=cfg.particle_cap, workers=cfg.workers,
                                     domain=streams.VERIFY)
    reports = []
    ok = stats.ok()
    for ci, t in enumerate(stats.checkpoints):
        for gi, g in enumerate(gammas):
            m = stats.additive[ok, ci, gi]
            m = m[~np.isnan(m)]
            reports.append(_mean_gate(f"martingale_mean_t{t:g}_g{g:g}", m, 1.0,
                                      tol.mean_sigmas, **_meta(cfg)))
        d = stats.derivative[ok, ci]
        d = d[~np.isnan(d)]
        reports.append(_mean_gate(f"derivative_mean_t{t:g}", d, 0.0, tol.mean_sigmas, **_meta(cfg)))
        s2 = stats.second_moment[ok, ci]
        s2 = s2[~np.isnan(s2)]
        reports.append(_mean_gate(f"second_moment_t{t:g}", s2, float(t) * profile.phi_second_at,
                                  tol.mean_sigmas, **_meta(cfg)))
    reports.extend(run_max_decrease(cfg, profile, times=(5.0, 10.0, 20.0),
                                    size=max(cfg.replicates // 10, 1000)))
    return reports


def run_max_decrease(cfg: ExperimentConfig, profile: spectral.SpectralProfile, *,
                     times: Sequence[float], size: int) -> list[TestReport]:
    """Medians of sqrt(t) * max_k exp(gamma* zc_k) must fall along ``times``."""
    model = cfg.weight_model
    tol = cfg.tolerances
    pools = branching.readout_pool_chain(model, profile, times, size, cfg.seed,
                                         segment_time=cfg.segment_time, workers=cfg.workers,
                                         particle_cap=cfg.particle_cap,
                                         domain=streams.MAX_DECREASE)
    ts = sorted(pools)
    medians = {}
    cis = {}
    for i, t in enumerate(ts):
        vals = spectral.sqrt_time_factor(t) * pools[t].max_norm
        medians[t] = float(np.median(vals))
        cis[t] = bootstrap_median_ci(vals, streams.stream(cfg.seed, streams.MAX_DECREASE, 999, i))
    reports = []
    worst = max(medians[ts[i + 1]] - medians[ts[i]] for i in range(len(ts) - 1))
    reports.append(TestReport(name="max_median_strict_decrease", statistic=worst, threshold=0.0,
                              p_value=None, passed=bool(worst < 0.0), n=size,
                              metadata=dict(_meta(cfg), medians={f"{t:g}": medians[t] for t in ts})))
    lo_first, hi_first = cis[ts[0]]
    lo_last, hi_last = cis[ts[-1]]
    gap = hi_last - lo_first
    reports.append(TestReport(name="max_median_ci_separation", statistic=gap, threshold=0.0,
                              p_value=None, passed=bool(hi_last < lo_first), n=size,
                              metadata=dict(_meta(cfg), first_ci=cis[ts[0]], last_ci=cis[ts[-1]])))
    return reports


def suite_fixed_point(cfg: ExperimentConfig) -> list[TestReport]:
    """Mean preservation along pool iterations and distributional stationarity.

    The pool mean is a martingale around 1, so the mean gate uses its
    accumulated (martingale) standard error, not the cross-sectional stderr
    of the final pool; the latter ignores the drift the iteration noise has
    already baked in and rejects even a correct implementation.
    """
    model = cfg.weight_model
    tol = cfg.tolerances
    profile = spectral.find_gamma_star(model, tol=tol.spectral_tol)
    rng = streams.stream(cfg.seed, streams.FIXED_POINT)
    sample = fixed_point.iterate_fixed_point(profile, model, cfg.pool_size,
                                             cfg.pool_iterations, rng)
    reports = []
    phi2g = spectral.phi_value(model, 2.0 * profile.gamma_star)
    band = fixed_point.mean_band_trace(sample, profile, model, phi2g)
    with np.errstate(divide="ignore", invalid="ignore"):
        dev = np.where(band > 0.0, np.abs(sample.mean_trace - 1.0) / band, 0.0)
    worst_it = int(np.argmax(dev))
    reports.append(_gate_threshold("fixed_point_mean_trace", float(dev.max()), tol.mean_sigmas,
                                   cfg.pool_size, worst_iteration=worst_it,
                                   final_mean=float(sample.mean_trace[-1]), **_meta(cfg)))
    more = fixed_point.fixed_point_step(sample.values, profile, model, rng)
    stat, p = ks_two_sample(sample.values, more)
    reports.append(_gate_p("fixed_point_self_consistency", stat, p, tol.significance,
                           cfg.pool_size, **_meta(cfg)))
    return reports


def suite_ode_crosscheck(cfg: ExperimentConfig) -> list[TestReport]:
    """Monte Carlo CF of the solution against the deterministic integrator."""
    if cfg.initial_law is None:
        raise ConfigError("ode crosscheck needs an initial law")
    model = cfg.weight_model
    law = cfg.initial_law
    tol = cfg.tolerances
    xi = cfg.xi_grid()
    times = [t for t in cfg.times if t > 0.0]
    stats = branching.run_replicates(model, times, cfg.replicates, cfg.seed, law=law,
                                     particle_cap=cfg.particle_cap, workers=cfg.workers,
                                     domain=streams.SMOOTHING)
    reports = []
    for ci, t in enumerate(stats.checkpoints):
        samples = stats.smoothing[stats.ok(), ci]
        samples = samples[~np.isnan(samples)]
        ecf = solver.empirical_cf(samples, xi)
        ref = solver.ode_reference_cf(model, law, float(t), xi)
        slack = tol.mean_sigmas * ecf.stderr
        excess = np.abs(ecf.values - ref) - slack
        j = int(np.argmax(excess))
        reports.append(_gate_threshold(f"ode_crosscheck_t{t:g}", float(excess[j]), 1e-3,
                                       samples.size, worst_xi=float(xi[j]), **_meta(cfg)))
    return reports


def run_boundary_convergence(cfg: ExperimentConfig) -> list[TestReport]:
    """Boundary-case experiment: rescaled-statistic ECF against the limit CF.

    The limit CF is evaluated from the martingale-route samples at the same
    time (gated) and from the fixed-point iteration pool (reported).  The
    distance sequence must be non-increasing within combined noise, and the
    final distance must clear the configured tolerance.
    """
    if cfg.initial_law is None:
        raise ConfigError("boundary experiment needs an initial law")
    model = cfg.weight_model
    law = cfg.initial_law
    tol = cfg.tolerances
    profile = spectral.find_gamma_star(model, tol=tol.spectral_tol)
    if abs(initial_laws.tail_index(law) - profile.gamma_star) > 1e-6:
        raise ConfigError(
            f"law tail index {initial_laws.tail_index(law):g} does not match "
            f"gamma_star {profile.gamma_star:g}; the rescaling would be degenerate")
    times = [t for t in cfg.times if t > 0.0]
    if not times:
        raise ConfigError("boundary experiment needs positive times")
    xi = cfg.xi_grid()

    chain_ecf = branching.readout_pool_chain(model, profile, times, cfg.replicates, cfg.seed,
                                             law=law, segment_time=cfg.segment_time,
                                             workers=cfg.workers, particle_cap=cfg.particle_cap,
                                             domain=streams.BOUNDARY_ECF)
    chain_mart = branching.readout_pool_chain(model, profile, times, cfg.replicates, cfg.seed,
                                              segment_time=cfg.segment_time, workers=cfg.workers,
                                              particle_cap=cfg.particle_cap,
                                              domain=streams.BOUNDARY_MART)
    d_iter = fixed_point.iterate_fixed_point(profile, model, cfg.pool_size, cfg.pool_iterations,
                                             streams.stream(cfg.seed, streams.FIXED_POINT))

    reports = []
    dists = []
    errs = []
    for t in times:
        s_t = t ** (1.0 / (2.0 * profile.gamma_star)) * chain_ecf[t].smoothing
        ecf = solver.empirical_cf(s_t, xi)
        d_mart = fixed_point.from_martingale(chain_mart[t].additive, t, profile)
        w_mart, w_se = fixed_point.limiting_cf(profile, law, d_mart, xi)
        diff = np.abs(ecf.values - w_mart)
        j = int(np.argmax(diff))
        dist = float(diff[j])
        err = float(np.max(ecf.stderr + w_se))
        dists.append(dist)
        errs.append(err)
        reports.append(_info(f"boundary_distance_t{t:g}", dist, ecf.n_samples,
                             stderr=err, worst_xi=float(xi[j]), **_meta(cfg)))
        w_it, _ = fixed_point.limiting_cf(profile, law, d_iter.values, xi)
        reports.append(_info(f"boundary_distance_iteration_route_t{t:g}",
                             float(np.max(np.abs(ecf.values - w_it))), ecf.n_samples, **_meta(cfg)))
    for i in range(len(times) - 1):
        slack = tol.mean_sigmas * (errs[i] + errs[i + 1])
        reports.append(_gate_threshold(f"boundary_ordering_t{times[i]:g}_to_t{times[i+1]:g}",
                                       dists[i + 1] - dists[i], slack, cfg.replicates, **_meta(cfg)))
    reports.append(_gate_threshold(f"boundary_final_t{times[-1]:g}", dists[-1], tol.final_tol,
                                   cfg.replicates, **_meta(cfg)))
    return reports


def suite_boundary(cfg: ExperimentConfig) -> list[TestReport]:
    return run_boundary_convergence(cfg)


SUITES: dict[str, Callable[[ExperimentConfig], list[TestReport]]] = {
    "yule": suite_yule,
    "martingale": suite_martingale,
    "fixed_point": suite_fixed_point,
    "boundary": suite_boundary,
    "ode_crosscheck": suite_ode_crosscheck,
}
