"""Acceptance gates.

Each test runs one acceptance criterion at its stated scale and tolerance and
prints a single PASS/FAIL line.  Run with

    pytest tests/test_acceptance.py -v -s

The module is heavier than the unit tests (a few minutes total); the jit
kernel is warmed by a session fixture so compile time never counts against a
runtime budget.
"""
import json
import math
import time

import numpy as np
import pytest

from kinetic_brw import branching, cli, initial_laws, spectral, streams, verify
from kinetic_brw.config import ExperimentConfig

FLAGSHIP_P = 1.0 + math.sqrt(2.0)
SEED = 1729


def _line(num: int, ok: bool, detail: str) -> None:
    print(f"criterion {num}: {'PASS' if ok else 'FAIL'} - {detail}")


@pytest.fixture(scope="module")
def model():
    return spectral.PowerUniform(2, FLAGSHIP_P)


@pytest.fixture(scope="module")
def profile(model):
    return spectral.find_gamma_star(model, tol=1e-10)


# -- criterion 1: closed-form population laws at t=1, 1e5 replicates, < 30 s --


def test_criterion_1_yule_laws(model):
    t0 = time.perf_counter()
    stats = branching.run_replicates(model, (1.0,), 100_000, SEED, workers=1,
                                     domain=streams.VERIFY)
    nus = stats.split_count[:, 0]
    y = stats.population[:, 0]

    identity_ok = bool(np.all(y == nus + 1))
    counts = np.bincount(nus)
    chi_stat, chi_p = verify.chi_square_pmf(counts, lambda k: branching.split_count_pmf(2, 1.0, k))
    chi_ok = chi_p >= 1e-3

    pgf_ok = True
    for s in (0.3, 0.7):
        v = s ** y.astype(float)
        se = v.std(ddof=1) / math.sqrt(v.size)
        target = branching.population_pgf(2, 1.0, s).real
        pgf_ok &= abs(v.mean() - target) <= 4.0 * se
    elapsed = time.perf_counter() - t0

    ok = identity_ok and chi_ok and pgf_ok and elapsed < 30.0
    _line(1, ok, f"identity={identity_ok} chi2 p={chi_p:.3g} pgf={pgf_ok} runtime={elapsed:.1f}s")
    assert identity_ok and chi_ok and pgf_ok
    assert elapsed < 30.0


# -- criteria 2+3 share one replicate run (1e5, t in {1,5}, 4 workers) --


@pytest.fixture(scope="module")
def martingale_run(model, profile):
    t0 = time.perf_counter()
    stats = branching.run_replicates(model, (1.0, 5.0), 100_000, SEED,
                                     profile=profile, gammas=(0.5, 1.0, 2.0),
                                     workers=4, domain=streams.VERIFY)
    return stats, time.perf_counter() - t0


def test_criterion_2_martingale_mean_one(martingale_run):
    stats, elapsed = martingale_run
    ok = True
    worst = 0.0
    for ci, t in enumerate(stats.checkpoints):
        for gi, g in enumerate((0.5, 1.0, 2.0)):
            m = stats.additive[:, ci, gi]
            se = m.std(ddof=1) / math.sqrt(m.size)
            z = abs(m.mean() - 1.0) / se
            worst = max(worst, z)
            ok &= z <= 4.0
    ok_time = elapsed < 120.0
    _line(2, ok and ok_time, f"max |mean-1|/stderr = {worst:.2f} (gate 4), runtime={elapsed:.1f}s on 4 workers")
    assert ok
    assert ok_time


def test_criterion_3_moment_lemma(martingale_run, model, profile):
    stats, _ = martingale_run
    # re-verify the curvature constant by finite differences before use
    h = 1e-4
    fd2 = (spectral.phi_value(model, profile.gamma_star + h)
           - 2.0 * spectral.phi_value(model, profile.gamma_star)
           + spectral.phi_value(model, profile.gamma_star - h)) / h**2
    assert abs(fd2 - profile.phi_second_at) <= 1e-6
    assert profile.phi_second_at == pytest.approx(0.585786, abs=5e-7)

    ok = True
    zs = []
    for ci, t in enumerate(stats.checkpoints):
        d = stats.derivative[:, ci]
        se = d.std(ddof=1) / math.sqrt(d.size)
        z_d = abs(d.mean()) / se
        s2 = stats.second_moment[:, ci]
        se2 = s2.std(ddof=1) / math.sqrt(s2.size)
        z_s2 = abs(s2.mean() - float(t) * profile.phi_second_at) / se2
        zs.append((float(t), z_d, z_s2))
        ok &= z_d <= 4.0 and z_s2 <= 4.0
    detail = " ".join(f"t={t:g}: zD={zd:.2f} zS2={zs2:.2f}" for t, zd, zs2 in zs)
    _line(3, ok, f"{detail} (gate 4); phi'' fd check |{fd2:.9f} - {profile.phi_second_at:.9f}| <= 1e-6")
    assert ok


# -- criterion 4: max-weight medians fall over t in {5, 10, 20}, 1e4 each --


def test_criterion_4_max_weight_decrease(model, profile):
    pools = branching.readout_pool_chain(model, profile, (5.0, 10.0, 20.0), 10_000, SEED,
                                         domain=streams.MAX_DECREASE)
    meds = {}
    cis = {}
    for i, t in enumerate((5.0, 10.0, 20.0)):
        vals = math.sqrt(t) * pools[t].max_norm
        meds[t] = float(np.median(vals))
        cis[t] = verify.bootstrap_median_ci(vals, streams.stream(SEED, streams.MAX_DECREASE, 999, i))
    decreasing = meds[5.0] > meds[10.0] > meds[20.0]
    separated = cis[20.0][1] < cis[5.0][0]
    _line(4, decreasing and separated,
          f"medians {meds[5.0]:.4f} > {meds[10.0]:.4f} > {meds[20.0]:.4f}: {decreasing}; "
          f"95% CIs t=5 {cis[5.0]} vs t=20 {cis[20.0]} disjoint: {separated}")
    assert decreasing
    assert separated


# -- criterion 5: fixed-point pool self-consistency, pool 1e5 x 50 --


def test_criterion_5_fixed_point(model, profile):
    cfg = ExperimentConfig(weight_model=model, pool_size=100_000, pool_iterations=50, seed=SEED)
    reports = {r.name: r for r in verify.suite_fixed_point(cfg)}
    ks = reports["fixed_point_self_consistency"]
    mean = reports["fixed_point_mean_trace"]
    ok = ks.passed and mean.passed
    _line(5, ok, f"KS p={ks.p_value:.3g} (alpha 1e-3); mean-trace max dev {mean.statistic:.2f} sigma (gate 4)")
    assert ks.passed
    assert mean.passed


# -- criterion 6: Monte Carlo vs direct CF integration, < 5 min --


def test_criterion_6_ode_crosscheck():
    cfg = ExperimentConfig(
        weight_model=spectral.Deterministic((0.3, 0.3)),
        initial_law=initial_laws.FiniteVarianceNormal(1.0),
        times=(0.5, 1.0, 2.0),
        replicates=100_000,
        xi_min=-2.0, xi_max=2.0, xi_points=401,
        seed=SEED,
    )
    t0 = time.perf_counter()
    reports = verify.suite_ode_crosscheck(cfg)
    elapsed = time.perf_counter() - t0
    ok = all(r.passed for r in reports) and elapsed < 300.0
    detail = " ".join(f"{r.name.split('_t')[-1]}: excess={r.statistic:.2e}" for r in reports)
    _line(6, ok, f"max (|ecf-ode| - 4 stderr) per t: {detail} (gate 1e-3); runtime={elapsed:.1f}s")
    for r in reports:
        assert r.passed, r.name
    assert elapsed < 300.0


# -- criterion 7: boundary-case CF convergence, t in {10, 20, 30}, 1e5 each --


def test_criterion_7_boundary_convergence(model):
    cfg = ExperimentConfig(
        weight_model=model,
        initial_law=initial_laws.FiniteMean(1.0, "degenerate"),
        times=(10.0, 20.0, 30.0),
        replicates=100_000,
        xi_min=-2.0, xi_max=2.0, xi_points=81,
        pool_size=100_000,
        pool_iterations=50,
        seed=SEED,
    )
    reports = {r.name: r for r in verify.run_boundary_convergence(cfg)}
    final = reports["boundary_final_t30"]
    orderings = [reports[n] for n in ("boundary_ordering_t10_to_t20", "boundary_ordering_t20_to_t30")]
    dists = [reports[f"boundary_distance_t{t:g}"].statistic for t in (10.0, 20.0, 30.0)]
    ok = final.passed and all(o.passed for o in orderings)
    _line(7, ok, f"sup |ecf - limit cf| = {dists[0]:.4f}, {dists[1]:.4f}, {dists[2]:.4f} at t=10,20,30; "
          f"final <= 0.1: {final.passed}; non-increasing within noise: {all(o.passed for o in orderings)}")
    assert final.passed
    for o in orderings:
        assert o.passed, o.name


# -- criterion 8: exact spectral constants --


def test_criterion_8_spectral_exactness():
    worst_root = 0.0
    worst_tan = 0.0
    for p in (0.5, 1.0, FLAGSHIP_P, 3.0):
        prof = spectral.find_gamma_star(spectral.PowerUniform(2, p), tol=1e-10)
        worst_root = max(worst_root, abs(prof.gamma_star - (1.0 + math.sqrt(2.0)) / p))
        worst_tan = max(worst_tan, abs(prof.phi_prime_at - prof.mu_at))
    exact_zero = all(
        spectral.phi_value(m, 0.0) == float(spectral.n_children(m) - 1)
        for m in (spectral.PowerUniform(2, FLAGSHIP_P), spectral.Deterministic((0.3, 0.3)),
                  spectral.Deterministic((0.2, 0.4, 0.9)), spectral.KacAngle())
    )
    ok = worst_root <= 1e-9 and worst_tan <= 1e-8 and exact_zero
    _line(8, ok, f"max |gamma-(1+sqrt2)/p| = {worst_root:.2e} (gate 1e-9); "
          f"max |phi'-mu| = {worst_tan:.2e} (gate 1e-8); phi(0)=N-1 exact: {exact_zero}")
    assert worst_root <= 1e-9
    assert worst_tan <= 1e-8
    assert exact_zero


# -- criterion 9: byte-identical outputs across worker counts --


def test_criterion_9_worker_determinism(tmp_path):
    cfg = {
        "weight_model": {"type": "power_uniform", "n": 2, "p": FLAGSHIP_P},
        "times": [1.0],
        "replicates": 100_000,
        "seed": SEED,
        "out_dir": str(tmp_path),
    }
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    blobs = {}
    for w in (1, 4, 8):
        rc = cli.main(["verify", "yule", "--config", str(path),
                       "--workers", str(w), "--label", f"w{w}"])
        assert rc == 0
        blobs[w] = (tmp_path / f"verify_yule_w{w}.csv").read_bytes()
    ok = blobs[1] == blobs[4] == blobs[8]
    _line(9, ok, f"verify-suite CSV bytes identical across workers 1/4/8: {ok} "
          f"({len(blobs[1])} bytes)")
    assert ok
