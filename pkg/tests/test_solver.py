import math

import numpy as np
import pytest

from kinetic_brw import initial_laws, solver, spectral, streams
from kinetic_brw.branching import PopulationState, run_replicates
from kinetic_brw.errors import ConfigError
from kinetic_brw.solver import empirical_cf, ode_reference_cf, rescaled_sample, smoothing_sample
from kinetic_brw.spectral import Deterministic, KacAngle


def _sym_grid(hi, n_half):
    half = np.linspace(hi / n_half, hi, n_half)
    return np.concatenate([-half[::-1], [0.0], half])


def test_empirical_cf_trivials():
    zeros = np.zeros(100)
    est = empirical_cf(zeros, [0.0, 0.5, 1.0])
    assert np.allclose(est.values, 1.0)
    assert np.allclose(est.stderr, 0.0)
    assert est.n_samples == 100
    with pytest.raises(ConfigError):
        empirical_cf(np.array([1.0]), [0.0])


def test_empirical_cf_zero_frequency_exact():
    rng = streams.stream(1, 0)
    est = empirical_cf(rng.standard_normal(5000), [0.0, 1.0])
    assert est.values[0] == 1.0 + 0.0j
    assert est.stderr[0] == 0.0


def test_empirical_cf_normal_oracle():
    rng = streams.stream(2, 0)
    est = empirical_cf(rng.standard_normal(10**6), [1.0])
    assert abs(est.values[0] - math.exp(-0.5)) < 4.0 * est.stderr[0]


def test_empirical_cf_linearity_exact():
    rng = streams.stream(3, 0)
    s = rng.standard_normal(4000)
    c = 2.5
    a = empirical_cf(c * s, [0.7])
    b = empirical_cf(s, [0.7 * c])
    # identical up to float multiplication associativity in the phase
    assert abs(a.values[0] - b.values[0]) < 1e-14


def test_empirical_cf_hermitian_on_symmetric_grid():
    rng = streams.stream(4, 0)
    s = rng.standard_exponential(4000)
    grid = _sym_grid(2.0, 40)
    est = empirical_cf(s, grid)
    assert np.array_equal(est.values[::-1], np.conj(est.values))
    assert np.array_equal(est.stderr[::-1], est.stderr)


def test_smoothing_sample_single_particle():
    state = PopulationState(time=0.0, log_weights=np.zeros(1), split_count=0)
    law = initial_laws.FiniteMean(0.3, "exponential")
    x_direct = initial_laws.sample(law, streams.stream(6, 0), 1)[0]
    assert smoothing_sample(state, law, 1.0, streams.stream(6, 0)) == pytest.approx(x_direct, rel=1e-15)


def test_smoothing_sample_degenerate_is_weight_sum():
    state = PopulationState(time=1.0, log_weights=np.array([-0.1, -0.7, -1.3]), split_count=1)
    law = initial_laws.FiniteMean(1.0, "degenerate")
    assert smoothing_sample(state, law, 1.0, streams.stream(6, 1)) == pytest.approx(
        math.fsum(np.exp(state.log_weights)), rel=1e-14)
    assert smoothing_sample(state, law, 2.0, streams.stream(6, 2)) == pytest.approx(
        math.fsum(np.exp(2.0 * state.log_weights)), rel=1e-14)


def test_smoothing_mean_against_moment_identity():
    # E sum e^{z} X = m0 exp(phi(1) t)
    model = Deterministic((0.3, 0.3))
    law = initial_laws.FiniteMean(1.0, "exponential")
    stats = run_replicates(model, (1.0,), 20000, 7, law=law, domain=streams.SMOOTHING)
    sm = stats.smoothing[:, 0]
    se = sm.std(ddof=1) / math.sqrt(sm.size)
    assert abs(sm.mean() - math.exp(-0.4)) < 4.0 * se


def test_rescaled_equals_scaling_times_smoothing(flagship_model, flagship_profile):
    from kinetic_brw.branching import BranchingConfig, simulate_population

    cfg = BranchingConfig(model=flagship_model, horizon=3.0, checkpoints=(3.0,))
    state = simulate_population(cfg, streams.stream(8, 0))[0]
    law = initial_laws.FiniteMean(1.0, "exponential")
    a = rescaled_sample(state, flagship_profile, law, streams.stream(8, 1))
    b = spectral.scaling_factor(flagship_profile, 3.0) * smoothing_sample(
        state, law, 1.0, streams.stream(8, 1))
    assert a == pytest.approx(b, rel=1e-15)


def test_rescaled_tail_mismatch(flagship_profile):
    state = PopulationState(time=1.0, log_weights=np.zeros(1), split_count=0)
    with pytest.raises(ConfigError):
        rescaled_sample(state, flagship_profile, initial_laws.FiniteVarianceNormal(1.0),
                        streams.stream(8, 2))


def test_rescaled_replicates_identity(flagship_model, flagship_profile):
    law = initial_laws.FiniteMean(1.0, "degenerate")
    got = solver.rescaled_replicates(flagship_model, flagship_profile, law, (2.0,), 500, 99)
    stats = run_replicates(flagship_model, (2.0,), 500, 99, law=law, domain=streams.SMOOTHING)
    expect = spectral.scaling_factor(flagship_profile, 2.0) * stats.smoothing[:, 0]
    assert np.allclose(got[2.0], expect, rtol=1e-14)


# --- deterministic CF integration ---


def test_ode_initial_condition_exact():
    law = initial_laws.FiniteVarianceNormal(1.0)
    xi = np.linspace(-2.0, 2.0, 201)
    out = ode_reference_cf(Deterministic((0.3, 0.3)), law, 0.0, xi)
    assert np.allclose(out, initial_laws.exact_cf(law, xi), rtol=0, atol=1e-14)


def test_ode_modulus_bounded():
    law = initial_laws.FiniteMean(1.0, "degenerate")
    xi = np.linspace(-2.0, 2.0, 201)
    out = ode_reference_cf(Deterministic((0.5, 0.9)), law, 2.0, xi)
    assert np.max(np.abs(out)) <= 1.0 + 1e-6


@pytest.mark.parametrize("law", [
    initial_laws.FiniteVarianceNormal(1.0),
    initial_laws.FiniteMean(1.0, "exponential"),
    initial_laws.CauchyLike(0.3, 0.0),
])
def test_ode_matches_monte_carlo(law):
    model = Deterministic((0.3, 0.3))
    xi = np.linspace(-2.0, 2.0, 161)
    stats = run_replicates(model, (1.0,), 20000, 15, law=law, domain=streams.SMOOTHING)
    est = empirical_cf(stats.smoothing[:, 0], xi)
    # the Cauchy cf has a kink at 0, so the interpolation budget is looser
    tol = 1e-3 if isinstance(law, initial_laws.CauchyLike) else 1e-6
    ref = ode_reference_cf(model, law, 1.0, xi, coarse_tol=tol)
    assert np.all(np.abs(est.values - ref) <= 4.0 * est.stderr + 2e-3)


def test_ode_kac_angle_matches_monte_carlo():
    law = initial_laws.FiniteVarianceNormal(1.0)
    model = KacAngle()
    xi = np.linspace(-2.0, 2.0, 101)
    stats = run_replicates(model, (0.5,), 20000, 16, law=law, domain=streams.SMOOTHING)
    est = empirical_cf(stats.smoothing[:, 0], xi)
    ref = ode_reference_cf(model, law, 0.5, xi)
    assert np.all(np.abs(est.values - ref) <= 4.0 * est.stderr + 2e-3)


def test_ode_rejects_bad_configs():
    law = initial_laws.FiniteVarianceNormal(1.0)
    good_grid = np.linspace(-2.0, 2.0, 201)
    with pytest.raises(ConfigError):
        ode_reference_cf(Deterministic((0.5, 1.2)), law, 1.0, good_grid)
    with pytest.raises(ConfigError):
        ode_reference_cf(spectral.PowerUniform(2, 1.0), law, 1.0, good_grid)
    with pytest.raises(ConfigError):
        ode_reference_cf(Deterministic((0.3, 0.3)), law, 1.0, np.linspace(-1.0, 2.0, 101))
    with pytest.raises(ConfigError):
        ode_reference_cf(Deterministic((0.3, 0.3)), law, 1.0, np.concatenate([[-3.0], np.linspace(-2, 3, 30)]))


def test_ode_grid_too_coarse():
    # wiggly initial cf + wide spacing defeats the cubic stencil
    law = initial_laws.FiniteVarianceTwoPoint(8.0)
    with pytest.raises(ConfigError, match="coarse"):
        ode_reference_cf(Deterministic((0.3, 0.3)), law, 0.5, np.linspace(-2.0, 2.0, 9))


def test_ecf_estimate_combined_stderr():
    rng = streams.stream(17, 0)
    est = empirical_cf(rng.standard_normal(1000), [0.4, 1.1])
    assert np.allclose(est.stderr, np.hypot(est.stderr_re, est.stderr_im))
