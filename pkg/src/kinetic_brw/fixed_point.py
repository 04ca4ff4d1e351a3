"""Samples of the boundary-case limit variable by two independent routes.

The limit variable is the almost-sure limit of the derivative martingale.
Route one rescales the additive martingale at a large finite time; route two
iterates the distributional fixed-point map

    D  ->  U^phi(gamma*) * sum_k A_k^gamma* D^(k),    U uniform(0,1),

through a resampled pool (population Monte Carlo).  The map preserves the
mean exactly: E U^phi = 1/(phi+1) and E sum_k A_k^gamma* = phi+1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import initial_laws
from .errors import ConfigError
from .initial_laws import InitialLaw
from .spectral import SpectralProfile, WeightModel, n_children, sample_weight_matrix, sqrt_time_factor

__all__ = [
    "FixedPointSample",
    "from_martingale",
    "martingale_route_constant",
    "iterate_fixed_point",
    "fixed_point_step",
    "limiting_cf",
]

_TAIL_MATCH_TOL = 1e-6


@dataclass
class FixedPointSample:
    """Nonnegative samples approximating the limit variable, with provenance."""

    values: np.ndarray
    route: str  # "martingale" | "fixed-point-iteration"
    meta: dict = field(default_factory=dict)
    mean_trace: np.ndarray | None = None
    std_trace: np.ndarray | None = None
    second_moment_trace: np.ndarray | None = None


def martingale_route_constant(profile: SpectralProfile) -> float:
    """Inverse of the constant linking sqrt(t) M_t(gamma*) to the limit variable."""
    return math.sqrt(math.pi * profile.gamma_star**2 * profile.phi_second_at / 2.0)


def from_martingale(m_values, t: float, profile: SpectralProfile):
    """Map additive-martingale values at time t to limit-variable approximants.

    sqrt(t) * M_t(gamma*) approaches the limit variable divided by
    ``martingale_route_constant``; this inverts that scaling.  Scalar in,
    scalar out.
    """
    if t < 0.0:
        raise ConfigError("time must be nonnegative")
    scaled = sqrt_time_factor(t) * np.asarray(m_values, dtype=float) * martingale_route_constant(profile)
    return float(scaled) if np.ndim(m_values) == 0 else scaled


def iterate_fixed_point(profile: SpectralProfile, model: WeightModel, pool_size: int,
                        iterations: int, rng: np.random.Generator) -> FixedPointSample:
    """Pool iteration of the fixed-point map from the constant-1 pool.

    Each slot draws its subtree values uniformly with replacement from the
    previous pool; U^phi is computed as exp(phi * log U) in the log domain.
    """
    if pool_size < 1000:
        raise ConfigError("pool size must be at least 1000")
    if iterations < 1:
        raise ConfigError("need at least one iteration")
    pool = np.ones(pool_size)
    trace = np.empty(iterations)
    stds = np.empty(iterations)
    m2 = np.empty(iterations)
    for it in range(iterations):
        pool = fixed_point_step(pool, profile, model, rng)
        trace[it] = pool.mean()
        stds[it] = pool.std(ddof=1)
        m2[it] = np.mean(pool**2)
    return FixedPointSample(
        values=pool,
        route="fixed-point-iteration",
        meta={"pool_size": pool_size, "iterations": iterations},
        mean_trace=trace,
        std_trace=stds,
        second_moment_trace=m2,
    )


def fixed_point_step(pool: np.ndarray, profile: SpectralProfile, model: WeightModel,
                     rng: np.random.Generator) -> np.ndarray:
    """One application of the fixed-point map to every pool slot."""
    pool_size = pool.shape[0]
    u = 1.0 - rng.random(pool_size)
    a = sample_weight_matrix(model, rng, pool_size)
    idx = rng.integers(0, pool_size, (pool_size, n_children(model)))
    return np.exp(profile.phi_at * np.log(u)) * np.sum(a**profile.gamma_star * pool[idx], axis=1)


def sum_weight_power_sq_moment(model: WeightModel, gamma: float,
                               rng: np.random.Generator | None = None,
                               n_draws: int = 1 << 20) -> float:
    """E[(sum_k A_k^gamma)^2]; exact for fixed weights, Monte Carlo otherwise."""
    from .spectral import Deterministic

    if isinstance(model, Deterministic):
        return float(sum(w**gamma for w in model.weights)) ** 2
    if rng is None:
        rng = np.random.default_rng(0)
    a = sample_weight_matrix(model, rng, n_draws)
    s = np.sum(a**gamma, axis=1)
    return float(np.mean(s * s))


def mean_band_trace(sample: FixedPointSample, profile: SpectralProfile,
                    model: WeightModel, phi_2gamma: float) -> np.ndarray:
    """Standard error of the pool mean around 1 at each iteration.

    The pool mean is a martingale; its variance accumulates the exact
    conditional per-slot variance of the map,

        Var(slot | pool) = E[U^2phi] * ((phi(2g)+1) m2 + (S2 - (phi(2g)+1)) mean^2) - mean^2,

    with m2/mean the previous pool moments and S2 = E[(sum_k A_k^gamma)^2].
    Infinite when 2*phi(gamma*)+1 <= 0 (the band is then vacuous, honestly).
    """
    two_phi_p1 = 2.0 * profile.phi_at + 1.0
    if two_phi_p1 <= 0.0:
        return np.full_like(sample.mean_trace, np.inf)
    eu2 = 1.0 / two_phi_p1
    ea2_sum = phi_2gamma + 1.0
    s2 = sum_weight_power_sq_moment(model, profile.gamma_star)
    cross = s2 - ea2_sum
    pool_size = sample.meta["pool_size"]
    means = np.concatenate([[1.0], sample.mean_trace[:-1]])
    m2s = np.concatenate([[1.0], sample.second_moment_trace[:-1]])
    var_slot = eu2 * (ea2_sum * m2s + cross * means**2) - means**2
    return np.sqrt(np.cumsum(np.maximum(var_slot, 0.0) / pool_size))


def limiting_cf(profile: SpectralProfile, law: InitialLaw, values: np.ndarray, xi,
                chunk: int = 262144) -> tuple[np.ndarray, np.ndarray]:
    """Limit characteristic function E g(xi * c_gamma * D^(1/gamma*)).

    ``g`` is the stable CF attracting the initial law; the expectation is the
    Monte Carlo average over the supplied limit-variable samples.  Returns
    (values, stderr) on the xi grid, scalars for scalar xi.
    """
    if abs(initial_laws.tail_index(law) - profile.gamma_star) > _TAIL_MATCH_TOL:
        raise ConfigError("law tail index does not match gamma_star")
    d = np.asarray(values, dtype=float)
    if d.size == 0:
        raise ConfigError("empty sample set")
    xi_arr = np.atleast_1d(np.asarray(xi, dtype=float))
    scale = profile.c_gamma * d ** (1.0 / profile.gamma_star)
    sum_re = np.zeros(xi_arr.size)
    sum_im = np.zeros(xi_arr.size)
    sum_re2 = np.zeros(xi_arr.size)
    sum_im2 = np.zeros(xi_arr.size)
    # chunk over samples to bound the (xi, samples) work matrix
    step = max(1, chunk // max(1, xi_arr.size))
    for start in range(0, d.size, step):
        block = scale[start:start + step]
        args = np.outer(xi_arr, block)
        g = initial_laws.stable_cf(law, args.ravel()).reshape(args.shape)
        sum_re += g.real.sum(axis=1)
        sum_im += g.imag.sum(axis=1)
        sum_re2 += (g.real**2).sum(axis=1)
        sum_im2 += (g.imag**2).sum(axis=1)
    n = d.size
    mean = (sum_re + 1j * sum_im) / n
    if n > 1:
        var_re = np.maximum(sum_re2 - n * (mean.real**2), 0.0) / (n - 1)
        var_im = np.maximum(sum_im2 - n * (mean.imag**2), 0.0) / (n - 1)
        stderr = np.sqrt((var_re + var_im) / n)
    else:
        stderr = np.zeros(xi_arr.size)
    if np.ndim(xi) == 0:
        return complex(mean[0]), float(stderr[0])
    return mean, stderr
