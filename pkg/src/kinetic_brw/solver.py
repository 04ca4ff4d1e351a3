"""Probabilistic solution samples, empirical characteristic functions, and an
independent ODE integrator for cross-checking.

The solution of the evolution equation at time t is the law of the weighted
sum  sum_k exp(z_k) X_k  over the particles of a branching random walk, with
X_k fresh independent draws from the initial law.  ``smoothing_sample``
realizes one such draw, ``rescaled_sample`` applies the boundary-case
normalization on top, and ``empirical_cf`` turns sample vectors into CF
estimates with per-point standard errors.

``ode_reference_cf`` integrates the evolution equation for the characteristic
function directly (classical RK4 on a uniform frequency grid, cubic
interpolation for the contracted arguments) and serves as the deterministic
oracle for the Monte Carlo route.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import initial_laws, streams
from .branching import PopulationState, run_replicates
from .errors import ConfigError, DomainError
from .initial_laws import InitialLaw
from .spectral import Deterministic, KacAngle, SpectralProfile, WeightModel, scaling_factor

__all__ = [
    "EcfEstimate",
    "empirical_cf",
    "smoothing_sample",
    "rescaled_sample",
    "rescaled_replicates",
    "ode_reference_cf",
]

_TAIL_MATCH_TOL = 1e-6


@dataclass
class EcfEstimate:
    """Empirical characteristic function on a frequency grid.

    ``stderr_re``/``stderr_im`` are the component-wise standard errors; the
    combined ``stderr`` adds them in quadrature.
    """

    xi: np.ndarray
    values: np.ndarray
    stderr_re: np.ndarray
    stderr_im: np.ndarray
    n_samples: int

    @property
    def stderr(self) -> np.ndarray:
        return np.hypot(self.stderr_re, self.stderr_im)


def empirical_cf(samples: np.ndarray, xi_grid: Sequence[float], chunk: int = 1 << 22) -> EcfEstimate:
    """Monte Carlo estimate of E exp(i xi S) with per-point standard errors.

    ``chunk`` bounds the size of the (grid x samples) work matrix.
    """
    s = np.asarray(samples, dtype=float)
    if s.size < 2:
        raise ConfigError("need at least two samples")
    xi = np.asarray(xi_grid, dtype=float)
    chunk = max(1, chunk // max(1, xi.size))
    sum_c = np.zeros(xi.size)
    sum_c2 = np.zeros(xi.size)
    sum_s = np.zeros(xi.size)
    sum_s2 = np.zeros(xi.size)
    for start in range(0, s.size, chunk):
        block = s[start:start + chunk]
        phase = np.outer(xi, block)
        c = np.cos(phase)
        sn = np.sin(phase)
        sum_c += c.sum(axis=1)
        sum_c2 += (c * c).sum(axis=1)
        sum_s += sn.sum(axis=1)
        sum_s2 += (sn * sn).sum(axis=1)
    n = s.size
    mean_c = sum_c / n
    mean_s = sum_s / n
    var_c = np.maximum(sum_c2 - n * mean_c**2, 0.0) / (n - 1)
    var_s = np.maximum(sum_s2 - n * mean_s**2, 0.0) / (n - 1)
    return EcfEstimate(
        xi=xi,
        values=mean_c + 1j * mean_s,
        stderr_re=np.sqrt(var_c / n),
        stderr_im=np.sqrt(var_s / n),
        n_samples=n,
    )


def smoothing_sample(state: PopulationState, law: InitialLaw, gamma: float,
                     rng: np.random.Generator) -> float:
    """One draw of sum_k exp(gamma z_k) X_k with fresh independent X."""
    x = initial_laws.sample(law, rng, state.size)
    return math.fsum(np.exp(gamma * state.log_weights) * x)


def rescaled_sample(state: PopulationState, profile: SpectralProfile, law: InitialLaw,
                    rng: np.random.Generator) -> float:
    """Boundary-case statistic: scaling_factor(t) * smoothing_sample(gamma=1).

    The law's tail index must equal gamma_star; the rescaling is degenerate
    otherwise.
    """
    if abs(initial_laws.tail_index(law) - profile.gamma_star) > _TAIL_MATCH_TOL:
        raise ConfigError(
            f"law tail index {initial_laws.tail_index(law)} does not match gamma_star {profile.gamma_star}")
    return scaling_factor(profile, state.time) * smoothing_sample(state, law, 1.0, rng)


def rescaled_replicates(model: WeightModel, profile: SpectralProfile, law: InitialLaw,
                        times: Sequence[float], n_samples: int, master_seed: int, *,
                        workers: int = 1, particle_cap: int | None = None,
                        domain: int = streams.SMOOTHING) -> dict[float, np.ndarray]:
    """Independent (trajectory, X) rescaled samples at each requested time."""
    if abs(initial_laws.tail_index(law) - profile.gamma_star) > _TAIL_MATCH_TOL:
        raise ConfigError("law tail index does not match gamma_star")
    kwargs = {} if particle_cap is None else {"particle_cap": particle_cap}
    stats = run_replicates(model, sorted(times), n_samples, master_seed, law=law,
                           workers=workers, domain=domain, **kwargs)
    out = {}
    for ci, t in enumerate(stats.checkpoints):
        ok = ~np.isnan(stats.smoothing[:, ci])
        out[float(t)] = scaling_factor(profile, float(t)) * stats.smoothing[ok, ci]
    return out


# ---------------------------------------------------------------------------
# Deterministic reference: RK4 integration of the CF evolution equation.
# ---------------------------------------------------------------------------


def _cubic_plan(grid: np.ndarray, queries: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """4-point Lagrange interpolation stencils for fixed query points."""
    h = grid[1] - grid[0]
    j = np.floor((queries - grid[0]) / h).astype(np.int64)
    j = np.clip(j, 1, grid.size - 3)
    u = (queries - grid[j]) / h
    w = np.empty((4, queries.size))
    w[0] = -u * (u - 1.0) * (u - 2.0) / 6.0
    w[1] = (u + 1.0) * (u - 1.0) * (u - 2.0) / 2.0
    w[2] = -(u + 1.0) * u * (u - 2.0) / 2.0
    w[3] = (u + 1.0) * u * (u - 1.0) / 6.0
    idx = np.stack([j - 1, j, j + 1, j + 2])
    return idx, w


def _interp(values: np.ndarray, plan: tuple[np.ndarray, np.ndarray]) -> np.ndarray:
    idx, w = plan
    return (values[idx] * w).sum(axis=0)


def _gauss_legendre_quarter(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    a, b = 0.0, math.pi / 2.0
    return 0.5 * (b - a) * x + 0.5 * (a + b), 0.5 * (b - a) * w


def ode_reference_cf(model: WeightModel, law: InitialLaw, t: float,
                     xi_grid: Sequence[float], *, max_step: float = 0.01,
                     gl_points: int = 64, coarse_tol: float = 1e-6) -> np.ndarray:
    """Integrate the CF evolution equation to time t on the given grid.

    Supported weight models keep every contracted argument a_i*xi inside the
    working grid: fixed weight vectors with max a_i <= 1, and the folded
    angle pair (weights in [0,1] by construction; the angle average is done
    with Gauss-Legendre quadrature).  The working grid spans twice the
    requested range so edge stencils stay accurate.
    """
    xi = np.asarray(xi_grid, dtype=float)
    if xi.size < 8:
        raise ConfigError("frequency grid too small")
    d = np.diff(xi)
    if not np.allclose(d, d[0], rtol=1e-9, atol=1e-12):
        raise ConfigError("frequency grid must be uniform")
    if abs(xi[0] + xi[-1]) > 1e-9 * max(1.0, xi[-1]):
        raise ConfigError("frequency grid must be symmetric about 0")
    if t < 0.0:
        raise DomainError("time must be nonnegative")

    if isinstance(model, Deterministic):
        if max(model.weights) > 1.0:
            raise ConfigError("ODE reference needs deterministic weights <= 1")
        contractions = [np.asarray(model.weights, dtype=float)]
        angle_weights = None
    elif isinstance(model, KacAngle):
        nodes, quad_w = _gauss_legendre_quarter(gl_points)
        contractions = [np.array([math.cos(th), math.sin(th)]) for th in nodes]
        angle_weights = quad_w * (2.0 / math.pi)
    else:
        raise ConfigError("ODE reference supports deterministic or folded-angle weight models")

    n = xi.size
    grid = np.linspace(2.0 * xi[0], 2.0 * xi[-1], 2 * (n - 1) + 1)
    q0 = int(round((xi[0] - grid[0]) / (grid[1] - grid[0])))
    assert np.allclose(grid[q0:q0 + n], xi)

    psi = np.asarray(initial_laws.exact_cf(law, grid), dtype=complex)

    # Interpolation-error diagnostic: predict the odd grid nodes of the
    # initial condition from the even ones; cubic error at full resolution
    # is ~1/16 of that.
    even = grid[::2]
    plan_diag = _cubic_plan(even, grid[1:-1:2])
    pred = _interp(psi[::2], plan_diag)
    err = float(np.max(np.abs(pred - psi[1:-1:2]))) / 16.0
    if err > coarse_tol:
        raise ConfigError(f"frequency grid too coarse: estimated interpolation error {err:.3g}")

    plans = [[_cubic_plan(grid, a * grid) for a in vec] for vec in contractions]

    def qhat(values: np.ndarray) -> np.ndarray:
        if angle_weights is None:
            prod = np.ones_like(values)
            for plan in plans[0]:
                prod = prod * _interp(values, plan)
            return prod
        acc = np.zeros_like(values)
        for wq, planpair in zip(angle_weights, plans):
            term = _interp(values, planpair[0]) * _interp(values, planpair[1])
            acc += wq * term
        return acc

    def rhs(values: np.ndarray) -> np.ndarray:
        return qhat(values) - values

    if t > 0.0:
        n_steps = max(1, math.ceil(t / max_step))
        h = t / n_steps
        for _ in range(n_steps):
            k1 = rhs(psi)
            k2 = rhs(psi + 0.5 * h * k1)
            k3 = rhs(psi + 0.5 * h * k2)
            k4 = rhs(psi + h * k3)
            psi = psi + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    return psi[q0:q0 + n].copy()
