"""Reproduction-law weight models and their moment functional.

A weight model describes the random vector of N positive factors that a
splitting particle hands to its children.  Everything downstream is driven
by the moment functional

    phi(s) = E[A_1^s + ... + A_N^s] - 1,

smooth and strictly convex on [0, s_inf).  The spectral rate mu(s) = phi(s)/s
has a unique interior minimizer gamma_star; there the tangency
mu(gamma_star) = phi'(gamma_star) holds, and the curvature phi''(gamma_star)
fixes the constants of the boundary-case normalization, collected in
``SpectralProfile``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate, special

from .errors import ConfigError, DomainError, NoMinimizerError

__all__ = [
    "Deterministic",
    "PowerUniform",
    "KacAngle",
    "CustomModel",
    "SpectralProfile",
    "n_children",
    "s_infinity",
    "validate_model",
    "phi_value",
    "phi_derivatives",
    "phi_quadrature",
    "find_gamma_star",
    "scaling_factor",
    "sqrt_time_factor",
    "sample_weight_matrix",
    "kernel_spec",
]


@dataclass(frozen=True)
class Deterministic:
    """Fixed positive weight vector (a_1, ..., a_N)."""

    weights: tuple[float, ...]


@dataclass(frozen=True)
class PowerUniform:
    """N independent weights A_i = U_i^p with U_i uniform on (0, 1)."""

    n: int
    p: float


@dataclass(frozen=True)
class KacAngle:
    """Weight pair (|cos T|, |sin T|) with T uniform on [0, 2*pi)."""


@dataclass(frozen=True)
class CustomModel:
    """Weights h_i(U) on (0,1)-uniform input; one shared U or independent U_i.

    ``transforms`` must map (0,1) to strictly positive reals.  ``s_inf`` is
    the declared divergence abscissa of E[sum A_i^s].
    """

    n: int
    transforms: tuple[Callable[[np.ndarray], np.ndarray], ...]
    shared_uniform: bool = False
    s_inf: float = math.inf


WeightModel = Deterministic | PowerUniform | KacAngle | CustomModel


@dataclass(frozen=True)
class SpectralProfile:
    """Constants of the weight model at the spectral minimizer."""

    gamma_star: float
    phi_at: float
    phi_prime_at: float
    phi_second_at: float
    mu_at: float
    c_gamma: float
    s_infinity: float


def n_children(model: WeightModel) -> int:
    if isinstance(model, Deterministic):
        return len(model.weights)
    if isinstance(model, PowerUniform):
        return model.n
    if isinstance(model, KacAngle):
        return 2
    if isinstance(model, CustomModel):
        return model.n
    raise ConfigError(f"unknown weight model {model!r}")


def s_infinity(model: WeightModel) -> float:
    if isinstance(model, CustomModel):
        return model.s_inf
    return math.inf


def validate_model(model: WeightModel) -> None:
    n = n_children(model)
    if n < 2:
        raise ConfigError("weight models need at least 2 children")
    if isinstance(model, Deterministic):
        if any(not (w > 0.0) or not math.isfinite(w) for w in model.weights):
            raise ConfigError("deterministic weights must be finite and positive")
    elif isinstance(model, PowerUniform):
        if not (model.p > 0.0):
            raise ConfigError("power exponent must be positive")
    elif isinstance(model, CustomModel):
        if len(model.transforms) != n:
            raise ConfigError("custom model needs one transform per child")
        if not (model.s_inf > 0.0):
            raise ConfigError("custom model must declare s_inf > 0")


def phi_value(model: WeightModel, s: float) -> float:
    """phi(s) = E[sum_i A_i^s] - 1, +inf at and beyond the divergence abscissa."""
    validate_model(model)
    if s < 0.0:
        raise DomainError("phi is defined for s >= 0")
    if s >= s_infinity(model):
        return math.inf
    if s == 0.0:
        return float(n_children(model) - 1)  # A_i^0 = 1 for every model
    if isinstance(model, Deterministic):
        return math.fsum(w**s for w in model.weights) - 1.0
    if isinstance(model, PowerUniform):
        return model.n / (model.p * s + 1.0) - 1.0
    if isinstance(model, KacAngle):
        # E|cos T|^s = Gamma((s+1)/2) / (sqrt(pi) Gamma(s/2+1)), same for |sin T|
        return 2.0 * math.exp(special.gammaln((s + 1.0) / 2.0) - special.gammaln(s / 2.0 + 1.0)) / math.sqrt(math.pi) - 1.0
    return phi_quadrature(model, s)


def phi_quadrature(model: WeightModel, s: float, rel_tol: float = 1e-12) -> float:
    """phi(s) through adaptive quadrature of the defining expectation.

    By linearity E[sum_i A_i^s] = int_0^1 sum_i h_i(u)^s du for any coupling
    of the per-child uniforms, so one 1-d integral covers both shared and
    independent custom models and doubles as a cross-check for the built-in
    closed forms.
    """
    transforms = _uniform_transforms(model)

    def integrand(u: float) -> float:
        return math.fsum(float(h(u)) ** s for h in transforms)

    value, _ = integrate.quad(integrand, 0.0, 1.0, epsabs=0.0, epsrel=rel_tol, limit=400)
    return value - 1.0


def _uniform_transforms(model: WeightModel) -> tuple[Callable, ...]:
    if isinstance(model, Deterministic):
        return tuple((lambda u, w=w: w) for w in model.weights)
    if isinstance(model, PowerUniform):
        return tuple((lambda u: u**model.p) for _ in range(model.n))
    if isinstance(model, KacAngle):
        return (
            lambda u: np.abs(np.cos(2.0 * np.pi * u)),
            lambda u: np.abs(np.sin(2.0 * np.pi * u)),
        )
    return model.transforms


def phi_derivatives(model: WeightModel, s: float) -> tuple[float, float]:
    """(phi'(s), phi''(s)) on the open interval (0, s_inf)."""
    validate_model(model)
    if not (0.0 < s < s_infinity(model)):
        raise DomainError(f"s={s} outside (0, s_inf) for this model")
    if isinstance(model, Deterministic):
        d1 = math.fsum(w**s * math.log(w) for w in model.weights)
        d2 = math.fsum(w**s * math.log(w) ** 2 for w in model.weights)
        return d1, d2
    if isinstance(model, PowerUniform):
        q = model.p * s + 1.0
        return -model.n * model.p / q**2, 2.0 * model.n * model.p**2 / q**3
    if isinstance(model, KacAngle):
        e = phi_value(model, s) + 1.0
        dlog = 0.5 * (special.psi((s + 1.0) / 2.0) - special.psi(s / 2.0 + 1.0))
        d2log = 0.25 * (special.polygamma(1, (s + 1.0) / 2.0) - special.polygamma(1, s / 2.0 + 1.0))
        return e * dlog, e * (dlog**2 + d2log)
    # Custom: central differences on the quadrature values.  First derivative
    # uses the classic cbrt(eps) step; the second difference amplifies
    # quadrature noise as h^-2, so it gets the wider eps^(1/4) step.
    eps = np.finfo(float).eps
    h1 = eps ** (1.0 / 3.0) * max(1.0, s)
    h2 = eps**0.25 * max(1.0, s)
    h1 = min(h1, s / 2.0)
    h2 = min(h2, s / 2.0)
    f = lambda x: phi_quadrature(model, x)
    d1 = (f(s + h1) - f(s - h1)) / (2.0 * h1)
    d2 = (f(s + h2) - 2.0 * f(s) + f(s - h2)) / h2**2
    return d1, d2


def find_gamma_star(model: WeightModel, tol: float = 1e-12) -> SpectralProfile:
    """Locate the unique interior minimizer of mu(s) = phi(s)/s.

    Works on g(s) = s*phi'(s) - phi(s), which vanishes exactly at the
    minimizer and is strictly increasing (g'(s) = s*phi''(s) > 0), so
    bisection on an expanding bracket cannot miss the root.
    """
    validate_model(model)
    if not (tol > 0.0):
        raise ConfigError("tolerance must be positive")
    s_inf = s_infinity(model)
    if s_inf <= 0.0:
        raise ConfigError("s_inf must be positive")

    def g(s: float) -> float:
        d1, _ = phi_derivatives(model, s)
        return s * d1 - phi_value(model, s)

    lo = 1e-6
    # g(0+) = -phi(0) = -(N-1) < 0; expand the upper end until the sign flips.
    if g(lo) > 0.0:
        raise NoMinimizerError("spectral rate already increasing at the left bracket edge")
    hi = 1.0
    if math.isfinite(s_inf):
        hi = min(hi, 0.5 * (lo + s_inf))
    found = False
    for _ in range(200):
        if g(hi) > 0.0:
            found = True
            break
        lo = hi
        if math.isfinite(s_inf):
            hi = 0.5 * (hi + s_inf)
            if s_inf - hi < 1e-12 * s_inf:
                break
        else:
            hi *= 2.0
            if hi > 1e12:
                break
    if not found:
        raise NoMinimizerError("no interior minimizer: g(s) = s*phi'(s) - phi(s) never changes sign")

    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if g(mid) > 0.0:
            hi = mid
        else:
            lo = mid
    gamma = 0.5 * (lo + hi)

    phi_at = phi_value(model, gamma)
    d1, d2 = phi_derivatives(model, gamma)
    if not (d2 > 0.0):
        raise NoMinimizerError(f"curvature phi''({gamma}) = {d2} is not positive")
    mu_at = phi_at / gamma
    c_gamma = (2.0 / (math.pi * gamma**2 * d2)) ** (1.0 / (2.0 * gamma))
    return SpectralProfile(
        gamma_star=gamma,
        phi_at=phi_at,
        phi_prime_at=d1,
        phi_second_at=d2,
        mu_at=mu_at,
        c_gamma=c_gamma,
        s_infinity=s_inf,
    )


def scaling_factor(profile: SpectralProfile, t: float) -> float:
    """Boundary-case normalization t^(1/(2*gamma_star)) * exp(-mu_at*t); 1 at t=0."""
    if t < 0.0:
        raise DomainError("time must be nonnegative")
    if t == 0.0:
        return 1.0
    return t ** (1.0 / (2.0 * profile.gamma_star)) * math.exp(-profile.mu_at * t)


def sqrt_time_factor(t: float) -> float:
    """sqrt(t) with the same value-1-at-zero convention as scaling_factor."""
    if t < 0.0:
        raise DomainError("time must be nonnegative")
    return 1.0 if t == 0.0 else math.sqrt(t)


def sample_weight_matrix(model: WeightModel, rng: np.random.Generator, size: int) -> np.ndarray:
    """Draw (size, N) weight vectors."""
    validate_model(model)
    if isinstance(model, Deterministic):
        return np.tile(np.asarray(model.weights, dtype=float), (size, 1))
    if isinstance(model, PowerUniform):
        return (1.0 - rng.random((size, model.n))) ** model.p
    if isinstance(model, KacAngle):
        theta = 2.0 * np.pi * rng.random(size)
        return np.column_stack((np.abs(np.cos(theta)), np.abs(np.sin(theta))))
    if model.shared_uniform:
        u = rng.random(size)
        return np.column_stack([np.asarray(h(u), dtype=float) for h in model.transforms])
    cols = [np.asarray(h(rng.random(size)), dtype=float) for h in model.transforms]
    return np.column_stack(cols)


def kernel_spec(model: WeightModel) -> tuple[int, int, np.ndarray] | None:
    """(code, n_children, params) consumed by the jit event loop; None => python path."""
    validate_model(model)
    if isinstance(model, Deterministic):
        return 0, len(model.weights), np.log(np.asarray(model.weights, dtype=float))
    if isinstance(model, PowerUniform):
        return 1, model.n, np.array([model.p], dtype=float)
    if isinstance(model, KacAngle):
        return 2, 2, np.empty(0, dtype=float)
    return None
