"""Initial distributions attracted to stable laws, with samplers and limit CFs.

Each law family realizes one tail regime exactly:

* ``FiniteMean``       -- integrable law with mean m0 (tail index 1, no tail
                          structure imposed); degenerate, shifted-exponential
                          and uniform representatives are built in.
* ``CauchyLike``       -- exact Cauchy location-scale family, two-sided tail
                          constant c_plus and principal-value mean m0.
* ``FiniteVariance*``  -- mean zero, variance sigma^2 (tail index 2).
* ``ParetoTail``       -- pure power tails with index gamma in (0,1)u(1,2) and
                          one-sided constants c_plus, c_minus; exactly mean
                          centered when gamma > 1.

``stable_cf`` evaluates the attracting stable characteristic function of each
law; ``exact_cf`` evaluates the law's own characteristic function where a
closed form exists (used by the ODE cross-oracle).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import ConfigError, DomainError

__all__ = [
    "FiniteMean",
    "CauchyLike",
    "FiniteVarianceNormal",
    "FiniteVarianceTwoPoint",
    "ParetoTail",
    "InitialLaw",
    "validate_law",
    "tail_index",
    "sample",
    "stable_cf",
    "exact_cf",
    "log_cf_leading",
    "log_cf_expansion_check",
]

_FINITE_MEAN_BASES = ("degenerate", "exponential", "uniform")


@dataclass(frozen=True)
class FiniteMean:
    """Integrable law with mean m0.

    Bases: ``degenerate`` (point mass at m0), ``exponential`` (unit
    exponential shifted to mean m0), ``uniform`` (width-``width`` uniform
    centered at m0).
    """

    m0: float
    base: str = "degenerate"
    width: float = 1.0


@dataclass(frozen=True)
class CauchyLike:
    """Cauchy with location m0, scaled so x*(1-F(x)) -> c_plus on both sides."""

    c_plus: float
    m0: float = 0.0


@dataclass(frozen=True)
class FiniteVarianceNormal:
    sigma: float


@dataclass(frozen=True)
class FiniteVarianceTwoPoint:
    """Mass 1/2 at +sigma and -sigma."""

    sigma: float


@dataclass(frozen=True)
class ParetoTail:
    """Two-sided pure power-law with exact tail constants.

    Right branch x0*U^(-1/gamma) with probability c_plus/(c_plus+c_minus),
    mirrored left branch otherwise; x0 = (c_plus+c_minus)^(1/gamma) makes
    lim x^gamma (1-F(x)) = c_plus and lim x^gamma F(-x) = c_minus exact.
    The analytic mean is subtracted when gamma > 1.
    """

    gamma: float
    c_plus: float
    c_minus: float


InitialLaw = FiniteMean | CauchyLike | FiniteVarianceNormal | FiniteVarianceTwoPoint | ParetoTail


def validate_law(law: InitialLaw) -> None:
    if isinstance(law, FiniteMean):
        if law.base not in _FINITE_MEAN_BASES:
            raise ConfigError(f"unknown finite-mean base {law.base!r}")
        if law.base == "uniform" and not (law.width > 0.0):
            raise ConfigError("uniform base needs positive width")
    elif isinstance(law, CauchyLike):
        if not (law.c_plus > 0.0):
            raise ConfigError("cauchy tail constant must be positive")
    elif isinstance(law, (FiniteVarianceNormal, FiniteVarianceTwoPoint)):
        if not (law.sigma > 0.0):
            raise ConfigError("sigma must be positive")
    elif isinstance(law, ParetoTail):
        g = law.gamma
        if not (0.0 < g < 2.0) or g == 1.0:
            raise ConfigError("pareto tail index must lie in (0,1) or (1,2)")
        if law.c_plus < 0.0 or law.c_minus < 0.0 or law.c_plus + law.c_minus <= 0.0:
            raise ConfigError("tail constants must be nonnegative with positive sum")
    else:
        raise ConfigError(f"unknown initial law {law!r}")


def tail_index(law: InitialLaw) -> float:
    validate_law(law)
    if isinstance(law, (FiniteMean, CauchyLike)):
        return 1.0
    if isinstance(law, (FiniteVarianceNormal, FiniteVarianceTwoPoint)):
        return 2.0
    return law.gamma


def _pareto_params(law: ParetoTail) -> tuple[float, float, float]:
    """(x0, q_plus, centering shift)."""
    total = law.c_plus + law.c_minus
    x0 = total ** (1.0 / law.gamma)
    q_plus = law.c_plus / total
    shift = 0.0
    if law.gamma > 1.0:
        eta = (law.c_plus - law.c_minus) / total
        # one-sided mean of x0*U^(-1/gamma) is x0*gamma/(gamma-1)
        shift = x0 * law.gamma / (law.gamma - 1.0) * eta
    return x0, q_plus, shift


def _k0_eta0(law: ParetoTail) -> tuple[float, float]:
    total = law.c_plus + law.c_minus
    k0 = total * math.pi / (2.0 * special.gamma(law.gamma) * math.sin(math.pi * law.gamma / 2.0))
    eta0 = (law.c_plus - law.c_minus) / total
    return k0, eta0


def sample(law: InitialLaw, rng: np.random.Generator, size: int | None = None):
    """Independent draws from the law; scalar when size is None."""
    validate_law(law)
    n = 1 if size is None else int(size)
    if isinstance(law, FiniteMean):
        if law.base == "degenerate":
            out = np.full(n, law.m0)
        elif law.base == "exponential":
            out = law.m0 - 1.0 + rng.standard_exponential(n)
        else:
            out = law.m0 + law.width * (rng.random(n) - 0.5)
    elif isinstance(law, CauchyLike):
        out = law.m0 + math.pi * law.c_plus * rng.standard_cauchy(n)
    elif isinstance(law, FiniteVarianceNormal):
        out = law.sigma * rng.standard_normal(n)
    elif isinstance(law, FiniteVarianceTwoPoint):
        out = law.sigma * np.where(rng.random(n) < 0.5, 1.0, -1.0)
    else:
        x0, q_plus, shift = _pareto_params(law)
        side = rng.random(n) < q_plus
        mag = x0 * (1.0 - rng.random(n)) ** (-1.0 / law.gamma)
        out = np.where(side, mag, -mag) - shift
    return float(out[0]) if size is None else out


def stable_cf(law: InitialLaw, xi):
    """Characteristic function of the stable law attracting this initial law."""
    validate_law(law)
    x = np.asarray(xi, dtype=float)
    if isinstance(law, FiniteMean):
        out = np.exp(1j * law.m0 * x)
    elif isinstance(law, CauchyLike):
        out = np.exp(1j * law.m0 * x - math.pi * law.c_plus * np.abs(x))
    elif isinstance(law, (FiniteVarianceNormal, FiniteVarianceTwoPoint)):
        out = np.exp(-0.5 * law.sigma**2 * x**2) + 0j
    else:
        k0, eta0 = _k0_eta0(law)
        skew = 1.0 - 1j * eta0 * math.tan(math.pi * law.gamma / 2.0) * np.sign(x)
        out = np.exp(-k0 * np.abs(x) ** law.gamma * skew)
    return complex(out) if np.ndim(xi) == 0 else out


def exact_cf(law: InitialLaw, xi):
    """The law's own characteristic function, where it has a closed form."""
    validate_law(law)
    x = np.asarray(xi, dtype=float)
    if isinstance(law, FiniteMean):
        if law.base == "degenerate":
            out = np.exp(1j * law.m0 * x)
        elif law.base == "exponential":
            out = np.exp(1j * (law.m0 - 1.0) * x) / (1.0 - 1j * x)
        else:
            out = np.exp(1j * law.m0 * x) * np.sinc(law.width * x / (2.0 * math.pi))
    elif isinstance(law, CauchyLike):
        out = np.exp(1j * law.m0 * x - math.pi * law.c_plus * np.abs(x))
    elif isinstance(law, FiniteVarianceNormal):
        out = np.exp(-0.5 * law.sigma**2 * x**2) + 0j
    elif isinstance(law, FiniteVarianceTwoPoint):
        out = np.cos(law.sigma * x) + 0j
    else:
        raise DomainError("pareto-tail laws have no closed-form characteristic function")
    return complex(out) if np.ndim(xi) == 0 else out


def log_cf_leading(law: InitialLaw, xi):
    """Leading small-argument term of log cf; equals log of ``stable_cf``."""
    validate_law(law)
    x = np.asarray(xi, dtype=float)
    if isinstance(law, FiniteMean):
        out = 1j * law.m0 * x
    elif isinstance(law, CauchyLike):
        out = 1j * law.m0 * x - math.pi * law.c_plus * np.abs(x)
    elif isinstance(law, (FiniteVarianceNormal, FiniteVarianceTwoPoint)):
        out = -0.5 * law.sigma**2 * x**2 + 0j
    else:
        k0, eta0 = _k0_eta0(law)
        skew = 1.0 - 1j * eta0 * math.tan(math.pi * law.gamma / 2.0) * np.sign(x)
        out = -k0 * np.abs(x) ** law.gamma * skew
    return complex(out) if np.ndim(xi) == 0 else out


def log_cf_expansion_check(
    law: InitialLaw,
    xi: float,
    rng: np.random.Generator,
    n_samples: int = 10_000_000,
    chunk: int = 1_000_000,
) -> float:
    """Relative gap between the empirical log cf and its leading term at small xi.

    Diagnostic only: estimates the cf by Monte Carlo over ``n_samples`` draws
    and returns |log cf_hat - leading| / max(|leading|, |xi|).
    """
    if abs(xi) > 0.1:
        raise DomainError("expansion check is for |xi| <= 0.1")
    if xi == 0.0:
        return 0.0
    acc_re = 0.0
    acc_im = 0.0
    done = 0
    while done < n_samples:
        m = min(chunk, n_samples - done)
        x = sample(law, rng, m)
        acc_re += float(np.sum(np.cos(xi * x)))
        acc_im += float(np.sum(np.sin(xi * x)))
        done += m
    value = complex(acc_re / done, acc_im / done)
    if value == 0:
        raise ArithmeticError("empirical characteristic function vanished")
    lead = log_cf_leading(law, xi)
    denom = abs(lead) if abs(lead) > 0.0 else abs(xi)
    return abs(np.log(value) - lead) / denom
