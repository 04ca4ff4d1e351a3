"""Experiment configuration: JSON schema, strict parsing, canonical hashing.

Unknown keys anywhere in the file are rejected so that typos fail fast.
The master seed defaults to ``DEFAULT_SEED`` to keep bare runs reproducible.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

from . import initial_laws, spectral
from .errors import ConfigError

__all__ = [
    "DEFAULT_SEED",
    "Tolerances",
    "ExperimentConfig",
    "parse_weight_model",
    "parse_initial_law",
    "weight_model_dict",
    "initial_law_dict",
    "load_config",
    "config_from_dict",
    "config_hash",
]

DEFAULT_SEED = 1729


def _take(d: dict, name: str, keys: set[str]) -> None:
    unknown = set(d) - keys
    if unknown:
        raise ConfigError(f"unknown keys in {name}: {sorted(unknown)}")


def parse_weight_model(spec: dict) -> spectral.WeightModel:
    if not isinstance(spec, dict) or "type" not in spec:
        raise ConfigError("weight model spec must be an object with a 'type'")
    kind = spec["type"]
    if kind == "deterministic":
        _take(spec, "deterministic model", {"type", "weights"})
        model = spectral.Deterministic(weights=tuple(float(w) for w in spec["weights"]))
    elif kind == "power_uniform":
        _take(spec, "power_uniform model", {"type", "n", "p"})
        model = spectral.PowerUniform(n=int(spec["n"]), p=float(spec["p"]))
    elif kind == "kac_angle":
        _take(spec, "kac_angle model", {"type"})
        model = spectral.KacAngle()
    else:
        raise ConfigError(f"unknown weight model type {kind!r}")
    spectral.validate_model(model)
    return model


def parse_initial_law(spec: dict) -> initial_laws.InitialLaw:
    if not isinstance(spec, dict) or "type" not in spec:
        raise ConfigError("initial law spec must be an object with a 'type'")
    kind = spec["type"]
    if kind == "finite_mean":
        _take(spec, "finite_mean law", {"type", "m0", "base", "width"})
        law = initial_laws.FiniteMean(m0=float(spec["m0"]), base=spec.get("base", "degenerate"),
                                      width=float(spec.get("width", 1.0)))
    elif kind == "cauchy_like":
        _take(spec, "cauchy_like law", {"type", "c_plus", "m0"})
        law = initial_laws.CauchyLike(c_plus=float(spec["c_plus"]), m0=float(spec.get("m0", 0.0)))
    elif kind == "finite_variance_normal":
        _take(spec, "finite_variance_normal law", {"type", "sigma"})
        law = initial_laws.FiniteVarianceNormal(sigma=float(spec["sigma"]))
    elif kind == "finite_variance_two_point":
        _take(spec, "finite_variance_two_point law", {"type", "sigma"})
        law = initial_laws.FiniteVarianceTwoPoint(sigma=float(spec["sigma"]))
    elif kind == "pareto_tail":
        _take(spec, "pareto_tail law", {"type", "gamma", "c_plus", "c_minus"})
        law = initial_laws.ParetoTail(gamma=float(spec["gamma"]), c_plus=float(spec["c_plus"]),
                                      c_minus=float(spec["c_minus"]))
    else:
        raise ConfigError(f"unknown initial law type {kind!r}")
    initial_laws.validate_law(law)
    return law


def weight_model_dict(model: spectral.WeightModel) -> dict:
    if isinstance(model, spectral.Deterministic):
        return {"type": "deterministic", "weights": list(model.weights)}
    if isinstance(model, spectral.PowerUniform):
        return {"type": "power_uniform", "n": model.n, "p": model.p}
    if isinstance(model, spectral.KacAngle):
        return {"type": "kac_angle"}
    raise ConfigError("custom weight models are code-only and have no config form")


def initial_law_dict(law: initial_laws.InitialLaw) -> dict:
    if isinstance(law, initial_laws.FiniteMean):
        return {"type": "finite_mean", "m0": law.m0, "base": law.base, "width": law.width}
    if isinstance(law, initial_laws.CauchyLike):
        return {"type": "cauchy_like", "c_plus": law.c_plus, "m0": law.m0}
    if isinstance(law, initial_laws.FiniteVarianceNormal):
        return {"type": "finite_variance_normal", "sigma": law.sigma}
    if isinstance(law, initial_laws.FiniteVarianceTwoPoint):
        return {"type": "finite_variance_two_point", "sigma": law.sigma}
    if isinstance(law, initial_laws.ParetoTail):
        return {"type": "pareto_tail", "gamma": law.gamma, "c_plus": law.c_plus, "c_minus": law.c_minus}
    raise ConfigError(f"unknown initial law {law!r}")


@dataclass(frozen=True)
class Tolerances:
    """Statistical gates shared by the verification suites."""

    significance: float = 1e-3   # distributional tests
    mean_sigmas: float = 4.0     # mean/CI gates
    final_tol: float = 0.1       # boundary-experiment CF distance at the last time
    spectral_tol: float = 1e-10  # root-finder tolerance


_TOL_KEYS = {"significance", "mean_sigmas", "final_tol", "spectral_tol"}
_GRID_KEYS = {"min", "max", "points"}
_POOL_KEYS = {"size", "iterations"}
_TOP_KEYS = {
    "weight_model", "initial_law", "times", "xi_grid", "replicates", "pool",
    "seed", "workers", "out_dir", "particle_cap", "segment_time", "tolerances",
}


@dataclass(frozen=True)
class ExperimentConfig:
    weight_model: spectral.WeightModel
    initial_law: initial_laws.InitialLaw | None = None
    times: tuple[float, ...] = (1.0, 5.0)
    xi_min: float = -2.0
    xi_max: float = 2.0
    xi_points: int = 81
    replicates: int = 100_000
    pool_size: int = 100_000
    pool_iterations: int = 50
    seed: int = DEFAULT_SEED
    workers: int = 1
    out_dir: str = "out"
    particle_cap: int = 10**7
    segment_time: float | None = None
    tolerances: Tolerances = field(default_factory=Tolerances)

    def __post_init__(self):
        if self.replicates < 1:
            raise ConfigError("replicates must be at least 1")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        if self.xi_points < 2 or not (self.xi_max > self.xi_min):
            raise ConfigError("invalid frequency grid")
        if any(t < 0.0 for t in self.times):
            raise ConfigError("times must be nonnegative")
        if tuple(sorted(self.times)) != tuple(self.times):
            raise ConfigError("times must be sorted ascending")

    def xi_grid(self):
        import numpy as np

        return np.linspace(self.xi_min, self.xi_max, self.xi_points)


def config_from_dict(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    _take(raw, "config", _TOP_KEYS)
    if "weight_model" not in raw:
        raise ConfigError("config needs a weight_model")
    model = parse_weight_model(raw["weight_model"])
    law = parse_initial_law(raw["initial_law"]) if raw.get("initial_law") is not None else None
    grid = raw.get("xi_grid", {})
    if grid:
        _take(grid, "xi_grid", _GRID_KEYS)
    pool = raw.get("pool", {})
    if pool:
        _take(pool, "pool", _POOL_KEYS)
    tol_raw = raw.get("tolerances", {})
    if tol_raw:
        _take(tol_raw, "tolerances", _TOL_KEYS)
    seg = raw.get("segment_time")
    return ExperimentConfig(
        weight_model=model,
        initial_law=law,
        times=tuple(float(t) for t in raw.get("times", (1.0, 5.0))),
        xi_min=float(grid.get("min", -2.0)),
        xi_max=float(grid.get("max", 2.0)),
        xi_points=int(grid.get("points", 81)),
        replicates=int(raw.get("replicates", 100_000)),
        pool_size=int(pool.get("size", 100_000)),
        pool_iterations=int(pool.get("iterations", 50)),
        seed=int(raw.get("seed", DEFAULT_SEED)),
        workers=int(raw.get("workers", 1)),
        out_dir=str(raw.get("out_dir", "out")),
        particle_cap=int(raw.get("particle_cap", 10**7)),
        segment_time=None if seg is None else float(seg),
        tolerances=Tolerances(**{k: float(v) for k, v in tol_raw.items()}),
    )


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}") from exc
    return config_from_dict(raw)


def config_dict(cfg: ExperimentConfig) -> dict:
    return {
        "weight_model": weight_model_dict(cfg.weight_model),
        "initial_law": None if cfg.initial_law is None else initial_law_dict(cfg.initial_law),
        "times": list(cfg.times),
        "xi_grid": {"min": cfg.xi_min, "max": cfg.xi_max, "points": cfg.xi_points},
        "replicates": cfg.replicates,
        "pool": {"size": cfg.pool_size, "iterations": cfg.pool_iterations},
        "seed": cfg.seed,
        "out_dir": cfg.out_dir,
        "particle_cap": cfg.particle_cap,
        "segment_time": cfg.segment_time,
        "tolerances": {
            "significance": cfg.tolerances.significance,
            "mean_sigmas": cfg.tolerances.mean_sigmas,
            "final_tol": cfg.tolerances.final_tol,
            "spectral_tol": cfg.tolerances.spectral_tol,
        },
    }


def config_hash(cfg: ExperimentConfig) -> str:
    """Canonical hash of everything that affects results (workers excluded)."""
    payload = config_dict(cfg)
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]
