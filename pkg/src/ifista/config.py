"""Experiment configuration: parsing, validation, canonical form, run ids.

Configs are human-writable JSON (nested key-value).  Parsing materializes
every default, so semantically identical configs share one canonical
serialization and therefore one run id.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from typing import Optional

from .exceptions import ConfigError
from .inexact import ErrorSchedule, StochasticOracleSpec
from .params import ParamFamily
from .problems import CompositeProblem, ensure_reference, from_config as problem_from_config
from .solvers import DeterministicConfig, StochasticConfig

ENV_SEED = "IFISTA_SEED"

_MODES = ("deterministic", "stochastic", "baseline")

_KNOWN_KEYS = {
    "problem", "mode", "params", "gamma", "gamma_schedule", "delta", "b",
    "noise", "weak_inexactness", "prox_direction", "max_iters", "replications",
    "seed", "reference_tol", "attach_reference", "store_points", "inner_cap",
    "fit_window", "x0", "out_dir", "sweep",
}


@dataclass
class ExperimentConfig:
    problem: dict
    mode: str = "deterministic"
    params: dict = field(default_factory=lambda: {"family": "critical"})
    gamma: Optional[float] = None
    gamma_schedule: dict = field(default_factory=lambda: {"q": 0.0, "r": 0.0})
    delta: dict = field(default_factory=lambda: {"c": 0.0, "p": 0.0})
    b: dict = field(default_factory=lambda: {"c": 0.0, "p": 0.0, "direction": "seeded_random_unit"})
    noise: dict = field(default_factory=lambda: {"family": "sphere", "sigma": 0.0})
    weak_inexactness: bool = False
    prox_direction: str = "seeded_random_unit"
    max_iters: int = 1000
    replications: int = 1
    seed: int = 0
    reference_tol: float = 1e-12
    attach_reference: bool = True
    store_points: bool = False
    inner_cap: int = 10**6
    fit_window: Optional[list] = None
    x0: Optional[list] = None
    out_dir: Optional[str] = None
    sweep: Optional[dict] = None

    def canonical(self) -> dict:
        """Fully materialized, deterministic-order content (sweep excluded)."""
        d = {
            "problem": dict(sorted(self.problem.items())),
            "mode": self.mode,
            "params": dict(sorted(self.params.items())),
            "gamma": self.gamma,
            "gamma_schedule": dict(sorted(self.gamma_schedule.items())),
            "delta": dict(sorted(self.delta.items())),
            "b": dict(sorted(self.b.items())),
            "noise": dict(sorted(self.noise.items())),
            "weak_inexactness": self.weak_inexactness,
            "prox_direction": self.prox_direction,
            "max_iters": self.max_iters,
            "replications": self.replications,
            "seed": self.seed,
            "reference_tol": self.reference_tol,
            "attach_reference": self.attach_reference,
            "store_points": self.store_points,
            "inner_cap": self.inner_cap,
            "fit_window": self.fit_window,
            "x0": self.x0,
        }
        return d

    def canonical_json(self) -> str:
        return json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))

    def run_id(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()[:12]


def _expect(cond: bool, field_name: str, message: str) -> None:
    if not cond:
        raise ConfigError(f"config field {field_name!r}: {message}")


def parse_config(raw: dict, seed_override: Optional[int] = None,
                 max_iters_override: Optional[int] = None) -> ExperimentConfig:
    """Validate a raw config dict, resolving the seed.

    Seed resolution order: explicit override (--seed), config value, the
    IFISTA_SEED environment variable, then 0.
    """
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    unknown = set(raw) - _KNOWN_KEYS
    if unknown:
        raise ConfigError(f"unknown config field(s): {sorted(unknown)}")
    _expect("problem" in raw, "problem", "is required")
    _expect(isinstance(raw["problem"], dict) and "kind" in raw["problem"],
            "problem", "must be an object with a 'kind'")
    mode = raw.get("mode", "deterministic")
    _expect(mode in _MODES, "mode", f"must be one of {_MODES}")

    if seed_override is not None:
        seed = int(seed_override)
    elif raw.get("seed") is not None:
        seed = int(raw["seed"])
    else:
        seed = int(os.environ.get(ENV_SEED, "0"))

    cfg = ExperimentConfig(problem=dict(raw["problem"]), mode=mode, seed=seed)
    if "params" in raw:
        cfg.params = dict(raw["params"])
    if "gamma" in raw and raw["gamma"] is not None:
        cfg.gamma = float(raw["gamma"])
        _expect(cfg.gamma > 0, "gamma", "must be positive")
    if "gamma_schedule" in raw:
        gs = raw["gamma_schedule"]
        _expect(isinstance(gs, dict), "gamma_schedule", "must be an object")
        cfg.gamma_schedule = {"q": float(gs.get("q", 0.0)), "r": float(gs.get("r", 0.0))}
        _expect(cfg.gamma_schedule["q"] >= 0 and cfg.gamma_schedule["r"] >= 0,
                "gamma_schedule", "q and r must be >= 0")
    for key in ("delta", "b"):
        if key in raw:
            setattr(cfg, key, dict(raw[key]))
    if "noise" in raw:
        cfg.noise = dict(raw["noise"])
    for key, conv in (("weak_inexactness", bool), ("attach_reference", bool),
                      ("store_points", bool)):
        if key in raw:
            setattr(cfg, key, conv(raw[key]))
    if "prox_direction" in raw:
        cfg.prox_direction = raw["prox_direction"]
        _expect(cfg.prox_direction in ("seeded_random_unit", "fixed_unit"),
                "prox_direction", "must be 'seeded_random_unit' or 'fixed_unit'")
    if "max_iters" in raw:
        cfg.max_iters = int(raw["max_iters"])
    if max_iters_override is not None:
        cfg.max_iters = int(max_iters_override)
    _expect(cfg.max_iters >= 1, "max_iters", "must be >= 1")
    if "replications" in raw:
        cfg.replications = int(raw["replications"])
        _expect(cfg.replications >= 1, "replications", "must be >= 1")
    if "reference_tol" in raw:
        cfg.reference_tol = float(raw["reference_tol"])
    if "inner_cap" in raw:
        cfg.inner_cap = int(raw["inner_cap"])
    if "fit_window" in raw and raw["fit_window"] is not None:
        fw = raw["fit_window"]
        _expect(isinstance(fw, (list, tuple)) and len(fw) == 2, "fit_window",
                "must be a [k_min, k_max] pair")
        cfg.fit_window = [int(fw[0]), int(fw[1])]
    if "x0" in raw and raw["x0"] is not None:
        cfg.x0 = [float(v) for v in raw["x0"]]
    if "out_dir" in raw:
        cfg.out_dir = raw["out_dir"]
    if "sweep" in raw:
        _expect(isinstance(raw["sweep"], dict), "sweep", "must be an object of lists")
        cfg.sweep = dict(raw["sweep"])

    # fail fast on malformed sub-objects
    try:
        ParamFamily.from_config(cfg.params)
    except ValueError as exc:
        raise ConfigError(f"config field 'params': {exc}") from exc
    for key in ("delta", "b"):
        try:
            ErrorSchedule.from_config(getattr(cfg, key))
        except ValueError as exc:
            raise ConfigError(f"config field {key!r}: {exc}") from exc
    try:
        StochasticOracleSpec.from_config(cfg.noise)
    except ValueError as exc:
        raise ConfigError(f"config field 'noise': {exc}") from exc
    return cfg


def load_config(path, seed_override=None, max_iters_override=None) -> ExperimentConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return parse_config(raw, seed_override, max_iters_override)


def build_problem(cfg: ExperimentConfig) -> CompositeProblem:
    try:
        problem = problem_from_config(cfg.problem)
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"config field 'problem': {exc}") from exc
    if cfg.attach_reference:
        ensure_reference(problem, tol=cfg.reference_tol)
    return problem


def build_solver_config(cfg: ExperimentConfig):
    family = ParamFamily.from_config(cfg.params)
    if cfg.mode == "stochastic":
        return StochasticConfig(
            params=family,
            gamma=cfg.gamma,
            q=cfg.gamma_schedule["q"],
            r=cfg.gamma_schedule["r"],
            delta=ErrorSchedule.from_config(cfg.delta),
            noise=StochasticOracleSpec.from_config(cfg.noise),
            weak_inexactness=cfg.weak_inexactness,
            prox_direction=cfg.prox_direction,
            max_iters=cfg.max_iters,
            replications=cfg.replications,
            seed=cfg.seed,
            store_points=cfg.store_points,
            inner_cap=cfg.inner_cap,
        )
    return DeterministicConfig(
        params=family,
        gamma=cfg.gamma,
        delta=ErrorSchedule.from_config(cfg.delta),
        b=ErrorSchedule.from_config(cfg.b),
        weak_inexactness=cfg.weak_inexactness,
        prox_direction=cfg.prox_direction,
        max_iters=cfg.max_iters,
        seed=cfg.seed,
        store_points=cfg.store_points,
        inner_cap=cfg.inner_cap,
    )
