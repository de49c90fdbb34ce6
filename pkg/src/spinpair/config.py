"""Flat text configuration for experiment runs.

The format is dotted keys with scalar, pair, or distribution values:

    physics.g = 2.0
    priors.jxy_kelvin = [0.0, 1.5]
    ensembles.xy_step1.phi1 = uniform(0.0, 6.283185307179586)

Serialization is deterministic (fixed key order, shortest-repr floats), so a
parse/serialize round trip is byte-identical.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .bhpe import XYStageConfig, ZStageConfig
from .heisenberg import K_B, PhysicalModel
from .states import DomainError, Distribution, EnsembleSpec, Fixed, UniformHalfOpen

TWO_PI = 6.283185307179586
HALF_PI = 1.5707963267948966
PI = 3.141592653589793


class ConfigError(ValueError):
    """Malformed or inconsistent experiment configuration."""


def _uniform(lo: float, hi: float) -> UniformHalfOpen:
    return UniformHalfOpen(lo, hi)


def default_ensembles() -> dict[str, EnsembleSpec]:
    """The four preparation ensembles of the reference protocol.

    Jxy stage, step 1: moduli in the working sub-ranges, free phases over the
    full circle (E{sin Delta_I} = 0 exactly); step 2: phi1 pinned to zero and
    phi2 over a half circle (E{sin Delta_I} = 2/pi > 0).  Jz stage: two
    instances distinguished by their modulus ranges, phases over a quarter
    circle on each side of zero.
    """
    zero = Fixed(0.0)
    return {
        "xy_step1": EnsembleSpec(
            r1=_uniform(0.1, 0.4),
            theta1=zero,
            phi1=_uniform(0.0, TWO_PI),
            r2=_uniform(0.6, 0.9),
            theta2=zero,
            phi2=_uniform(0.0, TWO_PI),
        ),
        "xy_step2": EnsembleSpec(
            r1=_uniform(0.1, 0.4),
            theta1=zero,
            phi1=zero,
            r2=_uniform(0.6, 0.9),
            theta2=zero,
            phi2=_uniform(0.0, PI),
        ),
        "z_instance1": EnsembleSpec(
            r1=_uniform(0.1, 0.4),
            theta1=zero,
            phi1=_uniform(-HALF_PI, HALF_PI),
            r2=_uniform(0.1, 0.4),
            theta2=zero,
            phi2=_uniform(-HALF_PI, HALF_PI),
        ),
        "z_instance2": EnsembleSpec(
            r1=_uniform(0.6, 0.9),
            theta1=zero,
            phi1=_uniform(-HALF_PI, HALF_PI),
            r2=_uniform(0.6, 0.9),
            theta2=zero,
            phi2=_uniform(-HALF_PI, HALF_PI),
        ),
    }


_ENSEMBLE_NAMES = ("xy_step1", "xy_step2", "z_instance1", "z_instance2")
_PARAM_NAMES = ("r1", "theta1", "phi1", "r2", "theta2", "phi2")


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a reproducible experiment run needs."""

    g: float = 2.0
    b_tesla: float = 0.99
    jxy_kelvin: float = 0.3
    jz_kelvin: float = 1.0
    tau11_ns: float = 0.5
    tau21_ns: float = 0.53
    jxy_prior_kelvin: tuple[float, float] = (0.0, 1.5)
    jz_prior_kelvin: tuple[float, float] = (0.4472135954999579, 2.23606797749979)
    n_states: int = 100_000
    preps_per_state: int = 1
    runs: int = 100
    seed: int = 20260810
    n_states_x: int | None = None  # x-basis campaign budget; None = same as N
    ensembles: dict[str, EnsembleSpec] = field(default_factory=default_ensembles)

    def __post_init__(self):
        if self.n_states < 1 or self.preps_per_state < 1 or self.runs < 1:
            raise ConfigError("budget.N, budget.K and budget.runs must be >= 1")
        if self.n_states_x is not None and self.n_states_x < 1:
            raise ConfigError("budget.N_x must be >= 1 when given")
        for name, prior in (
            ("priors.jxy_kelvin", self.jxy_prior_kelvin),
            ("priors.jz_kelvin", self.jz_prior_kelvin),
        ):
            if not prior[0] < prior[1]:
                raise ConfigError(f"{name} must be an increasing pair")
        missing = [n for n in _ENSEMBLE_NAMES if n not in self.ensembles]
        if missing:
            raise ConfigError(f"missing ensemble definitions: {missing}")

    @property
    def model(self) -> PhysicalModel:
        return PhysicalModel.from_kelvin(
            self.g, self.b_tesla, self.jxy_kelvin, self.jz_kelvin
        )

    @property
    def tau11(self) -> float:
        return self.tau11_ns * 1e-9

    @property
    def tau21(self) -> float:
        return self.tau21_ns * 1e-9

    def xy_stage(self) -> XYStageConfig:
        return XYStageConfig(
            tau_a=self.tau11,
            prior=(self.jxy_prior_kelvin[0] * K_B, self.jxy_prior_kelvin[1] * K_B),
            step1=self.ensembles["xy_step1"],
            step2=self.ensembles["xy_step2"],
        )

    def z_stage(self, tau_a: float | None = None) -> ZStageConfig:
        return ZStageConfig(
            tau_a=self.tau21 if tau_a is None else tau_a,
            prior=(self.jz_prior_kelvin[0] * K_B, self.jz_prior_kelvin[1] * K_B),
            instance1=self.ensembles["z_instance1"],
            instance2=self.ensembles["z_instance2"],
        )

    def with_overrides(
        self,
        seed: int | None = None,
        n_states: int | None = None,
        preps_per_state: int | None = None,
        runs: int | None = None,
    ) -> "ExperimentConfig":
        updates = {}
        if seed is not None:
            updates["seed"] = seed
        if n_states is not None:
            updates["n_states"] = n_states
        if preps_per_state is not None:
            updates["preps_per_state"] = preps_per_state
        if runs is not None:
            updates["runs"] = runs
        return replace(self, **updates) if updates else self


def default_config() -> ExperimentConfig:
    return ExperimentConfig()


# --------------------------------------------------------------------------
# Parsing and serialization
# --------------------------------------------------------------------------

def _format_value(value) -> str:
    if isinstance(value, bool):
        raise ConfigError("boolean config values are not used")
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return "[" + ", ".join(repr(float(v)) for v in value) + "]"
    if isinstance(value, Fixed):
        return f"fixed({value.value!r})"
    if isinstance(value, UniformHalfOpen):
        return f"uniform({value.lo!r}, {value.hi!r})"
    raise ConfigError(f"cannot serialize config value {value!r}")


def serialize_config(cfg: ExperimentConfig) -> str:
    lines = [
        f"physics.g = {_format_value(cfg.g)}",
        f"physics.B_tesla = {_format_value(cfg.b_tesla)}",
        f"physics.Jxy_kelvin = {_format_value(cfg.jxy_kelvin)}",
        f"physics.Jz_kelvin = {_format_value(cfg.jz_kelvin)}",
        f"timing.tau11_ns = {_format_value(cfg.tau11_ns)}",
        f"timing.tau21_ns = {_format_value(cfg.tau21_ns)}",
        f"priors.jxy_kelvin = {_format_value(cfg.jxy_prior_kelvin)}",
        f"priors.jz_kelvin = {_format_value(cfg.jz_prior_kelvin)}",
        f"budget.N = {cfg.n_states}",
        f"budget.K = {cfg.preps_per_state}",
        f"budget.runs = {cfg.runs}",
        f"seed = {cfg.seed}",
    ]
    if cfg.n_states_x is not None:
        lines.append(f"budget.N_x = {cfg.n_states_x}")
    for ens_name in _ENSEMBLE_NAMES:
        spec = cfg.ensembles[ens_name]
        for param in _PARAM_NAMES:
            lines.append(
                f"ensembles.{ens_name}.{param} = {_format_value(getattr(spec, param))}"
            )
    return "\n".join(lines) + "\n"


def _parse_scalar(text: str) -> float:
    try:
        return float(text)
    except ValueError as exc:
        raise ConfigError(f"expected a number, got {text!r}") from exc


def _parse_value(text: str):
    text = text.strip()
    if text.startswith("[") and text.endswith("]"):
        parts = [p for p in text[1:-1].split(",") if p.strip()]
        if len(parts) != 2:
            raise ConfigError(f"expected a [lo, hi] pair, got {text!r}")
        return (_parse_scalar(parts[0]), _parse_scalar(parts[1]))
    if text.startswith("fixed(") and text.endswith(")"):
        return Fixed(_parse_scalar(text[len("fixed(") : -1]))
    if text.startswith("uniform(") and text.endswith(")"):
        parts = text[len("uniform(") : -1].split(",")
        if len(parts) != 2:
            raise ConfigError(f"uniform() needs two arguments, got {text!r}")
        return UniformHalfOpen(_parse_scalar(parts[0]), _parse_scalar(parts[1]))
    return _parse_scalar(text)


def parse_config(text: str) -> ExperimentConfig:
    entries: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        entries[key.strip()] = _parse_value(value)

    def take(key: str, default=None):
        return entries.pop(key, default)

    def take_int(key: str, default: int) -> int:
        value = take(key, default)
        if isinstance(value, float):
            if value != int(value):
                raise ConfigError(f"{key} must be an integer, got {value}")
            value = int(value)
        return value

    ensembles = default_ensembles()
    for ens_name in _ENSEMBLE_NAMES:
        overrides = {}
        for param in _PARAM_NAMES:
            value = take(f"ensembles.{ens_name}.{param}")
            if value is None:
                continue
            if isinstance(value, float):
                value = Fixed(value)
            if not isinstance(value, (Fixed, UniformHalfOpen)):
                raise ConfigError(
                    f"ensembles.{ens_name}.{param} must be fixed(..) or uniform(..)"
                )
            overrides[param] = value
        if overrides:
            ensembles[ens_name] = replace(ensembles[ens_name], **overrides)

    defaults = ExperimentConfig()
    n_states_x = take("budget.N_x")
    cfg = ExperimentConfig(
        g=take("physics.g", defaults.g),
        b_tesla=take("physics.B_tesla", defaults.b_tesla),
        jxy_kelvin=take("physics.Jxy_kelvin", defaults.jxy_kelvin),
        jz_kelvin=take("physics.Jz_kelvin", defaults.jz_kelvin),
        tau11_ns=take("timing.tau11_ns", defaults.tau11_ns),
        tau21_ns=take("timing.tau21_ns", defaults.tau21_ns),
        jxy_prior_kelvin=take("priors.jxy_kelvin", defaults.jxy_prior_kelvin),
        jz_prior_kelvin=take("priors.jz_kelvin", defaults.jz_prior_kelvin),
        n_states=take_int("budget.N", defaults.n_states),
        preps_per_state=take_int("budget.K", defaults.preps_per_state),
        runs=take_int("budget.runs", defaults.runs),
        seed=take_int("seed", defaults.seed),
        n_states_x=int(n_states_x) if n_states_x is not None else None,
        ensembles=ensembles,
    )
    if entries:
        raise ConfigError(f"unknown config keys: {sorted(entries)}")
    return cfg


def load_config(path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def save_config(cfg: ExperimentConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize_config(cfg))
