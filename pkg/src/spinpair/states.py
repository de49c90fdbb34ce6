"""One- and two-qubit pure states, polar parametrization, ensemble sampling.

State vectors are plain complex ndarrays.  Two-qubit amplitudes are always
ordered on the product basis (++, +-, -+, --), matching the component order
used everywhere else in this package.

Phases are stored unreduced: only phase differences carry physics, so no
canonicalization into a principal interval is ever performed here.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

NORM_TOL = 1e-10


class DomainError(ValueError):
    """Input outside the physically meaningful domain."""


@dataclass(frozen=True)
class QubitParams:
    """Polar parameters of a single-qubit pure state.

    The |+> coefficient is ``r_plus * exp(i*theta_plus)`` and the |->
    coefficient is ``sqrt(1 - r_plus**2) * exp(i*phi_minus)``, so the ket has
    unit norm by construction.
    """

    r_plus: float
    theta_plus: float = 0.0
    phi_minus: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.r_plus <= 1.0:
            raise DomainError(f"r_plus must lie in [0, 1], got {self.r_plus!r}")
        if not (math.isfinite(self.theta_plus) and math.isfinite(self.phi_minus)):
            raise DomainError("phases must be finite")


@dataclass(frozen=True)
class ParamDraw:
    """The six polar parameters defining a separable two-qubit preparation."""

    qubit1: QubitParams
    qubit2: QubitParams

    @property
    def delta_init(self) -> float:
        """Initial phase difference (phi2 - theta2) - (phi1 - theta1)."""
        q1, q2 = self.qubit1, self.qubit2
        return (q2.phi_minus - q2.theta_plus) - (q1.phi_minus - q1.theta_plus)


def qubit_ket(p: QubitParams) -> np.ndarray:
    """Single-qubit ket (2,) on the basis (|+>, |->)."""
    q_minus = math.sqrt(1.0 - p.r_plus * p.r_plus)
    return np.array(
        [
            p.r_plus * complex(math.cos(p.theta_plus), math.sin(p.theta_plus)),
            q_minus * complex(math.cos(p.phi_minus), math.sin(p.phi_minus)),
        ]
    )


def product_state(d: ParamDraw) -> np.ndarray:
    """Tensor-product two-qubit ket (4,) = (a1*a2, a1*b2, b1*a2, b1*b2)."""
    return np.kron(qubit_ket(d.qubit1), qubit_ket(d.qubit2))


def inner(a: np.ndarray, b: np.ndarray) -> complex:
    """Inner product <a|b>, conjugate-linear in the first argument."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise DomainError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return complex(np.vdot(a, b))


def norm_error(state: np.ndarray) -> float:
    """Absolute deviation of the squared norm from 1."""
    state = np.asarray(state)
    return abs(float(np.sum(np.abs(state) ** 2)) - 1.0)


def assert_unit(state: np.ndarray, tol: float = NORM_TOL) -> None:
    err = norm_error(state)
    if err > tol:
        raise DomainError(f"state norm error {err:.3e} exceeds {tol:.1e}")


# --------------------------------------------------------------------------
# Ensemble specification and sampling
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Fixed:
    """Degenerate distribution: always returns ``value``."""

    value: float

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return np.full(n, self.value)

    @property
    def support(self) -> tuple[float, float]:
        return (self.value, self.value)


@dataclass(frozen=True)
class UniformHalfOpen:
    """Uniform distribution on the half-open interval [lo, hi)."""

    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise DomainError(f"need lo < hi, got [{self.lo}, {self.hi})")

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(self.lo, self.hi, n)

    @property
    def support(self) -> tuple[float, float]:
        return (self.lo, self.hi)


Distribution = Union[Fixed, UniformHalfOpen]


def mean_square(dist: Distribution) -> float:
    """E{X^2}."""
    if isinstance(dist, Fixed):
        return dist.value**2
    lo, hi = dist.lo, dist.hi
    return (hi**3 - lo**3) / (3.0 * (hi - lo))


def mean_mod_pair(dist: Distribution) -> float:
    """E{X * sqrt(1 - X^2)} for a modulus-valued parameter."""
    if isinstance(dist, Fixed):
        return dist.value * math.sqrt(1.0 - dist.value**2)
    lo, hi = dist.lo, dist.hi
    # antiderivative of x*sqrt(1-x^2) is -(1-x^2)^{3/2} / 3
    return ((1.0 - lo * lo) ** 1.5 - (1.0 - hi * hi) ** 1.5) / (3.0 * (hi - lo))


def mean_phasor(dist: Distribution) -> complex:
    """E{exp(i*X)} for a phase-valued parameter."""
    if isinstance(dist, Fixed):
        return complex(math.cos(dist.value), math.sin(dist.value))
    lo, hi = dist.lo, dist.hi
    return (np.exp(1j * hi) - np.exp(1j * lo)) / (1j * (hi - lo))


_PARAM_ORDER = ("r1", "theta1", "phi1", "r2", "theta2", "phi2")


@dataclass(frozen=True)
class EnsembleSpec:
    """Per-parameter distributions of a random separable preparation.

    All six parameters are drawn independently.  Sampling consumes the
    random stream in the fixed order r1, theta1, phi1, r2, theta2, phi2,
    which makes every draw reproducible from a seeded generator.
    """

    r1: Distribution
    theta1: Distribution
    phi1: Distribution
    r2: Distribution
    theta2: Distribution
    phi2: Distribution

    def __post_init__(self):
        for name in ("r1", "r2"):
            lo, hi = getattr(self, name).support
            if lo < 0.0 or hi > 1.0:
                raise DomainError(f"support of {name} must lie within [0, 1]")

    def distributions(self) -> tuple[Distribution, ...]:
        return tuple(getattr(self, name) for name in _PARAM_ORDER)


def sample_param_arrays(
    spec: EnsembleSpec, n: int, rng: np.random.Generator
) -> tuple[np.ndarray, ...]:
    """Draw n independent parameter sets; returns six (n,) arrays."""
    return tuple(dist.sample(n, rng) for dist in spec.distributions())


def sample_params(spec: EnsembleSpec, rng: np.random.Generator) -> ParamDraw:
    """Draw a single ParamDraw from the ensemble."""
    r1, t1, p1, r2, t2, p2 = (arr[0] for arr in sample_param_arrays(spec, 1, rng))
    return ParamDraw(
        QubitParams(float(r1), float(t1), float(p1)),
        QubitParams(float(r2), float(t2), float(p2)),
    )


def product_states_from_arrays(
    r1: np.ndarray,
    theta1: np.ndarray,
    phi1: np.ndarray,
    r2: np.ndarray,
    theta2: np.ndarray,
    phi2: np.ndarray,
) -> np.ndarray:
    """Vectorized product states; returns an (n, 4) complex array."""
    a1 = r1 * np.exp(1j * theta1)
    b1 = np.sqrt(1.0 - r1 * r1) * np.exp(1j * phi1)
    a2 = r2 * np.exp(1j * theta2)
    b2 = np.sqrt(1.0 - r2 * r2) * np.exp(1j * phi2)
    return np.stack([a1 * a2, a1 * b2, b1 * a2, b1 * b2], axis=1)


def sample_product_states(
    spec: EnsembleSpec, n: int, rng: np.random.Generator
) -> np.ndarray:
    """Draw n preparations and return their (n, 4) state vectors."""
    return product_states_from_arrays(*sample_param_arrays(spec, n, rng))


def sin_delta_init_mean(spec: EnsembleSpec) -> float:
    """E{sin((phi2 - theta2) - (phi1 - theta1))} from per-parameter phasors.

    The four phase parameters are independent, so the expectation of the
    combined phasor factors into per-parameter phasor means.
    """
    phasor = (
        mean_phasor(spec.phi2)
        * np.conj(mean_phasor(spec.theta2))
        * np.conj(mean_phasor(spec.phi1))
        * mean_phasor(spec.theta1)
    )
    return float(np.imag(phasor))
