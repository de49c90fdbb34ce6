"""Separating unitary for blind source separation / state restoration.

The separator U = Q * Dtilde * Q carries the inverse phases of the estimated
evolution at tau3, so U * M(tau3) = I up to estimation errors.  Restoration
works identically for product and entangled inputs: it is a plain matrix
inverse, adapted blindly.

Dtilde is modeled as a diagonal matrix; mapping its phases onto physical gate
control signals is taken as exact (identity), so gamma values are the control
settings.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .heisenberg import HBAR, mixing_basis_q, wrap_phase
from .states import DomainError, inner

_Q = mixing_basis_q()


@dataclass(frozen=True)
class SeparatorPhases:
    """Diagonal phases gamma_1..gamma_4 of the separator, used mod 2pi."""

    gamma1: float
    gamma2: float
    gamma3: float
    gamma4: float

    def __post_init__(self):
        for k in range(1, 5):
            if not math.isfinite(getattr(self, f"gamma{k}")):
                raise DomainError("separator phases must be finite")

    def as_array(self) -> np.ndarray:
        return np.array([self.gamma1, self.gamma2, self.gamma3, self.gamma4])


def separator_phases(
    jxy_hat: float, jz_hat: float, G: float, B: float, tau3: float
) -> SeparatorPhases:
    """Inverse phases gamma_k = w_k(estimates) * tau3 of the tau3 evolution.

    Shifting the underlying phase determinations by k*pi (Jxy at tau1) or
    2*k*pi (Jz at tau2) moves every gamma by a multiple of 2*pi and leaves the
    separator unchanged.
    """
    gb = G * B * tau3 / HBAR
    jxy = jxy_hat * tau3 / HBAR
    jz_half = jz_hat * tau3 / (2.0 * HBAR)
    return SeparatorPhases(
        gamma1=gb - jz_half,
        gamma2=-jxy + jz_half,
        gamma3=jxy + jz_half,
        gamma4=-gb - jz_half,
    )


def separator_phases_from_determinations(
    delta_ed_hat: float,
    delta_phi10d_hat: float,
    G: float,
    B: float,
    tau1: float,
    k_xy: int = 0,
    k_z: int = 0,
) -> SeparatorPhases:
    """Separator phases straight from the blind phase determinations.

    Equivalent to plugging the shifted estimates into separator_phases with
    tau3 = 4*tau1; any integer choice gives the same separator mod 2pi.
    """
    jxy_phase1 = -delta_ed_hat + k_xy * math.pi
    gb_phase2 = G * B * 2.0 * tau1 / HBAR
    jz_phase2 = delta_phi10d_hat + 2.0 * k_z * math.pi + 2.0 * jxy_phase1 + gb_phase2
    return SeparatorPhases(
        gamma1=2.0 * gb_phase2 - jz_phase2,
        gamma2=-4.0 * jxy_phase1 + jz_phase2,
        gamma3=4.0 * jxy_phase1 + jz_phase2,
        gamma4=-2.0 * gb_phase2 - jz_phase2,
    )


def separating_unitary(g: SeparatorPhases) -> np.ndarray:
    """U = Q * diag(exp(i*gamma_k)) * Q."""
    d = np.exp(1j * wrap_phase(g.as_array()))
    return (_Q * d) @ _Q


def restore(state: np.ndarray, U: np.ndarray) -> np.ndarray:
    """Send one (possibly entangled) state through the separator."""
    state = np.asarray(state)
    if state.shape != (4,):
        raise DomainError(f"expected a 4-component state, got shape {state.shape}")
    return U @ state


def fidelity(restored: np.ndarray, reference: np.ndarray) -> float:
    """Squared overlap |<reference|restored>|^2, insensitive to global phase."""
    return abs(inner(reference, restored)) ** 2
