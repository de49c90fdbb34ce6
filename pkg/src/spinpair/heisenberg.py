"""Temporal evolution of two qubits under cylindrical-symmetry exchange coupling.

The evolution operator over an interval tau factors as M = Q * D * Q where Q
is a fixed real self-inverse matrix and D is diagonal with unit-modulus
entries exp(-i * w_k * tau).  The four angular frequencies w_k are linear in
the field term G*B and the two exchange constants Jxy, Jz.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .states import DomainError

HBAR = 1.0545718e-34  # J s
K_B = 1.380649e-23  # J / K
MU_BOHR = 0.927e-23  # J / T

_SQ2 = 1.0 / math.sqrt(2.0)
_Q = np.array(
    [
        [1.0, 0.0, 0.0, 0.0],
        [0.0, _SQ2, _SQ2, 0.0],
        [0.0, _SQ2, -_SQ2, 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ]
)


@dataclass(frozen=True)
class PhysicalModel:
    """Hamiltonian constants of the coupled pair.

    G is the product of the g-factor and the Bohr magneton (J/T), B the
    magnetic field (T), jxy and jz the principal values of the exchange
    tensor (J).  hbar and k_B live as module constants HBAR and K_B; k_B is
    used only to report exchange constants in Kelvin.
    """

    G: float
    B: float
    jxy: float
    jz: float

    def __post_init__(self):
        if self.G <= 0.0 or self.B <= 0.0:
            raise DomainError("G and B must be strictly positive")
        for name in ("jxy", "jz"):
            if not math.isfinite(getattr(self, name)):
                raise DomainError(f"{name} must be finite")

    @classmethod
    def from_kelvin(
        cls, g: float, b_tesla: float, jxy_kelvin: float, jz_kelvin: float
    ) -> "PhysicalModel":
        """Build from the g-factor and exchange constants given in Kelvin."""
        return cls(
            G=g * MU_BOHR,
            B=b_tesla,
            jxy=jxy_kelvin * K_B,
            jz=jz_kelvin * K_B,
        )

    @property
    def jxy_kelvin(self) -> float:
        return self.jxy / K_B

    @property
    def jz_kelvin(self) -> float:
        return self.jz / K_B


@dataclass(frozen=True)
class Omega4:
    """The four angular frequencies (rad/s), ordered (1,1), (1,0), (0,0), (1,-1)."""

    w11: float
    w10: float
    w00: float
    w1m1: float

    def as_array(self) -> np.ndarray:
        return np.array([self.w11, self.w10, self.w00, self.w1m1])


def mixing_basis_q() -> np.ndarray:
    """The fixed real change-of-basis matrix Q, with Q = Q^-1 = Q^T."""
    return _Q.copy()


def angular_frequencies(m: PhysicalModel) -> Omega4:
    gb = m.G * m.B
    return Omega4(
        w11=(gb - m.jz / 2.0) / HBAR,
        w10=(-m.jxy + m.jz / 2.0) / HBAR,
        w00=(m.jxy + m.jz / 2.0) / HBAR,
        w1m1=(-gb - m.jz / 2.0) / HBAR,
    )


def wrap_phase(phi):
    """Reduce angles into (-pi, pi]."""
    w = np.remainder(np.asarray(phi, dtype=float), 2.0 * np.pi)
    return np.where(w > np.pi, w - 2.0 * np.pi, w)


def evolution_from_phases(phases: np.ndarray) -> np.ndarray:
    """M = Q * diag(exp(-i*phi_k)) * Q for the four given phases (radians).

    Phases are wrapped into (-pi, pi] before the complex exponential so that
    large w*tau products (~1e2 rad) do not lose precision.
    """
    phases = np.asarray(phases, dtype=float)
    if phases.shape != (4,):
        raise DomainError(f"expected 4 phases, got shape {phases.shape}")
    d = np.exp(-1j * wrap_phase(phases))
    return (_Q * d) @ _Q


def evolution_matrix(m: PhysicalModel, tau: float) -> np.ndarray:
    """Evolution operator M(tau) = Q * D(tau) * Q; unitary for any tau >= 0."""
    if tau < 0.0:
        raise DomainError(f"tau must be nonnegative, got {tau}")
    return evolution_from_phases(angular_frequencies(m).as_array() * tau)


def evolution_matrices(phase_rows: np.ndarray) -> np.ndarray:
    """Vectorized form: (n, 4) phase rows -> (n, 4, 4) evolution matrices."""
    phase_rows = np.asarray(phase_rows, dtype=float)
    d = np.exp(-1j * wrap_phase(phase_rows))
    return np.einsum("ij,nj,jk->nik", _Q, d, _Q)
