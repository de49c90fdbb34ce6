"""Blind process tomography: phase factors from single-preparation statistics.

Everything here consumes probability-expectation estimates only, never the
individual preparations, plus the known statistics of the preparation
ensembles.  The pipeline has two parts:

* z-basis moments at tau1 give v = sgn(cos(-Jxy*tau1/hbar)) * sin(-Jxy*tau1/hbar)
  through a two-ensemble scheme (one with E{sin Delta_I} = 0 for |v|, one with
  a known-positive E{sin Delta_I} for the sign), hence the determination
  delta_Ed = arcsin(v) of the Jxy phase.
* z- and x-basis expectations at tau2 pin down x = (Jz*tau2/hbar) mod 2pi via a
  one-parameter fit of the forward model, hence the determination
  delta_phi10d of the Jz phase.

The remaining integer ambiguities (k*pi and 2k*pi) drop out of the
reconstructed evolution operator at tau3 = 4*tau1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .heisenberg import HBAR, angular_frequencies, evolution_from_phases, mixing_basis_q, wrap_phase
from .measurement import Basis, basis_change
from .states import (
    DomainError,
    EnsembleSpec,
    mean_mod_pair,
    mean_phasor,
    mean_square,
    sin_delta_init_mean,
)

_Q = mixing_basis_q()


class EstimationError(RuntimeError):
    """A blind-estimation step cannot produce a usable value."""


class IllConditionedEnsembleError(EstimationError):
    """The ensemble moments leave the modulus of v unidentifiable."""


class IndeterminatePhaseError(EstimationError):
    """The fit objective is flat; the phase carries no signal."""


@dataclass(frozen=True)
class EnsembleMoments:
    """Scalar preparation-ensemble moments consumed by the estimators.

    a = E{r1^2}, b = E{r2^2}, g1 = E{r1*sqrt(1-r1^2)}, g2 likewise for r2,
    s = E{sin Delta_I}.
    """

    a: float
    b: float
    g1: float
    g2: float
    s: float

    def __post_init__(self):
        if not (0.0 <= self.a <= 1.0 and 0.0 <= self.b <= 1.0):
            raise DomainError("a and b must lie in [0, 1]")
        if not (0.0 <= self.g1 <= 0.5 and 0.0 <= self.g2 <= 0.5):
            raise DomainError("g1 and g2 must lie in [0, 0.5]")
        if not -1.0 <= self.s <= 1.0:
            raise DomainError("s must lie in [-1, 1]")

    @classmethod
    def from_ensemble(cls, spec: EnsembleSpec) -> "EnsembleMoments":
        return cls(
            a=mean_square(spec.r1),
            b=mean_square(spec.r2),
            g1=mean_mod_pair(spec.r1),
            g2=mean_mod_pair(spec.r2),
            s=sin_delta_init_mean(spec),
        )

    def with_amplitude_moments(self, a: float, b: float) -> "EnsembleMoments":
        return replace(self, a=a, b=b)


@dataclass(frozen=True)
class PhaseEstimates:
    """Blindly estimated phase determinations and per-run quality flags."""

    v_hat: float
    delta_ed_hat: float
    x_hat: float | None = None
    delta_phi10d_hat: float | None = None
    flags: tuple[str, ...] = ()


def invert_amplitude_moments(m1: float, m4: float) -> tuple[float, float, tuple[str, ...]]:
    """Recover (a, b) = (E{r1^2}, E{r2^2}) from E{p1zz} and E{p4zz}.

    E{p1zz} = a*b and E{p4zz} = (1-a)*(1-b), so a and b are the roots of
    x^2 - (1 + m1 - m4)*x + m1; the smaller root is assigned to a.  A
    negative discriminant can only come from sampling noise: it is clamped to
    zero and the result flagged as degraded.
    """
    if not (0.0 <= m1 <= 1.0 and 0.0 <= m4 <= 1.0):
        raise DomainError("moment estimates must lie in [0, 1]")
    flags: tuple[str, ...] = ()
    tr = 1.0 + m1 - m4
    disc = tr * tr - 4.0 * m1
    if disc < 0.0:
        disc = 0.0
        flags += ("amplitude_moments_degraded",)
    root = math.sqrt(disc)
    a = (tr - root) / 2.0
    b = (tr + root) / 2.0
    if a < 0.0 or b > 1.0:
        a = min(max(a, 0.0), 1.0)
        b = min(max(b, 0.0), 1.0)
        flags += ("amplitude_moments_clamped",)
    return a, b, flags


def estimate_v(
    ep2_step1: float,
    ep2_step2: float,
    mom1: EnsembleMoments,
    mom2: EnsembleMoments,
    sign_floor: float = 1e-9,
) -> tuple[float, tuple[str, ...]]:
    """Estimate v from the (+,-) outcome expectation of the two-step scheme.

    Step 1 (mom1.s == 0) isolates |v| through
        E{p2zz} = a*(1-b)*(1-v^2) + (1-a)*b*v^2.
    Step 2 (mom2.s > 0 known) recovers the sign: the cross term
    -2*g1*g2*sqrt(1-v^2)*|v|*s lowers E{p2zz} below the sign-free prediction
    exactly when v > 0.
    """
    if mom1.s != 0.0:
        raise DomainError("step-1 ensemble must have E{sin Delta_I} = 0")
    if not mom2.s > 0.0:
        raise DomainError("step-2 ensemble must have E{sin Delta_I} > 0")
    flags: tuple[str, ...] = ()

    denom = (1.0 - mom1.a) * mom1.b - mom1.a * (1.0 - mom1.b)
    if abs(denom) < 1e-6:
        raise IllConditionedEnsembleError(
            f"v-modulus denominator {denom:.3e} below 1e-6; ensemble cannot resolve |v|"
        )
    v2 = (ep2_step1 - mom1.a * (1.0 - mom1.b)) / denom
    if v2 < 0.0 or v2 > 1.0:
        v2 = min(max(v2, 0.0), 1.0)
        flags += ("v_squared_clamped",)
    v_abs = math.sqrt(v2)

    cross_coeff = 2.0 * mom2.g1 * mom2.g2 * math.sqrt(1.0 - v2) * v_abs * mom2.s
    if cross_coeff < sign_floor:
        sign = 1.0
        flags += ("v_sign_indeterminate",)
    else:
        predicted = mom2.a * (1.0 - mom2.b) * (1.0 - v2) + (1.0 - mom2.a) * mom2.b * v2
        sign = 1.0 if predicted - ep2_step2 >= 0.0 else -1.0
    return sign * v_abs, flags


def delta_ed(v_hat: float) -> float:
    """Principal determination arcsin(v) in [-pi/2, pi/2]."""
    if not -1.0 <= v_hat <= 1.0:
        raise DomainError(f"v_hat must lie in [-1, 1], got {v_hat}")
    return math.asin(v_hat)


# --------------------------------------------------------------------------
# Forward model of probability expectations
# --------------------------------------------------------------------------

def second_moment_matrix(spec: EnsembleSpec) -> np.ndarray:
    """S = E{u u^dagger} with u = Q c, from closed-form ensemble moments.

    c = (a1*a2, a1*b2, b1*a2, b1*b2) factors over the two independent qubits,
    so E{c c^dagger} is the Kronecker product of per-qubit 2x2 moment blocks.
    This is the exact (infinite-draw) limit of averaging over parameter draws.
    """
    blocks = []
    for r, theta, phi in ((spec.r1, spec.theta1, spec.phi1), (spec.r2, spec.theta2, spec.phi2)):
        rr = mean_square(r)
        cross = mean_mod_pair(r) * mean_phasor(theta) * np.conj(mean_phasor(phi))
        blocks.append(np.array([[rr, cross], [np.conj(cross), 1.0 - rr]]))
    c_moment = np.kron(blocks[0], blocks[1])
    return _Q @ c_moment @ _Q


def d_phases(gb_phase: float, jxy_phase: float, x: float) -> np.ndarray:
    """The four diagonal phases w_k*tau expressed through the three angles.

    gb_phase = G*B*tau/hbar, jxy_phase = Jxy*tau/hbar, x = Jz*tau/hbar; the
    probabilities depend on x only mod 2pi (x -> x + 2pi flips the global sign
    of the evolution operator).
    """
    half = 0.5 * x
    return np.array(
        [gb_phase - half, -jxy_phase + half, jxy_phase + half, -gb_phase - half]
    )


def expected_probs(S: np.ndarray, phases: np.ndarray, basis: Basis) -> np.ndarray:
    """Exact E{P(A_k)} for states evolved with the given diagonal phases."""
    d = np.exp(-1j * wrap_phase(phases))
    A = (basis_change(basis) @ _Q) * d
    return np.real(np.einsum("km,mn,kn->k", A, S, np.conj(A)))


def exact_expected_probs(
    spec: EnsembleSpec, model, tau: float, basis: Basis
) -> np.ndarray:
    """Exact expectations for a known physical model (noise-free oracle input)."""
    return expected_probs(
        second_moment_matrix(spec), angular_frequencies(model).as_array() * tau, basis
    )


def _harmonic_coefficients(
    S: np.ndarray, gb_phase: float, jxy_phase: float, basis: Basis
) -> tuple[np.ndarray, np.ndarray]:
    """Coefficients of E{p_k}(x) = a_k + Re(b_k * exp(i*x)).

    The D-phase differences carry x with coefficients in {-1, 0, +1} only, so
    each expectation is exactly a first-harmonic sinusoid in x; three
    evaluations determine it.
    """
    p0 = expected_probs(S, d_phases(gb_phase, jxy_phase, 0.0), basis)
    p_quarter = expected_probs(S, d_phases(gb_phase, jxy_phase, math.pi / 2.0), basis)
    p_half = expected_probs(S, d_phases(gb_phase, jxy_phase, math.pi), basis)
    a = (p0 + p_half) / 2.0
    return a, (p0 - p_half) / 2.0 + 1j * (a - p_quarter)


def _golden_section(f, lo: float, hi: float, tol: float) -> float:
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    x1 = hi - invphi * (hi - lo)
    x2 = lo + invphi * (hi - lo)
    f1, f2 = f(x1), f(x2)
    while hi - lo > tol:
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - invphi * (hi - lo)
            f1 = f(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + invphi * (hi - lo)
            f2 = f(x2)
    return (lo + hi) / 2.0


def fit_jz_phase(
    exp_zz: np.ndarray,
    exp_xx: np.ndarray,
    jxy_phase_tau2: float,
    gb_phase_tau2: float,
    ensembles: tuple[EnsembleSpec, EnsembleSpec],
    coarse_points: int = 3600,
    refine_tol: float = 1e-12,
    flat_floor: float = 1e-12,
) -> tuple[float, float]:
    """Fit x = (Jz*tau2/hbar) mod 2pi to measured z- and x-basis expectations.

    exp_zz and exp_xx hold one expectation row per ensemble instance, shape
    (2, 4).  The forward model is fully known once the Jxy tau2-phase and the
    field tau2-phase are fixed, leaving x as the single unknown; it is located
    by a coarse scan (0.1 degree at the default 3600 points) and refined by
    golden section.  Returns (x_hat, delta_phi10d_hat), both in (-pi, pi].
    """
    exp_zz = np.asarray(exp_zz, dtype=float).reshape(2, 4)
    exp_xx = np.asarray(exp_xx, dtype=float).reshape(2, 4)
    if not (np.all(exp_zz >= -1e-9) and np.all(exp_zz <= 1.0 + 1e-9)):
        raise DomainError("z-basis expectations must lie in [0, 1]")
    if not (np.all(exp_xx >= -1e-9) and np.all(exp_xx <= 1.0 + 1e-9)):
        raise DomainError("x-basis expectations must lie in [0, 1]")

    offsets = []
    cos_amp = []
    sin_amp = []
    for spec, ezz, exx in zip(ensembles, exp_zz, exp_xx):
        S = second_moment_matrix(spec)
        for basis, measured in ((Basis.ZZ, ezz), (Basis.XX, exx)):
            a, b = _harmonic_coefficients(S, gb_phase_tau2, jxy_phase_tau2, basis)
            offsets.append(a - measured)
            cos_amp.append(np.real(b))
            sin_amp.append(-np.imag(b))
    c0 = np.concatenate(offsets)
    cb = np.concatenate(cos_amp)
    sb = np.concatenate(sin_amp)

    def objective(x):
        resid = c0[:, None] + cb[:, None] * np.cos(x) + sb[:, None] * np.sin(x)
        return np.sum(resid * resid, axis=0)

    grid = np.linspace(-math.pi, math.pi, coarse_points, endpoint=False)
    values = objective(grid)
    spread = float(values.max() - values.min())
    if spread < 10.0 * flat_floor:
        raise IndeterminatePhaseError(
            f"objective spread {spread:.3e} below 10x the noise floor {flat_floor:.1e}"
        )
    step = 2.0 * math.pi / coarse_points
    center = float(grid[int(np.argmin(values))])
    x_hat = _golden_section(
        lambda x: float(objective(np.array([x]))[0]), center - step, center + step, refine_tol
    )
    x_hat = float(wrap_phase(x_hat))
    delta_phi10d = float(wrap_phase(x_hat - jxy_phase_tau2 - gb_phase_tau2))
    return x_hat, delta_phi10d


def reconstruct_process(
    delta_ed_hat: float,
    delta_phi10d_hat: float,
    G: float,
    B: float,
    tau1: float,
    k_xy: int = 0,
    k_z: int = 0,
) -> np.ndarray:
    """Assemble the estimated evolution operator at tau3 = 4*tau1.

    The shifted phase estimates are Jxy*tau1/hbar = -delta_Ed + k_xy*pi and
    Jz*tau2/hbar = delta_phi10d + 2*k_z*pi + Jxy*tau2/hbar + G*B*tau2/hbar with
    tau2 = 2*tau1.  Either integer shifts every tau3 diagonal phase by a
    multiple of 2pi, so the returned matrix does not depend on k_xy or k_z.
    """
    tau2 = 2.0 * tau1
    tau3 = 4.0 * tau1
    jxy_phase1 = -delta_ed_hat + k_xy * math.pi
    gb_phase2 = G * B * tau2 / HBAR
    jz_phase2 = delta_phi10d_hat + 2.0 * k_z * math.pi + 2.0 * jxy_phase1 + gb_phase2
    gb_phase3 = G * B * tau3 / HBAR
    jxy_phase3 = 4.0 * jxy_phase1
    # tau3 phases: w*tau3 with Jz*tau3/(2*hbar) = Jz*tau2/hbar
    phases = np.array(
        [
            gb_phase3 - jz_phase2,
            -jxy_phase3 + jz_phase2,
            jxy_phase3 + jz_phase2,
            -gb_phase3 - jz_phase2,
        ]
    )
    return evolution_from_phases(phases)
