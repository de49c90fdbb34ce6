"""Blind Hamiltonian parameter estimation via the two-interval grid method.

Each part of the phase-estimation pipeline is run at two measurement time
intervals.  Every interval yields a regular grid of candidate exchange values
(step hbar*pi/tau for Jxy, 2*hbar*pi/tau for Jz); the second interval is
chosen so that, across the prior range, only the grid points nearest the true
value stay aligned.  The couple of closest in-range candidates is averaged
into the final estimate, which removes the additive k*pi / 2k*pi phase
indeterminacies.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Protocol

import numpy as np

from . import bqpt
from .heisenberg import HBAR, PhysicalModel
from .measurement import Basis, sample_counts, single_prep_mean
from .states import DomainError, EnsembleSpec, sample_product_states
from .measurement import outcome_probs_batch


class GridKind(enum.Enum):
    XY = "xy"
    Z = "z"


@dataclass(frozen=True)
class GridSpec:
    """One regular grid of candidate exchange values at a fixed interval."""

    tau: float
    k_min: int
    k_max: int
    base_angle: float
    kind: GridKind

    def __post_init__(self):
        if self.tau <= 0.0:
            raise DomainError("tau must be positive")
        if self.k_min > self.k_max:
            raise DomainError("k_min must not exceed k_max")


@dataclass(frozen=True)
class HamiltonianEstimate:
    """Final exchange estimates in joules; jz_hat is None when rejected."""

    jxy_hat: float
    jz_hat: float | None
    flags: tuple[str, ...] = ()


def companion_interval(tau_a: float, k_min: int, k_max: int) -> float:
    """Second interval making the two bounded grids maximally desynchronized.

    tau_b/tau_a = (k_max - k_min + 1/2) / (k_max - k_min): the far ends of the
    two in-range grids then differ by half a step of the second grid.
    """
    span = k_max - k_min
    if span <= 0:
        raise DomainError("k_max must exceed k_min")
    return tau_a * (span + 0.5) / span


def grid_candidates(g: GridSpec, extra_phase: float = 0.0) -> np.ndarray:
    """Candidate exchange values (joules) for k = k_min..k_max inclusive.

    XY: J(k) = (hbar/tau) * (-base_angle + k*pi), step hbar*pi/tau.
    Z:  J(k) = (hbar/tau) * (base_angle + 2*k*pi + extra_phase), step
    2*hbar*pi/tau, where extra_phase carries the known (Jxy + G*B)*tau/hbar.
    """
    ks = np.arange(g.k_min, g.k_max + 1, dtype=float)
    if g.kind is GridKind.XY:
        return (HBAR / g.tau) * (-g.base_angle + ks * math.pi)
    return (HBAR / g.tau) * (g.base_angle + 2.0 * ks * math.pi + extra_phase)


def xy_k_bounds(prior: tuple[float, float], tau: float) -> tuple[int, int]:
    """Tightest k range whose XY grid values can fall inside the prior.

    base_angle ranges over [-pi/2, pi/2] (arcsin values), so k*pi must reach
    into [lo*tau/hbar - pi/2, hi*tau/hbar + pi/2].
    """
    lo, hi = prior
    k_min = math.ceil((lo * tau / HBAR - math.pi / 2.0) / math.pi)
    k_max = math.floor((hi * tau / HBAR + math.pi / 2.0) / math.pi)
    if k_min > k_max:
        raise DomainError("prior range admits no XY grid candidate")
    return k_min, k_max


def z_k_bounds(prior: tuple[float, float], tau: float, extra_phase: float) -> tuple[int, int]:
    """Tightest k range for the Z grid, with base_angle over (-pi, pi]."""
    lo, hi = prior
    two_pi = 2.0 * math.pi
    k_min = math.ceil((lo * tau / HBAR - extra_phase - math.pi) / two_pi)
    k_max = math.floor((hi * tau / HBAR - extra_phase + math.pi) / two_pi)
    if k_min > k_max:
        raise DomainError("prior range admits no Z grid candidate")
    return k_min, k_max


def closest_pair_estimate(
    grid1: np.ndarray,
    grid2: np.ndarray,
    range_lo: float,
    range_hi: float,
) -> tuple[float, float]:
    """Mean of the closest in-range pair of candidates, plus their gap.

    Ties on the gap break toward the lower mean, which makes the selection
    deterministic.  Raises when either grid has no candidate in range.
    """
    g1 = np.asarray(grid1, dtype=float)
    g2 = np.asarray(grid2, dtype=float)
    g1 = g1[(g1 >= range_lo) & (g1 <= range_hi)]
    g2 = g2[(g2 >= range_lo) & (g2 <= range_hi)]
    if g1.size == 0 or g2.size == 0:
        raise DomainError("no grid candidates inside the prior range")
    diffs = np.abs(g1[:, None] - g2[None, :])
    best = float(diffs.min())
    means = (g1[:, None] + g2[None, :]) / 2.0
    candidates = means[diffs == best]
    return float(candidates.min()), best


# --------------------------------------------------------------------------
# Measurement sources
# --------------------------------------------------------------------------

class MeasurementSource(Protocol):
    """Supplier of probability-expectation estimates for one campaign."""

    def expectations(self, ensemble: EnsembleSpec, tau: float, basis: Basis) -> np.ndarray:
        """Estimate of E{P(A_k)} (4,) after evolving for tau, measured in basis."""
        ...


class SimulatedSource:
    """Full simulation: fresh preparations, evolution, single-prep trials.

    Each campaign draws its states from an independent child stream of the
    seed sequence, in call order, so a fixed seed reproduces every campaign
    bit for bit.  States are processed in chunks to bound memory.
    """

    def __init__(
        self,
        model: PhysicalModel,
        n_states: int,
        preps_per_state: int,
        seed_seq: np.random.SeedSequence,
        chunk: int = 250_000,
    ):
        if n_states < 1 or preps_per_state < 1:
            raise DomainError("n_states and preps_per_state must be >= 1")
        self.model = model
        self.n_states = n_states
        self.preps_per_state = preps_per_state
        self._seq = seed_seq
        self._chunk = chunk

    def expectations(self, ensemble: EnsembleSpec, tau: float, basis: Basis) -> np.ndarray:
        from .heisenberg import evolution_matrix

        rng = np.random.default_rng(self._seq.spawn(1)[0])
        m = evolution_matrix(self.model, tau)
        counts = np.zeros(4, dtype=np.int64)
        remaining = self.n_states
        while remaining > 0:
            batch = min(remaining, self._chunk)
            states = sample_product_states(ensemble, batch, rng)
            probs = outcome_probs_batch(states @ m.T, basis)
            table = sample_counts(probs, self.preps_per_state, rng)
            counts += np.asarray(table.counts)
            remaining -= batch
        total = int(counts.sum())
        return np.asarray(counts, dtype=float) / total


class ExactSource:
    """Noise-free oracle: exact closed-form probability expectations."""

    def __init__(self, model: PhysicalModel):
        self.model = model

    def expectations(self, ensemble: EnsembleSpec, tau: float, basis: Basis) -> np.ndarray:
        return bqpt.exact_expected_probs(ensemble, self.model, tau, basis)


class TabulatedSource:
    """Expectations previously computed offline, keyed by (tau, basis).

    Used for estimation from serialized count tables; taus are matched to
    1e-15 s to absorb text round-tripping.
    """

    def __init__(self, table: dict[tuple[float, str], np.ndarray]):
        self._table = dict(table)

    def expectations(self, ensemble: EnsembleSpec, tau: float, basis: Basis) -> np.ndarray:
        for (t, b), value in self._table.items():
            if b == basis.value and abs(t - tau) < 1e-15:
                return np.asarray(value, dtype=float)
        raise KeyError(f"no tabulated expectations for tau={tau}, basis={basis.value}")


# --------------------------------------------------------------------------
# Stage configurations and pipelines
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class XYStageConfig:
    tau_a: float
    prior: tuple[float, float]  # joules
    step1: EnsembleSpec  # E{sin Delta_I} = 0
    step2: EnsembleSpec  # E{sin Delta_I} > 0, known sign


@dataclass(frozen=True)
class ZStageConfig:
    tau_a: float
    prior: tuple[float, float]  # joules
    instance1: EnsembleSpec
    instance2: EnsembleSpec


@dataclass(frozen=True)
class XYResult:
    jxy_hat: float
    delta_ed_by_tau: tuple[float, float]
    taus: tuple[float, float]
    pair_gap: float
    flags: tuple[str, ...]


@dataclass(frozen=True)
class ZResult:
    jz_hat: float | None
    x_by_tau: tuple[float, ...]
    taus: tuple[float, float]
    pair_gap: float
    flags: tuple[str, ...]

    @property
    def rejected(self) -> bool:
        return self.jz_hat is None


def estimate_delta_ed(
    source: MeasurementSource,
    step1: EnsembleSpec,
    step2: EnsembleSpec,
    tau: float,
) -> tuple[float, tuple[str, ...]]:
    """One application of the v-estimation scheme at a single interval."""
    flags: tuple[str, ...] = ()
    moments = []
    ep2 = []
    for spec in (step1, step2):
        exp = source.expectations(spec, tau, Basis.ZZ)
        a, b, f = bqpt.invert_amplitude_moments(float(exp[0]), float(exp[3]))
        flags += f
        moments.append(bqpt.EnsembleMoments.from_ensemble(spec).with_amplitude_moments(a, b))
        ep2.append(float(exp[1]))
    v_hat, f = bqpt.estimate_v(ep2[0], ep2[1], moments[0], moments[1])
    return bqpt.delta_ed(v_hat), flags + f


def estimate_jxy(source: MeasurementSource, cfg: XYStageConfig) -> XYResult:
    """Two applications of the first pipeline part, then the closest pair."""
    k1 = xy_k_bounds(cfg.prior, cfg.tau_a)
    tau_b = companion_interval(cfg.tau_a, *k1)
    k2 = xy_k_bounds(cfg.prior, tau_b)

    flags: tuple[str, ...] = ()
    grids = []
    deltas = []
    for tau, (k_min, k_max) in ((cfg.tau_a, k1), (tau_b, k2)):
        delta, f = estimate_delta_ed(source, cfg.step1, cfg.step2, tau)
        flags += f
        deltas.append(delta)
        grids.append(
            grid_candidates(GridSpec(tau, k_min, k_max, delta, GridKind.XY))
        )
    jxy_hat, gap = closest_pair_estimate(grids[0], grids[1], *cfg.prior)
    step = HBAR * math.pi / cfg.tau_a
    if gap > 0.25 * step:
        flags += ("jxy_pair_gap_large",)
    return XYResult(jxy_hat, (deltas[0], deltas[1]), (cfg.tau_a, tau_b), gap, flags)


def estimate_jz(
    source: MeasurementSource,
    cfg: ZStageConfig,
    jxy_hat: float,
    G: float,
    B: float,
) -> ZResult:
    """Two applications of the second pipeline part, then the closest pair.

    A run is rejected (jz_hat = None) when the phase fit cannot determine the
    angle; rejected runs are excluded from aggregate error statistics.
    """
    gb = G * B
    extra_a = (jxy_hat + gb) * cfg.tau_a / HBAR
    k1 = z_k_bounds(cfg.prior, cfg.tau_a, extra_a)
    tau_b = companion_interval(cfg.tau_a, *k1)
    extra_b = (jxy_hat + gb) * tau_b / HBAR
    k2 = z_k_bounds(cfg.prior, tau_b, extra_b)

    flags: tuple[str, ...] = ()
    grids = []
    xs: list[float] = []
    for tau, (k_min, k_max), extra in ((cfg.tau_a, k1, extra_a), (tau_b, k2, extra_b)):
        exp_zz = []
        exp_xx = []
        for spec in (cfg.instance1, cfg.instance2):
            exp_zz.append(source.expectations(spec, tau, Basis.ZZ))
            exp_xx.append(source.expectations(spec, tau, Basis.XX))
        try:
            x_hat, dphi = bqpt.fit_jz_phase(
                np.asarray(exp_zz),
                np.asarray(exp_xx),
                jxy_hat * tau / HBAR,
                gb * tau / HBAR,
                (cfg.instance1, cfg.instance2),
            )
        except bqpt.IndeterminatePhaseError:
            return ZResult(None, tuple(xs), (cfg.tau_a, tau_b), math.inf, flags + ("rejected_indeterminate_phase",))
        xs.append(x_hat)
        grids.append(
            grid_candidates(GridSpec(tau, k_min, k_max, dphi, GridKind.Z), extra)
        )
    jz_hat, gap = closest_pair_estimate(grids[0], grids[1], *cfg.prior)
    step = 2.0 * HBAR * math.pi / cfg.tau_a
    if gap > 0.25 * step:
        flags += ("jz_pair_gap_large",)
    return ZResult(jz_hat, tuple(xs), (cfg.tau_a, tau_b), gap, flags)
