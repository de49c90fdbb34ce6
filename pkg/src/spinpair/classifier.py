"""Overlap-based classification of classical unit vectors stored in kets.

The overlap circuit is modeled as a Bernoulli channel: one invocation
consumes one fresh preparation of each input ket and returns a single bit
whose failure probability is (1 - |<k1|k2>|^2) / 2, i.e. 0 for equal states
and 1/2 for orthogonal ones.  Mean overlaps are estimated by pooling bits
across all references of a class, which allows a single preparation per
reference.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .states import DomainError, inner

ENCODE_NORM_TOL = 1e-8
DEGENERACY_TOL = 1e-6


class DegenerateAuxiliaryError(ValueError):
    """An auxiliary combination vector collapsed below the usable norm."""


@dataclass(frozen=True)
class RegisterKet:
    """Unit-norm amplitudes of a Q-qubit register state."""

    amplitudes: np.ndarray
    qubits: int

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        object.__setattr__(self, "amplitudes", amps)
        if amps.ndim != 1 or amps.size != 2**self.qubits:
            raise DomainError(
                f"need 2**{self.qubits} amplitudes, got shape {amps.shape}"
            )
        err = abs(float(np.sum(np.abs(amps) ** 2)) - 1.0)
        if err > 1e-10:
            raise DomainError(f"register norm error {err:.3e} exceeds 1e-10")


@dataclass(frozen=True)
class ClassModel:
    class_id: int
    references: tuple[RegisterKet, ...]

    def __post_init__(self):
        if not self.references:
            raise DomainError("a class needs at least one reference ket")


@dataclass(frozen=True)
class Decision:
    class_id: int | None  # None encodes rejection
    score: float

    @property
    def rejected(self) -> bool:
        return self.class_id is None


@dataclass
class PreparationLedger:
    """Audit counter of state preparations consumed by channel invocations."""

    query_preps: int = 0
    reference_preps: int = 0

    def record(self) -> None:
        self.query_preps += 1
        self.reference_preps += 1

    @property
    def total(self) -> int:
        return self.query_preps + self.reference_preps


def encode(v: Sequence[complex] | np.ndarray, qubits: int) -> RegisterKet:
    """Store a unit vector in a register ket, zero-padding to 2**qubits."""
    v = np.asarray(v, dtype=complex)
    if v.ndim != 1 or v.size > 2**qubits:
        raise DomainError(f"vector of length {v.size} does not fit {qubits} qubits")
    err = abs(float(np.sum(np.abs(v) ** 2)) - 1.0)
    if err > ENCODE_NORM_TOL:
        raise DomainError(
            f"vector norm error {err:.3e} exceeds {ENCODE_NORM_TOL:.1e}; "
            "rescale before encoding (the norm is handled separately)"
        )
    amps = np.zeros(2**qubits, dtype=complex)
    amps[: v.size] = v
    return RegisterKet(amps, qubits)


def exact_overlap(k1: RegisterKet, k2: RegisterKet) -> float:
    return abs(inner(k1.amplitudes, k2.amplitudes)) ** 2


def overlap_channel(
    k1: RegisterKet,
    k2: RegisterKet,
    rng: np.random.Generator,
    ledger: PreparationLedger | None = None,
) -> int:
    """One single-preparation invocation of the overlap circuit; returns a bit.

    Bit 1 (the failure outcome) occurs with probability (1 - overlap)/2.
    """
    if k1.qubits != k2.qubits:
        raise DomainError("register sizes differ")
    if ledger is not None:
        ledger.record()
    p_fail = (1.0 - exact_overlap(k1, k2)) / 2.0
    return int(rng.random() < p_fail)


def estimate_overlap(bits: Sequence[int] | np.ndarray, count: int) -> float:
    """Invert the channel law from pooled bits: clamp(1 - 2*failures/L, 0, 1)."""
    if count < 1:
        raise DomainError("at least one channel bit is required")
    failures = int(np.sum(np.asarray(bits)[:count]))
    return min(max(1.0 - 2.0 * failures / count, 0.0), 1.0)


OverlapSource = Callable[[RegisterKet, RegisterKet], float]


def exact_overlap_source() -> OverlapSource:
    return exact_overlap


def channel_overlap_source(
    budget: int,
    rng: np.random.Generator,
    ledger: PreparationLedger | None = None,
) -> OverlapSource:
    """Overlap estimates from `budget` channel invocations per pair."""
    if budget < 1:
        raise DomainError("budget must be >= 1")

    def source(k1: RegisterKet, k2: RegisterKet) -> float:
        bits = [overlap_channel(k1, k2, rng, ledger) for _ in range(budget)]
        return estimate_overlap(bits, budget)

    return source


def dot_product(
    v1: Sequence[complex] | np.ndarray,
    v2: Sequence[complex] | np.ndarray,
    overlap_source: OverlapSource,
    qubits: int | None = None,
) -> complex:
    """Complex dot product <v1|v2> recovered from three overlaps.

    Auxiliary states encode mu3*(v1 + v2) and mu4*(v1 + i*v2); their overlaps
    with v1 expose the real and imaginary parts:
        Re = ov13 / (2*mu3^2) - (1 + ov12) / 2
        Im = (1 + ov12) / 2 - ov14 / (2*mu4^2)
    """
    v1 = np.asarray(v1, dtype=complex)
    v2 = np.asarray(v2, dtype=complex)
    if v1.shape != v2.shape:
        raise DomainError("vectors must have equal length")
    if qubits is None:
        qubits = max(1, math.ceil(math.log2(v1.size)))

    sums = {"v1 + v2": v1 + v2, "v1 + i*v2": v1 + 1j * v2}
    norms = {}
    for name, vec in sums.items():
        n = float(np.linalg.norm(vec))
        if n < DEGENERACY_TOL:
            raise DegenerateAuxiliaryError(
                f"auxiliary vector {name} collapsed (norm {n:.2e} < {DEGENERACY_TOL:.0e})"
            )
        norms[name] = n
    mu3 = 1.0 / norms["v1 + v2"]
    mu4 = 1.0 / norms["v1 + i*v2"]

    k1 = encode(v1, qubits)
    k2 = encode(v2, qubits)
    k3 = encode(mu3 * sums["v1 + v2"], qubits)
    k4 = encode(mu4 * sums["v1 + i*v2"], qubits)

    ov12 = overlap_source(k1, k2)
    ov13 = overlap_source(k1, k3)
    ov14 = overlap_source(k1, k4)
    re = ov13 / (2.0 * mu3**2) - (1.0 + ov12) / 2.0
    im = (1.0 + ov12) / 2.0 - ov14 / (2.0 * mu4**2)
    return complex(re, im)


def class_mean_overlap_exact(query: RegisterKet, model: ClassModel) -> float:
    return float(np.mean([exact_overlap(query, ref) for ref in model.references]))


def class_mean_overlap_channel(
    query: RegisterKet,
    model: ClassModel,
    budget: int,
    rng: np.random.Generator,
    ledger: PreparationLedger | None = None,
) -> float:
    """Pooled single-preparation estimate of the class mean overlap.

    Bits from all references are pooled into one relative failure frequency,
    so budget = 1 per reference is enough when the class holds many of them.
    """
    failures = 0
    trials = 0
    for ref in model.references:
        for _ in range(budget):
            failures += overlap_channel(query, ref, rng, ledger)
            trials += 1
    return min(max(1.0 - 2.0 * failures / trials, 0.0), 1.0)


def classify(
    query: RegisterKet,
    classes: Sequence[ClassModel],
    budget: int,
    threshold: float,
    backend: str = "exact",
    rng: np.random.Generator | None = None,
    ledger: PreparationLedger | None = None,
) -> Decision:
    """Assign the query to the class with the highest mean overlap.

    The winning score below the threshold yields rejection.  Score ties break
    toward the lower class id.
    """
    if not classes:
        raise DomainError("at least one class is required")
    if budget < 1:
        raise DomainError("budget must be >= 1")
    if backend not in ("exact", "channel"):
        raise DomainError(f"unknown backend {backend!r}")
    if backend == "channel" and rng is None:
        raise DomainError("the channel backend needs a random generator")

    best_id: int | None = None
    best_score = -math.inf
    for model in sorted(classes, key=lambda m: m.class_id):
        if backend == "exact":
            score = class_mean_overlap_exact(query, model)
        else:
            score = class_mean_overlap_channel(query, model, budget, rng, ledger)
        if score > best_score:
            best_id, best_score = model.class_id, score
    if best_score < threshold:
        return Decision(None, best_score)
    return Decision(best_id, best_score)


# --------------------------------------------------------------------------
# CSV interfaces
# --------------------------------------------------------------------------

def references_from_csv(text: str, qubits: int) -> list[ClassModel]:
    """Load reference kets from CSV rows: class_id, then vector components.

    Components may be plain reals or complex literals understood by Python.
    """
    by_class: dict[int, list[RegisterKet]] = {}
    for row in csv.reader(io.StringIO(text)):
        if not row or row[0].startswith("#"):
            continue
        class_id = int(row[0])
        vec = np.array([complex(cell) for cell in row[1:]])
        by_class.setdefault(class_id, []).append(encode(vec, qubits))
    return [
        ClassModel(cid, tuple(refs)) for cid, refs in sorted(by_class.items())
    ]


def decisions_to_csv(decisions: Sequence[tuple[int, Decision]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["query_id", "outcome", "score"])
    for query_id, decision in decisions:
        outcome = "REJECT" if decision.rejected else str(decision.class_id)
        writer.writerow([query_id, outcome, f"{decision.score:.10g}"])
    return buf.getvalue()
