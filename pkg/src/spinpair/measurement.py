"""Outcome probabilities and single-preparation trial simulation.

Simultaneous two-spin component measurements along Oz (ZZ) or Ox (XX) have
four outcomes, ordered (++, +-, -+, --) in the measurement basis to match the
state component order.  The XX basis uses the real change |+x>,|-x> =
(|+> +- |->)/sqrt(2) applied to each qubit; the same convention is used by
the simulator and by every estimator, which is all the estimators require.
"""
from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .states import DomainError

_HAD1 = np.array([[1.0, 1.0], [1.0, -1.0]]) / math.sqrt(2.0)
_HAD2 = np.kron(_HAD1, _HAD1)

PROB_NORM_TOL = 1e-8


class Basis(enum.Enum):
    ZZ = "zz"
    XX = "xx"


def basis_change(basis: Basis) -> np.ndarray:
    """Real matrix mapping standard components to measurement-basis components."""
    if basis is Basis.ZZ:
        return np.eye(4)
    return _HAD2.copy()


def outcome_probs(state: np.ndarray, basis: Basis) -> np.ndarray:
    """Outcome probabilities (4,) of a unit-norm two-qubit state."""
    state = np.asarray(state)
    if state.shape != (4,):
        raise DomainError(f"expected a 4-component state, got shape {state.shape}")
    p = np.abs(basis_change(basis) @ state) ** 2
    total = float(p.sum())
    if abs(total - 1.0) > PROB_NORM_TOL:
        raise DomainError(f"state norm error {abs(total - 1.0):.3e} exceeds {PROB_NORM_TOL:.1e}")
    return p / total


def outcome_probs_batch(states: np.ndarray, basis: Basis) -> np.ndarray:
    """Vectorized outcome probabilities: (n, 4) states -> (n, 4) rows."""
    states = np.asarray(states)
    p = np.abs(states @ basis_change(basis).T) ** 2
    totals = p.sum(axis=1)
    worst = float(np.max(np.abs(totals - 1.0))) if len(totals) else 0.0
    if worst > PROB_NORM_TOL:
        raise DomainError(f"worst state norm error {worst:.3e} exceeds {PROB_NORM_TOL:.1e}")
    return p / totals[:, None]


@dataclass(frozen=True)
class CountTable:
    """Per-outcome occurrence counts over a number of single-preparation trials."""

    counts: tuple[int, int, int, int]
    trials: int

    def __post_init__(self):
        if any(c < 0 for c in self.counts):
            raise DomainError("counts must be nonnegative")
        if sum(self.counts) != self.trials:
            raise DomainError(
                f"counts sum to {sum(self.counts)}, expected trials = {self.trials}"
            )


def draw_outcomes(prob_rows: np.ndarray, preps_per_state: int, rng: np.random.Generator) -> np.ndarray:
    """Categorical outcomes for each row, (n, K) ints in 0..3.

    Inverse-CDF on a single uniform draw per trial; a draw landing exactly on
    a CDF boundary resolves toward the lower outcome index.
    """
    prob_rows = np.atleast_2d(np.asarray(prob_rows, dtype=float))
    cdf = np.cumsum(prob_rows, axis=1)
    cdf[:, -1] = 1.0  # guard against float drift; rng.random() < 1 always lands
    u = rng.random((prob_rows.shape[0], preps_per_state))
    # count of cdf entries strictly below u == first index with cdf >= u
    return (u[:, :, None] > cdf[:, None, :]).sum(axis=2)


def sample_counts(
    prob_stream: Iterable[np.ndarray] | np.ndarray,
    preps_per_state: int,
    rng: np.random.Generator,
) -> CountTable:
    """Accumulate outcome counts over K preparations of every state in the stream."""
    if preps_per_state < 1:
        raise DomainError("preps_per_state must be >= 1")
    prob_rows = np.atleast_2d(np.asarray(list(prob_stream) if not isinstance(prob_stream, np.ndarray) else prob_stream, dtype=float))
    outcomes = draw_outcomes(prob_rows, preps_per_state, rng)
    counts = np.bincount(outcomes.ravel(), minlength=4)
    return CountTable(tuple(int(c) for c in counts), int(outcomes.size))


def single_prep_mean(table: CountTable) -> np.ndarray:
    """Relative outcome frequencies over all trials (the pooled estimator)."""
    if table.trials < 1:
        raise DomainError("at least one trial is required")
    return np.asarray(table.counts, dtype=float) / table.trials


def two_level_mean(per_state_frequencies: Sequence[np.ndarray]) -> np.ndarray:
    """Componentwise mean of per-state frequency estimates."""
    rows = np.atleast_2d(np.asarray(per_state_frequencies, dtype=float))
    if rows.size == 0:
        raise DomainError("at least one per-state frequency row is required")
    return rows.mean(axis=0)


# --------------------------------------------------------------------------
# CSV serialization (offline estimator runs)
# --------------------------------------------------------------------------

def counts_to_csv(tables: dict[str, CountTable]) -> str:
    """Serialize labeled count tables to CSV rows (basis, k, count, trials)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["basis", "k", "count", "trials"])
    for label, table in tables.items():
        for k, count in enumerate(table.counts):
            writer.writerow([label, k, count, table.trials])
    return buf.getvalue()


def counts_from_csv(text: str) -> dict[str, CountTable]:
    """Parse the CSV format written by counts_to_csv."""
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header != ["basis", "k", "count", "trials"]:
        raise DomainError(f"unexpected counts CSV header: {header}")
    acc: dict[str, dict[int, int]] = {}
    trials: dict[str, int] = {}
    for row in reader:
        if not row:
            continue
        label, k, count, total = row[0], int(row[1]), int(row[2]), int(row[3])
        acc.setdefault(label, {})[k] = count
        trials[label] = total
    out = {}
    for label, by_k in acc.items():
        counts = tuple(by_k.get(k, 0) for k in range(4))
        out[label] = CountTable(counts, trials[label])
    return out
