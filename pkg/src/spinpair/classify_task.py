"""Classification experiment: exact-backend vs channel-backend agreement.

Reference vectors either come from a CSV file (one row per vector, class_id
first) or are synthesized around orthogonal anchors.  Each trial classifies a
fresh query with the exact backend and with the single-preparation channel
backend; the report carries their agreement rate and the preparation count
audited by the ledger.
"""
from __future__ import annotations

import os

import numpy as np

from . import classifier
from .config import ExperimentConfig

REFS_PER_CLASS = 50
QUBITS = 3
THRESHOLD = 0.25
SPREAD = 0.35


def _perturbed_unit(anchor: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    v = anchor + SPREAD * rng.standard_normal(anchor.size)
    return v / np.linalg.norm(v)


def synthesize_classes(
    rng: np.random.Generator, n_classes: int = 2, refs_per_class: int = REFS_PER_CLASS
) -> list[classifier.ClassModel]:
    dim = 2**QUBITS
    models = []
    for cid in range(n_classes):
        anchor = np.zeros(dim)
        anchor[cid] = 1.0
        refs = tuple(
            classifier.encode(_perturbed_unit(anchor, rng), QUBITS)
            for _ in range(refs_per_class)
        )
        models.append(classifier.ClassModel(cid, refs))
    return models


def run_classify_task(cfg: ExperimentConfig, out_dir, references_csv: str | None = None):
    from .harness import EstimationReport, write_aggregate_csv, write_extras_csv

    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(0,)))
    if references_csv is not None:
        with open(references_csv, "r", encoding="utf-8") as fh:
            classes = classifier.references_from_csv(fh.read(), QUBITS)
    else:
        classes = synthesize_classes(rng)

    refs_per_class = min(len(m.references) for m in classes)
    budget = max(1, cfg.n_states // refs_per_class) * cfg.preps_per_state
    ledger = classifier.PreparationLedger()

    decisions = []
    agree = 0
    import time

    start = time.perf_counter()
    for trial in range(cfg.runs):
        target = classes[trial % len(classes)]
        query_vec = _perturbed_unit(
            np.real(target.references[0].amplitudes), rng
        )
        query = classifier.encode(query_vec, QUBITS)
        exact = classifier.classify(query, classes, budget, THRESHOLD, "exact")
        channel = classifier.classify(
            query, classes, budget, THRESHOLD, "channel", rng=rng, ledger=ledger
        )
        agree += int(exact.class_id == channel.class_id)
        decisions.append((trial, channel))
    wall = time.perf_counter() - start

    report = EstimationReport(
        task="classify",
        n_states=cfg.n_states,
        preps_per_state=cfg.preps_per_state,
        runs=cfg.runs,
        nrmse_jxy=None,
        nrmse_jz=None,
        rejections=sum(1 for _, d in decisions if d.rejected),
        wall_seconds=wall,
        extras={
            "backend_agreement": agree / cfg.runs,
            "pooled_trials_per_class": budget * refs_per_class,
            "preparations_total": ledger.total,
        },
    )
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "decisions.csv"), "w", encoding="utf-8") as fh:
        fh.write(classifier.decisions_to_csv(decisions))
    write_aggregate_csv(os.path.join(out_dir, "aggregate.csv"), [report])
    write_extras_csv(os.path.join(out_dir, "aggregate_extended.csv"), [report])
    return report
