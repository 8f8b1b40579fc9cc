"""Scoring of exported training runs.

Three requirements are scored across a set of runs spanning folds and
seeds: Applicability (mean macro F1 on the final test predictions),
Reliability (mean Kendall tau-b between the per-epoch dev loss and dev
F1 trajectories; ideally -1, i.e. learning is reflected in performance),
and Stability (sample standard deviation of both).  All values are
reported on the x100 scale.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.stats import kendalltau

from .errors import SchemaError, ValidationError

logger = logging.getLogger(__name__)

TOO_FEW_EPOCHS = "reliability undefined: <2 epochs"


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    dev_loss: float
    dev_f1: float


@dataclass(frozen=True)
class RunRecord:
    run_id: str
    fold: int
    seed: int
    epochs: tuple[EpochRecord, ...]
    test_true: tuple[str, ...]
    test_pred: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(self.epochs) < 2:
            raise ValidationError(f"run {self.run_id!r}: {TOO_FEW_EPOCHS}")
        if any(b.epoch <= a.epoch for a, b in zip(self.epochs, self.epochs[1:])):
            raise ValidationError(f"run {self.run_id!r}: epochs not strictly increasing")
        if len(self.test_true) != len(self.test_pred):
            raise ValidationError(
                f"run {self.run_id!r}: test true/pred lengths differ "
                f"({len(self.test_true)} vs {len(self.test_pred)})"
            )


@dataclass(frozen=True)
class EvalSummary:
    mu_f1: float
    sigma_f1: float
    mu_tau: float | None
    sigma_tau: float | None
    n_runs: int
    n_tau_undefined: int = 0


def macro_f1(
    true_labels: Sequence[str],
    pred_labels: Sequence[str],
    label_set: Sequence[str],
) -> float:
    """Unweighted mean per-class F1, x100.

    Every class in the label set contributes, with F1 = 0 whenever
    precision + recall = 0.
    """
    if len(true_labels) != len(pred_labels):
        raise ValidationError(
            f"label list lengths differ: {len(true_labels)} vs {len(pred_labels)}"
        )
    if not true_labels:
        raise ValidationError("macro_f1 needs at least one label")
    known = set(label_set)
    unknown = (set(true_labels) | set(pred_labels)) - known
    if unknown:
        raise ValidationError(f"labels outside label set: {sorted(unknown)}")

    scores = []
    for c in label_set:
        tp = sum(t == c and p == c for t, p in zip(true_labels, pred_labels))
        fp = sum(t != c and p == c for t, p in zip(true_labels, pred_labels))
        fn = sum(t == c and p != c for t, p in zip(true_labels, pred_labels))
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        scores.append(f1)
    return 100.0 * float(np.mean(scores))


def kendall_tau_b(x: Sequence[float], y: Sequence[float]) -> float | None:
    """Tie-corrected Kendall rank correlation; None when undefined
    (an all-constant input has no ranking)."""
    if len(x) != len(y):
        raise ValidationError(f"sequence lengths differ: {len(x)} vs {len(y)}")
    if len(x) < 2:
        raise ValidationError("kendall_tau_b needs at least 2 observations")
    if len(set(x)) == 1 or len(set(y)) == 1:
        logger.warning("kendall_tau_b undefined: all-constant input")
        return None
    return float(kendalltau(np.asarray(x), np.asarray(y)).statistic)


def reliability(run: RunRecord) -> float | None:
    """Kendall tau-b between the dev-loss and dev-F1 trajectories, x100."""
    losses = [e.dev_loss for e in run.epochs]
    f1s = [e.dev_f1 for e in run.epochs]
    tau = kendall_tau_b(losses, f1s)
    return None if tau is None else 100.0 * tau


def aggregate(runs: Sequence[RunRecord], label_set: Sequence[str]) -> EvalSummary:
    """Pool Applicability and Reliability over all runs (folds x seeds)."""
    if len(runs) < 2:
        raise ValidationError(f"aggregate needs at least 2 runs, got {len(runs)}")
    f1s = [macro_f1(r.test_true, r.test_pred, label_set) for r in runs]
    taus = [reliability(r) for r in runs]
    defined = [t for t in taus if t is not None]
    n_undefined = len(taus) - len(defined)
    if n_undefined:
        logger.warning("%d of %d runs have undefined reliability", n_undefined, len(taus))
    return EvalSummary(
        mu_f1=float(np.mean(f1s)),
        sigma_f1=float(np.std(f1s, ddof=1)),
        mu_tau=float(np.mean(defined)) if defined else None,
        sigma_tau=float(np.std(defined, ddof=1)) if len(defined) >= 2 else None,
        n_runs=len(runs),
        n_tau_undefined=n_undefined,
    )


def load_runs(path: str | Path, label_set: Sequence[str] | None = None) -> list[RunRecord]:
    """Parse the run-log JSONL export."""
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"run log not found: {path}")
    runs: list[RunRecord] = []
    with path.open(encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            if not raw.strip():
                continue
            try:
                record = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"{path}:{lineno}: malformed JSON ({exc.msg})") from exc
            try:
                epochs = tuple(
                    EpochRecord(
                        epoch=int(e["epoch"]),
                        dev_loss=float(e["dev_loss"]),
                        dev_f1=float(e["dev_f1"]),
                    )
                    for e in record["epochs"]
                )
                run = RunRecord(
                    run_id=str(record["run_id"]),
                    fold=int(record["fold"]),
                    seed=int(record["seed"]),
                    epochs=epochs,
                    test_true=tuple(record["test"]["true"]),
                    test_pred=tuple(record["test"]["pred"]),
                )
            except (KeyError, TypeError) as exc:
                raise SchemaError(f"{path}:{lineno}: not a run record ({exc!r})") from exc
            for e in run.epochs:
                if e.dev_loss < 0:
                    raise ValidationError(
                        f"run {run.run_id!r}: negative dev_loss at epoch {e.epoch}"
                    )
                if not 0 <= e.dev_f1 <= 100:
                    raise ValidationError(
                        f"run {run.run_id!r}: dev_f1 outside [0, 100] at epoch {e.epoch}"
                    )
            if label_set is not None:
                unknown = (set(run.test_true) | set(run.test_pred)) - set(label_set)
                if unknown:
                    raise ValidationError(
                        f"run {run.run_id!r}: labels outside label set: {sorted(unknown)}"
                    )
            runs.append(run)
    if not runs:
        raise ValidationError("empty run log")
    return runs


def summary_to_dict(summary: EvalSummary) -> dict:
    return {
        "mu_f1": summary.mu_f1,
        "sigma_f1": summary.sigma_f1,
        "mu_tau": summary.mu_tau,
        "sigma_tau": summary.sigma_tau,
        "n_runs": summary.n_runs,
        "n_tau_undefined": summary.n_tau_undefined,
    }


def summary_from_dict(data: dict) -> EvalSummary:
    try:
        return EvalSummary(
            mu_f1=float(data["mu_f1"]),
            sigma_f1=float(data["sigma_f1"]),
            mu_tau=None if data["mu_tau"] is None else float(data["mu_tau"]),
            sigma_tau=None if data["sigma_tau"] is None else float(data["sigma_tau"]),
            n_runs=int(data["n_runs"]),
            n_tau_undefined=int(data.get("n_tau_undefined", 0)),
        )
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"not an evaluation summary ({exc!r})") from exc
