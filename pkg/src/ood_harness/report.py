"""Fixed-format table rendering of shift profiles and run summaries.

All numbers are rounded half-away-from-zero to one decimal; deviations
render as "mu±sigma" cells and only appear when a metric aggregates at
least two runs.  Output is locale-independent and byte-stable.
"""

from __future__ import annotations

import json
from decimal import ROUND_HALF_UP, Decimal
from typing import Mapping, Sequence

from .errors import ValidationError
from .runeval import EvalSummary
from .shiftstats import ShiftProfile

SHIFT_LABELS = {"topic": "Top.", "domain": "Dom.", "language": "Lang."}
FORMATS = ("tsv", "md", "json")

PROFILE_COLUMNS = ("Task", "Shift Type", "Separability", "Δ Flesch", "Δ Words", "KL")


def round1(x: float) -> str:
    """One-decimal string, ties away from zero."""
    value = Decimal(repr(float(x))).quantize(Decimal("0.1"), rounding=ROUND_HALF_UP)
    if value == 0:
        return "0.0"
    return str(value)


def _cell(mean: float | None, deviation: float | None, small: bool = False) -> str:
    if mean is None:
        return "-"
    if deviation is None:
        return round1(mean)
    if small:
        return f"{round1(mean)}±<small>{round1(deviation)}</small>"
    return f"{round1(mean)}±{round1(deviation)}"


def _table(header: Sequence[str], rows: Sequence[Sequence[str]], fmt: str) -> str:
    if fmt == "tsv":
        lines = ["\t".join(header)] + ["\t".join(row) for row in rows]
        return "\n".join(lines) + "\n"
    if fmt == "md":
        lines = [
            "| " + " | ".join(header) + " |",
            "|" + "|".join(" --- " for _ in header) + "|",
        ]
        lines += ["| " + " | ".join(row) + " |" for row in rows]
        return "\n".join(lines) + "\n"
    raise ValidationError(f"unknown format {fmt!r}")


def _fold_mean(values: Sequence[float | None]) -> float | None:
    if any(v is None for v in values):
        return None
    return sum(values) / len(values)


def render_profile(
    profiles_by_task: Mapping[str, tuple[str, Sequence[ShiftProfile]]],
    fmt: str = "tsv",
) -> str:
    """One row per task with the four shift metrics averaged across folds."""
    if not profiles_by_task:
        raise ValidationError("no profiles to render")
    entries = []
    for task, (shift_kind, profiles) in profiles_by_task.items():
        if not profiles:
            raise ValidationError(f"task {task!r} has no fold profiles")
        entries.append(
            {
                "task": task,
                "shift_kind": SHIFT_LABELS.get(shift_kind, shift_kind),
                "separability": _fold_mean([p.separability for p in profiles]),
                "delta_flesch": _fold_mean([p.delta_flesch for p in profiles]),
                "delta_words": _fold_mean([p.delta_words for p in profiles]),
                "kl": _fold_mean([p.kl for p in profiles]),
            }
        )
    if fmt == "json":
        rounded = [
            {
                key: (
                    value
                    if key in ("task", "shift_kind") or value is None
                    else float(round1(value))
                )
                for key, value in entry.items()
            }
            for entry in entries
        ]
        return json.dumps(rounded, indent=2, ensure_ascii=False) + "\n"
    rows = [
        [
            entry["task"],
            entry["shift_kind"],
            _cell(entry["separability"], None),
            _cell(entry["delta_flesch"], None),
            _cell(entry["delta_words"], None),
            _cell(entry["kl"], None),
        ]
        for entry in entries
    ]
    return _table(PROFILE_COLUMNS, rows, fmt)


def render_summary(summaries: Mapping[str, EvalSummary], fmt: str = "tsv") -> str:
    """Per-task Applicability cells plus aggregate Applicability/Reliability.

    Cells are "mu±sigma"; sigma is dropped for single-run summaries and
    reliability renders as "-" when every run's correlation is undefined.
    """
    if not summaries:
        raise ValidationError("no summaries to render")
    small = fmt == "md"
    tasks = list(summaries)

    f1_means = [summaries[t].mu_f1 for t in tasks]
    f1_devs = [summaries[t].sigma_f1 for t in tasks if summaries[t].n_runs >= 2]
    tau_means = [summaries[t].mu_tau for t in tasks if summaries[t].mu_tau is not None]
    tau_devs = [
        summaries[t].sigma_tau for t in tasks if summaries[t].sigma_tau is not None
    ]

    agg_f1 = sum(f1_means) / len(f1_means)
    agg_f1_dev = sum(f1_devs) / len(f1_devs) if len(f1_devs) == len(tasks) else None
    agg_tau = sum(tau_means) / len(tau_means) if tau_means else None
    agg_tau_dev = (
        sum(tau_devs) / len(tau_devs)
        if tau_means and len(tau_devs) == len(tau_means)
        else None
    )

    if fmt == "json":
        payload = {
            "tasks": {
                t: {
                    "applicability": float(round1(summaries[t].mu_f1)),
                    "applicability_dev": (
                        float(round1(summaries[t].sigma_f1))
                        if summaries[t].n_runs >= 2
                        else None
                    ),
                    "reliability": (
                        None
                        if summaries[t].mu_tau is None
                        else float(round1(summaries[t].mu_tau))
                    ),
                    "reliability_dev": (
                        None
                        if summaries[t].sigma_tau is None
                        else float(round1(summaries[t].sigma_tau))
                    ),
                    "n_runs": summaries[t].n_runs,
                }
                for t in tasks
            },
            "applicability": {
                "mean": float(round1(agg_f1)),
                "deviation": None if agg_f1_dev is None else float(round1(agg_f1_dev)),
            },
            "reliability": {
                "mean": None if agg_tau is None else float(round1(agg_tau)),
                "deviation": None if agg_tau_dev is None else float(round1(agg_tau_dev)),
            },
        }
        return json.dumps(payload, indent=2, ensure_ascii=False) + "\n"

    header = list(tasks) + ["Applicability", "Reliability"]
    row = [
        _cell(
            summaries[t].mu_f1,
            summaries[t].sigma_f1 if summaries[t].n_runs >= 2 else None,
            small,
        )
        for t in tasks
    ]
    row.append(_cell(agg_f1, agg_f1_dev, small))
    row.append(_cell(agg_tau, agg_tau_dev, small))
    return _table(header, [row], fmt)
