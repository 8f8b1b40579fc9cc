"""Verbalizers: class -> token-set mappings over mask-fill log-probabilities.

An automatic verbalizer picks the most class-indicative tokens from
training instances by likelihood ratio; a manual one is read from a
file.  Prediction sums the log-probabilities of each class's tokens and
applies a softmax; the argmax class wins, ties broken by class order.
Verbalizers are frozen after construction: build and predict never feed
back into each other.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import SchemaError, ValidationError

logger = logging.getLogger(__name__)

MISSING_TOKEN_EPS = 1e-12
RATIO_EPS = 1e-12
DEFAULT_TOKENS_PER_CLASS = 10


@dataclass(frozen=True)
class TokenLogProbs:
    """Most probable tokens at one instance's mask position."""

    instance_id: str
    entries: Mapping[str, float]

    def __post_init__(self) -> None:
        if not self.entries:
            raise ValidationError(f"instance {self.instance_id!r}: no token entries")
        bad = [t for t, lp in self.entries.items() if lp > 0]
        if bad:
            raise ValidationError(
                f"instance {self.instance_id!r}: positive log-probability for {bad[0]!r}"
            )


@dataclass(frozen=True)
class Verbalizer:
    classes: tuple[str, ...]
    token_sets: Mapping[str, tuple[str, ...]]
    origin: str  # "automatic" | "manual"

    def __post_init__(self) -> None:
        if not self.classes:
            raise ValidationError("verbalizer has no classes")
        seen: dict[str, str] = {}
        for k in self.classes:
            tokens = self.token_sets.get(k, ())
            if not tokens:
                raise ValidationError(f"class {k!r} has an empty token set")
            for t in tokens:
                if t in seen:
                    raise ValidationError(
                        f"token {t!r} listed for classes {seen[t]!r} and {k!r}"
                    )
                seen[t] = k


def load_token_logprobs(path: str | Path) -> list[TokenLogProbs]:
    """Parse the log-prob JSONL export: {"id": str, "logprobs": {token: float}}."""
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"log-prob file not found: {path}")
    records: list[TokenLogProbs] = []
    seen: set[str] = set()
    with path.open(encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            if not raw.strip():
                continue
            try:
                record = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"{path}:{lineno}: malformed JSON ({exc.msg})") from exc
            if (
                not isinstance(record, dict)
                or not isinstance(record.get("id"), str)
                or not isinstance(record.get("logprobs"), dict)
            ):
                raise SchemaError(f"{path}:{lineno}: expected {{id, logprobs}} object")
            if record["id"] in seen:
                raise ValidationError(f"{path}:{lineno}: duplicate id {record['id']!r}")
            seen.add(record["id"])
            try:
                entries = {str(t): float(lp) for t, lp in record["logprobs"].items()}
            except (TypeError, ValueError) as exc:
                raise SchemaError(f"{path}:{lineno}: bad log-probability ({exc})") from exc
            records.append(TokenLogProbs(instance_id=record["id"], entries=entries))
    if not records:
        raise SchemaError(f"{path}: no records")
    return records


def _token_ratios(
    train_logprobs: Sequence[TokenLogProbs],
    train_labels: Sequence[str],
    classes: Sequence[str],
) -> tuple[list[str], np.ndarray]:
    """Likelihood ratio of every candidate token for every class.

    ratio[k, t] = mean probability of t over class-k instances divided by
    its mean probability over all other instances; missing entries count
    as probability 0 and both means are smoothed by a tiny epsilon.
    """
    tokens = sorted({t for rec in train_logprobs for t in rec.entries})
    token_idx = {t: j for j, t in enumerate(tokens)}
    probs = np.zeros((len(train_logprobs), len(tokens)))
    for i, rec in enumerate(train_logprobs):
        for t, lp in rec.entries.items():
            probs[i, token_idx[t]] = math.exp(lp)

    labels = np.array(train_labels)
    ratios = np.empty((len(classes), len(tokens)))
    for ki, k in enumerate(classes):
        in_class = labels == k
        mean_in = probs[in_class].mean(axis=0)
        mean_out = probs[~in_class].mean(axis=0)
        ratios[ki] = (mean_in + RATIO_EPS) / (mean_out + RATIO_EPS)
    return tokens, ratios


def build_automatic(
    train_logprobs: Sequence[TokenLogProbs],
    train_labels: Sequence[str],
    classes: Sequence[str],
    m: int = DEFAULT_TOKENS_PER_CLASS,
) -> Verbalizer:
    """Select the top-m class-indicative tokens per class.

    Each candidate token goes to its argmax-likelihood-ratio class; per
    class the m best ratios survive, ties broken lexicographically.
    """
    if len(train_logprobs) != len(train_labels):
        raise ValidationError(
            f"got {len(train_logprobs)} log-prob records for {len(train_labels)} labels"
        )
    if m < 1:
        raise ValidationError("m must be at least 1")
    class_list = list(classes)
    unknown = set(train_labels) - set(class_list)
    if unknown:
        raise ValidationError(f"train labels outside class list: {sorted(unknown)}")
    for k in class_list:
        if k not in train_labels:
            raise ValidationError(f"class {k!r} has no train instances")

    tokens, ratios = _token_ratios(train_logprobs, train_labels, class_list)
    token_idx = {t: j for j, t in enumerate(tokens)}
    assigned = ratios.argmax(axis=0)  # first class wins ties
    token_sets: dict[str, tuple[str, ...]] = {}
    for ki, k in enumerate(class_list):
        candidates = [t for j, t in enumerate(tokens) if assigned[j] == ki]
        candidates.sort(key=lambda t: (-ratios[ki, token_idx[t]], t))
        if not candidates:
            raise ValidationError(
                f"class {k!r} received no indicative tokens; export a larger "
                f"candidate pool (more tokens per instance)"
            )
        token_sets[k] = tuple(candidates[:m])
    return Verbalizer(classes=tuple(class_list), token_sets=token_sets, origin="automatic")


def load_manual(path: str | Path, classes: Sequence[str] | None = None) -> Verbalizer:
    """Read a manual verbalizer file: one '<class>\\t<token>[,<token>...]' per line."""
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"verbalizer file not found: {path}")
    token_sets: dict[str, tuple[str, ...]] = {}
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        class_name, sep, tokens_raw = line.partition("\t")
        if not sep:
            raise SchemaError(f"{path}:{lineno}: expected '<class>\\t<tokens>'")
        if class_name in token_sets:
            raise ValidationError(f"{path}:{lineno}: duplicate class {class_name!r}")
        tokens = tuple(t.strip() for t in tokens_raw.split(",") if t.strip())
        if not tokens:
            raise ValidationError(f"{path}:{lineno}: class {class_name!r} has no tokens")
        token_sets[class_name] = tokens

    order = tuple(token_sets)
    if classes is not None:
        missing = [k for k in classes if k not in token_sets]
        if missing:
            raise ValidationError(f"{path}: class {missing[0]!r} missing from verbalizer")
        extra = [k for k in token_sets if k not in set(classes)]
        if extra:
            raise ValidationError(f"{path}: unknown class {extra[0]!r}")
        order = tuple(classes)
    return Verbalizer(classes=order, token_sets=token_sets, origin="manual")


def save_verbalizer(v: Verbalizer, path: str | Path) -> None:
    for k in v.classes:
        for t in v.token_sets[k]:
            if any(ch in t for ch in ",\t\n"):
                # the line format cannot represent such tokens
                raise ValidationError(
                    f"token {t!r} of class {k!r} is not serializable; "
                    f"drop it from the export or rebuild without it"
                )
    with Path(path).open("w", encoding="utf-8") as fh:
        for k in v.classes:
            fh.write(k + "\t" + ",".join(v.token_sets[k]) + "\n")


def predict(logprobs: TokenLogProbs, v: Verbalizer) -> tuple[str, dict[str, float]]:
    """Label an instance from its mask log-probabilities.

    w_k sums L(a) over the class's tokens (missing tokens contribute
    ln(1e-12) with a warning); the returned probabilities are the softmax
    over the w values and the label is the argmax class.
    """
    floor = math.log(MISSING_TOKEN_EPS)
    w = np.empty(len(v.classes))
    for ki, k in enumerate(v.classes):
        total = 0.0
        for t in v.token_sets[k]:
            if t in logprobs.entries:
                total += logprobs.entries[t]
            else:
                logger.warning(
                    "instance %r: token %r absent from log-probs, using ln(eps)",
                    logprobs.instance_id,
                    t,
                )
                total += floor
        w[ki] = total
    shifted = np.exp(w - w.max())
    probs = shifted / shifted.sum()
    label = v.classes[int(np.argmax(w))]
    return label, {k: float(p) for k, p in zip(v.classes, probs)}
