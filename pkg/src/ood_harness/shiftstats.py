"""Shift diagnostics between a train and a test split.

Four per-fold quantities describe the shift: semantic separability
(2-means clustering of instance embeddings scored against the split
membership with the adjusted Rand index), surface deltas in mean
readability and word count, and the divergence of the label
distributions.  A pseudo-perplexity aggregator summarizes externally
exported per-token cross-entropies.
"""

from __future__ import annotations

import logging
import math
import re
import unicodedata
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .corpus import Corpus, Instance
from .errors import SchemaError, ValidationError
from .folds import FoldPlan
from .seeds import KMEANS_NS, PROFILE_NS, derive_seed, seed_stream

logger = logging.getLogger(__name__)

KL_EPS = 1e-9
KMEANS_RESTARTS = 10
KMEANS_MAX_ITER = 300


@dataclass(frozen=True)
class EmbeddingSet:
    """id -> float32 vector, all of length dim."""

    vectors: Mapping[str, np.ndarray]
    dim: int

    def matrix(self, ids: Sequence[str]) -> np.ndarray:
        missing = [i for i in ids if i not in self.vectors]
        if missing:
            raise ValidationError(
                f"{len(missing)} ids without embeddings (first: {missing[0]!r})"
            )
        return np.stack([self.vectors[i] for i in ids]).astype(np.float64)


@dataclass(frozen=True)
class ShiftProfile:
    """One fold's shift characteristics (separability and kl on the x100 scale)."""

    fold: int
    separability: float | None
    delta_flesch: float
    delta_words: float
    kl: float


@dataclass(frozen=True)
class KMeansResult:
    labels: tuple[int, ...]
    inertia: float
    inertia_history: tuple[float, ...]
    n_iter: int
    degenerate: bool = False


def read_embeddings(path: str | Path) -> EmbeddingSet:
    """Parse the embedding wire format: 'dim=<d>' header, then '<id>\\t<f1>,<f2>,...'."""
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"embeddings file not found: {path}")
    vectors: dict[str, np.ndarray] = {}
    with path.open(encoding="utf-8") as fh:
        header = fh.readline().strip()
        m = re.fullmatch(r"dim=(\d+)", header)
        if not m:
            raise SchemaError(f"{path}:1: expected 'dim=<d>' header, got {header!r}")
        dim = int(m.group(1))
        if dim < 1:
            raise SchemaError(f"{path}:1: dim must be positive")
        for lineno, raw in enumerate(fh, 2):
            line = raw.rstrip("\n")
            if not line:
                continue
            instance_id, sep, values = line.partition("\t")
            if not sep or not instance_id:
                raise SchemaError(f"{path}:{lineno}: expected '<id>\\t<values>'")
            if instance_id in vectors:
                raise SchemaError(f"{path}:{lineno}: duplicate id {instance_id!r}")
            try:
                vec = np.array([float(v) for v in values.split(",")], dtype=np.float32)
            except ValueError as exc:
                raise SchemaError(f"{path}:{lineno}: bad float ({exc})") from exc
            if vec.shape != (dim,):
                raise SchemaError(
                    f"{path}:{lineno}: vector has {vec.shape[0]} values, expected {dim}"
                )
            vectors[instance_id] = vec
    if not vectors:
        raise SchemaError(f"{path}: no vectors")
    return EmbeddingSet(vectors=vectors, dim=dim)


def write_embeddings(emb: EmbeddingSet, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write(f"dim={emb.dim}\n")
        for instance_id, vec in emb.vectors.items():
            fh.write(instance_id + "\t" + ",".join(repr(float(v)) for v in vec) + "\n")


def _lloyd(points: np.ndarray, centers: np.ndarray) -> KMeansResult | None:
    """Lloyd iteration from explicit initial centers.

    Returns None when a cluster empties out (caller reseeds the restart).
    """
    labels = None
    history: list[float] = []
    for iteration in range(1, KMEANS_MAX_ITER + 1):
        d2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new_labels = d2.argmin(axis=1)
        inertia = float(d2[np.arange(len(points)), new_labels].sum())
        if history:
            assert inertia <= history[-1] * (1 + 1e-12) + 1e-12, "inertia increased"
        history.append(inertia)
        if labels is not None and np.array_equal(new_labels, labels):
            return KMeansResult(
                labels=tuple(int(v) for v in labels),
                inertia=inertia,
                inertia_history=tuple(history),
                n_iter=iteration,
            )
        labels = new_labels
        for j in range(centers.shape[0]):
            members = points[labels == j]
            if len(members) == 0:
                return None
            centers[j] = members.mean(axis=0)
    return KMeansResult(
        labels=tuple(int(v) for v in labels),
        inertia=history[-1],
        inertia_history=tuple(history),
        n_iter=KMEANS_MAX_ITER,
    )


def _plusplus_init(points: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    first = int(rng.integers(len(points)))
    d2 = ((points - points[first]) ** 2).sum(axis=1)
    probs = d2 / d2.sum()
    second = int(rng.choice(len(points), p=probs))
    return np.stack([points[first], points[second]]).astype(np.float64)


def kmeans2(points: Sequence[Sequence[float]] | np.ndarray, seed: int) -> KMeansResult:
    """2-means with k-means++ seeding, 10 restarts, best inertia kept.

    Deterministic in (points, seed).  Identical points yield the all-zeros
    assignment with the degenerate flag set.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or len(pts) < 2:
        raise ValidationError("kmeans2 needs at least 2 points of equal dimension")
    (rng,) = seed_stream(seed, KMEANS_NS, 1)
    if bool((pts == pts[0]).all()):
        logger.warning("kmeans2: all %d points identical, returning one cluster", len(pts))
        return KMeansResult(
            labels=(0,) * len(pts),
            inertia=0.0,
            inertia_history=(0.0,),
            n_iter=0,
            degenerate=True,
        )

    best: KMeansResult | None = None
    for _ in range(KMEANS_RESTARTS):
        result = None
        for _attempt in range(100):
            result = _lloyd(pts, _plusplus_init(pts, rng))
            if result is not None:
                break
        if result is None:
            raise RuntimeError("kmeans2: could not repair empty clusters by reseeding")
        if best is None or result.inertia < best.inertia:
            best = result
    return best


def adjusted_rand_index(a: Sequence[int], b: Sequence[int]) -> float:
    """Chance-corrected pair-counting agreement of two partitions."""
    if len(a) != len(b):
        raise ValidationError(f"partition lengths differ: {len(a)} vs {len(b)}")
    n = len(a)
    if n < 2:
        raise ValidationError("need at least 2 elements")
    contingency: dict[tuple[object, object], int] = {}
    rows: dict[object, int] = {}
    cols: dict[object, int] = {}
    for x, y in zip(a, b):
        contingency[(x, y)] = contingency.get((x, y), 0) + 1
        rows[x] = rows.get(x, 0) + 1
        cols[y] = cols.get(y, 0) + 1
    index = sum(math.comb(c, 2) for c in contingency.values())
    sum_a = sum(math.comb(c, 2) for c in rows.values())
    sum_b = sum(math.comb(c, 2) for c in cols.values())
    expected = sum_a * sum_b / math.comb(n, 2)
    maximum = (sum_a + sum_b) / 2
    if maximum == expected:  # both partitions trivial
        return 1.0
    return (index - expected) / (maximum - expected)


def separability(
    train_ids: Sequence[str],
    test_ids: Sequence[str],
    emb: EmbeddingSet,
    seed: int,
) -> float:
    """100 x ARI between a 2-means clustering and the train/test membership."""
    points = emb.matrix(list(train_ids) + list(test_ids))
    membership = [0] * len(train_ids) + [1] * len(test_ids)
    clustering = kmeans2(points, seed)
    return 100.0 * adjusted_rand_index(clustering.labels, membership)


_TERMINATOR_RUNS = re.compile(r"[.!?…]+")
_VOWEL_GROUPS = re.compile(r"[aeiouy]+")


def words(text: str) -> list[str]:
    """Whitespace-separated tokens containing at least one letter."""
    return [tok for tok in text.split() if any(ch.isalpha() for ch in tok)]


def _is_latin(word: str) -> bool:
    return any(
        ch.isascii() and ch.isalpha() or "LATIN" in unicodedata.name(ch, "")
        for ch in word
    )


def syllables(word: str) -> int:
    """Dictionary-free syllable heuristic.

    Latin script: maximal vowel runs (a e i o u y) after stripping
    diacritics, minus a terminal silent 'e', floor 1.  Other scripts:
    one syllable per character cluster.
    """
    letters = "".join(ch for ch in word if ch.isalpha())
    if not letters:
        return 0
    if _is_latin(letters):
        base = "".join(
            ch
            for ch in unicodedata.normalize("NFD", letters.lower())
            if not unicodedata.combining(ch)
        )
        count = len(_VOWEL_GROUPS.findall(base))
        if base.endswith("e") and count > 1:
            count -= 1
        return max(count, 1)
    clusters = sum(
        1
        for ch in unicodedata.normalize("NFC", letters)
        if not unicodedata.combining(ch)
    )
    return max(clusters, 1)


def flesch(text: str) -> float:
    """Reading ease: 206.835 - 1.015*(words/sentences) - 84.6*(syllables/words)."""
    toks = words(text)
    if not toks:
        raise ValidationError("flesch needs at least one word")
    n_sentences = max(len(_TERMINATOR_RUNS.findall(text)), 1)
    n_syllables = sum(syllables(t) for t in toks)
    return 206.835 - 1.015 * (len(toks) / n_sentences) - 84.6 * (n_syllables / len(toks))


def _surface_text(inst: Instance) -> str:
    if inst.text_pair:
        return inst.text + " " + inst.text_pair
    return inst.text


def surface_deltas(
    train: Sequence[Instance], test: Sequence[Instance]
) -> tuple[float, float]:
    """|mean Flesch difference| and |mean word-count difference| between splits."""
    if not train or not test:
        raise ValidationError("surface_deltas needs non-empty splits")
    train_texts = [_surface_text(i) for i in train]
    test_texts = [_surface_text(i) for i in test]
    delta_flesch = abs(
        float(np.mean([flesch(t) for t in train_texts]))
        - float(np.mean([flesch(t) for t in test_texts]))
    )
    delta_words = abs(
        float(np.mean([len(words(t)) for t in train_texts]))
        - float(np.mean([len(words(t)) for t in test_texts]))
    )
    return delta_flesch, delta_words


def label_kl(
    train_labels: Sequence[str],
    test_labels: Sequence[str],
    label_set: Sequence[str],
) -> float:
    """100 x KL(train || test) over class relative frequencies.

    Both distributions are additively smoothed with eps=1e-9 and
    renormalized; classes unseen in train contribute zero.
    """
    if not train_labels or not test_labels:
        raise ValidationError("label_kl needs non-empty label lists")
    classes = list(label_set)
    for name, labels in (("train", train_labels), ("test", test_labels)):
        unknown = set(labels) - set(classes)
        if unknown:
            raise ValidationError(f"{name} labels outside label set: {sorted(unknown)}")
    p_raw = np.array([sum(l == c for l in train_labels) for c in classes], dtype=float)
    q_raw = np.array([sum(l == c for l in test_labels) for c in classes], dtype=float)
    p_raw /= p_raw.sum()
    q_raw /= q_raw.sum()
    k = len(classes)
    p = (p_raw + KL_EPS) / (1.0 + k * KL_EPS)
    q = (q_raw + KL_EPS) / (1.0 + k * KL_EPS)
    mask = p_raw > 0
    return 100.0 * float(np.sum(p[mask] * np.log(p[mask] / q[mask])))


@dataclass(frozen=True)
class PseudoPerplexity:
    per_instance: Mapping[str, float]
    corpus_mean: float
    reference_delta: float | None = None


def read_token_losses(path: str | Path) -> dict[str, list[float]]:
    """Parse '<id>\\t<l1>,<l2>,...' per-token cross-entropy lines."""
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"token-loss file not found: {path}")
    losses: dict[str, list[float]] = {}
    with path.open(encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.rstrip("\n")
            if not line:
                continue
            instance_id, sep, values = line.partition("\t")
            if not sep or not instance_id:
                raise SchemaError(f"{path}:{lineno}: expected '<id>\\t<values>'")
            if instance_id in losses:
                raise SchemaError(f"{path}:{lineno}: duplicate id {instance_id!r}")
            try:
                losses[instance_id] = [float(v) for v in values.split(",") if v]
            except ValueError as exc:
                raise SchemaError(f"{path}:{lineno}: bad float ({exc})") from exc
    if not losses:
        raise SchemaError(f"{path}: no records")
    return losses


def pseudo_perplexity(
    token_losses: Mapping[str, Sequence[float]],
    reference_mean: float | None = None,
) -> PseudoPerplexity:
    """Per-instance mean token cross-entropy and the corpus mean of those means."""
    per_instance: dict[str, float] = {}
    for instance_id, losses in token_losses.items():
        if not losses:
            raise ValidationError(f"instance {instance_id!r} has no token losses")
        if any(l < 0 for l in losses):
            raise ValidationError(f"instance {instance_id!r} has a negative loss")
        per_instance[instance_id] = float(np.mean(losses))
    corpus_mean = float(np.mean(list(per_instance.values())))
    delta = None if reference_mean is None else corpus_mean - reference_mean
    return PseudoPerplexity(
        per_instance=per_instance, corpus_mean=corpus_mean, reference_delta=delta
    )


def profile_fold(
    corpus: Corpus,
    plan: FoldPlan,
    fold: int,
    emb: EmbeddingSet | None,
) -> ShiftProfile:
    split = plan.folds[fold]
    train = corpus.subset(split.train_ids)
    test = corpus.subset(split.test_ids)
    sep = None
    if emb is not None:
        sep = separability(
            split.train_ids,
            split.test_ids,
            emb,
            derive_seed(plan.seed, PROFILE_NS, fold),
        )
    delta_flesch, delta_words = surface_deltas(train, test)
    kl = label_kl(
        [i.label for i in train], [i.label for i in test], corpus.task.label_set
    )
    return ShiftProfile(
        fold=fold,
        separability=sep,
        delta_flesch=delta_flesch,
        delta_words=delta_words,
        kl=kl,
    )


def profile_plan(
    corpus: Corpus,
    plan: FoldPlan,
    emb: EmbeddingSet | None = None,
    threads: int = 1,
) -> list[ShiftProfile]:
    """Shift profile for every fold; per-fold seeds make results independent
    of scheduling."""
    indices = range(len(plan.folds))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(lambda f: profile_fold(corpus, plan, f, emb), indices))
    return [profile_fold(corpus, plan, f, emb) for f in indices]
