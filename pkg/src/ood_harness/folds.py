"""Multi-fold split composition.

OOD folds hold entire group values (topics, domains, languages) out of
training; the test splits jointly cover every instance exactly once.  ID
folds are random shuffles cut to exactly the same per-fold, per-role
sizes so that the two regimes stay directly comparable.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

from .corpus import Corpus
from .errors import SchemaError, ValidationError
from .seeds import ID_NS, OOD_NS, seed_stream


@dataclass(frozen=True)
class Split:
    train_ids: tuple[str, ...]
    dev_ids: tuple[str, ...]
    test_ids: tuple[str, ...]


@dataclass(frozen=True)
class FoldPlan:
    mode: str  # "OOD" | "ID"
    folds: tuple[Split, ...]
    seed: int
    shift_kind: str
    test_groups_per_fold: tuple[frozenset[str], ...] | None = None


def fold_count(n_groups: int) -> int:
    """Number of folds for a task with n_groups distinct group values.

    Three folds whenever possible; four when there are exactly four
    groups; leave-one-group-out below three.
    """
    if n_groups < 2:
        raise ValidationError(f"need at least 2 group values, got {n_groups}")
    if n_groups == 4:
        return 4
    if n_groups < 3:
        return n_groups
    return 3


def _dev_group_count(n_leftover: int) -> int:
    return max(1, math.ceil(0.1 * n_leftover))


def compose_ood(corpus: Corpus, seed: int, n_folds: int | None = None) -> FoldPlan:
    """Compose the OOD fold plan for a corpus.

    Groups are assigned to test folds greedily, largest group first to
    the currently smallest fold.  Within each fold the left-over groups
    are split into dev groups (ceil(10%), min 1) and train groups by the
    per-fold seeded stream.  Pure function of (corpus content, seed).
    """
    counts = {g: len(ids) for g, ids in corpus.group_index.items()}
    n_groups = len(counts)
    k = fold_count(n_groups) if n_folds is None else n_folds
    if not 2 <= k <= n_groups:
        raise ValidationError(
            f"fold count {k} not feasible for {n_groups} group values"
        )

    # Largest group first into the fold with the fewest test instances.
    assigned: list[list[str]] = [[] for _ in range(k)]
    totals = [0] * k
    for group in sorted(counts, key=lambda g: (-counts[g], g)):
        fold = min(range(k), key=lambda f: (totals[f], f))
        assigned[fold].append(group)
        totals[fold] += counts[group]

    all_groups = sorted(counts)
    streams = seed_stream(seed, OOD_NS, k)
    folds: list[Split] = []
    test_groups_per_fold: list[frozenset[str]] = []
    for f in range(k):
        test_groups = set(assigned[f])
        leftover = [g for g in all_groups if g not in test_groups]
        rng = streams[f]
        if len(leftover) >= 2:
            n_dev = _dev_group_count(len(leftover))
            dev_idx = set(rng.choice(len(leftover), size=n_dev, replace=False).tolist())
            dev_groups = [g for i, g in enumerate(leftover) if i in dev_idx]
            train_groups = [g for i, g in enumerate(leftover) if i not in dev_idx]
            dev_ids = [i for g in dev_groups for i in corpus.group_index[g]]
            train_ids = [i for g in train_groups for i in corpus.group_index[g]]
        else:
            # Two-group corpora leave a single non-test group; a group-level
            # dev is impossible there, so dev falls back to a held-out
            # instance slice of that group.
            ids = list(corpus.group_index[leftover[0]])
            n_dev = max(1, math.ceil(0.1 * len(ids)))
            order = rng.permutation(len(ids))
            dev_set = {ids[i] for i in order[:n_dev]}
            dev_ids = [i for i in ids if i in dev_set]
            train_ids = [i for i in ids if i not in dev_set]
        test_ids = [i for g in sorted(test_groups) for i in corpus.group_index[g]]

        for role, members in (("train", train_ids), ("dev", dev_ids), ("test", test_ids)):
            if not members:
                raise ValidationError(f"fold {f}: {role} split empty")
        folds.append(
            Split(train_ids=tuple(train_ids), dev_ids=tuple(dev_ids), test_ids=tuple(test_ids))
        )
        test_groups_per_fold.append(frozenset(test_groups))

    return FoldPlan(
        mode="OOD",
        folds=tuple(folds),
        seed=seed,
        shift_kind=corpus.task.shift_kind,
        test_groups_per_fold=tuple(test_groups_per_fold),
    )


def compose_id(corpus: Corpus, ood_plan: FoldPlan, seed: int) -> FoldPlan:
    """Compose the ID plan size-synchronized to an OOD plan.

    Instances are shuffled once by the seeded stream, test splits are
    consecutive blocks matching the OOD test sizes (and therefore also
    partition the corpus), and per fold the remaining ids are cut into
    dev/train blocks of exactly the OOD sizes.
    """
    if ood_plan.mode != "OOD":
        raise ValidationError("compose_id requires an OOD plan")
    ids = list(corpus.ids)
    n = len(ids)
    if sum(len(s.test_ids) for s in ood_plan.folds) != n:
        raise ValidationError("OOD plan does not cover this corpus")

    (rng,) = seed_stream(seed, ID_NS, 1)
    shuffled = [ids[i] for i in rng.permutation(n)]

    folds: list[Split] = []
    offset = 0
    for f, ood_split in enumerate(ood_plan.folds):
        test_ids = shuffled[offset : offset + len(ood_split.test_ids)]
        offset += len(ood_split.test_ids)
        test_set = set(test_ids)
        rest = [i for i in shuffled if i not in test_set]
        n_dev = len(ood_split.dev_ids)
        dev_ids, train_ids = rest[:n_dev], rest[n_dev:]
        assert len(train_ids) == len(ood_split.train_ids), f"fold {f}: size sync failed"
        folds.append(
            Split(train_ids=tuple(train_ids), dev_ids=tuple(dev_ids), test_ids=tuple(test_ids))
        )

    return FoldPlan(
        mode="ID", folds=tuple(folds), seed=seed, shift_kind=ood_plan.shift_kind
    )


def _groups_of(corpus: Corpus, ids: tuple[str, ...]) -> set[str]:
    kind = corpus.task.shift_kind
    return {corpus.by_id(i).groups[kind] for i in ids}


def verify_plan(plan: FoldPlan, corpus: Corpus) -> list[str]:
    """Check all plan invariants; returns violations (empty when valid)."""
    violations: list[str] = []
    known = set(corpus.ids)

    for f, split in enumerate(plan.folds):
        roles = {"train": split.train_ids, "dev": split.dev_ids, "test": split.test_ids}
        for role, members in roles.items():
            if not members:
                violations.append(f"fold {f}: {role} split empty")
            for i in members:
                if i not in known:
                    violations.append(f"fold {f} {role}: id {i} not in corpus")
        for a, b in (("train", "dev"), ("train", "test"), ("dev", "test")):
            overlap = set(roles[a]) & set(roles[b])
            for i in sorted(overlap):
                violations.append(f"fold {f}: {a}/{b} overlap: id {i}")

    seen: dict[str, int] = {}
    for f, split in enumerate(plan.folds):
        for i in split.test_ids:
            if i in seen and seen[i] != f:
                violations.append(
                    f"test-coverage: id {i} appears in folds {seen[i]} and {f}"
                )
            else:
                seen[i] = f
    for i in corpus.ids:
        if i not in seen:
            violations.append(f"test-coverage: id {i} in no test split")

    if plan.mode == "OOD":
        if plan.test_groups_per_fold is None:
            violations.append("ood: test_groups_per_fold missing")
            return violations
        claimed: dict[str, int] = {}
        for f, groups in enumerate(plan.test_groups_per_fold):
            for g in sorted(groups):
                if g in claimed:
                    violations.append(
                        f"ood: test group {g!r} assigned to folds {claimed[g]} and {f}"
                    )
                else:
                    claimed[g] = f
        for g in corpus.group_index:
            if g not in claimed:
                violations.append(f"ood: group {g!r} not covered by any test fold")

        all_groups = set(corpus.group_index)
        for f, split in enumerate(plan.folds):
            test_groups = set(plan.test_groups_per_fold[f])
            actual = _groups_of(corpus, split.test_ids)
            if actual != test_groups:
                violations.append(
                    f"fold {f}: test ids span groups {sorted(actual)} "
                    f"but plan claims {sorted(test_groups)}"
                )
            train_groups = _groups_of(corpus, split.train_ids)
            dev_groups = _groups_of(corpus, split.dev_ids)
            for role, groups in (("train", train_groups), ("dev", dev_groups)):
                for g in sorted(groups & test_groups):
                    violations.append(
                        f"fold {f}: {role} group {g!r} leaks into test groups"
                    )
            # Group-level train/dev separation is only checkable when the
            # fold had more than one non-test group to distribute.
            if len(all_groups - test_groups) >= 2:
                for g in sorted(train_groups & dev_groups):
                    violations.append(
                        f"fold {f}: dev-disjointness: group {g!r} in both dev and train"
                    )
    return violations


def plan_to_dict(plan: FoldPlan) -> dict:
    folds = []
    for f, split in enumerate(plan.folds):
        entry = {
            "train": list(split.train_ids),
            "dev": list(split.dev_ids),
            "test": list(split.test_ids),
        }
        if plan.test_groups_per_fold is not None:
            entry["test_groups"] = sorted(plan.test_groups_per_fold[f])
        folds.append(entry)
    return {
        "mode": plan.mode,
        "seed": plan.seed,
        "shift_kind": plan.shift_kind,
        "folds": folds,
    }


def save_plan(plan: FoldPlan, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(plan_to_dict(plan), indent=2, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )


def load_plan(path: str | Path) -> FoldPlan:
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"plan file not found: {path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: malformed JSON ({exc.msg})") from exc
    try:
        folds = tuple(
            Split(
                train_ids=tuple(entry["train"]),
                dev_ids=tuple(entry["dev"]),
                test_ids=tuple(entry["test"]),
            )
            for entry in data["folds"]
        )
        test_groups = None
        if data["mode"] == "OOD":
            test_groups = tuple(
                frozenset(entry["test_groups"]) for entry in data["folds"]
            )
        return FoldPlan(
            mode=data["mode"],
            folds=folds,
            seed=int(data["seed"]),
            shift_kind=data["shift_kind"],
            test_groups_per_fold=test_groups,
        )
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"{path}: not a fold plan ({exc!r})") from exc
