"""Loading, validation, and indexing of grouped text corpora.

A corpus is a JSONL file, one record per line:

    {"id": str, "text": str, "text_pair": str (optional), "label": str,
     "groups": {"topic"|"domain"|"language": str, ...}}

Task descriptions live in a flat key=value config file with keys
``name``, ``shift_kind``, ``labels`` (comma-separated, order = class
index order), and ``pairwise`` (true/false).
"""

from __future__ import annotations

import json
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

from .errors import SchemaError, ValidationError

SHIFT_KINDS = ("topic", "domain", "language")


@dataclass(frozen=True)
class Instance:
    """One labeled text item with its shift-property annotations."""

    id: str
    text: str
    label: str
    groups: Mapping[str, str]
    text_pair: str | None = None


@dataclass(frozen=True)
class TaskSpec:
    name: str
    shift_kind: str
    label_set: tuple[str, ...]
    pairwise: bool = False

    def __post_init__(self) -> None:
        if self.shift_kind not in SHIFT_KINDS:
            raise ValidationError(
                f"shift_kind must be one of {SHIFT_KINDS}, got {self.shift_kind!r}"
            )
        if len(set(self.label_set)) < 2:
            raise ValidationError("label_set needs at least 2 distinct entries")
        if len(set(self.label_set)) != len(self.label_set):
            raise ValidationError("label_set entries must be distinct")


@dataclass(frozen=True)
class Corpus:
    """Immutable, order-preserving collection of validated instances."""

    task: TaskSpec
    instances: tuple[Instance, ...]
    group_index: Mapping[str, tuple[str, ...]] = field(init=False)

    def __post_init__(self) -> None:
        index: dict[str, list[str]] = {}
        for inst in self.instances:
            index.setdefault(inst.groups[self.task.shift_kind], []).append(inst.id)
        object.__setattr__(
            self, "group_index", {g: tuple(ids) for g, ids in index.items()}
        )

    def __len__(self) -> int:
        return len(self.instances)

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(inst.id for inst in self.instances)

    def by_id(self, instance_id: str) -> Instance:
        try:
            return self._id_map[instance_id]
        except AttributeError:
            object.__setattr__(
                self, "_id_map", {inst.id: inst for inst in self.instances}
            )
            return self._id_map[instance_id]

    def subset(self, ids: Iterable[str]) -> list[Instance]:
        return [self.by_id(i) for i in ids]


def load_task(path: str | Path) -> TaskSpec:
    """Parse a task config file (flat ``key = value`` lines, # comments)."""
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"task config not found: {path}")
    fields: dict[str, str] = {}
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise SchemaError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        fields[key.strip()] = value.strip()
    missing = {"name", "shift_kind", "labels"} - fields.keys()
    if missing:
        raise SchemaError(f"{path}: missing task keys: {sorted(missing)}")
    pairwise_raw = fields.get("pairwise", "false").lower()
    if pairwise_raw not in ("true", "false"):
        raise SchemaError(f"{path}: pairwise must be true or false, got {pairwise_raw!r}")
    labels = tuple(s.strip() for s in fields["labels"].split(",") if s.strip())
    return TaskSpec(
        name=fields["name"],
        shift_kind=fields["shift_kind"],
        label_set=labels,
        pairwise=pairwise_raw == "true",
    )


def _parse_record(raw: str, lineno: int, task: TaskSpec) -> Instance:
    try:
        record = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"line {lineno}: malformed JSON ({exc.msg})") from exc
    if not isinstance(record, dict):
        raise SchemaError(f"line {lineno}: record is not an object")

    for key, kind in (("id", str), ("text", str), ("label", str)):
        if key not in record:
            raise SchemaError(f"line {lineno}: missing field {key!r}")
        if not isinstance(record[key], kind):
            raise SchemaError(f"line {lineno}: field {key!r} must be a string")

    instance_id = record["id"]
    if not instance_id:
        raise ValidationError(f"line {lineno}: empty id")
    if "\t" in instance_id or "\n" in instance_id:
        # ids key the tab-separated embedding and token-loss formats
        raise ValidationError(f"line {lineno}: id {instance_id!r} contains tab/newline")
    if not record["text"]:
        raise ValidationError(f"line {lineno}: instance {instance_id!r} has empty text")
    label = record["label"]
    if label not in task.label_set:
        raise ValidationError(
            f"line {lineno}: instance {instance_id!r} has label {label!r} "
            f"not in label set {list(task.label_set)}"
        )

    text_pair = record.get("text_pair")
    if text_pair is not None and not isinstance(text_pair, str):
        raise SchemaError(f"line {lineno}: field 'text_pair' must be a string")
    if task.pairwise and not text_pair:
        raise ValidationError(
            f"line {lineno}: instance {instance_id!r} misses text_pair "
            f"required by pairwise task {task.name!r}"
        )

    groups_raw = record.get("groups")
    if not isinstance(groups_raw, dict):
        raise SchemaError(f"line {lineno}: missing or malformed 'groups' object")
    # Group values are compared byte-exact after NFC normalization so that
    # multilingual corpora mixing composed/decomposed forms index identically.
    groups = {
        k: unicodedata.normalize("NFC", v)
        for k, v in groups_raw.items()
        if k in SHIFT_KINDS and isinstance(v, str)
    }
    if not groups.get(task.shift_kind):
        raise ValidationError(
            f"line {lineno}: instance {instance_id!r} misses a non-empty "
            f"{task.shift_kind!r} group value"
        )
    return Instance(
        id=instance_id,
        text=record["text"],
        label=label,
        groups=groups,
        text_pair=text_pair,
    )


def load_corpus(path: str | Path, task: TaskSpec) -> Corpus:
    """Load and validate one corpus file; instance order equals line order."""
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"corpus file not found: {path}")

    instances: list[Instance] = []
    seen: dict[str, int] = {}
    with path.open(encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            if not raw.strip():
                continue
            inst = _parse_record(raw, lineno, task)
            if inst.id in seen:
                raise ValidationError(
                    f"duplicate id {inst.id!r} on lines {seen[inst.id]} and {lineno}"
                )
            seen[inst.id] = lineno
            instances.append(inst)
    if not instances:
        raise ValidationError("empty corpus")
    return Corpus(task=task, instances=tuple(instances))


def write_corpus(instances: Iterable[Instance], path: str | Path) -> None:
    """Write instances as JSONL, the inverse of load_corpus."""
    with Path(path).open("w", encoding="utf-8") as fh:
        for inst in instances:
            record: dict = {"id": inst.id, "text": inst.text}
            if inst.text_pair is not None:
                record["text_pair"] = inst.text_pair
            record["label"] = inst.label
            record["groups"] = dict(inst.groups)
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


def group_counts(corpus: Corpus) -> dict[str, int]:
    """Instance count per group value; counts sum to len(corpus)."""
    return {g: len(ids) for g, ids in corpus.group_index.items()}
