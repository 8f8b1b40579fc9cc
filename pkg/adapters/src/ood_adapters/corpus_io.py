"""Minimal corpus reading.

Full validation is the harness's job; the adapters only need ids, texts,
and group values from well-formed corpus JSONL files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path


@dataclass(frozen=True)
class Record:
    id: str
    text: str
    text_pair: str | None
    groups: dict[str, str]


def read_corpus(path: str | Path) -> list[Record]:
    records = []
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            if not raw.strip():
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: malformed JSON ({exc.msg})") from exc
            try:
                records.append(
                    Record(
                        id=obj["id"],
                        text=obj["text"],
                        text_pair=obj.get("text_pair"),
                        groups=dict(obj.get("groups", {})),
                    )
                )
            except KeyError as exc:
                raise ValueError(f"{path}:{lineno}: missing field {exc}") from exc
    if not records:
        raise ValueError(f"{path}: empty corpus")
    return records
