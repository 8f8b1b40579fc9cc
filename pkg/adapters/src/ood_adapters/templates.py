"""Cloze template rendering.

Templates are plain strings with square-bracket placeholders, e.g.

    "The attitude of [TEXT] is [MASK] regarding [TOPIC]"

[MASK] must occur exactly once; it is replaced by the tokenizer's mask
token at export time.  Text placeholders accept the aliases commonly
used in cloze prompts ([ARG], [REVIEW], [SENTENCE-1], ...), group
placeholders pull from the instance's group annotations.
"""

from __future__ import annotations

import re

from .corpus_io import Record

MASK = "[MASK]"

TEXT_ALIASES = {"TEXT", "ARG", "REVIEW", "ARG-1", "SENTENCE-1", "TEXT-1"}
PAIR_ALIASES = {"TEXT_PAIR", "ARG-2", "SENTENCE-2", "TEXT-2"}
GROUP_KEYS = {"TOPIC": "topic", "DOMAIN": "domain", "LANGUAGE": "language"}

_PLACEHOLDER = re.compile(r"\[([A-Z][A-Z_-]*[0-9]?)\]")


def check_template(template: str) -> None:
    """Reject templates without exactly one mask placeholder."""
    n_masks = template.count(MASK)
    if n_masks == 0:
        raise ValueError("template has no [MASK] placeholder")
    if n_masks > 1:
        raise ValueError(f"template has {n_masks} [MASK] placeholders, expected one")
    for name in _PLACEHOLDER.findall(template):
        if name == "MASK" or name in TEXT_ALIASES or name in PAIR_ALIASES:
            continue
        if name in GROUP_KEYS:
            continue
        raise ValueError(f"unknown template placeholder [{name}]")


def render(template: str, record: Record, mask_token: str) -> str:
    """Fill a checked template for one instance."""

    def fill(match: re.Match) -> str:
        name = match.group(1)
        if name == "MASK":
            return mask_token
        if name in TEXT_ALIASES:
            return record.text
        if name in PAIR_ALIASES:
            if record.text_pair is None:
                raise ValueError(
                    f"instance {record.id!r} has no text_pair for [{name}]"
                )
            return record.text_pair
        key = GROUP_KEYS[name]
        value = record.groups.get(key)
        if not value:
            raise ValueError(f"instance {record.id!r} has no {key!r} group for [{name}]")
        return value

    return _PLACEHOLDER.sub(fill, template)


def embedding_text(record: Record) -> str:
    """Sentence-embedding input: text, with text_pair appended after a space."""
    if record.text_pair:
        return record.text + " " + record.text_pair
    return record.text
