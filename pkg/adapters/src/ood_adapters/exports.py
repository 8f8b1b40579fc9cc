"""Batch LM inference writing the harness wire formats.

Embeddings are mean-pooled final hidden states (attention-masked), one
vector per instance in the ``dim=<d>`` / ``<id>\\t<f1>,...`` format.
Mask log-probabilities are the top-k log-softmax entries at the single
mask position of a rendered cloze prompt, one JSONL record per instance.
All files are written atomically (temp file + rename).
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import torch

from .corpus_io import Record, read_corpus
from .templates import check_template, embedding_text, render

DEFAULT_EMBEDDING_MODEL = "sentence-transformers/paraphrase-multilingual-mpnet-base-v2"
DEFAULT_TOP_K = 100


@dataclass(frozen=True)
class ExportJob:
    corpus: Path
    model: str
    output: Path
    template: str | None = None
    top_k: int = DEFAULT_TOP_K
    batch_size: int = 16
    device: str = "cpu"

    def __post_init__(self) -> None:
        if self.top_k < 1:
            raise ValueError("top_k must be at least 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")


def _atomic_write(path: Path, lines: list[str]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _batches(records: list[Record], size: int):
    for start in range(0, len(records), size):
        yield records[start : start + size]


def export_embeddings(job: ExportJob) -> Path:
    """One mean-pooled sentence vector per instance."""
    from transformers import AutoModel, AutoTokenizer

    records = read_corpus(job.corpus)
    tokenizer = AutoTokenizer.from_pretrained(job.model)
    model = AutoModel.from_pretrained(job.model).to(job.device).eval()

    lines: list[str] = []
    dim = None
    with torch.no_grad():
        for batch in _batches(records, job.batch_size):
            enc = tokenizer(
                [embedding_text(r) for r in batch],
                padding=True,
                truncation=True,
                return_tensors="pt",
            ).to(job.device)
            hidden = model(**enc).last_hidden_state
            mask = enc["attention_mask"].unsqueeze(-1).to(hidden.dtype)
            pooled = (hidden * mask).sum(dim=1) / mask.sum(dim=1)
            vectors = pooled.to(torch.float32).cpu().numpy()
            dim = vectors.shape[1]
            for record, vec in zip(batch, vectors):
                values = ",".join(repr(float(v)) for v in vec)
                lines.append(f"{record.id}\t{values}")
    _atomic_write(job.output, [f"dim={dim}"] + lines)
    return job.output


def export_mask_logprobs(job: ExportJob) -> Path:
    """Top-k tokens with log-probabilities at the prompt's mask position."""
    from transformers import AutoModelForMaskedLM, AutoTokenizer

    if job.template is None:
        raise ValueError("mask log-prob export needs a template")
    check_template(job.template)

    records = read_corpus(job.corpus)
    tokenizer = AutoTokenizer.from_pretrained(job.model)
    model = AutoModelForMaskedLM.from_pretrained(job.model).to(job.device).eval()
    mask_id = tokenizer.mask_token_id
    if mask_id is None:
        raise ValueError(f"model {job.model!r} has no mask token")
    k = min(job.top_k, model.config.vocab_size)

    lines: list[str] = []
    with torch.no_grad():
        for batch in _batches(records, job.batch_size):
            prompts = [render(job.template, r, tokenizer.mask_token) for r in batch]
            enc = tokenizer(
                prompts, padding=True, truncation=True, return_tensors="pt"
            ).to(job.device)
            logits = model(**enc).logits
            for row, record in enumerate(batch):
                positions = (enc["input_ids"][row] == mask_id).nonzero(as_tuple=True)[0]
                if len(positions) != 1:
                    raise ValueError(
                        f"instance {record.id!r}: prompt holds {len(positions)} mask "
                        f"tokens after tokenization, expected exactly one"
                    )
                logprobs = torch.log_softmax(logits[row, positions[0]], dim=-1)
                top = logprobs.topk(k)
                entries = {
                    token: float(value)
                    for token, value in zip(
                        tokenizer.convert_ids_to_tokens(top.indices.tolist()),
                        top.values.tolist(),
                    )
                }
                lines.append(
                    json.dumps({"id": record.id, "logprobs": entries}, ensure_ascii=False)
                )
    _atomic_write(job.output, lines)
    return job.output
