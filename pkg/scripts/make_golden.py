#!/usr/bin/env python3
"""Regenerate the bundled golden fixtures and their expected pipeline outputs.

Builds a 600-instance synthetic corpus (6 topics, 2 classes) with
topic-correlated vocabulary, topic-dependent label skew, per-topic
sentence lengths, synthetic topic-clustered embeddings, and 9 synthetic
run logs (3 folds x 3 seeds).  Then drives the CLI end to end and
freezes every output byte into tests/data/golden/expected/.

Run from the repository root:  python3 scripts/make_golden.py
"""

import hashlib
import json
import shutil
import sys
from pathlib import Path

import numpy as np

from ood_harness.cli import run
from ood_harness.corpus import load_corpus, load_task
from ood_harness.folds import load_plan
from ood_harness.shiftstats import EmbeddingSet, write_embeddings

ROOT = Path(__file__).resolve().parent.parent
GOLDEN = ROOT / "tests" / "data" / "golden"

MASTER_SEED = 20240123
N_TOPICS = 6
TOPIC_SIZES = [140, 120, 110, 90, 80, 60]
PRO_RATE = [0.80, 0.65, 0.55, 0.40, 0.30, 0.20]
BASE_SENTENCE_LEN = [5, 6, 7, 9, 11, 13]
EMBED_DIM = 8
N_SEEDS = 3
N_EPOCHS = 6
FLIP_RATE = [0.08, 0.11, 0.14, 0.17, 0.12, 0.09, 0.15, 0.10, 0.13]

SHARED_WORDS = (
    "the a this that point case view claim debate reply note people group "
    "side fact idea reason answer question matter issue text part word line"
).split()

TOPIC_WORDS = [
    "tax fee law rule cost fund debt rate cut bill".split(),
    "farm crop soil seed water field grain yield barn harvest".split(),
    "engine road transit driver vehicle traffic highway fuel carpool commute".split(),
    "teacher student lesson school tuition learning classroom homework grading semester".split(),
    "hospital patient therapy medicine insurance treatment diagnosis recovery surgery vaccination".split(),
    "renewable electricity generation infrastructure sustainability conservation atmosphere emission turbine photovoltaic".split(),
]


def make_corpus_file(rng: np.random.Generator, path: Path) -> None:
    with path.open("w", encoding="utf-8") as fh:
        counter = 0
        for topic in range(N_TOPICS):
            for _ in range(TOPIC_SIZES[topic]):
                counter += 1
                label = "pro" if rng.random() < PRO_RATE[topic] else "con"
                n_sentences = int(rng.integers(1, 4))
                sentences = []
                for _ in range(n_sentences):
                    length = BASE_SENTENCE_LEN[topic] + int(rng.integers(0, 4))
                    tokens = []
                    for _ in range(length):
                        pool = TOPIC_WORDS[topic] if rng.random() < 0.6 else SHARED_WORDS
                        tokens.append(pool[int(rng.integers(len(pool)))])
                    sentence = " ".join(tokens).capitalize()
                    sentences.append(sentence + ("!" if rng.random() < 0.1 else "."))
                record = {
                    "id": f"inst{counter:04d}",
                    "text": " ".join(sentences),
                    "label": label,
                    "groups": {"topic": f"topic{topic}"},
                }
                fh.write(json.dumps(record, ensure_ascii=False) + "\n")


def make_embeddings_file(rng: np.random.Generator, corpus, path: Path) -> None:
    centers = rng.normal(scale=4.0, size=(N_TOPICS, EMBED_DIM))
    vectors = {}
    for inst in corpus.instances:
        topic = int(inst.groups["topic"].removeprefix("topic"))
        vec = centers[topic] + rng.normal(scale=0.7, size=EMBED_DIM)
        vectors[inst.id] = vec.astype(np.float32)
    write_embeddings(EmbeddingSet(vectors=vectors, dim=EMBED_DIM), path)


def make_runs_file(rng: np.random.Generator, corpus, plan, path: Path) -> None:
    with path.open("w", encoding="utf-8") as fh:
        run_index = 0
        for fold in range(len(plan.folds)):
            for seed in range(N_SEEDS):
                epochs = []
                for e in range(N_EPOCHS):
                    loss = 0.85 * 0.75**e + abs(float(rng.normal(scale=0.05)))
                    f1 = 48.0 + 6.0 * e + float(rng.normal(scale=4.0))
                    epochs.append(
                        {
                            "epoch": e,
                            "dev_loss": round(loss, 6),
                            "dev_f1": round(min(max(f1, 1.0), 99.0), 4),
                        }
                    )
                flip = FLIP_RATE[run_index]
                true = [corpus.by_id(i).label for i in plan.folds[fold].test_ids]
                pred = [
                    ("con" if t == "pro" else "pro") if rng.random() < flip else t
                    for t in true
                ]
                fh.write(
                    json.dumps(
                        {
                            "run_id": f"fold{fold}-seed{seed}",
                            "fold": fold,
                            "seed": seed,
                            "epochs": epochs,
                            "test": {"true": true, "pred": pred},
                        }
                    )
                    + "\n"
                )
                run_index += 1


def sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def drive_pipeline(golden: Path, out: Path) -> None:
    task = str(golden / "task.cfg")
    corpus = str(golden / "corpus.jsonl")
    steps = [
        ["split", "--task", task, "--corpus", corpus, "--seed", "0",
         "--out", str(out / "splits")],
        ["profile", "--plan", str(out / "splits" / "plan.json"), "--task", task,
         "--corpus", corpus, "--embeddings", str(golden / "embeddings.tsv"),
         "--out", str(out / "profile.tsv")],
        ["eval", "--runs", str(golden / "runs.jsonl"), "--task", task,
         "--out", str(out / "summary.json")],
        ["report", "--profiles", str(out / "profile.tsv"),
         "--summaries", str(out / "summary.json"),
         "--format", "tsv", "--out", str(out / "report.tsv")],
        ["report", "--profiles", str(out / "profile.tsv"),
         "--summaries", str(out / "summary.json"),
         "--format", "md", "--out", str(out / "report.md")],
    ]
    for argv in steps:
        code = run(argv)
        if code != 0:
            raise SystemExit(f"golden pipeline step failed ({code}): {argv}")


def main() -> None:
    GOLDEN.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(MASTER_SEED)

    (GOLDEN / "task.cfg").write_text(
        "name = golden\nshift_kind = topic\nlabels = pro,con\npairwise = false\n"
    )
    make_corpus_file(rng, GOLDEN / "corpus.jsonl")
    task = load_task(GOLDEN / "task.cfg")
    corpus = load_corpus(GOLDEN / "corpus.jsonl", task)
    make_embeddings_file(rng, corpus, GOLDEN / "embeddings.tsv")

    expected = GOLDEN / "expected"
    if expected.exists():
        shutil.rmtree(expected)
    expected.mkdir()

    # runs reference the fold-0-seed OOD plan, so compose it first
    code = run(
        ["split", "--task", str(GOLDEN / "task.cfg"), "--corpus",
         str(GOLDEN / "corpus.jsonl"), "--seed", "0", "--out", str(expected / "splits")]
    )
    if code != 0:
        raise SystemExit("initial split failed")
    plan = load_plan(expected / "splits" / "plan.json")
    make_runs_file(rng, corpus, plan, GOLDEN / "runs.jsonl")

    shutil.rmtree(expected / "splits")
    drive_pipeline(GOLDEN, expected)

    checksums = {
        str(p.relative_to(expected)): sha256(p)
        for p in sorted(expected.rglob("*"))
        if p.is_file()
    }
    (GOLDEN / "checksums.json").write_text(
        json.dumps(checksums, indent=2) + "\n"
    )
    print(f"wrote {len(checksums)} expected files under {expected}")


if __name__ == "__main__":
    sys.exit(main())
