import json

import numpy as np
import pytest

from ood_harness.cli import run
from ood_harness.folds import load_plan
from ood_harness.shiftstats import EmbeddingSet, write_embeddings


@pytest.fixture
def workspace(tmp_path):
    task = tmp_path / "task.cfg"
    task.write_text("name = toy\nshift_kind = topic\nlabels = pro,con\npairwise = false\n")

    corpus = tmp_path / "corpus.jsonl"
    rng = np.random.default_rng(0)
    vectors = {}
    with corpus.open("w") as fh:
        for g in range(4):
            for i in range(6):
                instance_id = f"g{g}i{i}"
                record = {
                    "id": instance_id,
                    "text": f"Topic {g} text number {i}. It has words.",
                    "label": "pro" if (g + i) % 2 else "con",
                    "groups": {"topic": f"g{g}"},
                }
                fh.write(json.dumps(record) + "\n")
                vectors[instance_id] = (rng.normal(size=3) + 4.0 * g).astype(np.float32)

    emb = tmp_path / "emb.tsv"
    write_embeddings(EmbeddingSet(vectors=vectors, dim=3), emb)

    runs = tmp_path / "runs.jsonl"
    with runs.open("w") as fh:
        for r in range(3):
            fh.write(
                json.dumps(
                    {
                        "run_id": f"r{r}",
                        "fold": r,
                        "seed": 0,
                        "epochs": [
                            {"epoch": 0, "dev_loss": 0.9, "dev_f1": 40.0 + r},
                            {"epoch": 1, "dev_loss": 0.5, "dev_f1": 60.0 + r},
                            {"epoch": 2, "dev_loss": 0.3, "dev_f1": 70.0 + r},
                        ],
                        "test": {"true": ["pro", "con"], "pred": ["pro", "con" if r else "pro"]},
                    }
                )
                + "\n"
            )
    return tmp_path


def test_validate_ok(workspace, capsys):
    code = run(
        [
            "validate",
            "--task", str(workspace / "task.cfg"),
            "--corpus", str(workspace / "corpus.jsonl"),
            "--embeddings", str(workspace / "emb.tsv"),
        ]
    )
    assert code == 0
    assert "OK" in capsys.readouterr().err


def test_validate_bad_corpus(workspace):
    bad = workspace / "bad.jsonl"
    bad.write_text('{"id": "a", "text": "x", "label": "nope", "groups": {"topic": "t"}}\n')
    code = run(["validate", "--task", str(workspace / "task.cfg"), "--corpus", str(bad)])
    assert code == 1


def test_validate_missing_file(workspace):
    code = run(
        ["validate", "--task", str(workspace / "task.cfg"), "--corpus", str(workspace / "nope")]
    )
    assert code == 2


def test_split_writes_plans_and_slices(workspace):
    out = workspace / "splits"
    code = run(
        [
            "split",
            "--task", str(workspace / "task.cfg"),
            "--corpus", str(workspace / "corpus.jsonl"),
            "--seed", "0",
            "--out", str(out),
        ]
    )
    assert code == 0
    plan = load_plan(out / "plan.json")
    id_plan = load_plan(out / "plan_id.json")
    assert plan.mode == "OOD" and id_plan.mode == "ID"
    assert len(plan.folds) == 4  # four topics -> four folds
    for mode in ("ood", "id"):
        for f in range(4):
            for role in ("train", "dev", "test"):
                slice_path = out / mode / f"fold{f}" / f"{role}.jsonl"
                assert slice_path.exists()
                assert slice_path.read_text().strip()


def test_split_deterministic(workspace):
    out_a, out_b = workspace / "a", workspace / "b"
    for out in (out_a, out_b):
        assert run(
            [
                "split",
                "--task", str(workspace / "task.cfg"),
                "--corpus", str(workspace / "corpus.jsonl"),
                "--seed", "7",
                "--out", str(out),
            ]
        ) == 0
    assert (out_a / "plan.json").read_bytes() == (out_b / "plan.json").read_bytes()
    assert (out_a / "plan_id.json").read_bytes() == (out_b / "plan_id.json").read_bytes()


def split_then(workspace, *extra):
    out = workspace / "splits"
    assert run(
        [
            "split",
            "--task", str(workspace / "task.cfg"),
            "--corpus", str(workspace / "corpus.jsonl"),
            "--seed", "0",
            "--out", str(out),
        ]
    ) == 0
    return out


def test_profile_writes_fold_rows(workspace):
    out = split_then(workspace)
    profile = workspace / "profile.tsv"
    code = run(
        [
            "profile",
            "--plan", str(out / "plan.json"),
            "--task", str(workspace / "task.cfg"),
            "--corpus", str(workspace / "corpus.jsonl"),
            "--embeddings", str(workspace / "emb.tsv"),
            "--out", str(profile),
        ]
    )
    assert code == 0
    lines = profile.read_text().splitlines()
    assert lines[0].startswith("task\tshift_kind\tfold")
    assert len(lines) == 5
    assert all(line.split("\t")[0] == "toy" for line in lines[1:])


def test_profile_requires_embeddings_or_optout(workspace, capsys):
    out = split_then(workspace)
    code = run(
        [
            "profile",
            "--plan", str(out / "plan.json"),
            "--task", str(workspace / "task.cfg"),
            "--corpus", str(workspace / "corpus.jsonl"),
        ]
    )
    assert code == 2
    assert "--embeddings" in capsys.readouterr().err

    profile = workspace / "p.tsv"
    code = run(
        [
            "profile",
            "--plan", str(out / "plan.json"),
            "--task", str(workspace / "task.cfg"),
            "--corpus", str(workspace / "corpus.jsonl"),
            "--no-separability",
            "--out", str(profile),
        ]
    )
    assert code == 0
    assert "\tNA\t" in profile.read_text().splitlines()[1]


def test_profile_token_losses(workspace):
    out = split_then(workspace)
    losses = workspace / "losses.tsv"
    losses.write_text("g0i0\t2.0,4.0\ng0i1\t5.0\n")
    profile = workspace / "profile.tsv"
    code = run(
        [
            "profile",
            "--plan", str(out / "plan.json"),
            "--task", str(workspace / "task.cfg"),
            "--corpus", str(workspace / "corpus.jsonl"),
            "--no-separability",
            "--token-losses", str(losses),
            "--out", str(profile),
        ]
    )
    assert code == 0
    ppl = (workspace / "profile_ppl.tsv").read_text().splitlines()
    assert ppl[0] == "g0i0\t3.0"
    assert ppl[-1] == "__corpus__\t4.0"


def test_eval_summary(workspace):
    summary = workspace / "summary.json"
    code = run(
        [
            "eval",
            "--runs", str(workspace / "runs.jsonl"),
            "--task", str(workspace / "task.cfg"),
            "--out", str(summary),
        ]
    )
    assert code == 0
    payload = json.loads(summary.read_text())
    assert payload["task"] == "toy"
    assert payload["n_runs"] == 3
    assert payload["mu_tau"] == pytest.approx(-100.0)


def test_eval_single_epoch_exit_1(workspace, capsys):
    runs = workspace / "one_epoch.jsonl"
    runs.write_text(
        json.dumps(
            {
                "run_id": "r0",
                "fold": 0,
                "seed": 0,
                "epochs": [{"epoch": 0, "dev_loss": 0.9, "dev_f1": 40.0}],
                "test": {"true": ["pro"], "pred": ["pro"]},
            }
        )
        + "\n"
    )
    code = run(
        ["eval", "--runs", str(runs), "--task", str(workspace / "task.cfg")]
    )
    assert code == 1
    assert "reliability undefined: <2 epochs" in capsys.readouterr().err


def test_verbalize_build_and_predict(workspace, capsys):
    logprobs = workspace / "lp.jsonl"
    with logprobs.open("w") as fh:
        for g in range(4):
            for i in range(6):
                label_is_pro = (g + i) % 2
                entries = (
                    {"good": -0.5, "meh": -3.0} if label_is_pro else {"poor": -0.4, "meh": -3.0}
                )
                fh.write(json.dumps({"id": f"g{g}i{i}", "logprobs": entries}) + "\n")
    verbalizer_path = workspace / "v.tsv"
    code = run(
        [
            "verbalize", "build",
            "--task", str(workspace / "task.cfg"),
            "--corpus", str(workspace / "corpus.jsonl"),
            "--logprobs", str(logprobs),
            "--per-class", "1",
            "--out", str(verbalizer_path),
        ]
    )
    assert code == 0
    assert verbalizer_path.read_text() == "pro\tgood\ncon\tpoor\n"

    predictions = workspace / "pred.jsonl"
    code = run(
        [
            "verbalize", "predict",
            "--verbalizer", str(verbalizer_path),
            "--task", str(workspace / "task.cfg"),
            "--logprobs", str(logprobs),
            "--out", str(predictions),
        ]
    )
    assert code == 0
    rows = [json.loads(line) for line in predictions.read_text().splitlines()]
    assert len(rows) == 24
    assert rows[0]["label"] in ("pro", "con")
    assert abs(sum(rows[0]["probs"].values()) - 1.0) < 1e-9


def test_report_from_artifacts(workspace):
    out = split_then(workspace)
    profile = workspace / "profile.tsv"
    assert run(
        [
            "profile",
            "--plan", str(out / "plan.json"),
            "--task", str(workspace / "task.cfg"),
            "--corpus", str(workspace / "corpus.jsonl"),
            "--embeddings", str(workspace / "emb.tsv"),
            "--out", str(profile),
        ]
    ) == 0
    summary = workspace / "summary.json"
    assert run(
        [
            "eval",
            "--runs", str(workspace / "runs.jsonl"),
            "--task", str(workspace / "task.cfg"),
            "--out", str(summary),
        ]
    ) == 0
    report_path = workspace / "report.md"
    code = run(
        [
            "report",
            "--profiles", str(profile),
            "--summaries", str(summary),
            "--format", "md",
            "--out", str(report_path),
        ]
    )
    assert code == 0
    text = report_path.read_text()
    assert "| Task | Shift Type | Separability |" in text
    assert "±<small>" in text


def test_report_json_single_document(workspace):
    out = split_then(workspace)
    profile = workspace / "profile.tsv"
    summary = workspace / "summary.json"
    assert run(
        [
            "profile", "--plan", str(out / "plan.json"),
            "--task", str(workspace / "task.cfg"),
            "--corpus", str(workspace / "corpus.jsonl"),
            "--no-separability", "--out", str(profile),
        ]
    ) == 0
    assert run(
        [
            "eval", "--runs", str(workspace / "runs.jsonl"),
            "--task", str(workspace / "task.cfg"), "--out", str(summary),
        ]
    ) == 0
    report_path = workspace / "report.json"
    assert run(
        [
            "report", "--profiles", str(profile), "--summaries", str(summary),
            "--format", "json", "--out", str(report_path),
        ]
    ) == 0
    payload = json.loads(report_path.read_text())
    assert set(payload) == {"profiles", "summaries"}
    assert payload["profiles"][0]["task"] == "toy"
    assert payload["summaries"]["tasks"]["toy"]["n_runs"] == 3


def test_report_needs_input(workspace):
    assert run(["report"]) == 2


def test_unknown_flag_exits_2(workspace):
    with pytest.raises(SystemExit) as exc:
        run(["split", "--bogus"])
    assert exc.value.code == 2


def test_threads_env_equivalent(workspace, monkeypatch):
    out = split_then(workspace)
    args = [
        "profile",
        "--plan", str(out / "plan.json"),
        "--task", str(workspace / "task.cfg"),
        "--corpus", str(workspace / "corpus.jsonl"),
        "--embeddings", str(workspace / "emb.tsv"),
    ]
    serial = workspace / "serial.tsv"
    parallel = workspace / "parallel.tsv"
    monkeypatch.setenv("OOD_HARNESS_THREADS", "1")
    assert run(args + ["--out", str(serial)]) == 0
    monkeypatch.setenv("OOD_HARNESS_THREADS", "4")
    assert run(args + ["--out", str(parallel)]) == 0
    assert serial.read_bytes() == parallel.read_bytes()
