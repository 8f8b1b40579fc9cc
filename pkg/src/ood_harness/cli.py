"""Command-line interface: validate -> split -> profile -> eval -> verbalize -> report.

Exit codes: 0 success, 1 validation violation, 2 I/O or schema error.
Diagnostics go to stderr; data goes to files or stdout.  The
OOD_HARNESS_THREADS environment variable caps internal parallelism
(results are identical regardless).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import folds, report, runeval, shiftstats, verbalizer
from .corpus import load_corpus, load_task, write_corpus
from .errors import SchemaError, ValidationError

DEFAULT_SEEDS = (0, 1, 2)

PROFILE_HEADER = (
    "task\tshift_kind\tfold\tn_train\tn_dev\tn_test\t"
    "separability\tdelta_flesch\tdelta_words\tkl"
)


def _info(message: str) -> None:
    print(message, file=sys.stderr)


def _threads() -> int:
    raw = os.environ.get("OOD_HARNESS_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise SchemaError(f"OOD_HARNESS_THREADS must be an integer, got {raw!r}")


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def cmd_validate(args: argparse.Namespace) -> int:
    task = load_task(args.task)
    corpus = load_corpus(args.corpus, task)
    _info(
        f"OK: {len(corpus)} instances, {len(corpus.group_index)} "
        f"{task.shift_kind} groups, labels {list(task.label_set)}"
    )
    if args.embeddings:
        emb = shiftstats.read_embeddings(args.embeddings)
        missing = [i for i in corpus.ids if i not in emb.vectors]
        if missing:
            raise ValidationError(
                f"{len(missing)} corpus ids without embeddings (first: {missing[0]!r})"
            )
        _info(f"OK: embeddings cover all ids (dim={emb.dim})")
    if args.logprobs:
        records = verbalizer.load_token_logprobs(args.logprobs)
        _info(f"OK: {len(records)} log-prob records")
    return 0


def cmd_split(args: argparse.Namespace) -> int:
    task = load_task(args.task)
    corpus = load_corpus(args.corpus, task)
    ood_plan = folds.compose_ood(corpus, args.seed, n_folds=args.folds)
    id_plan = folds.compose_id(corpus, ood_plan, args.seed)
    for plan, name in ((ood_plan, "plan.json"), (id_plan, "plan_id.json")):
        violations = folds.verify_plan(plan, corpus)
        if violations:
            for v in violations:
                _info(f"violation: {v}")
            return 1

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    folds.save_plan(ood_plan, out / "plan.json")
    folds.save_plan(id_plan, out / "plan_id.json")
    for mode, plan in (("ood", ood_plan), ("id", id_plan)):
        for f, split in enumerate(plan.folds):
            fold_dir = out / mode / f"fold{f}"
            fold_dir.mkdir(parents=True, exist_ok=True)
            for role, ids in (
                ("train", split.train_ids),
                ("dev", split.dev_ids),
                ("test", split.test_ids),
            ):
                write_corpus(corpus.subset(ids), fold_dir / f"{role}.jsonl")
    _info(
        f"wrote {len(ood_plan.folds)}-fold OOD and ID plans for "
        f"{len(corpus)} instances to {out}"
    )
    return 0


def _format_float(value: float | None) -> str:
    return "NA" if value is None else repr(float(value))


def cmd_profile(args: argparse.Namespace) -> int:
    plan = folds.load_plan(args.plan)
    task = load_task(args.task)
    corpus = load_corpus(args.corpus, task)
    emb = None
    if args.embeddings:
        emb = shiftstats.read_embeddings(args.embeddings)
    elif not args.no_separability:
        raise SchemaError(
            "separability needs --embeddings <file> (header 'dim=<d>', lines "
            "'<id>\\t<f1>,<f2>,...'); pass --no-separability to skip it"
        )

    profiles = shiftstats.profile_plan(corpus, plan, emb, threads=_threads())
    lines = [PROFILE_HEADER]
    for p, split in zip(profiles, plan.folds):
        lines.append(
            "\t".join(
                [
                    task.name,
                    plan.shift_kind,
                    str(p.fold),
                    str(len(split.train_ids)),
                    str(len(split.dev_ids)),
                    str(len(split.test_ids)),
                    _format_float(p.separability),
                    _format_float(p.delta_flesch),
                    _format_float(p.delta_words),
                    _format_float(p.kl),
                ]
            )
        )
    _emit("\n".join(lines) + "\n", args.out)

    if args.token_losses:
        losses = shiftstats.read_token_losses(args.token_losses)
        ppl = shiftstats.pseudo_perplexity(losses, reference_mean=args.ppl_reference)
        ppl_lines = [f"{i}\t{repr(m)}" for i, m in ppl.per_instance.items()]
        ppl_lines.append(f"__corpus__\t{repr(ppl.corpus_mean)}")
        if ppl.reference_delta is not None:
            ppl_lines.append(f"__delta__\t{repr(ppl.reference_delta)}")
        ppl_out = None
        if args.out is not None:
            base = Path(args.out)
            ppl_out = str(base.with_name(base.stem + "_ppl" + base.suffix))
        _emit("\n".join(ppl_lines) + "\n", ppl_out)
        _info(f"pseudo-perplexity corpus mean: {ppl.corpus_mean:.4f}")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    task = load_task(args.task)
    runs = runeval.load_runs(args.runs, label_set=task.label_set)
    summary = runeval.aggregate(runs, task.label_set)
    payload = {"task": task.name, **runeval.summary_to_dict(summary)}
    _emit(json.dumps(payload, indent=2, ensure_ascii=False) + "\n", args.out)
    _info(
        f"{summary.n_runs} runs: applicability {summary.mu_f1:.1f}, "
        f"reliability "
        + ("-" if summary.mu_tau is None else f"{summary.mu_tau:.1f}")
    )
    return 0


def cmd_verbalize_build(args: argparse.Namespace) -> int:
    task = load_task(args.task)
    corpus = load_corpus(args.corpus, task)
    records = verbalizer.load_token_logprobs(args.logprobs)
    by_id = {r.instance_id: r for r in records}
    missing = [i for i in corpus.ids if i not in by_id]
    if missing:
        raise ValidationError(
            f"{len(missing)} corpus ids without log-probs (first: {missing[0]!r})"
        )
    ordered = [by_id[i] for i in corpus.ids]
    labels = [inst.label for inst in corpus.instances]
    v = verbalizer.build_automatic(
        ordered, labels, task.label_set, m=args.per_class
    )
    verbalizer.save_verbalizer(v, args.out)
    _info(f"built automatic verbalizer with {args.per_class} tokens per class")
    return 0


def cmd_verbalize_predict(args: argparse.Namespace) -> int:
    classes = None
    if args.task:
        classes = load_task(args.task).label_set
    v = verbalizer.load_manual(args.verbalizer, classes=classes)
    records = verbalizer.load_token_logprobs(args.logprobs)
    lines = []
    for rec in records:
        label, probs = verbalizer.predict(rec, v)
        lines.append(
            json.dumps(
                {"id": rec.instance_id, "label": label, "probs": probs},
                ensure_ascii=False,
            )
        )
    _emit("\n".join(lines) + "\n", args.out)
    _info(f"predicted {len(records)} instances")
    return 0


def _read_profile_tsv(path: str) -> tuple[str, str, list[shiftstats.ShiftProfile]]:
    p = Path(path)
    if not p.exists():
        raise SchemaError(f"profile file not found: {p}")
    lines = p.read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != PROFILE_HEADER:
        raise SchemaError(f"{p}: not a profile table")
    task = shift_kind = None
    profiles = []
    for lineno, line in enumerate(lines[1:], 2):
        if not line:
            continue
        cells = line.split("\t")
        if len(cells) != 10:
            raise SchemaError(f"{p}:{lineno}: expected 10 columns")
        task, shift_kind = cells[0], cells[1]
        profiles.append(
            shiftstats.ShiftProfile(
                fold=int(cells[2]),
                separability=None if cells[6] == "NA" else float(cells[6]),
                delta_flesch=float(cells[7]),
                delta_words=float(cells[8]),
                kl=float(cells[9]),
            )
        )
    if not profiles:
        raise SchemaError(f"{p}: no profile rows")
    return task, shift_kind, profiles


def cmd_report(args: argparse.Namespace) -> int:
    if not args.profiles and not args.summaries:
        raise SchemaError("report needs --profiles and/or --summaries")
    sections = []
    if args.profiles:
        by_task: dict[str, tuple[str, list[shiftstats.ShiftProfile]]] = {}
        for path in args.profiles:
            task, shift_kind, profiles = _read_profile_tsv(path)
            if task in by_task:
                raise ValidationError(f"duplicate profile for task {task!r}")
            by_task[task] = (shift_kind, profiles)
        sections.append(("profiles", report.render_profile(by_task, fmt=args.format)))
    if args.summaries:
        summaries: dict[str, runeval.EvalSummary] = {}
        for path in args.summaries:
            p = Path(path)
            if not p.exists():
                raise SchemaError(f"summary file not found: {p}")
            try:
                data = json.loads(p.read_text(encoding="utf-8"))
            except json.JSONDecodeError as exc:
                raise SchemaError(f"{p}: malformed JSON ({exc.msg})") from exc
            name = data.get("task", p.stem)
            if name in summaries:
                raise ValidationError(f"duplicate summary for task {name!r}")
            summaries[name] = runeval.summary_from_dict(data)
        sections.append(("summaries", report.render_summary(summaries, fmt=args.format)))

    if args.format == "json":
        # one document, not concatenated fragments
        payload = {key: json.loads(text) for key, text in sections}
        _emit(json.dumps(payload, indent=2, ensure_ascii=False) + "\n", args.out)
    else:
        _emit("\n".join(text for _, text in sections), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ood-harness",
        description="Compose OOD/ID benchmark folds, profile distribution "
        "shift, and score exported training runs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="validate corpus and export files")
    p.add_argument("--task", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--embeddings")
    p.add_argument("--logprobs")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("split", help="compose OOD and size-matched ID folds")
    p.add_argument("--task", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--seed", type=int, default=DEFAULT_SEEDS[0])
    p.add_argument("--folds", type=int, default=None, help="override fold count")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("profile", help="per-fold shift profile of a plan")
    p.add_argument("--plan", required=True)
    p.add_argument("--task", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--embeddings")
    p.add_argument("--no-separability", action="store_true")
    p.add_argument("--token-losses")
    p.add_argument("--ppl-reference", type=float, default=None)
    p.add_argument("--out")
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("eval", help="score a run-log export")
    p.add_argument("--runs", required=True)
    p.add_argument("--task", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("verbalize", help="build or apply verbalizers")
    vsub = p.add_subparsers(dest="verbalize_command", required=True)

    pb = vsub.add_parser("build", help="select indicative tokens from train log-probs")
    pb.add_argument("--task", required=True)
    pb.add_argument("--corpus", required=True)
    pb.add_argument("--logprobs", required=True)
    pb.add_argument("--per-class", type=int, default=verbalizer.DEFAULT_TOKENS_PER_CLASS)
    pb.add_argument("--out", required=True)
    pb.set_defaults(func=cmd_verbalize_build)

    pp = vsub.add_parser("predict", help="label instances from mask log-probs")
    pp.add_argument("--verbalizer", required=True)
    pp.add_argument("--task")
    pp.add_argument("--logprobs", required=True)
    pp.add_argument("--out")
    pp.set_defaults(func=cmd_verbalize_predict)

    p = sub.add_parser("report", help="render profile/summary tables")
    p.add_argument("--profiles", nargs="*", default=[])
    p.add_argument("--summaries", nargs="*", default=[])
    p.add_argument("--format", choices=report.FORMATS, default="tsv")
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)
    return parser


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        _info(f"error: {exc}")
        return 1
    except (SchemaError, OSError) as exc:
        _info(f"error: {exc}")
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
