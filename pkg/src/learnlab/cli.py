"""Command-line entry point: ``learnlab <group> <command> ...``."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from . import ingest
from .catalog import FeedbackDocument, Strictness
from .dataflow import Context
from .evalx import classification_metrics, regression_metrics, report_json
from .sentiment import Lexicon
from .storage import RawStore, estimate_storage, inspect_frame


def _manifest_line(m: ingest.SnapshotManifest) -> str:
    return (
        f"{m.source_id}\tsnapshot={m.snapshot_id}\trows={m.row_count}\tinput={m.input_rows}"
        f"\tvalid={m.valid_rows}\tquarantined={m.quarantined_rows}\tdigest={m.content_digest}"
    )


def cmd_ingest(args) -> int:
    store = RawStore(args.store)
    if args.kind == "schedule":
        sources = ingest.parse_schedule(Path(args.config).read_text(encoding="utf-8"), Path(args.config).parent)
        ticks = [float(t) for t in args.ticks.split(",")]
        for m in ingest.run_schedule(store, sources, ticks, args.workers):
            print(_manifest_line(m))
        return 0
    if args.path is None or args.snapshot is None:
        print("ingest needs --path and --snapshot", file=sys.stderr)
        return 2
    if args.kind == "table":
        kwargs = {"strictness": Strictness(args.strictness)}
        if args.table:
            kwargs["table"] = args.table
        m = ingest.import_table(store, args.path, args.snapshot, **kwargs)
    elif args.kind == "events":
        m = ingest.import_events(store, args.path, args.snapshot)
    else:
        m = ingest.import_feedback(store, args.path, args.snapshot)
    print(_manifest_line(m))
    for w in m.warnings:
        print(f"warning: {w}", file=sys.stderr)
    return 0


def cmd_store(args) -> int:
    if args.action == "inspect":
        print(json.dumps(inspect_frame(args.file), indent=2))
        return 0
    if args.action == "size":
        print(estimate_storage(args.students, args.bytes_per_student, args.replication).describe())
        return 0
    store = RawStore(args.store)
    w = csv.writer(sys.stdout, delimiter="\t", lineterminator="\n")
    for row in store.scan_range(args.table, args.start, args.end):
        for q in sorted(row.cells):
            value, ts = row.cells[q]
            w.writerow([row.row_key, q, ts, value.decode("utf-8", "replace")])
    return 0


def _read_feedback_csv(path) -> list[FeedbackDocument]:
    with open(path, newline="", encoding="utf-8") as fh:
        return [
            FeedbackDocument(r["student_id"], (r["q1"], r["q2"], r["q3"]), r.get("collected_at") or "")
            for r in csv.DictReader(fh)
        ]


def cmd_sentiment(args) -> int:
    from .experiment.pipeline import run_model2

    docs = [d for d in _read_feedback_csv(args.feedback) if not d.is_empty]
    lexicon = Lexicon.load(args.lexicon)
    frame = run_model2(docs, lexicon, Context(args.partitions, args.workers), frame_path=args.out)
    out = open(args.csv, "w", newline="", encoding="utf-8") if args.csv else sys.stdout
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(frame.names)
        for sid, score, category in frame.rows():
            w.writerow([sid, f"{score:.4f}", category])
    finally:
        if args.csv:
            out.close()
    return 0


def _read_values(path, column: str | None) -> dict[str, float]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if not reader.fieldnames or "student_id" not in reader.fieldnames:
            raise SystemExit(f"{path}: needs a student_id column")
        column = column or next(c for c in reader.fieldnames if c != "student_id")
        return {r["student_id"]: float(r[column]) for r in reader}


def cmd_evaluate(args) -> int:
    pred = _read_values(args.pred, args.pred_column)
    truth = _read_values(args.truth, args.truth_column)
    keys = sorted(set(pred) & set(truth))
    missing = len(set(truth) - set(pred))
    if missing:
        print(f"warning: {missing} truth rows have no prediction", file=sys.stderr)
    y, p = [truth[k] for k in keys], [pred[k] for k in keys]
    report = classification_metrics(y, p) if args.task == "classification" else regression_metrics(y, p)
    print(report_json(report) if args.json else report.render())
    return 0


def cmd_lab(args) -> int:
    from .experiment import generate, load_config, run_experiment, write_report

    overrides = {}
    if args.action == "run":
        overrides = {"join": args.join, "seeds": args.seeds, "partitions": args.partitions, "workers": args.workers}
    config = load_config(args.config, **overrides)
    if args.action == "gen":
        files = generate(config.generator, args.out)
        for p in (files.marks, files.feedback, files.truth):
            print(p)
        return 0
    models = tuple(int(m) for m in args.models.split(","))
    result = run_experiment(config, models)
    for p in write_report(result, args.out):
        print(p)
    if result.comparison is not None:
        print(result.comparison.render())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="learnlab", description=__doc__)
    groups = parser.add_subparsers(dest="group", required=True)

    p = groups.add_parser("ingest", help="import snapshots into the raw store")
    p.add_argument("kind", choices=["table", "events", "feedback", "schedule"])
    p.add_argument("--path")
    p.add_argument("--snapshot", type=int)
    p.add_argument("--store", required=True, help="raw store directory")
    p.add_argument("--table", help="target table for table imports")
    p.add_argument("--strictness", choices=[s.value for s in Strictness], default="strict")
    p.add_argument("--config", help="schedule file (schedule only)")
    p.add_argument("--ticks", default="0", help="comma-separated virtual clock readings in seconds")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_ingest)

    p = groups.add_parser("store", help="inspect stored data")
    actions = p.add_subparsers(dest="action", required=True)
    a = actions.add_parser("inspect", help="print a frame file's footer")
    a.add_argument("file")
    a = actions.add_parser("scan", help="dump a raw-store table as tab-separated cells")
    a.add_argument("--store", required=True)
    a.add_argument("--table", required=True)
    a.add_argument("--start")
    a.add_argument("--end")
    a = actions.add_parser("size", help="storage estimate for a cohort")
    a.add_argument("--students", type=int, required=True)
    a.add_argument("--bytes-per-student", type=int, required=True)
    a.add_argument("--replication", type=int, default=1)
    p.set_defaults(func=cmd_store)

    p = groups.add_parser("sentiment", help="score feedback forms")
    actions = p.add_subparsers(dest="action", required=True)
    a = actions.add_parser("score")
    a.add_argument("--feedback", required=True, help="CSV with student_id,q1,q2,q3")
    a.add_argument("--lexicon", help="lexicon file (default: bundled)")
    a.add_argument("--out", help="frame file to write")
    a.add_argument("--csv", help="delimited output (default: stdout)")
    a.add_argument("--partitions", type=int, default=1)
    a.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_sentiment)

    p = groups.add_parser("evaluate", help="score predictions against truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--pred-column")
    p.add_argument("--truth-column")
    p.add_argument("--task", choices=["regression", "classification"], default="regression")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_evaluate)

    p = groups.add_parser("lab", help="synthetic cohort experiment")
    actions = p.add_subparsers(dest="action", required=True)
    a = actions.add_parser("gen", help="write a synthetic cohort")
    a.add_argument("--config", help="key = value config (default: bundled)")
    a.add_argument("--out", required=True)
    a = actions.add_parser("run", help="run models and write the report")
    a.add_argument("--config", help="key = value config (default: bundled)")
    a.add_argument("--models", default="1,2,3")
    a.add_argument("--join", choices=["respondents_only", "impute_neutral"])
    a.add_argument("--seeds", type=int)
    a.add_argument("--out", required=True)
    a.add_argument("--partitions", type=int)
    a.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_lab)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, LookupError, OSError, ingest.IngestError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
