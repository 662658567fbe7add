"""Experiment report files: text, JSON, delimited tables and figures."""

from __future__ import annotations

import csv
import json
from collections import Counter
from pathlib import Path

from .. import plotting
from .pipeline import REFERENCE_R2, ExperimentResult


def render_text(result: ExperimentResult) -> str:
    cfg = result.config
    lines = []
    if result.comparison is not None:
        lines += ["Holdout accuracy, Model 1 vs Model 3", "", result.comparison.render(), ""]
        first = result.runs[0].integrated
        if cfg.join == "respondents_only":
            lines.append(
                f"Both models are trained and tested on the {first.n_rows} students who answered the "
                "feedback form (inner join); the reference run did not state its join."
            )
        else:
            lines.append(
                f"All {first.n_rows} students are used; {first.n_imputed} non-respondents get the "
                "neutral sentiment score 2.0."
            )
        lines.append("The reference row is printed for orientation only; it is not reproduced here.")
        lines.append("")
    model1 = [r for r in result.runs if r.model1 is not None]
    if model1:
        lines.append("Model 1 on the full cohort")
        lines.append(f"{'seed':>6}{'R2':>10}{'RMSE':>10}{'MAE':>10}{'n_test':>8}")
        for r in model1:
            m = r.model1
            lines.append(f"{r.seed:>6d}{m.r_squared:>10.4f}{m.rmse:>10.4f}{m.mae:>10.4f}{m.n:>8d}")
        lines.append("")
    sent = [r for r in result.runs if r.sentiment is not None]
    if sent:
        counts = Counter(sent[0].sentiment.column("sentiment"))
        lines.append(f"Sentiment bands, seed {sent[0].seed} ({sent[0].sentiment.n_rows} respondents)")
        for name in ("Negative", "Neutral", "Positive"):
            lines.append(f"  {name:<10}{counts.get(name, 0):>6d}")
        lines.append("")
    lines.append("Configuration")
    lines += [f"  {k} = {v}" for k, v in cfg.to_dict().items()]
    return "\n".join(lines) + "\n"


def write_report(result: ExperimentResult, out_dir) -> list[Path]:
    """Write the report set into ``out_dir``; returns the written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    path = out / "report.txt"
    path.write_text(render_text(result), encoding="utf-8")
    written.append(path)

    payload = {"config": result.config.to_dict()}
    if result.comparison is not None:
        payload["comparison"] = result.comparison.to_dict()
    payload["model1_full_cohort"] = {
        str(r.seed): r.model1.to_dict() for r in result.runs if r.model1 is not None
    }
    path = out / "report.json"
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    written.append(path)

    if result.comparison is not None:
        path = out / "per_seed.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["seed", "r2_model1", "r2_model3", "improvement", "n_test"])
            for s in result.comparison.per_seed:
                w.writerow([s.seed, repr(s.r2_model1), repr(s.r2_model3), repr(s.improvement), s.n_test])
        written.append(path)
        path = out / "r2_by_seed.png"
        per = result.comparison.per_seed
        plotting.plot_r2_by_seed(
            [s.seed for s in per], [s.r2_model1 for s in per], [s.r2_model3 for s in per], path, REFERENCE_R2
        )
        written.append(path)

    sent = [r for r in result.runs if r.sentiment is not None]
    if sent:
        frame = sent[0].sentiment
        path = out / "sentiment_scores.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(frame.names)
            w.writerows(frame.rows())
        written.append(path)
        path = out / "sentiment_scores.png"
        plotting.plot_sentiment_scores(frame.column("sentiment_score"), path)
        written.append(path)
    return written
