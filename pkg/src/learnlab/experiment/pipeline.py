"""Model 1 / Model 2 / Model 3 pipeline over the raw store, dataflow and forest."""

from __future__ import annotations

import math
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .. import evalx, ingest
from ..catalog import (
    FeatureSpec,
    FeedbackDocument,
    LabeledRow,
    StudentRecord,
    encode_features,
)
from ..dataflow import Context
from ..evalx import RegressionReport
from ..forest import ForestConfig, train
from ..sentiment import NEUTRAL_SCORE, Lexicon, average_score, band, score_sentence, split_sentences
from ..storage import Frame, RawStore, write_frame
from .generator import Cohort, GeneratorConfig, generate_cohort, write_cohort

JOIN_POLICIES = ("respondents_only", "impute_neutral")
SENTIMENT_TABLE = "sentiment"
SENTIMENT_COLUMNS = ("student_id", "sentiment_score", "sentiment")
REFERENCE_R2 = (0.79, 0.89)
FIXED_CLOCK = "2017-05-01T00:00:00.000000Z"


class ExperimentError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    forest: ForestConfig = field(default_factory=ForestConfig)
    train_fraction: float = 0.7
    join: str = "respondents_only"
    seeds: int = 5
    partitions: int = 1
    workers: int = 1

    def __post_init__(self):
        if self.join not in JOIN_POLICIES:
            raise ExperimentError(f"join must be one of {JOIN_POLICIES}")
        if self.seeds < 1:
            raise ExperimentError("seeds must be >= 1")
        if not 0 < self.train_fraction < 1:
            raise ExperimentError("train_fraction must lie strictly between 0 and 1")

    @property
    def context(self) -> Context:
        return Context(self.partitions, self.workers)

    def to_dict(self) -> dict:
        g = self.generator
        return {
            "n_students": g.n_students,
            "response_rate": g.response_rate,
            "attitude_probs": list(g.attitude_probs),
            "effect_delta": g.effect_delta,
            "noise_sigma": g.noise_sigma,
            "seed": g.seed,
            "num_trees": self.forest.num_trees,
            "max_depth": self.forest.max_depth,
            "max_bins": self.forest.max_bins,
            "feature_subset_strategy": self.forest.feature_subset_strategy,
            "forest_seed": self.forest.seed,
            "train_fraction": self.train_fraction,
            "join": self.join,
            "seeds": self.seeds,
            "partitions": self.partitions,
            "workers": self.workers,
        }


# --------------------------------------------------------------------------- loading


def load_records(store: RawStore, table: str = "marks", ctx: Context | None = None) -> list[StudentRecord]:
    """Student records from the raw store, ordered by student id."""
    ctx = ctx or Context()
    ds = ctx.from_store(store, table).map_values(lambda row: StudentRecord.from_mapping(row.family("d")))
    return [rec for _, rec in ds.collect()]


def load_feedback(
    store: RawStore, table: str = ingest.FEEDBACK_TABLE, ctx: Context | None = None
) -> list[FeedbackDocument]:
    """Non-empty feedback forms from the raw store, ordered by student id."""
    ctx = ctx or Context()
    ds = ctx.from_store(store, table).filter(lambda r: r[1].text("f:zero_length") != "1")
    docs = ds.map_values(
        lambda row: FeedbackDocument(
            row.row_key,
            (row.text("f:q1"), row.text("f:q2"), row.text("f:q3")),
            row.text("f:collected_at"),
        )
    )
    return [doc for _, doc in docs.collect()]


# --------------------------------------------------------------------------- models


def _forest_for(spec: FeatureSpec, forest: ForestConfig) -> ForestConfig:
    return replace(forest, categorical_features_info=spec.categorical_features_info)


def _fit_predict(train_rows: Sequence[LabeledRow], test_rows: Sequence[LabeledRow], forest: ForestConfig, workers: int):
    model = train(list(train_rows), forest, workers=workers)
    return model.predict_many(np.array([r.features for r in test_rows], dtype=float))


def run_model1(
    records: Sequence[StudentRecord],
    split_seed: int = 0,
    forest: ForestConfig | None = None,
    train_fraction: float = 0.7,
    workers: int = 1,
) -> RegressionReport:
    """Structured-features-only regressor on ``total_100``, scored on a seeded holdout."""
    forest = forest or ForestConfig()
    records = sorted(records, key=lambda r: r.student_id)
    train_recs, test_recs = evalx.split(records, train_fraction, split_seed)
    spec = FeatureSpec.fit(records)
    cfg = _forest_for(spec, forest)
    pred = _fit_predict(
        [encode_features(r, None, spec) for r in train_recs],
        [encode_features(r, None, spec) for r in test_recs],
        cfg,
        workers,
    )
    return evalx.regression_metrics([r.total_100 for r in test_recs], pred)


def run_model2(
    feedback: Sequence[FeedbackDocument],
    lexicon: Lexicon | None = None,
    ctx: Context | None = None,
    frame_path=None,
    store: RawStore | None = None,
) -> Frame:
    """Per-respondent sentiment: ``(student_id, sentiment_score, sentiment)`` rows by student id.

    Sentences are scored in parallel and averaged per student. When given, the
    frame is written to ``frame_path`` and the rows are saved to the store's
    sentiment table.
    """
    ctx = ctx or Context()
    lexicon = lexicon or Lexicon.load()
    docs = ctx.parallelize((d.student_id, d) for d in feedback)
    scored = docs.flat_map(
        lambda kv: [(kv[0], score_sentence(s, lexicon)) for s in split_sentences(kv[1].text)] or [(kv[0], None)]
    )
    per_student = scored.aggregate_by_key(
        (), lambda acc, v: acc if v is None else acc + (v,), lambda a, b: a + b
    )
    ids, scores, bands = [], [], []
    for sid, values in per_student.items():
        avg = average_score(values)
        ids.append(sid)
        scores.append(avg)
        bands.append(band(avg).value)
    frame = Frame(list(SENTIMENT_COLUMNS), ["str", "f64", "str"], [ids, scores, bands])
    if frame_path is not None:
        write_frame(frame, frame_path)
    if store is not None:
        store.create_table(SENTIMENT_TABLE)
        store.put_batch(
            SENTIMENT_TABLE,
            [(sid, {"s:sentiment_score": repr(sc), "s:sentiment": b}) for sid, sc, b in zip(ids, scores, bands)],
        )
    return frame


@dataclass(frozen=True)
class IntegratedRun:
    """Model 1 and Model 3 scored on one shared train/test split."""

    model1: RegressionReport
    model3: RegressionReport
    join: str
    n_rows: int
    n_imputed: int
    train_keys: tuple[str, ...]
    test_keys: tuple[str, ...]
    predictions: tuple[tuple[str, float, float, float], ...] = field(repr=False)

    @property
    def improvement(self) -> float:
        return self.model3.r_squared - self.model1.r_squared


def _sentiment_map(sentiment) -> dict[str, float]:
    if isinstance(sentiment, Frame):
        return dict(zip(sentiment.column("student_id"), sentiment.column("sentiment_score")))
    return dict(sentiment)


def run_model3(
    records: Sequence[StudentRecord],
    sentiment: Frame | Mapping[str, float],
    join: str = "respondents_only",
    split_seed: int = 0,
    forest: ForestConfig | None = None,
    train_fraction: float = 0.7,
    ctx: Context | None = None,
) -> IntegratedRun:
    """Structured features plus sentiment, compared with Model 1 on the same rows and split.

    ``respondents_only`` inner-joins marks with sentiment; ``impute_neutral``
    keeps every student and gives non-respondents the neutral score 2.0.
    """
    if join not in JOIN_POLICIES:
        raise ExperimentError(f"join must be one of {JOIN_POLICIES}")
    ctx = ctx or Context()
    forest = forest or ForestConfig()
    marks = ctx.parallelize((r.student_id, r) for r in records)
    scores = ctx.parallelize(sorted(_sentiment_map(sentiment).items()))
    joined = marks.join_by_key(scores, "inner" if join == "respondents_only" else "left").collect()
    if not joined:
        raise ExperimentError("the join of marks and sentiment is empty")
    if len(joined) < 2:
        raise ExperimentError("the joined table has fewer than 2 rows")
    n_imputed = sum(1 for _, (_, s) in joined if s is None)

    train_part, test_part = evalx.split(joined, train_fraction, split_seed)
    spec = FeatureSpec.fit(rec for _, (rec, _) in joined)
    spec3 = spec.with_sentiment()

    def encode(ds_rows):
        ds = ctx.parallelize(ds_rows).map_values(
            lambda v: (
                encode_features(v[0], None, spec),
                encode_features(v[0], NEUTRAL_SCORE if v[1] is None else v[1], spec3),
            )
        )
        pairs = [v for _, v in ds.collect()]
        return [a for a, _ in pairs], [b for _, b in pairs]

    train1, train3 = encode(train_part)
    test1, test3 = encode(test_part)
    cfg1 = _forest_for(spec, forest)
    cfg3 = _forest_for(spec3, forest)
    p1 = _fit_predict(train1, test1, cfg1, ctx.workers)
    p3 = _fit_predict(train3, test3, cfg3, ctx.workers)
    y = [r.target for r in test1]
    return IntegratedRun(
        model1=evalx.regression_metrics(y, p1),
        model3=evalx.regression_metrics(y, p3),
        join=join,
        n_rows=len(joined),
        n_imputed=n_imputed,
        train_keys=tuple(r.key for r in train1),
        test_keys=tuple(r.key for r in test1),
        predictions=tuple((r.key, r.target, float(a), float(b)) for r, a, b in zip(test1, p1, p3)),
    )


# --------------------------------------------------------------------------- comparison


@dataclass(frozen=True)
class SeedResult:
    seed: int
    r2_model1: float
    r2_model3: float
    n_test: int

    @property
    def improvement(self) -> float:
        return self.r2_model3 - self.r2_model1


@dataclass(frozen=True)
class ComparisonReport:
    r2_model1: float
    r2_model3: float
    improvement: float
    mean_paired_improvement: float
    wins: int
    sign_test_p: float
    per_seed: tuple[SeedResult, ...]
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "r2_model1": self.r2_model1,
            "r2_model3": self.r2_model3,
            "improvement": self.improvement,
            "mean_paired_improvement": self.mean_paired_improvement,
            "wins": self.wins,
            "seeds": len(self.per_seed),
            "sign_test_p": self.sign_test_p,
            "per_seed": [
                {
                    "seed": s.seed,
                    "r2_model1": s.r2_model1,
                    "r2_model3": s.r2_model3,
                    "improvement": s.improvement,
                    "n_test": s.n_test,
                }
                for s in self.per_seed
            ],
            "reference": {"r2_model1": REFERENCE_R2[0], "r2_model3": REFERENCE_R2[1]},
            "config": self.config,
        }

    def render(self) -> str:
        ref1, ref3 = REFERENCE_R2
        rows = [
            f"{'Evaluation metric':<28}{'Model 1':>10}{'Model 3':>10}{'Improvement':>20}",
            f"{'R-squared (mean)':<28}{self.r2_model1:>10.4f}{self.r2_model3:>10.4f}{_improvement(self.improvement):>20}",
            f"{'R-squared (reference run)':<28}{ref1:>10.2f}{ref3:>10.2f}{_improvement(ref3 - ref1):>20}",
            "",
            f"Model 3 beat Model 1 in {self.wins} of {len(self.per_seed)} seeds "
            f"(one-sided sign test p = {self.sign_test_p:.4f})",
            "",
            f"{'seed':>6}{'R2 Model 1':>14}{'R2 Model 3':>14}{'difference':>14}{'n_test':>8}",
        ]
        for s in self.per_seed:
            rows.append(f"{s.seed:>6d}{s.r2_model1:>14.4f}{s.r2_model3:>14.4f}{s.improvement:>+14.4f}{s.n_test:>8d}")
        if self.config.get("join"):
            rows += ["", f"join policy: {self.config['join']}"]
        return "\n".join(rows)


def _improvement(delta: float) -> str:
    return f"{delta:+.2f} ({delta * 100:+.0f}%)"


def sign_test_p(wins: int, n: int) -> float:
    """P(X >= wins) for X ~ Binomial(n, 1/2)."""
    return sum(math.comb(n, k) for k in range(wins, n + 1)) / 2**n


def compare(
    model1: Sequence[RegressionReport],
    model3: Sequence[RegressionReport],
    seeds: Sequence[int] | None = None,
    config: dict | None = None,
) -> ComparisonReport:
    """Mean R² per model, paired improvement and sign-test count over seeds."""
    model1, model3 = list(model1), list(model3)
    if len(model1) != len(model3):
        raise ExperimentError(f"unpaired inputs: {len(model1)} Model 1 reports vs {len(model3)} Model 3 reports")
    if not model1:
        raise ExperimentError("compare needs at least one pair of reports")
    for a, b in zip(model1, model3):
        if a.n != b.n:
            raise ExperimentError("paired reports must be scored on the same test rows")
        if not (a.r_squared_defined and b.r_squared_defined):
            raise ExperimentError("R-squared is undefined for a constant test target")
    seeds = list(range(len(model1))) if seeds is None else list(seeds)
    if len(seeds) != len(model1):
        raise ExperimentError("one seed label per pair is required")
    per_seed = tuple(SeedResult(s, a.r_squared, b.r_squared, a.n) for s, a, b in zip(seeds, model1, model3))
    r1 = math.fsum(a.r_squared for a in model1) / len(model1)
    r3 = math.fsum(b.r_squared for b in model3) / len(model3)
    diffs = [s.improvement for s in per_seed]
    wins = sum(1 for d in diffs if d > 0)
    return ComparisonReport(
        r2_model1=r1,
        r2_model3=r3,
        improvement=r3 - r1,
        mean_paired_improvement=math.fsum(diffs) / len(diffs),
        wins=wins,
        sign_test_p=sign_test_p(wins, len(diffs)),
        per_seed=per_seed,
        config=dict(config or {}),
    )


# --------------------------------------------------------------------------- end to end


@dataclass
class SeedRun:
    seed: int
    cohort: Cohort = field(repr=False)
    sentiment: Frame | None = field(default=None, repr=False)
    model1: RegressionReport | None = None
    integrated: IntegratedRun | None = None


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    runs: list[SeedRun]
    comparison: ComparisonReport | None


def _stage(store: RawStore, cohort: Cohort, workdir: Path) -> None:
    files = write_cohort(cohort, workdir)
    clock = lambda: FIXED_CLOCK  # noqa: E731
    ingest.import_table(store, files.marks, 1, clock=clock)
    ingest.import_feedback(store, files.feedback, 1, clock=clock)


def run_seed(
    config: ExperimentConfig,
    seed: int,
    models: Sequence[int] = (1, 2, 3),
    ctx: Context | None = None,
    workdir=None,
) -> SeedRun:
    """One cohort through ingest, sentiment scoring and the requested models.

    Generator, split and forest seeds are all offset by ``seed``.
    """
    ctx = ctx or config.context
    cohort = generate_cohort(replace(config.generator, seed=config.generator.seed + seed))
    forest = replace(config.forest, seed=config.forest.seed + seed)
    store = RawStore()
    with tempfile.TemporaryDirectory() as tmp:
        base = Path(workdir) if workdir is not None else Path(tmp)
        _stage(store, cohort, base)
        records = load_records(store, ctx=ctx)
        run = SeedRun(seed, cohort)
        if 1 in models:
            run.model1 = run_model1(records, seed, forest, config.train_fraction, ctx.workers)
        if 2 in models or 3 in models:
            feedback = load_feedback(store, ctx=ctx)
            run.sentiment = run_model2(feedback, ctx=ctx, frame_path=base / "sentiment.laf", store=store)
        if 3 in models:
            run.integrated = run_model3(
                records, run.sentiment, config.join, seed, forest, config.train_fraction, ctx
            )
    return run


def run_experiment(
    config: ExperimentConfig, models: Sequence[int] = (1, 2, 3), seeds: Sequence[int] | None = None
) -> ExperimentResult:
    """Run every seed (seeds in parallel on ``config.workers`` threads) and compare Model 1 with Model 3."""
    bad = set(models) - {1, 2, 3}
    if bad or not models:
        raise ExperimentError(f"models must be drawn from 1, 2, 3 (got {sorted(models)})")
    seeds = list(range(config.seeds)) if seeds is None else list(seeds)
    ctx = config.context
    if config.workers > 1 and len(seeds) > 1:
        with ThreadPoolExecutor(min(config.workers, len(seeds))) as pool:
            runs = list(pool.map(lambda s: run_seed(config, s, models, ctx), seeds))
    else:
        runs = [run_seed(config, s, models, ctx) for s in seeds]
    comparison = None
    if 3 in models:
        comparison = compare(
            [r.integrated.model1 for r in runs],
            [r.integrated.model3 for r in runs],
            seeds,
            config.to_dict(),
        )
    return ExperimentResult(config, runs, comparison)
