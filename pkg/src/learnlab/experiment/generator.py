"""Synthetic course cohort with a planted attitude effect.

A latent standard-normal ability drives every component mark. A latent
attitude (negative / neutral / positive) shifts the final exam by
``-delta / 0 / +delta`` and decides which sentence pools a respondent's
feedback is drawn from. Marks are quarter-point multiples, so the lecture and
course totals equal their component sums exactly.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..catalog import FeedbackDocument, StudentRecord, RECORD_FIELDS
from ..sentiment import Band, Lexicon, band, score_sentence

ATTITUDES = ("negative", "neutral", "positive")
ATTITUDE_SIGN = {"negative": -1, "neutral": 0, "positive": 1}

POOLS: dict[str, tuple[str, ...]] = {
    "positive": (
        "The course was excellent",
        "I really enjoyed the programming labs",
        "The instructor was helpful and patient",
        "Lectures were clear and well organized",
        "I learned a lot and feel confident writing code now",
        "The assignments were interesting and rewarding",
        "Tutorials were very useful",
        "I love solving the weekly exercises",
        "The teaching assistants were friendly and supportive",
        "This is the best course in my first year",
        "The projects were fun and practical",
        "I am happy with my progress in this class",
        "The examples in class were great",
        "I would recommend this course to other students",
        "The material was engaging and inspiring",
        "Working in the lab was amazing",
        "Feedback on homework was valuable",
        "I feel proud of the programs I wrote",
        "The quizzes were helpful for understanding loops",
        "Everything about the lab sessions was good",
    ),
    "neutral": (
        "I attended every week",
        "The course covers variables, loops and functions",
        "We had two midterm exams",
        "Most lectures were in the morning",
        "I usually study in the library",
        "The lab uses Python on the university computers",
        "Homework was due every Sunday",
        "The course is required for my major",
        "I took notes during the lectures",
        "Some weeks had more homework than others",
        "The final exam was at the end of the semester",
        "I worked with a partner on the lab tasks",
        "The textbook is available online",
        "Office hours were on Tuesday",
        "We wrote small programs each week",
        "It was an okay course overall",
        "The pace was fine for me",
        "The slides were posted after each lecture",
        "The course has lectures, tutorials and labs",
        "I used the campus computer lab",
    ),
    "negative": (
        "The course was boring",
        "The labs were confusing and stressful",
        "I struggled with the homework every week",
        "The lectures were too fast and unclear",
        "I felt lost in most classes",
        "The exams were unfair",
        "Programming is frustrating for me",
        "The instructions for assignments were poorly written",
        "I was overwhelmed by the workload",
        "The tutorials were useless",
        "I hated debugging my code",
        "The course was very difficult",
        "I am disappointed with my marks",
        "The projects were a waste of time",
        "I was anxious before every quiz",
        "The lab sessions felt rushed and messy",
        "The examples were not helpful",
        "I failed the first midterm",
        "I thought about quitting the course, the workload was terrible",
        "This class was not good at all",
    ),
}
POOL_BAND = {"positive": Band.POSITIVE, "neutral": Band.NEUTRAL, "negative": Band.NEGATIVE}

# probability of drawing a sentence from each pool (negative, neutral, positive) per attitude
SENTENCE_MIX = {
    "negative": (0.75, 0.20, 0.05),
    "neutral": (0.15, 0.70, 0.15),
    "positive": (0.05, 0.20, 0.75),
}

# (max, base fraction, ability slope, noise) per component mark
COMPONENTS = {
    "quiz_5": (5, 0.72, 0.13, 0.10),
    "mid1_15": (15, 0.68, 0.15, 0.08),
    "mid2_20": (20, 0.66, 0.15, 0.08),
    "tutorial_2": (2, 0.80, 0.10, 0.12),
    "homework_3": (3, 0.78, 0.10, 0.12),
    "lab_total_10": (10, 0.75, 0.12, 0.08),
    "final_lab_5": (5, 0.70, 0.14, 0.10),
}
FINAL_EXAM_MAX = 40
FINAL_BASE, FINAL_SLOPE = 0.60, 0.15
MAJORS = ("CS", "IS", "SE", "CE")
SEMESTERS = ("S1", "S2")
GRADES = ((95, "A+"), (90, "A"), (85, "B+"), (80, "B"), (75, "C+"), (70, "C"), (65, "D+"), (60, "D"))


@dataclass(frozen=True)
class GeneratorConfig:
    n_students: int = 500
    response_rate: float = 0.252
    attitude_probs: tuple[float, float, float] = (0.3, 0.35, 0.35)
    effect_delta: float = 6.0
    noise_sigma: float = 3.0
    seed: int = 0
    min_sentences: int = 3
    max_sentences: int = 6

    def __post_init__(self):
        if self.n_students < 0:
            raise ValueError("n_students must be non-negative")
        if not 0.0 <= self.response_rate <= 1.0:
            raise ValueError("response_rate must lie in [0, 1]")
        probs = tuple(float(p) for p in self.attitude_probs)
        if len(probs) != 3 or any(p < 0 for p in probs) or not math.isclose(sum(probs), 1.0, abs_tol=1e-9):
            raise ValueError("attitude_probs must be three non-negative numbers summing to 1")
        object.__setattr__(self, "attitude_probs", probs)
        if self.effect_delta < 0:
            raise ValueError("effect_delta must be non-negative")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")
        if not 1 <= self.min_sentences <= self.max_sentences:
            raise ValueError("need 1 <= min_sentences <= max_sentences")

    @property
    def n_respondents(self) -> int:
        return math.floor(self.n_students * self.response_rate + 0.5)


@dataclass(frozen=True)
class Truth:
    student_id: str
    ability: float
    attitude: str
    responded: bool


@dataclass
class Cohort:
    records: list[StudentRecord]
    feedback: list[FeedbackDocument]
    truth: list[Truth] = field(repr=False)


def _quarter(x: np.ndarray | float):
    return np.round(np.asarray(x) * 4.0) / 4.0


def _grade(total: float) -> str:
    for cutoff, letter in GRADES:
        if total >= cutoff:
            return letter
    return "F"


def generate_cohort(config: GeneratorConfig) -> Cohort:
    rng = np.random.default_rng(config.seed)
    n = config.n_students
    ids = 2170000000 + np.sort(rng.choice(10_000_000, size=n, replace=False)) if n else np.array([], int)
    ability = rng.standard_normal(n)
    attitude_idx = rng.choice(3, size=n, p=config.attitude_probs)
    attitude_sign = attitude_idx - 1

    marks = {}
    for name, (top, base, slope, noise) in COMPONENTS.items():
        frac = np.clip(base + slope * ability + noise * rng.standard_normal(n), 0.0, 1.0)
        marks[name] = _quarter(frac * top)
    exam = FINAL_EXAM_MAX * (FINAL_BASE + FINAL_SLOPE * ability)
    exam = exam + config.effect_delta * attitude_sign + config.noise_sigma * rng.standard_normal(n)
    marks["final_exam"] = _quarter(np.clip(exam, 0.0, FINAL_EXAM_MAX))
    gpa = np.round(np.clip(3.4 + 0.7 * ability + 0.3 * rng.standard_normal(n), 0.0, 5.0), 2)
    passed = np.clip(np.round(30 + 8 * ability + 6 * rng.standard_normal(n)), 0, 140).astype(int)
    absence = np.round(np.clip(0.10 - 0.04 * ability + 0.03 * rng.standard_normal(n), 0.0, 1.0), 3)
    majors = rng.choice(len(MAJORS), size=n)
    semesters = rng.choice(len(SEMESTERS), size=n)
    dropout_draw = rng.random(n)

    records = []
    for i in range(n):
        lecture = sum(float(marks[c][i]) for c in ("quiz_5", "mid1_15", "mid2_20", "tutorial_2", "homework_3"))
        total = lecture + float(marks["lab_total_10"][i]) + float(marks["final_lab_5"][i]) + float(marks["final_exam"][i])
        status = int(dropout_draw[i] < (0.7 if total < 60 else 0.03))
        records.append(
            StudentRecord(
                student_id=str(int(ids[i])),
                gpa=float(gpa[i]),
                major=MAJORS[majors[i]],
                passed_hours=int(passed[i]),
                absence_rate=float(absence[i]),
                quiz_5=float(marks["quiz_5"][i]),
                mid1_15=float(marks["mid1_15"][i]),
                mid2_20=float(marks["mid2_20"][i]),
                tutorial_2=float(marks["tutorial_2"][i]),
                homework_3=float(marks["homework_3"][i]),
                lecture_total_45=lecture,
                lab_total_10=float(marks["lab_total_10"][i]),
                final_lab_5=float(marks["final_lab_5"][i]),
                final_exam=float(marks["final_exam"][i]),
                total_100=total,
                grade=_grade(total),
                status=status,
                semester=SEMESTERS[semesters[i]],
            )
        )

    respondents = set(rng.choice(n, size=config.n_respondents, replace=False).tolist()) if n else set()
    feedback = []
    truth = []
    pool_names = ("negative", "neutral", "positive")
    for i in range(n):
        att = ATTITUDES[attitude_idx[i]]
        truth.append(Truth(records[i].student_id, float(ability[i]), att, i in respondents))
        if i not in respondents:
            continue
        m = int(rng.integers(config.min_sentences, config.max_sentences + 1))
        sentences = []
        for _ in range(m):
            pool = POOLS[pool_names[rng.choice(3, p=SENTENCE_MIX[att])]]
            sentences.append(pool[int(rng.integers(len(pool)))] + ".")
        cuts = np.sort(rng.integers(0, m + 1, size=2))
        answers = (
            " ".join(sentences[: cuts[0]]),
            " ".join(sentences[cuts[0]: cuts[1]]),
            " ".join(sentences[cuts[1]:]),
        )
        feedback.append(FeedbackDocument(records[i].student_id, answers, "2017-05-01T00:00:00+00:00"))
    return Cohort(records, feedback, truth)


def pool_agreement(lexicon: Lexicon | None = None) -> dict[str, float]:
    """Fraction of each pool's sentences whose score lands in the pool's band."""
    lexicon = lexicon or Lexicon.load()
    return {
        name: sum(band(score_sentence(s, lexicon)) is POOL_BAND[name] for s in pool) / len(pool)
        for name, pool in POOLS.items()
    }


@dataclass(frozen=True)
class GeneratedFiles:
    marks: Path
    feedback: Path
    truth: Path


def write_cohort(cohort: Cohort, out_dir) -> GeneratedFiles:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = GeneratedFiles(out / "marks.csv", out / "feedback.csv", out / "truth.csv")
    with open(files.marks, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(RECORD_FIELDS)
        for r in cohort.records:
            cells = r.to_mapping()
            w.writerow([cells[f] for f in RECORD_FIELDS])
    with open(files.feedback, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["student_id", "q1", "q2", "q3", "collected_at"])
        for d in cohort.feedback:
            w.writerow([d.student_id, *d.answers, d.collected_at])
    with open(files.truth, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["student_id", "ability", "attitude", "responded"])
        for t in cohort.truth:
            w.writerow([t.student_id, repr(t.ability), t.attitude, int(t.responded)])
    return files


def generate(config: GeneratorConfig, out_dir: str | os.PathLike) -> GeneratedFiles:
    """Write marks, feedback and hidden ground-truth files for one synthetic cohort."""
    return write_cohort(generate_cohort(config), out_dir)
