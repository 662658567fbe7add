"""Deterministic lexicon sentiment scoring on the 0-4 scale."""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass
from importlib import resources
from typing import Mapping

from .catalog import DATA_PACKAGE, FeedbackDocument

NEUTRAL_SCORE = 2.0
MAX_SCORE = 4.0
NEGATION_WINDOW = 3

_SENTENCE_BREAK = re.compile(r"[.!?\n]+")
_TOKEN = re.compile(r"[^\W_]+")


class Band(str, enum.Enum):
    NEGATIVE = "Negative"
    NEUTRAL = "Neutral"
    POSITIVE = "Positive"


class LexiconError(ValueError):
    pass


@dataclass(frozen=True)
class Lexicon:
    entries: Mapping[str, float]
    negators: frozenset[str]
    intensifiers: Mapping[str, float]

    def __post_init__(self):
        for token, score in self.entries.items():
            if not 0.0 <= score <= MAX_SCORE:
                raise LexiconError(f"score for {token!r} outside [0, 4]: {score}")
        for token, delta in self.intensifiers.items():
            if not delta > 0:
                raise LexiconError(f"intensifier {token!r} needs a positive delta")
        e, n, i = set(self.entries), set(self.negators), set(self.intensifiers)
        clash = (e & n) | (e & i) | (n & i)
        if clash:
            raise LexiconError(f"tokens in more than one lexicon role: {sorted(clash)}")

    @classmethod
    def parse(cls, text: str) -> "Lexicon":
        entries: dict[str, float] = {}
        negators: set[str] = set()
        intensifiers: dict[str, float] = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#negator"):
                parts = line.split()
                if len(parts) != 2:
                    raise LexiconError(f"line {lineno}: expected '#negator token'")
                negators.add(parts[1].lower())
            elif line.startswith("#intensifier"):
                parts = line.split()
                if len(parts) != 3:
                    raise LexiconError(f"line {lineno}: expected '#intensifier token delta'")
                intensifiers[parts[1].lower()] = float(parts[2])
            elif line.startswith("#"):
                continue
            else:
                parts = raw.rstrip("\r\n").split("\t")
                if len(parts) != 2:
                    raise LexiconError(f"line {lineno}: expected 'token<TAB>score'")
                entries[parts[0].strip().lower()] = float(parts[1])
        return cls(entries, frozenset(negators), intensifiers)

    @classmethod
    def load(cls, path=None) -> "Lexicon":
        """Load a lexicon file; with no path, the bundled education-domain lexicon."""
        if path is None:
            return cls.parse(resources.files(DATA_PACKAGE).joinpath("lexicon.tsv").read_text(encoding="utf-8"))
        with open(path, encoding="utf-8") as fh:
            return cls.parse(fh.read())


@dataclass(frozen=True)
class SentimentResult:
    student_id: str
    sentences: tuple[tuple[str, float], ...]
    average: float
    category: Band


def split_sentences(text: str) -> list[str]:
    return [s.strip() for s in _SENTENCE_BREAK.split(text) if s.strip()]


def tokenize(text: str) -> list[str]:
    return _TOKEN.findall(text.lower())


def score_sentence(sentence: str, lexicon: Lexicon) -> float:
    """Mean adjusted score of the sentence's lexicon tokens, 2.0 if it has none.

    A negator reflects the next lexicon token's score about the midpoint
    (``4 - s``) when that token comes within three positions; each negator in
    range flips once, so two cancel. Intensifiers in the same window push the
    score further from 2 by their delta, clamped to [0, 4].
    """
    negations: list[int] = []
    boosts: list[tuple[int, float]] = []
    scores = []
    for i, token in enumerate(tokenize(sentence)):
        if token in lexicon.negators:
            negations.append(i)
        elif token in lexicon.intensifiers:
            boosts.append((i, lexicon.intensifiers[token]))
        elif token in lexicon.entries:
            score = lexicon.entries[token]
            if sum(1 for p in negations if i - p <= NEGATION_WINDOW) % 2:
                score = MAX_SCORE - score
            boost = sum(d for p, d in boosts if i - p <= NEGATION_WINDOW)
            if boost and score != NEUTRAL_SCORE:
                score = score + boost if score > NEUTRAL_SCORE else score - boost
                score = min(MAX_SCORE, max(0.0, score))
            scores.append(score)
            negations.clear()
            boosts.clear()
    if not scores:
        return NEUTRAL_SCORE
    return math.fsum(scores) / len(scores)


def band(score: float) -> Band:
    """[0, 2) Negative, [2, 3) Neutral, [3, 4] Positive."""
    if not 0.0 <= score <= MAX_SCORE:
        raise ValueError(f"sentiment score {score} outside [0, 4]")
    if score < 2.0:
        return Band.NEGATIVE
    if score < 3.0:
        return Band.NEUTRAL
    return Band.POSITIVE


def average_score(scores) -> float:
    scores = list(scores)
    return math.fsum(scores) / len(scores) if scores else NEUTRAL_SCORE


def score_document(doc: FeedbackDocument, lexicon: Lexicon) -> SentimentResult:
    sentences = tuple((s, score_sentence(s, lexicon)) for s in split_sentences(doc.text))
    avg = average_score(score for _, score in sentences)
    return SentimentResult(doc.student_id, sentences, avg, band(avg))
