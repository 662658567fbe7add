"""Domain schemas: data-point taxonomy, the course-mark record and feature encodings."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, fields, replace
from importlib import resources
from typing import Iterable, Mapping, Sequence

DATA_PACKAGE = "learnlab.data"
SENTIMENT_FEATURE = "sentiment_score"
VALUE_KINDS = ("numeric", "text", "boolean", "categorical", "timestamp")

MODEL1_FEATURES = (
    "absence_rate",
    "quiz_5",
    "mid1_15",
    "mid2_20",
    "tutorial_2",
    "homework_3",
    "lecture_total_45",
    "lab_total_10",
    "final_lab_5",
    "semester",
)
CATEGORICAL_FIELDS = ("major", "grade", "semester")
LECTURE_PARTS = ("quiz_5", "mid1_15", "mid2_20", "tutorial_2", "homework_3")
TOTAL_PARTS = ("lecture_total_45", "lab_total_10", "final_lab_5", "final_exam")
SUM_TOLERANCE = 1e-9


class FactorCategory(str, enum.Enum):
    ACADEMIC_INTEGRATION = "AcademicIntegration"
    SOCIAL_INTEGRATION = "SocialIntegration"
    INSTITUTIONAL_COMMITMENT = "InstitutionalCommitment"
    OUT_OF_INSTITUTION = "OutOfInstitution"


class Strictness(str, enum.Enum):
    STRICT = "strict"
    LENIENT = "lenient"


class CatalogError(ValueError):
    pass


@dataclass(frozen=True)
class DataPointCategory:
    code: str
    name: str
    variables: tuple[tuple[str, str], ...]

    def __post_init__(self):
        names = [v for v, _ in self.variables]
        if len(names) != len(set(names)):
            raise CatalogError(f"duplicate variable in category {self.code}")
        for var, kind in self.variables:
            if kind not in VALUE_KINDS:
                raise CatalogError(f"{var}: unknown value kind {kind!r}")

    @property
    def variable_names(self) -> tuple[str, ...]:
        return tuple(v for v, _ in self.variables)


def _data_text(name: str) -> str:
    return resources.files(DATA_PACKAGE).joinpath(name).read_text(encoding="utf-8")


def _load_taxonomy() -> tuple[dict[str, DataPointCategory], dict[str, FactorCategory]]:
    rows: dict[str, tuple[str, list[tuple[str, str]]]] = {}
    factors: dict[str, FactorCategory] = {}
    for line in _data_text("taxonomy.tsv").splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        code, cat_name, var, kind, factor = line.split("\t")
        rows.setdefault(code, (cat_name, []))[1].append((var, kind))
        factors[var] = FactorCategory(factor)
    categories = {
        code: DataPointCategory(code, name, tuple(vs)) for code, (name, vs) in sorted(rows.items())
    }
    return categories, factors


CATEGORIES, _FACTORS = _load_taxonomy()


def categorize_factor(variable_name: str) -> FactorCategory:
    try:
        return _FACTORS[variable_name]
    except KeyError:
        raise CatalogError(f"variable {variable_name!r} is not registered in any data-point category") from None


# --------------------------------------------------------------------------- record schema


@dataclass(frozen=True)
class FieldSpec:
    name: str
    kind: str
    min: float | None = None
    max: float | None = None


@dataclass(frozen=True)
class RecordSchema:
    version: str
    fields: tuple[FieldSpec, ...]

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.fields)

    def field(self, name: str) -> FieldSpec:
        for f in self.fields:
            if f.name == name:
                return f
        raise KeyError(name)

    def with_bounds(self, **bounds: tuple[float | None, float | None]) -> "RecordSchema":
        """Copy with some ``(min, max)`` bounds replaced, e.g. ``gpa=(0, 4)``."""
        unknown = set(bounds) - set(self.names)
        if unknown:
            raise CatalogError(f"unknown fields {sorted(unknown)}")
        new = tuple(
            replace(f, min=bounds[f.name][0], max=bounds[f.name][1]) if f.name in bounds else f
            for f in self.fields
        )
        return replace(self, fields=new)


def parse_schema(text: str) -> RecordSchema:
    version = "unversioned"
    out = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            words = line[1:].split()
            if len(words) >= 3 and words[0] == "schema":
                version = f"{words[1]} {words[2]}"
            continue
        parts = line.split(":")
        if len(parts) != 4:
            raise CatalogError(f"bad schema line {raw!r}; expected name:kind:min:max")
        name, kind, lo, hi = parts
        out.append(FieldSpec(name, kind, float(lo) if lo else None, float(hi) if hi else None))
    return RecordSchema(version, tuple(out))


def load_schema(path=None) -> RecordSchema:
    if path is None:
        return parse_schema(_data_text("student_record.schema"))
    with open(path, encoding="utf-8") as fh:
        return parse_schema(fh.read())


DEFAULT_SCHEMA = load_schema()


# --------------------------------------------------------------------------- records


@dataclass(frozen=True)
class StudentRecord:
    student_id: str
    gpa: float
    major: str
    passed_hours: int
    absence_rate: float
    quiz_5: float
    mid1_15: float
    mid2_20: float
    tutorial_2: float
    homework_3: float
    lecture_total_45: float
    lab_total_10: float
    final_lab_5: float
    final_exam: float
    total_100: float
    grade: str
    status: int
    semester: str

    @classmethod
    def from_mapping(cls, row: Mapping[str, object]) -> "StudentRecord":
        """Build from string cells (CSV row or raw-store cells); raises ValueError on bad cells."""
        kwargs = {}
        for f in fields(cls):
            if f.name not in row:
                raise ValueError(f"missing field {f.name}")
            value = row[f.name]
            if isinstance(value, bytes):
                value = value.decode("utf-8")
            if f.type == "str":
                kwargs[f.name] = str(value)
            elif f.type == "int":
                try:
                    number = float(value)
                except (TypeError, ValueError):
                    raise ValueError(f"{f.name}: not a number: {value!r}") from None
                if not number.is_integer():
                    raise ValueError(f"{f.name}: not an integer: {value!r}")
                kwargs[f.name] = int(number)
            else:
                try:
                    kwargs[f.name] = float(value)
                except (TypeError, ValueError):
                    raise ValueError(f"{f.name}: not a number: {value!r}") from None
        return cls(**kwargs)

    def to_mapping(self) -> dict[str, str]:
        return {f.name: _format_cell(getattr(self, f.name)) for f in fields(self)}


def _format_cell(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


RECORD_FIELDS = tuple(f.name for f in fields(StudentRecord))


@dataclass(frozen=True)
class FeedbackDocument:
    student_id: str
    answers: tuple[str, str, str]
    collected_at: str = ""

    def __post_init__(self):
        if len(self.answers) != 3:
            raise CatalogError(f"feedback for {self.student_id} must have exactly 3 answers")

    @property
    def text(self) -> str:
        return "\n".join(self.answers)

    @property
    def is_empty(self) -> bool:
        return not any(a.strip() for a in self.answers)


def validate_record(
    record: StudentRecord,
    strictness: Strictness | str = Strictness.STRICT,
    schema: RecordSchema = DEFAULT_SCHEMA,
) -> list[str]:
    """Return the list of violations; empty means the record is valid."""
    strictness = Strictness(strictness)
    violations = []
    if not record.student_id:
        violations.append("student_id is empty")
    for spec in schema.fields:
        if spec.kind not in ("numeric", "integer", "binary"):
            continue
        value = getattr(record, spec.name)
        if not math.isfinite(value):
            violations.append(f"{spec.name} is not finite")
            continue
        if spec.kind == "binary" and value not in (0, 1):
            violations.append(f"{spec.name} must be 0 or 1")
            continue
        if spec.min is not None and value < spec.min:
            violations.append(f"{spec.name} below {spec.min:g}")
        if spec.max is not None and value > spec.max:
            violations.append(f"{spec.name} exceeds {spec.max:g}")
    if strictness is Strictness.STRICT:
        for total, parts in (("lecture_total_45", LECTURE_PARTS), ("total_100", TOTAL_PARTS)):
            expected = math.fsum(getattr(record, p) for p in parts)
            actual = getattr(record, total)
            if abs(expected - actual) > SUM_TOLERANCE:
                violations.append(f"{total} is {actual:g} but its components sum to {expected:g}")
    return violations


# --------------------------------------------------------------------------- features


@dataclass(frozen=True)
class LabeledRow:
    key: str
    features: tuple[float, ...]
    target: float


@dataclass(frozen=True)
class FeatureSpec:
    """Ordered feature list plus frozen categorical dictionaries.

    ``features`` holds ``(name, kind)`` pairs with kind ``continuous`` or
    ``categorical``; ``dictionaries`` maps every categorical feature to its
    ordered levels, a level's code being its position.
    """

    features: tuple[tuple[str, str], ...]
    target_name: str
    dictionaries: tuple[tuple[str, tuple[str, ...]], ...] = field(default=())

    def __post_init__(self):
        names = self.feature_names
        if len(set(names)) != len(names):
            raise CatalogError("duplicate feature names")
        dict_names = {n for n, _ in self.dictionaries}
        for name, kind in self.features:
            if kind not in ("continuous", "categorical"):
                raise CatalogError(f"{name}: unknown feature kind {kind!r}")
            if kind == "categorical" and name not in dict_names:
                raise CatalogError(f"categorical feature {name} has no dictionary")

    @classmethod
    def fit(
        cls,
        records: Iterable[StudentRecord],
        feature_names: Sequence[str] = MODEL1_FEATURES,
        target: str = "total_100",
        categorical: Sequence[str] = CATEGORICAL_FIELDS,
    ) -> "FeatureSpec":
        """Freeze categorical dictionaries from training records (levels sorted)."""
        records = list(records)
        feats = tuple((n, "categorical" if n in categorical else "continuous") for n in feature_names)
        dicts = tuple(
            (n, tuple(sorted({str(getattr(r, n)) for r in records})))
            for n, kind in feats
            if kind == "categorical"
        )
        return cls(feats, target, dicts)

    @property
    def feature_names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.features)

    @property
    def n_features(self) -> int:
        return len(self.features)

    def levels(self, name: str) -> tuple[str, ...]:
        return dict(self.dictionaries)[name]

    @property
    def categorical_features_info(self) -> dict[int, int]:
        d = dict(self.dictionaries)
        return {i: len(d[n]) for i, (n, kind) in enumerate(self.features) if kind == "categorical"}

    def with_sentiment(self) -> "FeatureSpec":
        return replace(self, features=self.features + ((SENTIMENT_FEATURE, "continuous"),))

    def decode(self, name: str, code: float) -> str:
        return self.levels(name)[int(code)]

    def to_dict(self) -> dict:
        return {
            "features": [[n, k] for n, k in self.features],
            "target": self.target_name,
            "dictionaries": {n: list(levels) for n, levels in self.dictionaries},
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "FeatureSpec":
        return cls(
            tuple((n, k) for n, k in d["features"]),
            d["target"],
            tuple((n, tuple(levels)) for n, levels in sorted(d["dictionaries"].items())),
        )


def encode_features(record: StudentRecord, sentiment: float | None, spec: FeatureSpec) -> LabeledRow:
    """Vector in spec order, categorical levels as dense codes, sentiment appended last if given."""
    dictionaries = dict(spec.dictionaries)
    vector = []
    for name, kind in spec.features:
        if name == SENTIMENT_FEATURE:
            continue
        if not hasattr(record, name):
            raise CatalogError(f"record has no field {name!r}")
        value = getattr(record, name)
        if kind == "categorical":
            levels = dictionaries[name]
            level = str(value)
            if level not in levels:
                raise CatalogError(f"unknown level {level!r} for categorical feature {name!r}")
            vector.append(float(levels.index(level)))
        else:
            vector.append(float(value))
    if sentiment is not None:
        vector.append(float(sentiment))
    elif SENTIMENT_FEATURE in spec.feature_names:
        raise CatalogError(f"spec includes {SENTIMENT_FEATURE} but no sentiment was given for {record.student_id}")
    target = getattr(record, spec.target_name, None)
    if target is None:
        raise CatalogError(f"record {record.student_id} has no target {spec.target_name!r}")
    return LabeledRow(record.student_id, tuple(vector), float(target))
