import csv
from dataclasses import replace

import pytest

from learnlab.catalog import RECORD_FIELDS, StudentRecord


def make_record(student_id="s001", **overrides) -> StudentRecord:
    base = StudentRecord(
        student_id=student_id,
        gpa=3.5,
        major="CS",
        passed_hours=30,
        absence_rate=0.1,
        quiz_5=4.0,
        mid1_15=12.0,
        mid2_20=15.0,
        tutorial_2=2.0,
        homework_3=2.5,
        lecture_total_45=35.5,
        lab_total_10=8.0,
        final_lab_5=4.0,
        final_exam=30.0,
        total_100=77.5,
        grade="C+",
        status=0,
        semester="S1",
    )
    return replace(base, **overrides)


def write_marks(path, records):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(RECORD_FIELDS)
        for r in records:
            m = r.to_mapping()
            w.writerow([m[f] for f in RECORD_FIELDS])
    return path


@pytest.fixture
def record():
    return make_record()
