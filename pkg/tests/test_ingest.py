import json
import threading
import time

import pytest

from learnlab import ingest
from learnlab.catalog import CATEGORIES, RECORD_FIELDS, Strictness
from learnlab.experiment.generator import GeneratorConfig, generate
from learnlab.ingest import (
    EVENTS_TABLE,
    FEEDBACK_TABLE,
    QUARANTINE_TABLE,
    IngestError,
    Scheduler,
    SourceConfig,
    import_events,
    import_feedback,
    import_table,
    manifests,
    parse_schedule,
    run_schedule,
    student_events,
)
from learnlab.storage import RawStore

from conftest import make_record, write_marks

CLOCK = lambda: "2020-01-01T00:00:00Z"  # noqa: E731


def _dump(store: RawStore, tmp_path) -> dict:
    """Byte image of a persistent store's log files."""
    return {p.name: p.read_bytes() for p in sorted(tmp_path.glob("*.log"))}


@pytest.fixture
def cohort_files(tmp_path):
    return generate(GeneratorConfig(seed=3), tmp_path / "gen")


def test_marks_import_counts(cohort_files):
    store = RawStore()
    m = import_table(store, cohort_files.marks, 1, clock=CLOCK)
    assert m.row_count == 500 and m.valid_rows == 500 and m.quarantined_rows == 0
    assert store.count("marks") == 500
    row = next(store.scan_range("marks"))
    assert set(row.family("d")) == set(RECORD_FIELDS)


def test_empty_file_with_header(tmp_path):
    path = write_marks(tmp_path / "m.csv", [])
    m = import_table(RawStore(), path, 1)
    assert m.row_count == 0 and m.input_rows == 0


def test_missing_header_is_fatal(tmp_path):
    path = tmp_path / "m.csv"
    path.write_text("")
    with pytest.raises(IngestError, match="header"):
        import_table(RawStore(), path, 1)


def test_wrong_header_is_fatal(tmp_path):
    path = tmp_path / "m.csv"
    path.write_text("student_id,gpa\ns1,3\n")
    store = RawStore()
    with pytest.raises(IngestError):
        import_table(store, path, 1)
    assert store.tables() == []


def test_header_order_is_irrelevant(tmp_path):
    rec = make_record()
    cells = rec.to_mapping()
    names = list(reversed(RECORD_FIELDS))
    path = tmp_path / "m.csv"
    path.write_text(",".join(names) + "\n" + ",".join(cells[n] for n in names) + "\n")
    store = RawStore()
    assert import_table(store, path, 1).row_count == 1
    assert store.get_row("marks", "s001").text("d:gpa") == "3.5"


def test_reimport_is_byte_identical(tmp_path, cohort_files):
    store_dir = tmp_path / "store"
    store = RawStore(store_dir)
    first = import_table(store, cohort_files.marks, 1, clock=CLOCK)
    before = _dump(store, store_dir)
    again = import_table(store, cohort_files.marks, 1, clock=lambda: "later")
    assert again == first
    assert _dump(store, store_dir) == before
    # a different snapshot id with the same bytes is still a no-op
    assert import_table(store, cohort_files.marks, 2) == first
    assert _dump(store, store_dir) == before


def test_old_snapshot_id_with_new_content_rejected(tmp_path):
    store = RawStore()
    import_table(store, write_marks(tmp_path / "a.csv", [make_record("a")]), 5)
    with pytest.raises(IngestError, match="not newer"):
        import_table(store, write_marks(tmp_path / "b.csv", [make_record("b")]), 5)


def test_newer_snapshot_overwrites_by_key(tmp_path):
    store = RawStore()
    import_table(store, write_marks(tmp_path / "a.csv", [make_record("a")]), 1)
    import_table(store, write_marks(tmp_path / "b.csv", [make_record("a", gpa=4.0)]), 2)
    assert store.get_row("marks", "a").text("d:gpa") == "4.0"
    assert len(manifests(store, "table:marks")) == 2


def test_quarantine_and_conservation(tmp_path):
    good = [make_record(f"s{i:03d}") for i in range(95)]
    path = write_marks(tmp_path / "m.csv", good)
    with open(path, "a") as fh:
        fh.write("bad1,3.5,CS\n")  # too few fields
        cells = make_record("bad2").to_mapping()
        fh.write(",".join({**cells, "quiz_5": "7"}[f] for f in RECORD_FIELDS) + "\n")
        fh.write(",".join({**cells, "student_id": "bad3", "gpa": "abc"}[f] for f in RECORD_FIELDS) + "\n")
        fh.write(",".join({**cells, "student_id": ""}[f] for f in RECORD_FIELDS) + "\n")
        fh.write(",".join({**cells, "student_id": "bad5", "total_100": "99"}[f] for f in RECORD_FIELDS) + "\n")
    store = RawStore()
    m = import_table(store, path, 1)
    assert m.input_rows == 100
    assert m.valid_rows == 95 and m.quarantined_rows == 5
    assert m.valid_rows + m.quarantined_rows == m.input_rows
    reasons = [r.text("q:reason") for r in store.scan_range(QUARANTINE_TABLE)]
    assert any("quiz_5 exceeds 5" in r for r in reasons)
    assert any("total_100" in r for r in reasons)
    assert store.get_row("marks", "bad2") is None


def test_lenient_accepts_sum_mismatch(tmp_path):
    path = write_marks(tmp_path / "m.csv", [make_record(total_100=99.0)])
    assert import_table(RawStore(), path, 1, strictness=Strictness.LENIENT).row_count == 1
    assert import_table(RawStore(), path, 1).row_count == 0


def test_duplicate_student_later_row_wins(tmp_path):
    path = write_marks(tmp_path / "m.csv", [make_record("s1", gpa=1.0), make_record("s1", gpa=2.0)])
    store = RawStore()
    m = import_table(store, path, 1)
    assert m.row_count == 1 and m.valid_rows == 2
    assert m.warnings and "duplicate" in m.warnings[0]
    assert store.get_row("marks", "s1").text("d:gpa") == "2.0"


def test_import_with_taxonomy_category(tmp_path):
    cat = CATEGORIES["A"]
    path = tmp_path / "logs.csv"
    header = ["student_id", *cat.variable_names]
    values = {"age": "19", "school_graduation_marks": "91.5"}
    path.write_text(",".join(header) + "\n" + ",".join(["s1"] + [values.get(v, "x") for v in cat.variable_names]) + "\n")
    store = RawStore()
    m = import_table(store, path, 1, schema=cat, table="student_logs")
    assert m.row_count == 1
    assert store.get_row("student_logs", "s1").text("d:age") == "19"


def _events(path, lines):
    path.write_text("\n".join(json.dumps(l) if isinstance(l, dict) else l for l in lines) + "\n")
    return path


def test_events_ordered_per_student(tmp_path):
    path = _events(
        tmp_path / "e.jsonl",
        [
            {"student_id": "s1", "ts": "2020-01-01T10:00:00Z", "kind": "lms_login", "payload": {}},
            {"student_id": "s1", "ts": "2020-01-01T08:00:00+00:00", "kind": "lms_login", "payload": {}},
            {"student_id": "s1", "ts": "2020-01-01T09:00:00", "kind": "lms_login", "payload": {"device": "app"}},
        ],
    )
    store = RawStore()
    m = import_events(store, path, 1)
    assert m.row_count == 3
    evs = student_events(store, "s1")
    assert [e["ts"][:19] for e in evs] == ["2020-01-01T08:00:00", "2020-01-01T09:00:00", "2020-01-01T10:00:00"]
    assert evs[1]["payload"] == {"device": "app"}


def test_events_quarantine_and_dedup(tmp_path):
    ok = {"student_id": "s1", "ts": "2020-01-01T10:00:00Z", "kind": "club_attendance", "payload": {"club": "chess"}}
    path = _events(
        tmp_path / "e.jsonl",
        [ok, {"ts": "2020-01-01T10:00:00Z", "kind": "lms_login"}, "not json", ok, {**ok, "ts": "yesterday"}],
    )
    store = RawStore()
    m = import_events(store, path, 1)
    assert m.input_rows == 5 and m.quarantined_rows == 3 and m.valid_rows == 2
    assert m.row_count == 1
    assert store.count(EVENTS_TABLE) == 1
    assert store.count(QUARANTINE_TABLE) == 3


def test_same_instant_events_get_sequence_numbers(tmp_path):
    base = {"student_id": "s1", "ts": "2020-01-01T10:00:00Z", "payload": {}}
    path = _events(tmp_path / "e.jsonl", [{**base, "kind": "lms_login"}, {**base, "kind": "lms_logout"}])
    store = RawStore()
    import_events(store, path, 1)
    keys = [r.row_key for r in store.scan_range(EVENTS_TABLE)]
    assert [k.rsplit("#", 1)[1] for k in keys] == ["000000", "000001"]


def test_unreadable_event_file(tmp_path):
    with pytest.raises(IngestError):
        import_events(RawStore(), tmp_path / "missing.jsonl", 1)


def test_feedback_counts_and_flags(tmp_path, cohort_files):
    store = RawStore()
    import_table(store, cohort_files.marks, 1)
    m = import_feedback(store, cohort_files.feedback, 1)
    assert m.row_count == 126

    path = tmp_path / "fb.csv"
    sid = next(store.scan_range("marks")).row_key
    path.write_text(f"student_id,q1,q2,q3\n{sid},,,\nghost,Great,,\n,orphaned,,\n")
    m = import_feedback(store, path, 2)
    assert m.row_count == 2 and m.quarantined_rows == 1
    assert store.get_row(FEEDBACK_TABLE, sid).text("f:zero_length") == "1"
    ghost = store.get_row(FEEDBACK_TABLE, "ghost")
    assert ghost.text("f:orphan") == "1" and ghost.text("f:zero_length") == "0"


def test_feedback_bad_header(tmp_path):
    path = tmp_path / "fb.csv"
    path.write_text("student_id,q1\ns1,x\n")
    with pytest.raises(IngestError):
        import_feedback(RawStore(), path, 1)


# --------------------------------------------------------------------------- scheduling


def test_two_ticks_over_unchanged_file(tmp_path):
    write_marks(tmp_path / "marks_1.csv", [make_record("a")])
    sources = [SourceConfig("marks", "table", str(tmp_path / "marks_*.csv"), 60)]
    store = RawStore()
    sched = Scheduler(store, sources)
    assert len(sched.tick(0)) == 1
    assert sched.tick(60) == []
    assert sched.noops["marks"] == 1


def test_new_file_is_picked_up(tmp_path):
    write_marks(tmp_path / "marks_1.csv", [make_record("a")])
    sources = [SourceConfig("marks", "table", str(tmp_path / "marks_*.csv"), 60)]
    store = RawStore()
    sched = Scheduler(store, sources)
    sched.tick(0)
    write_marks(tmp_path / "marks_2.csv", [make_record("b")])
    assert sched.tick(30) == []  # not due yet
    done = sched.tick(60)
    assert [m.snapshot_id for m in done] == [2]
    assert store.count("marks") == 2


def test_three_sources_distinct_ids(tmp_path, cohort_files):
    (tmp_path / "e.jsonl").write_text(
        json.dumps({"student_id": "s1", "ts": "2020-01-01T00:00:00Z", "kind": "lms_login"}) + "\n"
    )
    config = tmp_path / "schedule.conf"
    config.write_text(
        f"# id kind pattern interval\nmarks table {cohort_files.marks} 60\n"
        f"feedback feedback {cohort_files.feedback} 60\napp events e.jsonl 30\n"
    )
    sources = parse_schedule(config.read_text(), tmp_path)
    out = run_schedule(RawStore(), sources, [0, 30, 60], workers=3)
    assert sorted(m.source_id for m in out) == ["app", "feedback", "marks"]


def test_schedule_is_deterministic(tmp_path, cohort_files):
    sources = [
        SourceConfig("marks", "table", str(cohort_files.marks), 10),
        SourceConfig("feedback", "feedback", str(cohort_files.feedback), 10),
    ]
    a, b = RawStore(tmp_path / "a"), RawStore(tmp_path / "b")
    run_schedule(a, sources, [0, 10, 20], workers=1)
    run_schedule(b, sources, [0, 10, 20], workers=2)
    assert _dump(a, tmp_path / "a") == _dump(b, tmp_path / "b")


def test_overlapping_ticks_serialize_per_source(tmp_path, monkeypatch):
    write_marks(tmp_path / "m.csv", [make_record("a")])
    store = RawStore()
    sched = Scheduler(store, [SourceConfig("marks", "table", str(tmp_path / "m.csv"), 1)])
    active, peak = [0], [0]
    real = ingest.IMPORTERS["table"]

    def slow(*args, **kwargs):
        active[0] += 1
        peak[0] = max(peak[0], active[0])
        time.sleep(0.05)
        try:
            return real(*args, **kwargs)
        finally:
            active[0] -= 1

    monkeypatch.setitem(ingest.IMPORTERS, "table", slow)
    threads = [threading.Thread(target=sched._poll, args=(sched.sources[0], t)) for t in (0, 1)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert peak[0] == 1
    assert len(manifests(store, "marks")) == 1


def test_schedule_validation(tmp_path):
    with pytest.raises(ValueError):
        SourceConfig("x", "table", "p", 0)
    with pytest.raises(ValueError):
        SourceConfig("x", "ftp", "p", 1)
    with pytest.raises(ValueError):
        parse_schedule("a table p\n")
    with pytest.raises(ValueError):
        parse_schedule("a table p 1\na table q 1\n")
