"""Snapshot imports into the raw store: table dumps, app event streams, feedback exports.

Every import parses and validates the whole file before touching the store,
so a fatal error leaves the primary tables untouched. Snapshots are identified
by a 64-bit FNV digest of the file bytes; a digest already recorded for the
source is a no-op and returns the stored manifest.
"""

from __future__ import annotations

import csv
import glob
import io
import json
import logging
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .catalog import (
    DEFAULT_SCHEMA,
    RECORD_FIELDS,
    DataPointCategory,
    FieldSpec,
    RecordSchema,
    StudentRecord,
    Strictness,
    validate_record,
)
from .fnv import fnv1a64
from .storage.rawstore import RawStore

log = logging.getLogger(__name__)

MANIFEST_TABLE = "_manifests"
QUARANTINE_TABLE = "quarantine"
EVENTS_TABLE = "events"
FEEDBACK_TABLE = "feedback"
FEEDBACK_COLUMNS = ("student_id", "q1", "q2", "q3")


class IngestError(Exception):
    """Fatal import failure; nothing was written."""


@dataclass(frozen=True)
class SnapshotManifest:
    source_id: str
    snapshot_id: int
    row_count: int
    ingested_at: str
    content_digest: str
    input_rows: int = 0
    valid_rows: int = 0
    quarantined_rows: int = 0
    warnings: tuple[str, ...] = field(default=(), compare=False)

    def cells(self) -> dict[str, str]:
        return {
            "m:source_id": self.source_id,
            "m:snapshot_id": str(self.snapshot_id),
            "m:row_count": str(self.row_count),
            "m:ingested_at": self.ingested_at,
            "m:content_digest": self.content_digest,
            "m:input_rows": str(self.input_rows),
            "m:valid_rows": str(self.valid_rows),
            "m:quarantined_rows": str(self.quarantined_rows),
            "m:warnings": json.dumps(list(self.warnings)),
        }

    @classmethod
    def from_cells(cls, cells: dict[str, str]) -> "SnapshotManifest":
        return cls(
            source_id=cells["source_id"],
            snapshot_id=int(cells["snapshot_id"]),
            row_count=int(cells["row_count"]),
            ingested_at=cells["ingested_at"],
            content_digest=cells["content_digest"],
            input_rows=int(cells["input_rows"]),
            valid_rows=int(cells["valid_rows"]),
            quarantined_rows=int(cells["quarantined_rows"]),
            warnings=tuple(json.loads(cells["warnings"])),
        )


def utc_now() -> str:
    return datetime.now(timezone.utc).isoformat()


def manifests(store: RawStore, source_id: str | None = None) -> list[SnapshotManifest]:
    if not store.has_table(MANIFEST_TABLE):
        return []
    rows = store.scan_prefix(MANIFEST_TABLE, f"{source_id}#") if source_id else store.scan_range(MANIFEST_TABLE)
    return [SnapshotManifest.from_cells(r.family("m")) for r in rows]


def _manifest_key(source_id: str, snapshot_id: int) -> str:
    return f"{source_id}#{snapshot_id:012d}"


@dataclass
class _Staged:
    """Everything an import will write, assembled before the first write."""

    source_id: str
    snapshot_id: int
    digest: str
    table: str
    rows: dict[str, dict[str, str]] = field(default_factory=dict)
    quarantine: list[tuple[int, str, str]] = field(default_factory=list)
    input_rows: int = 0
    valid_rows: int = 0
    warnings: list[str] = field(default_factory=list)


def _existing(store: RawStore, source_id: str, snapshot_id: int, digest: str) -> SnapshotManifest | None:
    """Manifest for an already-seen digest, or None; raises on snapshot-id conflicts."""
    previous = manifests(store, source_id)
    for m in previous:
        if m.content_digest == digest:
            return m
    for m in previous:
        if m.snapshot_id >= snapshot_id:
            raise IngestError(
                f"{source_id}: snapshot {snapshot_id} is not newer than recorded snapshot {m.snapshot_id}"
            )
    return None


def _commit(store: RawStore, staged: _Staged, ingested_at: str) -> SnapshotManifest:
    for table in (staged.table, QUARANTINE_TABLE, MANIFEST_TABLE):
        store.create_table(table)
    if staged.quarantine:
        store.put_batch(
            QUARANTINE_TABLE,
            [
                (
                    f"{_manifest_key(staged.source_id, staged.snapshot_id)}#{lineno:08d}",
                    {"q:source_id": staged.source_id, "q:line": str(lineno), "q:reason": reason, "q:raw": raw},
                )
                for lineno, reason, raw in staged.quarantine
            ],
            ts=staged.snapshot_id,
        )
    if staged.rows:
        store.put_batch(staged.table, list(staged.rows.items()), ts=staged.snapshot_id)
    manifest = SnapshotManifest(
        source_id=staged.source_id,
        snapshot_id=staged.snapshot_id,
        row_count=len(staged.rows),
        ingested_at=ingested_at,
        content_digest=staged.digest,
        input_rows=staged.input_rows,
        valid_rows=staged.valid_rows,
        quarantined_rows=len(staged.quarantine),
        warnings=tuple(staged.warnings),
    )
    # the manifest row is the commit record for the snapshot
    store.put_row(MANIFEST_TABLE, _manifest_key(staged.source_id, staged.snapshot_id), manifest.cells(), ts=staged.snapshot_id)
    for w in staged.warnings:
        log.warning("%s snapshot %d: %s", staged.source_id, staged.snapshot_id, w)
    return manifest


def _read_bytes(path) -> bytes:
    try:
        with open(path, "rb") as fh:
            return fh.read()
    except OSError as exc:
        raise IngestError(f"cannot read {path}: {exc}") from None


def _csv_rows(data: bytes, path) -> tuple[list[str], list[tuple[int, list[str], str]]]:
    try:
        text = data.decode("utf-8-sig")
    except UnicodeDecodeError as exc:
        raise IngestError(f"{path} is not UTF-8: {exc}") from None
    lines = text.splitlines(keepends=True)
    reader = csv.reader(io.StringIO(text, newline=""))
    try:
        header = next(reader)
    except StopIteration:
        raise IngestError(f"{path}: missing header row") from None
    header = [h.strip() for h in header]
    if not any(header):
        raise IngestError(f"{path}: missing header row")
    out = []
    for cells in reader:
        lineno = reader.line_num
        if not cells or (len(cells) == 1 and not cells[0].strip()):
            continue
        raw = lines[lineno - 1].rstrip("\r\n") if lineno - 1 < len(lines) else ""
        out.append((lineno, cells, raw))
    return header, out


def _as_fields(schema: RecordSchema | DataPointCategory) -> tuple[FieldSpec, ...]:
    if isinstance(schema, RecordSchema):
        return schema.fields
    kinds = {"numeric": "numeric", "boolean": "binary"}
    specs = [FieldSpec("student_id", "text")]
    specs += [FieldSpec(name, kinds.get(kind, "text")) for name, kind in schema.variables]
    return tuple(specs)


def _check_cell(spec: FieldSpec, value: str) -> str | None:
    if spec.kind in ("numeric", "integer", "binary"):
        try:
            number = float(value)
        except ValueError:
            return f"{spec.name}: not a number: {value!r}"
        if number != number:
            return f"{spec.name}: not a number: {value!r}"
        if spec.kind != "numeric" and not number.is_integer():
            return f"{spec.name}: not an integer: {value!r}"
        if spec.kind == "binary" and number not in (0, 1):
            return f"{spec.name} must be 0 or 1"
        if spec.min is not None and number < spec.min:
            return f"{spec.name} below {spec.min:g}"
        if spec.max is not None and number > spec.max:
            return f"{spec.name} exceeds {spec.max:g}"
    return None


def import_table(
    store: RawStore,
    path,
    snapshot_id: int,
    schema: RecordSchema | DataPointCategory = DEFAULT_SCHEMA,
    table: str = "marks",
    source_id: str | None = None,
    strictness: Strictness | str = Strictness.STRICT,
    clock: Callable[[], str] = utc_now,
) -> SnapshotManifest:
    """Import a delimited table dump keyed by ``student_id``.

    Rows that fail parsing or validation go to the quarantine table with a
    reason. A student appearing twice in one snapshot keeps its later row.
    """
    source_id = source_id or f"table:{table}"
    data = _read_bytes(path)
    digest = f"{fnv1a64(data):016x}"
    found = _existing(store, source_id, snapshot_id, digest)
    if found is not None:
        return found

    specs = _as_fields(schema)
    header, rows = _csv_rows(data, path)
    expected = {s.name for s in specs}
    if set(header) != expected or len(header) != len(expected):
        raise IngestError(
            f"{path}: header {sorted(header)} does not match schema fields {sorted(expected)}"
        )
    if "student_id" not in expected:
        raise IngestError("schema must include student_id")
    is_record = isinstance(schema, RecordSchema) and set(schema.names) == set(RECORD_FIELDS)

    staged = _Staged(source_id, snapshot_id, digest, table, input_rows=len(rows))
    for lineno, cells, raw in rows:
        if len(cells) != len(header):
            staged.quarantine.append((lineno, f"expected {len(header)} fields, got {len(cells)}", raw))
            continue
        row = dict(zip(header, (c.strip() for c in cells)))
        if not row["student_id"]:
            staged.quarantine.append((lineno, "empty student_id", raw))
            continue
        problems = [p for p in (_check_cell(s, row[s.name]) for s in specs) if p]
        if not problems and is_record:
            problems = validate_record(StudentRecord.from_mapping(row), strictness, schema)
        if problems:
            staged.quarantine.append((lineno, "; ".join(problems), raw))
            continue
        staged.valid_rows += 1
        sid = row["student_id"]
        if sid in staged.rows:
            staged.warnings.append(f"duplicate student_id {sid} at line {lineno}; later row wins")
        staged.rows[sid] = {f"d:{k}": v for k, v in row.items()}
    return _commit(store, staged, clock())


def normalize_ts(value: str) -> str:
    """ISO-8601 to a fixed-width UTC form that sorts chronologically as text."""
    if not isinstance(value, str) or not value:
        raise ValueError("timestamp must be a nonempty string")
    text = value[:-1] + "+00:00" if value.endswith(("Z", "z")) else value
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%S.%fZ")


def _parse_event(line: str) -> dict:
    obj = json.loads(line)
    if not isinstance(obj, dict):
        raise ValueError("event must be an object")
    sid = obj.get("student_id")
    if not isinstance(sid, str) or not sid:
        raise ValueError("missing student_id")
    if "#" in sid:
        raise ValueError("student_id may not contain '#'")
    kind = obj.get("kind")
    if not isinstance(kind, str) or not kind:
        raise ValueError("missing kind")
    payload = obj.get("payload", {})
    if not isinstance(payload, dict) or not all(isinstance(k, str) and isinstance(v, str) for k, v in payload.items()):
        raise ValueError("payload must map text to text")
    return {"student_id": sid, "ts": normalize_ts(obj.get("ts")), "kind": kind, "payload": payload}


def import_events(
    store: RawStore,
    path,
    snapshot_id: int,
    source_id: str = "events",
    table: str = EVENTS_TABLE,
    clock: Callable[[], str] = utc_now,
) -> SnapshotManifest:
    """Import line-delimited app events under ``student_id#ts#seq`` keys."""
    data = _read_bytes(path)
    digest = f"{fnv1a64(data):016x}"
    found = _existing(store, source_id, snapshot_id, digest)
    if found is not None:
        return found
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise IngestError(f"{path} is not UTF-8: {exc}") from None

    staged = _Staged(source_id, snapshot_id, digest, table)
    seen: set[str] = set()
    seq: dict[tuple[str, str], int] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        staged.input_rows += 1
        try:
            event = _parse_event(line)
        except (ValueError, TypeError) as exc:
            staged.quarantine.append((lineno, str(exc), line))
            continue
        staged.valid_rows += 1
        canon = json.dumps(event, sort_keys=True, separators=(",", ":"))
        if canon in seen:
            staged.warnings.append(f"duplicate event at line {lineno} dropped")
            continue
        seen.add(canon)
        slot = (event["student_id"], event["ts"])
        n = seq.get(slot, 0)
        seq[slot] = n + 1
        key = f"{event['student_id']}#{event['ts']}#{n:06d}"
        staged.rows[key] = {
            "e:student_id": event["student_id"],
            "e:ts": event["ts"],
            "e:kind": event["kind"],
            "e:payload": json.dumps(event["payload"], sort_keys=True),
        }
    return _commit(store, staged, clock())


def student_events(store: RawStore, student_id: str, table: str = EVENTS_TABLE) -> list[dict]:
    return [
        {**r.family("e"), "payload": json.loads(r.text("e:payload"))}
        for r in store.scan_prefix(table, f"{student_id}#")
    ]


def import_feedback(
    store: RawStore,
    path,
    snapshot_id: int,
    source_id: str = "feedback",
    table: str = FEEDBACK_TABLE,
    marks_table: str = "marks",
    clock: Callable[[], str] = utc_now,
) -> SnapshotManifest:
    """Import a feedback-form export (``student_id,q1,q2,q3`` plus optional ``collected_at``).

    Respondents missing from the marks table are kept and flagged as orphans;
    the join policy downstream decides what to do with them.
    """
    data = _read_bytes(path)
    digest = f"{fnv1a64(data):016x}"
    found = _existing(store, source_id, snapshot_id, digest)
    if found is not None:
        return found
    header, rows = _csv_rows(data, path)
    extra = set(header) - set(FEEDBACK_COLUMNS) - {"collected_at"}
    if not set(FEEDBACK_COLUMNS) <= set(header) or extra or len(set(header)) != len(header):
        raise IngestError(f"{path}: header {header} must be {list(FEEDBACK_COLUMNS)} (+ optional collected_at)")

    ingested_at = clock()
    have_marks = store.has_table(marks_table)
    staged = _Staged(source_id, snapshot_id, digest, table, input_rows=len(rows))
    for lineno, cells, raw in rows:
        if len(cells) != len(header):
            staged.quarantine.append((lineno, f"expected {len(header)} fields, got {len(cells)}", raw))
            continue
        row = dict(zip(header, cells))
        sid = row["student_id"].strip()
        if not sid:
            staged.quarantine.append((lineno, "empty student_id", raw))
            continue
        staged.valid_rows += 1
        if sid in staged.rows:
            staged.warnings.append(f"duplicate student_id {sid} at line {lineno}; later row wins")
        answers = [row[q] for q in FEEDBACK_COLUMNS[1:]]
        orphan = not have_marks or store.get_row(marks_table, sid) is None
        staged.rows[sid] = {
            "f:student_id": sid,
            "f:q1": answers[0],
            "f:q2": answers[1],
            "f:q3": answers[2],
            "f:collected_at": row.get("collected_at", "") or ingested_at,
            "f:zero_length": "1" if not any(a.strip() for a in answers) else "0",
            "f:orphan": "1" if orphan else "0",
        }
    return _commit(store, staged, ingested_at)


# --------------------------------------------------------------------------- scheduling

IMPORTERS = {"table": import_table, "events": import_events, "feedback": import_feedback}


@dataclass(frozen=True)
class SourceConfig:
    source_id: str
    kind: str
    pattern: str
    interval: float
    table: str | None = None

    def __post_init__(self):
        if self.kind not in IMPORTERS:
            raise ValueError(f"{self.source_id}: unknown source kind {self.kind!r}")
        if not self.interval > 0:
            raise ValueError(f"{self.source_id}: interval must be positive")


def parse_schedule(text: str, base_dir: str | os.PathLike = ".") -> list[SourceConfig]:
    """One source per line: ``source_id kind pattern interval [table]``; ``#`` starts a comment."""
    out = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) not in (4, 5):
            raise ValueError(f"bad schedule line {raw!r}")
        pattern = parts[2] if os.path.isabs(parts[2]) else os.path.join(os.fspath(base_dir), parts[2])
        out.append(SourceConfig(parts[0], parts[1], pattern, float(parts[3]), parts[4] if len(parts) == 5 else None))
    ids = [s.source_id for s in out]
    if len(ids) != len(set(ids)):
        raise ValueError("duplicate source ids in schedule")
    return out


def _virtual_time(now: float) -> str:
    return datetime.fromtimestamp(now, timezone.utc).isoformat()


class Scheduler:
    """Imports new snapshot files on a fixed interval per source, driven by an injected clock."""

    def __init__(self, store: RawStore, sources: Sequence[SourceConfig], start: float = 0.0, workers: int = 1):
        self.store = store
        self.sources = list(sources)
        self.workers = workers
        self.next_due = {s.source_id: start for s in self.sources}
        self.locks = {s.source_id: threading.Lock() for s in self.sources}
        self.noops = {s.source_id: 0 for s in self.sources}

    def _poll(self, source: SourceConfig, now: float) -> list[SnapshotManifest]:
        # per-source serialization: an overlapping tick waits for the running import
        with self.locks[source.source_id]:
            done = []
            seen = {m.content_digest for m in manifests(self.store, source.source_id)}
            last = max((m.snapshot_id for m in manifests(self.store, source.source_id)), default=0)
            for path in sorted(glob.glob(source.pattern)):
                digest = f"{fnv1a64(Path(path).read_bytes()):016x}"
                if digest in seen:
                    self.noops[source.source_id] += 1
                    continue
                last += 1
                kwargs = {"source_id": source.source_id, "clock": lambda: _virtual_time(now)}
                if source.table:
                    kwargs["table"] = source.table
                done.append(IMPORTERS[source.kind](self.store, path, last, **kwargs))
                seen.add(digest)
            return done

    def tick(self, now: float) -> list[SnapshotManifest]:
        due = [s for s in self.sources if now >= self.next_due[s.source_id]]
        for s in due:
            while self.next_due[s.source_id] <= now:
                self.next_due[s.source_id] += s.interval
        # table dumps land before feedback and events so orphan flags do not depend on thread timing
        results = []
        for phase in ([s for s in due if s.kind == "table"], [s for s in due if s.kind != "table"]):
            if self.workers > 1 and len(phase) > 1:
                with ThreadPoolExecutor(self.workers) as pool:
                    results += list(pool.map(lambda s: self._poll(s, now), phase))
            else:
                results += [self._poll(s, now) for s in phase]
        return [m for batch in results for m in batch]

    def run(self, ticks: Iterable[float]) -> list[SnapshotManifest]:
        out = []
        for now in ticks:
            out.extend(self.tick(now))
        return out


def run_schedule(
    store: RawStore,
    config: Sequence[SourceConfig],
    ticks: Iterable[float],
    workers: int = 1,
) -> list[SnapshotManifest]:
    """Drive a scheduler over the given virtual clock readings; returns manifests of real imports."""
    ticks = list(ticks)
    return Scheduler(store, config, start=ticks[0] if ticks else 0.0, workers=workers).run(ticks)
