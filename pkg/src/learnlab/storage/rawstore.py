"""Key-value row store holding data as it arrived.

Each table is an append-only log of JSON batch lines; a batch is committed
once its trailing newline hits the disk. Opening a store replays the logs into
an in-memory index and drops an uncommitted tail.
"""

from __future__ import annotations

import base64
import bisect
import json
import os
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Mapping, Sequence

LOG_SUFFIX = ".log"

Cells = Mapping[str, "bytes | str"]


class UnknownTableError(LookupError):
    pass


@dataclass(frozen=True)
class RawRow:
    table: str
    row_key: str
    cells: dict[str, tuple[bytes, int]]

    def value(self, qualifier: str) -> bytes:
        return self.cells[qualifier][0]

    def text(self, qualifier: str) -> str:
        return self.cells[qualifier][0].decode("utf-8")

    def family(self, family: str) -> dict[str, str]:
        """Cells of one column family as ``{qualifier-without-family: text}``."""
        prefix = family + ":"
        return {
            q[len(prefix):]: v.decode("utf-8") for q, (v, _) in self.cells.items() if q.startswith(prefix)
        }


class _Table:
    def __init__(self, name: str):
        self.name = name
        self.rows: dict[str, dict[str, list[tuple[bytes, int]]]] = {}
        self.keys: list[str] = []
        self.clock = 0
        self.lock = threading.RLock()

    def check(self, row_key: str, cells: Mapping[str, bytes], ts: int):
        if not row_key:
            raise ValueError("row_key must be nonempty")
        existing = self.rows.get(row_key, {})
        for qualifier in cells:
            if ":" not in qualifier:
                raise ValueError(f"qualifier {qualifier!r} must look like family:name")
            versions = existing.get(qualifier)
            if versions and ts < versions[-1][1]:
                raise ValueError(
                    f"{self.name}/{row_key}/{qualifier}: timestamp {ts} older than {versions[-1][1]}"
                )

    def apply(self, row_key: str, cells: Mapping[str, bytes], ts: int):
        row = self.rows.get(row_key)
        if row is None:
            row = self.rows[row_key] = {}
            bisect.insort(self.keys, row_key)
        for qualifier, value in cells.items():
            row.setdefault(qualifier, []).append((value, ts))
        self.clock = max(self.clock, ts)

    def latest(self, row_key: str) -> RawRow | None:
        row = self.rows.get(row_key)
        if row is None:
            return None
        return RawRow(self.name, row_key, {q: versions[-1] for q, versions in row.items()})


def _to_bytes(value) -> bytes:
    if isinstance(value, bytes):
        return value
    if isinstance(value, str):
        return value.encode("utf-8")
    raise TypeError(f"cell values must be bytes or str, got {type(value).__name__}")


class RawStore:
    """Raw row store; ``directory=None`` keeps everything in memory."""

    def __init__(self, directory: str | os.PathLike | None = None):
        self.directory = Path(directory) if directory is not None else None
        self._tables: dict[str, _Table] = {}
        self._lock = threading.Lock()
        if self.directory is not None:
            self.directory.mkdir(parents=True, exist_ok=True)
            for log in sorted(self.directory.glob("*" + LOG_SUFFIX)):
                self._replay(log)

    # -- tables

    def create_table(self, name: str) -> None:
        if not name or "/" in name:
            raise ValueError(f"bad table name {name!r}")
        with self._lock:
            if name in self._tables:
                return
            self._tables[name] = _Table(name)
            if self.directory is not None:
                self._log_path(name).touch()

    def has_table(self, name: str) -> bool:
        return name in self._tables

    def tables(self) -> list[str]:
        return sorted(self._tables)

    def _table(self, name: str) -> _Table:
        try:
            return self._tables[name]
        except KeyError:
            raise UnknownTableError(f"unknown table {name!r}") from None

    def _log_path(self, name: str) -> Path:
        return self.directory / (name + LOG_SUFFIX)

    # -- writes

    def put_row(self, table: str, row_key: str, cells: Cells, ts: int | None = None) -> int:
        """Write cells to one row; returns the timestamp used."""
        return self.put_batch(table, [(row_key, cells)], ts=ts)

    def put_batch(
        self,
        table: str,
        rows: Sequence[tuple[str, Cells]],
        ts: int | None = None,
    ) -> int:
        """Write several rows as one committed unit: all land or none do."""
        t = self._table(table)
        encoded = [(key, {q: _to_bytes(v) for q, v in cells.items()}) for key, cells in rows]
        with t.lock:
            stamp = t.clock + 1 if ts is None else int(ts)
            for key, cells in encoded:
                t.check(key, cells, stamp)
            if not encoded:
                return stamp
            if self.directory is not None:
                line = json.dumps(
                    {
                        "ts": stamp,
                        "rows": [
                            [key, {q: base64.b64encode(v).decode("ascii") for q, v in sorted(cells.items())}]
                            for key, cells in encoded
                        ],
                    },
                    sort_keys=True,
                    separators=(",", ":"),
                )
                with open(self._log_path(table), "a", encoding="utf-8") as fh:
                    fh.write(line + "\n")
                    fh.flush()
                    os.fsync(fh.fileno())
            for key, cells in encoded:
                t.apply(key, cells, stamp)
        return stamp

    def _replay(self, log: Path) -> None:
        name = log.name[: -len(LOG_SUFFIX)]
        t = self._tables[name] = _Table(name)
        data = log.read_bytes()
        committed = data.rfind(b"\n") + 1
        if committed != len(data):
            # uncommitted tail from a crash mid-write
            with open(log, "r+b") as fh:
                fh.truncate(committed)
        for line in data[:committed].splitlines():
            batch = json.loads(line)
            for key, cells in batch["rows"]:
                t.apply(key, {q: base64.b64decode(v) for q, v in cells.items()}, batch["ts"])

    # -- reads

    def get_row(self, table: str, row_key: str) -> RawRow | None:
        t = self._table(table)
        with t.lock:
            return t.latest(row_key)

    def get_versions(self, table: str, row_key: str, qualifier: str) -> list[tuple[bytes, int]]:
        """All stored versions of one cell, oldest first."""
        t = self._table(table)
        with t.lock:
            return list(t.rows.get(row_key, {}).get(qualifier, []))

    def get_cell_at(self, table: str, row_key: str, qualifier: str, ts: int) -> bytes | None:
        """Latest value of a cell written at or before ``ts``."""
        value = None
        for v, stamp in self.get_versions(table, row_key, qualifier):
            if stamp <= ts:
                value = v
        return value

    def scan_range(self, table: str, start_key: str | None = None, end_key: str | None = None) -> Iterator[RawRow]:
        """Rows with ``start_key <= key < end_key`` in key order, as of the call."""
        if start_key is not None and end_key is not None and start_key > end_key:
            raise ValueError("start_key must not exceed end_key")
        t = self._table(table)
        with t.lock:
            lo = 0 if start_key is None else bisect.bisect_left(t.keys, start_key)
            hi = len(t.keys) if end_key is None else bisect.bisect_left(t.keys, end_key)
            snapshot = [t.latest(k) for k in t.keys[lo:hi]]
        return iter(snapshot)

    def count(self, table: str) -> int:
        return len(self._table(table).keys)

    def scan_prefix(self, table: str, prefix: str) -> Iterator[RawRow]:
        if not prefix:
            return self.scan_range(table)
        end = prefix[:-1] + chr(ord(prefix[-1]) + 1)
        return self.scan_range(table, prefix, end)
