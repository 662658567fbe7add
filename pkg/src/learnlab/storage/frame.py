"""Immutable columnar frame files ("LAF1").

Layout, all integers little-endian::

    "LAF1"
    chunk*      name_len:u16 name kind:u8 row_count:u64 null_bitmap values
    footer      n_chunks:u32
                (name_len:u16 name kind:u8 offset:u64 length:u64 checksum:u64)*
                total_rows:u64 checksum:u64
    footer_len:u32 "LAF1"

Values are fixed-width for numerics (f64/i64, nulls stored as zero) and
u32-length-prefixed UTF-8 for text. The null bitmap is LSB-first, one bit per
row, set when the row is null. Chunk and file checksums are 64-bit FNV-1a over
the raw chunk bytes; the file checksum covers every chunk back to back.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass, field
from typing import Sequence

from ..catalog import FeatureSpec, LabeledRow
from ..fnv import fnv1a64

MAGIC = b"LAF1"
KIND_CODES = {"f64": 1, "i64": 2, "str": 3}
KIND_NAMES = {v: k for k, v in KIND_CODES.items()}


class FrameError(ValueError):
    pass


class CorruptFrameError(FrameError):
    pass


@dataclass
class Frame:
    """In-memory column table; ``None`` marks a null cell."""

    names: list[str]
    kinds: list[str]
    columns: list[list] = field(repr=False)

    def __post_init__(self):
        if not (len(self.names) == len(self.kinds) == len(self.columns)):
            raise FrameError("names, kinds and columns must align")
        if len(set(self.names)) != len(self.names):
            raise FrameError("duplicate column names")
        for kind in self.kinds:
            if kind not in KIND_CODES:
                raise FrameError(f"unknown column kind {kind!r}")
        if len({len(c) for c in self.columns}) > 1:
            raise FrameError("all columns must have the same row count")

    @property
    def n_rows(self) -> int:
        return len(self.columns[0]) if self.columns else 0

    @property
    def shape(self) -> tuple[int, int]:
        return self.n_rows, len(self.names)

    def column(self, name: str) -> list:
        try:
            return self.columns[self.names.index(name)]
        except ValueError:
            raise KeyError(name) from None

    def rows(self) -> list[tuple]:
        return list(zip(*self.columns)) if self.columns else []

    def records(self) -> list[dict]:
        return [dict(zip(self.names, r)) for r in self.rows()]


def frame_from_labeled_rows(rows: Sequence[LabeledRow], spec: FeatureSpec, key_name: str = "student_id") -> Frame:
    n_features = len(rows[0].features) if rows else spec.n_features
    feature_names = list(spec.feature_names)
    if n_features == spec.n_features + 1:
        feature_names.append(spec.with_sentiment().feature_names[-1])
    elif n_features != spec.n_features:
        raise FrameError(f"rows have {n_features} features, spec has {spec.n_features}")
    for r in rows:
        if len(r.features) != n_features:
            raise FrameError(f"row {r.key} does not conform to the feature spec")
    names = [key_name, *feature_names, spec.target_name]
    kinds = ["str"] + ["f64"] * (len(names) - 1)
    columns = [[r.key for r in rows]]
    columns += [[r.features[i] for r in rows] for i in range(n_features)]
    columns.append([r.target for r in rows])
    return Frame(names, kinds, columns)


def labeled_rows_from_frame(frame: Frame, key_name: str = "student_id") -> list[LabeledRow]:
    keys = frame.column(key_name)
    feature_cols = frame.columns[1:-1]
    target = frame.columns[-1]
    return [
        LabeledRow(keys[i], tuple(c[i] for c in feature_cols), target[i]) for i in range(frame.n_rows)
    ]


# --------------------------------------------------------------------------- encoding


def _encode_chunk(name: str, kind: str, values: list) -> bytes:
    n = len(values)
    name_b = name.encode("utf-8")
    bitmap = bytearray((n + 7) // 8)
    for i, v in enumerate(values):
        if v is None:
            bitmap[i >> 3] |= 1 << (i & 7)
    parts = [struct.pack("<H", len(name_b)), name_b, struct.pack("<BQ", KIND_CODES[kind], n), bytes(bitmap)]
    if kind == "f64":
        parts.append(struct.pack(f"<{n}d", *(0.0 if v is None else float(v) for v in values)))
    elif kind == "i64":
        parts.append(struct.pack(f"<{n}q", *(0 if v is None else int(v) for v in values)))
    else:
        for v in values:
            b = b"" if v is None else str(v).encode("utf-8")
            parts.append(struct.pack("<I", len(b)))
            parts.append(b)
    return b"".join(parts)


def _decode_chunk(data: bytes, expect_name: str, expect_kind: str) -> list:
    try:
        (name_len,) = struct.unpack_from("<H", data, 0)
        pos = 2
        name = data[pos:pos + name_len].decode("utf-8")
        pos += name_len
        kind_code, n = struct.unpack_from("<BQ", data, pos)
        pos += 9
        if name != expect_name or KIND_NAMES.get(kind_code) != expect_kind:
            raise CorruptFrameError(f"chunk header mismatch for column {expect_name!r}")
        nb = (n + 7) // 8
        bitmap = data[pos:pos + nb]
        pos += nb
        if expect_kind == "f64":
            values = list(struct.unpack_from(f"<{n}d", data, pos))
            pos += 8 * n
        elif expect_kind == "i64":
            values = list(struct.unpack_from(f"<{n}q", data, pos))
            pos += 8 * n
        else:
            values = []
            for _ in range(n):
                (length,) = struct.unpack_from("<I", data, pos)
                pos += 4
                values.append(data[pos:pos + length].decode("utf-8"))
                pos += length
    except (struct.error, UnicodeDecodeError) as exc:
        raise CorruptFrameError(f"malformed chunk for column {expect_name!r}: {exc}") from None
    if pos != len(data):
        raise CorruptFrameError(f"trailing bytes in chunk {expect_name!r}")
    for i in range(n):
        if bitmap[i >> 3] & (1 << (i & 7)):
            values[i] = None
    return values


def encode_frame(frame: Frame) -> bytes:
    chunks = [_encode_chunk(n, k, c) for n, k, c in zip(frame.names, frame.kinds, frame.columns)]
    body = bytearray(MAGIC)
    entries = []
    running = None
    for name, kind, chunk in zip(frame.names, frame.kinds, chunks):
        entries.append((name, kind, len(body), len(chunk), fnv1a64(chunk)))
        running = fnv1a64(chunk) if running is None else fnv1a64(chunk, running)
        body += chunk
    if running is None:
        running = fnv1a64(b"")
    footer = bytearray(struct.pack("<I", len(entries)))
    for name, kind, offset, length, checksum in entries:
        name_b = name.encode("utf-8")
        footer += struct.pack("<H", len(name_b)) + name_b
        footer += struct.pack("<BQQQ", KIND_CODES[kind], offset, length, checksum)
    footer += struct.pack("<QQ", frame.n_rows, running)
    return bytes(body + footer + struct.pack("<I", len(footer)) + MAGIC)


def write_frame(frame: Frame | Sequence[LabeledRow], path, spec: FeatureSpec | None = None) -> int:
    """Write atomically (temp file + rename); returns the file size in bytes."""
    if not isinstance(frame, Frame):
        if spec is None:
            raise FrameError("writing labeled rows requires their FeatureSpec")
        frame = frame_from_labeled_rows(list(frame), spec)
    data = encode_frame(frame)
    tmp = f"{os.fspath(path)}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(data)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)
    return len(data)


# --------------------------------------------------------------------------- reading


@dataclass(frozen=True)
class ChunkInfo:
    name: str
    kind: str
    offset: int
    length: int
    checksum: int


@dataclass(frozen=True)
class Footer:
    chunks: tuple[ChunkInfo, ...]
    total_rows: int
    checksum: int
    file_size: int

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.chunks]


class FrameReader:
    """Reads frame files while counting every byte pulled from disk."""

    def __init__(self, path):
        self.path = path
        self.bytes_read = 0
        self._fh = open(path, "rb")
        try:
            self.footer = self._read_footer()
        except Exception:
            self._fh.close()
            raise

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _read_at(self, offset: int, n: int) -> bytes:
        self._fh.seek(offset)
        data = self._fh.read(n)
        self.bytes_read += len(data)
        if len(data) != n:
            raise CorruptFrameError("unexpected end of file")
        return data

    def _read_footer(self) -> Footer:
        size = os.fstat(self._fh.fileno()).st_size
        if size < len(MAGIC) * 2 + 4:
            raise CorruptFrameError("file too small to be a frame file")
        if self._read_at(0, 4) != MAGIC:
            raise CorruptFrameError("bad leading magic")
        tail = self._read_at(size - 8, 8)
        if tail[4:] != MAGIC:
            raise CorruptFrameError("bad trailing magic")
        (footer_len,) = struct.unpack("<I", tail[:4])
        start = size - 8 - footer_len
        if start < 4:
            raise CorruptFrameError("footer length out of range")
        raw = self._read_at(start, footer_len)
        try:
            (n_chunks,) = struct.unpack_from("<I", raw, 0)
            pos = 4
            chunks = []
            for _ in range(n_chunks):
                (name_len,) = struct.unpack_from("<H", raw, pos)
                pos += 2
                name = raw[pos:pos + name_len].decode("utf-8")
                pos += name_len
                kind_code, offset, length, checksum = struct.unpack_from("<BQQQ", raw, pos)
                pos += 25
                if kind_code not in KIND_NAMES:
                    raise CorruptFrameError(f"unknown kind code {kind_code}")
                chunks.append(ChunkInfo(name, KIND_NAMES[kind_code], offset, length, checksum))
            total_rows, checksum = struct.unpack_from("<QQ", raw, pos)
        except (struct.error, UnicodeDecodeError) as exc:
            raise CorruptFrameError(f"malformed footer: {exc}") from None
        expected = 4
        for c in chunks:
            if c.offset != expected:
                raise CorruptFrameError(f"chunk {c.name!r} offset does not address a chunk")
            expected += c.length
        if expected != start:
            raise CorruptFrameError("chunks do not fill the file body")
        return Footer(tuple(chunks), total_rows, checksum, size)

    def read(self, projection: Sequence[str] | None = None) -> Frame:
        footer = self.footer
        by_name = {c.name: c for c in footer.chunks}
        if projection is None:
            wanted = list(footer.chunks)
        else:
            missing = [p for p in projection if p not in by_name]
            if missing:
                raise FrameError(f"unknown column(s) {missing}; available: {footer.names}")
            wanted = [by_name[p] for p in projection]
        columns = []
        if projection is None and footer.chunks:
            body = self._read_at(4, sum(c.length for c in footer.chunks))
            if fnv1a64(body) != footer.checksum:
                raise CorruptFrameError("file checksum mismatch")
            blobs = [body[c.offset - 4:c.offset - 4 + c.length] for c in wanted]
        else:
            blobs = [self._read_at(c.offset, c.length) for c in wanted]
        for info, blob in zip(wanted, blobs):
            if fnv1a64(blob) != info.checksum:
                raise CorruptFrameError(f"checksum mismatch in column {info.name!r}")
            values = _decode_chunk(blob, info.name, info.kind)
            if len(values) != footer.total_rows:
                raise CorruptFrameError(f"column {info.name!r} row count disagrees with footer")
            columns.append(values)
        return Frame([c.name for c in wanted], [c.kind for c in wanted], columns)


def read_frame(path, projection: Sequence[str] | None = None) -> Frame:
    with FrameReader(path) as reader:
        return reader.read(projection)


def inspect_frame(path) -> dict:
    """Footer metadata as plain data (what ``store inspect`` prints)."""
    with FrameReader(path) as reader:
        f = reader.footer
        return {
            "path": os.fspath(path),
            "file_size": f.file_size,
            "total_rows": f.total_rows,
            "checksum": f"{f.checksum:016x}",
            "columns": [
                {
                    "name": c.name,
                    "kind": c.kind,
                    "offset": c.offset,
                    "length": c.length,
                    "checksum": f"{c.checksum:016x}",
                }
                for c in f.chunks
            ],
        }
