"""In-process partitioned datasets of ``(key, value)`` records.

Records live in partition ``fnv1a64(encode(key)) % P``. Each record carries a
hidden sequence tag giving its position in the single-partition evaluation,
and every partition is kept sorted by that tag. Transformations are eager, run
partitions as independent work units on a thread pool and merge results in
partition-index order; together this makes per-key value order (and thus any
fold) identical for every partition and worker count.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable, Hashable, Iterable, Sequence

from .fnv import fnv1a64

Record = tuple[Hashable, Any]
_Tagged = tuple[tuple, Hashable, Any]


def encode_key(key) -> bytes:
    """Type-tagged canonical bytes of a key; only str, int and tuples of them conform."""
    if isinstance(key, bool):
        raise TypeError("bool keys are not allowed")
    if isinstance(key, str):
        return b"s" + key.encode("utf-8")
    if isinstance(key, int):
        return b"i" + str(key).encode("ascii")
    if isinstance(key, tuple):
        return b"t(" + b"\x00".join(encode_key(k) for k in key) + b")"
    raise TypeError(f"unsupported key type {type(key).__name__}")


def sort_key(key):
    if isinstance(key, int):
        return (0, key)
    if isinstance(key, str):
        return (1, key)
    return (2, tuple(sort_key(k) for k in key))


def partition_of(key, partitions: int) -> int:
    return fnv1a64(encode_key(key)) % partitions


@dataclass(frozen=True)
class Context:
    """Execution settings: partition count and worker-pool size."""

    partitions: int = 1
    workers: int = 1

    def __post_init__(self):
        if self.partitions < 1 or self.workers < 1:
            raise ValueError("partitions and workers must be >= 1")

    @classmethod
    def default(cls) -> "Context":
        n = os.cpu_count() or 1
        return cls(n, n)

    def run(self, fn: Callable, items: Sequence) -> list:
        if self.workers == 1 or len(items) <= 1:
            return [fn(p) for p in items]
        with ThreadPoolExecutor(min(self.workers, len(items))) as pool:
            return list(pool.map(fn, items))

    def _place(self, tagged: Iterable[_Tagged]) -> list[list[_Tagged]]:
        parts: list[list[_Tagged]] = [[] for _ in range(self.partitions)]
        for rec in tagged:
            parts[partition_of(rec[1], self.partitions)].append(rec)
        for p in parts:
            p.sort(key=lambda r: r[0])
        return parts

    def parallelize(self, records: Iterable[Record], lineage: str = "parallelize") -> "PartitionedDataset":
        tagged = []
        for i, record in enumerate(records):
            key, value = record
            encode_key(key)
            tagged.append(((i,), key, value))
        return PartitionedDataset(self, self._place(tagged), lineage)

    def from_store(self, store, table: str, start_key: str | None = None, end_key: str | None = None):
        """Dataset of ``(row_key, RawRow)`` from a raw-store range scan."""
        rows = store.scan_range(table, start_key, end_key)
        return self.parallelize(((r.row_key, r) for r in rows), f"scan:{table}")

    def from_frame(self, path, key_column: str, projection: Sequence[str] | None = None):
        """Dataset of ``(key, row-dict)`` from a frame file."""
        from .storage.frame import read_frame

        if not os.path.exists(path):
            raise FileNotFoundError(path)
        if projection is not None and key_column not in projection:
            projection = [key_column, *projection]
        frame = read_frame(path, projection)
        return self.parallelize(((r[key_column], r) for r in frame.records()), f"frame:{os.fspath(path)}")


class PartitionedDataset:
    def __init__(self, ctx: Context, tagged_parts: list[list[_Tagged]], lineage: str = ""):
        self.ctx = ctx
        self._parts = tagged_parts
        self.lineage = lineage

    @property
    def num_partitions(self) -> int:
        return len(self._parts)

    @property
    def partitions(self) -> list[list[Record]]:
        return [[(k, v) for _, k, v in p] for p in self._parts]

    def __len__(self) -> int:
        return sum(len(p) for p in self._parts)

    def _derive(self, parts: list[list[_Tagged]], op: str) -> "PartitionedDataset":
        return PartitionedDataset(self.ctx, parts, f"{self.lineage}|{op}")

    def _rehash(self, outputs: list[list[_Tagged]], op: str) -> "PartitionedDataset":
        return self._derive(self.ctx._place(r for out in outputs for r in out), op)

    def map_values(self, f: Callable[[Any], Any]) -> "PartitionedDataset":
        return self._derive(self.ctx.run(lambda p: [(s, k, f(v)) for s, k, v in p], self._parts), "map_values")

    def map(self, f: Callable[[Record], Record]) -> "PartitionedDataset":
        def run(p):
            out = []
            for s, k, v in p:
                nk, nv = f((k, v))
                encode_key(nk)
                out.append((s, nk, nv))
            return out

        return self._rehash(self.ctx.run(run, self._parts), "map")

    def flat_map(self, f: Callable[[Record], Iterable[Record]]) -> "PartitionedDataset":
        def run(p):
            out = []
            for s, k, v in p:
                for j, (nk, nv) in enumerate(f((k, v))):
                    encode_key(nk)
                    out.append((s + (j,), nk, nv))
            return out

        return self._rehash(self.ctx.run(run, self._parts), "flat_map")

    def map_partitions(self, f: Callable[[list[Record]], Iterable[Record]]) -> "PartitionedDataset":
        """Apply ``f`` to each partition's record list.

        A 1:1 output keeps each input's position; for other shapes the order
        of equal-key outputs follows the partition they came from.
        """

        def run(p):
            out = list(f([(k, v) for _, k, v in p]))
            for nk, _ in out:
                encode_key(nk)
            if len(out) == len(p):
                return [(s, nk, nv) for (s, _, _), (nk, nv) in zip(p, out)]
            base = p[0][0] if p else ()
            return [(base + (j,), nk, nv) for j, (nk, nv) in enumerate(out)]

        return self._rehash(self.ctx.run(run, self._parts), "map_partitions")

    def filter(self, pred: Callable[[Record], bool]) -> "PartitionedDataset":
        return self._derive(self.ctx.run(lambda p: [r for r in p if pred((r[1], r[2]))], self._parts), "filter")

    def repartition(self, partitions: int) -> "PartitionedDataset":
        ctx = Context(partitions, self.ctx.workers)
        return PartitionedDataset(ctx, ctx._place(r for p in self._parts for r in p), f"{self.lineage}|repartition")

    def join_by_key(self, other: "PartitionedDataset", how: str = "inner") -> "PartitionedDataset":
        """``(key, (left, right))``; ``how="left"`` keeps unmatched left records with ``right=None``."""
        if how not in ("inner", "left"):
            raise ValueError("how must be 'inner' or 'left'")
        if other.num_partitions != self.num_partitions:
            other = other.repartition(self.num_partitions)

        def join(pair):
            left, right = pair
            index: dict = {}
            for s, k, v in right:
                index.setdefault(k, []).append((s, v))
            out = []
            for ls, k, lv in left:
                matches = index.get(k)
                if matches:
                    out.extend(((ls, rs), k, (lv, rv)) for rs, rv in matches)
                elif how == "left":
                    out.append(((ls, ()), k, (lv, None)))
            return out

        return self._derive(self.ctx.run(join, list(zip(self._parts, other._parts))), f"join:{how}")

    def aggregate_by_key(self, zero: Any, fold: Callable[[Any, Any], Any], merge: Callable[[Any, Any], Any]) -> dict:
        """Fold values per key inside each partition, merge partials in partition order.

        ``zero`` seeds every accumulator, so it must be immutable. Returns a
        dict ordered by key.
        """

        def local(part):
            acc: dict = {}
            for _, k, v in part:
                acc[k] = fold(acc.get(k, zero), v)
            return acc

        merged: dict = {}
        for partial in self.ctx.run(local, self._parts):
            for k, a in partial.items():
                merged[k] = merge(merged[k], a) if k in merged else a
        return {k: merged[k] for k in sorted(merged, key=sort_key)}

    def collect(self, ordering: str = "by_key") -> list[Record]:
        if ordering == "by_partition":
            return [(k, v) for p in self._parts for _, k, v in p]
        if ordering != "by_key":
            raise ValueError("ordering must be 'by_key' or 'by_partition'")
        flat = [r for p in self._parts for r in p]
        flat.sort(key=lambda r: (sort_key(r[1]), r[0]))
        return [(k, v) for _, k, v in flat]

    def keys(self) -> list:
        return [k for k, _ in self.collect()]

    def count(self) -> int:
        return len(self)
