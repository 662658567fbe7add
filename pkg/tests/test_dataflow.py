import pytest
from hypothesis import given, settings, strategies as st

from learnlab.dataflow import Context, encode_key, partition_of, sort_key
from learnlab.fnv import fnv1a64
from learnlab.storage import Frame, RawStore, write_frame

CONTEXTS = [Context(1, 1), Context(2, 1), Context(4, 2), Context(8, 8)]


def _records(n=10):
    return [(f"k{i}", i) for i in range(n)]


def test_single_partition():
    ds = Context(1, 1).parallelize(_records())
    assert ds.num_partitions == 1
    assert ds.partitions[0] == _records()


def test_placement_follows_hash():
    ds = Context(4, 1).parallelize(_records())
    assert sum(len(p) for p in ds.partitions) == 10
    for idx, part in enumerate(ds.partitions):
        for key, _ in part:
            assert fnv1a64(encode_key(key)) % 4 == idx == partition_of(key, 4)


def test_insertion_order_within_partition():
    ds = Context(3, 1).parallelize(_records(30))
    for part in ds.partitions:
        values = [v for _, v in part]
        assert values == sorted(values)


def test_construction_is_deterministic():
    a = Context(4, 2).parallelize(_records())
    b = Context(4, 2).parallelize(_records())
    assert a.partitions == b.partitions


def test_key_types():
    assert encode_key(("a", 1)) == b"t(sa\x00i1)"
    with pytest.raises(TypeError):
        Context().parallelize([(1.5, "x")])
    with pytest.raises(TypeError):
        Context().parallelize([(True, "x")])
    with pytest.raises(TypeError):
        Context().parallelize([("a", 1)]).map(lambda kv: ([1], kv[1]))


def test_key_ordering_across_types():
    keys = ["b", 3, ("a", 1), "a", 1, ("a",)]
    assert sorted(keys, key=sort_key) == [1, 3, "a", "b", ("a",), ("a", 1)]


def test_context_validation():
    with pytest.raises(ValueError):
        Context(0, 1)
    with pytest.raises(ValueError):
        Context(1, 0)


def test_filter_false_keeps_partitions():
    ds = Context(4, 1).parallelize(_records()).filter(lambda kv: False)
    assert ds.num_partitions == 4 and ds.count() == 0
    assert ds.collect() == []


def test_collect_empty():
    assert Context(3, 2).parallelize([]).collect() == []
    assert Context(3, 2).parallelize([]).collect("by_partition") == []


def test_collect_by_partition_concatenates():
    ds = Context(4, 1).parallelize(_records())
    assert ds.collect("by_partition") == [r for p in ds.partitions for r in p]
    with pytest.raises(ValueError):
        ds.collect("random")


def test_collect_by_key_matches_sequential_oracle():
    recs = [(f"k{(i * 37) % 50:02d}", i) for i in range(100)]
    expected = sorted(recs, key=lambda r: r[0])  # stable: equal keys keep input order
    for ctx in CONTEXTS:
        assert ctx.parallelize(recs).collect() == expected


def test_mean_sentiment_via_count_sum():
    sentences = [("s1", 3.0), ("s2", 1.0), ("s1", 2.0), ("s2", 2.0), ("s3", 4.0)]
    for ctx in CONTEXTS:
        acc = ctx.parallelize(sentences).aggregate_by_key(
            (0, 0.0), lambda a, v: (a[0] + 1, a[1] + v), lambda a, b: (a[0] + b[0], a[1] + b[1])
        )
        assert {k: s / c for k, (c, s) in acc.items()} == {"s1": 2.5, "s2": 1.5, "s3": 4.0}
        assert list(acc) == ["s1", "s2", "s3"]


def test_inner_and_left_join_counts():
    marks = [(f"s{i:03d}", i) for i in range(500)]
    sentiment = [(f"s{i:03d}", 2.0) for i in range(0, 500, 3)][:126]
    for ctx in (Context(1, 1), Context(8, 4)):
        left = ctx.parallelize(marks)
        right = ctx.parallelize(sentiment)
        inner = left.join_by_key(right)
        assert inner.count() == 126
        outer = left.join_by_key(right, "left")
        assert outer.count() == 500
        assert sum(1 for _, (_, r) in outer.collect() if r is None) == 374


def test_join_with_duplicates_and_repartition():
    left = Context(2, 1).parallelize([("a", 1), ("a", 2), ("b", 3)])
    right = Context(5, 1).parallelize([("a", "x"), ("a", "y"), ("c", "z")])
    out = left.join_by_key(right).collect()
    assert out == [("a", (1, "x")), ("a", (1, "y")), ("a", (2, "x")), ("a", (2, "y"))]
    with pytest.raises(ValueError):
        left.join_by_key(right, "outer")


def test_map_partitions_one_to_one_and_reshaping():
    recs = _records(20)
    for ctx in CONTEXTS:
        doubled = ctx.parallelize(recs).map_partitions(lambda part: [(k, v * 2) for k, v in part]).collect()
        assert doubled == sorted([(k, v * 2) for k, v in recs], key=lambda r: sort_key(r[0]))
        counted = ctx.parallelize(recs).map_partitions(lambda part: [("n", len(part))] if part else [])
        assert sum(v for _, v in counted.collect()) == 20


def test_lineage_is_recorded():
    ds = Context().parallelize(_records()).map_values(str).filter(lambda kv: True)
    assert ds.lineage == "parallelize|map_values|filter"


def test_from_store_and_frame(tmp_path):
    store = RawStore()
    store.create_table("t")
    for i in range(10):
        store.put_row("t", f"k{i}", {"d:v": str(i)})
    for ctx in (Context(1, 1), Context(4, 2)):
        ds = ctx.from_store(store, "t")
        assert ds.count() == 10
        assert [k for k, _ in ds.collect()] == [f"k{i}" for i in range(10)]
    path = tmp_path / "f.laf"
    write_frame(Frame(["id", "x"], ["str", "f64"], [["a", "b"], [1.0, 2.0]]), path)
    ds = Context(3, 1).from_frame(path, "id", ["x"])
    assert ds.collect() == [("a", {"id": "a", "x": 1.0}), ("b", {"id": "b", "x": 2.0})]
    with pytest.raises(FileNotFoundError):
        Context().from_frame(tmp_path / "missing.laf", "id")


# --------------------------------------------------------------------------- random pipelines

keys = st.one_of(st.integers(-5, 5), st.sampled_from(["a", "b", "c", "d"]))
values = st.integers(-100, 100)
steps = st.lists(
    st.sampled_from(["map_values", "rekey", "flat_map", "filter", "chunk", "repartition", "join", "left"]),
    max_size=5,
)


def _apply(ds, ctx, ops, other):
    for op in ops:
        if op == "map_values":
            ds = ds.map_values(lambda v: (v * 7 + 3) if isinstance(v, int) else v)
        elif op == "rekey":
            ds = ds.map(lambda kv: (str(hash_key(kv[0]) % 3), kv[1]))
        elif op == "flat_map":
            ds = ds.flat_map(lambda kv: [(kv[0], kv[1]), (("x", str(kv[0])), kv[1])])
        elif op == "filter":
            ds = ds.filter(lambda kv: hash_key(kv[0]) % 2 == 0 or kv[1] is None)
        elif op == "chunk":
            ds = ds.map_partitions(lambda part: [(k, (i, v)) for i, (k, v) in enumerate(part) if i % 2 == 0])
        elif op == "repartition":
            ds = ds.repartition(max(1, ctx.partitions // 2))
        elif op == "join":
            ds = ds.join_by_key(ctx.parallelize(other))
        else:
            ds = ds.join_by_key(ctx.parallelize(other), "left")
    return ds


def hash_key(k):
    return fnv1a64(encode_key(k))


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(keys, values), max_size=40), st.lists(st.tuples(keys, values), max_size=10), steps)
def test_parallelism_invariance(records, other, ops):
    outputs = []
    folds = []
    for ctx in CONTEXTS:
        ds = _apply(ctx.parallelize(records), ctx, ops, other)
        outputs.append(ds.collect())
        folds.append(ds.aggregate_by_key((), lambda a, v: a + (v,), lambda a, b: a + b))
    # "chunk" depends on partition boundaries, so only compare when it is absent
    if "chunk" not in ops:
        assert all(o == outputs[0] for o in outputs)
        assert all(f == folds[0] for f in folds)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(keys, values), max_size=40))
def test_conservation(records):
    for ctx in CONTEXTS:
        ds = ctx.parallelize(records)
        assert ds.count() == len(records)
        assert ds.map_values(lambda v: v).count() == len(records)
        assert ds.filter(lambda kv: kv[1] > 0).count() <= len(records)
