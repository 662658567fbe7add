from learnlab.fnv import fnv1a64, hexdigest


def test_published_vectors():
    assert fnv1a64(b"") == 0xCBF29CE484222325
    assert fnv1a64(b"a") == 0xAF63DC4C8601EC8C
    assert fnv1a64(b"foobar") == 0x85944171F73967E8


def test_chaining_equals_concatenation():
    assert fnv1a64(b"bar", fnv1a64(b"foo")) == fnv1a64(b"foobar")


def test_hexdigest_is_fixed_width():
    assert hexdigest(b"") == "cbf29ce484222325"
    assert len(hexdigest(b"x")) == 16
