import json
import math

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from learnlab.evalx import classification_metrics, regression_metrics, report_json, split

finite = st.floats(-1e3, 1e3, allow_nan=False)


def test_hand_computed_fixture():
    r = regression_metrics([1, 2, 3, 4], [1.5, 2, 2.5, 4])
    assert abs(r.mse - 0.125) <= 1e-12
    assert abs(r.mae - 0.25) <= 1e-12
    assert abs(r.r_squared - 0.9) <= 1e-12
    assert r.rmse == math.sqrt(0.125)
    assert r.n == 4


def test_perfect_and_mean_predictors():
    y = [3.0, 1.0, 4.0, 1.0, 5.0]
    r = regression_metrics(y, y)
    assert (r.mse, r.mae, r.r_squared, r.explained_variance) == (0.0, 0.0, 1.0, 1.0)
    mean = regression_metrics(y, [np.mean(y)] * 5)
    assert mean.r_squared == 0.0


def test_constant_target_is_flagged():
    r = regression_metrics([2, 2, 2], [1, 2, 3])
    assert math.isnan(r.r_squared) and not r.r_squared_defined
    d = json.loads(report_json(r))
    assert d["r_squared"] is None and d["r_squared_defined"] is False
    assert "undefined" in r.render()


def test_regression_errors():
    with pytest.raises(ValueError, match="mismatch"):
        regression_metrics([1, 2], [1, 2, 3])
    with pytest.raises(ValueError):
        regression_metrics([1], [1])


def test_confusion_fixture():
    c = classification_metrics([0, 0, 0, 1, 1, 1], [0, 0, 1, 0, 1, 1])
    assert c.confusion == ((2, 1), (1, 2))
    assert c.accuracy == pytest.approx(4 / 6)
    assert c.precision == pytest.approx(2 / 3)
    assert c.recall == pytest.approx(2 / 3)
    assert c.f1 == pytest.approx(2 / 3)
    assert c.n == 6 and c.undefined == ()


def test_classification_edges():
    perfect = classification_metrics([0, 1, 1, 0], [0, 1, 1, 0])
    assert perfect.accuracy == 1.0 and perfect.f1 == 1.0
    zeros = classification_metrics([0, 1, 1], [0, 0, 0])
    assert zeros.recall == 0.0
    assert set(zeros.undefined) == {"precision", "f1"}
    assert "undefined" in zeros.render()
    with pytest.raises(ValueError, match="0 or 1"):
        classification_metrics([0, 2], [0, 1])
    with pytest.raises(ValueError):
        classification_metrics([], [])


def test_split_sizes_and_cover():
    rows = list(range(10))
    train, test = split(rows, 0.7, seed=1)
    assert len(train) == 7 and len(test) == 3
    assert sorted(train + test) == rows
    assert train == sorted(train) and test == sorted(test)


def test_split_determinism():
    rows = list(range(100))
    assert split(rows, 0.7, 5) == split(rows, 0.7, 5)
    assert split(rows, 0.7, 5) != split(rows, 0.7, 6)


@pytest.mark.parametrize("fraction", [0.0, 1.0, -0.1, 1.5])
def test_split_rejects_fraction(fraction):
    with pytest.raises(ValueError):
        split(list(range(10)), fraction)


def test_split_needs_two_rows():
    with pytest.raises(ValueError):
        split([1], 0.5)


@given(st.integers(2, 300), st.floats(0.05, 0.95), st.integers(0, 2**31))
def test_split_is_a_partition(n, fraction, seed):
    train, test = split(list(range(n)), fraction, seed)
    assert set(train).isdisjoint(test) and len(train) + len(test) == n
    assert len(train) == min(n - 1, max(1, math.floor(n * fraction + 0.5)))


pairs = st.lists(st.tuples(finite, finite), min_size=2, max_size=50)


@given(pairs)
def test_r2_at_most_one(ps):
    y, p = zip(*ps)
    r = regression_metrics(y, p)
    assert r.rmse == pytest.approx(math.sqrt(r.mse))
    assert r.mae >= 0
    if r.r_squared_defined:
        assert r.r_squared <= 1.0 + 1e-12


@given(pairs, st.floats(-100, 100))
def test_r2_shift_invariance(ps, c):
    y, p = map(np.array, zip(*ps))
    assume(np.ptp(y) > 1e-3)
    a = regression_metrics(y, p).r_squared
    b = regression_metrics(y + c, p + c).r_squared
    assert b == pytest.approx(a, rel=1e-6, abs=1e-6)


@given(pairs)
def test_explained_variance_matches_r2_when_centered(ps):
    y, p = map(np.array, zip(*ps))
    assume(np.ptp(y) > 1e-3)
    p = p - (p - y).mean()
    r = regression_metrics(y, p)
    assert r.explained_variance == pytest.approx(r.r_squared, rel=1e-6, abs=1e-6)


@given(pairs, st.randoms())
def test_permutation_invariance(ps, rnd):
    y, p = zip(*ps)
    shuffled = list(ps)
    rnd.shuffle(shuffled)
    ys, pss = zip(*shuffled)
    a, b = regression_metrics(y, p), regression_metrics(ys, pss)
    assert b.mse == pytest.approx(a.mse) and b.mae == pytest.approx(a.mae)
    if a.r_squared_defined:
        assert b.r_squared == pytest.approx(a.r_squared, abs=1e-9)


def test_render_tables():
    text = regression_metrics([1, 2, 3, 4], [1.5, 2, 2.5, 4]).render()
    assert "R-squared" in text and "0.900000" in text
    assert "pred 1" in classification_metrics([0, 1], [0, 1]).render()
