import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fedtrial.errors import MetricError
from fedtrial.metrics import roc_auc, spearman


def pair_oracle(scores, labels):
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    wins = sum(1.0 if p > n else 0.5 if p == n else 0.0 for p in pos for n in neg)
    return wins / (len(pos) * len(neg))


def test_perfect_separation():
    assert roc_auc([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0]) == 1.0
    assert roc_auc([0.1, 0.2, 0.8, 0.9], [1, 1, 0, 0]) == 0.0


def test_all_ties():
    assert roc_auc([0.3] * 7, [1, 0, 1, 0, 0, 0, 1]) == 0.5


def test_small_hand_example():
    # positives 0.8, 0.4; negatives 0.4, 0.1 -> pairs 1, 1, 0.5, 1
    assert roc_auc([0.8, 0.4, 0.4, 0.1], [1, 1, 0, 0]) == 0.875


@pytest.mark.parametrize("labels", [[1, 1, 1], [0, 0], [1]])
def test_single_class_is_error(labels):
    with pytest.raises(MetricError):
        roc_auc([0.5] * len(labels), labels)


def test_bad_inputs():
    with pytest.raises(MetricError):
        roc_auc([0.1, 0.2], [1])
    with pytest.raises(MetricError):
        roc_auc([np.nan, 0.2], [1, 0])


@pytest.mark.parametrize("seed", range(5))
def test_matches_pair_oracle_200(seed):
    rng = np.random.default_rng(seed)
    s = rng.random(200)
    y = rng.integers(0, 2, 200)
    assert abs(roc_auc(s, y) - pair_oracle(s, y)) <= 1e-12


def scored_sets(values):
    return st.integers(2, 60).flatmap(lambda n: st.tuples(
        st.lists(values, min_size=n, max_size=n),
        st.lists(st.integers(0, 1), min_size=n, max_size=n),
    )).filter(lambda t: 0 < sum(t[1]) < len(t[1]))


# dyadic grid: 1 - s and the cubic transform are exact, so ties are preserved
grid = st.integers(0, 64).map(lambda k: k / 64)


@settings(max_examples=150, deadline=None)
@given(scored_sets(grid | st.floats(0, 1)))
def test_matches_pair_oracle_with_ties(t):
    s, y = np.array(t[0]), np.array(t[1])
    assert abs(roc_auc(s, y) - pair_oracle(s, y)) <= 1e-12


@settings(max_examples=150, deadline=None)
@given(scored_sets(grid))
def test_auc_properties(t):
    s, y = np.array(t[0]), np.array(t[1])
    a = roc_auc(s, y)
    assert a + roc_auc(1 - s, y) == 1.0
    assert roc_auc(s ** 3 + 2 * s, y) == a
    assert abs(roc_auc(s, 1 - y) - (1 - a)) <= 1e-15


@pytest.mark.parametrize("scores,labels,expected", [
    ([0.9, 0.1, 0.5, 0.5], [1, 0, 1, 0], 0.875),
    ([0.2, 0.2, 0.2, 0.9], [0, 1, 1, 0], 0.25),
])
def test_complement_on_grid_values(scores, labels, expected):
    s = np.array(scores)
    assert roc_auc(s, labels) == expected
    assert roc_auc(1 - s, labels) == 1 - expected


def test_spearman_sign():
    assert spearman([1, 2, 3, 4], [0.1, 0.3, 0.2, 0.9]) > 0
