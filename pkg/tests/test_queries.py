import pytest

from reusable_holdout import InvalidParameterError, StatisticalQuery, empirical_mean


def test_constant_query():
    assert empirical_mean(StatisticalQuery.constant(0.7), [1, 2, 3]) == pytest.approx(0.7)


def test_identity_two_points():
    assert empirical_mean(StatisticalQuery(lambda x: x), [0, 1]) == 0.5


def test_accuracy_query_hand_dataset():
    # threshold classifier x >= 0 -> +1; three of four points are right
    data = [(1.0, 1), (-2.0, -1), (0.5, -1), (-0.1, -1)]
    q = StatisticalQuery.accuracy(lambda x: 1 if x >= 0 else -1)
    assert empirical_mean(q, data) == 0.75


def test_values_are_clipped():
    q = StatisticalQuery(lambda x: x)
    assert empirical_mean(q, [-3.0, 5.0]) == 0.5
    assert q(7.0) == 1.0


def test_table_query():
    q = StatisticalQuery.from_table({"a": 0.2, "b": 1.0})
    assert empirical_mean(q, ["a", "b", "b", "a"]) == pytest.approx(0.6)


def test_empty_dataset_rejected():
    with pytest.raises(InvalidParameterError):
        empirical_mean(StatisticalQuery.constant(0.1), [])
