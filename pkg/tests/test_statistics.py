"""
Tests for linear statistics and weighted evaluation
"""
import numpy as np
import pytest
from hypothesis import given, settings as hsettings
from hypothesis import strategies as st

from core.errors import EmptyGroupError
from schemas.resampling import StatisticSpec
from services.dataset import TripletDataset
from services.statistics import (
    evaluate,
    grand_mean,
    group_ratio_means,
    row_col_means,
    totals,
    variance_with_se,
    weighted_grand_mean,
)


def test_d1_totals(d1):
    t = totals(d1)
    assert t.t_x == 10.0
    np.testing.assert_array_equal(t.t_row, [3.0, 7.0])
    np.testing.assert_array_equal(t.t_col, [4.0, 6.0])


def test_d1_means(d1):
    assert grand_mean(d1) == 2.5
    row_means, col_means = row_col_means(d1)
    np.testing.assert_array_equal(row_means, [1.5, 3.5])
    np.testing.assert_array_equal(col_means, [2.0, 3.0])


def test_group_ratio_means(d1_labeled):
    groups = group_ratio_means(d1_labeled, ["Sun", "Tue"])
    assert [g.mean for g in groups] == [2.0, 3.0]
    assert [g.count for g in groups] == [2.0, 2.0]


def test_absent_group_raises_or_returns_none(d1_labeled):
    with pytest.raises(EmptyGroupError, match="Wed"):
        group_ratio_means(d1_labeled, ["Wed"])
    assert group_ratio_means(d1_labeled, ["Wed"], strict=False)[0].mean is None


def test_weights_match_expanded_records(d1):
    weights = np.array([2, 0, 1, 3])
    expanded = np.repeat(d1.values, weights)
    assert weighted_grand_mean(d1, weights) == pytest.approx(expanded.mean())
    assert totals(d1, weights).t_x == pytest.approx(expanded.sum())


def test_zero_weights_leave_mean_undefined(d1):
    assert weighted_grand_mean(d1, np.zeros(4)) is None
    assert evaluate(d1, StatisticSpec.grand_mean(), np.zeros(4)) is None


def test_evaluate_group_statistic_drops_empty_group(d1_labeled):
    spec = StatisticSpec.group_means(["Sun", "Tue"])
    assert evaluate(d1_labeled, spec) == {"Sun": 2.0, "Tue": 3.0}
    only_sun = np.array([1, 0, 1, 0])
    assert evaluate(d1_labeled, spec, only_sun) is None


def test_group_statistic_needs_labels():
    with pytest.raises(ValueError):
        StatisticSpec(kind="group_means")


def test_variance_with_se_of_constant_sample():
    variance, se = variance_with_se(np.full(10, 3.0))
    assert variance == 0.0 and se == 0.0


@hsettings(max_examples=50, deadline=None)
@given(
    st.floats(-1e3, 1e3, allow_nan=False),
    st.floats(0.1, 10.0, allow_nan=False),
)
def test_grand_mean_is_affine_equivariant(shift, scale):
    ds = TripletDataset.from_arrays([0, 0, 1, 2], [0, 1, 1, 0], [1.0, -2.0, 0.5, 4.0])
    moved = ds.with_values(ds.values * scale + shift)
    assert grand_mean(moved) == pytest.approx(grand_mean(ds) * scale + shift, rel=1e-9, abs=1e-9)
