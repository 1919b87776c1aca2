"""
Tests for the closed-form variance formulas
"""
import numpy as np
import pytest
from hypothesis import given, settings as hsettings
from hypothesis import strategies as st

from core.errors import ShapeMismatchError
from schemas.variance import CellMap, VarianceBounds, VarianceComponents
from services.dataset import TripletDataset, incidence_summary
from services.variance import (
    bounds_from_components,
    combined_estimate,
    consistency_diagnostics,
    contrast_plugin_variance,
    e_re_naive_variance,
    e_re_pigeonhole_variance,
    lambda_weights,
    naive_plugin_variance,
    naive_underestimation_ratio,
    pigeonhole_plugin_variance,
    pigeonhole_relative_gap,
    record_error_variances,
    v_pb_total,
    v_re,
    variance_table,
)


# D1 reference values

def test_d1_random_effects_quantities(d1_summary, unit_components):
    assert v_re(d1_summary, unit_components) == pytest.approx(1.25)
    assert e_re_naive_variance(d1_summary, unit_components) == pytest.approx(0.5)
    assert e_re_pigeonhole_variance(d1_summary, unit_components, "exact") == pytest.approx(0.8125)
    assert e_re_pigeonhole_variance(d1_summary, unit_components, "approx") == pytest.approx(2.75)
    assert e_re_pigeonhole_variance(d1_summary, unit_components, "approx_mu") == pytest.approx(1.75)


def test_d1_lambda_weights(d1_summary):
    lw = lambda_weights(d1_summary)
    np.testing.assert_allclose(lw.lambda_a, [2.0, 2.0])
    np.testing.assert_allclose(lw.lambda_b, [2.0, 2.0])
    np.testing.assert_allclose(lw.lambda_e(np.array([0, 1]), np.array([1, 0])), [1.25, 1.25])


def test_d1_plugin_variances(d1):
    assert naive_plugin_variance(d1) == pytest.approx(0.3125)
    assert v_pb_total(d1) == pytest.approx(10.0)
    assert pigeonhole_plugin_variance(d1) == pytest.approx(0.625)


def test_d1_combined_estimate_sits_on_boundary(d1):
    combined = combined_estimate(pigeonhole_plugin_variance(d1), naive_plugin_variance(d1))
    assert combined.value == 0.0
    assert combined.boundary
    assert not combined.negative


def test_negative_combined_estimate_is_flagged():
    combined = combined_estimate(0.1, 0.2)
    assert combined.value == pytest.approx(-0.3)
    assert combined.negative and not combined.boundary


def test_d1_diagnostics(d1_summary, unit_components):
    bounds = bounds_from_components(d1_summary, unit_components)
    diag = consistency_diagnostics(d1_summary, unit_components, bounds)
    assert diag.rho_n == pytest.approx(0.2)
    assert diag.rho_bound == pytest.approx(0.6)
    assert diag.epsilon_n == 0.5


def test_d1_ratios(d1_summary, unit_components):
    assert naive_underestimation_ratio(d1_summary, unit_components) == pytest.approx(0.4)
    assert pigeonhole_relative_gap(d1_summary, unit_components) == pytest.approx(-0.35)


def test_d1_contrast_plugin_variance(d1_labeled):
    sun, tue = d1_labeled.label_mask("Sun"), d1_labeled.label_mask("Tue")
    assert contrast_plugin_variance(d1_labeled, sun, tue) == pytest.approx(1.0)
    assert contrast_plugin_variance(d1_labeled, sun, sun) == 0.0


def test_variance_table_with_data(d1, d1_summary, unit_components):
    table = variance_table(d1_summary, unit_components, d1)
    assert table.v_re == pytest.approx(1.25)
    assert table.pigeonhole_plugin_variance == pytest.approx(0.625)
    assert table.combined.boundary
    assert not table.approx_valid
    assert table.diagnostics.rho_n == pytest.approx(0.2)


def test_zero_component_skips_diagnostics(d1_summary):
    table = variance_table(d1_summary, VarianceComponents.homogeneous(1.0, 0.0, 1.0))
    assert table.diagnostics is None
    assert table.v_re == pytest.approx((8 + 4) / 16)


def test_bounds_must_be_positive_and_ordered():
    with pytest.raises(ValueError):
        VarianceBounds(m_a=0.0, M_a=1.0, m_b=1.0, M_b=1.0, m_e=1.0, M_e=1.0)
    with pytest.raises(ValueError):
        VarianceBounds(m_a=2.0, M_a=1.0, m_b=1.0, M_b=1.0, m_e=1.0, M_e=1.0)


def test_bounds_must_enclose_components(d1_summary, unit_components):
    tight = VarianceBounds(m_a=2.0, M_a=3.0, m_b=1.0, M_b=1.0, m_e=1.0, M_e=1.0)
    with pytest.raises(ShapeMismatchError):
        consistency_diagnostics(d1_summary, unit_components, tight)


def test_component_shapes_are_checked(d1_summary):
    with pytest.raises(ShapeMismatchError):
        v_re(d1_summary, VarianceComponents(sigma2_a=np.ones(3)))
    with pytest.raises(ShapeMismatchError):
        v_re(d1_summary, VarianceComponents(sigma2_e=CellMap.from_dict({(0, 0): 1.0})))


def test_negative_components_rejected():
    with pytest.raises(ValueError):
        VarianceComponents(sigma2_a=-1.0)
    with pytest.raises(ValueError):
        VarianceComponents(sigma2_b=np.array([1.0, -0.5]))


def test_cell_map_matches_scalar(d1, d1_summary):
    cells = CellMap.from_records(d1.row_idx, d1.col_idx, np.full(4, 1.0))
    hetero = VarianceComponents(sigma2_a=1.0, sigma2_b=1.0, sigma2_e=cells)
    assert e_re_pigeonhole_variance(d1_summary, hetero) == pytest.approx(0.8125)
    np.testing.assert_array_equal(record_error_variances(d1, hetero), np.ones(4))


def test_record_error_variances_follow_record_order(sparse_grid):
    order = np.arange(sparse_grid.N)[::-1]
    cells = CellMap(rows=sparse_grid.row_idx[order], cols=sparse_grid.col_idx[order], values=order.astype(float))
    out = record_error_variances(sparse_grid, VarianceComponents(sigma2_e=cells))
    np.testing.assert_array_equal(out, np.arange(sparse_grid.N, dtype=float))


# Exact expectations through the quadratic-form representation

def _quadratic_matrix(fn, ds: TripletDataset) -> np.ndarray:
    """Q with fn(ds with values x) = x' Q x, recovered by polarization"""
    N = ds.N
    basis = np.eye(N)
    diag = np.array([fn(ds.with_values(basis[i])) for i in range(N)])
    Q = np.diag(diag)
    for i in range(N):
        for j in range(i + 1, N):
            both = fn(ds.with_values(basis[i] + basis[j]))
            Q[i, j] = Q[j, i] = (both - diag[i] - diag[j]) / 2.0
    return Q


def _covariance(ds: TripletDataset, sa: np.ndarray, sb: np.ndarray, se: np.ndarray) -> np.ndarray:
    same_row = ds.row_idx[:, None] == ds.row_idx[None, :]
    same_col = ds.col_idx[:, None] == ds.col_idx[None, :]
    return same_row * sa[ds.row_idx][:, None] + same_col * sb[ds.col_idx][:, None] + np.diag(se)


@st.composite
def heterogeneous_cases(draw):
    R = draw(st.integers(1, 4))
    C = draw(st.integers(1, 4))
    cells = np.array(sorted(draw(st.sets(st.integers(0, R * C - 1), min_size=1, max_size=R * C))))
    ds = TripletDataset.from_arrays(cells // C, cells % C, np.zeros(cells.size))
    positive = st.floats(0.1, 3.0, allow_nan=False)
    sa = np.array(draw(st.lists(positive, min_size=ds.R, max_size=ds.R)))
    sb = np.array(draw(st.lists(positive, min_size=ds.C, max_size=ds.C)))
    se = np.array(draw(st.lists(positive, min_size=ds.N, max_size=ds.N)))
    return ds, sa, sb, se


@hsettings(max_examples=40, deadline=None)
@given(heterogeneous_cases())
def test_expectations_match_quadratic_forms(case):
    ds, sa, sb, se = case
    summary = incidence_summary(ds)
    comp = VarianceComponents(sigma2_a=sa, sigma2_b=sb,
                              sigma2_e=CellMap.from_records(ds.row_idx, ds.col_idx, se))
    sigma = _covariance(ds, sa, sb, se)

    q_pig = _quadratic_matrix(pigeonhole_plugin_variance, ds)
    q_naive = _quadratic_matrix(naive_plugin_variance, ds)
    assert e_re_pigeonhole_variance(summary, comp, "exact") == pytest.approx(np.trace(q_pig @ sigma), rel=1e-9)
    assert e_re_naive_variance(summary, comp) == pytest.approx(np.trace(q_naive @ sigma), rel=1e-9)
    assert v_re(summary, comp) == pytest.approx(sigma.sum() / ds.N**2, rel=1e-12)


@hsettings(max_examples=40, deadline=None)
@given(heterogeneous_cases())
def test_rho_n_respects_explicit_bound(case):
    ds, sa, sb, se = case
    summary = incidence_summary(ds)
    comp = VarianceComponents(sigma2_a=sa, sigma2_b=sb,
                              sigma2_e=CellMap.from_records(ds.row_idx, ds.col_idx, se))
    diag = consistency_diagnostics(summary, comp, bounds_from_components(summary, comp))
    assert 0 <= diag.rho_n <= diag.rho_bound * (1 + 1e-12)


@hsettings(max_examples=40, deadline=None)
@given(
    st.lists(st.floats(-100, 100, allow_nan=False), min_size=8, max_size=8),
    st.floats(-50, 50, allow_nan=False),
    st.floats(0.1, 10, allow_nan=False),
)
def test_plugin_variances_are_translation_and_scale_covariant(values, shift, scale):
    ds = TripletDataset.from_arrays([0, 0, 0, 1, 1, 2, 2, 2], [0, 1, 3, 1, 2, 0, 2, 3], values)
    moved = ds.with_values(np.asarray(values) * scale + shift)
    for fn in (naive_plugin_variance, pigeonhole_plugin_variance):
        assert fn(moved) == pytest.approx(scale**2 * fn(ds), rel=1e-7, abs=1e-7)
