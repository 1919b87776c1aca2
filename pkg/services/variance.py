"""
Variance Service
Closed-form variances of the mean of crossed data: the random-effects
variance, naive and pigeonhole plug-in bootstrap variances, their
expectations under the random-effects model, and consistency diagnostics.
"""
import logging
from typing import Literal, Optional, Tuple

import numpy as np

from core.config import settings
from core.errors import ShapeMismatchError
from schemas.dataset import IncidenceSummary
from schemas.variance import (
    CellMap,
    CombinedEstimate,
    ConsistencyDiagnostics,
    LambdaWeights,
    VarianceBounds,
    VarianceComponents,
    VarianceTable,
)
from services.dataset import TripletDataset

logger = logging.getLogger(__name__)

Mode = Literal["exact", "approx", "approx_mu"]


# Component shape handling

def entity_vector(value, length: int, name: str) -> np.ndarray:
    """Scalar or per-entity component as a vector of the given length"""
    if isinstance(value, np.ndarray):
        if value.shape != (length,):
            raise ShapeMismatchError(f"{name} has length {value.size}, pattern needs {length}")
        return value.astype(np.float64)
    return np.full(length, float(value))


def _check_cells(cells: CellMap, summary: IncidenceSummary) -> None:
    if len(cells) != summary.N:
        raise ShapeMismatchError(f"sigma2_e covers {len(cells)} cells, pattern has {summary.N}")
    if cells.rows.min() < 0 or cells.rows.max() >= summary.R or cells.cols.min() < 0 or cells.cols.max() >= summary.C:
        raise ShapeMismatchError("sigma2_e refers to cells outside the pattern")
    if not (np.array_equal(np.bincount(cells.rows, minlength=summary.R), summary.n_row)
            and np.array_equal(np.bincount(cells.cols, minlength=summary.C), summary.n_col)):
        raise ShapeMismatchError("sigma2_e cells do not match the observed pattern")


def expand_components(
    summary: IncidenceSummary, comp: VarianceComponents
) -> Tuple[np.ndarray, np.ndarray, Optional[CellMap]]:
    """
    Broadcast components to per-row and per-column vectors

    Returns:
        (sigma2_a vector, sigma2_b vector, sigma2_e cell map or None when scalar)
    """
    sa = entity_vector(comp.sigma2_a, summary.R, "sigma2_a")
    sb = entity_vector(comp.sigma2_b, summary.C, "sigma2_b")
    cells = None
    if isinstance(comp.sigma2_e, CellMap):
        _check_cells(comp.sigma2_e, summary)
        cells = comp.sigma2_e
    return sa, sb, cells


def record_error_variances(ds: TripletDataset, comp: VarianceComponents) -> np.ndarray:
    """sigma2_E aligned with the dataset's record order"""
    if not isinstance(comp.sigma2_e, CellMap):
        return np.full(ds.N, float(comp.sigma2_e))
    cells = comp.sigma2_e
    if len(cells) != ds.N:
        raise ShapeMismatchError(f"sigma2_e covers {len(cells)} cells, dataset has {ds.N}")
    cell_keys = cells.rows * ds.C + cells.cols
    order = np.argsort(cell_keys)
    record_keys = ds.row_idx * ds.C + ds.col_idx
    pos = np.searchsorted(cell_keys[order], record_keys)
    pos = np.minimum(pos, ds.N - 1)
    if not np.array_equal(cell_keys[order][pos], record_keys):
        raise ShapeMismatchError("sigma2_e cells do not match the observed pattern")
    return cells.values[order][pos]


def _error_total(summary: IncidenceSummary, comp: VarianceComponents, cells: Optional[CellMap]) -> float:
    """sum over observed cells of sigma2_E(i, j)"""
    if cells is None:
        return float(comp.sigma2_e) * summary.N
    return float(np.sum(cells.values))


# Random-effects quantities

def v_re(summary: IncidenceSummary, comp: VarianceComponents) -> float:
    """
    True variance of the grand mean under the crossed random-effects model

    (1/N^2) [sum n_i.^2 s2_A(i) + sum n_.j^2 s2_B(j) + sum Z s2_E(i,j)]
    """
    sa, sb, cells = expand_components(summary, comp)
    n_row = summary.n_row.astype(np.float64)
    n_col = summary.n_col.astype(np.float64)
    total = np.dot(n_row * n_row, sa) + np.dot(n_col * n_col, sb) + _error_total(summary, comp, cells)
    return float(total) / summary.N**2


def e_re_naive_variance(summary: IncidenceSummary, comp: VarianceComponents) -> float:
    """Expected naive bootstrap variance under the random-effects model"""
    sa, sb, cells = expand_components(summary, comp)
    N = summary.N
    n_row = summary.n_row.astype(np.float64)
    n_col = summary.n_col.astype(np.float64)
    total = (
        np.dot(sa, n_row * (1.0 - n_row / N))
        + np.dot(sb, n_col * (1.0 - n_col / N))
        + _error_total(summary, comp, cells)
    )
    return float(total) / N**2


def lambda_weights(summary: IncidenceSummary) -> LambdaWeights:
    """Exact weights of each variance component in E_RE of the pigeonhole variance"""
    N, R, C = summary.N, summary.R, summary.C
    nu_a, nu_b = summary.nu_a, summary.nu_b
    n_i = summary.n_row.astype(np.float64)
    n_j = summary.n_col.astype(np.float64)
    mu_i = summary.mu_row
    mu_j = summary.mu_col
    keep_c = 1.0 - 1.0 / C
    keep_r = 1.0 - 1.0 / R

    lambda_a = (
        keep_c * n_i**2 * (1.0 - 2.0 * n_i / N + nu_a / N)
        + keep_r * (n_i - 2.0 * mu_i * n_i + nu_b * n_i**2 / N)
        + n_i * (1.0 - n_i / N) ** 2
        + n_i**2 / N**2 * (N - n_i)
    )
    lambda_b = (
        keep_r * n_j**2 * (1.0 - 2.0 * n_j / N + nu_b / N)
        + keep_c * (n_j - 2.0 * mu_j * n_j + nu_a * n_j**2 / N)
        + n_j * (1.0 - n_j / N) ** 2
        + n_j**2 / N**2 * (N - n_j)
    )
    e_row = keep_c * (1.0 - 2.0 * n_i / N)
    e_col = keep_r * (1.0 - 2.0 * n_j / N)
    e_const = keep_c * nu_a / N + keep_r * nu_b / N + 1.0 - 1.0 / N
    return LambdaWeights(lambda_a=lambda_a, lambda_b=lambda_b, e_row=e_row, e_col=e_col, e_const=e_const)


def e_re_pigeonhole_variance(
    summary: IncidenceSummary, comp: VarianceComponents, mode: Mode = "exact"
) -> float:
    """
    Expected pigeonhole plug-in variance under the random-effects model

    Args:
        summary: incidence summary of the pattern
        comp: variance components
        mode: "exact" uses the lambda weights; "approx" substitutes n^2 + 2n
            and 3; "approx_mu" substitutes n^2 + 2(1 - mu)n and 3

    Returns:
        expected variance of the resampled mean
    """
    sa, sb, cells = expand_components(summary, comp)
    n_i = summary.n_row.astype(np.float64)
    n_j = summary.n_col.astype(np.float64)

    if mode == "exact":
        lw = lambda_weights(summary)
        la, lb = lw.lambda_a, lw.lambda_b
        if cells is None:
            e_sum = float(comp.sigma2_e) * (
                np.dot(n_i, lw.e_row) + np.dot(n_j, lw.e_col) + summary.N * lw.e_const
            )
        else:
            e_sum = np.dot(cells.values, lw.lambda_e(cells.rows, cells.cols))
    elif mode == "approx":
        la = n_i**2 + 2.0 * n_i
        lb = n_j**2 + 2.0 * n_j
        e_sum = 3.0 * _error_total(summary, comp, cells)
    elif mode == "approx_mu":
        la = n_i**2 + 2.0 * (1.0 - summary.mu_row) * n_i
        lb = n_j**2 + 2.0 * (1.0 - summary.mu_col) * n_j
        e_sum = 3.0 * _error_total(summary, comp, cells)
    else:
        raise ValueError(f"unknown mode {mode!r}")

    total = np.dot(sa, la) + np.dot(sb, lb) + e_sum
    return float(total) / summary.N**2


# Plug-in variances computed from data

def naive_plugin_variance(ds: TripletDataset) -> float:
    """Naive bootstrap variance s_x^2 / N with divisor N in s_x^2"""
    centered = ds.values - np.mean(ds.values)
    return float(np.sum(centered * centered)) / ds.N**2


def _second_moment_terms(ds: TripletDataset, y: np.ndarray) -> float:
    """(1 - 1/C) sum T_i.^2 + (1 - 1/R) sum T_.j^2 + sum y^2 for per-record values y"""
    t_row = np.bincount(ds.row_idx, weights=y, minlength=ds.R)
    t_col = np.bincount(ds.col_idx, weights=y, minlength=ds.C)
    return (
        (1.0 - 1.0 / ds.C) * float(np.dot(t_row, t_row))
        + (1.0 - 1.0 / ds.R) * float(np.dot(t_col, t_col))
        + float(np.dot(y, y))
    )


def v_pb_total_of(ds: TripletDataset, y: np.ndarray) -> float:
    """
    Pigeonhole variance of the resampled total of per-record values y

    (1/RC - 1/R - 1/C) T^2 + (1 - 1/C) sum T_i.^2 + (1 - 1/R) sum T_.j^2 + sum y^2
    """
    R, C = ds.R, ds.C
    t_x = float(np.sum(y))
    return (1.0 / (R * C) - 1.0 / R - 1.0 / C) * t_x**2 + _second_moment_terms(ds, y)


def v_pb_total(ds: TripletDataset) -> float:
    """Exact pigeonhole variance of the resampled total T*"""
    return v_pb_total_of(ds, ds.values)


def pigeonhole_plugin_variance(ds: TripletDataset) -> float:
    """
    Delta-method pigeonhole variance of the resampled mean T*/N*

    Equals (1/N^2) E[(T* - mu_hat N*)^2]: the centered values total to
    zero, so only the second-moment terms remain.
    """
    centered = ds.values - float(np.sum(ds.values)) / ds.N
    return _second_moment_terms(ds, centered) / ds.N**2


def contrast_plugin_variance(ds: TripletDataset, mask_a: np.ndarray, mask_b: np.ndarray) -> float:
    """
    Delta-method pigeonhole variance of mean(group a) - mean(group b)

    Linearizes each ratio mean around its original value; records outside
    both groups contribute zero.
    """
    y = np.zeros(ds.N)
    for mask, sign in ((mask_a, 1.0), (mask_b, -1.0)):
        count = int(mask.sum())
        if count == 0:
            continue
        group_mean = float(np.sum(ds.values[mask])) / count
        y[mask] += sign * (ds.values[mask] - group_mean) / count
    return v_pb_total_of(ds, y)


def combined_estimate(v_pigeonhole: float, v_naive: float) -> CombinedEstimate:
    """
    Pigeonhole variance minus twice the naive variance

    Negative results are returned as-is and flagged.
    """
    if v_pigeonhole < 0 or v_naive < 0:
        raise ValueError("plug-in variances must be non-negative")
    value = v_pigeonhole - 2.0 * v_naive
    scale = max(v_pigeonhole, v_naive)
    boundary = abs(value) <= 1e-12 * scale if scale > 0 else True
    if boundary:
        value = 0.0
    negative = value < 0
    if negative:
        logger.warning(f"Combined variance estimate is negative: {value:.6g}")
    return CombinedEstimate(value=value, negative=negative, boundary=boundary)


# Diagnostics

def bounds_from_components(summary: IncidenceSummary, comp: VarianceComponents) -> VarianceBounds:
    """Tightest bounds enclosing the components; fails if any component reaches 0"""
    sa, sb, cells = expand_components(summary, comp)
    se = cells.values if cells is not None else np.array([float(comp.sigma2_e)])
    return VarianceBounds(
        m_a=float(sa.min()), M_a=float(sa.max()),
        m_b=float(sb.min()), M_b=float(sb.max()),
        m_e=float(se.min()), M_e=float(se.max()),
    )


def consistency_diagnostics(
    summary: IncidenceSummary, comp: VarianceComponents, bounds: VarianceBounds
) -> ConsistencyDiagnostics:
    """
    epsilon_N, rho_N and the explicit bound on rho_N

    The bound (M_A + M_B + M_E) / (nu_A m_A + nu_B m_B + m_E) holds whenever
    the bounds enclose the components.
    """
    sa, sb, cells = expand_components(summary, comp)
    se = cells.values if cells is not None else np.array([float(comp.sigma2_e)])
    eps = 1e-12
    if (sa.min() < bounds.m_a * (1 - eps) or sa.max() > bounds.M_a * (1 + eps)
            or sb.min() < bounds.m_b * (1 - eps) or sb.max() > bounds.M_b * (1 + eps)
            or se.min() < bounds.m_e * (1 - eps) or se.max() > bounds.M_e * (1 + eps)):
        raise ShapeMismatchError("bounds do not enclose the supplied variance components")

    n_i = summary.n_row.astype(np.float64)
    n_j = summary.n_col.astype(np.float64)
    e_total = _error_total(summary, comp, cells)
    numerator = (
        np.dot(n_i * (1.0 - summary.mu_row), sa)
        + np.dot(n_j * (1.0 - summary.mu_col), sb)
        + e_total
    )
    denominator = np.dot(n_i * n_i, sa) + np.dot(n_j * n_j, sb) + e_total
    rho_n = float(numerator / denominator)
    rho_bound = (bounds.M_a + bounds.M_b + bounds.M_e) / (
        summary.nu_a * bounds.m_a + summary.nu_b * bounds.m_b + bounds.m_e
    )
    return ConsistencyDiagnostics(epsilon_n=summary.epsilon_n, rho_n=rho_n, rho_bound=rho_bound)


def naive_underestimation_ratio(summary: IncidenceSummary, comp: VarianceComponents) -> float:
    """Expected naive bootstrap variance as a fraction of the true variance"""
    truth = v_re(summary, comp)
    return e_re_naive_variance(summary, comp) / truth if truth > 0 else float("nan")


def pigeonhole_relative_gap(summary: IncidenceSummary, comp: VarianceComponents) -> float:
    """(E_RE pigeonhole variance - V_RE) / V_RE"""
    truth = v_re(summary, comp)
    return (e_re_pigeonhole_variance(summary, comp, "exact") - truth) / truth if truth > 0 else float("nan")


def variance_table(
    summary: IncidenceSummary, comp: VarianceComponents, ds: Optional[TripletDataset] = None
) -> VarianceTable:
    """
    All closed-form quantities for a pattern and component set

    With data, the naive and pigeonhole plug-in variances and their
    combination are added.
    """
    diagnostics = None
    try:
        bounds = bounds_from_components(summary, comp)
        diagnostics = consistency_diagnostics(summary, comp, bounds)
    except ValueError as e:
        logger.info(f"Skipping rho_N diagnostics: {e}")
    plugins = plugin_variances(ds) if ds is not None else {}
    return VarianceTable(
        v_re=v_re(summary, comp),
        e_re_naive=e_re_naive_variance(summary, comp),
        e_re_pigeonhole_exact=e_re_pigeonhole_variance(summary, comp, "exact"),
        e_re_pigeonhole_approx=e_re_pigeonhole_variance(summary, comp, "approx"),
        e_re_pigeonhole_approx_mu=e_re_pigeonhole_variance(summary, comp, "approx_mu"),
        naive_underestimation_ratio=naive_underestimation_ratio(summary, comp),
        pigeonhole_relative_gap=pigeonhole_relative_gap(summary, comp),
        approx_valid=summary.epsilon_n <= settings.APPROX_VALID_EPSILON,
        diagnostics=diagnostics,
        naive_plugin_variance=plugins.get("naive_plugin_variance"),
        pigeonhole_plugin_variance=plugins.get("pigeonhole_plugin_variance"),
        combined=plugins.get("combined"),
    )


def plugin_variances(ds: TripletDataset) -> dict:
    """Naive and pigeonhole plug-in variances of the grand mean and their combination"""
    v_naive = naive_plugin_variance(ds)
    v_pig = pigeonhole_plugin_variance(ds)
    return {
        "naive_plugin_variance": v_naive,
        "pigeonhole_plugin_variance": v_pig,
        "v_pb_total": v_pb_total(ds),
        "combined": combined_estimate(v_pig, v_naive),
    }
