"""
Linear Statistics Service
Totals, grand mean, row/column means and label-group ratio means

Every function takes optional per-record replication weights. A bootstrap
resample is a multiset of source records, so evaluating with its weights is
the same as evaluating on the realized triplets.
"""
import logging
from typing import Dict, Iterable, List, Optional, Tuple, Union

import numpy as np

from core.errors import EmptyGroupError
from schemas.dataset import GroupMean, TotalsSummary, group_means_to_dict
from schemas.resampling import StatisticSpec
from services.dataset import NO_LABEL, TripletDataset

logger = logging.getLogger(__name__)

StatisticValue = Union[float, Dict[str, float]]


def _weighted_values(ds: TripletDataset, weights: Optional[np.ndarray]) -> np.ndarray:
    if weights is None:
        return ds.values
    return ds.values * weights


def totals(ds: TripletDataset, weights: Optional[np.ndarray] = None) -> TotalsSummary:
    """Grand total T_x with per-row T_xi. and per-column T_x.j totals"""
    wx = _weighted_values(ds, weights)
    return TotalsSummary(
        t_x=float(np.sum(wx)),
        t_row=np.bincount(ds.row_idx, weights=wx, minlength=ds.R),
        t_col=np.bincount(ds.col_idx, weights=wx, minlength=ds.C),
    )


def grand_mean(ds: TripletDataset) -> float:
    """(1/N) sum of X over all records"""
    return float(np.sum(ds.values)) / ds.N


def weighted_grand_mean(ds: TripletDataset, weights: np.ndarray) -> Optional[float]:
    """Ratio T*/N* for a resample; None when the resample is empty"""
    n_star = float(np.sum(weights))
    if n_star <= 0:
        return None
    return float(np.sum(ds.values * weights)) / n_star


def row_col_means(ds: TripletDataset) -> Tuple[np.ndarray, np.ndarray]:
    """Per-row means X-bar_i. and per-column means X-bar_.j"""
    t = totals(ds)
    return t.t_row / ds.n_row, t.t_col / ds.n_col


def group_ratio_means(
    ds: TripletDataset,
    labels: Iterable[str],
    weights: Optional[np.ndarray] = None,
    strict: bool = True,
) -> List[GroupMean]:
    """
    Ratio estimate sum(Z D X) / sum(Z D) for each requested label

    All groups are accumulated in one pass over the records.

    Args:
        ds: dataset carrying labels
        labels: requested labels
        weights: optional replication weights
        strict: raise EmptyGroupError for an empty group instead of
            returning a GroupMean with mean None
    """
    labels = list(labels)
    n_names = len(ds.label_names)
    if ds.label_codes is None:
        num = np.zeros(1)
        den = np.zeros(1)
    else:
        shifted = ds.label_codes - NO_LABEL  # unlabeled records land in slot 0
        w = np.ones(ds.N) if weights is None else weights
        num = np.bincount(shifted, weights=ds.values * w, minlength=n_names + 1)
        den = np.bincount(shifted, weights=w, minlength=n_names + 1)

    out = []
    for label in labels:
        if label in ds.label_names:
            slot = ds.label_names.index(label) - NO_LABEL
            count, total = float(den[slot]), float(num[slot])
        else:
            count, total = 0.0, 0.0
        if count <= 0:
            if strict:
                raise EmptyGroupError(label)
            out.append(GroupMean(label=label, count=0.0, mean=None))
            continue
        out.append(GroupMean(label=label, count=count, mean=total / count))
    return out


def evaluate(
    ds: TripletDataset, spec: StatisticSpec, weights: Optional[np.ndarray] = None
) -> Optional[StatisticValue]:
    """
    Evaluate a named statistic, optionally on a weighted resample

    Returns:
        float for grand_mean, label -> mean for group_means, or None when the
        statistic is undefined (empty resample or an empty group)
    """
    if spec.kind == "grand_mean":
        if weights is None:
            return grand_mean(ds)
        return weighted_grand_mean(ds, weights)

    groups = group_ratio_means(ds, spec.labels, weights=weights, strict=False)
    if any(g.mean is None for g in groups):
        return None
    return group_means_to_dict(groups)


def variance_with_se(x: np.ndarray) -> Tuple[float, float]:
    """Sample variance (divisor n - 1) and its standard error from the fourth central moment"""
    x = np.asarray(x, dtype=np.float64)
    s2 = float(np.var(x, ddof=1))
    m4 = float(np.mean((x - x.mean()) ** 4))
    return s2, float(np.sqrt(max(m4 - s2 * s2, 0.0) / x.size))
