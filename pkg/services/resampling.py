"""
Resampling Service
Naive and pigeonhole bootstrap engines, bootstrap runs and group contrasts

A resample is kept as per-record replication weights. A pigeonhole draw
places source row r at every new row i with r*_i = r and source column c at
every new column j with c*_j = c, so record (r, c) is realized
row_mult[r] * col_mult[c] times. Computing the weights touches each record
once and never builds anything of size R x C.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional

import numpy as np
from scipy import stats

from core.config import settings
from core.errors import UndefinedStatisticError
from core.random_streams import StreamTag, stream
from schemas.dataset import group_means_to_dict
from schemas.resampling import (
    BootstrapRun,
    ContrastResult,
    ContrastRow,
    NaiveDraw,
    ResampleDraw,
    StatisticSpec,
)
from services.dataset import TripletDataset
from services.statistics import evaluate, group_ratio_means
from services.variance import contrast_plugin_variance

logger = logging.getLogger(__name__)

SMALLEST_P = float(np.nextafter(0.0, 1.0))


def naive_resample(ds: TripletDataset, rng: np.random.Generator) -> NaiveDraw:
    """Draw N records uniformly with replacement from the N source records"""
    indices = rng.integers(0, ds.N, size=ds.N)
    return NaiveDraw(indices=indices, weights=np.bincount(indices, minlength=ds.N))


def pigeonhole_resample(
    ds: TripletDataset, rng_rows: np.random.Generator, rng_cols: Optional[np.random.Generator] = None
) -> ResampleDraw:
    """
    Draw R rows and C columns independently with replacement

    Args:
        ds: source dataset
        rng_rows: generator for the row assignment
        rng_cols: generator for the column assignment (defaults to rng_rows)

    Returns:
        ResampleDraw with per-record weights, N* and the n-tilde counts
    """
    rng_cols = rng_rows if rng_cols is None else rng_cols
    row_assign = rng_rows.integers(0, ds.R, size=ds.R)
    col_assign = rng_cols.integers(0, ds.C, size=ds.C)
    return draw_from_assignment(ds, row_assign, col_assign)


def draw_from_assignment(ds: TripletDataset, row_assign: np.ndarray, col_assign: np.ndarray) -> ResampleDraw:
    """Pigeonhole draw for a given row and column assignment"""
    row_mult = np.bincount(row_assign, minlength=ds.R)
    col_mult = np.bincount(col_assign, minlength=ds.C)
    weights = row_mult[ds.row_idx] * col_mult[ds.col_idx]
    return ResampleDraw(
        row_assign=row_assign,
        col_assign=col_assign,
        weights=weights,
        n_star=int(weights.sum()),
        n_tilde_row=np.bincount(ds.row_idx, weights=weights, minlength=ds.R).astype(np.int64),
        n_tilde_col=np.bincount(ds.col_idx, weights=weights, minlength=ds.C).astype(np.int64),
    )


def replicate_weights(ds: TripletDataset, scheme: str, seed: int, replicate: int) -> np.ndarray:
    """Replication weights of one replicate; a pure function of (seed, replicate)"""
    if scheme == "naive":
        return naive_resample(ds, stream(seed, replicate, StreamTag.NAIVE)).weights
    if scheme == "pigeonhole":
        draw = pigeonhole_resample(
            ds, stream(seed, replicate, StreamTag.ROWS), stream(seed, replicate, StreamTag.COLS)
        )
        return draw.weights
    raise ValueError(f"unknown resampling scheme '{scheme}'")


def _map_replicates(fn, B: int, workers: Optional[int]) -> list:
    """Evaluate fn(b) for b in 0..B-1, results stored by replicate index"""
    workers = settings.BOOTSTRAP_WORKERS if workers is None else workers
    if workers <= 1 or B == 1:
        return [fn(b) for b in range(B)]
    with ThreadPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(fn, range(B)))


def _original_value(ds: TripletDataset, statistic: StatisticSpec):
    if statistic.kind == "group_means":
        groups = group_ratio_means(ds, statistic.labels, strict=True)
        return group_means_to_dict(groups)
    value = evaluate(ds, statistic)
    if value is None:
        raise UndefinedStatisticError(f"statistic '{statistic.kind}' is undefined on the original data")
    return value


def run_bootstrap(
    ds: TripletDataset,
    scheme: str,
    statistic: StatisticSpec,
    B: int,
    seed: int,
    workers: Optional[int] = None,
) -> BootstrapRun:
    """
    Run B bootstrap replicates of a statistic

    Replicates whose statistic is undefined (N* = 0 or an empty group) are
    dropped and counted. Output is identical for any worker count.

    Raises:
        UndefinedStatisticError / EmptyGroupError: the statistic is undefined
            on the original data
    """
    if B < 1:
        raise ValueError(f"B must be at least 1, got {B}")
    original = _original_value(ds, statistic)
    logger.info(f"Running {B} {scheme} replicates of {statistic.kind} (seed={seed})")

    def one(b: int):
        return evaluate(ds, statistic, weights=replicate_weights(ds, scheme, seed, b))

    results = _map_replicates(one, B, workers)
    ids = [b for b, v in enumerate(results) if v is not None]
    dropped = B - len(ids)
    if dropped:
        logger.warning(f"Dropped {dropped} of {B} replicates with an undefined statistic")
    return BootstrapRun(
        scheme=scheme,
        statistic=statistic,
        b_requested=B,
        seed=seed,
        original_value=original,
        replicate_ids=ids,
        replicate_values=[results[b] for b in ids],
        dropped=dropped,
    )


def t_two_sided_p(t: float, df: int) -> float:
    """Two-sided p-value Pr(|t_df| >= |t|), floored at the smallest positive double"""
    if df < 1:
        raise ValueError(f"degrees of freedom must be at least 1, got {df}")
    if np.isnan(t):
        raise ValueError("t statistic is NaN")
    p = 2.0 * float(stats.t.sf(abs(t), df))
    return min(1.0, max(p, SMALLEST_P))


def contrast(
    ds: TripletDataset,
    label_a: str,
    label_b: str,
    B: int,
    seed: int,
    scheme: str = "pigeonhole",
    workers: Optional[int] = None,
) -> ContrastResult:
    """
    Bootstrap t-test of mean(label_a) - mean(label_b)

    Each replicate yields a difference of group ratio means; the t ratio is
    mean_diff / sd_diff over the kept replicates, referred to a t
    distribution with (kept - 1) degrees of freedom.

    Raises:
        EmptyGroupError: a label has no observations in the original data
        UndefinedStatisticError: fewer than two replicates could be evaluated
    """
    if B < 2:
        raise ValueError(f"a contrast needs B >= 2 replicates, got {B}")
    original = group_ratio_means(ds, [label_a, label_b], strict=True)
    orig_a, orig_b = original[0].mean, original[1].mean
    logger.info(f"Contrasting '{label_a}' against '{label_b}' over {B} {scheme} replicates")

    def one(b: int):
        groups = group_ratio_means(
            ds, [label_a, label_b], weights=replicate_weights(ds, scheme, seed, b), strict=False
        )
        if groups[0].mean is None or groups[1].mean is None:
            return None
        return groups[0].mean, groups[1].mean

    results = _map_replicates(one, B, workers)
    rows: List[ContrastRow] = [ContrastRow(replicate=None, mean_a=orig_a, mean_b=orig_b, diff=orig_a - orig_b)]
    diffs = []
    for b, res in enumerate(results):
        if res is None:
            continue
        diff = res[0] - res[1]
        diffs.append(diff)
        rows.append(ContrastRow(replicate=b, mean_a=res[0], mean_b=res[1], diff=diff))
    dropped = B - len(diffs)
    if dropped:
        logger.warning(f"Dropped {dropped} of {B} contrast replicates with an empty group")
    if len(diffs) < 2:
        raise UndefinedStatisticError(f"only {len(diffs)} usable contrast replicates; need at least 2")

    d = np.asarray(diffs)
    mean_diff = float(np.mean(d))
    sd_diff = float(np.std(d, ddof=1))
    df = len(diffs) - 1
    if sd_diff > 0:
        t_ratio = mean_diff / sd_diff
        p_value = t_two_sided_p(t_ratio, df)
    elif mean_diff == 0:
        t_ratio, p_value = 0.0, 1.0
    else:
        t_ratio = float(np.copysign(np.inf, mean_diff))
        p_value = SMALLEST_P

    plugin_var = contrast_plugin_variance(ds, ds.label_mask(label_a), ds.label_mask(label_b))
    return ContrastResult(
        label_a=label_a,
        label_b=label_b,
        b_requested=B,
        dropped=dropped,
        seed=seed,
        original_mean_a=orig_a,
        original_mean_b=orig_b,
        original_diff=orig_a - orig_b,
        replicate_diffs=diffs,
        mean_diff=mean_diff,
        sd_diff=sd_diff,
        t_ratio=t_ratio,
        p_value=p_value,
        degrees_of_freedom=df,
        plugin_sd=float(np.sqrt(max(plugin_var, 0.0))),
        per_replicate_group_means=rows,
    )
