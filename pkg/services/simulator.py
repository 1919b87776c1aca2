"""
Simulator Service
Incidence patterns, crossed random-effects responses, missing-at-random masks
and Monte Carlo expectations of variance functionals on a fixed pattern
"""
import logging
from typing import NamedTuple, Optional, Tuple

import numpy as np
import pandas as pd
from scipy import sparse

from core.config import settings
from core.errors import AllRecordsRemovedError, InfeasibleSpecError
from core.random_streams import StreamTag, derive_seed, stream
from schemas.simulation import GenerativeSpec, IncidenceSpec, MarCheckResult, MonteCarloResult, PatternSkeleton
from schemas.variance import CellMap, VarianceComponents
from services.dataset import TripletDataset, incidence_summary
from services.statistics import variance_with_se
from services.variance import entity_vector, record_error_variances, v_re

logger = logging.getLogger(__name__)

TARGETS = ("naive_plugin_variance", "pigeonhole_plugin_variance", "grand_mean_variance")


# Incidence patterns

def _zipf_probabilities(n: int, alpha: float) -> np.ndarray:
    p = np.arange(1, n + 1, dtype=np.float64) ** (-alpha)
    return p / p.sum()


def _zipf_cells(spec: IncidenceSpec, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    """Distinct cells from Zipf-weighted row and column proposals, first appearance kept"""
    target = spec.target_n
    p_row = _zipf_probabilities(spec.R, spec.alpha_row)
    p_col = _zipf_probabilities(spec.C, spec.alpha_col)
    rng = stream(seed, 0, StreamTag.PATTERN)
    keys = np.zeros(0, dtype=np.int64)
    for _ in range(settings.ZIPF_MAX_PROPOSAL_ROUNDS):
        batch = 2 * (target - keys.size)
        rows = rng.choice(spec.R, size=batch, p=p_row)
        cols = rng.choice(spec.C, size=batch, p=p_col)
        keys = pd.unique(np.concatenate((keys, rows.astype(np.int64) * spec.C + cols)))
        if keys.size >= target:
            keys = keys[:target]
            return keys // spec.C, keys % spec.C
    raise InfeasibleSpecError(
        f"zipf proposals found {keys.size} distinct cells of {target} after "
        f"{settings.ZIPF_MAX_PROPOSAL_ROUNDS} rounds"
    )


def _pattern_cells(spec: IncidenceSpec, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    if spec.kind == "full":
        return np.repeat(np.arange(spec.R), spec.C), np.tile(np.arange(spec.C), spec.R)
    if spec.kind == "bernoulli":
        rng = stream(seed, 0, StreamTag.PATTERN)
        cells = np.flatnonzero(rng.random(spec.R * spec.C) < spec.p)
        if cells.size == 0:
            raise InfeasibleSpecError(f"bernoulli pattern with p={spec.p} realized no cells")
        return cells // spec.C, cells % spec.C
    return _zipf_cells(spec, seed)


def _assign_labels(spec: IncidenceSpec, seed: int, rows: np.ndarray, cols: np.ndarray) -> Optional[list]:
    """One label draw per record, or per row / column shared by all its records"""
    if not spec.labels:
        return None
    weights = np.ones(len(spec.labels)) if spec.label_weights is None else np.asarray(spec.label_weights)
    rng = stream(seed, 0, StreamTag.LABELS)
    p = weights / weights.sum()
    if spec.label_unit == "row":
        codes = rng.choice(len(spec.labels), size=spec.R, p=p)[rows]
    elif spec.label_unit == "col":
        codes = rng.choice(len(spec.labels), size=spec.C, p=p)[cols]
    else:
        codes = rng.choice(len(spec.labels), size=rows.size, p=p)
    return [spec.labels[k] for k in codes]


def _build_skeleton(spec: IncidenceSpec, seed: int) -> TripletDataset:
    rows, cols = _pattern_cells(spec, seed)
    return TripletDataset.from_arrays(
        rows, cols, np.zeros(rows.size),
        labels=_assign_labels(spec, seed, rows, cols),
        row_keys=[f"r{i}" for i in range(spec.R)],
        col_keys=[f"c{j}" for j in range(spec.C)],
    )


def gen_incidence(spec: IncidenceSpec) -> PatternSkeleton:
    """
    Generate an incidence pattern with all values zero

    Rows and columns left without cells are dropped. Zipf patterns whose
    epsilon_N reaches ZIPF_MAX_EPSILON are regenerated with derived seeds.

    Raises:
        InfeasibleSpecError: target_n exceeds R * C or no cells could be realized
    """
    if spec.kind == "zipf_margins" and spec.target_n > spec.R * spec.C:
        raise InfeasibleSpecError(f"target_n={spec.target_n} exceeds R*C={spec.R * spec.C}")

    seed = spec.seed
    ds = _build_skeleton(spec, seed)
    attempts = 1
    if spec.kind == "zipf_margins":
        while incidence_summary(ds).epsilon_n >= settings.ZIPF_MAX_EPSILON and attempts < settings.ZIPF_MAX_RETRIES:
            logger.warning(f"Zipf pattern attempt {attempts} has epsilon_N >= {settings.ZIPF_MAX_EPSILON}; retrying")
            seed = derive_seed(spec.seed, attempts)
            ds = _build_skeleton(spec, seed)
            attempts += 1
    logger.info(f"Generated {spec.kind} pattern: N={ds.N}, R={ds.R}, C={ds.C}, attempts={attempts}")
    return PatternSkeleton(dataset=ds, spec=spec, generation_attempts=attempts)


# Responses

class ResponseParts(NamedTuple):
    """One block of response draws with the entity effects behind them"""

    values: np.ndarray  # (m, N)
    row_effects: np.ndarray  # (m, R)
    col_effects: np.ndarray  # (m, C)
    realized_e: Optional[np.ndarray]  # discrete ratings only: conditional variance per draw and record


class ResponseModel:
    """
    Vectorised response generator for one pattern and generative spec

    draw(rng, m) returns m independent response vectors as an (m, N) array.

    Raises:
        ShapeMismatchError: per-entity components do not match the pattern
    """

    def __init__(self, ds: TripletDataset, gspec: GenerativeSpec):
        self.ds = ds
        self.gspec = gspec
        comp = gspec.comp
        self.sd_a = np.sqrt(entity_vector(comp.sigma2_a, ds.R, "sigma2_a"))
        self.sd_b = np.sqrt(entity_vector(comp.sigma2_b, ds.C, "sigma2_b"))
        self.var_e = record_error_variances(ds, comp)
        self.sd_e = np.sqrt(self.var_e)
        self.location = np.full(ds.N, comp.mu)
        for label, shift in gspec.label_effects.items():
            self.location[ds.label_mask(label)] += shift
        self.clipped = 0

    def _effects(self, rng: np.random.Generator, sd: np.ndarray, m: int) -> np.ndarray:
        if self.gspec.distribution == "uniform":
            return rng.uniform(-1.0, 1.0, size=(m, sd.size)) * (np.sqrt(3.0) * sd)
        return rng.standard_normal((m, sd.size)) * sd

    def draw(self, rng: np.random.Generator, m: int) -> Tuple[np.ndarray, Optional[np.ndarray]]:
        """
        Returns:
            (values, realized error variances); the second item is None
            except for discrete ratings
        """
        parts = self.draw_parts(rng, m)
        return parts.values, parts.realized_e

    def draw_parts(self, rng: np.random.Generator, m: int) -> ResponseParts:
        ds, g = self.ds, self.gspec
        a = self._effects(rng, self.sd_a, m)
        b = self._effects(rng, self.sd_b, m)
        mean = self.location + a[:, ds.row_idx] + b[:, ds.col_idx]
        if g.model == "discrete_ratings":
            x, realized = self._discrete(rng, mean)
            return ResponseParts(x, a, b, realized)

        x = mean + self._effects(rng, self.sd_e, m)
        if g.model == "outer_product":
            for s, t_u, t_v in zip(g.singular_values, g.tau2_u, g.tau2_v):
                u = self._effects(rng, np.full(ds.R, np.sqrt(t_u)), m)
                v = self._effects(rng, np.full(ds.C, np.sqrt(t_v)), m)
                x += s * u[:, ds.row_idx] * v[:, ds.col_idx]
        elif g.model == "tukey":
            x += g.tukey_lambda * a[:, ds.row_idx] * b[:, ds.col_idx]
        return ResponseParts(x, a, b, None)

    def _discrete(self, rng: np.random.Generator, mean: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """
        Ratings on the level set with conditional mean equal to mean

        Mixes the narrowest and the widest two-point distributions bracketing
        the mean so the conditional variance hits sigma2_E when feasible;
        otherwise the nearest feasible variance is used.
        """
        levels = np.asarray(self.gspec.levels)
        lo_all, hi_all = levels[0], levels[-1]
        outside = (mean < lo_all) | (mean > hi_all)
        if outside.any():
            self.clipped += int(outside.sum())
            mean = np.clip(mean, lo_all, hi_all)

        upper = np.searchsorted(levels, mean, side="left")
        hi = levels[upper]
        lo = np.where(hi == mean, hi, levels[np.maximum(upper - 1, 0)])
        v_narrow = (mean - lo) * (hi - mean)
        v_wide = (mean - lo_all) * (hi_all - mean)
        v = np.clip(self.var_e, v_narrow, v_wide)
        spread = v_wide - v_narrow
        w = np.divide(v - v_narrow, spread, out=np.zeros_like(v), where=spread > 0)

        wide = rng.random(mean.shape) < w
        left = np.where(wide, lo_all, lo)
        right = np.where(wide, hi_all, hi)
        gap = right - left
        p_right = np.divide(mean - left, gap, out=np.zeros_like(gap), where=gap > 0)
        x = np.where(rng.random(mean.shape) < p_right, right, left)
        return x, v


def draw_responses(ds: TripletDataset, gspec: GenerativeSpec, rng: np.random.Generator) -> TripletDataset:
    """One response realization on the pattern of ds"""
    model = ResponseModel(ds, gspec)
    values, _ = model.draw(rng, 1)
    if model.clipped:
        logger.warning(f"Clipped {model.clipped} conditional means into the rating range")
    return ds.with_values(values[0])


def effective_components(ds: TripletDataset, gspec: GenerativeSpec) -> VarianceComponents:
    """
    Components with the non-additive part folded into sigma2_E

    outer_product adds sum_l s_l^2 tau2_u[l] tau2_v[l]; tukey adds
    lambda^2 sigma2_A(i) sigma2_B(j).
    """
    comp = gspec.comp
    if gspec.model == "outer_product":
        extra = sum(s * s * t_u * t_v for s, t_u, t_v in zip(gspec.singular_values, gspec.tau2_u, gspec.tau2_v))
        if isinstance(comp.sigma2_e, CellMap):
            e = CellMap(rows=comp.sigma2_e.rows, cols=comp.sigma2_e.cols, values=comp.sigma2_e.values + extra)
        else:
            e = float(comp.sigma2_e) + extra
        return comp.model_copy(update={"sigma2_e": e})
    if gspec.model == "tukey":
        sa = entity_vector(comp.sigma2_a, ds.R, "sigma2_a")
        sb = entity_vector(comp.sigma2_b, ds.C, "sigma2_b")
        extra = gspec.tukey_lambda**2 * sa[ds.row_idx] * sb[ds.col_idx]
        e = CellMap.from_records(ds.row_idx, ds.col_idx, record_error_variances(ds, comp) + extra)
        return comp.model_copy(update={"sigma2_e": e})
    return comp


def simulate_dataset(ispec: IncidenceSpec, gspec: GenerativeSpec) -> TripletDataset:
    """Pattern plus one response draw, both reproducible from ispec.seed"""
    skeleton = gen_incidence(ispec)
    return draw_responses(skeleton.dataset, gspec, stream(ispec.seed, 0, StreamTag.RESPONSES))


# Missing at random

def mar_mask(ds: TripletDataset, keep_prob: float, rng: np.random.Generator) -> TripletDataset:
    """
    Keep each record independently with probability keep_prob

    Raises:
        AllRecordsRemovedError: no record survived
    """
    keep = _mar_keep(ds, keep_prob, rng)
    if keep.all():
        return ds
    return ds.subset(keep)


def _mar_keep(ds: TripletDataset, keep_prob: float, rng: np.random.Generator) -> np.ndarray:
    if not 0 < keep_prob <= 1:
        raise ValueError(f"keep_prob must lie in (0, 1], got {keep_prob}")
    keep = rng.random(ds.N) < keep_prob
    if not keep.any():
        raise AllRecordsRemovedError(f"missing-at-random mask with keep_prob={keep_prob} removed all {ds.N} records")
    return keep


def _restrict_components(ds: TripletDataset, sub: TripletDataset, comp: VarianceComponents,
                         keep: np.ndarray) -> VarianceComponents:
    """Components of the records kept by a mask, re-indexed like ds.subset(keep)"""
    rows_kept = pd.unique(ds.row_idx[keep])
    cols_kept = pd.unique(ds.col_idx[keep])
    update = {}
    if isinstance(comp.sigma2_a, np.ndarray):
        update["sigma2_a"] = comp.sigma2_a[rows_kept]
    if isinstance(comp.sigma2_b, np.ndarray):
        update["sigma2_b"] = comp.sigma2_b[cols_kept]
    if isinstance(comp.sigma2_e, CellMap):
        update["sigma2_e"] = CellMap.from_records(sub.row_idx, sub.col_idx, record_error_variances(ds, comp)[keep])
    return comp.model_copy(update=update)


def mar_variance_check(skeleton: TripletDataset, gspec: GenerativeSpec, keep_prob: float,
                       M: int, seed: int) -> MarCheckResult:
    """
    Variance of the grand mean over M joint (mask, response) draws

    Under missingness independent of the responses it matches the average of
    v_re over the realized masks.
    """
    if M < 2:
        raise ValueError(f"M must be at least 2, got {M}")
    model = ResponseModel(skeleton, gspec)
    comp = effective_components(skeleton, gspec)
    means = np.empty(M)
    v_res = np.empty(M)
    retained = np.empty(M)
    for k in range(M):
        keep = _mar_keep(skeleton, keep_prob, stream(seed, k, StreamTag.MASK))
        values, _ = model.draw(stream(seed, k, StreamTag.RESPONSES), 1)
        means[k] = values[0][keep].mean()
        sub = skeleton if keep.all() else skeleton.subset(keep)
        v_res[k] = v_re(incidence_summary(sub), _restrict_components(skeleton, sub, comp, keep))
        retained[k] = keep.sum()
    variance, se = variance_with_se(means)
    logger.info(f"MAR check: empirical variance {variance:.6g} vs mean v_re {v_res.mean():.6g}")
    return MarCheckResult(
        keep_prob=keep_prob, M=M, seed=seed, empirical_variance=variance, standard_error=se,
        mean_v_re=float(v_res.mean()), v_re_standard_error=float(v_res.std(ddof=1) / np.sqrt(M)),
        mean_retained=float(retained.mean()),
    )


# Monte Carlo expectations

def _one_hot(idx: np.ndarray, n: int) -> sparse.csr_matrix:
    return sparse.csr_matrix((np.ones(idx.size), (idx, np.arange(idx.size))), shape=(n, idx.size))


def _block_functional(ds: TripletDataset, x: np.ndarray, target: str,
                      rows_1h: sparse.csr_matrix, cols_1h: sparse.csr_matrix) -> np.ndarray:
    N, R, C = ds.N, ds.R, ds.C
    means = x.sum(axis=1) / N
    if target == "grand_mean_variance":
        return means
    centered = x - means[:, None]
    sq = (centered * centered).sum(axis=1)
    if target == "naive_plugin_variance":
        return sq / N**2
    t_row = rows_1h @ centered.T  # (R, m)
    t_col = cols_1h @ centered.T
    terms = (1.0 - 1.0 / C) * (t_row * t_row).sum(axis=0) + (1.0 - 1.0 / R) * (t_col * t_col).sum(axis=0) + sq
    return terms / N**2


def monte_carlo_expectation(skeleton: TripletDataset, gspec: GenerativeSpec, target: str,
                            M: int, seed: int) -> MonteCarloResult:
    """
    Mean and standard error of a functional over M response draws

    grand_mean_variance estimates Var(mu_hat) itself, with the standard error
    of a sample variance. Draws are generated in blocks, block k on its own
    stream, so results do not depend on memory limits other than the block
    size.
    """
    if target not in TARGETS:
        raise ValueError(f"unknown Monte Carlo target '{target}'")
    if M < 2:
        raise ValueError(f"M must be at least 2, got {M}")
    ds = skeleton
    model = ResponseModel(ds, gspec)
    block = max(1, min(settings.MC_BLOCK_SIZE, settings.MC_MAX_BLOCK_ELEMENTS // ds.N))
    rows_1h = _one_hot(ds.row_idx, ds.R)
    cols_1h = _one_hot(ds.col_idx, ds.C)

    values = np.empty(M)
    realized_sum = np.zeros(ds.N) if gspec.model == "discrete_ratings" else None
    for k, start in enumerate(range(0, M, block)):
        m = min(block, M - start)
        x, realized = model.draw(stream(seed, k, StreamTag.RESPONSES), m)
        values[start:start + m] = _block_functional(ds, x, target, rows_1h, cols_1h)
        if realized_sum is not None:
            realized_sum += realized.sum(axis=0)
        logger.debug(f"Monte Carlo block {k}: {m} draws")

    if target == "grand_mean_variance":
        estimate, se = variance_with_se(values)
    else:
        estimate, se = float(values.mean()), float(values.std(ddof=1) / np.sqrt(M))
    if model.clipped:
        logger.warning(f"Clipped {model.clipped} conditional means into the rating range")

    effective = None
    if realized_sum is not None:
        effective = CellMap.from_records(ds.row_idx, ds.col_idx, realized_sum / M)
    return MonteCarloResult(
        target=target, estimate=estimate, standard_error=se, M=M, seed=seed,
        clipped_means=model.clipped, effective_sigma2_e=effective,
    )
