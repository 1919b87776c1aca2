"""
Enumeration Service
Exhaustive pigeonhole enumeration for tiny grids

Every (row assignment, column assignment) pair is equally likely with
probability 1 / (R^R C^C). Moments over the full enumeration are exact,
which makes this the reference for the closed-form pigeonhole variances.
"""
import logging
from functools import cached_property
from itertools import product
from typing import Iterator, Optional, Tuple

import numpy as np

from core.config import settings
from core.errors import EnumerationCapError
from schemas.resampling import ResampleDraw
from services.dataset import TripletDataset
from services.resampling import draw_from_assignment

logger = logging.getLogger(__name__)


def enumeration_size(R: int, C: int) -> int:
    """Number of equally likely pigeonhole assignments, R^R * C^C"""
    return R**R * C**C


def _check_cap(ds: TripletDataset, cap: Optional[int]) -> int:
    cap = settings.ENUMERATION_CAP if cap is None else cap
    size = enumeration_size(ds.R, ds.C)
    if size > cap:
        raise EnumerationCapError(f"enumeration needs {ds.R}^{ds.R} * {ds.C}^{ds.C} = {size} draws, cap is {cap}")
    return size


def _assignments(n: int) -> np.ndarray:
    """All n^n assignments as an (n^n, n) array, lexicographic order"""
    return np.array(list(product(range(n), repeat=n)), dtype=np.int64).reshape(n**n, n)


def _multiplicities(assign: np.ndarray, n: int) -> np.ndarray:
    """Count matrix: entry [a, k] is how often entity k appears in assignment a"""
    counts = np.zeros((assign.shape[0], n), dtype=np.int64)
    np.add.at(counts, (np.arange(assign.shape[0])[:, None], assign), 1)
    return counts


def enumerate_pigeonhole(ds: TripletDataset, cap: Optional[int] = None) -> Iterator[Tuple[ResampleDraw, float]]:
    """
    Yield every pigeonhole draw once with its probability 1 / (R^R C^C)

    Raises:
        EnumerationCapError: R^R * C^C exceeds the cap
    """
    size = _check_cap(ds, cap)
    prob = 1.0 / size
    col_assignments = _assignments(ds.C)
    for row_assign in _assignments(ds.R):
        for col_assign in col_assignments:
            yield draw_from_assignment(ds, row_assign, col_assign), prob


class PigeonholeEnumerator:
    """
    Vectorised exact moments of T* and N* over all pigeonhole draws

    total_matrix[a, b] is T* for row assignment a and column assignment b;
    count_matrix[a, b] is N*.
    """

    def __init__(self, ds: TripletDataset, cap: Optional[int] = None):
        self.ds = ds
        self.size = _check_cap(ds, cap)
        self.row_counts = _multiplicities(_assignments(ds.R), ds.R)
        self.col_counts = _multiplicities(_assignments(ds.C), ds.C)
        logger.debug(f"Enumerating {self.size} pigeonhole draws for R={ds.R}, C={ds.C}")

    def _bilinear(self, y: np.ndarray) -> np.ndarray:
        left = self.row_counts[:, self.ds.row_idx].astype(np.float64)
        right = self.col_counts[:, self.ds.col_idx].astype(np.float64)
        return (left * y) @ right.T

    @cached_property
    def total_matrix(self) -> np.ndarray:
        return self._bilinear(self.ds.values)

    @cached_property
    def count_matrix(self) -> np.ndarray:
        return self._bilinear(np.ones(self.ds.N))

    def total_of(self, y: np.ndarray) -> np.ndarray:
        """Resampled totals of arbitrary per-record values y"""
        return self._bilinear(np.asarray(y, dtype=np.float64))

    def mean_total(self) -> float:
        return float(self.total_matrix.mean())

    def mean_count(self) -> float:
        return float(self.count_matrix.mean())

    def var_total(self) -> float:
        """Exact Var(T*)"""
        return float(self.total_matrix.var())

    def var_count(self) -> float:
        return float(self.count_matrix.var())

    def probability_empty(self) -> float:
        """Pr(N* = 0)"""
        return float(np.mean(self.count_matrix == 0))

    def delta_ratio_variance(self) -> float:
        """E[(T* - mu_hat N*)^2] / N^2, the linearized variance of T*/N*"""
        mu_hat = float(np.sum(self.ds.values)) / self.ds.N
        resid = self.total_matrix - mu_hat * self.count_matrix
        return float(np.mean(resid * resid)) / self.ds.N**2

    def ratio_values(self) -> np.ndarray:
        """T*/N* over all draws with N* > 0"""
        keep = self.count_matrix > 0
        return self.total_matrix[keep] / self.count_matrix[keep]

    def exact_ratio_mean(self) -> float:
        return float(self.ratio_values().mean())

    def exact_ratio_variance(self) -> float:
        """Exact variance of T*/N* conditioned on N* > 0"""
        return float(self.ratio_values().var())
