"""
Resampling schemas: statistic selection, bootstrap draws, runs and contrasts
"""
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field, model_validator

ReplicateValue = Union[float, Dict[str, float]]


class StatisticSpec(BaseModel):
    """Named statistic evaluated on each replicate"""

    kind: str = Field(default="grand_mean", pattern="^(grand_mean|group_means)$")
    labels: List[str] = []

    @model_validator(mode="after")
    def labels_for_groups(self) -> "StatisticSpec":
        if self.kind == "group_means" and not self.labels:
            raise ValueError("group_means needs at least one label")
        return self

    @classmethod
    def grand_mean(cls) -> "StatisticSpec":
        return cls(kind="grand_mean")

    @classmethod
    def group_means(cls, labels: List[str]) -> "StatisticSpec":
        return cls(kind="group_means", labels=list(labels))


class NaiveDraw(BaseModel):
    """N source records drawn with replacement"""

    indices: np.ndarray  # drawn record positions, length N
    weights: np.ndarray  # multiplicity of each source record

    class Config:
        arbitrary_types_allowed = True
        frozen = True

    @property
    def size(self) -> int:
        return int(self.indices.shape[0])


class ResampleDraw(BaseModel):
    """
    One pigeonhole realization

    row_assign[i] is the source row r*_i placed at new row i (0-based), and
    col_assign[j] the source column c*_j. weights[l] counts how often source
    record l appears among the realized triplets.
    """

    row_assign: np.ndarray
    col_assign: np.ndarray
    weights: np.ndarray
    n_star: int
    n_tilde_row: np.ndarray  # appearances of each source row among realized triplets
    n_tilde_col: np.ndarray

    class Config:
        arbitrary_types_allowed = True
        frozen = True

    def realized_triplets(self, ds) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """
        Materialize the resampled triplets (i, j, X) for new row i and new column j

        Walks the sampled rows through the dataset's row adjacency and pairs
        each observed cell with every new column drawn from its source column.
        Sized N*, so meant for small data; nothing of size R x C is built.
        """
        indptr, by_row = ds.row_adjacency
        col_order = np.argsort(self.col_assign, kind="stable")
        col_start = np.concatenate(([0], np.cumsum(np.bincount(self.col_assign, minlength=ds.C))))

        new_rows, new_cols, values = [], [], []
        for i, r in enumerate(self.row_assign):
            for rec in by_row[indptr[r]:indptr[r + 1]]:
                c = ds.col_idx[rec]
                cols = col_order[col_start[c]:col_start[c + 1]]
                if cols.size:
                    new_rows.append(np.full(cols.size, i, dtype=np.int64))
                    new_cols.append(cols)
                    values.append(np.full(cols.size, ds.values[rec]))
        if not values:
            empty = np.zeros(0, dtype=np.int64)
            return empty, empty.copy(), np.zeros(0)
        i, j, x = np.concatenate(new_rows), np.concatenate(new_cols), np.concatenate(values)
        order = np.lexsort((j, i))
        return i[order], j[order], x[order]


class BootstrapRun(BaseModel):
    """B replicate values of a statistic under one resampling scheme"""

    scheme: str = Field(..., pattern="^(naive|pigeonhole)$")
    statistic: StatisticSpec
    b_requested: int = Field(..., ge=1)
    seed: int
    original_value: ReplicateValue
    replicate_ids: List[int]
    replicate_values: List[ReplicateValue]
    dropped: int = 0

    @model_validator(mode="after")
    def accounted(self) -> "BootstrapRun":
        if len(self.replicate_values) + self.dropped != self.b_requested:
            raise ValueError("kept plus dropped replicates must equal B")
        if len(self.replicate_ids) != len(self.replicate_values):
            raise ValueError("one replicate id per replicate value")
        return self

    def values_array(self, label: Optional[str] = None) -> np.ndarray:
        """Replicate values as an array; label selects a group for group statistics"""
        if label is None:
            return np.array(self.replicate_values, dtype=np.float64)
        return np.array([v[label] for v in self.replicate_values], dtype=np.float64)

    def _per_output(self, fn) -> ReplicateValue:
        if self.statistic.kind == "grand_mean":
            return fn(self.values_array(), self.original_value)
        return {label: fn(self.values_array(label), self.original_value[label]) for label in self.statistic.labels}

    def empirical_variance(self) -> Optional[ReplicateValue]:
        """Replicate variance with divisor (kept - 1); None with fewer than 2 kept"""
        if len(self.replicate_values) < 2:
            return None
        return self._per_output(lambda v, _: float(np.var(v, ddof=1)))

    def replicate_mean(self) -> Optional[ReplicateValue]:
        if not self.replicate_values:
            return None
        return self._per_output(lambda v, _: float(np.mean(v)))

    def bias(self) -> Optional[ReplicateValue]:
        """mean(replicates) - original"""
        if not self.replicate_values:
            return None
        return self._per_output(lambda v, orig: float(np.mean(v)) - orig)

    def replicate_table(self) -> List[Dict[str, object]]:
        """Plot rows: the original first (replicate 'original'), then one row per kept replicate"""
        ids: List[object] = ["original"] + list(self.replicate_ids)
        values = [self.original_value] + list(self.replicate_values)
        if self.statistic.kind == "grand_mean":
            return [{"replicate": i, "value": v} for i, v in zip(ids, values)]
        return [
            {"replicate": i, "label": label, "mean": v[label]}
            for i, v in zip(ids, values)
            for label in self.statistic.labels
        ]


class ContrastRow(BaseModel):
    """Group means of one replicate (replicate None marks the original data)"""

    replicate: Optional[int]
    mean_a: float
    mean_b: float
    diff: float


class ContrastResult(BaseModel):
    """Bootstrap comparison of two label-group ratio means"""

    label_a: str
    label_b: str
    b_requested: int
    dropped: int
    seed: int
    original_mean_a: float
    original_mean_b: float
    original_diff: float
    replicate_diffs: List[float]
    mean_diff: float
    sd_diff: float
    t_ratio: float
    p_value: float = Field(..., gt=0, le=1)
    degrees_of_freedom: int
    plugin_sd: float
    per_replicate_group_means: List[ContrastRow]
