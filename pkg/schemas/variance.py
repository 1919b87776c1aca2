"""
Variance schemas: random-effects components, lambda weights, bounds and diagnostics
"""
from typing import Dict, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field, model_validator

Scalar = Union[float, int]


class CellMap(BaseModel):
    """Values over observed cells, as parallel (row, col, value) arrays of dense indices"""

    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray

    class Config:
        arbitrary_types_allowed = True
        frozen = True

    @model_validator(mode="after")
    def arrays_align(self) -> "CellMap":
        if not (self.rows.shape == self.cols.shape == self.values.shape) or self.rows.ndim != 1:
            raise ValueError("cell map arrays must be one-dimensional and equally long")
        return self

    @classmethod
    def from_dict(cls, cells: Dict[Tuple[int, int], float]) -> "CellMap":
        keys = list(cells)
        return cls(
            rows=np.array([k[0] for k in keys], dtype=np.int64),
            cols=np.array([k[1] for k in keys], dtype=np.int64),
            values=np.array([cells[k] for k in keys], dtype=np.float64),
        )

    @classmethod
    def from_records(cls, row_idx: np.ndarray, col_idx: np.ndarray, values: np.ndarray) -> "CellMap":
        """Per-record values aligned with a dataset's record order"""
        return cls(
            rows=np.asarray(row_idx, dtype=np.int64),
            cols=np.asarray(col_idx, dtype=np.int64),
            values=np.asarray(values, dtype=np.float64),
        )

    def __len__(self) -> int:
        return int(self.values.shape[0])


class VarianceComponents(BaseModel):
    """
    Crossed random-effects variance components

    Scalars denote the homogeneous model. sigma2_a / sigma2_b may be vectors
    over rows / columns; sigma2_e may be a CellMap defined exactly on the
    observed cells.
    """

    sigma2_a: Union[float, np.ndarray] = 0.0
    sigma2_b: Union[float, np.ndarray] = 0.0
    sigma2_e: Union[float, CellMap] = 0.0
    mu: float = 0.0

    class Config:
        arbitrary_types_allowed = True
        frozen = True

    @model_validator(mode="after")
    def variances_non_negative(self) -> "VarianceComponents":
        for name in ("sigma2_a", "sigma2_b"):
            value = getattr(self, name)
            if isinstance(value, np.ndarray):
                if value.ndim != 1:
                    raise ValueError(f"{name} must be a scalar or a vector")
                if not np.all(np.isfinite(value)) or np.any(value < 0):
                    raise ValueError(f"{name} must be finite and non-negative")
            elif not value >= 0:
                raise ValueError(f"{name} must be non-negative")
        e = self.sigma2_e
        if isinstance(e, CellMap):
            if not np.all(np.isfinite(e.values)) or np.any(e.values < 0):
                raise ValueError("sigma2_e must be finite and non-negative")
        elif not e >= 0:
            raise ValueError("sigma2_e must be non-negative")
        return self

    @classmethod
    def homogeneous(cls, sigma2_a: float, sigma2_b: float, sigma2_e: float, mu: float = 0.0) -> "VarianceComponents":
        return cls(sigma2_a=float(sigma2_a), sigma2_b=float(sigma2_b), sigma2_e=float(sigma2_e), mu=float(mu))

    @property
    def is_homogeneous(self) -> bool:
        return not any(isinstance(v, (np.ndarray, CellMap)) for v in (self.sigma2_a, self.sigma2_b, self.sigma2_e))

    def describe(self) -> Dict[str, object]:
        def _brief(v):
            if isinstance(v, CellMap):
                return {"cells": len(v), "min": float(v.values.min()), "max": float(v.values.max())}
            if isinstance(v, np.ndarray):
                return {"length": int(v.size), "min": float(v.min()), "max": float(v.max())}
            return float(v)
        return {"sigma2_a": _brief(self.sigma2_a), "sigma2_b": _brief(self.sigma2_b),
                "sigma2_e": _brief(self.sigma2_e), "mu": self.mu}


class LambdaWeights(BaseModel):
    """
    Exact coefficients of each component in the expected pigeonhole variance

    The error weight is separable: lambda_e(i, j) = e_row[i] + e_col[j] + e_const.
    """

    lambda_a: np.ndarray
    lambda_b: np.ndarray
    e_row: np.ndarray
    e_col: np.ndarray
    e_const: float

    class Config:
        arbitrary_types_allowed = True
        frozen = True

    def lambda_e(self, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
        """Error weights at the given (dense) cells"""
        return self.e_row[rows] + self.e_col[cols] + self.e_const


class VarianceBounds(BaseModel):
    """Enclosing bounds 0 < m <= sigma^2 <= M for each component"""

    m_a: float = Field(..., gt=0)
    M_a: float
    m_b: float = Field(..., gt=0)
    M_b: float
    m_e: float = Field(..., gt=0)
    M_e: float

    @model_validator(mode="after")
    def ordered(self) -> "VarianceBounds":
        if self.m_a > self.M_a or self.m_b > self.M_b or self.m_e > self.M_e:
            raise ValueError("each lower bound must not exceed its upper bound")
        return self

    def as_tuple(self) -> Tuple[float, float, float, float, float, float]:
        return (self.m_a, self.M_a, self.m_b, self.M_b, self.m_e, self.M_e)


class ConsistencyDiagnostics(BaseModel):
    """epsilon_N, rho_N and the explicit upper bound on rho_N"""

    epsilon_n: float
    rho_n: float
    rho_bound: float


class CombinedEstimate(BaseModel):
    """Pigeonhole variance minus twice the naive variance"""

    value: float
    negative: bool
    boundary: bool


class VarianceTable(BaseModel):
    """Closed-form variance quantities for one pattern and component set"""

    v_re: float
    e_re_naive: float
    e_re_pigeonhole_exact: float
    e_re_pigeonhole_approx: float
    e_re_pigeonhole_approx_mu: float
    naive_underestimation_ratio: float
    pigeonhole_relative_gap: float
    approx_valid: bool
    diagnostics: Optional[ConsistencyDiagnostics] = None
    naive_plugin_variance: Optional[float] = None
    pigeonhole_plugin_variance: Optional[float] = None
    combined: Optional[CombinedEstimate] = None
