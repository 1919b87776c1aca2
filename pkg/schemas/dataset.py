"""
Dataset schemas: triplet records, parse options and incidence summaries
"""
import math
from typing import Dict, List, Optional

import numpy as np
from pydantic import BaseModel, Field, field_validator


class TripletRecord(BaseModel):
    """One observation (row entity, column entity, value, optional label)"""

    row_key: str
    col_key: str
    value: float
    label: Optional[str] = None

    @field_validator("value")
    @classmethod
    def value_is_finite(cls, v: float) -> float:
        if not math.isfinite(v):
            raise ValueError("value must be finite")
        return v

    class Config:
        frozen = True


class ParseOptions(BaseModel):
    """Options for ingesting delimited triplet text"""

    duplicate_policy: str = Field(default="error", pattern="^(error|first|mean)$")
    delimiter: Optional[str] = Field(default=None, description="None auto-detects comma or tab")
    encoding: str = "utf-8"


class IncidenceSummary(BaseModel):
    """Counts and size-biased ratios of an incidence pattern"""

    n_row: np.ndarray  # n_i., int64, length R
    n_col: np.ndarray  # n_.j, int64, length C
    N: int
    nu_a: float
    nu_b: float
    mu_row: np.ndarray  # mu_i., length R
    mu_col: np.ndarray  # mu_.j, length C
    epsilon_n: float

    class Config:
        arbitrary_types_allowed = True
        frozen = True

    @property
    def R(self) -> int:
        return int(self.n_row.shape[0])

    @property
    def C(self) -> int:
        return int(self.n_col.shape[0])

    def describe(self) -> Dict[str, float]:
        """Scalar fields for result documents"""
        return {
            "N": self.N,
            "R": self.R,
            "C": self.C,
            "nu_a": self.nu_a,
            "nu_b": self.nu_b,
            "epsilon_n": self.epsilon_n,
            "min_n_row": int(self.n_row.min()),
            "max_n_row": int(self.n_row.max()),
            "min_n_col": int(self.n_col.min()),
            "max_n_col": int(self.n_col.max()),
            "max_mu_row": float(self.mu_row.max()),
            "max_mu_col": float(self.mu_col.max()),
        }


class TotalsSummary(BaseModel):
    """Grand, per-row and per-column totals"""

    t_x: float
    t_row: np.ndarray
    t_col: np.ndarray

    class Config:
        arbitrary_types_allowed = True
        frozen = True


class GroupMean(BaseModel):
    """Ratio estimate of the mean response within one label group"""

    label: str
    count: float = Field(..., ge=0)
    mean: Optional[float] = None

    class Config:
        frozen = True


def group_means_to_dict(groups: List[GroupMean]) -> Dict[str, Optional[float]]:
    """Map label to mean"""
    return {g.label: g.mean for g in groups}
