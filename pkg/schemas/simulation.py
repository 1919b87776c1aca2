"""
Simulation schemas: incidence and generative specifications, skeletons and Monte Carlo results
"""
from typing import Dict, List, Optional

from pydantic import BaseModel, Field, model_validator

from schemas.variance import CellMap, VarianceComponents
from services.dataset import TripletDataset


class IncidenceSpec(BaseModel):
    """How to manufacture an incidence pattern"""

    kind: str = Field(default="full", pattern="^(full|bernoulli|zipf_margins)$")
    R: int = Field(..., ge=1)
    C: int = Field(..., ge=1)
    seed: int = 0
    p: float = Field(default=1.0, gt=0, le=1)
    alpha_row: float = Field(default=1.0, gt=0)
    alpha_col: float = Field(default=1.0, gt=0)
    target_n: Optional[int] = Field(default=None, ge=1)
    labels: List[str] = []
    label_weights: Optional[List[float]] = None
    label_unit: str = Field(default="record", pattern="^(record|row|col)$")  # one label draw per record, row or column

    @model_validator(mode="after")
    def kind_parameters(self) -> "IncidenceSpec":
        if self.kind == "zipf_margins" and self.target_n is None:
            raise ValueError("zipf_margins needs target_n")
        if self.label_weights is not None:
            if len(self.label_weights) != len(self.labels):
                raise ValueError("label_weights must match labels")
            if any(w < 0 for w in self.label_weights) or sum(self.label_weights) <= 0:
                raise ValueError("label_weights must be non-negative with a positive sum")
        return self


class GenerativeSpec(BaseModel):
    """
    Response model on a fixed pattern

    additive:         X = mu + a_i + b_j + e_ij
    outer_product:    adds sum_l s_l u_il v_jl with var(u_il) = tau2_u[l], var(v_jl) = tau2_v[l]
    tukey:            adds tukey_lambda * a_i * b_j
    discrete_ratings: X takes values in levels with E(X | a, b) = mu + a_i + b_j
    """

    model: str = Field(default="additive", pattern="^(additive|outer_product|tukey|discrete_ratings)$")
    comp: VarianceComponents
    distribution: str = Field(default="gaussian", pattern="^(gaussian|uniform)$")
    singular_values: List[float] = []
    tau2_u: List[float] = []
    tau2_v: List[float] = []
    tukey_lambda: float = 0.0
    levels: List[float] = []
    label_effects: Dict[str, float] = {}

    class Config:
        arbitrary_types_allowed = True

    @model_validator(mode="after")
    def model_parameters(self) -> "GenerativeSpec":
        if self.model == "outer_product":
            L = len(self.singular_values)
            if L == 0 or len(self.tau2_u) != L or len(self.tau2_v) != L:
                raise ValueError("outer_product needs L singular values and L entries in tau2_u and tau2_v")
            if any(t < 0 for t in self.tau2_u + self.tau2_v):
                raise ValueError("tau2_u and tau2_v must be non-negative")
        if self.model == "discrete_ratings":
            levels = sorted(set(self.levels))
            if len(levels) < 2:
                raise ValueError("discrete_ratings needs at least two distinct levels")
            self.levels = levels
        return self

    @property
    def rank(self) -> int:
        return len(self.singular_values)


class PatternSkeleton(BaseModel):
    """A generated incidence pattern; dataset values are all zero"""

    dataset: TripletDataset
    spec: IncidenceSpec
    generation_attempts: int = 1

    class Config:
        arbitrary_types_allowed = True


class MonteCarloResult(BaseModel):
    """Mean of a functional over M response draws on a fixed pattern"""

    target: str
    estimate: float
    standard_error: float
    M: int
    seed: int
    clipped_means: int = 0
    effective_sigma2_e: Optional[CellMap] = None  # discrete_ratings: realized per-cell variance averaged over draws

    class Config:
        arbitrary_types_allowed = True


class MarCheckResult(BaseModel):
    """Variance of the grand mean over joint (mask, response) draws against the mean of v_re over masks"""

    keep_prob: float
    M: int
    seed: int
    empirical_variance: float
    standard_error: float
    mean_v_re: float
    v_re_standard_error: float
    mean_retained: float

    class Config:
        arbitrary_types_allowed = True
