"""
Result schemas: command documents and verification reports
"""
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field

from core.config import settings


class ResultDocument(BaseModel):
    """One JSON document per command invocation"""

    command: str
    inputs: Dict[str, Any] = {}
    outputs: Dict[str, Any] = {}
    warnings: List[str] = []


class VerifyConfig(BaseModel):
    """Sizes and tolerances for the verification suites"""

    M: int = Field(default=100_000, ge=2)
    M_REGIME: int = Field(default=2_000, ge=2)
    B_REGIME: int = Field(default=2_000, ge=2)
    N_RANDOM_PATTERNS: int = Field(default=5, ge=0)
    N_ENUMERATION_GRIDS: int = Field(default=16, ge=0)
    ZIPF_R: int = Field(default=2000, ge=1)
    ZIPF_C: int = Field(default=500, ge=1)
    ZIPF_ALPHA_ROW: float = Field(default=1.1, gt=0)
    ZIPF_ALPHA_COL: float = Field(default=1.1, gt=0)
    ZIPF_TARGET_N: int = Field(default=10_000, ge=1)
    CONTRAST_DELTA: float = 0.5
    B_CONTRAST: int = Field(default=50, ge=2)
    N_CONTRAST_REPS: int = Field(default=200, ge=0)
    CONTRAST_P_MAX: float = Field(default=0.01, gt=0, le=1)
    CONTRAST_KS_ALPHA: float = Field(default=0.01, gt=0, lt=1)
    # components for the label-contrast checks; labels are drawn per row
    CONTRAST_SIGMA2_A: float = Field(default=0.05, ge=0)
    CONTRAST_SIGMA2_B: float = Field(default=0.05, ge=0)
    CONTRAST_SIGMA2_E: float = Field(default=0.05, ge=0)
    SE_MULTIPLIER: float = Field(default=settings.VERIFY_SE_MULTIPLIER, gt=0)


class CheckResult(BaseModel):
    """Outcome of one verification check"""

    name: str
    status: str = Field(..., pattern="^(pass|fail|inconclusive)$")
    measured: float
    oracle: float
    tolerance: float
    detail: Optional[str] = None


class VerificationReport(BaseModel):
    """All checks of one verify run"""

    suite: str
    seed: int
    checks: List[CheckResult] = []

    @property
    def failed(self) -> List[CheckResult]:
        return [c for c in self.checks if c.status == "fail"]

    def counts(self) -> Dict[str, int]:
        out = {"pass": 0, "fail": 0, "inconclusive": 0}
        for check in self.checks:
            out[check.status] += 1
        return out

    @property
    def status(self) -> str:
        counts = self.counts()
        if counts["fail"]:
            return "fail"
        if counts["inconclusive"]:
            return "inconclusive"
        return "pass"
