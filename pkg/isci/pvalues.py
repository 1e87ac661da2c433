import math
from abc import ABC, abstractmethod
from typing import List, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator
from scipy.special import log_ndtr, ndtr, ndtri

from .errors import ModelError


class MarginalModel(ABC):
    """Contract for a shifted p-value family p(mu) of one hypothesis.

    p must be continuous and strictly increasing in mu with limits 0 and 1,
    and strictly decreasing in the evidence against the hypothesis.
    """

    @abstractmethod
    def pvalue(self, mu: float) -> float: ...

    @abstractmethod
    def log_pvalue(self, mu: float) -> float: ...

    @abstractmethod
    def inverse(self, y: float) -> float: ...

    @abstractmethod
    def shifted(self, offset: float) -> "MarginalModel": ...


class NormalMarginal(BaseModel, MarginalModel):
    """Normal estimate with known standard error: p(mu) = 1 - Phi((est - mu) / se)."""

    estimate: float = Field(..., description="Point estimate theta_hat")
    stderr: float = Field(..., description="Standard error, same units as the estimate")

    model_config = ConfigDict(frozen=True)

    @field_validator("estimate")
    @classmethod
    def finite_estimate(cls, v):
        if not math.isfinite(v):
            raise ValueError("estimate must be finite")
        return v

    @field_validator("stderr")
    @classmethod
    def positive_stderr(cls, v):
        if not (v > 0 and math.isfinite(v)):
            raise ValueError("standard error must be positive and finite")
        return v

    def pvalue(self, mu: float) -> float:
        if math.isnan(mu) or mu == math.inf:
            raise ModelError(f"cannot evaluate p-value at mu={mu}")
        if mu == -math.inf:
            return 0.0
        # 1 - Phi(z) == Phi(-z), accurate in the far tail
        return float(ndtr((mu - self.estimate) / self.stderr))

    def log_pvalue(self, mu: float) -> float:
        if mu == -math.inf:
            return -math.inf
        return float(log_ndtr((mu - self.estimate) / self.stderr))

    def inverse(self, y: float) -> float:
        if math.isnan(y) or y < 0.0 or y >= 1.0:
            raise ModelError(f"p-value {y} outside [0, 1)")
        if y == 0.0:
            return -math.inf
        return float(self.estimate + self.stderr * ndtri(y))

    def shifted(self, offset: float) -> "NormalMarginal":
        return NormalMarginal(estimate=self.estimate + offset, stderr=self.stderr)


def shifted_pvalue(m: MarginalModel, mu: float) -> float:
    return m.pvalue(mu)


def inverse_pvalue(m: MarginalModel, y: float) -> float:
    return m.inverse(y)


def normal_models(estimates: Sequence[float], stderrs: Sequence[float]) -> List[NormalMarginal]:
    if len(estimates) != len(stderrs):
        raise ModelError("estimates and standard errors differ in length")
    return [NormalMarginal(estimate=e, stderr=s) for e, s in zip(estimates, stderrs)]


class ShiftSpec(BaseModel):
    """Offsets delta_j mapping each tested border to 0 (theta' = theta + delta)."""

    offset: List[float] = Field(default_factory=list)

    @field_validator("offset")
    @classmethod
    def finite_offsets(cls, v):
        if not all(math.isfinite(d) for d in v):
            raise ValueError("offsets must be finite")
        return v

    @classmethod
    def none(cls, m: int) -> "ShiftSpec":
        return cls(offset=[0.0] * m)

    def apply(self, models: Sequence[MarginalModel]) -> List[MarginalModel]:
        if len(self.offset) != len(models):
            raise ModelError(f"{len(self.offset)} offsets for {len(models)} models")
        return [mdl.shifted(d) if d else mdl for mdl, d in zip(models, self.offset)]

    def restore(self, mu: Sequence[float]) -> np.ndarray:
        return np.asarray(mu, dtype=float) - np.asarray(self.offset, dtype=float)
