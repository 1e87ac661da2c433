import math
from typing import Callable, Dict, List, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .config import DEFAULT_SEED
from .errors import ModelError

# --- Graph Models ---

class HypothesisGraph(BaseModel):
    labels: List[str] = Field(..., description="Hypothesis identifiers, one per node")
    alpha: float = Field(..., description="Overall one-sided significance level")
    initial_levels: List[float] = Field(..., description="Initial local levels, summing to alpha")
    transitions: List[List[float]] = Field(..., description="Transition matrix g_ij (row i -> column j)")

    model_config = ConfigDict(
        frozen=True,
        json_schema_extra={
            "examples": [
                {
                    "labels": ["H1", "H2"],
                    "alpha": 0.025,
                    "initial_levels": [0.0125, 0.0125],
                    "transitions": [[0.0, 1.0], [1.0, 0.0]]
                }
            ]
        }
    )

    @model_validator(mode="after")
    def check_shape(self):
        m = len(self.labels)
        if m == 0:
            raise ValueError("graph needs at least one hypothesis")
        if len(set(self.labels)) != m:
            raise ValueError("hypothesis labels must be unique")
        if len(self.initial_levels) != m:
            raise ValueError(f"expected {m} initial levels, got {len(self.initial_levels)}")
        if len(self.transitions) != m or any(len(row) != m for row in self.transitions):
            raise ValueError(f"transition matrix must be {m}x{m}")
        values = [self.alpha, *self.initial_levels, *(g for row in self.transitions for g in row)]
        if not all(math.isfinite(v) for v in values):
            raise ValueError("levels and weights must be finite")
        return self

    @property
    def size(self) -> int:
        return len(self.labels)

    def levels_array(self) -> np.ndarray:
        return np.asarray(self.initial_levels, dtype=float)

    def matrix(self) -> np.ndarray:
        return np.asarray(self.transitions, dtype=float)

    def row_sums(self) -> np.ndarray:
        return self.matrix().sum(axis=1)


class ValidationReport(BaseModel):
    valid: bool
    complete: bool
    violations: List[str] = Field(default_factory=list)
    row_sums: List[float] = Field(default_factory=list)


class RejectionResult(BaseModel):
    rejected: List[int] = Field(..., description="Indices of rejected hypotheses, in rejection order")
    levels: List[float] = Field(..., description="Final local levels (0 for rejected nodes)")
    labels: List[str] = Field(default_factory=list, description="Labels of rejected hypotheses")


# --- Information Weights ---

class InformationWeightSpec(BaseModel):
    """Weight functions Q_j(mu) governing the information/power trade-off.

    Exactly one of ``uniform``, ``per_hypothesis`` or ``functions`` is set.
    The default form is Q_j(mu) = q_j ** max(mu, 0); general functions are
    only evaluated for mu > 0 since Q_j is 1 on the null side.
    """

    uniform: Optional[float] = Field(None, description="Single information weight q in (0, 1]")
    per_hypothesis: Optional[List[float]] = Field(None, description="Individual weights q_j in (0, 1]")
    functions: Optional[List[Callable[[float], float]]] = Field(None, exclude=True)

    model_config = ConfigDict(
        frozen=True,
        arbitrary_types_allowed=True,
        json_schema_extra={"examples": [{"uniform": 0.5}, {"per_hypothesis": [0.00063, 0.00063, 1e-10, 1e-10]}]}
    )

    @model_validator(mode="after")
    def check_mode(self):
        given = [v is not None for v in (self.uniform, self.per_hypothesis, self.functions)]
        if sum(given) != 1:
            raise ValueError("exactly one of 'uniform', 'per_hypothesis' or 'functions' must be given")
        qs = [self.uniform] if self.uniform is not None else (self.per_hypothesis or [])
        for q in qs:
            if not (0.0 < q <= 1.0):
                raise ValueError(f"information weight {q} outside (0, 1]")
        return self

    @classmethod
    def of(cls, q: float) -> "InformationWeightSpec":
        return cls(uniform=q)

    @property
    def mode(self) -> str:
        if self.uniform is not None:
            return "uniform"
        if self.per_hypothesis is not None:
            return "per_hypothesis"
        return "functions"

    def check_size(self, m: int) -> None:
        if self.per_hypothesis is not None and len(self.per_hypothesis) != m:
            raise ModelError(f"{len(self.per_hypothesis)} information weights for {m} hypotheses")
        if self.functions is not None and len(self.functions) != m:
            raise ModelError(f"{len(self.functions)} weight functions for {m} hypotheses")

    def q_values(self, m: int) -> np.ndarray:
        if self.uniform is not None:
            return np.full(m, self.uniform)
        return np.asarray(self.per_hypothesis, dtype=float)

    def weight(self, j: int, mu: float) -> float:
        if not mu > 0:
            return 1.0
        if self.functions is not None:
            value = float(self.functions[j](mu))
            if not (0.0 <= value <= 1.0) or math.isnan(value):
                raise ModelError(f"weight function {j} returned {value} at mu={mu}")
            return value
        q = self.uniform if self.uniform is not None else self.per_hypothesis[j]
        return q ** mu

    def log_weight(self, j: int, mu: float) -> float:
        if not mu > 0:
            return 0.0
        if self.functions is not None:
            value = self.weight(j, mu)
            return math.log(value) if value > 0 else -math.inf
        q = self.uniform if self.uniform is not None else self.per_hypothesis[j]
        return mu * math.log(q)

    def weights(self, mus: np.ndarray) -> np.ndarray:
        """Vectorised Q over a (B, m) array of shift vectors."""
        mus = np.asarray(mus, dtype=float)
        pos = np.maximum(mus, 0.0)
        if self.functions is None:
            q = self.q_values(mus.shape[-1])
            return np.power(q, pos)
        out = np.ones_like(mus)
        for j, fn in enumerate(self.functions):
            col = mus[..., j]
            out[..., j] = np.where(col > 0, np.vectorize(fn, otypes=[float])(pos[..., j]), 1.0)
        return out


# --- Bounds ---

class BoundsVector(BaseModel):
    lower: List[float] = Field(..., description="Lower SCI bounds on the original scale (-inf allowed)")
    offsets: List[float] = Field(default_factory=list, description="Shift that maps each tested border to 0")

    @model_validator(mode="after")
    def fill_offsets(self):
        if not self.offsets:
            self.offsets = [0.0] * len(self.lower)
        elif len(self.offsets) != len(self.lower):
            raise ValueError("offsets must match the number of bounds")
        return self

    def tested_scale(self) -> np.ndarray:
        """Bounds in border-at-0 coordinates."""
        return np.asarray(self.lower, dtype=float) + np.asarray(self.offsets, dtype=float)


class GridSpec(BaseModel):
    """Search box for the grid projection. ``lo``/``hi`` may be given per coordinate."""

    lo: Union[float, List[float]] = Field(..., description="Lower box edge, original scale")
    hi: Union[float, List[float]] = Field(..., description="Upper box edge, original scale")
    step: float = Field(1e-3, gt=0.0)

    def axes(self, m: int) -> List[np.ndarray]:
        lo = self.lo if isinstance(self.lo, list) else [self.lo] * m
        hi = self.hi if isinstance(self.hi, list) else [self.hi] * m
        if len(lo) != m or len(hi) != m:
            raise ModelError(f"grid edges need {m} entries")
        out = []
        for a, b in zip(lo, hi):
            if not b > a:
                raise ModelError(f"empty grid interval [{a}, {b}]")
            n = int(round((b - a) / self.step)) + 1
            out.append(a + self.step * np.arange(n))
        return out


class IterationTrace(BaseModel):
    iterates: List[List[float]] = Field(default_factory=list)
    converged: bool = False
    iterations: int = 0
    step_norm: float = math.inf


class BoundsReport(BaseModel):
    method: str
    L: List[float]
    rejected: List[int]
    iterations: int = 0
    converged: bool = True


class EstimatesInput(BaseModel):
    estimates: List[float] = Field(..., description="Point estimates theta_hat_j on the original scale")
    se: List[float] = Field(..., description="Standard errors SE_j")
    shifts: Optional[List[float]] = Field(None, description="Offsets delta_j mapping tested borders to 0")

    model_config = ConfigDict(
        json_schema_extra={"examples": [{"estimates": [3.0, 1.0], "se": [1.0, 1.0]}]}
    )

    @model_validator(mode="after")
    def check_lengths(self):
        if len(self.se) != len(self.estimates):
            raise ValueError("estimates and se must have equal length")
        if self.shifts is not None and len(self.shifts) != len(self.estimates):
            raise ValueError("shifts must match estimates")
        return self


# --- Simulation Models ---

class CurveSpec(BaseModel):
    q_grid: List[float] = Field(..., description="Information weights to sweep")
    hypotheses: Optional[List[str]] = Field(None, description="Labels whose q is varied (default: all)")


class Scenario(BaseModel):
    name: str = "scenario"
    graph: HypothesisGraph
    weights: InformationWeightSpec = Field(..., alias="q")
    true_theta: List[float] = Field(..., alias="theta")
    stderrs: List[float] = Field(..., alias="se")
    correlation: List[List[float]] = Field(..., alias="corr")
    shifts: Optional[List[float]] = None
    n_sims: int = Field(10000, ge=1)
    seed: int = DEFAULT_SEED
    curve: Optional[CurveSpec] = None

    model_config = ConfigDict(populate_by_name=True)

    @field_validator("weights", mode="before")
    @classmethod
    def coerce_weights(cls, v):
        if isinstance(v, (int, float)):
            return {"uniform": v}
        if isinstance(v, list):
            return {"per_hypothesis": v}
        return v

    @field_validator("stderrs")
    @classmethod
    def positive_se(cls, v):
        if any(not (s > 0 and math.isfinite(s)) for s in v):
            raise ValueError("standard errors must be positive and finite")
        return v

    @model_validator(mode="after")
    def check_dimensions(self):
        m = self.graph.size
        if len(self.true_theta) != m or len(self.stderrs) != m:
            raise ValueError(f"theta and se need {m} entries")
        if self.shifts is not None and len(self.shifts) != m:
            raise ValueError(f"shifts need {m} entries")
        corr = np.asarray(self.correlation, dtype=float)
        if corr.shape != (m, m):
            raise ValueError(f"correlation must be {m}x{m}")
        if not np.allclose(corr, corr.T, atol=1e-12) or not np.allclose(np.diag(corr), 1.0, atol=1e-12):
            raise ValueError("correlation must be symmetric with unit diagonal")
        self.weights.check_size(m)
        return self

    def offsets(self) -> np.ndarray:
        if self.shifts is None:
            return np.zeros(self.graph.size)
        return np.asarray(self.shifts, dtype=float)


class MethodSummary(BaseModel):
    power: List[float]
    power_se: List[float]
    mean_bound_finite: List[float]
    mean_bound_finite_se: List[float]
    mean_bound_rejected: List[float]
    mean_bound_rejected_se: List[float]
    pct_finite: List[float] = Field(..., description="Share of replications with a finite bound, in [0, 1]")
    coverage: float
    coverage_se: float
    mean_rejections: float
    mean_rejections_se: float


class ScenarioResult(BaseModel):
    name: str
    labels: List[str]
    n_sims: int
    alpha: float
    methods: Dict[str, MethodSummary]
    failures: int = 0
    nonconverged: int = 0
    flags: List[str] = Field(default_factory=list)


class CurveRow(BaseModel):
    q: float
    mean_bound_rejected: float
    mean_bound_se: float
    mean_rejections: float
    mean_rejections_se: float


# --- CLI Models ---

class CliConfig(BaseModel):
    subcommand: str
    inputs: List[str] = Field(default_factory=list)
    output: Optional[str] = None
    method: str = "isci"
    alpha: Optional[float] = Field(None, gt=0.0, lt=1.0)
    q: Optional[float] = Field(None, gt=0.0, le=1.0)
    eps: Optional[float] = Field(None, gt=0.0)
    max_iter: Optional[int] = Field(None, ge=1)
    seed: Optional[int] = None
    n_sims: Optional[int] = Field(None, ge=1)
    threads: Optional[int] = Field(None, ge=0)


class CliError(BaseModel):
    status: str = Field("error", description="Always 'error'")
    code: int = Field(..., description="Process exit code")
    message: str = Field(..., description="Human readable message")
    errors: Optional[List[dict]] = Field(None, description="Individual problems, if any")
