"""Reference bound constructions: weighted Bonferroni, fallback and compatible bounds."""
import math
from typing import List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, Field, field_validator

from .errors import GraphError, ModelError
from .graph import require_valid, run_graphical_test
from .models import BoundsVector, HypothesisGraph, InformationWeightSpec
from .pvalues import MarginalModel, ShiftSpec
from .solver import ROOT_XTOL, solve_level


class FallbackSpec(BaseModel):
    weights: List[float] = Field(..., description="Initial weights c_j = alpha_j / alpha, in chain order")
    q: float = Field(..., gt=0.0, le=1.0, description="Information weight")
    alpha: float = Field(0.025, gt=0.0, lt=1.0)

    @field_validator("weights")
    @classmethod
    def check_weights(cls, v):
        if not v:
            raise ValueError("at least one weight is required")
        if any(c < 0.0 for c in v):
            raise ValueError("weights must be non-negative")
        if abs(sum(v) - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {sum(v)!r}, expected 1")
        return v

    @classmethod
    def from_graph(cls, g: HypothesisGraph, q: float) -> "FallbackSpec":
        if not is_fallback_graph(g):
            raise GraphError("graph is not a fallback chain")
        return cls(weights=[a / g.alpha for a in g.initial_levels], q=q, alpha=g.alpha)


def is_fallback_graph(g: HypothesisGraph) -> bool:
    """True when every node passes its whole level to the next one and the last passes nothing."""
    chain = np.eye(g.size, k=1)
    return bool(np.array_equal(g.matrix(), chain))


def bonferroni_bounds(models: Sequence[MarginalModel], levels: Sequence[float],
                      shifts: Optional[Sequence[float]] = None) -> BoundsVector:
    if len(levels) != len(models):
        raise ModelError(f"{len(levels)} levels for {len(models)} models")
    if any(a < 0.0 for a in levels):
        raise ModelError("levels must be non-negative")
    spec = ShiftSpec(offset=list(shifts)) if shifts is not None else ShiftSpec.none(len(models))
    tested = spec.apply(models)
    lower = [mdl.inverse(a) if a > 0 else -math.inf for mdl, a in zip(tested, levels)]
    return BoundsVector(lower=spec.restore(lower).tolist(), offsets=list(spec.offset))


def fallback_nu(spec: FallbackSpec, mu: Sequence[float]) -> np.ndarray:
    """nu_j(mu) for the fallback chain, accumulated along the chain."""
    c = np.asarray(spec.weights, dtype=float)
    if len(mu) != len(c):
        raise ModelError(f"{len(mu)} shifts for {len(c)} hypotheses")
    nu = np.empty(len(c))
    carry = 0.0
    for j in range(len(c)):
        nu[j] = carry + c[j]
        Q = spec.q ** mu[j] if mu[j] > 0 else 1.0
        carry = nu[j] * (1.0 - Q)
    return nu


def fallback_bounds(spec: FallbackSpec, models: Sequence[MarginalModel], eps: Optional[float] = None,
                    shifts: Optional[Sequence[float]] = None) -> BoundsVector:
    """Bounds for the fallback (and fixed-sequence) procedure, one hypothesis at a time.

    L_j only depends on L_1..L_{j-1}, so a single pass along the chain
    reaches the fixed point.
    """
    m = len(spec.weights)
    if len(models) != m:
        raise ModelError(f"{len(models)} marginal models for {m} hypotheses")
    xtol = ROOT_XTOL if eps is None else min(eps, ROOT_XTOL)
    shift = ShiftSpec(offset=list(shifts)) if shifts is not None else ShiftSpec.none(m)
    tested = shift.apply(models)
    w = InformationWeightSpec.of(spec.q)

    mu = np.full(m, -math.inf)
    for j in range(m):
        nu_j = fallback_nu(spec, mu)[j]
        row_sum = 1.0 if j < m - 1 else 0.0
        mu[j] = solve_level(tested[j], w, j, row_sum, nu_j * spec.alpha, xtol=xtol)

    return BoundsVector(lower=shift.restore(mu).tolist(), offsets=list(shift.offset))


def compatible_sci(g: HypothesisGraph, models: Sequence[MarginalModel],
                   shifts: Optional[Sequence[float]] = None) -> BoundsVector:
    """Bounds that exclude the null region exactly for the hypotheses the graphical test rejects.

    Rejected hypotheses get their border as bound. Survivors get the
    quantile of their final local level. When everything is rejected the
    bounds are spent from the initial levels, floored at the border.
    """
    require_valid(g)
    if len(models) != g.size:
        raise ModelError(f"{len(models)} marginal models for {g.size} hypotheses")
    spec = ShiftSpec(offset=list(shifts)) if shifts is not None else ShiftSpec.none(g.size)
    tested = spec.apply(models)

    result = run_graphical_test(g, [mdl.pvalue(0.0) for mdl in tested])
    rejected = set(result.rejected)
    lower = np.empty(g.size)
    if len(rejected) == g.size:
        for j, a in enumerate(g.initial_levels):
            lower[j] = max(0.0, tested[j].inverse(a)) if a > 0 else 0.0
    else:
        for j in range(g.size):
            if j in rejected:
                lower[j] = 0.0
            else:
                level = result.levels[j]
                lower[j] = tested[j].inverse(level) if level > 0 else -math.inf

    return BoundsVector(lower=spec.restore(lower).tolist(), offsets=list(spec.offset))
