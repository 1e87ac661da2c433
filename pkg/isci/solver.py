import logging
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq

from .config import DEFAULT_EPS, DEFAULT_MAX_ITER
from .dual import batch_local_levels, local_levels, log_transfer_weight
from .errors import ModelError, SolverError
from .graph import require_valid
from .models import (BoundsVector, GridSpec, HypothesisGraph, InformationWeightSpec,
                     IterationTrace)
from .pvalues import MarginalModel, ShiftSpec

logger = logging.getLogger("ISCI.Solver")

ROOT_XTOL = 1e-12
CLAMP_TOL = 1e-9


def _check_inputs(g: HypothesisGraph, models: Sequence[MarginalModel], w: InformationWeightSpec):
    if len(models) != g.size:
        raise ModelError(f"{len(models)} marginal models for {g.size} hypotheses")
    w.check_size(g.size)


def _check_start(mu: Sequence[float]):
    bad = [j for j, x in enumerate(mu) if math.isnan(x) or x == math.inf]
    if bad:
        raise ModelError(f"starting vector entries {bad} are neither finite nor -inf")


def _tested(models: Sequence[MarginalModel], shifts: Optional[Sequence[float]]) -> Tuple[List[MarginalModel], ShiftSpec]:
    spec = ShiftSpec(offset=list(shifts)) if shifts is not None else ShiftSpec.none(len(models))
    return spec.apply(models), spec


# --- Start ---

def starting_value(g: HypothesisGraph, models: Sequence[MarginalModel]) -> np.ndarray:
    """mu_j = min(0, p_j^{-1}(alpha_j)); -inf where alpha_j is 0."""
    out = np.empty(g.size)
    for j, a in enumerate(g.initial_levels):
        out[j] = min(0.0, models[j].inverse(a)) if a > 0 else -math.inf
    return out


def satisfies_start_condition(g: HypothesisGraph, models: Sequence[MarginalModel],
                              w: InformationWeightSpec, mu: Sequence[float], tol: float = 1e-12) -> bool:
    """Checks p_j(mu_j) / omega_j(mu_j) <= nu_j(mu) * alpha for every j."""
    _check_inputs(g, models, w)
    mu = [float(x) for x in mu]
    _check_start(mu)
    nu = local_levels(g, mu, w).nu
    row_sums = g.row_sums()
    for j in range(g.size):
        if mu[j] == -math.inf:
            continue
        if nu[j] <= 0.0:
            return False
        lhs = models[j].log_pvalue(mu[j]) - log_transfer_weight(w, j, mu[j], row_sums[j])
        if lhs > math.log(nu[j] * g.alpha) + tol:
            return False
    return True


# --- Iteration ---

def solve_level(model: MarginalModel, w: InformationWeightSpec, j: int, row_sum: float,
                target: float, xtol: float = ROOT_XTOL) -> float:
    """Unique x with p(x) / omega_j(x) = target, or -inf for a zero target."""
    if not target > 0.0:
        return -math.inf
    target = min(target, float(np.nextafter(1.0, 0.0)))
    p0 = model.pvalue(0.0)
    if p0 > target:
        return model.inverse(target)
    if p0 == target:
        return 0.0

    hi = model.inverse(target)
    if not hi > 0.0:
        return 0.0
    log_target = math.log(target)

    def f(x: float) -> float:
        return model.log_pvalue(x) - log_transfer_weight(w, j, x, row_sum) - log_target

    if f(hi) <= 0.0:
        return hi
    try:
        return brentq(f, 0.0, hi, xtol=xtol, maxiter=500)
    except (ValueError, RuntimeError) as e:
        raise SolverError(f"root search for hypothesis {j} failed on [0, {hi}]: {e}") from e


def iterate_step(g: HypothesisGraph, models: Sequence[MarginalModel], w: InformationWeightSpec,
                 mu_k: Sequence[float]) -> np.ndarray:
    nu = local_levels(g, mu_k, w).nu
    row_sums = g.row_sums()
    return np.array([
        solve_level(models[j], w, j, row_sums[j], nu[j] * g.alpha)
        for j in range(g.size)
    ])


def _step_norm(new: np.ndarray, old: np.ndarray) -> Tuple[float, bool]:
    both = np.isfinite(new) & np.isfinite(old)
    switched = bool(np.any(np.isfinite(new) & ~np.isfinite(old)))
    norm = float(np.sqrt(np.sum((new[both] - old[both]) ** 2))) if both.any() else 0.0
    return norm, switched


def compute_bounds(g: HypothesisGraph, models: Sequence[MarginalModel], w: InformationWeightSpec,
                   eps: Optional[float] = None, max_iter: Optional[int] = None,
                   shifts: Optional[Sequence[float]] = None, start: Optional[Sequence[float]] = None,
                   record: bool = True) -> Tuple[BoundsVector, IterationTrace]:
    """Informative lower bounds by monotone fixed-point iteration.

    ``models`` are on the original scale; ``shifts`` move every tested border
    to 0. ``start`` is an optional starting vector on the tested scale and
    must satisfy the start condition. Bounds come back on the original scale.
    """
    eps = DEFAULT_EPS if eps is None else eps
    max_iter = DEFAULT_MAX_ITER if max_iter is None else max_iter
    require_valid(g)
    _check_inputs(g, models, w)
    tested, spec = _tested(models, shifts)

    if start is None:
        mu = starting_value(g, tested)
    else:
        mu = np.asarray(start, dtype=float)
        if mu.shape != (g.size,):
            raise ModelError(f"starting vector needs {g.size} entries")
        if not satisfies_start_condition(g, tested, w, mu):
            raise SolverError("starting vector violates the start condition")

    iterates = [mu.tolist()] if record else []
    converged = False
    norm = math.inf
    iterations = 0
    with np.errstate(invalid="ignore"):
        for iterations in range(1, max_iter + 1):
            raw = iterate_step(g, tested, w, mu)
            drop = mu - raw
            if np.any(drop > CLAMP_TOL * (1.0 + np.abs(mu))):
                logger.debug(f"Iteration {iterations}: step fell back by {float(np.nanmax(drop)):.3g}; clamped")
            new = np.maximum(raw, mu)
            norm, switched = _step_norm(new, mu)
            mu = new
            if record:
                iterates.append(mu.tolist())
            if not switched and norm < eps:
                converged = True
                break

    if converged:
        logger.debug(f"Bounds converged after {iterations} iterations (step {norm:.3g})")
    else:
        logger.warning(f"No convergence after {iterations} iterations, last step {norm:.3g}")

    lower = spec.restore(mu)
    bounds = BoundsVector(lower=lower.tolist(), offsets=list(spec.offset))
    trace = IterationTrace(iterates=iterates, converged=converged, iterations=iterations, step_norm=norm)
    return bounds, trace


# --- Intersection Test ---

def adjusted_p(g: HypothesisGraph, models: Sequence[MarginalModel], w: InformationWeightSpec,
               mu: Sequence[float]) -> float:
    """Adjusted p-value of H^mu: min over w_j > 0 of p_j(mu_j) / w_j, capped at 1."""
    _check_inputs(g, models, w)
    weights = local_levels(g, mu, w).alpha_mu / g.alpha
    best = 1.0
    for j, wj in enumerate(weights):
        if wj > 0.0:
            best = min(best, models[j].pvalue(float(mu[j])) / wj)
    return best


def brute_force_bounds(g: HypothesisGraph, models: Sequence[MarginalModel], w: InformationWeightSpec,
                       grid: GridSpec, shifts: Optional[Sequence[float]] = None) -> BoundsVector:
    """Grid projection of the confidence region, for checking compute_bounds.

    A grid point mu' stays in the region when no component of the weighted
    Bonferroni test of H^{mu'} rejects. L_j is the smallest j-th coordinate
    among the points that stay, so it is exact up to one grid step. Keep
    m <= 3; the cost grows with the grid size to the power m.
    """
    _check_inputs(g, models, w)
    tested, spec = _tested(models, shifts)
    offsets = np.asarray(spec.offset, dtype=float)
    axes = [axis + d for axis, d in zip(grid.axes(g.size), offsets)]

    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    shape = mesh.shape[:-1]
    points = mesh.reshape(-1, g.size)
    levels = batch_local_levels(g, points, w)

    p_axes = [np.array([tested[j].pvalue(float(x)) for x in axis]) for j, axis in enumerate(axes)]
    pvals = np.stack(np.meshgrid(*p_axes, indexing="ij"), axis=-1).reshape(-1, g.size)
    kept = ~np.any(pvals <= levels, axis=1).reshape(shape)

    lower = np.empty(g.size)
    for j, axis in enumerate(axes):
        others = tuple(k for k in range(g.size) if k != j)
        slices = kept.any(axis=others) if others else kept
        hits = np.flatnonzero(slices)
        if hits.size == 0:
            logger.warning(f"Grid keeps no point; bound for {g.labels[j]} lies above the box")
            lower[j] = axis[-1]
        else:
            if hits[0] == 0:
                logger.warning(f"Grid does not bracket the bound for {g.labels[j]}; it may lie below the box")
            lower[j] = axis[hits[0]]

    return BoundsVector(lower=spec.restore(lower).tolist(), offsets=list(spec.offset))


def induced_test(b: BoundsVector) -> List[int]:
    """Hypotheses rejected by the bounds: tested-scale L_j >= 0."""
    return [j for j, v in enumerate(b.tested_scale()) if v >= 0.0]
