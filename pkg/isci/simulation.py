import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Iterable, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from .comparators import compatible_sci
from .config import resolve_threads
from .errors import ISCIError, ScenarioError
from .models import CurveRow, InformationWeightSpec, MethodSummary, Scenario, ScenarioResult
from .pvalues import normal_models
from .solver import compute_bounds

logger = logging.getLogger("ISCI.Simulation")

METHODS = ("isci", "csci")


@contextmanager
def timed(op_name: str) -> Iterator[None]:
    """Logs how long the enclosed block took, or that it failed."""
    start = time.perf_counter()
    try:
        yield
    except Exception as e:
        logger.error(f"Operation {op_name} failed after {(time.perf_counter() - start) * 1000:.2f}ms: {e}")
        raise
    logger.info(f"Operation {op_name} executed in {(time.perf_counter() - start) * 1000:.2f}ms")


# --- Sampling ---

def replication_stream(seed: int, rep: int) -> np.random.Generator:
    """Independent generator for one replication, keyed by (seed, rep)."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(rep,)))


def correlation_factor(s: Scenario) -> np.ndarray:
    try:
        return np.linalg.cholesky(np.asarray(s.correlation, dtype=float))
    except np.linalg.LinAlgError as e:
        raise ScenarioError(f"correlation of scenario {s.name} is not positive definite") from e


def sample_estimates(s: Scenario, rng: np.random.Generator, factor: Optional[np.ndarray] = None) -> np.ndarray:
    """theta_hat = theta + diag(SE) * chol(corr) * z."""
    if factor is None:
        factor = correlation_factor(s)
    z = rng.standard_normal(s.graph.size)
    return np.asarray(s.true_theta) + np.asarray(s.stderrs) * (factor @ z)


# --- Replications ---

@dataclass
class SimulationDraws:
    """Per-replication bounds on the original scale, rows in replication order."""

    isci: np.ndarray
    csci: np.ndarray
    failed: np.ndarray
    nonconverged: np.ndarray


def _run_chunk(args: Tuple[Scenario, int, int, Optional[float], Optional[int]]) -> SimulationDraws:
    s, lo, hi, eps, max_iter = args
    m = s.graph.size
    factor = correlation_factor(s)
    shifts = s.offsets().tolist()
    n = hi - lo
    isci = np.full((n, m), np.nan)
    csci = np.full((n, m), np.nan)
    failed = np.zeros(n, dtype=bool)
    nonconverged = np.zeros(n, dtype=bool)

    for k, rep in enumerate(range(lo, hi)):
        estimates = sample_estimates(s, replication_stream(s.seed, rep), factor)
        models = normal_models(estimates, s.stderrs)
        try:
            bounds, trace = compute_bounds(s.graph, models, s.weights, eps=eps, max_iter=max_iter,
                                           shifts=shifts, record=False)
            isci[k] = bounds.lower
            nonconverged[k] = not trace.converged
        except ISCIError as e:
            logger.warning(f"Replication {rep} of {s.name} failed: {e}")
            failed[k] = True
        csci[k] = compatible_sci(s.graph, models, shifts=shifts).lower

    return SimulationDraws(isci, csci, failed, nonconverged)


def _collect(s: Scenario, chunks: Iterable[SimulationDraws]) -> List[SimulationDraws]:
    parts = []
    done = 0
    for part in chunks:
        parts.append(part)
        done += len(part.failed)
        logger.info(f"{s.name}: {done}/{s.n_sims} replications done")
    return parts


def simulate(s: Scenario, threads: Optional[int] = None, eps: Optional[float] = None,
             max_iter: Optional[int] = None) -> SimulationDraws:
    """Runs every replication; the draws do not depend on the worker count."""
    workers = min(resolve_threads(threads), s.n_sims)
    if workers > 1 and s.weights.mode == "functions":
        logger.warning(f"{s.name}: weight functions cannot be sent to worker processes; running in-process")
        workers = 1
    size = max(1, math.ceil(s.n_sims / (workers * 4)))
    jobs = [(s, lo, min(lo + size, s.n_sims), eps, max_iter) for lo in range(0, s.n_sims, size)]

    if workers == 1:
        parts = _collect(s, map(_run_chunk, jobs))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = _collect(s, pool.map(_run_chunk, jobs))

    return SimulationDraws(
        isci=np.concatenate([p.isci for p in parts]),
        csci=np.concatenate([p.csci for p in parts]),
        failed=np.concatenate([p.failed for p in parts]),
        nonconverged=np.concatenate([p.nonconverged for p in parts])
    )


# --- Aggregation ---

def _mean_se(values: np.ndarray) -> Tuple[float, float]:
    n = len(values)
    if n == 0:
        return math.nan, math.nan
    mean = float(values.mean())
    se = float(values.std(ddof=1) / math.sqrt(n)) if n > 1 else math.nan
    return mean, se


def _freq_se(p: float, n: int) -> float:
    return math.sqrt(p * (1.0 - p) / n) if n > 0 else math.nan


def summarize(bounds: np.ndarray, offsets: np.ndarray, theta: Sequence[float]) -> MethodSummary:
    """Metrics over the replications in ``bounds`` (rows with NaN are dropped)."""
    bounds = bounds[~np.isnan(bounds).any(axis=1)]
    n = len(bounds)
    if n == 0:
        raise ScenarioError("no successful replications to summarize")

    rejected = bounds + offsets >= 0.0
    finite = np.isfinite(bounds)
    power = rejected.mean(axis=0)

    finite_stats = [_mean_se(bounds[finite[:, j], j]) for j in range(bounds.shape[1])]
    rejected_stats = [_mean_se(bounds[rejected[:, j], j]) for j in range(bounds.shape[1])]
    covered = float(np.all(np.asarray(theta) > bounds, axis=1).mean())
    count_mean, count_se = _mean_se(rejected.sum(axis=1).astype(float))

    return MethodSummary(
        power=power.tolist(),
        power_se=[_freq_se(p, n) for p in power],
        mean_bound_finite=[s[0] for s in finite_stats],
        mean_bound_finite_se=[s[1] for s in finite_stats],
        mean_bound_rejected=[s[0] for s in rejected_stats],
        mean_bound_rejected_se=[s[1] for s in rejected_stats],
        pct_finite=finite.mean(axis=0).tolist(),
        coverage=covered,
        coverage_se=_freq_se(covered, n),
        mean_rejections=count_mean,
        mean_rejections_se=count_se
    )


def power_trend_flags(labels: Sequence[str], isci: MethodSummary, csci: MethodSummary) -> List[str]:
    """Hypotheses where ISCI power exceeds CSCI power by more than 2 MC standard errors."""
    flags = []
    for j, label in enumerate(labels):
        gap = isci.power[j] - csci.power[j]
        se = math.hypot(isci.power_se[j], csci.power_se[j])
        if gap > 2.0 * se and gap > 0.0:
            flags.append(f"{label}: ISCI power {isci.power[j]:.4f} exceeds CSCI power {csci.power[j]:.4f}")
    return flags


def run_scenario(s: Scenario, threads: Optional[int] = None, eps: Optional[float] = None,
                 max_iter: Optional[int] = None) -> ScenarioResult:
    with timed(f"simulate[{s.name}]"):
        draws = simulate(s, threads, eps, max_iter)
    offsets = s.offsets()
    methods = {
        "isci": summarize(draws.isci, offsets, s.true_theta),
        "csci": summarize(draws.csci, offsets, s.true_theta)
    }
    flags = power_trend_flags(s.graph.labels, methods["isci"], methods["csci"])
    for flag in flags:
        logger.warning(f"Power trend violation in {s.name}: {flag}")

    failures = int(draws.failed.sum())
    nonconverged = int(draws.nonconverged.sum())
    if failures or nonconverged:
        logger.warning(f"{s.name}: {failures} failed and {nonconverged} non-converged replications")

    return ScenarioResult(
        name=s.name,
        labels=s.graph.labels,
        n_sims=s.n_sims,
        alpha=s.graph.alpha,
        methods=methods,
        failures=failures,
        nonconverged=nonconverged,
        flags=flags
    )


# --- Trade-off Curves ---

def _weights_for(base: Scenario, q: float, selected: Optional[List[int]]) -> InformationWeightSpec:
    if selected is None:
        return InformationWeightSpec.of(q)
    if base.weights.mode == "functions":
        raise ScenarioError("curves over a subset of hypotheses need numeric information weights")
    qs = base.weights.q_values(base.graph.size)
    qs[selected] = q
    return InformationWeightSpec(per_hypothesis=qs.tolist())


def trade_off_curve(base: Scenario, q_grid: Optional[Sequence[float]] = None, threads: Optional[int] = None,
                    eps: Optional[float] = None, max_iter: Optional[int] = None) -> List[CurveRow]:
    """Mean bound of rejected hypotheses and mean number of rejections per q.

    Only the hypotheses named in ``base.curve`` are swept and measured; all
    of them when none are named.
    """
    grid = list(q_grid) if q_grid is not None else (base.curve.q_grid if base.curve else None)
    if not grid:
        raise ScenarioError(f"scenario {base.name} has no q grid")
    names = base.curve.hypotheses if base.curve and base.curve.hypotheses else None
    if names is not None:
        unknown = [h for h in names if h not in base.graph.labels]
        if unknown:
            raise ScenarioError(f"unknown hypotheses in curve: {unknown}")
        selected = [base.graph.labels.index(h) for h in names]
    else:
        selected = None
    columns = selected if selected is not None else list(range(base.graph.size))
    offsets = base.offsets()

    rows = []
    for q in grid:
        s = base.model_copy(update={"weights": _weights_for(base, q, selected), "name": f"{base.name}[q={q:g}]"})
        with timed(f"simulate[{s.name}]"):
            draws = simulate(s, threads, eps, max_iter)
        bounds = draws.isci[~draws.failed][:, columns]
        rejected = bounds + offsets[columns] >= 0.0
        bound_mean, bound_se = _mean_se(bounds[rejected])
        count_mean, count_se = _mean_se(rejected.sum(axis=1).astype(float))
        rows.append(CurveRow(
            q=q,
            mean_bound_rejected=bound_mean,
            mean_bound_se=bound_se,
            mean_rejections=count_mean,
            mean_rejections_se=count_se
        ))
    return rows
