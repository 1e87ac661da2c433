import logging
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence

import numpy as np

from .config import SUM_TOL
from .errors import GraphError
from .models import HypothesisGraph, RejectionResult, ValidationReport

logger = logging.getLogger("ISCI.Graph")


@dataclass(frozen=True)
class GraphState:
    """Current local levels and transition weights while rejecting nodes.

    Arrays keep the full node set; rejected nodes carry level 0 and have
    their rows and columns zeroed.
    """

    levels: np.ndarray
    transitions: np.ndarray
    rejected: frozenset = frozenset()

    @classmethod
    def from_graph(cls, g: HypothesisGraph) -> "GraphState":
        return cls(g.levels_array(), g.matrix(), frozenset())

    @property
    def size(self) -> int:
        return len(self.levels)

    def live(self) -> List[int]:
        return [i for i in range(self.size) if i not in self.rejected]

    def total_level(self) -> float:
        return float(self.levels.sum())


# --- Validation ---

def validate_graph(g: HypothesisGraph) -> ValidationReport:
    levels = g.levels_array()
    G = g.matrix()
    sums = G.sum(axis=1)
    violations = []

    if not (0.0 < g.alpha < 1.0):
        violations.append(f"alpha={g.alpha} outside (0, 1)")
    for j, a in enumerate(levels):
        if a < 0.0:
            violations.append(f"negative initial level for {g.labels[j]}: {a}")
        if a > 1.0:
            violations.append(f"initial level for {g.labels[j]} exceeds 1: {a}")
    if abs(levels.sum() - g.alpha) > SUM_TOL:
        violations.append(f"initial levels sum to {levels.sum()!r}, expected alpha={g.alpha}")
    for i in range(g.size):
        if G[i, i] != 0.0:
            violations.append(f"nonzero diagonal weight g[{g.labels[i]},{g.labels[i]}]={G[i, i]}")
    for i, j in zip(*np.nonzero((G < 0.0) | (G > 1.0))):
        violations.append(f"weight g[{g.labels[i]},{g.labels[j]}]={G[i, j]} outside [0, 1]")
    for i, s in enumerate(sums):
        if s > 1.0 + SUM_TOL:
            violations.append(f"row {g.labels[i]} sums to {s} > 1")

    complete = bool(np.all(np.abs(sums - 1.0) <= SUM_TOL))
    return ValidationReport(
        valid=not violations,
        complete=complete,
        violations=violations,
        row_sums=[float(s) for s in sums]
    )


def require_valid(g: HypothesisGraph) -> ValidationReport:
    report = validate_graph(g)
    if not report.valid:
        raise GraphError("invalid graph: " + "; ".join(report.violations))
    return report


# --- Rejection Algebra ---

def reject_node(s: GraphState, i: int) -> GraphState:
    """Remove node ``i`` and pass its level along the outgoing weights."""
    n = s.size
    if not (0 <= i < n):
        raise GraphError(f"node index {i} out of range for {n} nodes")
    if i in s.rejected:
        raise GraphError(f"node {i} already rejected")

    a, G = s.levels, s.transitions
    g_in = G[:, i]   # g_ji
    g_out = G[i, :]  # g_il

    levels = a + a[i] * g_out
    levels[i] = 0.0

    denom = 1.0 - g_in * g_out  # g_ji * g_ij per row j
    num = G + np.outer(g_in, g_out)
    loop = denom <= SUM_TOL
    with np.errstate(divide="ignore", invalid="ignore"):
        updated = num / np.where(loop, 1.0, denom)[:, None]
    updated[loop, :] = 0.0
    updated[i, :] = 0.0
    updated[:, i] = 0.0
    np.fill_diagonal(updated, 0.0)

    return GraphState(levels, updated, s.rejected | {i})


def reject_all(s: GraphState, nodes: Iterable[int]) -> GraphState:
    for i in nodes:
        s = reject_node(s, i)
    return s


def run_graphical_test(g: HypothesisGraph, pvalues: Sequence[float]) -> RejectionResult:
    require_valid(g)
    p = np.asarray(pvalues, dtype=float)
    if p.shape != (g.size,):
        raise GraphError(f"expected {g.size} p-values, got {p.size}")
    if np.any(np.isnan(p)) or np.any(p < 0.0) or np.any(p > 1.0):
        raise GraphError("p-values must lie in [0, 1]")

    s = GraphState.from_graph(g)
    order = []
    progress = True
    while progress:
        progress = False
        for j in s.live():
            # level-0 nodes fall through unless p_j == 0
            if p[j] <= s.levels[j]:
                s = reject_node(s, j)
                order.append(j)
                progress = True
                break

    return RejectionResult(
        rejected=order,
        levels=[float(v) for v in s.levels],
        labels=[g.labels[j] for j in order]
    )


# --- Graph Builders ---

def rescale_alpha(g: HypothesisGraph, alpha: float) -> HypothesisGraph:
    factor = alpha / g.alpha
    return g.model_copy(update={
        "alpha": alpha,
        "initial_levels": [a * factor for a in g.initial_levels]
    })


def holm_graph(m: int, alpha: float = 0.025, weights: Optional[Sequence[float]] = None,
               labels: Optional[Sequence[str]] = None) -> HypothesisGraph:
    """Weighted Holm procedure: equal passing weights between all nodes."""
    w = np.full(m, 1.0 / m) if weights is None else np.asarray(weights, dtype=float) / np.sum(weights)
    G = np.full((m, m), 1.0 / (m - 1)) if m > 1 else np.zeros((1, 1))
    np.fill_diagonal(G, 0.0)
    return HypothesisGraph(
        labels=list(labels) if labels else [f"H{j + 1}" for j in range(m)],
        alpha=alpha,
        initial_levels=list(alpha * w),
        transitions=G.tolist()
    )


def fallback_graph(weights: Sequence[float], alpha: float = 0.025,
                   labels: Optional[Sequence[str]] = None) -> HypothesisGraph:
    """Chain H1 -> H2 -> ... -> Hm with weight 1; the last row is empty."""
    c = np.asarray(weights, dtype=float)
    m = len(c)
    G = np.zeros((m, m))
    for j in range(m - 1):
        G[j, j + 1] = 1.0
    return HypothesisGraph(
        labels=list(labels) if labels else [f"H{j + 1}" for j in range(m)],
        alpha=alpha,
        initial_levels=list(alpha * c / c.sum()),
        transitions=G.tolist()
    )


def fixed_sequence_graph(m: int, alpha: float = 0.025) -> HypothesisGraph:
    return fallback_graph([1.0] + [0.0] * (m - 1), alpha)


def efficacy_safety_graph(treatments: int = 3, alpha: float = 0.025) -> HypothesisGraph:
    """Efficacy hypotheses gatekeep their safety hypotheses.

    E_j passes everything to S_j; S_j splits its level equally across the
    other treatments' efficacy hypotheses. Safety nodes start at level 0.
    """
    k = treatments
    G = np.zeros((2 * k, 2 * k))
    for j in range(k):
        G[j, k + j] = 1.0
        others = [i for i in range(k) if i != j]
        for i in others:
            G[k + j, i] = 1.0 / len(others)
    return HypothesisGraph(
        labels=[f"E{j + 1}" for j in range(k)] + [f"S{j + 1}" for j in range(k)],
        alpha=alpha,
        initial_levels=[alpha / k] * k + [0.0] * k,
        transitions=G.tolist()
    )
