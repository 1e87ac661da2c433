"""Dual graphs G^mu and the local levels alpha^mu of the intersection tests.

For a shift vector mu every hypothesis H_j is represented by its shifted
version H_j^{mu_j}. Nodes with mu_j <= 0 are relabelled in place and lose
their outgoing arrows; nodes with mu_j > 0 keep H_j and gain an arrow to a
new level-0 node H_j^{mu_j}. Rejecting every remaining original H_j leaves
the levels alpha_j^mu on the shifted nodes.
"""
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from .config import SUM_TOL
from .graph import GraphState, reject_all
from .models import HypothesisGraph, InformationWeightSpec

# transfer weights below this are treated as underflowed when recovering nu
_TINY = 1e-280


@dataclass(frozen=True)
class LocalLevels:
    alpha_mu: np.ndarray
    nu: np.ndarray


@dataclass(frozen=True)
class DualGraph:
    graph: HypothesisGraph
    shifted_nodes: List[int]  # node index of H_j^{mu_j}, per base hypothesis j
    null_nodes: List[int]     # original H_j still present (mu_j > 0)
    origin: List[int]         # base hypothesis of every node


def transfer_weight(w: InformationWeightSpec, j: int, mu: float, row_sum: float) -> float:
    """Weight of the arrow H_j -> H_j^{mu_j}, adjusted for incomplete rows."""
    Q = w.weight(j, mu)
    return 1.0 - (1.0 - Q) * min(row_sum, 1.0)


def log_transfer_weight(w: InformationWeightSpec, j: int, mu: float, row_sum: float) -> float:
    if not mu > 0:
        return 0.0
    if row_sum >= 1.0 - SUM_TOL:
        return w.log_weight(j, mu)
    Q = w.weight(j, mu)
    return math.log((1.0 - row_sum) + Q * row_sum)


def _dual_state(levels: np.ndarray, G: np.ndarray, row_sums: np.ndarray,
                mu: Sequence[float], w: InformationWeightSpec):
    m = len(levels)
    positive = [j for j in range(m) if mu[j] > 0]
    n = m + len(positive)

    A = np.zeros(n)
    A[:m] = levels
    T = np.zeros((n, n))
    shifted = list(range(m))
    for k, j in enumerate(positive):
        node = m + k
        shifted[j] = node
        Q = w.weight(j, mu[j])
        T[j, :m] = G[j, :] * (1.0 - Q)
        T[j, node] = 1.0 - (1.0 - Q) * min(row_sums[j], 1.0)
    return GraphState(A, T, frozenset()), shifted, positive


def build_dual_graph(g: HypothesisGraph, mu: Sequence[float], w: InformationWeightSpec) -> DualGraph:
    w.check_size(g.size)
    mu = [float(x) for x in mu]
    state, shifted, positive = _dual_state(g.levels_array(), g.matrix(), g.row_sums(), mu, w)

    labels = [f"{g.labels[j]}^{mu[j]:g}" for j in range(g.size)]
    origin = list(range(g.size))
    for j in positive:
        labels[j] = g.labels[j]
        labels.append(f"{g.labels[j]}^{mu[j]:g}")
        origin.append(j)

    graph = HypothesisGraph(
        labels=labels,
        alpha=g.alpha,
        initial_levels=state.levels.tolist(),
        transitions=state.transitions.tolist()
    )
    return DualGraph(graph=graph, shifted_nodes=shifted, null_nodes=positive, origin=origin)


def local_levels(g: HypothesisGraph, mu: Sequence[float], w: InformationWeightSpec,
                 order: Optional[Sequence[int]] = None) -> LocalLevels:
    """Levels alpha_j^mu and factors nu_j(mu) = alpha_j^mu / (alpha * omega_j(mu_j)).

    ``order`` optionally fixes the sequence in which the original nodes with
    mu_j > 0 are rejected; the result does not depend on it.
    """
    w.check_size(g.size)
    row_sums = g.row_sums()
    start, shifted, positive = _dual_state(g.levels_array(), g.matrix(), row_sums, mu, w)
    if order is not None:
        if sorted(order) != sorted(positive):
            raise ValueError("rejection order must cover exactly the nodes with mu_j > 0")
        positive = list(order)

    final = reject_all(start, positive)
    alpha_mu = final.levels[shifted].copy()

    nu = np.empty(g.size)
    for j in range(g.size):
        omega = transfer_weight(w, j, mu[j], row_sums[j])
        if omega > _TINY:
            nu[j] = alpha_mu[j] / (g.alpha * omega)
        else:
            # the level H_j holds right before its own rejection
            others = [i for i in positive if i != j]
            nu[j] = reject_all(start, others).levels[j] / g.alpha
    return LocalLevels(alpha_mu=alpha_mu, nu=nu)


# --- Vectorised evaluation ---

def _batch_reject(A: np.ndarray, T: np.ndarray, i: int):
    g_in = T[:, :, i]
    g_out = T[:, i, :]
    A = A + A[:, i:i + 1] * g_out
    A[:, i] = 0.0

    denom = 1.0 - g_in * g_out
    loop = denom <= SUM_TOL
    T = (T + g_in[:, :, None] * g_out[:, None, :]) / np.where(loop, 1.0, denom)[:, :, None]
    T[loop] = 0.0
    T[:, i, :] = 0.0
    T[:, :, i] = 0.0
    n = T.shape[1]
    T[:, np.arange(n), np.arange(n)] = 0.0
    return A, T


def batch_local_levels(g: HypothesisGraph, mus: np.ndarray, w: InformationWeightSpec,
                       chunk: int = 20000) -> np.ndarray:
    """alpha^mu for many shift vectors at once, shape (B, m).

    Uses the equivalent 2m-node dual in which every H_j keeps its own node:
    for mu_j <= 0 the arrow to H_j^{mu_j} has weight 1 and all other
    outgoing weights vanish, so rejecting H_j reproduces the in-place
    relabelling.
    """
    mus = np.atleast_2d(np.asarray(mus, dtype=float))
    m = g.size
    w.check_size(m)
    levels, G, r = g.levels_array(), g.matrix(), np.minimum(g.row_sums(), 1.0)
    idx = np.arange(m)
    out = np.empty_like(mus)

    for lo in range(0, len(mus), chunk):
        mu = mus[lo:lo + chunk]
        b = len(mu)
        Q = w.weights(mu)
        A = np.zeros((b, 2 * m))
        A[:, :m] = levels
        T = np.zeros((b, 2 * m, 2 * m))
        T[:, :m, :m] = G[None, :, :] * (1.0 - Q)[:, :, None]
        T[:, idx, m + idx] = 1.0 - (1.0 - Q) * r
        for i in range(m):
            A, T = _batch_reject(A, T, i)
        out[lo:lo + b] = A[:, m:]
    return out
