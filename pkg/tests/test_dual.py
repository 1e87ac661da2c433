import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from isci.config import CONSERVATION_TOL
from isci.dual import batch_local_levels, build_dual_graph, local_levels, log_transfer_weight, transfer_weight
from isci.graph import fallback_graph, holm_graph, validate_graph
from isci.models import InformationWeightSpec
from tests.strategies import complete_graphs, information_weights, shift_vectors

HALF = InformationWeightSpec.of(0.5)


# --- Dual Graph ---

def test_holm2_dual_graph_structure():
    dual = build_dual_graph(holm_graph(2), [1.0, -0.5], HALF)
    g = dual.graph
    assert g.labels == ["H1", "H2^-0.5", "H1^1"]
    assert dual.shifted_nodes == [2, 1]
    assert dual.null_nodes == [0]
    assert dual.origin == [0, 1, 0]
    G = g.matrix()
    assert G[0, 2] == pytest.approx(0.5)
    assert G[0, 1] == pytest.approx(0.5)
    assert np.all(G[1] == 0.0)
    assert np.all(G[2] == 0.0)
    assert validate_graph(g).valid


def test_zero_shift_only_relabels():
    g = holm_graph(3)
    dual = build_dual_graph(g, [0.0, 0.0, 0.0], HALF)
    assert dual.graph.size == 3
    assert dual.null_nodes == []
    assert np.all(dual.graph.matrix() == 0.0)
    assert dual.graph.initial_levels == g.initial_levels


def test_incomplete_row_gets_unit_transfer_weight():
    g = fallback_graph([0.5, 0.3, 0.2])
    dual = build_dual_graph(g, [1.0, 1.0, 1.0], HALF)
    G = dual.graph.matrix()
    assert G[2, dual.shifted_nodes[2]] == 1.0
    assert G[0, dual.shifted_nodes[0]] == pytest.approx(0.5)
    assert transfer_weight(HALF, 2, 1.0, 0.0) == 1.0


def test_log_transfer_weight():
    assert log_transfer_weight(HALF, 0, -1.0, 1.0) == 0.0
    assert log_transfer_weight(HALF, 0, 3.0, 1.0) == pytest.approx(3 * math.log(0.5))
    assert log_transfer_weight(HALF, 0, 1.0, 0.5) == pytest.approx(math.log(0.75))
    tiny = InformationWeightSpec.of(1e-10)
    # q ** 40 underflows, its log does not
    assert log_transfer_weight(tiny, 0, 40.0, 1.0) == pytest.approx(40 * math.log(1e-10))


# --- Local Levels ---

def test_holm2_local_levels_one_shift():
    ll = local_levels(holm_graph(2), [1.0, -0.5], HALF)
    np.testing.assert_allclose(ll.alpha_mu, [0.00625, 0.01875], atol=1e-15)
    np.testing.assert_allclose(ll.nu, [0.5, 0.75], atol=1e-14)


def test_holm2_local_levels_two_shifts():
    ll = local_levels(holm_graph(2), [1.0, 2.0], HALF)
    np.testing.assert_allclose(ll.alpha_mu, [0.0175, 0.0075], atol=1e-15)
    np.testing.assert_allclose(ll.nu, [1.4, 1.2], atol=1e-13)


def test_nonpositive_shifts_keep_initial_levels():
    g = holm_graph(4, weights=[1, 2, 3, 4])
    ll = local_levels(g, [0.0, -1.0, -math.inf, -0.2], HALF)
    np.testing.assert_allclose(ll.alpha_mu, g.initial_levels)
    np.testing.assert_allclose(ll.nu, np.asarray(g.initial_levels) / g.alpha)


def test_nu_survives_underflowing_weight():
    w = InformationWeightSpec.of(1e-10)
    ll = local_levels(holm_graph(2), [40.0, -1.0], w)
    assert ll.alpha_mu[0] == 0.0
    assert ll.nu[0] == pytest.approx(0.5)
    assert ll.alpha_mu[1] == pytest.approx(0.025)


def test_rejection_order_is_checked():
    with pytest.raises(ValueError):
        local_levels(holm_graph(3), [1.0, 1.0, -1.0], HALF, order=[0, 2])


@settings(max_examples=80, deadline=None)
@given(g=complete_graphs(), w=information_weights, data=st.data())
def test_conservation(g, w, data):
    mu = data.draw(shift_vectors(g.size))
    ll = local_levels(g, mu, w)
    assert ll.alpha_mu.sum() == pytest.approx(g.alpha, abs=CONSERVATION_TOL)
    assert np.all(ll.alpha_mu >= 0.0)


@settings(max_examples=60, deadline=None)
@given(g=complete_graphs(), w=information_weights, data=st.data())
def test_factorization(g, w, data):
    mu = data.draw(shift_vectors(g.size))
    ll = local_levels(g, mu, w)
    Q = np.array([w.weight(j, x) for j, x in enumerate(mu)])
    np.testing.assert_allclose(ll.alpha_mu, Q * ll.nu * g.alpha, rtol=1e-9, atol=1e-15)


@settings(max_examples=60, deadline=None)
@given(g=complete_graphs(), w=information_weights, data=st.data())
def test_order_invariance(g, w, data):
    mu = data.draw(shift_vectors(g.size))
    positive = [j for j in range(g.size) if mu[j] > 0]
    order = data.draw(st.permutations(positive))
    a = local_levels(g, mu, w)
    b = local_levels(g, mu, w, order=order)
    np.testing.assert_allclose(a.alpha_mu, b.alpha_mu, atol=1e-10)


@settings(max_examples=60, deadline=None)
@given(g=complete_graphs(max_size=5), w=information_weights, data=st.data())
def test_nu_is_monotone(g, w, data):
    mu = np.array(data.draw(shift_vectors(g.size)))
    k = data.draw(st.integers(0, g.size - 1))
    bumped = mu.copy()
    bumped[k] += data.draw(st.floats(min_value=0.01, max_value=2.0))
    before = local_levels(g, mu, w).nu
    after = local_levels(g, bumped, w).nu
    assert np.all(after >= before * (1.0 - 1e-8) - 1e-12)


def test_continuity_at_zero():
    g = holm_graph(3, weights=[1, 1, 2])
    at_zero = local_levels(g, [0.0, 0.5, -1.0], HALF).alpha_mu
    just_above = local_levels(g, [1e-12, 0.5, -1.0], HALF).alpha_mu
    np.testing.assert_allclose(just_above, at_zero, atol=1e-8)


@settings(max_examples=40, deadline=None)
@given(g=complete_graphs(max_size=4), w=information_weights, data=st.data())
def test_batch_matches_single(g, w, data):
    mus = np.array([data.draw(shift_vectors(g.size)) for _ in range(5)])
    batch = batch_local_levels(g, mus, w, chunk=2)
    for row, mu in zip(batch, mus):
        np.testing.assert_allclose(row, local_levels(g, mu, w).alpha_mu, atol=1e-12)


def test_batch_on_incomplete_graph():
    g = fallback_graph([0.6, 0.4])
    mus = np.array([[1.0, 1.0], [-1.0, 2.0], [0.5, -0.5]])
    batch = batch_local_levels(g, mus, HALF)
    for row, mu in zip(batch, mus):
        np.testing.assert_allclose(row, local_levels(g, mu, HALF).alpha_mu, atol=1e-14)
