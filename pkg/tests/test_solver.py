import logging
import math

import numpy as np
import pytest

from isci.comparators import bonferroni_bounds
from isci.errors import ModelError, SolverError
from isci.graph import efficacy_safety_graph, fixed_sequence_graph, holm_graph, rescale_alpha
from isci.models import BoundsVector, GridSpec, HypothesisGraph, InformationWeightSpec
from isci.pvalues import NormalMarginal, normal_models
from isci.solver import (adjusted_p, brute_force_bounds, compute_bounds, induced_test, iterate_step,
                         satisfies_start_condition, starting_value)

ALPHA = 0.025
HALF = InformationWeightSpec.of(0.5)
HOLM2_MODELS = normal_models([3.0, 1.0], [1.0, 1.0])


def random_instance(rng, min_size=2, max_size=5):
    """Complete graph with positive levels, normal models and a uniform weight."""
    m = int(rng.integers(min_size, max_size + 1))
    G = np.zeros((m, m))
    for i in range(m):
        G[i, [j for j in range(m) if j != i]] = rng.dirichlet(np.ones(m - 1))
    g = HypothesisGraph(
        labels=[f"H{j + 1}" for j in range(m)],
        alpha=ALPHA,
        initial_levels=(ALPHA * rng.dirichlet(np.ones(m))).tolist(),
        transitions=G.tolist()
    )
    models = normal_models(rng.normal(2.0, 1.5, m), rng.uniform(0.5, 1.5, m))
    return g, models, InformationWeightSpec.of(float(rng.uniform(0.05, 0.95)))


def fixed_point_sum(models, lower):
    return sum(m.pvalue(x) for m, x in zip(models, lower))


# --- Start ---

def test_starting_value_holm2():
    mu0 = starting_value(holm_graph(2), HOLM2_MODELS)
    assert mu0[0] == 0.0
    assert mu0[1] == pytest.approx(-1.24140, abs=1e-5)


def test_starting_value_zero_level_is_minus_infinity():
    mu0 = starting_value(fixed_sequence_graph(2), HOLM2_MODELS)
    assert mu0[1] == -math.inf


def test_starting_value_below_zero_for_weak_evidence():
    models = normal_models([-3.0, -2.0], [1.0, 1.0])
    mu0 = starting_value(holm_graph(2), models)
    np.testing.assert_allclose(mu0, [m.inverse(0.0125) for m in models])
    assert np.all(mu0 < 0)


def test_starting_value_satisfies_start_condition():
    rng = np.random.default_rng(3)
    for _ in range(20):
        g, models, w = random_instance(rng)
        assert satisfies_start_condition(g, models, w, starting_value(g, models))


def test_start_condition_rejects_large_vector():
    assert not satisfies_start_condition(holm_graph(2), HOLM2_MODELS, HALF, [2.0, 0.5])


# --- Iteration ---

def test_first_step_holm2():
    mu0 = starting_value(holm_graph(2), HOLM2_MODELS)
    mu1 = iterate_step(holm_graph(2), HOLM2_MODELS, HALF, mu0)
    assert mu1[1] == pytest.approx(1.0 - 2.24140, abs=1e-5)
    assert mu1[0] > 0
    assert HOLM2_MODELS[0].pvalue(mu1[0]) / 0.5 ** mu1[0] == pytest.approx(0.0125, rel=1e-9)


def test_step_with_zero_nu_stays_minus_infinity():
    g = fixed_sequence_graph(2)
    models = normal_models([-1.0, 3.0], [1.0, 1.0])
    mu1 = iterate_step(g, models, HALF, starting_value(g, models))
    assert mu1[1] == -math.inf


def test_step_with_unit_weight_is_quantile():
    g = holm_graph(3)
    models = normal_models([4.0, 0.5, 2.0], [1.0, 1.0, 1.0])
    mu1 = iterate_step(g, models, InformationWeightSpec.of(1.0), starting_value(g, models))
    np.testing.assert_allclose(mu1, [m.inverse(ALPHA / 3) for m in models], atol=1e-10)


# --- Bounds ---

def test_single_hypothesis_is_classical_bound():
    g = holm_graph(1)
    bounds, trace = compute_bounds(g, normal_models([3.0], [1.0]), HALF)
    assert trace.converged
    assert bounds.lower[0] == pytest.approx(3.0 - 1.959964, abs=1e-5)


def test_unit_weight_gives_bonferroni_bounds():
    rng = np.random.default_rng(11)
    for _ in range(100):
        g, models, _ = random_instance(rng)
        bounds, trace = compute_bounds(g, models, InformationWeightSpec.of(1.0))
        assert trace.converged
        expected = bonferroni_bounds(models, g.initial_levels).lower
        np.testing.assert_allclose(bounds.lower, expected, atol=1e-8)


def test_holm2_bounds_and_trace():
    bounds, trace = compute_bounds(holm_graph(2), HOLM2_MODELS, HALF, eps=1e-10)
    assert trace.converged
    assert trace.iterations == len(trace.iterates) - 1
    iterates = np.array(trace.iterates)
    assert np.all(np.diff(iterates, axis=0) >= 0.0)
    assert fixed_point_sum(HOLM2_MODELS, bounds.lower) == pytest.approx(ALPHA, abs=1e-6)
    assert induced_test(bounds) == [0]


def test_raw_steps_are_monotone():
    rng = np.random.default_rng(23)
    cases = [(holm_graph(2), HOLM2_MODELS, HALF)] + [random_instance(rng) for _ in range(20)]
    for g, models, w in cases:
        mu = starting_value(g, models)
        for _ in range(30):
            nxt = iterate_step(g, models, w, mu)
            assert np.all(nxt >= mu - 1e-9)
            mu = nxt


def test_holm2_matches_grid_projection():
    bounds, _ = compute_bounds(holm_graph(2), HOLM2_MODELS, HALF, eps=1e-10)
    L = np.array(bounds.lower)
    grid = GridSpec(lo=(L - 0.05).tolist(), hi=(L + 0.05).tolist(), step=1e-3)
    oracle = brute_force_bounds(holm_graph(2), HOLM2_MODELS, HALF, grid)
    np.testing.assert_allclose(oracle.lower, L, atol=2e-3)


def test_grid_projection_with_unit_weight():
    g = holm_graph(2)
    grid = GridSpec(lo=[0.5, -1.5], hi=[1.0, -1.0], step=1e-3)
    oracle = brute_force_bounds(g, HOLM2_MODELS, InformationWeightSpec.of(1.0), grid)
    expected = [m.inverse(0.0125) for m in HOLM2_MODELS]
    np.testing.assert_allclose(oracle.lower, expected, atol=1e-3 + 1e-12)


def test_grid_projection_warns_when_box_misses(caplog):
    grid = GridSpec(lo=5.0, hi=5.1, step=0.05)
    with caplog.at_level(logging.WARNING, logger="ISCI.Solver"):
        brute_force_bounds(holm_graph(2), HOLM2_MODELS, HALF, grid)
    assert "below the box" in caplog.text


def _oracle_check(rng, size, step, half_width, tol):
    g, models, w = random_instance(rng, size, size)
    bounds, trace = compute_bounds(g, models, w, eps=1e-11)
    assert trace.converged
    L = np.array(bounds.lower)
    grid = GridSpec(lo=(L - half_width).tolist(), hi=(L + half_width).tolist(), step=step)
    oracle = brute_force_bounds(g, models, w, grid)
    np.testing.assert_allclose(oracle.lower, L, atol=tol)
    assert fixed_point_sum(models, L) == pytest.approx(ALPHA, abs=1e-6)


def test_oracle_equivalence_two_hypotheses():
    rng = np.random.default_rng(21)
    for _ in range(10):
        _oracle_check(rng, 2, 1e-3, 0.05, 2e-3)


def test_oracle_equivalence_three_hypotheses_coarse():
    rng = np.random.default_rng(22)
    for _ in range(3):
        _oracle_check(rng, 3, 2e-3, 0.03, 2.5e-3)


@pytest.mark.slow
def test_oracle_equivalence_full():
    rng = np.random.default_rng(23)
    for _ in range(50):
        _oracle_check(rng, 2, 1e-3, 0.05, 2e-3)
    for _ in range(20):
        _oracle_check(rng, 3, 1e-3, 0.05, 2e-3)


def test_fixed_point_sum_identity():
    rng = np.random.default_rng(31)
    for _ in range(50):
        g, models, w = random_instance(rng)
        bounds, trace = compute_bounds(g, models, w, eps=1e-10)
        assert trace.converged
        assert fixed_point_sum(models, bounds.lower) == pytest.approx(ALPHA, abs=1e-6)


def test_start_independence():
    rng = np.random.default_rng(41)
    for _ in range(100):
        g, models, w = random_instance(rng)
        mu0 = starting_value(g, models)
        alternative = mu0 - rng.uniform(0.1, 2.0, g.size)
        assert satisfies_start_condition(g, models, w, alternative)
        a, _ = compute_bounds(g, models, w, eps=1e-11)
        b, _ = compute_bounds(g, models, w, eps=1e-11, start=alternative)
        np.testing.assert_allclose(a.lower, b.lower, atol=1e-7)


def test_invalid_start_is_rejected():
    with pytest.raises(SolverError):
        compute_bounds(holm_graph(2), HOLM2_MODELS, HALF, start=[2.0, 0.5])
    with pytest.raises(ModelError):
        compute_bounds(holm_graph(2), HOLM2_MODELS, HALF, start=[0.0])


def test_start_must_be_finite_or_minus_infinity():
    for start in ([math.nan, math.nan], [0.0, math.inf], [-math.inf, math.nan]):
        with pytest.raises(ModelError):
            satisfies_start_condition(holm_graph(2), HOLM2_MODELS, HALF, start)
        with pytest.raises(ModelError):
            compute_bounds(holm_graph(2), HOLM2_MODELS, HALF, start=start)
    bounds, trace = compute_bounds(holm_graph(2), HOLM2_MODELS, HALF, start=[-math.inf, -2.0])
    assert trace.converged
    assert np.all(np.isfinite(bounds.lower))


def test_informativeness():
    rng = np.random.default_rng(51)
    for _ in range(100):
        g, models, w = random_instance(rng)
        base, _ = compute_bounds(g, models, w, eps=1e-11)
        i = int(rng.integers(g.size))
        bumped = list(models)
        bumped[i] = NormalMarginal(estimate=models[i].estimate + 1e-3, stderr=models[i].stderr)
        moved, _ = compute_bounds(g, bumped, w, eps=1e-11)
        assert moved.lower[i] > base.lower[i] + 1e-6
        assert np.all(np.array(moved.lower) >= np.array(base.lower) - 1e-8)


def test_gatekeeper_bounds_are_minus_infinity():
    g = efficacy_safety_graph(treatments=3)
    models = normal_models([-5.0, -5.0, -5.0, 3.0, 3.0, 3.0], [1.0] * 6)
    bounds, trace = compute_bounds(g, models, HALF)
    assert trace.converged
    assert bounds.lower[3:] == [-math.inf] * 3
    np.testing.assert_allclose(bounds.lower[:3], [m.inverse(ALPHA / 3) for m in models[:3]])


def test_bounds_increase_with_level():
    rng = np.random.default_rng(61)
    for _ in range(20):
        g, models, w = random_instance(rng)
        low, _ = compute_bounds(g, models, w, eps=1e-11)
        high, _ = compute_bounds(rescale_alpha(g, 0.05), models, w, eps=1e-11)
        assert np.all(np.array(low.lower) <= np.array(high.lower) + 1e-9)


def test_shifts_report_original_scale():
    delta = [0.4, 0.0]
    shifted, _ = compute_bounds(holm_graph(2), normal_models([2.6, 1.0], [1.0, 1.0]), HALF,
                                eps=1e-10, shifts=delta)
    plain, _ = compute_bounds(holm_graph(2), HOLM2_MODELS, HALF, eps=1e-10)
    np.testing.assert_allclose(np.array(shifted.lower) + delta, plain.lower, atol=1e-12)
    assert shifted.offsets == delta
    assert induced_test(shifted) == induced_test(plain)


def test_non_convergence_is_reported(caplog):
    with caplog.at_level(logging.WARNING, logger="ISCI.Solver"):
        _, trace = compute_bounds(holm_graph(2), HOLM2_MODELS, HALF, max_iter=1)
    assert not trace.converged
    assert trace.iterations == 1
    assert "No convergence" in caplog.text


def test_model_count_must_match():
    with pytest.raises(ModelError):
        compute_bounds(holm_graph(3), HOLM2_MODELS, HALF)


# --- Intersection Test ---

def test_adjusted_p_on_null_side():
    mu = [-0.5, -1.0]
    expected = min(m.pvalue(x) / 0.5 for m, x in zip(HOLM2_MODELS, mu))
    assert adjusted_p(holm_graph(2), HOLM2_MODELS, HALF, mu) == pytest.approx(expected)


def test_adjusted_p_at_fixed_point():
    bounds, _ = compute_bounds(holm_graph(2), HOLM2_MODELS, HALF, eps=1e-12)
    assert adjusted_p(holm_graph(2), HOLM2_MODELS, HALF, bounds.lower) == pytest.approx(ALPHA, abs=1e-8)


def test_adjusted_p_zero_pvalue():
    assert adjusted_p(holm_graph(2), HOLM2_MODELS, HALF, [-math.inf, 0.0]) == 0.0


def test_induced_test_sign_rule():
    assert induced_test(BoundsVector(lower=[0.1, -0.2])) == [0]
    assert induced_test(BoundsVector(lower=[-math.inf, -math.inf])) == []
    assert induced_test(BoundsVector(lower=[0.0, 0.0])) == [0, 1]
    assert induced_test(BoundsVector(lower=[-0.3], offsets=[0.4])) == [0]
