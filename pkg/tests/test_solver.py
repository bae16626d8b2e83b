import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import minimize_scalar

from oracles import (box_qp_pgd, exact_penalty_minimum,
                     feasible_update_reference, objective_update_reference,
                     smoothed_feasible_minimum)
from conftest import random_surrogates
from scaopo.errors import DegenerateDualError
from scaopo.solver import (SolverOptions, SurrogateModel, check_feasibility,
                           dual_inner_minimizer, inner_minimizer,
                           project_simplex, solve_feasible_update,
                           solve_objective_update, surrogate_eval,
                           surrogate_grad)

BOUND = 2.0
OPTS = SolverOptions()


def anchored(value, grad, curvature, dim=1):
    return SurrogateModel(value=value, grad=np.full(dim, float(grad)),
                          curvature=curvature, anchor=np.zeros(dim))


# ------------------------------------------------------------ inner minimizer

def test_inner_minimizer_matches_projected_gradient_oracle(rng):
    for _ in range(50):
        models = random_surrogates(rng, 3, 8)
        lam = rng.uniform(0.0, 2.0, 2)
        closed = dual_inner_minimizer(models, lam, BOUND)
        reference = box_qp_pgd(models, np.concatenate([[1.0], lam]), BOUND)
        assert np.max(np.abs(closed - reference)) < 1e-8


def test_inner_minimizer_parallel_equals_sequential_bitwise(rng):
    for _ in range(50):
        models = random_surrogates(rng, 4, 10)
        weights = rng.uniform(0.0, 3.0, 4)
        weights[0] = 1.0
        par = inner_minimizer(models, weights, BOUND, parallel=True)
        seq = inner_minimizer(models, weights, BOUND, parallel=False)
        assert np.array_equal(par, seq)


def test_inner_minimizer_rejects_zero_curvature(rng):
    models = random_surrogates(rng, 2, 3)
    with pytest.raises(DegenerateDualError):
        inner_minimizer(models, [0.0, 0.0], BOUND)


def test_unconstrained_interior_minimizer_is_the_newton_point(rng):
    """With one model and a wide box the clamp is inactive and the answer
    is anchor - grad / (2 curvature) exactly."""
    m = random_surrogates(rng, 1, 5)[0]
    x = inner_minimizer([m], [1.0], bound=1e6)
    assert np.allclose(x, m.anchor - m.grad / (2.0 * m.curvature), atol=1e-12)


def test_surrogate_gradient_matches_differences(rng):
    m = random_surrogates(rng, 1, 6)[0]
    x = rng.standard_normal(6)
    h = 1e-6
    for i in range(6):
        e = np.zeros(6)
        e[i] = h
        fd = (surrogate_eval(m, x + e) - surrogate_eval(m, x - e)) / (2 * h)
        assert fd == pytest.approx(surrogate_grad(m, x)[i], abs=1e-6)


# ------------------------------------------------------------- hand instance

def test_hand_worked_single_constraint_instance():
    """min (x-1)^2 subject to x^2 + x <= 0 on [-2, 2]: the unconstrained
    minimizer x = 1 is cut off, the optimum sits at the boundary x = 0,
    and stationarity -2 + lam * 1 = 0 gives lam = 2."""
    objective = anchored(value=1.0, grad=-2.0, curvature=1.0)
    constraint = anchored(value=0.0, grad=1.0, curvature=1.0)
    sol = solve_objective_update([objective, constraint], BOUND, OPTS)
    assert sol.kind == "objective"
    assert sol.theta[0] == pytest.approx(0.0, abs=1e-6)
    assert sol.dual.lam[0] == pytest.approx(2.0, abs=1e-5)
    assert sol.kkt_residual < OPTS.kkt_tol


def test_inactive_constraint_leaves_multiplier_at_zero():
    objective = anchored(value=1.0, grad=-2.0, curvature=1.0)
    slack = anchored(value=-50.0, grad=0.1, curvature=1.0)
    sol = solve_objective_update([objective, slack], BOUND, OPTS)
    assert sol.theta[0] == pytest.approx(1.0, abs=1e-8)
    assert sol.dual.lam[0] == pytest.approx(0.0, abs=1e-8)


def test_single_constraint_dual_agrees_with_scalar_maximization(rng):
    """For m = 1 the dual function is d(lam) = J1(x(lam)); maximizing it
    with a generic scalar optimizer must find the same multiplier."""
    for models in feasible_instances(rng, 5, n_costs=2, dim=6):
        sol = solve_objective_update(models, BOUND, OPTS)

        def negative_dual(lam):
            x = dual_inner_minimizer(models, [max(lam, 0.0)], BOUND)
            return -(surrogate_eval(models[0], x)
                     + max(lam, 0.0) * surrogate_eval(models[1], x))

        res = minimize_scalar(negative_dual, bounds=(0.0, 50.0),
                              method="bounded",
                              options={"xatol": 1e-12})
        assert sol.dual.lam[0] == pytest.approx(max(res.x, 0.0), abs=1e-4)


# -------------------------------------------------- objective update, m >= 2

def feasible_instances(rng, count, n_costs=3, dim=8):
    """Instances with strictly feasible constraint sets; a comfortable
    margin keeps the conic reference well conditioned."""
    out = []
    while len(out) < count:
        models = random_surrogates(rng, n_costs, dim, value_shift=-1.0)
        _, best = feasible_update_reference(models, BOUND)
        if best < -0.05:
            out.append(models)
    return out


def test_objective_update_matches_conic_reference(rng):
    for models in feasible_instances(rng, 15):
        sol = solve_objective_update(models, BOUND, OPTS)
        ref_x, ref_lam, ref_val = objective_update_reference(models, BOUND)
        assert sol.kind == "objective"
        assert surrogate_eval(models[0], sol.theta) == pytest.approx(
            ref_val, abs=1e-6)
        assert np.max(np.abs(sol.theta - ref_x)) < 1e-4
        assert np.max(np.abs(sol.dual.lam - ref_lam)) < 1e-4
        # primal feasibility and complementary slackness at the redelivered point
        for lam_i, m in zip(sol.dual.lam, models[1:]):
            value = surrogate_eval(m, sol.theta)
            assert value <= 1e-8
            assert abs(lam_i * value) < 1e-6


def test_objective_update_matches_exact_penalty_descent(rng):
    """Cross-check against a penalty-form first-order oracle: with the
    penalty weight above the largest multiplier the two optima coincide
    (up to the slow subgradient rate)."""
    for models in feasible_instances(rng, 2, n_costs=2, dim=4):
        sol = solve_objective_update(models, BOUND, OPTS)
        penalty = 2.0 * max(1.0, float(sol.dual.lam.max()))
        _, pen_val = exact_penalty_minimum(models, BOUND, penalty)
        assert surrogate_eval(models[0], sol.theta) == pytest.approx(
            pen_val, abs=5e-3)


def test_objective_update_is_deterministic(rng):
    models = feasible_instances(rng, 1)[0]
    a = solve_objective_update(models, BOUND, OPTS)
    b = solve_objective_update(models, BOUND, OPTS)
    assert np.array_equal(a.theta, b.theta)
    assert np.array_equal(a.dual.lam, b.dual.lam)


def test_warm_started_multipliers_converge_to_the_same_answer(rng):
    models = feasible_instances(rng, 1)[0]
    cold = solve_objective_update(models, BOUND, OPTS)
    warm = solve_objective_update(models, BOUND, OPTS,
                                  warm_lam=cold.dual.lam)
    assert np.max(np.abs(warm.theta - cold.theta)) < 1e-6
    assert warm.dual.iterations <= cold.dual.iterations


def test_unpolished_subgradient_loop_still_meets_tolerance(rng):
    models = feasible_instances(rng, 1, n_costs=2, dim=4)[0]
    opts = SolverOptions(polish=False, max_iterations=200000, kkt_tol=1e-5)
    sol = solve_objective_update(models, BOUND, opts)
    ref_x, _, ref_val = objective_update_reference(models, BOUND)
    assert sol.kkt_residual < 1e-5
    assert surrogate_eval(models[0], sol.theta) == pytest.approx(
        ref_val, abs=1e-4)


# ------------------------------------------------------------ feasible update

def test_feasible_update_matches_epigraph_reference(rng):
    for _ in range(15):
        models = random_surrogates(rng, 3, 8, value_shift=2.0)
        sol = solve_feasible_update(models[1:], BOUND, OPTS)
        _, ref_val = feasible_update_reference(models, BOUND)
        achieved = max(surrogate_eval(m, sol.theta) for m in models[1:])
        assert sol.kind == "feasible"
        assert sol.violation == pytest.approx(achieved, abs=1e-12)
        assert achieved == pytest.approx(ref_val, abs=1e-6)


def test_feasible_update_matches_smoothed_homotopy_oracle(rng):
    for _ in range(3):
        models = random_surrogates(rng, 3, 5, value_shift=2.0)
        sol = solve_feasible_update(models[1:], BOUND, OPTS)
        achieved = max(surrogate_eval(m, sol.theta) for m in models[1:])
        _, smoothed = smoothed_feasible_minimum(models, BOUND)
        assert achieved == pytest.approx(smoothed, abs=1e-3)


def test_feasible_update_weights_live_on_the_simplex(rng):
    models = random_surrogates(rng, 4, 6, value_shift=2.0)
    sol = solve_feasible_update(models[1:], BOUND, OPTS)
    lam = sol.dual.lam
    assert np.all(lam >= -1e-12)
    assert lam.sum() == pytest.approx(1.0, abs=1e-9)


def test_check_feasibility_splits_the_two_regimes(rng):
    relaxed = random_surrogates(rng, 3, 6, value_shift=-30.0)
    ok, sol = check_feasibility(relaxed, BOUND, OPTS)
    assert ok and sol.kind == "feasible"
    # constraints whose surrogates cannot reach zero anywhere in the box
    hopeless = [relaxed[0]] + [
        SurrogateModel(value=50.0, grad=np.zeros(6), curvature=0.5,
                       anchor=np.zeros(6))
        for _ in range(2)]
    bad, sol2 = check_feasibility(hopeless, BOUND, OPTS)
    assert not bad
    assert sol2.violation > 0.0


# ------------------------------------------------------------------- simplex

def test_simplex_projection_two_dimensional_hand_case():
    # components shrink by a common shift until they sum to one
    assert np.allclose(project_simplex(np.array([0.8, 0.6])), [0.6, 0.4])
    assert np.allclose(project_simplex(np.array([2.0, -1.0])), [1.0, 0.0])


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=1, max_size=8))
def test_simplex_projection_lands_on_the_simplex(vals):
    p = project_simplex(np.array(vals))
    assert np.all(p >= 0.0)
    assert p.sum() == pytest.approx(1.0, abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0.01, 1.0), min_size=2, max_size=6))
def test_simplex_projection_fixes_simplex_points(vals):
    v = np.array(vals)
    v = v / v.sum()
    assert np.allclose(project_simplex(v), v, atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_simplex_projection_is_the_nearest_simplex_point(seed):
    r = np.random.default_rng(seed)
    v = r.uniform(-2, 2, 4)
    p = project_simplex(v)
    for _ in range(50):
        q = project_simplex(p + r.uniform(-0.2, 0.2, 4))
        assert np.linalg.norm(v - p) <= np.linalg.norm(v - q) + 1e-12
