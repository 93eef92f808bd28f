import numpy as np
import pytest
from conftest import STANDARD_EPSILON, STANDARD_FREQUENCY_HZ, relative_error

from app.errors import DimensionMismatchError
from app.schemas import WeightMode
from app.services.forward_problem import build_weights
from app.services.multi_freq_driver import simulate_data
from app.services.oracle_dense import build_dense_instance, dense_normal_solve
from app.services.reduced_space import (
    build_gn_state,
    data_hessian_apply,
    gradient,
    hessian_apply,
    jacobian_adjoint_apply,
    jacobian_apply,
    largest_data_eigenvalue,
    normal_residual,
    rsgn_cg_step,
    source_hessian_apply,
)


@pytest.fixture(scope="module")
def dense(gn_state):
    return build_dense_instance(gn_state)


@pytest.fixture(scope="module")
def weighted_state(background_model, survey, observed, profile):
    return build_gn_state(
        background_model,
        survey,
        STANDARD_FREQUENCY_HZ,
        observed,
        STANDARD_EPSILON,
        weights=build_weights(survey, WeightMode.OFFSET),
        profile=profile,
    )


def test_state_at_linearization_point(gn_state, survey):
    assert gn_state.n_sources == 2
    assert gn_state.omega == pytest.approx(2 * np.pi * STANDARD_FREQUENCY_HZ)
    assert len(gn_state.r) == survey.n_data
    assert gn_state.resid_norm > 0.0
    assert gn_state.with_epsilon(3.0).epsilon == 3.0
    assert gn_state.epsilon == STANDARD_EPSILON


def test_jacobian_matches_dense(gn_state, dense, rng):
    for _ in range(5):
        v = rng.standard_normal(gn_state.n_nodes)
        assert relative_error(jacobian_apply(gn_state, v).values, dense.J @ v) < 1e-8


def test_hessian_matches_dense_on_random_vectors(gn_state, dense, rng):
    for _ in range(20):
        v = rng.standard_normal(gn_state.n_nodes)
        assert relative_error(hessian_apply(gn_state, v), dense.H @ v) < 1e-8


def test_weighted_hessian_and_gradient_match_dense(weighted_state, rng):
    reference = build_dense_instance(weighted_state)
    v = rng.standard_normal(weighted_state.n_nodes)
    assert relative_error(hessian_apply(weighted_state, v), reference.H @ v) < 1e-8
    assert relative_error(gradient(weighted_state), reference.g) < 1e-8


def test_gradient_matches_dense(gn_state, dense):
    assert relative_error(gradient(gn_state), dense.g) < 1e-8
    without = build_dense_instance(gn_state, drop_model_term=True).g
    assert relative_error(gradient(gn_state, drop_model_term=True), without) < 1e-8


def test_jacobian_adjoint_identity(gn_state, rng):
    n_data = gn_state.survey.n_data
    for _ in range(50):
        v = rng.standard_normal(gn_state.n_nodes)
        w = rng.standard_normal(n_data) + 1j * rng.standard_normal(n_data)
        jv = jacobian_apply(gn_state, v).values
        left = np.vdot(jv, w)
        right = np.vdot(v, jacobian_adjoint_apply(gn_state, w, project_real=False))
        assert abs(left - right) <= 1e-10 * np.linalg.norm(jv) * np.linalg.norm(w)


def test_jacobian_adjoint_matches_dense(gn_state, dense, rng):
    n_data = gn_state.survey.n_data
    for _ in range(20):
        w = rng.standard_normal(n_data) + 1j * rng.standard_normal(n_data)
        expected = dense.J.conj().T @ w
        assert relative_error(jacobian_adjoint_apply(gn_state, w), expected.real) < 1e-8


def test_jacobian_against_finite_differences(gn_state, profile, rng):
    v = rng.uniform(-1.0, 1.0, gn_state.n_nodes)
    step = 1e-4
    model = gn_state.model
    plus = simulate_data(
        model.with_values(model.values + step * v), gn_state.survey, STANDARD_FREQUENCY_HZ, profile
    )
    minus = simulate_data(
        model.with_values(model.values - step * v), gn_state.survey, STANDARD_FREQUENCY_HZ, profile
    )
    central = (plus.values - minus.values) / (2 * step)
    assert relative_error(jacobian_apply(gn_state, v).values, central) < 1e-6


def test_hessian_is_symmetric_positive_definite(dense):
    H = dense.H
    np.testing.assert_allclose(H, H.T, atol=1e-12 * np.abs(H).max())
    eigenvalues = np.linalg.eigvalsh(H)
    assert eigenvalues.min() >= STANDARD_EPSILON * (1 - 1e-8)


def test_per_source_hessians_sum_to_data_hessian(gn_state, rng):
    v = rng.standard_normal(gn_state.n_nodes)
    total = sum(source_hessian_apply(gn_state, v, k) for k in range(gn_state.n_sources))
    assert relative_error(total, data_hessian_apply(gn_state, v)) < 1e-12


def test_hessian_action_costs_one_solve_pair_per_source_and_direction(gn_state, rng):
    metrics = gn_state.factors.metrics
    metrics.reset()
    hessian_apply(gn_state, rng.standard_normal(gn_state.n_nodes))
    assert metrics.forward_count == gn_state.n_sources
    assert metrics.adjoint_count == gn_state.n_sources
    assert metrics.solve_pairs == 2 * gn_state.n_sources


def test_model_vector_shape_is_checked(gn_state):
    with pytest.raises(DimensionMismatchError):
        hessian_apply(gn_state, np.ones(gn_state.n_nodes + 1))


def test_without_receivers_hessian_is_regularization(empty_state, rng):
    v = rng.standard_normal(empty_state.n_nodes)
    np.testing.assert_allclose(hessian_apply(empty_state, v), STANDARD_EPSILON * v, atol=1e-15)
    np.testing.assert_allclose(
        gradient(empty_state), -STANDARD_EPSILON * empty_state.model.values
    )


def test_zero_gradient_gives_zero_update(empty_state):
    delta_s, log = rsgn_cg_step(empty_state, drop_model_term=True)
    assert np.all(delta_s == 0.0)
    assert log.iterations == 0 and log.converged


def test_rsgn_cg_matches_dense_solution(gn_state):
    delta_s, log = rsgn_cg_step(gn_state, tol=1e-10, maxit=500)
    reference = dense_normal_solve(gn_state)
    assert log.converged
    assert log.final_e_cg <= 1e-8
    assert relative_error(delta_s, reference) < 1e-6
    assert [r.iteration for r in log.records] == list(range(log.iterations + 1))
    assert log.solver == "rsgn-cg"


def test_rsgn_cg_logs_true_normal_residual(gn_state):
    g = gradient(gn_state)
    _, log = rsgn_cg_step(gn_state, tol=1e-12, maxit=4, e_cg_stride=1)
    assert log.records[0].e_cg == 1.0
    for k in range(1, 5):
        iterate, _ = rsgn_cg_step(gn_state, tol=1e-12, maxit=k, e_cg_stride=0)
        assert log.records[k].e_cg == pytest.approx(
            normal_residual(gn_state, iterate, g), rel=1e-10
        )


def test_rsgn_cg_scores_on_stride_and_at_the_end(gn_state):
    _, log = rsgn_cg_step(gn_state, tol=1e-12, maxit=5, e_cg_stride=2)
    assert [r.e_cg is not None for r in log.records] == [True, False, True, False, True, True]


def test_normal_residual_of_dense_solution(gn_state, dense):
    reference = dense_normal_solve(gn_state)
    assert normal_residual(gn_state, reference, dense.g) < 1e-8
    assert normal_residual(gn_state, np.zeros(gn_state.n_nodes), dense.g) == pytest.approx(1.0)


def test_rsgn_cg_rejects_zero_epsilon(gn_state):
    with pytest.raises(ValueError):
        rsgn_cg_step(gn_state.with_epsilon(0.0))


def test_power_iteration_brackets_top_eigenvalue(gn_state, dense):
    data_part = dense.H - STANDARD_EPSILON * np.eye(gn_state.n_nodes)
    top = np.linalg.eigvalsh(data_part).max()
    estimate = largest_data_eigenvalue(gn_state, iterations=50)
    assert 0.9 * top <= estimate <= top * (1 + 1e-8)


def test_power_iteration_without_receivers_is_zero(empty_state):
    assert largest_data_eigenvalue(empty_state, iterations=3) == 0.0


def test_forward_difference_error_is_first_order(gn_state, profile, rng):
    model, survey = gn_state.model, gn_state.survey
    base = gn_state.d_pred.values
    for _ in range(5):
        v = rng.uniform(-1.0, 1.0, gn_state.n_nodes)
        jv = jacobian_apply(gn_state, v).values
        errors = []
        for t in (1e-3, 1e-4):
            shifted = simulate_data(
                model.with_values(model.values + t * v), survey, STANDARD_FREQUENCY_HZ, profile
            )
            errors.append(np.linalg.norm((shifted.values - base) / t - jv))
        assert errors[0] >= 8.0 * errors[1]
