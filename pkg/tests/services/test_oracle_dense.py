import numpy as np
import pytest
from conftest import relative_error

from app.config import settings
from app.errors import GuardRailError
from app.services.oracle_dense import (
    build_dense_instance,
    dense_gradient,
    dense_helmholtz,
    dense_hessian,
    dense_jacobian,
    dense_kkt_matrix,
    dense_kkt_solve,
    dense_normal_solve,
    jacobian_from_blocks,
)


@pytest.fixture(scope="module")
def instance(gn_state):
    return build_dense_instance(gn_state)


def test_guard_rail_refuses_large_instances(gn_state, monkeypatch):
    monkeypatch.setattr(settings, "dense_guard_limit", 100)
    with pytest.raises(GuardRailError):
        build_dense_instance(gn_state)


def test_scalar_jacobian():
    A = np.array([[2.0 + 1.0j]])
    J = jacobian_from_blocks(A, [np.array([[3.0]])], [np.array([[1.0]])])
    assert J[0, 0] == pytest.approx(3.0 / (2.0 + 1.0j))


def test_dense_operator_agrees_with_sparse_assembly(gn_state):
    A, mass = dense_helmholtz(gn_state)
    assert np.abs(A - gn_state.operator.A.toarray()).max() < 1e-13
    np.testing.assert_allclose(mass, gn_state.operator.mass_weights, atol=1e-15)


def test_instance_shapes(gn_state, instance):
    n, K, N = gn_state.n_nodes, gn_state.n_sources, gn_state.survey.n_data
    assert instance.J.shape == (N, n)
    assert instance.H.shape == (n, n)
    assert instance.Q.shape == (N, K * n)
    assert instance.M.shape == (4 * K * n + n, 4 * K * n + n)
    np.testing.assert_allclose(instance.M, instance.M.T, atol=1e-12)
    np.testing.assert_array_equal(instance.Q @ instance.Q.T, np.eye(N))


def test_dense_residual_matches_state(gn_state, instance):
    assert relative_error(instance.r, gn_state.r.values) < 1e-10


def test_convenience_accessors(gn_state, instance):
    np.testing.assert_allclose(dense_jacobian(gn_state), instance.J)
    np.testing.assert_allclose(dense_hessian(gn_state), instance.H)
    np.testing.assert_allclose(dense_gradient(gn_state), instance.g)
    np.testing.assert_allclose(dense_kkt_matrix(gn_state), instance.M)


def test_normal_solution_solves_normal_equations(gn_state, instance):
    delta_s = dense_normal_solve(gn_state)
    residual = np.linalg.norm(instance.H @ delta_s - instance.g) / np.linalg.norm(instance.g)
    assert residual < 1e-10


def test_kkt_solution_matches_normal_solution(gn_state, instance):
    solution = dense_kkt_solve(gn_state)
    assert relative_error(solution.delta_s, dense_normal_solve(gn_state)) < 1e-8

    # delta_u_k = A^-1 P_k delta_s
    for k in range(gn_state.n_sources):
        expected = np.linalg.solve(instance.A, instance.P[k] @ solution.delta_s)
        assert relative_error(solution.delta_u[k], expected) < 1e-8

    # A* lambda = Q* W^T W (r - Q delta_u)
    W2 = instance.W.T @ instance.W
    stacked_du = solution.delta_u.ravel()
    top = (instance.Q.T @ W2 @ (instance.r - instance.Q @ stacked_du)).reshape(
        gn_state.n_sources, gn_state.n_nodes
    )
    for k in range(gn_state.n_sources):
        assert relative_error(instance.A.conj().T @ solution.lam[k], top[k]) < 1e-8


def test_dropping_model_term_changes_only_the_gradient(gn_state, instance):
    dropped = build_dense_instance(gn_state, drop_model_term=True)
    np.testing.assert_allclose(dropped.H, instance.H)
    np.testing.assert_allclose(dropped.g - instance.g, gn_state.epsilon * gn_state.model.values)


def test_zero_gradient_gives_zero_dense_update(empty_state):
    np.testing.assert_array_equal(
        dense_normal_solve(empty_state, drop_model_term=True), np.zeros(empty_state.n_nodes)
    )
