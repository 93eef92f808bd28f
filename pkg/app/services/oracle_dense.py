"""
Dense brute-force references for desk-scale verification.

Everything here is rebuilt from the GN state's inputs (model, survey, weights,
epsilon, PML parameters) with explicit loops and dense factorizations. Only
grid indexing is shared with the sparse code paths, so agreement between the two
is an independent check.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from app.config import settings
from app.errors import GuardRailError, SingularPivotError
from app.services.reduced_space import GnState
from app.utils.logger import setup_logger

logger = setup_logger("oracle_dense")


def _stretch(position: float, n: int, n_pml: int, sigma_max: float, power: float, omega: float):
    if n_pml == 0:
        return 1.0 + 0.0j
    depth = max(n_pml - position, position - (n - 1 - n_pml), 0.0) / n_pml
    return 1.0 + 1j * sigma_max * depth**power / omega


def dense_helmholtz(state: GnState) -> tuple[np.ndarray, np.ndarray]:
    """Dense A and the diagonal X_i Z_j, assembled node by node."""
    grid = state.survey.grid
    profile = state.operator.profile
    omega = state.omega
    nx, nz, p, h2 = grid.nx, grid.nz, grid.n_pml, grid.h**2
    s = state.model.values

    def sx(pos):
        return _stretch(pos, nx, p, profile.sigma_max, profile.power, omega)

    def sz(pos):
        return _stretch(pos, nz, p, profile.sigma_max, profile.power, omega)

    def on_ring(i, j):
        return i in (0, nx - 1) or j in (0, nz - 1)

    n = nx * nz
    A = np.zeros((n, n), dtype=np.complex128)
    mass = np.zeros(n, dtype=np.complex128)
    for j in range(nz):
        for i in range(nx):
            row = grid.index(i, j)
            mass[row] = sx(i) * sz(j)
            if on_ring(i, j):
                A[row, row] = 1.0
                continue
            neighbours = [
                (i - 1, j, sz(j) / (h2 * sx(i - 0.5))),
                (i + 1, j, sz(j) / (h2 * sx(i + 0.5))),
                (i, j - 1, sx(i) / (h2 * sz(j - 0.5))),
                (i, j + 1, sx(i) / (h2 * sz(j + 0.5))),
            ]
            diagonal = -(omega**2) * s[row] * sx(i) * sz(j)
            for ni, nj, coupling in neighbours:
                diagonal += coupling
                if not on_ring(ni, nj):
                    A[row, grid.index(ni, nj)] = -coupling
            A[row, row] = diagonal
    return A, mass


def jacobian_from_blocks(
    A: np.ndarray, p_blocks: list[np.ndarray], samplings: list[np.ndarray]
) -> np.ndarray:
    """Stack Q_k A^-1 P_k over sources, one column per model parameter."""
    lu = sla.lu_factor(A)
    rows = [q @ sla.lu_solve(lu, p) for p, q in zip(p_blocks, samplings, strict=True)]
    return np.vstack(rows)


@dataclass(eq=False)
class DenseInstance:
    """Explicit matrices at a GN state. `M` and `b` are in the real stacked layout."""

    A: np.ndarray
    P: list[np.ndarray]
    Q: np.ndarray
    W: np.ndarray
    L: np.ndarray
    U: np.ndarray
    r: np.ndarray
    J: np.ndarray
    H: np.ndarray
    g: np.ndarray
    M: np.ndarray
    b: np.ndarray


@dataclass(eq=False)
class KktSolution:
    delta_u: np.ndarray
    delta_s: np.ndarray
    lam: np.ndarray


def _check_guard_rail(state: GnState):
    n, k = state.n_nodes, state.n_sources
    size = 4 * k * n + n
    if size > settings.dense_guard_limit:
        raise GuardRailError(
            f"dense oracle refused: KKT dimension {size} exceeds {settings.dense_guard_limit}"
        )


def _realify(B: np.ndarray) -> np.ndarray:
    return np.block([[B.real, -B.imag], [B.imag, B.real]])


def build_dense_instance(state: GnState, drop_model_term: bool = False) -> DenseInstance:
    _check_guard_rail(state)
    survey = state.survey
    grid = survey.grid
    n, K = grid.n_nodes, survey.n_sources
    omega = state.omega
    eps = state.epsilon

    A, mass = dense_helmholtz(state)
    F_src = np.zeros((n, K), dtype=np.complex128)
    for k in range(K):
        F_src[survey.sources[k], k] = survey.amplitudes[k] / grid.h**2
    U = sla.solve(A, F_src).T

    samplings = []
    for k in range(K):
        q = np.zeros((len(survey.receivers[k]), n))
        for row, node in enumerate(survey.receivers[k]):
            q[row, node] = 1.0
        samplings.append(q)
    Q = np.zeros((survey.n_data, K * n))
    offset = 0
    for k, q in enumerate(samplings):
        Q[offset : offset + q.shape[0], k * n : (k + 1) * n] = q
        offset += q.shape[0]
    P = [np.diag(omega**2 * mass * U[k]) for k in range(K)]
    W = np.diag(state.weights.diagonal)
    L = eps * np.eye(n)

    d_pred = Q @ U.ravel()
    r = state.d_obs.values - d_pred
    W2 = W.T @ W
    J = jacobian_from_blocks(A, P, samplings)
    H = (J.conj().T @ W2 @ J).real + L
    g = (J.conj().T @ W2 @ r).real
    if not drop_model_term:
        g = g - L @ state.model.values

    # Complex blocks over all sources
    A_all = sla.block_diag(*([A] * K))
    P_all = np.vstack(P)
    F_all = Q.T @ W2 @ Q
    m = K * n
    zero_mm = np.zeros((2 * m, 2 * m))
    zero_mn = np.zeros((2 * m, n))
    p_column = -np.vstack([P_all.real, P_all.imag])
    M = np.block(
        [
            [_realify(F_all), zero_mn, _realify(A_all.conj().T)],
            [zero_mn.T, L, p_column.T],
            [_realify(A_all), p_column, zero_mm],
        ]
    )
    top = Q.T @ W2 @ r
    middle = np.zeros(n) if drop_model_term else -L @ state.model.values
    b = np.concatenate([top.real, top.imag, middle, np.zeros(2 * m)])

    logger.debug(f"Dense instance: n={n}, K={K}, N={Q.shape[0]}, KKT size {M.shape[0]}")
    return DenseInstance(A=A, P=P, Q=Q, W=W, L=L, U=U, r=r, J=J, H=H, g=g, M=M, b=b)


def dense_jacobian(state: GnState) -> np.ndarray:
    return build_dense_instance(state).J


def dense_hessian(state: GnState) -> np.ndarray:
    return build_dense_instance(state).H


def dense_gradient(state: GnState, drop_model_term: bool = False) -> np.ndarray:
    return build_dense_instance(state, drop_model_term).g


def dense_kkt_matrix(state: GnState) -> np.ndarray:
    return build_dense_instance(state).M


def dense_normal_solve(state: GnState, drop_model_term: bool = False) -> np.ndarray:
    if not state.epsilon > 0:
        raise ValueError(f"normal equations need epsilon > 0, got {state.epsilon}")
    inst = build_dense_instance(state, drop_model_term)
    if not np.any(inst.g):
        return np.zeros(state.n_nodes)
    return sla.solve(inst.H, inst.g, assume_a="pos")


def dense_kkt_solve(state: GnState, drop_model_term: bool = False) -> KktSolution:
    inst = build_dense_instance(state, drop_model_term)
    n, K = state.n_nodes, state.n_sources
    m = K * n
    try:
        x = sla.solve(inst.M, inst.b)
    except (sla.LinAlgError, ValueError) as e:
        raise SingularPivotError(f"dense KKT matrix is singular: {e}") from e
    du = (x[:m] + 1j * x[m : 2 * m]).reshape(K, n)
    ds = x[2 * m : 2 * m + n]
    lam = (x[2 * m + n : 3 * m + n] + 1j * x[3 * m + n :]).reshape(K, n)
    return KktSolution(delta_u=du, delta_s=ds, lam=lam)
