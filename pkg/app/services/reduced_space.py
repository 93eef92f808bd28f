"""
Reduced-space Gauss-Newton: matrix-free Jacobian and Hessian actions and the
CG solve of the normal equations (RSGN-CG).

The model update is real, so the operators act on the real model space:

    H v = Re(J* W^T W J v) + eps v
    g   = Re(J* W^T W r) - eps s_n

with J = Q A^-1 P. Every Jacobian action is one block forward solve over all
sources; every adjoint action is one block adjoint solve.
"""

from dataclasses import dataclass, replace

import numpy as np

from app.config import settings
from app.errors import DimensionMismatchError
from app.services.forward_problem import (
    DataVector,
    Survey,
    Wavefield,
    WeightMatrix,
    build_weights,
    observe,
    observe_adjoint,
    relative_misfit,
    residual,
    solve_forward,
)
from app.services.grid_pml import PmlProfile
from app.services.helmholtz_assembly import (
    HelmholtzOperator,
    SlownessModel,
    assemble_helmholtz,
    p_diagonal,
)
from app.services.sparse_la import ConvergenceLog, LuFactors, cg, lu_factor, lu_solve
from app.utils.logger import log_duration, setup_logger

logger = setup_logger("reduced_space")


@dataclass(frozen=True, eq=False)
class GnState:
    """
    Linearization point of one Gauss-Newton step.

    `p_diagonals[k]` holds the diagonal of P_k; `u` satisfies A(s_n) u = f.
    The regularization is L = eps * I.
    """

    model: SlownessModel
    survey: Survey
    operator: HelmholtzOperator
    factors: LuFactors
    weights: WeightMatrix
    u: Wavefield
    d_obs: DataVector
    d_pred: DataVector
    r: DataVector
    p_diagonals: np.ndarray
    epsilon: float

    @property
    def n_nodes(self) -> int:
        return self.survey.grid.n_nodes

    @property
    def n_sources(self) -> int:
        return self.survey.n_sources

    @property
    def omega(self) -> float:
        return self.operator.omega

    @property
    def resid_norm(self) -> float:
        return relative_misfit(self.d_pred, self.d_obs)

    def with_epsilon(self, epsilon: float) -> "GnState":
        return replace(self, epsilon=float(epsilon))


def build_gn_state(
    model: SlownessModel,
    survey: Survey,
    frequency_hz: float,
    d_obs: DataVector,
    epsilon: float,
    weights: WeightMatrix | None = None,
    profile: PmlProfile | None = None,
) -> GnState:
    """Assemble, factorize and forward-solve at (model, frequency)."""
    if len(d_obs) != survey.n_data:
        raise DimensionMismatchError(
            f"observed data has {len(d_obs)} entries, survey has {survey.n_data}"
        )
    grid = survey.grid
    omega = 2.0 * np.pi * frequency_hz
    profile = profile or PmlProfile.default(grid)
    operator = assemble_helmholtz(grid, profile, model, omega)
    with log_duration(logger, f"LU factorization at {frequency_hz:g} Hz"):
        factors = lu_factor(operator.A)
    u = solve_forward(operator, survey, factors)
    d_pred = observe(u, survey)
    return GnState(
        model=model,
        survey=survey,
        operator=operator,
        factors=factors,
        weights=weights or build_weights(survey),
        u=u,
        d_obs=d_obs,
        d_pred=d_pred,
        r=residual(d_obs, d_pred),
        p_diagonals=p_diagonal(u.values, omega, operator.mass_weights[None, :]),
        epsilon=float(epsilon),
    )


def _check_model_vector(state: GnState, v: np.ndarray) -> np.ndarray:
    v = np.asarray(v)
    if v.shape != (state.n_nodes,):
        raise DimensionMismatchError(
            f"model-space vector has shape {v.shape}, expected ({state.n_nodes},)"
        )
    return v


def _linearized_fields(state: GnState, v: np.ndarray) -> np.ndarray:
    """delta_u_k = A^-1 P_k v for all k, shape (K, n)."""
    rhs = (state.p_diagonals * v[None, :]).T
    return lu_solve(state.factors, rhs).T


def _adjoint_pullback(state: GnState, data: np.ndarray) -> np.ndarray:
    """sum_k P_k* A^-* (Q* data)_k, complex."""
    scattered = observe_adjoint(data, state.survey)
    lam = lu_solve(state.factors, scattered.T, adjoint=True).T
    return np.sum(np.conj(state.p_diagonals) * lam, axis=0)


def jacobian_apply(state: GnState, v: np.ndarray) -> DataVector:
    """J v: one forward solve per source on P_k v, sampled at the receivers."""
    v = _check_model_vector(state, v)
    return observe(_linearized_fields(state, v), state.survey)


def jacobian_adjoint_apply(
    state: GnState, w: DataVector | np.ndarray, project_real: bool = True
) -> np.ndarray:
    """
    J* w, one adjoint solve per source.

    The result is complex in general; `project_real` keeps the real part, which
    is the one a real model update uses.
    """
    values = w.values if isinstance(w, DataVector) else np.asarray(w)
    result = _adjoint_pullback(state, values)
    return result.real.copy() if project_real else result


def data_hessian_apply(state: GnState, v: np.ndarray) -> np.ndarray:
    """Re(J* W^T W J v) without the regularization term."""
    jv = jacobian_apply(state, v).values
    return _adjoint_pullback(state, state.weights.squared * jv).real


def hessian_apply(state: GnState, v: np.ndarray) -> np.ndarray:
    """H v = Re(J* W^T W J v) + eps v."""
    v = _check_model_vector(state, v)
    return data_hessian_apply(state, v) + state.epsilon * v


def source_hessian_apply(state: GnState, v: np.ndarray, k: int) -> np.ndarray:
    """Re(J_k* W_k^T W_k J_k v) for source k alone."""
    v = _check_model_vector(state, v)
    survey = state.survey
    p_k = state.p_diagonals[k]
    du = lu_solve(state.factors, p_k * v)
    nodes = survey.receivers[k]
    entries = survey.data_sources == k
    scattered = np.zeros(state.n_nodes, dtype=np.complex128)
    np.add.at(scattered, nodes, state.weights.squared[entries] * du[nodes])
    lam = lu_solve(state.factors, scattered, adjoint=True)
    return (np.conj(p_k) * lam).real


def gradient(state: GnState, drop_model_term: bool = False) -> np.ndarray:
    """g = Re(J* W^T W r) - eps s_n; `drop_model_term` omits the eps s_n part."""
    g = jacobian_adjoint_apply(state, state.weights.squared * state.r.values)
    if not drop_model_term:
        g = g - state.epsilon * state.model.values
    return g


def normal_residual(state: GnState, delta_s: np.ndarray, g: np.ndarray) -> float:
    """E_cg = ||H delta_s - g|| / ||g||."""
    misfit = float(np.linalg.norm(hessian_apply(state, delta_s) - g))
    g_norm = float(np.linalg.norm(g))
    return misfit / g_norm if g_norm > 0 else misfit


def largest_data_eigenvalue(state: GnState, iterations: int | None = None) -> float:
    """Power-iteration estimate of the top eigenvalue of Re(J* W^T W J)."""
    iterations = settings.power_iterations if iterations is None else iterations
    v = np.full(state.n_nodes, 1.0 / np.sqrt(state.n_nodes))
    estimate = 0.0
    for _ in range(max(iterations, 1)):
        hv = data_hessian_apply(state, v)
        estimate = float(v @ hv)
        norm = float(np.linalg.norm(hv))
        if norm == 0.0:
            return 0.0
        v = hv / norm
    logger.debug(f"Largest data-Hessian eigenvalue estimate {estimate:.4e}")
    return estimate


def rsgn_cg_step(
    state: GnState,
    tol: float | None = None,
    maxit: int | None = None,
    e_cg_stride: int | None = None,
    drop_model_term: bool = False,
) -> tuple[np.ndarray, ConvergenceLog]:
    """
    Solve H delta_s = g by CG; each iteration costs 2K solve pairs.

    E_cg is the true normal-equation residual of the iterate, scored on the same
    `e_cg_stride` schedule as FSGN-GMRes, so each scored iterate costs another 2K
    solve pairs. The final iterate is always scored.
    """
    if not state.epsilon > 0:
        raise ValueError(f"RSGN-CG needs epsilon > 0, got {state.epsilon}")
    tol = settings.inner_tolerance if tol is None else tol
    maxit = settings.inner_max_iterations if maxit is None else maxit
    stride = settings.e_cg_stride if e_cg_stride is None else e_cg_stride
    g = gradient(state, drop_model_term=drop_model_term)

    def score(iteration: int, x: np.ndarray) -> float | None:
        if stride == 0 or iteration % stride != 0:
            return None
        if not np.any(x):
            return 1.0
        return normal_residual(state, x, g)

    delta_s, log = cg(
        lambda v: hessian_apply(state, v),
        g,
        tol=tol,
        maxit=maxit,
        observer=score,
        name="rsgn-cg",
    )
    if log.records and log.records[-1].e_cg is None:
        log.records[-1].e_cg = normal_residual(state, delta_s, g)
    logger.info(
        f"RSGN-CG: {log.iterations} iterations, E_cg {log.final_e_cg:.3e}, "
        f"{log.time_per_iteration:.3f}s per iteration"
    )
    return delta_s, log
