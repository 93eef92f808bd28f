"""
Full-space Gauss-Newton: the KKT system in (delta_u, delta_s, lambda), its block
triangular preconditioners and the FSGN-GMRes step.

    [ F    0    A* ] [delta_u]   [ Q* W^T W r ]
    [ 0    L   -P* ] [delta_s] = [ -L s_n     ]
    [ A   -P    0  ] [lambda ]   [ 0          ]

with F = Q* W^T W Q and L = eps I. The unknown lives in a real vector space:
complex blocks count as (real, imaginary) pairs and the inner product is
Re<x, y>. Under it the operator is self-adjoint and the delta_s block of every
GMRes iterate is real. `KktVector.to_real` gives the stacked layout
[Re du, Im du, ds, Re lambda, Im lambda] that GMRes works on.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from app.config import settings
from app.errors import DimensionMismatchError
from app.services.forward_problem import observe_adjoint
from app.services.reduced_space import GnState, gradient, normal_residual
from app.services.sparse_la import (
    ConvergenceLog,
    IluFactors,
    gmres,
    ilu_factor,
    ilu_solve,
    lu_solve,
    spmv,
)
from app.utils.logger import log_duration, setup_logger

logger = setup_logger("full_space_kkt")


class PrecondMode(str, Enum):
    EXACT = "exact"
    ILU = "ilu"


@dataclass(frozen=True, eq=False)
class KktVector:
    delta_u: np.ndarray  # (K, n) complex
    delta_s: np.ndarray  # (n,) real
    lam: np.ndarray  # (K, n) complex

    @classmethod
    def zeros(cls, n_sources: int, n_nodes: int) -> "KktVector":
        return cls(
            delta_u=np.zeros((n_sources, n_nodes), dtype=np.complex128),
            delta_s=np.zeros(n_nodes),
            lam=np.zeros((n_sources, n_nodes), dtype=np.complex128),
        )

    @property
    def shape(self) -> tuple[int, int]:
        return self.delta_u.shape

    @property
    def real_size(self) -> int:
        k, n = self.shape
        return 4 * k * n + n

    def to_real(self) -> np.ndarray:
        return np.concatenate(
            [
                self.delta_u.real.ravel(),
                self.delta_u.imag.ravel(),
                np.asarray(self.delta_s, dtype=np.float64),
                self.lam.real.ravel(),
                self.lam.imag.ravel(),
            ]
        )

    @classmethod
    def from_real(cls, x: np.ndarray, n_sources: int, n_nodes: int) -> "KktVector":
        block = n_sources * n_nodes
        if x.size != 4 * block + n_nodes:
            raise DimensionMismatchError(
                f"stacked KKT vector has {x.size} entries, expected {4 * block + n_nodes}"
            )
        x = np.asarray(x, dtype=np.float64)
        shape = (n_sources, n_nodes)
        cuts = np.cumsum([block, block, n_nodes, block])
        du_re, du_im, ds, lam_re, lam_im = np.split(x, cuts)
        return cls(
            delta_u=(du_re + 1j * du_im).reshape(shape),
            delta_s=ds.copy(),
            lam=(lam_re + 1j * lam_im).reshape(shape),
        )

    def dot(self, other: "KktVector") -> float:
        """Real inner product Re<self, other>."""
        return float(
            np.vdot(self.delta_u, other.delta_u).real
            + self.delta_s @ other.delta_s
            + np.vdot(self.lam, other.lam).real
        )

    def norm(self) -> float:
        return float(np.sqrt(self.dot(self)))

    def axpy(self, a: float, other: "KktVector") -> "KktVector":
        """a * other + self."""
        return KktVector(
            delta_u=self.delta_u + a * other.delta_u,
            delta_s=self.delta_s + a * other.delta_s,
            lam=self.lam + a * other.lam,
        )


@dataclass(frozen=True, eq=False)
class KktOperator:
    """
    Matrix-free KKT operator at a GN state.

    `include_f=False` drops the F block, which turns the operator into the
    exact preconditioner. `ilu` holds the factors used by the ILU preconditioner.
    """

    state: GnState
    include_f: bool = True
    ilu: IluFactors | None = None

    @property
    def n_sources(self) -> int:
        return self.state.n_sources

    @property
    def n_nodes(self) -> int:
        return self.state.n_nodes

    @property
    def real_size(self) -> int:
        return 4 * self.n_sources * self.n_nodes + self.n_nodes

    def apply_real(self, x: np.ndarray) -> np.ndarray:
        return kkt_apply(self, KktVector.from_real(x, self.n_sources, self.n_nodes)).to_real()


def _check_conforming(op: KktOperator, xi: KktVector):
    if xi.shape != (op.n_sources, op.n_nodes) or xi.delta_s.shape != (op.n_nodes,):
        raise DimensionMismatchError(
            f"KKT vector blocks {xi.shape}/{xi.delta_s.shape} do not conform to "
            f"({op.n_sources}, {op.n_nodes})"
        )


def kkt_apply(op: KktOperator, xi: KktVector) -> KktVector:
    """One product per block term; no linear solves."""
    _check_conforming(op, xi)
    state = op.state
    A = state.operator.A
    P = state.p_diagonals

    top = spmv(A, xi.lam.T, adjoint=True).T
    if op.include_f:
        sampled = xi.delta_u[state.survey.data_sources, state.survey.data_nodes]
        top = top + observe_adjoint(state.weights.squared * sampled, state.survey)
    middle = state.epsilon * xi.delta_s - np.sum(np.conj(P) * xi.lam, axis=0).real
    bottom = spmv(A, xi.delta_u.T).T - P * xi.delta_s[None, :]
    return KktVector(delta_u=top, delta_s=middle, lam=bottom)


def kkt_rhs(state: GnState, drop_model_term: bool = False) -> KktVector:
    """
    Right-hand side (Q* W^T W r, -eps s_n, 0).

    `drop_model_term` zeroes the middle block.
    """
    top = observe_adjoint(state.weights.squared * state.r.values, state.survey)
    middle = (
        np.zeros(state.n_nodes) if drop_model_term else -state.epsilon * state.model.values
    )
    return KktVector(
        delta_u=top,
        delta_s=np.array(middle, dtype=np.float64),
        lam=np.zeros((state.n_sources, state.n_nodes), dtype=np.complex128),
    )


def precond_apply(
    op: KktOperator, v: KktVector, mode: PrecondMode | str = PrecondMode.EXACT
) -> KktVector:
    """
    Solve the block-triangular system with F dropped, in three stages:
    lambda = A^-* v1, delta_s = L^-1 (v2 + Re P* lambda), delta_u = A^-1 (v3 + P delta_s).

    Slots follow `kkt_apply`: v1 is the adjoint equation held in `delta_u`, v3 the
    state equation held in `lam`.
    """
    mode = PrecondMode(mode)
    _check_conforming(op, v)
    state = op.state
    if mode is PrecondMode.EXACT:

        def solve(b, adjoint=False):
            return lu_solve(state.factors, b, adjoint=adjoint)

    else:
        if op.ilu is None:
            raise ValueError("ILU preconditioner requested but no ILU factors are attached")

        def solve(b, adjoint=False):
            return ilu_solve(op.ilu, b, adjoint=adjoint)

    P = state.p_diagonals
    lam = solve(v.delta_u.T.astype(np.complex128), adjoint=True).T
    delta_s = (v.delta_s + np.sum(np.conj(P) * lam, axis=0).real) / state.epsilon
    delta_u = solve((v.lam + P * delta_s[None, :]).T).T
    return KktVector(delta_u=delta_u, delta_s=delta_s, lam=lam)


def build_ilu(state: GnState, level: int | None = None) -> IluFactors:
    level = settings.ilu_level if level is None else level
    return ilu_factor(
        state.operator.A, level=level, diagonal_shift=settings.ilu_diagonal_shift
    )


def fsgn_gmres_step(
    state: GnState,
    mode: PrecondMode | str = PrecondMode.EXACT,
    restart: int | None = None,
    tol: float | None = None,
    maxit: int | None = None,
    ilu_level: int | None = None,
    e_cg_stride: int | None = None,
    observer_tol: float | None = None,
    drop_model_term: bool = False,
) -> tuple[np.ndarray, ConvergenceLog]:
    """
    Preconditioned GMRes on the KKT system from a zero initial guess.

    Every `e_cg_stride`-th iterate is scored with E_cg = ||H ds - g|| / ||g||
    (0 disables scoring except for the final iterate). Returns the delta_s block
    of the final iterate and the log; ILU setup time goes into `log.setup_time`.
    """
    if not state.epsilon > 0:
        raise ValueError(f"FSGN-GMRes needs epsilon > 0, got {state.epsilon}")
    mode = PrecondMode(mode)
    restart = settings.gmres_restart if restart is None else restart
    tol = settings.inner_tolerance if tol is None else tol
    maxit = settings.inner_max_iterations if maxit is None else maxit
    stride = settings.e_cg_stride if e_cg_stride is None else e_cg_stride

    setup_time = 0.0
    ilu = None
    if mode is PrecondMode.ILU:
        with log_duration(logger, "ILU initialization") as timing:
            ilu = build_ilu(state, ilu_level)
        setup_time = timing["seconds"]

    op = KktOperator(state=state, include_f=True, ilu=ilu)
    K, n = state.n_sources, state.n_nodes
    b = kkt_rhs(state, drop_model_term=drop_model_term)
    g = gradient(state, drop_model_term=drop_model_term)

    def delta_s_of(x: np.ndarray) -> np.ndarray:
        offset = 2 * K * n
        return x[offset : offset + n]

    def score(iteration: int, x: np.ndarray) -> float | None:
        if stride == 0 or iteration % stride != 0:
            return None
        ds = delta_s_of(x)
        if not np.any(ds):
            return 1.0 if np.any(g) else 0.0
        return normal_residual(state, ds, g)

    def precondition(x: np.ndarray) -> np.ndarray:
        return precond_apply(op, KktVector.from_real(x, K, n), mode).to_real()

    name = "fsgn-gmres-exact" if mode is PrecondMode.EXACT else f"fsgn-gmres-ilu{ilu.level:g}"
    x, log = gmres(
        op.apply_real,
        b.to_real(),
        precond=precondition,
        restart=restart,
        tol=tol,
        maxit=maxit,
        observer=score,
        observer_tol=observer_tol,
        name=name,
    )
    log.setup_time = setup_time
    delta_s = delta_s_of(x).copy()
    if log.records and log.records[-1].e_cg is None:
        log.records[-1].e_cg = normal_residual(state, delta_s, g)

    logger.info(
        f"{name}: {log.iterations} iterations, E_cg {log.final_e_cg:.3e}, "
        f"true residual {log.final_residual:.3e}, setup {setup_time:.3f}s"
    )
    return delta_s, log
