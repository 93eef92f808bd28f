"""
Level-of-fill incomplete LU, ILU(p), without pivoting.

Each row is factored in two passes. The symbolic pass assigns every entry the
smallest level lev(i, k) + lev(k, j) + 1 over all pivot rows k and keeps it only
if that level is <= p; the numeric IKJ pass then eliminates on that fixed pattern.
Original entries have level 0. With p unlimited this is the exact no-pivot LU.

Triangular solves reuse SuperLU on each factor with natural ordering and
diagonal pivots, which leaves the factor unchanged and runs the substitution in C.
"""

import heapq
import math
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import SuperLU, splu
from scipy.sparse.linalg import norm as sparse_norm

from app.errors import DimensionMismatchError, ZeroPivotError
from app.services.sparse_la.matrix import SparseMatrixCSR, as_csr
from app.utils.logger import setup_logger
from app.utils.solve_metrics import SolveMetrics

logger = setup_logger("sparse_ilu")


def _triangular_solver(factor: sp.csr_matrix) -> SuperLU:
    return splu(
        factor.tocsc(),
        permc_spec="NATURAL",
        diag_pivot_thresh=0.0,
        options={"SymmetricMode": True},
    )


@dataclass(frozen=True, eq=False)
class IluFactors:
    """Unit lower L and upper U with A ≈ L U."""

    L: SparseMatrixCSR
    U: SparseMatrixCSR
    level: float
    max_level: int
    _lower: SuperLU = field(repr=False)
    _upper: SuperLU = field(repr=False)
    metrics: SolveMetrics = field(default_factory=SolveMetrics)

    @property
    def n(self) -> int:
        return self.L.shape[0]

    @property
    def nnz(self) -> int:
        return self.L.nnz + self.U.nnz - self.n

    def residual_norm(self, A) -> float:
        """||A - L U||_F."""
        return float(sparse_norm(as_csr(A) - self.L @ self.U, "fro"))


def ilu_factor(A, level: int | None = 0, diagonal_shift: float = 0.0) -> IluFactors:
    """
    ILU(p) of a square matrix with a full nonzero diagonal.

    `level=None` keeps every fill entry (exact LU without pivoting). A nonzero
    `diagonal_shift` is added to the diagonal before factorization; a zero pivot
    is never perturbed silently.
    """
    A = as_csr(A)
    n, n_cols = A.shape
    if n != n_cols:
        raise DimensionMismatchError(f"ILU needs a square matrix, got {A.shape}")
    if diagonal_shift:
        A = as_csr(A + diagonal_shift * sp.identity(n, format="csr"))
    if level is not None and level < 0:
        raise ValueError(f"fill level must be >= 0, got {level}")
    level_limit = math.inf if level is None else level

    start = time.perf_counter()
    indptr, indices, data = A.indptr, A.indices, A.data
    # Strictly upper part of each finished row as (cols, values, levels)
    upper_rows: list[tuple[list[int], list[complex], list[int]]] = []
    u_diag = np.zeros(n, dtype=np.complex128)
    l_rows, l_cols, l_vals = [], [], []
    u_rows, u_cols, u_vals = [], [], []
    max_level = 0

    for i in range(n):
        cols = indices[indptr[i] : indptr[i + 1]].tolist()
        vals = data[indptr[i] : indptr[i + 1]].tolist()
        if i not in cols:
            raise ZeroPivotError(f"ILU: structurally zero diagonal at row {i}", index=i)

        # Symbolic pass: final level of every entry of row i, minimized over all
        # elimination paths. Level of k is final when popped; only rows before k touch it.
        levels = dict.fromkeys(cols, 0)
        pending = [c for c in cols if c < i]
        heapq.heapify(pending)
        eliminated = []
        while pending:
            k = heapq.heappop(pending)
            eliminated.append(k)
            lev_k = levels[k]
            for j, lev_kj in zip(upper_rows[k][0], upper_rows[k][2], strict=True):
                fill_level = lev_k + lev_kj + 1
                if fill_level > level_limit:
                    continue
                previous = levels.get(j)
                if previous is None:
                    levels[j] = fill_level
                    if j < i:
                        heapq.heappush(pending, j)
                elif fill_level < previous:
                    levels[j] = fill_level

        # Numeric pass on the fixed pattern
        work = dict.fromkeys(levels, 0.0)
        work.update(zip(cols, vals, strict=True))
        for k in eliminated:
            multiplier = work[k] / u_diag[k]
            work[k] = multiplier
            for j, u_kj in zip(upper_rows[k][0], upper_rows[k][1], strict=True):
                if j in work:
                    work[j] -= multiplier * u_kj

        pivot = work[i]
        if pivot == 0:
            raise ZeroPivotError(
                f"ILU({level}): zero pivot at row {i}; retry with a diagonal shift",
                index=i,
            )
        u_diag[i] = pivot

        row_upper_cols, row_upper_vals, row_upper_levels = [], [], []
        for j in sorted(work):
            lev = levels[j]
            max_level = max(max_level, lev)
            if j < i:
                l_rows.append(i)
                l_cols.append(j)
                l_vals.append(work[j])
            else:
                u_rows.append(i)
                u_cols.append(j)
                u_vals.append(work[j])
                if j > i:
                    row_upper_cols.append(j)
                    row_upper_vals.append(work[j])
                    row_upper_levels.append(lev)
        upper_rows.append((row_upper_cols, row_upper_vals, row_upper_levels))

    eye_idx = np.arange(n)
    L = sp.csr_matrix(
        (
            np.concatenate([np.asarray(l_vals, dtype=np.complex128), np.ones(n)]),
            (
                np.concatenate([np.asarray(l_rows, dtype=np.int64), eye_idx]),
                np.concatenate([np.asarray(l_cols, dtype=np.int64), eye_idx]),
            ),
        ),
        shape=(n, n),
        dtype=np.complex128,
    )
    U = sp.csr_matrix(
        (np.asarray(u_vals, dtype=np.complex128), (u_rows, u_cols)),
        shape=(n, n),
        dtype=np.complex128,
    )
    L.sort_indices()
    U.sort_indices()

    factors = IluFactors(
        L=L,
        U=U,
        level=level_limit,
        max_level=max_level,
        _lower=_triangular_solver(L),
        _upper=_triangular_solver(U),
    )
    logger.debug(
        f"ILU({level}) of {n}x{n}: nnz(A)={A.nnz}, nnz(L+U)={factors.nnz}, "
        f"max level {max_level}, {time.perf_counter() - start:.3f}s"
    )
    return factors


def fill_level_bound(A) -> int:
    """Smallest p for which ILU(p) keeps every fill entry of the no-pivot LU."""
    return ilu_factor(A, level=None).max_level


def ilu_solve(F: IluFactors, b: np.ndarray, adjoint: bool = False) -> np.ndarray:
    """Approximate A^-1 b (or A^-* b) as U^-1 L^-1 b (or L^-* U^-* b)."""
    b = np.asarray(b, dtype=np.complex128)
    if b.shape[0] != F.n:
        raise DimensionMismatchError(
            f"right-hand side has {b.shape[0]} rows, factors are {F.n}x{F.n}"
        )
    columns = 1 if b.ndim == 1 else b.shape[1]
    if columns == 0:
        return b.copy()
    start = time.perf_counter()
    if adjoint:
        y = F._upper.solve(b, trans="H")
        x = F._lower.solve(y, trans="H")
    else:
        y = F._lower.solve(b)
        x = F._upper.solve(y)
    F.metrics.record_solve(columns, adjoint, time.perf_counter() - start)
    return x
