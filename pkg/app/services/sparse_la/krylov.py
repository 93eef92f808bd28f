"""
Krylov solvers: conjugate gradients and restarted, left-preconditioned GMRes.

Both accept callables so they run unchanged on complex grid vectors and on the
real stacked representation of the KKT unknown. Inner products are
conjugate-linear in the first argument.
"""

import time
from collections.abc import Callable

import numpy as np
from scipy.linalg import solve_triangular

from app.errors import CgBreakdownError
from app.services.sparse_la.convergence import ConvergenceLog, ConvergenceRecord
from app.utils.logger import setup_logger

logger = setup_logger("krylov")

Operator = Callable[[np.ndarray], np.ndarray]
Observer = Callable[[int, np.ndarray], float | None]


def cg(
    apply: Operator,
    b: np.ndarray,
    tol: float = 1e-6,
    maxit: int = 100,
    observer: Observer | None = None,
    name: str = "cg",
) -> tuple[np.ndarray, ConvergenceLog]:
    """
    CG for a Hermitian positive definite operator, started from zero.

    Stops when ||b - H x|| / ||b|| <= tol (recursive residual) or after `maxit`
    iterations. Non-positive curvature raises CgBreakdownError.

    The observer receives every iterate; its value is logged as e_cg in place of
    the recursive residual, and a None return leaves e_cg unset. Observer time
    is excluded from `wall_time`.
    """
    b = np.asarray(b)
    log = ConvergenceLog(solver=name)
    x = np.zeros_like(b, dtype=np.result_type(b, np.float64))
    b_norm = float(np.linalg.norm(b))
    if b_norm == 0.0:
        log.append(ConvergenceRecord(iteration=0, residual_norm=0.0, e_cg=0.0))
        log.converged = True
        return x, log

    observer_time = 0.0
    start = time.perf_counter()

    def score(iteration: int, relative: float) -> float | None:
        nonlocal observer_time
        if observer is None:
            return relative
        t0 = time.perf_counter()
        value = observer(iteration, x)
        observer_time += time.perf_counter() - t0
        return value

    r = b.astype(x.dtype, copy=True)
    p = r.copy()
    rr = float(np.vdot(r, r).real)
    log.append(ConvergenceRecord(iteration=0, residual_norm=1.0, e_cg=score(0, 1.0)))

    for iteration in range(1, maxit + 1):
        hp = apply(p)
        curvature = float(np.vdot(p, hp).real)
        if not np.isfinite(curvature) or curvature <= 0.0:
            raise CgBreakdownError(
                f"{name}: non-positive curvature {curvature:.3e} at iteration "
                f"{iteration}; operator is not Hermitian positive definite",
                iteration=iteration,
            )
        alpha = rr / curvature
        x += alpha * p
        r -= alpha * hp
        rr_new = float(np.vdot(r, r).real)
        relative = np.sqrt(rr_new) / b_norm
        log.append(
            ConvergenceRecord(
                iteration=iteration,
                residual_norm=relative,
                e_cg=score(iteration, relative),
                wall_time=time.perf_counter() - start - observer_time,
            )
        )
        if relative <= tol:
            log.converged = True
            break
        p = r + (rr_new / rr) * p
        rr = rr_new

    logger.debug(
        f"{name}: {log.iterations} iterations, relative residual "
        f"{log.final_residual:.3e}, converged={log.converged}"
    )
    return x, log


def _givens(a, b) -> tuple[float, complex]:
    """Rotation (c, s) with c real such that [c s; -conj(s) c] [a; b] = [r; 0]."""
    abs_a = abs(a)
    rho = np.hypot(abs_a, abs(b))
    if rho == 0.0:
        return 1.0, 0.0
    if abs_a == 0.0:
        return 0.0, np.conj(b) / abs(b)
    phase = a / abs_a
    return abs_a / rho, phase * np.conj(b) / rho


def gmres(
    apply: Operator,
    b: np.ndarray,
    precond: Operator | None = None,
    restart: int = 30,
    tol: float = 1e-6,
    maxit: int = 100,
    observer: Observer | None = None,
    observer_tol: float | None = None,
    name: str = "gmres",
) -> tuple[np.ndarray, ConvergenceLog]:
    """
    Restarted GMRes with left preconditioning, started from zero.

    Each iterate is formed explicitly: the observer receives it (its return value
    is logged as e_cg), and the true relative residual ||b - A x|| / ||b|| is
    logged and used for the stopping test. The preconditioned relative residual is
    logged alongside. Convergence is also declared when the observer value drops
    to `observer_tol`. A restart cycle that does not improve the best true
    residual ends the solve with `stagnated` set and the best iterate returned.
    """
    b = np.asarray(b)
    dtype = np.result_type(b, np.float64)
    n = b.size
    precond = precond or (lambda v: v)
    log = ConvergenceLog(solver=name)
    observer_time = 0.0
    start = time.perf_counter()

    def elapsed() -> float:
        return time.perf_counter() - start - observer_time

    def observe(iteration: int, x: np.ndarray) -> float | None:
        nonlocal observer_time
        if observer is None:
            return None
        t0 = time.perf_counter()
        value = observer(iteration, x)
        observer_time += time.perf_counter() - t0
        return value

    x = np.zeros(n, dtype=dtype)
    b_norm = float(np.linalg.norm(b))
    if b_norm == 0.0:
        log.append(
            ConvergenceRecord(
                iteration=0,
                residual_norm=0.0,
                e_cg=observe(0, x),
                preconditioned_residual_norm=0.0,
            )
        )
        log.converged = True
        return x, log

    z = precond(b.astype(dtype))
    beta = float(np.linalg.norm(z))
    precond_b_norm = beta if beta > 0 else 1.0
    log.append(
        ConvergenceRecord(
            iteration=0,
            residual_norm=1.0,
            e_cg=observe(0, x),
            wall_time=elapsed(),
            preconditioned_residual_norm=beta / precond_b_norm,
        )
    )
    best_x, best_residual = x.copy(), 1.0
    iteration = 0

    while iteration < maxit and beta > 0.0:
        cycle_start_residual = best_residual
        basis = np.zeros((restart + 1, n), dtype=dtype)
        hessenberg = np.zeros((restart + 1, restart), dtype=dtype)
        cs = np.zeros(restart, dtype=dtype)
        sn = np.zeros(restart, dtype=dtype)
        g = np.zeros(restart + 1, dtype=dtype)
        g[0] = beta
        basis[0] = z / beta
        x_cycle_start = x
        breakdown = False

        for j in range(restart):
            if iteration >= maxit:
                break
            w = precond(apply(basis[j])).astype(dtype, copy=False)
            w_norm = float(np.linalg.norm(w))
            for i in range(j + 1):
                hessenberg[i, j] = np.vdot(basis[i], w)
                w = w - hessenberg[i, j] * basis[i]
            h_next = float(np.linalg.norm(w))
            hessenberg[j + 1, j] = h_next
            breakdown = h_next <= 1e-14 * w_norm
            if not breakdown:
                basis[j + 1] = w / h_next

            for i in range(j):
                upper = cs[i] * hessenberg[i, j] + sn[i] * hessenberg[i + 1, j]
                hessenberg[i + 1, j] = (
                    -np.conj(sn[i]) * hessenberg[i, j] + cs[i] * hessenberg[i + 1, j]
                )
                hessenberg[i, j] = upper
            cs[j], sn[j] = _givens(hessenberg[j, j], hessenberg[j + 1, j])
            hessenberg[j, j] = cs[j] * hessenberg[j, j] + sn[j] * hessenberg[j + 1, j]
            hessenberg[j + 1, j] = 0.0
            g[j + 1] = -np.conj(sn[j]) * g[j]
            g[j] = cs[j] * g[j]

            iteration += 1
            y = solve_triangular(hessenberg[: j + 1, : j + 1], g[: j + 1], lower=False)
            x = x_cycle_start + y @ basis[: j + 1]
            e_cg = observe(iteration, x)
            true_residual = float(np.linalg.norm(b - apply(x))) / b_norm
            log.append(
                ConvergenceRecord(
                    iteration=iteration,
                    residual_norm=true_residual,
                    e_cg=e_cg,
                    wall_time=elapsed(),
                    preconditioned_residual_norm=abs(g[j + 1]) / precond_b_norm,
                )
            )
            if true_residual < best_residual:
                best_x, best_residual = x, true_residual
            if true_residual <= tol or (
                observer_tol is not None and e_cg is not None and e_cg <= observer_tol
            ):
                log.converged = True
                break
            if breakdown:
                break

        if log.converged:
            break
        if breakdown or best_residual >= cycle_start_residual:
            log.stagnated = True
            logger.warning(
                f"{name}: no progress over a restart cycle at iteration {iteration}; "
                f"returning best iterate (relative residual {best_residual:.3e})"
            )
            x = best_x
            break
        if iteration >= maxit:
            break
        z = precond((b - apply(x)).astype(dtype, copy=False))
        beta = float(np.linalg.norm(z))

    logger.debug(
        f"{name}: {log.iterations} iterations, true relative residual "
        f"{log.final_residual:.3e}, converged={log.converged}, stagnated={log.stagnated}"
    )
    return x, log
