"""Self-contained Levenberg-Marquardt engine.

Minimizes 0.5*||r(x)||^2 for a user-supplied residual and Jacobian.  The
damped step solves (J^T J + lambda * diag(J^T J)) d = -J^T r, realized as a
least-squares solve of the augmented system [J; sqrt(lambda) D] via QR, so
normal equations are never formed explicitly.  Marquardt scaling by the
Gram-matrix diagonal keeps mixed parameter scales usable.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sl

from .exceptions import EvaluationError, InvalidInputError

LAMBDA_LIMIT = 1e12

STATUS_FTOL = "converged-ftol"
STATUS_XTOL = "converged-xtol"
STATUS_GTOL = "converged-gtol"
STATUS_MAX_ITER = "max-iter"
STATUS_LINEAR_FAIL = "failed-linear-solve"


@dataclass(frozen=True)
class LMConfig:
    max_iter: int = 200
    ftol: float = 1e-10
    xtol: float = 1e-10
    gtol: float = 1e-10
    lambda0: float = 1e-3
    lambda_up: float = 10.0
    lambda_down: float = 0.3

    def __post_init__(self):
        if self.max_iter < 1:
            raise InvalidInputError("max_iter must be at least 1")
        if min(self.ftol, self.xtol, self.gtol) <= 0.0:
            raise InvalidInputError("tolerances must be positive")
        if not (self.lambda_up > 1.0 > self.lambda_down > 0.0):
            raise InvalidInputError("need lambda_up > 1 > lambda_down > 0")
        if self.lambda0 < 0.0:
            raise InvalidInputError("initial damping must be nonnegative")


@dataclass
class LMReport:
    x_final: np.ndarray
    cost_history: list
    n_iter: int
    n_feval: int
    status: str


def _checked(fn, x, what):
    val = np.asarray(fn(x), dtype=float)
    if not np.all(np.isfinite(val)):
        raise EvaluationError(f"{what} evaluation returned non-finite values", x=x.copy())
    return val


def _damped_step(J, r, lam):
    """Solve the damped least-squares subproblem; None signals a singular system."""
    d = np.sqrt(np.sum(J * J, axis=0))
    scale = np.max(d) if d.size else 0.0
    if scale == 0.0:
        return None
    d = np.maximum(d, 1e-14 * scale)
    if lam > 0.0:
        A = np.vstack([J, np.sqrt(lam) * np.diag(d)])
        b = np.concatenate([-r, np.zeros(J.shape[1])])
    else:
        A = J
        b = -r
    q, rr = sl.qr(A, mode="economic")
    diag = np.abs(np.diag(rr))
    if diag.min() <= 1e-14 * diag.max():
        return None
    step = sl.solve_triangular(rr, q.T @ b)
    if not np.all(np.isfinite(step)):
        return None
    return step


def lm_solve(residual_fn, jacobian_fn, x0, cfg=None):
    """Levenberg-Marquardt iteration with accepted-step monotone cost history.

    Termination: relative cost decrease below ftol, step norm below
    xtol*(xtol+||x||), max-norm of the gradient below gtol, iteration budget,
    or a singular damped system that survives escalation past 1e12.
    """
    cfg = cfg or LMConfig()
    x = np.asarray(x0, dtype=float).copy()
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("x0 must be finite")

    r = _checked(residual_fn, x, "residual")
    J = _checked(jacobian_fn, x, "jacobian")
    if J.shape != (r.size, x.size):
        raise InvalidInputError(
            f"jacobian shape {J.shape} does not match residual {r.size} x {x.size}"
        )
    cost = 0.5 * float(r @ r)
    cost_history = [cost]
    n_feval = 1
    lam = cfg.lambda0
    status = STATUS_MAX_ITER

    grad = J.T @ r
    if np.max(np.abs(grad), initial=0.0) < cfg.gtol:
        return LMReport(x, cost_history, 0, n_feval, STATUS_GTOL)

    n_iter = 0
    while n_iter < cfg.max_iter:
        n_iter += 1
        step = _damped_step(J, r, lam)
        if step is None:
            lam = max(lam, 1e-12) * cfg.lambda_up
            if lam > LAMBDA_LIMIT:
                status = STATUS_LINEAR_FAIL
                break
            continue

        x_new = x + step
        r_new = _checked(residual_fn, x_new, "residual")
        n_feval += 1
        cost_new = 0.5 * float(r_new @ r_new)

        if cost_new < cost:
            decrease = cost - cost_new
            x, r, cost = x_new, r_new, cost_new
            cost_history.append(cost)
            lam *= cfg.lambda_down
            if decrease <= cfg.ftol * max(cost, np.finfo(float).tiny):
                status = STATUS_FTOL
                break
            if np.linalg.norm(step) < cfg.xtol * (cfg.xtol + np.linalg.norm(x)):
                status = STATUS_XTOL
                break
            J = _checked(jacobian_fn, x, "jacobian")
            grad = J.T @ r
            if np.max(np.abs(grad), initial=0.0) < cfg.gtol:
                status = STATUS_GTOL
                break
        else:
            lam = max(lam, 1e-12) * cfg.lambda_up
            if lam > LAMBDA_LIMIT:
                # no computable improvement left at machine scale
                status = STATUS_FTOL
                break

    return LMReport(x, cost_history, n_iter, n_feval, status)
