"""Fit orchestration: the three VP reductions and the joint NLS reference.

VP methods minimize the reduced residual over the nonlinear parameters only
and recover each dataset's linear parameters by one exact linear solve at the
optimum.  The reference method stacks all linear parameters into the iterate
and solves the joint problem, warm-starting the linear part from the linear
solution at the initial nonlinear guess.
"""

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .exceptions import InvalidInputError
from .factor import pinv_apply, thin_qr
from .lm import LMConfig, lm_solve
from .vpcore import DEFAULT_ELEMENT_BUDGET, eval_gl, eval_km, eval_naive

METHOD_VP_GL = "vp-gl"
METHOD_VP_KM = "vp-km"
METHOD_VP_NAIVE = "vp-naive"
METHOD_NLS_FULL = "nls-full"
METHODS = (METHOD_VP_GL, METHOD_VP_KM, METHOD_VP_NAIVE, METHOD_NLS_FULL)

_VP_EVALS = {
    METHOD_VP_GL: eval_gl,
    METHOD_VP_KM: eval_km,
    METHOD_VP_NAIVE: eval_naive,
}


@dataclass(frozen=True)
class SolverConfig:
    method: str = METHOD_VP_GL
    lm: LMConfig = field(default_factory=LMConfig)
    naive_element_budget: float = DEFAULT_ELEMENT_BUDGET

    def __post_init__(self):
        if self.method not in METHODS:
            raise InvalidInputError(
                f"unknown method {self.method!r}; expected one of {METHODS}"
            )


@dataclass
class FitResult:
    alpha_hat: np.ndarray
    beta_hat: list
    residuals: list
    lm_report: object
    wall_time: float
    method: str
    diagnostics: Optional[object] = None

    @property
    def cost(self):
        """Final joint cost 0.5*sum_k ||y_k - phi_k beta_k||^2."""
        return 0.5 * sum(float(r @ r) for r in self.residuals)


def initial_beta(problem, alpha0):
    """Per-dataset linear solutions at the initial nonlinear guess."""
    alpha0 = np.asarray(alpha0, dtype=float)
    betas = []
    for ds in problem.datasets:
        be = problem.model.eval(alpha0, ds)
        betas.append(pinv_apply(thin_qr(be.phi), ds.y))
    return betas


def nls_full_residual(x, problem):
    """Stacked joint residual; x = (alpha, beta_1, ..., beta_s)."""
    x = np.asarray(x, dtype=float)
    p, n, s = problem.p, problem.n, problem.s
    if x.shape != (p + s * n,):
        raise InvalidInputError(f"x must have length {p + s * n}, got {x.shape}")
    alpha = x[:p]
    blocks = []
    for k, ds in enumerate(problem.datasets):
        beta = x[p + k * n : p + (k + 1) * n]
        be = problem.model.eval(alpha, ds)
        blocks.append(ds.y - be.phi @ beta)
    return np.concatenate(blocks)


def nls_full_jacobian(x, problem):
    """Jacobian of the stacked joint residual; exact block sparsity."""
    x = np.asarray(x, dtype=float)
    p, n, s = problem.p, problem.n, problem.s
    if x.shape != (p + s * n,):
        raise InvalidInputError(f"x must have length {p + s * n}, got {x.shape}")
    alpha = x[:p]
    M = problem.m_total
    J = np.zeros((M, p + s * n))
    row = 0
    for k, ds in enumerate(problem.datasets):
        beta = x[p + k * n : p + (k + 1) * n]
        be = problem.model.eval(alpha, ds)
        rows = slice(row, row + ds.m)
        for l in range(p):
            J[rows, l] = -(be.dphi[l] @ beta)
        J[rows, p + k * n : p + (k + 1) * n] = -be.phi
        row += ds.m
    return J


class _CachedReduced:
    """One reduced evaluation per alpha; the engine asks for residual and
    Jacobian at the same point, so both come from a single pass."""

    def __init__(self, problem, method, element_budget):
        self.problem = problem
        if method == METHOD_VP_NAIVE:
            self._eval = lambda a: eval_naive(a, problem, element_budget=element_budget)
        else:
            base = _VP_EVALS[method]
            self._eval = lambda a: base(a, problem)
        self._key = None
        self._value = None

    def at(self, alpha):
        key = np.asarray(alpha, dtype=float).tobytes()
        if key != self._key:
            self._value = self._eval(np.asarray(alpha, dtype=float))
            self._key = key
        return self._value

    def residual(self, alpha):
        return self.at(alpha).z

    def jacobian(self, alpha):
        return self.at(alpha).jac


def _final_linear_solve(problem, alpha_hat):
    betas, residuals = [], []
    for ds in problem.datasets:
        be = problem.model.eval(alpha_hat, ds)
        f = thin_qr(be.phi)
        beta = pinv_apply(f, ds.y)
        betas.append(beta)
        residuals.append(ds.y - be.phi @ beta)
    return betas, residuals


def fit(problem, cfg, alpha0):
    """Run one fit; linear parameters are always the exact linear minimizers
    at the returned nonlinear solution."""
    alpha0 = np.asarray(alpha0, dtype=float)
    if alpha0.shape != (problem.p,):
        raise InvalidInputError(
            f"alpha0 must have length {problem.p}, got {alpha0.shape}"
        )
    t_start = time.perf_counter()
    if cfg.method in _VP_EVALS:
        cache = _CachedReduced(problem, cfg.method, cfg.naive_element_budget)
        report = lm_solve(cache.residual, cache.jacobian, alpha0, cfg.lm)
        alpha_hat = report.x_final
    else:
        beta0 = initial_beta(problem, alpha0)
        x0 = np.concatenate([alpha0] + beta0)
        report = lm_solve(
            lambda x: nls_full_residual(x, problem),
            lambda x: nls_full_jacobian(x, problem),
            x0,
            cfg.lm,
        )
        alpha_hat = report.x_final[: problem.p]
    betas, residuals = _final_linear_solve(problem, alpha_hat)
    wall = time.perf_counter() - t_start
    return FitResult(
        alpha_hat=alpha_hat,
        beta_hat=betas,
        residuals=residuals,
        lm_report=report,
        wall_time=wall,
        method=cfg.method,
    )
