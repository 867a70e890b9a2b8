"""Post-fit diagnostics: regression sigma, R-score, covariance, confidence bounds.

The covariance uses the mixed Jacobian H = [dz/dalpha, G] where the first
block is the full (exact) reduced Jacobian at the solution and G is the
block-diagonal linear-parameter Jacobian.  The full-form block is used
regardless of which reduction solved the problem, so the statistics path does
not inherit the one-term Jacobian approximation.
"""

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sl
from scipy.stats import norm

from .exceptions import InvalidInputError
from .vpcore import build_block_diag, eval_gl


@dataclass
class Diagnostics:
    sigma: float
    r_score: float
    covariance: np.ndarray
    conf_bounds: np.ndarray
    dof: int
    rank_warning: bool = False


def sigma_of_regression(residual, m_total, n, s, p):
    """Residual norm over the root of M - s*n - p degrees of freedom."""
    residual = np.asarray(residual, dtype=float)
    dof = m_total - s * n - p
    if dof <= 0:
        raise InvalidInputError(f"nonpositive degrees of freedom: {dof}")
    return float(np.linalg.norm(residual) / np.sqrt(dof))


def r_score(y_all, yhat_all):
    """Regression-sum-of-squares ratio around the observation mean.

    Note this is sum((yhat - ybar)^2) / sum((y - ybar)^2), not the
    conventional 1 - SSE/SST.
    """
    y_all = np.asarray(y_all, dtype=float)
    yhat_all = np.asarray(yhat_all, dtype=float)
    if y_all.shape != yhat_all.shape:
        raise InvalidInputError("observation and model vectors must match in length")
    ybar = y_all.mean()
    denom = float(np.sum((y_all - ybar) ** 2))
    if denom == 0.0:
        raise InvalidInputError("observations are constant; R-score undefined")
    return float(np.sum((yhat_all - ybar) ** 2) / denom)


def build_H(result, problem):
    """Mixed parameter Jacobian [dz/dalpha | G] at the fitted solution."""
    alpha_hat = np.asarray(result.alpha_hat, dtype=float)
    if problem.p > 0:
        red = eval_gl(alpha_hat, problem)
        dz = red.jac
        bases = red.bases
    else:
        dz = np.zeros((problem.m_total, 0))
        bases = None
    big, _, _ = build_block_diag(problem, alpha=alpha_hat, bases=bases)
    return np.hstack([dz, big])


def covariance(H, sigma):
    """sigma^2 (H^T H)^(-1); falls back to a pseudo-inverse with a warning
    when the Gram matrix is numerically singular."""
    H = np.asarray(H, dtype=float)
    if not np.all(np.isfinite(H)) or not np.isfinite(sigma):
        raise InvalidInputError("non-finite inputs to covariance")
    gram = H.T @ H
    rank_warning = False
    try:
        c, low = sl.cho_factor(gram)
        inv = sl.cho_solve((c, low), np.eye(gram.shape[0]))
    except sl.LinAlgError:
        rank_warning = True
        warnings.warn(
            "H^T H is numerically rank deficient; covariance uses a pseudo-inverse",
            RuntimeWarning,
            stacklevel=2,
        )
        inv = np.linalg.pinv(gram)
    C = sigma**2 * inv
    C = 0.5 * (C + C.T)
    return C, rank_warning


def confidence_bounds(C, level=0.95):
    """Two-sided normal-quantile half-widths from the covariance diagonal."""
    C = np.asarray(C, dtype=float)
    if not np.all(np.isfinite(C)):
        raise InvalidInputError("covariance contains non-finite entries")
    if not (0.0 < level < 1.0):
        raise InvalidInputError(f"confidence level must be in (0, 1), got {level}")
    q = norm.ppf(0.5 + level / 2.0)
    return q * np.sqrt(np.clip(np.diag(C), 0.0, None))


def relative_error(alpha_true, alpha_fit):
    """Componentwise (true - fit) / true."""
    alpha_true = np.asarray(alpha_true, dtype=float)
    alpha_fit = np.asarray(alpha_fit, dtype=float)
    if alpha_true.shape != alpha_fit.shape:
        raise InvalidInputError("parameter vectors must match in length")
    if np.any(alpha_true == 0.0):
        raise InvalidInputError("relative error undefined for zero true parameters")
    return (alpha_true - alpha_fit) / alpha_true


def compute_diagnostics(result, problem, level=0.95):
    """Assemble the full diagnostics record for a converged fit."""
    residual = np.concatenate(result.residuals)
    s, n, p = problem.s, problem.n, problem.p
    sigma = sigma_of_regression(residual, problem.m_total, n, s, p)
    y_all = np.concatenate([ds.y for ds in problem.datasets])
    yhat_all = y_all - residual
    score = r_score(y_all, yhat_all)
    H = build_H(result, problem)
    C, rank_warning = covariance(H, sigma)
    bounds = confidence_bounds(C, level=level)
    return Diagnostics(
        sigma=sigma,
        r_score=score,
        covariance=C,
        conf_bounds=bounds,
        dof=problem.m_total - s * n - p,
        rank_warning=rank_warning,
    )
