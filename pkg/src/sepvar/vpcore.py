"""Reduced residual and Jacobian assembly for the three MRHS formulations.

Each dataset owns its own basis matrix (possibly of a different row count);
the nonlinear parameters are shared.  Three equivalent reductions are
provided:

* ``eval_gl``   -- stacked per-dataset projected residuals with the full
                   (exact) Jacobian.
* ``eval_km``   -- the smaller residual obtained by applying the trailing
                   orthogonal factor, with the simplified one-term Jacobian
                   (exact at the gradient level only).
* ``eval_naive``-- the problem rewritten with one explicit dense
                   block-diagonal basis matrix and the single-RHS formulas
                   applied to it.

The three residuals always share the same 2-norm; projectors are never
materialized except inside ``eval_naive``, which is deliberately literal so
its cost profile reflects the formulation it implements.
"""

from dataclasses import dataclass, field

import numpy as np

from .exceptions import InvalidInputError, ProblemTooLargeError, RankDeficiencyError
from .factor import (
    pinv_apply,
    pinv_transpose_apply,
    proj_perp_apply,
    q2t_apply,
    thin_qr,
)

DEFAULT_ELEMENT_BUDGET = 1e8


@dataclass(frozen=True)
class MultiProblem:
    """A shared-nonlinear-parameters fitting problem over several datasets."""

    datasets: tuple
    model: object

    def __post_init__(self):
        object.__setattr__(self, "datasets", tuple(self.datasets))
        if len(self.datasets) < 1:
            raise InvalidInputError("need at least one dataset")
        n = self.model.n
        for k, ds in enumerate(self.datasets):
            if ds.m <= n:
                raise InvalidInputError(
                    f"dataset {k} has m={ds.m} <= n={n}; projected residual would be empty"
                )
        if sum(ds.m - n for ds in self.datasets) < self.model.p:
            raise InvalidInputError(
                "reduced problem is unidentifiable: sum(m_k - n) < p"
            )

    @property
    def s(self):
        return len(self.datasets)

    @property
    def n(self):
        return self.model.n

    @property
    def p(self):
        return self.model.p

    @property
    def m_total(self):
        return sum(ds.m for ds in self.datasets)


@dataclass(frozen=True)
class ReducedEval:
    """Residual, Jacobian and per-dataset intermediates at one alpha."""

    z: np.ndarray
    jac: np.ndarray
    factors: tuple = field(repr=False)
    bases: tuple = field(repr=False)
    betas: tuple = field(repr=False)
    block_sizes: tuple = ()


def _factor_dataset(problem, basis, k):
    try:
        return thin_qr(basis.phi)
    except RankDeficiencyError as err:
        raise RankDeficiencyError(
            f"basis matrix of dataset {k} is rank deficient (rank {err.rank})",
            rank=err.rank,
            dataset=k,
        ) from err


def _check_alpha(alpha, problem):
    alpha = np.asarray(alpha, dtype=float)
    if alpha.shape != (problem.p,):
        raise InvalidInputError(f"alpha must have length {problem.p}, got {alpha.shape}")
    return alpha


def eval_gl(alpha, problem):
    """Golub-LeVeque reduction: projected residuals with the full Jacobian.

    Block k of the l-th Jacobian column is
    -(P_perp dphi_l beta + pinv^T dphi_l^T r) with beta the linear solution
    and r the projected residual of dataset k.
    """
    alpha = _check_alpha(alpha, problem)
    blocks, jac_blocks, factors, bases, betas = [], [], [], [], []
    for k, ds in enumerate(problem.datasets):
        be = problem.model.eval(alpha, ds)
        f = _factor_dataset(problem, be, k)
        beta = pinv_apply(f, ds.y)
        r = proj_perp_apply(f, ds.y)
        jb = np.empty((ds.m, problem.p))
        for l in range(problem.p):
            d = be.dphi[l]
            term1 = proj_perp_apply(f, d @ beta)
            term2 = pinv_transpose_apply(f, d.T @ r)
            jb[:, l] = -(term1 + term2)
        blocks.append(r)
        jac_blocks.append(jb)
        factors.append(f)
        bases.append(be)
        betas.append(beta)
    return ReducedEval(
        z=np.concatenate(blocks),
        jac=np.vstack(jac_blocks),
        factors=tuple(factors),
        bases=tuple(bases),
        betas=tuple(betas),
        block_sizes=tuple(ds.m for ds in problem.datasets),
    )


def eval_km(alpha, problem):
    """Kaufman reduction: shorter residual, one-term (approximate) Jacobian."""
    alpha = _check_alpha(alpha, problem)
    blocks, jac_blocks, factors, bases, betas = [], [], [], [], []
    for k, ds in enumerate(problem.datasets):
        be = problem.model.eval(alpha, ds)
        f = _factor_dataset(problem, be, k)
        beta = pinv_apply(f, ds.y)
        # one blocked application covers the residual and all Jacobian columns
        rhs = np.empty((ds.m, 1 + problem.p), order="F")
        rhs[:, 0] = ds.y
        for l in range(problem.p):
            rhs[:, l + 1] = be.dphi[l] @ beta
        tail = q2t_apply(f, rhs)
        zk = tail[:, 0].copy()
        jb = -tail[:, 1:]
        blocks.append(zk)
        jac_blocks.append(jb)
        factors.append(f)
        bases.append(be)
        betas.append(beta)
    return ReducedEval(
        z=np.concatenate(blocks),
        jac=np.vstack(jac_blocks),
        factors=tuple(factors),
        bases=tuple(bases),
        betas=tuple(betas),
        block_sizes=tuple(ds.m - problem.n for ds in problem.datasets),
    )


def build_block_diag(problem, alpha=None, bases=None):
    """Dense block-diagonal basis matrix and its derivatives.

    Deliberately explicit (zero-filled) so the naive formulation keeps its
    literal cost profile.
    """
    if bases is None:
        bases = [problem.model.eval(alpha, ds) for ds in problem.datasets]
    m_total = problem.m_total
    n_total = problem.n * problem.s
    big = np.zeros((m_total, n_total))
    dbig = [np.zeros((m_total, n_total)) for _ in range(problem.p)]
    row = 0
    for k, be in enumerate(bases):
        m_k = be.phi.shape[0]
        cols = slice(k * problem.n, (k + 1) * problem.n)
        big[row : row + m_k, cols] = be.phi
        for l in range(problem.p):
            dbig[l][row : row + m_k, cols] = be.dphi[l]
        row += m_k
    return big, dbig, bases


def eval_naive(alpha, problem, element_budget=DEFAULT_ELEMENT_BUDGET):
    """Naive reduction: single-RHS formulas on the explicit block-diagonal matrix."""
    alpha = _check_alpha(alpha, problem)
    m_total = problem.m_total
    n_total = problem.n * problem.s
    if m_total * n_total > element_budget:
        raise ProblemTooLargeError(
            f"block-diagonal matrix would hold {m_total * n_total:.3g} elements, "
            f"budget is {element_budget:.3g}"
        )
    big, dbig, bases = build_block_diag(problem, alpha=alpha)
    y_all = np.concatenate([ds.y for ds in problem.datasets])
    try:
        f = thin_qr(big)
    except RankDeficiencyError as err:
        raise RankDeficiencyError(
            f"block-diagonal basis matrix is rank deficient (rank {err.rank})",
            rank=err.rank,
        ) from err
    beta_all = pinv_apply(f, y_all)
    r = proj_perp_apply(f, y_all)
    jac = np.empty((m_total, problem.p))
    for l in range(problem.p):
        term1 = proj_perp_apply(f, dbig[l] @ beta_all)
        term2 = pinv_transpose_apply(f, dbig[l].T @ r)
        jac[:, l] = -(term1 + term2)
    betas = tuple(
        beta_all[k * problem.n : (k + 1) * problem.n] for k in range(problem.s)
    )
    return ReducedEval(
        z=r,
        jac=jac,
        factors=(f,),
        bases=tuple(bases),
        betas=betas,
        block_sizes=tuple(ds.m for ds in problem.datasets),
    )
