"""Separable model interface and the two built-in models.

A separable model maps a nonlinear parameter vector and one dataset to the
basis matrix (one column per linear parameter) together with its partial
derivatives with respect to each nonlinear parameter.  Two models ship with
the package: a multi-exponential decay test model and a Beer-law absorption
model (polynomial surface reflectivity times solar spectrum times molecular
transmission, convolved with a Gaussian instrument response).
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.ndimage as ndi

from .exceptions import InvalidInputError, ModelOverflowError

EXP_OVERFLOW_LIMIT = 700.0  # exp() overflows double precision just above this


@dataclass(frozen=True)
class BeerAux:
    """Auxiliary inputs of the Beer-law model for one dataset.

    mu_sun: geometry factor (cosine of the solar zenith angle), in (0, 1].
    i0: solar-spectrum samples on the dataset grid, all positive.
    tau: prior optical-depth profiles, one column per species, entries >= 0.
    slit_halfwidth: Gaussian instrument-response half-width in grid units
        (0 means a delta response, i.e. no convolution).
    """

    mu_sun: float
    i0: np.ndarray
    tau: np.ndarray
    slit_halfwidth: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "i0", np.asarray(self.i0, dtype=float))
        object.__setattr__(self, "tau", np.asarray(self.tau, dtype=float))
        if not (0.0 < self.mu_sun <= 1.0):
            raise InvalidInputError(f"mu_sun must be in (0, 1], got {self.mu_sun}")
        if np.any(self.i0 <= 0.0):
            raise InvalidInputError("solar spectrum samples must all be positive")
        if self.tau.ndim != 2 or self.tau.shape[0] != self.i0.shape[0]:
            raise InvalidInputError("tau must be an m x p matrix matching i0")
        if np.any(self.tau < 0.0):
            raise InvalidInputError("optical depths must be nonnegative")
        if self.slit_halfwidth < 0.0:
            raise InvalidInputError("slit half-width must be nonnegative")


@dataclass(frozen=True)
class Dataset:
    """One right-hand side: abscissa grid, observations and model auxiliaries."""

    t: np.ndarray
    y: np.ndarray
    aux: Optional[object] = None
    id: str = ""

    def __post_init__(self):
        object.__setattr__(self, "t", np.asarray(self.t, dtype=float))
        object.__setattr__(self, "y", np.asarray(self.y, dtype=float))
        if self.t.ndim != 1 or self.y.ndim != 1:
            raise InvalidInputError("t and y must be one-dimensional")
        if self.t.shape != self.y.shape or self.t.size < 1:
            raise InvalidInputError(
                f"t and y must share a positive length, got {self.t.size} and {self.y.size}"
            )
        if np.any(np.diff(self.t) <= 0.0):
            raise InvalidInputError("abscissa grid must be strictly increasing")

    @property
    def m(self):
        return self.t.size


@dataclass(frozen=True)
class BasisEval:
    """Basis matrix and its partial derivatives for one dataset.

    phi has shape m x n; dphi holds one m x n matrix per nonlinear parameter.
    """

    phi: np.ndarray
    dphi: tuple

    def __post_init__(self):
        object.__setattr__(self, "phi", np.asarray(self.phi, dtype=float))
        object.__setattr__(self, "dphi", tuple(np.asarray(d, dtype=float) for d in self.dphi))
        for d in self.dphi:
            if d.shape != self.phi.shape:
                raise InvalidInputError("dphi blocks must match phi's shape")
        if not np.all(np.isfinite(self.phi)) or any(
            not np.all(np.isfinite(d)) for d in self.dphi
        ):
            raise InvalidInputError("basis evaluation produced non-finite entries")


def normalize_abscissa(t):
    """Affine map of a strictly increasing grid onto [-1, 1]."""
    t = np.asarray(t, dtype=float)
    lo, hi = t[0], t[-1]
    if hi == lo:
        raise InvalidInputError("cannot normalize a constant grid")
    return 2.0 * (t - lo) / (hi - lo) - 1.0


def eval_exp_basis(alpha, dataset):
    """Multi-exponential basis: column j is exp(-alpha_j * t).

    The number of linear and nonlinear parameters coincide; the derivative
    with respect to alpha_l is nonzero only in column l.
    """
    alpha = np.asarray(alpha, dtype=float)
    if alpha.ndim != 1 or not np.all(np.isfinite(alpha)):
        raise InvalidInputError("alpha must be a finite vector")
    t = dataset.t
    phi = np.exp(-np.outer(t, alpha))
    dphi = []
    for l in range(alpha.size):
        d = np.zeros_like(phi)
        d[:, l] = -t * phi[:, l]
        dphi.append(d)
    return BasisEval(phi=phi, dphi=tuple(dphi))


def gaussian_kernel(spacing, halfwidth):
    """Truncated Gaussian instrument response on a uniform grid.

    Support is +/- 4 half-widths; weights are renormalized to unit sum.  A
    nonpositive half-width (or one below the grid spacing scale) degenerates
    to a discrete delta.
    """
    if halfwidth <= 0.0 or spacing <= 0.0:
        return np.array([1.0])
    nh = int(np.floor(4.0 * halfwidth / spacing))
    if nh < 1:
        return np.array([1.0])
    x = np.arange(-nh, nh + 1) * spacing
    w = np.exp(-0.5 * (x / halfwidth) ** 2)
    return w / w.sum()


def _convolve_columns(a, kernel):
    if kernel.size == 1:
        return a
    return ndi.convolve1d(a, kernel, axis=0, mode="reflect")


def eval_beer_basis(alpha, dataset, n_linear=1):
    """Beer-law basis on the normalized grid.

    Column j is the convolution of nu^j * mu_sun * I0 * exp(-sum_l alpha_l tau_l)
    with the instrument response, nu being the abscissa normalized to [-1, 1].
    Differentiation and convolution commute (the response does not depend on
    alpha), so the derivative columns are the convolved products with -tau_l.
    """
    alpha = np.asarray(alpha, dtype=float)
    if alpha.ndim != 1 or not np.all(np.isfinite(alpha)):
        raise InvalidInputError("alpha must be a finite vector")
    aux = dataset.aux
    if not isinstance(aux, BeerAux):
        raise InvalidInputError("Beer-law model requires a BeerAux auxiliary record")
    if aux.tau.shape[1] != alpha.size:
        raise InvalidInputError(
            f"alpha has length {alpha.size} but tau has {aux.tau.shape[1]} species columns"
        )

    exponent = -aux.tau @ alpha
    worst = int(np.argmax(exponent))
    if exponent[worst] > EXP_OVERFLOW_LIMIT:
        raise ModelOverflowError(
            f"absorption exponent overflows at grid index {worst}", index=worst
        )
    base = aux.mu_sun * aux.i0 * np.exp(exponent)
    return _assemble_beer(dataset, base, aux, n_linear)


def _assemble_beer(dataset, base, aux, n):
    nu = normalize_abscissa(dataset.t)
    powers = nu[:, None] ** np.arange(n)
    mono = base[:, None] * powers
    spacing = float(np.mean(np.diff(dataset.t)))
    kernel = gaussian_kernel(spacing, aux.slit_halfwidth)
    phi = _convolve_columns(mono, kernel)
    dphi = tuple(
        _convolve_columns(-aux.tau[:, l : l + 1] * mono, kernel)
        for l in range(aux.tau.shape[1])
    )
    return BasisEval(phi=phi, dphi=dphi)


@dataclass(frozen=True)
class ExpDecayModel:
    """Sum-of-decaying-exponentials test model; n linear == p nonlinear terms."""

    n_terms: int

    @property
    def n(self):
        return self.n_terms

    @property
    def p(self):
        return self.n_terms

    def eval(self, alpha, dataset):
        alpha = np.asarray(alpha, dtype=float)
        if alpha.shape != (self.p,):
            raise InvalidInputError(f"alpha must have length {self.p}, got {alpha.shape}")
        return eval_exp_basis(alpha, dataset)


@dataclass(frozen=True)
class BeerLawModel:
    """Beer-law absorption model: n reflectivity coefficients, p species factors."""

    n_linear: int
    p_species: int

    @property
    def n(self):
        return self.n_linear

    @property
    def p(self):
        return self.p_species

    def eval(self, alpha, dataset):
        alpha = np.asarray(alpha, dtype=float)
        if alpha.shape != (self.p,):
            raise InvalidInputError(f"alpha must have length {self.p}, got {alpha.shape}")
        aux = dataset.aux
        if not isinstance(aux, BeerAux):
            raise InvalidInputError("Beer-law model requires a BeerAux auxiliary record")
        if aux.tau.shape[1] != self.p:
            raise InvalidInputError(
                f"model declares {self.p} species but tau has {aux.tau.shape[1]} columns"
            )
        return eval_beer_basis(alpha, dataset, n_linear=self.n_linear)
