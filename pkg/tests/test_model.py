import numpy as np
import numpy.testing as npt
import pytest

from sepvar.exceptions import InvalidInputError, ModelOverflowError
from sepvar.model import (
    BeerAux,
    BeerLawModel,
    Dataset,
    ExpDecayModel,
    eval_beer_basis,
    eval_exp_basis,
    normalize_abscissa,
)

from conftest import central_diff_jacobian


def make_beer_dataset(rng, m=40, p=2, lo=6140.0, hi=6280.0, halfwidth=None, tau=None):
    t = np.linspace(lo, hi, m)
    if tau is None:
        tau = np.zeros((m, p))
        for l in range(p):
            c = rng.uniform(lo, hi, 6)
            w = rng.uniform(0.02, 0.05, 6) * (hi - lo)
            for cc, ww in zip(c, w):
                tau[:, l] += rng.uniform(0.3, 1.0) * np.exp(-0.5 * ((t - cc) / ww) ** 2)
    i0 = 1.0 + 0.1 * np.sin(t / 30.0)
    if halfwidth is None:
        halfwidth = 0.01 * (hi - lo)
    aux = BeerAux(mu_sun=0.8, i0=i0, tau=tau, slit_halfwidth=halfwidth)
    return Dataset(t=t, y=np.ones(m), aux=aux)


class TestDataset:
    def test_nonincreasing_grid_rejected(self):
        with pytest.raises(InvalidInputError):
            Dataset(t=[0.0, 1.0, 1.0], y=[1.0, 2.0, 3.0])

    def test_length_mismatch_rejected(self):
        with pytest.raises(InvalidInputError):
            Dataset(t=[0.0, 1.0], y=[1.0])

    def test_bad_beer_aux_rejected(self):
        with pytest.raises(InvalidInputError):
            BeerAux(mu_sun=0.5, i0=[1.0, 0.0], tau=np.zeros((2, 1)))
        with pytest.raises(InvalidInputError):
            BeerAux(mu_sun=1.5, i0=[1.0, 1.0], tau=np.zeros((2, 1)))


class TestNormalizeAbscissa:
    def test_symmetric_map(self):
        npt.assert_allclose(normalize_abscissa([0.0, 1.0, 2.0]), [-1.0, 0.0, 1.0])

    def test_endpoints(self):
        npt.assert_allclose(normalize_abscissa([5000.0, 5100.0]), [-1.0, 1.0])

    def test_affine_formula(self):
        t = np.array([6140.0, 6250.0, 6280.0])
        expected = 2.0 * (t - t.min()) / (t.max() - t.min()) - 1.0
        npt.assert_allclose(normalize_abscissa(t), expected, rtol=1e-15)

    def test_constant_grid_rejected(self):
        with pytest.raises(InvalidInputError):
            normalize_abscissa(np.array([2.0, 2.0]))


class TestExpBasis:
    def test_zero_alpha_all_ones(self):
        ds = Dataset(t=[1.0, 2.0], y=[0.0, 0.0])
        be = eval_exp_basis(np.zeros(2), ds)
        npt.assert_allclose(be.phi, np.ones((2, 2)))

    def test_zero_time_kills_derivative(self):
        ds = Dataset(t=[0.0], y=[0.0])
        be = eval_exp_basis(np.array([1.0]), ds)
        npt.assert_allclose(be.phi, [[1.0]])
        npt.assert_allclose(be.dphi[0], [[0.0]])

    def test_single_point_derivative(self):
        ds = Dataset(t=[2.0], y=[0.0])
        be = eval_exp_basis(np.array([0.5]), ds)
        npt.assert_allclose(be.phi, [[np.exp(-1.0)]], rtol=1e-15)
        npt.assert_allclose(be.dphi[0], [[-2.0 * np.exp(-1.0)]], rtol=1e-15)
        # independent oracle: central finite difference
        fd = central_diff_jacobian(
            lambda a: eval_exp_basis(a, ds).phi.ravel(), np.array([0.5])
        )
        npt.assert_allclose(be.dphi[0].ravel(), fd[:, 0], rtol=1e-8)

    def test_cross_terms_zero(self):
        ds = Dataset(t=[0.5, 1.5, 2.5], y=np.zeros(3))
        be = eval_exp_basis(np.array([0.3, 0.9]), ds)
        npt.assert_allclose(be.dphi[0][:, 1], 0.0)
        npt.assert_allclose(be.dphi[1][:, 0], 0.0)

    def test_model_shape_check(self):
        ds = Dataset(t=[0.5, 1.5], y=np.zeros(2))
        with pytest.raises(InvalidInputError):
            ExpDecayModel(n_terms=2).eval(np.array([1.0]), ds)


class TestBeerBasis:
    def test_zero_alpha_unit_transmission(self, rng):
        ds = make_beer_dataset(rng, m=30)
        n = 3
        be = eval_beer_basis(np.zeros(2), ds, n_linear=n)
        # transmission == 1: columns are the convolved polynomial-times-continuum
        aux = ds.aux
        import scipy.ndimage as ndi

        from sepvar.model import gaussian_kernel

        nu = normalize_abscissa(ds.t)
        spacing = float(np.mean(np.diff(ds.t)))
        kernel = gaussian_kernel(spacing, aux.slit_halfwidth)
        mono = (aux.mu_sun * aux.i0)[:, None] * nu[:, None] ** np.arange(n)
        ref = ndi.convolve1d(mono, kernel, axis=0, mode="reflect")
        npt.assert_allclose(be.phi, ref, rtol=1e-13)

    def test_delta_response_vandermonde(self):
        m, p, n = 25, 2, 3
        t = np.linspace(6140.0, 6280.0, m)
        aux = BeerAux(mu_sun=1.0, i0=np.ones(m), tau=np.zeros((m, p)), slit_halfwidth=0.0)
        ds = Dataset(t=t, y=np.ones(m), aux=aux)
        be = eval_beer_basis(np.zeros(p), ds, n_linear=n)
        nu = normalize_abscissa(t)
        npt.assert_allclose(be.phi, nu[:, None] ** np.arange(n), rtol=1e-14)

    def test_paper_configuration_shapes(self, rng):
        # three reflectivity coefficients, two species scale factors
        ds = make_beer_dataset(rng, m=50, p=2)
        model = BeerLawModel(n_linear=3, p_species=2)
        be = model.eval(np.array([1.0, 1.0]), ds)
        assert be.phi.shape == (50, 3)
        assert len(be.dphi) == 2 and be.dphi[0].shape == (50, 3)

    def test_zero_tau_zero_derivative(self, rng):
        ds = make_beer_dataset(rng, m=20, tau=np.zeros((20, 2)))
        be = eval_beer_basis(np.array([0.7, 1.3]), ds, n_linear=2)
        for d in be.dphi:
            npt.assert_allclose(d, 0.0, atol=1e-15)

    def test_overflow_reported_with_index(self, rng):
        ds = make_beer_dataset(rng, m=20)
        with pytest.raises(ModelOverflowError) as exc:
            eval_beer_basis(np.array([-4000.0, 0.0]), ds, n_linear=2)
        assert exc.value.index is not None

    def test_nonpositive_i0_rejected(self):
        with pytest.raises(InvalidInputError):
            BeerAux(mu_sun=1.0, i0=np.array([1.0, -1.0]), tau=np.zeros((2, 1)))


class TestDerivativeProperty:
    @pytest.mark.parametrize("kind", ["exp", "beer"])
    def test_dphi_matches_finite_differences(self, kind, rng):
        for trial in range(5):
            if kind == "exp":
                ds = Dataset(t=np.sort(rng.uniform(0, 3, 12)), y=np.zeros(12))
                model = ExpDecayModel(n_terms=2)
                alpha = rng.uniform(0.2, 1.5, 2)
            else:
                ds = make_beer_dataset(rng, m=30)
                model = BeerLawModel(n_linear=3, p_species=2)
                alpha = rng.uniform(0.5, 1.5, 2)
            be = model.eval(alpha, ds)
            fd = central_diff_jacobian(lambda a: model.eval(a, ds).phi.ravel(), alpha)
            scale = max(np.linalg.norm(d) for d in be.dphi)
            for l in range(model.p):
                err = np.linalg.norm(be.dphi[l].ravel() - fd[:, l])
                assert err <= 1e-6 * max(scale, 1e-12)

    def test_bitwise_reproducible(self, rng):
        ds = make_beer_dataset(rng, m=30)
        model = BeerLawModel(n_linear=3, p_species=2)
        alpha = np.array([0.9, 1.1])
        a = model.eval(alpha, ds)
        b = model.eval(alpha, ds)
        assert np.array_equal(a.phi, b.phi)
        assert all(np.array_equal(x, y) for x, y in zip(a.dphi, b.dphi))
