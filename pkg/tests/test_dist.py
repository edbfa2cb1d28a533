import math

import numpy as np
import pytest
from pydantic import ValidationError
from scipy import integrate

from app.core.errors import DimensionMismatchError, RejectionBudgetExceededError
from app.models.distributions import (
    Box,
    Bridge1D,
    BridgeGaussianCov,
    BridgeND,
    BridgeProduct,
    Gaussian,
    Halfspace,
    IntervalUnion,
    TruncatedGaussian,
    UniformBox,
)
from app.services.dist import dist_service

INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


class TestDensities:
    def test_standard_normal_mode(self):
        assert dist_service.pdf(Gaussian.standard(1), 0.0) == pytest.approx(0.3989422804, rel=1e-9)

    def test_uniform_density(self):
        u = UniformBox(lo=[0.0], hi=[2.0])
        assert dist_service.pdf(u, 1.0) == pytest.approx(0.5)
        assert dist_service.pdf(u, 3.0) == 0.0

    def test_zero_shift_bridge_is_standard_normal(self):
        grid = np.linspace(-6, 6, 241)
        np.testing.assert_allclose(
            dist_service.pdf(Bridge1D(mu=0.0), grid), dist_service.pdf(Gaussian.standard(1), grid), rtol=1e-12
        )

    @pytest.mark.parametrize(
        "density, breaks",
        [
            (Gaussian.standard(1, [0.5]), [0.5]),
            (Bridge1D(mu=2.0), [0.0, 2.0]),
            (Bridge1D(mu=-3.0), [-3.0, 0.0]),
            (TruncatedGaussian(mean=[0.0], cov=[[1.0]], truncation=IntervalUnion(intervals=[(-1.0, 0.5), (1.0, 2.0)])), [-1.0, 0.5, 1.0, 2.0]),
        ],
    )
    def test_one_dimensional_pdfs_integrate_to_one(self, density, breaks):
        total, _ = integrate.quad(lambda x: dist_service.pdf(density, x), -40, 40, points=breaks, limit=200)
        assert total == pytest.approx(1.0, abs=1e-6)

    @pytest.mark.parametrize("mu", [0.5, 2.0, -4.0])
    def test_bridge_is_log_concave(self, mu):
        grid = np.linspace(-8, 8, 161)
        x, y = np.meshgrid(grid, grid)
        x, y = x.ravel(), y.ravel()
        b = Bridge1D(mu=mu)
        mid = dist_service.logpdf(b, (x + y) / 2)
        assert np.all(mid >= (dist_service.logpdf(b, x) + dist_service.logpdf(b, y)) / 2 - 1e-9)

    def test_rotated_bridge_matches_1d_bridge_on_axis(self):
        nd = BridgeND(mu=[3.0, 0.0])
        points = np.column_stack([np.linspace(-3, 6, 19), np.zeros(19)])
        expected = dist_service.logpdf(Bridge1D(mu=3.0), points[:, 0]) - 0.5 * math.log(2 * math.pi)
        np.testing.assert_allclose(dist_service.logpdf(nd, points), expected, rtol=1e-10)

    def test_validation(self):
        with pytest.raises(ValidationError):
            UniformBox(lo=[1.0], hi=[0.0])
        with pytest.raises(ValidationError):
            Gaussian(mean=[0.0, 0.0], cov=[[1.0, 2.0], [2.0, 1.0]])
        with pytest.raises(ValidationError):
            IntervalUnion(intervals=[(0.0, 2.0), (1.0, 3.0)])
        with pytest.raises(ValidationError):
            BridgeProduct(factors=[Gaussian.standard(1, [1.0])], shift=1.0)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            dist_service.pdf(Gaussian.standard(2), [0.0, 0.0, 0.0])


class TestSampling:
    def test_gaussian_mean(self):
        x = dist_service.sample(Gaussian.standard(1), 100_000, seed=3)
        assert x.shape == (100_000, 1)
        assert abs(x.mean()) < 0.02

    def test_truncated_support(self):
        law = TruncatedGaussian(mean=[0.0], cov=[[1.0]], truncation=IntervalUnion.half_line(0.0))
        assert np.all(dist_service.sample(law, 5000, seed=1) >= 0.0)

    def test_tail_uses_inverse_cdf(self):
        law = TruncatedGaussian(mean=[0.0], cov=[[1.0]], truncation=IntervalUnion.half_line(4.0))
        x = dist_service.sample(law, 2000, seed=1)
        assert np.all(x >= 4.0)

    def test_far_tail_refused(self):
        law = TruncatedGaussian(mean=[0.0], cov=[[1.0]], truncation=IntervalUnion.half_line(10.0))
        with pytest.raises(RejectionBudgetExceededError):
            dist_service.sample(law, 10, seed=1)

    def test_halfspace_truncation(self):
        law = TruncatedGaussian(
            mean=[0.0, 0.0], cov=[[1.0, 0.3], [0.3, 2.0]], truncation=Halfspace(normal=[1.0, 1.0], offset=0.5)
        )
        x = dist_service.sample(law, 3000, seed=2)
        assert np.all(x.sum(axis=1) >= 0.5)

    def test_fixed_seed_reproducible(self):
        for d in (Gaussian.standard(2), Bridge1D(mu=1.5), BridgeND(mu=[1.0, 2.0])):
            np.testing.assert_array_equal(dist_service.sample(d, 100, 7), dist_service.sample(d, 100, 7))

    def test_bridge_sample_mean(self):
        # Slab [0, mu] carries mass mu*phi(0)/Z centred at mu/2; the tails are offset half-normals.
        mu = 2.0
        z = 1.0 + mu * INV_SQRT_2PI
        half = math.sqrt(2.0 / math.pi)
        expected = (0.5 * -half + mu * INV_SQRT_2PI * mu / 2 + 0.5 * (mu + half)) / z
        x = dist_service.sample(Bridge1D(mu=mu), 200_000, seed=5)
        assert x.mean() == pytest.approx(expected, abs=0.02)


class TestRatiosAndDivergences:
    def test_identical_densities(self):
        assert dist_service.density_ratio_sup(Gaussian.standard(1), Gaussian.standard(1)).value == pytest.approx(1.0)

    def test_nested_uniforms(self):
        sup = dist_service.density_ratio_sup(UniformBox(lo=[0.0], hi=[1.0]), UniformBox(lo=[0.0], hi=[3.0]))
        assert sup.value == pytest.approx(3.0)
        assert sup.method == "closed_form"

    def test_uncovered_support_is_infinite(self):
        sup = dist_service.density_ratio_sup(UniformBox(lo=[0.0], hi=[1.0]), UniformBox(lo=[2.0], hi=[3.0]))
        assert math.isinf(sup.value)
        assert "infinite_ratio" in sup.flags

    @pytest.mark.parametrize("mu", [0.5, 1.0, 2.0])
    def test_gaussian_against_bridge(self, mu):
        sup = dist_service.density_ratio_sup(Gaussian.standard(1), Bridge1D(mu=mu))
        assert sup.value == pytest.approx(1.0 + mu * INV_SQRT_2PI, rel=0.01)

    def test_renyi_identical(self):
        assert dist_service.renyi_divergence(Gaussian.standard(1), Gaussian.standard(1), 2.0).value == pytest.approx(1.0)

    def test_renyi_uniform_pair(self):
        P, Q = UniformBox(lo=[0.0], hi=[1.0]), UniformBox(lo=[0.0], hi=[2.0])
        assert dist_service.renyi_divergence(P, Q, 1.0, seed=1).value == pytest.approx(1.0, abs=0.02)
        assert dist_service.renyi_divergence(P, Q, 2.0, seed=1).value == pytest.approx(math.sqrt(2.0), abs=0.02)
        assert dist_service.renyi_divergence(P, Q, math.inf).value == pytest.approx(2.0)

    def test_renyi_infinite(self):
        P, Q = UniformBox(lo=[0.0], hi=[2.0]), UniformBox(lo=[0.0], hi=[1.0])
        est = dist_service.renyi_divergence(P, Q, math.inf)
        assert math.isinf(est.value) and est.is_infinite

    @pytest.mark.parametrize(
        "P, Q",
        [
            (UniformBox(lo=[0.0], hi=[1.0]), UniformBox(lo=[0.0], hi=[3.0])),
            (Gaussian.standard(1), Gaussian(mean=[0.0], cov=[[4.0]])),
            (Gaussian(mean=[0.3], cov=[[0.5]]), Gaussian.standard(1)),
        ],
    )
    def test_renyi_nondecreasing_in_order(self, P, Q):
        values = [
            dist_service.renyi_divergence(P, Q, alpha, n_samples=50_000, seed=4).value for alpha in (1.0, 2.0, 4.0)
        ]
        values.append(dist_service.renyi_divergence(P, Q, math.inf).value)
        assert all(a <= b * (1 + 1e-9) for a, b in zip(values, values[1:]))

    @pytest.mark.parametrize(
        "P, Q",
        [
            (Gaussian.standard(1), Gaussian(mean=[0.0], cov=[[4.0]])),
            (Gaussian(mean=[0.0], cov=[[4.0]]), Gaussian.standard(1)),
            (Gaussian.standard(2), Gaussian.standard(2, [0.5, -0.5])),
            (UniformBox(lo=[0.0], hi=[1.0]), UniformBox(lo=[-1.0], hi=[1.0])),
            (Gaussian.standard(1), Bridge1D(mu=1.5)),
        ],
    )
    def test_ratio_sup_at_least_one(self, P, Q):
        assert dist_service.density_ratio_sup(P, Q).value >= 1.0 - 1e-9

    def test_bounding_box_default(self):
        lo, hi = dist_service.bounding_box(Gaussian.standard(1, [1.0]))
        assert lo[0] == pytest.approx(-7.0) and hi[0] == pytest.approx(9.0)


class TestGaussianMass:
    def test_half_line(self):
        assert dist_service.gaussian_mass([0.0], [[1.0]], IntervalUnion.half_line(0.0)).value == pytest.approx(0.5)

    def test_real_line(self):
        assert dist_service.gaussian_mass([0.0], [[1.0]], IntervalUnion.real_line()).value == pytest.approx(1.0)

    def test_upper_tail(self):
        mass = dist_service.gaussian_mass([0.0], [[1.0]], IntervalUnion.half_line(1.0))
        assert mass.value == pytest.approx(0.158655254, rel=1e-8)
        assert mass.method == "exact"

    def test_halfspace_exact(self):
        mass = dist_service.gaussian_mass([0.0, 0.0], np.eye(2), Halfspace(normal=[1.0, 1.0], offset=0.0))
        assert mass.value == pytest.approx(0.5)

    def test_correlated_box_uses_monte_carlo(self):
        cov = [[1.0, 0.5], [0.5, 1.0]]
        mass = dist_service.gaussian_mass([0.0, 0.0], cov, Box(lo=[0.0, 0.0], hi=[np.inf, np.inf]), seed=4)
        # orthant probability 1/4 + arcsin(rho) / (2 pi)
        assert mass.method == "monte_carlo"
        assert abs(mass.value - (0.25 + math.asin(0.5) / (2 * math.pi))) <= 4 * mass.stderr + 1e-3


class TestBridges:
    def test_normalizer_two(self):
        assert dist_service.bridge_construct("gaussian1d", mu=math.sqrt(2 * math.pi)).normalizer == pytest.approx(2.0)

    def test_zero_shift(self):
        b = dist_service.bridge_construct("gaussian1d", mu=0.0)
        assert b.normalizer == 1.0
        assert isinstance(b.density, Gaussian)

    def test_general_covariance_normalizer(self):
        cov = np.array([[2.0, 0.5], [0.5, 1.0]])
        gamma = 1.5
        b = dist_service.bridge_construct("gaussian_general_cov", cov=cov.tolist(), gamma=gamma)
        minor = np.linalg.det(cov[1:, 1:])
        assert b.normalizer == pytest.approx(1.0 + gamma * INV_SQRT_2PI * math.sqrt(minor / np.linalg.det(cov)))
        assert isinstance(b.density, BridgeGaussianCov)

    def test_general_covariance_bridge_covers_both_gaussians(self):
        cov = [[2.0, 0.5], [0.5, 1.0]]
        b = dist_service.bridge_construct("gaussian_general_cov", cov=cov, gamma=1.0)
        P = Gaussian(mean=[0.0, 0.0], cov=cov)
        Q = Gaussian(mean=[1.0, 0.0], cov=cov)
        for law in (P, Q):
            sup = dist_service.density_ratio_sup(law, b.density)
            assert sup.value == pytest.approx(b.normalizer, rel=0.02)

    def test_translated_product(self):
        factors = [UniformBox(lo=[-0.5], hi=[0.5]), Gaussian.standard(1)]
        b = dist_service.bridge_construct("translated_product", factors=factors, gamma=2.0)
        assert b.normalizer == pytest.approx(3.0)
        total, _ = integrate.quad(
            lambda x: math.exp(dist_service.logpdf(b.density, [x, 0.0])) * math.sqrt(2 * math.pi),
            -1, 3, points=[-0.5, 0.5, 1.5, 2.5],
        )
        assert total == pytest.approx(1.0, abs=1e-6)
