import math

import numpy as np
import pytest
from pydantic import ValidationError
from scipy import stats

from app.core.errors import InvalidParameterError
from app.models.distributions import Gaussian, IntervalUnion, TruncatedGaussian, UniformBox
from app.models.polynomial import McSpec, MultiPoly
from app.models.reports import HolderPair
from app.services.dist import dist_service
from app.services.poly import poly_service
from app.services.transfer import transfer_service

ENSEMBLE_CONSTANT = 7.0
IDENTITY = MultiPoly.from_terms({(1,): 1.0}, dim=1)
SQUARE = MultiPoly.from_terms({(2,): 1.0}, dim=1)


class TestHolderPair:
    def test_conjugates(self):
        assert HolderPair.from_alpha(2.0).beta == pytest.approx(2.0)
        assert HolderPair.from_alpha(math.inf).beta == 1.0
        assert math.isinf(HolderPair.from_alpha(1.0).beta)

    def test_non_conjugate_rejected(self):
        with pytest.raises(ValidationError):
            HolderPair(alpha=2.0, beta=3.0)


class TestCarberyWright:
    def test_zero_gamma(self):
        assert transfer_service.carbery_wright_bound(2, 2.0, 0.0, 1.0) == 0.0

    def test_linear_gaussian(self):
        bound = transfer_service.carbery_wright_bound(1, 1.0, 0.1, math.sqrt(2.0 / math.pi), C=1.0)
        assert bound == pytest.approx(0.1 * math.sqrt(math.pi / 2.0), rel=1e-12)
        truth = transfer_service.small_ball_probability(IDENTITY, 0.1, Gaussian.standard(1))
        assert truth == pytest.approx(0.0797, abs=1e-4)
        assert truth <= bound

    def test_q_equal_d_specialization(self):
        d, gamma, moment = 2, 0.3, 1.7
        bound = transfer_service.carbery_wright_bound(d, float(d), gamma, moment, C=1.0)
        assert bound == pytest.approx(d * gamma ** (1 / d) / moment ** (1 / d))

    def test_nonpositive_moment(self):
        with pytest.raises(InvalidParameterError):
            transfer_service.carbery_wright_bound(1, 1.0, 0.1, 0.0)

    @pytest.mark.parametrize("d", [1, 2, 3])
    def test_dominates_gaussian_small_ball(self, d):
        f = MultiPoly.from_terms({(d,): 1.0}, dim=1)
        moment = 2 ** (d / 2) * math.gamma((d + 1) / 2) / math.sqrt(math.pi)  # E|x|^d
        for gamma in np.geomspace(1e-4, 2.0, 15):
            truth = transfer_service.small_ball_probability(f, gamma, Gaussian.standard(1))
            assert truth == pytest.approx(2 * stats.norm.cdf(gamma ** (1 / d)) - 1, abs=1e-9)
            assert truth <= transfer_service.carbery_wright_bound(d, float(d), gamma, moment, C=1.0) + 1e-12


class TestCoefficients:
    def test_first_degree(self):
        assert transfer_service.thm_main_coefficient(1, HolderPair(), 1.0, 1.0, C=1.0).value == pytest.approx(2.0)

    def test_second_degree(self):
        assert transfer_service.thm_main_coefficient(2, HolderPair(), 1.5, 2.0, C=1.0).value == pytest.approx(96.0)

    def test_infinite_divergence(self):
        coefficient = transfer_service.thm_main_coefficient(2, HolderPair(), math.inf, 1.0)
        assert math.isinf(coefficient.value)
        assert "infinite_divergence" in coefficient.flags

    def test_beta_infinity_rejected(self):
        with pytest.raises(InvalidParameterError):
            transfer_service.thm_main_coefficient(1, HolderPair.from_alpha(1.0), 1.0, 1.0)

    def test_large_degree_stays_in_log_space(self):
        coefficient = transfer_service.thm_main_coefficient(200, HolderPair(), 2.0, 2.0)
        assert math.isinf(coefficient.value)
        assert coefficient.log_value == pytest.approx(200 * math.log(200) + 200 * math.log(2) + 201 * math.log(2))

    @pytest.mark.parametrize("d, ratio, expected", [(1, 1.0, 2.0), (3, 3.0, 5832.0)])
    def test_log_concave_corollary(self, d, ratio, expected):
        assert transfer_service.cor_logconcave_coefficient(d, ratio, C=1.0).value == pytest.approx(expected)

    def test_corollary_is_the_alpha_infinity_case(self):
        for d in (1, 2, 4):
            for ratio in (1.0, 2.5, 10.0):
                assert transfer_service.cor_logconcave_coefficient(d, ratio).value == pytest.approx(
                    transfer_service.thm_main_coefficient(d, HolderPair(), 1.0, ratio).value, rel=1e-14
                )

    def test_truncation_shape(self):
        # a truncation of mass alpha has ratio 1 / alpha: the quadratic coefficient scales like alpha^-2
        small = transfer_service.cor_logconcave_coefficient(2, 1 / 0.01).value
        large = transfer_service.cor_logconcave_coefficient(2, 1 / 0.1).value
        assert small / large == pytest.approx(100.0)

    def test_optimal_gamma(self):
        assert transfer_service.optimal_gamma(1, 1.0, 1.0, 1.0, C=1.0) == pytest.approx(0.5)
        assert transfer_service.optimal_gamma(1, 1.0, 0.0, 1.0) == 0.0
        assert transfer_service.optimal_gamma(3, 1.0, 2.0, 1.7) == pytest.approx(
            2 * transfer_service.optimal_gamma(3, 1.0, 1.0, 1.7)
        )


class TestEmpiricalRatio:
    def test_constant(self):
        one = MultiPoly.from_terms({(0,): 1.0}, dim=1)
        ratio = transfer_service.empirical_transfer_ratio(one, Gaussian.standard(1), Gaussian.standard(1, [3.0]))
        assert ratio.ratio == pytest.approx(1.0)

    def test_nested_uniforms(self):
        ratio = transfer_service.empirical_transfer_ratio(
            IDENTITY, UniformBox(lo=[0.0], hi=[1.0]), UniformBox(lo=[0.0], hi=[2.0]), power=1
        )
        assert ratio.ratio == pytest.approx(2.0, rel=1e-12)
        assert ratio.lhs_se == 0.0

    def test_zero_polynomial_rejected(self):
        with pytest.raises(InvalidParameterError):
            transfer_service.empirical_transfer_ratio(MultiPoly.zero(1), Gaussian.standard(1), Gaussian.standard(1))

    @pytest.mark.parametrize("d", [1, 2, 3])
    def test_ensemble_bounded(self, d):
        # ||dP/dQ||_inf = 3 for P = U([0, 1]) and Q = U([0, 3])
        result = transfer_service.transfer_ensemble((0.0, 1.0), (0.0, 3.0), degree=d, count=1000, seed=d)
        assert len(result.values) == 1000
        assert result.max_value == max(result.values)
        assert 1.0 <= result.max_value <= ENSEMBLE_CONSTANT * 3.0


class TestCatalog:
    def test_zero_shift(self):
        for d in (1, 3, 6):
            assert transfer_service.catalog_coefficient("gaussian_1d", d, mu=0.0).coefficient == 1.0

    @pytest.mark.parametrize("mu", [0.5, 2.0, 4.0])
    def test_one_dimensional(self, mu):
        entry = transfer_service.catalog_coefficient("gaussian_1d", 1, mu=mu)
        assert entry.coefficient == pytest.approx((1 + mu / math.sqrt(2 * math.pi)) ** 2)

    def test_beats_direct_ratio(self):
        mu = 4.0
        entry = transfer_service.catalog_coefficient("gaussian_1d", 1, mu=mu)
        direct = dist_service.density_ratio_sup(Gaussian.standard(1, [mu]), Gaussian.standard(1))
        assert direct.value > math.exp(mu**2 / 2)
        assert entry.coefficient < direct.value

    def test_shift_growth(self):
        small = [1.0, 2.0, 4.0, 8.0]
        excess = [math.sqrt(transfer_service.catalog_coefficient("gaussian_1d", 1, mu=m).coefficient) - 1 for m in small]
        assert stats.linregress(np.log(small), np.log(excess)).slope == pytest.approx(1.0, abs=1e-9)

        large = [64.0, 128.0, 256.0, 512.0]
        coefficients = [transfer_service.catalog_coefficient("gaussian_1d", 1, mu=m).coefficient for m in large]
        assert stats.linregress(np.log(large), np.log(coefficients)).slope == pytest.approx(2.0, abs=0.1)

    def test_multivariate_shift_matches_numeric_sups(self):
        mu = [3.0, 0.0]
        entry = transfer_service.catalog_coefficient("gaussian_nd", 1, mu=mu)
        bridge = entry.bridge.density
        numeric = (
            dist_service.density_ratio_sup(Gaussian.standard(2, mu), bridge).value
            * dist_service.density_ratio_sup(Gaussian.standard(2), bridge).value
        )
        assert numeric / 2 <= entry.coefficient <= 2 * numeric
        assert entry.coefficient <= (1 + 3.0) ** 2

    def test_family_coefficient(self):
        worst = transfer_service.family_coefficient([0.0, 0.0], [[1.0, 0.0], [0.0, 2.0]], 1)
        assert worst == pytest.approx((1 + 2.0 / math.sqrt(2 * math.pi)) ** 2)

    def test_unknown_kind(self):
        with pytest.raises(InvalidParameterError):
            transfer_service.catalog_coefficient("laplace", 1, mu=1.0)


class TestVerifyTransfer:
    def test_nested_uniforms(self):
        f = poly_service.random_polynomial(1, 2, seed=0)
        report = transfer_service.verify_transfer(
            f, UniformBox(lo=[0.0], hi=[1.0]), UniformBox(lo=[0.0], hi=[3.0]), None, 2, C=1.0
        )
        assert report.coefficient == pytest.approx(144.0)
        assert report.bridge == "target-is-log-concave"
        assert report.satisfied

    def test_identical_laws(self):
        P = Gaussian.standard(2)
        f = poly_service.random_polynomial(2, 3, seed=4)
        report = transfer_service.verify_transfer(f, P, P, None, 3, mc=McSpec(n_samples=20_000))
        assert report.coefficient >= 1.0
        assert report.satisfied

    def test_disjoint_supports_through_bridge(self):
        P, Q = UniformBox(lo=[0.0], hi=[1.0]), UniformBox(lo=[2.0], hi=[3.0])
        assert math.isinf(dist_service.density_ratio_sup(P, Q).value)
        bridge = UniformBox(lo=[0.0], hi=[3.0])
        report = transfer_service.verify_transfer(SQUARE, P, Q, bridge, 2, C=1.0)
        assert report.coefficient == pytest.approx(3 ** 3 * (2 * 2) ** 2)
        assert report.lhs == pytest.approx(19.0 / 3.0)
        assert report.satisfied
        assert report.csv_row()["bridge"] == bridge.label

    def test_bridge_required_for_non_log_concave_target(self):
        Q = TruncatedGaussian(
            mean=[0.0], cov=[[1.0]], truncation=IntervalUnion(intervals=[(-3.0, -1.0), (1.0, 3.0)])
        )
        with pytest.raises(InvalidParameterError):
            transfer_service.verify_transfer(IDENTITY, Gaussian.standard(1), Q, None, 1)
