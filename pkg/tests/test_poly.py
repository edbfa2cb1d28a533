import numpy as np
import pytest
from pydantic import ValidationError

from app.core.errors import NonFiniteValueError, RankDeficientError
from app.models.distributions import Gaussian, UniformBox
from app.models.polynomial import McSpec, MultiPoly, graded_lex
from app.services.poly import poly_service


def test_graded_lex_order():
    assert graded_lex(2, 2) == [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]


class TestMultiPoly:
    def test_product_of_coordinates(self):
        p = MultiPoly.from_terms({(1, 1): 1.0}, dim=2)
        assert poly_service.evaluate(p, [2.0, 3.0]) == pytest.approx(6.0)

    def test_zero_polynomial(self, rng):
        p = MultiPoly.zero(3)
        np.testing.assert_array_equal(poly_service.evaluate(p, rng.normal(size=(10, 3))), np.zeros(10))

    def test_exponent_above_degree_rejected(self):
        with pytest.raises(ValidationError):
            MultiPoly(dim=1, degree=1, exponents=[(2,)], coefficients=[1.0])

    def test_legendre_needs_box(self):
        with pytest.raises(ValidationError):
            MultiPoly(dim=1, degree=1, basis="legendre", exponents=[(0,)], coefficients=[1.0])

    def test_subtraction(self):
        p = MultiPoly.from_terms({(0,): 1.0, (1,): 2.0}, dim=1)
        q = MultiPoly.from_terms({(1,): 2.0, (2,): 1.0}, dim=1)
        assert (p - q).terms == {(0,): 1.0, (1,): 0.0, (2,): -1.0}


class TestBasisConversion:
    def test_round_trip_preserves_values(self, rng):
        p = poly_service.random_polynomial(dim=2, degree=5, seed=11)
        lo, hi = [-1.0, 0.0], [2.0, 3.0]
        ortho = poly_service.to_basis(p, "legendre", lo, hi)
        back = poly_service.to_basis(ortho, "monomial")
        x = rng.uniform(-1.0, 3.0, size=(100, 2))
        expected = poly_service.evaluate(p, x)
        np.testing.assert_allclose(poly_service.evaluate(ortho, x), expected, rtol=1e-9, atol=1e-9)
        np.testing.assert_allclose(poly_service.evaluate(back, x), expected, rtol=1e-9, atol=1e-9)

    def test_orthonormal_under_uniform(self):
        lo, hi = [0.0, -1.0], [1.0, 1.0]
        exps = graded_lex(2, 4)
        x = np.random.default_rng(0).uniform(lo, hi, size=(200_000, 2))
        A = poly_service.design_matrix(x, exps, "legendre", lo, hi)
        np.testing.assert_allclose(A.T @ A / x.shape[0], np.eye(len(exps)), atol=0.05)


class TestFitRegression:
    def test_exact_line(self):
        x = np.linspace(-1.0, 1.0, 11)
        p = poly_service.fit_regression(x, 3.0 * x + 1.0, degree=1, basis="monomial", ridge=0.0)
        np.testing.assert_allclose(p.coefficients, [1.0, 3.0], atol=1e-9)

    def test_recovers_random_cubic(self, rng):
        truth = poly_service.random_polynomial(dim=2, degree=3, seed=5)
        x = rng.uniform(-1.0, 1.0, size=(200, 2))
        fit = poly_service.fit_regression(x, poly_service.evaluate(truth, x), degree=3, basis="monomial", ridge=0.0)
        assert fit.exponents == truth.exponents
        np.testing.assert_allclose(fit.coefficients, truth.coefficients, atol=1e-6)

    def test_degree_twenty_checkerboard(self, rng):
        lo, hi = [0.0, -1.0], [1.0, 1.0]
        x = rng.uniform(lo, hi, size=(5000, 2))
        y = np.sin(2 * np.pi * x[:, 0]) * np.sin(2 * np.pi * x[:, 1])
        fit = poly_service.fit_regression(x, y, degree=20, basis="legendre", box_lo=lo, box_hi=hi)
        assert fit.residual <= 1e-3

    def test_rank_deficient_without_ridge(self):
        x = np.ones((10, 1))
        with pytest.raises(RankDeficientError):
            poly_service.fit_regression(x, np.ones(10), degree=2, basis="monomial", ridge=0.0)

    def test_ridge_resolves_rank_deficiency(self):
        x = np.ones((10, 1))
        fit = poly_service.fit_regression(x, np.ones(10), degree=2, basis="monomial", ridge=1e-6)
        assert fit.residual < 1e-6

    def test_projection_matches_regression(self):
        lo, hi = [-1.0], [2.0]
        g = lambda x: np.exp(np.asarray(x)[:, 0])  # noqa: E731
        projected = poly_service.project_legendre(g, 8, lo, hi)
        x = np.linspace(-1.0, 2.0, 50).reshape(-1, 1)
        assert np.max(np.abs(poly_service.evaluate(projected, x) - g(x))) < 1e-3

    def test_degree_twenty_sine(self):
        g = lambda x: np.sin(2 * np.pi * np.asarray(x)[:, 0])  # noqa: E731
        projected = poly_service.project_legendre(g, 20, [0.0], [1.0])
        x = np.linspace(0.0, 1.0, 201).reshape(-1, 1)
        assert np.max(np.abs(poly_service.evaluate(projected, x) - g(x))) <= 1e-6


class TestMcFunctional:
    def test_constant(self):
        est = poly_service.mc_functional(lambda x: np.ones(x.shape[0]), Gaussian.standard(1), McSpec(n_samples=1000))
        assert est.value == pytest.approx(1.0)
        assert est.stderr == 0.0

    def test_second_moment(self):
        est = poly_service.mc_functional(
            lambda x: x[:, 0] ** 2, Gaussian.standard(1), McSpec(n_samples=1_000_000, seed=2)
        )
        assert est.value == pytest.approx(1.0, abs=0.01)

    def test_uniform_abs(self):
        est = poly_service.mc_functional(
            lambda x: np.abs(x[:, 0]), UniformBox(lo=[0.0], hi=[2.0]), McSpec(n_samples=100_000)
        )
        assert abs(est.value - 1.0) <= 5 * est.stderr

    def test_fixed_seed_reproducible_with_small_chunks(self, monkeypatch):
        g = lambda x: x[:, 0] ** 3  # noqa: E731
        mc = McSpec(n_samples=3000, seed=9)
        monkeypatch.setattr(poly_service, "chunk_size", 1000)
        first = poly_service.mc_functional(g, Gaussian.standard(1), mc)
        second = poly_service.mc_functional(g, Gaussian.standard(1), mc)
        assert first.value == second.value

    def test_stderr_shrinks_like_inverse_root_n(self):
        sizes = [1000, 4000, 16_000, 64_000]
        errors = [
            poly_service.mc_functional(lambda x: x[:, 0] ** 2, Gaussian.standard(1), McSpec(n_samples=n, seed=5)).stderr
            for n in sizes
        ]
        slope = np.polyfit(np.log(sizes), np.log(errors), 1)[0]
        assert slope == pytest.approx(-0.5, abs=0.1)

    def test_non_finite_reports_point(self):
        with pytest.raises(NonFiniteValueError):
            poly_service.mc_functional(lambda x: 1.0 / (x[:, 0] * 0.0), Gaussian.standard(1), McSpec(n_samples=10))

    def test_exact_uniform_moment(self):
        p = MultiPoly.from_terms({(1,): 1.0}, dim=1)
        assert poly_service.uniform_abs_moment(p, -1.0, 1.0) == pytest.approx(0.5, rel=1e-12)
        assert poly_service.uniform_abs_moment(p, 0.0, 2.0, power=2.0) == pytest.approx(4.0 / 3.0, rel=1e-12)


class TestRestrictedDegree:
    def test_square_of_first_coordinate(self):
        g = lambda x: x[:, 0] ** 2  # noqa: E731
        assert poly_service.restricted_degree(g, [0.3, -1.0], [1.0, 2.0], max_degree=6).degree == 2

    def test_constant(self):
        found = poly_service.restricted_degree(lambda x: np.full(x.shape[0], 4.0), [0.0], [1.0], max_degree=5)
        assert found.degree == 0 and not found.exceeded

    def test_non_polynomial_exceeds(self):
        found = poly_service.restricted_degree(lambda x: np.exp(3 * x[:, 0]), [0.0], [1.0], max_degree=4)
        assert found.exceeded
        assert str(found) == "> 4"

    def test_random_polynomial_lines(self):
        p = poly_service.random_polynomial(dim=3, degree=4, seed=1)
        found = poly_service.max_restricted_degree(poly_service.as_function(p), 3, max_degree=8)
        assert found.degree == 4
