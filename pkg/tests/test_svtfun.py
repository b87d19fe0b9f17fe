import math

import numpy as np
import pytest

from postselect.errors import DomainError
from postselect.svtfun import (
    OddPolynomial,
    SVTFunction,
    chebyshev_grid,
    evaluate,
    fpaa_polynomial,
    ideal_sign,
    inverse_polynomial,
    laa_polynomial,
    multiplicative_error,
    read_polynomial,
    write_polynomial,
)

T3 = OddPolynomial.from_odd_coefficients([0.0, 1.0])


class TestEvaluate:
    def test_linear_amp(self):
        assert np.isclose(evaluate(SVTFunction('linear_amp', 0.25), 0.3), 0.6)

    def test_trunc_inverse(self):
        assert np.isclose(evaluate(SVTFunction('trunc_inverse', 0.01), 0.5), 0.2)

    def test_ideal_sign(self):
        assert evaluate(ideal_sign(), 0.9) == 1.0
        assert evaluate(SVTFunction('sign_approx', 0.25), -0.9) == -1.0

    def test_cut_variants_vanish_on_the_other_side(self):
        assert evaluate(SVTFunction('linear_cut', 0.25), 0.7) == 0.0
        assert np.isclose(evaluate(SVTFunction('linear_cut', 0.25), 0.25), 0.5)
        assert evaluate(SVTFunction('inverse_cut', 0.25), 0.3) == 0.0
        assert np.isclose(evaluate(SVTFunction('inverse_cut', 0.25), 1.0), 0.5)

    def test_odd_symmetry(self):
        f = SVTFunction('trunc_inverse', 0.09)
        x = np.linspace(0, 1, 11)
        assert np.allclose(evaluate(f, -x), -evaluate(f, x))

    def test_outside_unit_interval(self):
        with pytest.raises(DomainError):
            evaluate(ideal_sign(), 1.5)

    def test_chebyshev_kind(self):
        f = SVTFunction.from_polynomial(T3, kind='chebyshev')
        assert np.isclose(f(0.5), -1.0)


class TestOddPolynomial:
    def test_rejects_even_terms(self):
        with pytest.raises(DomainError):
            OddPolynomial(np.array([0.5, 1.0]))

    def test_monomial_conversion(self):
        poly = OddPolynomial.from_monomial([0, -3, 0, 4])
        assert np.allclose(poly.coefficients, [0, 0, 0, 1])
        assert poly.degree == 3

    def test_trailing_zero_even_coefficient_dropped(self):
        poly = OddPolynomial(np.array([0, 1.0, 0]))
        assert poly.degree == 1

    def test_unbounded_polynomial_rejected_as_function(self):
        with pytest.raises(DomainError):
            SVTFunction.from_polynomial(OddPolynomial.from_odd_coefficients([1.5]))

    def test_text_file(self, tmp_path):
        poly = fpaa_polynomial(0.25, 0.1)
        path = tmp_path / 'poly.txt'
        write_polynomial(poly, path)
        assert np.array_equal(read_polynomial(path).coefficients, poly.coefficients)


class TestGrid:
    def test_ascending_inside_interval(self):
        grid = chebyshev_grid(0.2, 0.8, 64)
        assert np.all(np.diff(grid) > 0)
        assert grid.min() > 0.2 and grid.max() < 0.8

    def test_degenerate_interval(self):
        assert np.array_equal(chebyshev_grid(0.3, 0.3), [0.3])


class TestFpaaPolynomial:
    def test_gap_on_target_interval(self):
        poly = fpaa_polynomial(0.25, 0.1)
        x = chebyshev_grid(0.5, 1.0)
        assert np.max(1 - poly(x)) <= 0.1

    def test_bounded(self):
        poly = fpaa_polynomial(0.25, 0.01)
        assert poly.max_abs() <= 1.0

    def test_odd_only(self):
        poly = fpaa_polynomial(0.25, 0.01)
        assert np.all(poly.coefficients[0::2] == 0)

    def test_degree_grows_as_threshold_drops(self):
        assert fpaa_polynomial(0.04, 0.01).degree >= fpaa_polynomial(0.25, 0.01).degree

    def test_rejects_bad_parameters(self):
        with pytest.raises(DomainError):
            fpaa_polynomial(1.0, 0.1)


class TestLaaPolynomial:
    @pytest.fixture(scope='class')
    def poly(self):
        return laa_polynomial(0.25, 1e-3)

    def test_linear_region(self, poly):
        ratio = poly(0.4) * 0.5 / 0.4
        assert 0.999 <= ratio <= 1.001

    def test_vanishes_at_zero(self, poly):
        assert poly(0.0) == 0.0

    def test_bounded(self, poly):
        assert poly.max_abs() <= 1.0

    def test_certified_error(self, poly):
        target = SVTFunction('linear_amp', 0.25)
        assert multiplicative_error(poly, target, (1e-6, 0.5)) <= 1e-3


class TestInversePolynomial:
    def test_boundary_value(self):
        poly = inverse_polynomial(0.04, 0.5, 1e-3)
        assert 1 - 1e-3 <= poly(0.2) <= 1.0

    def test_grid_error(self):
        poly = inverse_polynomial(0.04, 0.5, 1e-3)
        target = SVTFunction('trunc_inverse', 0.04)
        assert multiplicative_error(poly, target, (0.2, math.sqrt(0.5))) <= 1e-3
        assert poly.max_abs() <= 1.0

    def test_single_point_interval(self):
        poly = inverse_polynomial(0.25, 0.25, 1e-3)
        assert abs(poly(0.5) - 1.0) <= 1e-3


class TestMultiplicativeError:
    def test_exact_target(self):
        target = SVTFunction('linear_amp', 0.25)
        assert multiplicative_error(target, target, (0.1, 0.5)) == 0.0

    def test_t3_against_identity(self):
        target = SVTFunction('linear_amp', 1.0)
        x = chebyshev_grid(0.9, 1.0)
        expected = np.max(np.abs((4 * x ** 3 - 3 * x) / x - 1))
        assert np.isclose(multiplicative_error(T3, target, (0.9, 1.0)), expected)

    def test_interval_must_avoid_zero(self):
        with pytest.raises(DomainError):
            multiplicative_error(T3, SVTFunction('linear_amp', 1.0), (0.0, 0.5))

    def test_vanishing_target(self):
        with pytest.raises(DomainError):
            multiplicative_error(T3, SVTFunction('linear_cut', 0.25), (0.6, 0.9))
