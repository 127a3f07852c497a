import math

import numpy as np
import pytest
from scipy import integrate

from core.errors import InvalidParameter, UnsupportedOrder
from core.hermite import (
    J1_INTEGRAL,
    QuadratureConfig,
    are_iid,
    are_lrd,
    compute_summary,
    density_square_integral,
    detectable_shift,
    first_hermite_coefficient,
    gauss_hermite_expectation,
    hermite_poly,
    j1_integral_by_quadrature,
)
from core.state import Method, Mode
from core.transform import GAUSSIAN, PARETO31, normal_density


# ---------------------------------------------------------------------------
# Hermite polynomials
# ---------------------------------------------------------------------------

class TestHermitePoly:
    def test_base_cases(self):
        x = np.linspace(-3.0, 3.0, 7)
        np.testing.assert_array_equal(hermite_poly(0, x), np.ones_like(x))
        np.testing.assert_array_equal(hermite_poly(1, x), x)

    def test_second_order(self):
        assert hermite_poly(2, 3.0) == 8.0

    def test_third_order(self):
        assert hermite_poly(3, 2.0) == pytest.approx(2.0 ** 3 - 3 * 2.0)

    def test_orthogonal_to_constant(self):
        value = integrate.quad(lambda x: hermite_poly(2, x) * normal_density(x), -np.inf, np.inf)[0]
        assert abs(value) < 1e-10

    @pytest.mark.parametrize("p,q", [(1, 2), (2, 3), (3, 5)])
    def test_orthogonality(self, p, q):
        value = gauss_hermite_expectation(lambda x: hermite_poly(p, x) * hermite_poly(q, x), 40)
        assert abs(value) < 1e-9

    @pytest.mark.parametrize("q", [1, 2, 4, 6])
    def test_norm_is_factorial(self, q):
        value = gauss_hermite_expectation(lambda x: hermite_poly(q, x) ** 2, 40)
        assert value == pytest.approx(math.factorial(q), rel=1e-10)

    def test_order_limit(self):
        hermite_poly(10, 1.0)
        with pytest.raises(UnsupportedOrder):
            hermite_poly(11, 1.0)

    def test_negative_order(self):
        with pytest.raises(InvalidParameter):
            hermite_poly(-1, 1.0)


# ---------------------------------------------------------------------------
# Summaries
# ---------------------------------------------------------------------------

class TestSummary:
    def test_gaussian(self):
        s = compute_summary(GAUSSIAN)
        assert s.a1 == pytest.approx(1.0, abs=1e-9)
        assert s.f_sq_integral == pytest.approx(1.0 / (2.0 * math.sqrt(math.pi)), abs=1e-9)
        assert s.f_sq_integral == pytest.approx(0.2820948, abs=1e-7)
        assert s.shift_ratio == pytest.approx(1.0, abs=1e-8)
        assert s.j1_integral == pytest.approx(-1.0 / (2.0 * math.sqrt(math.pi)))

    def test_pareto(self):
        s = compute_summary(PARETO31)
        assert s.a1 == pytest.approx(-0.6784, abs=5e-4)
        assert s.shift_ratio == pytest.approx(2.67754, abs=1e-3)
        # decreasing G flips the sign of int J1 dF, not its size
        assert s.j1_integral == pytest.approx(-J1_INTEGRAL)

    def test_pareto_density_square(self):
        # int f^2 = 9/7 * sqrt(3/4) for the standardized Pareto(3, 1)
        value, err = density_square_integral(PARETO31)
        assert value == pytest.approx(9.0 / 7.0 * math.sqrt(0.75), rel=1e-9)
        assert err < 1e-10

    def test_node_doubling_is_stable(self):
        a1, err = first_hermite_coefficient(PARETO31, QuadratureConfig(nodes=201))
        assert err < 1e-7
        assert a1 == pytest.approx(compute_summary(PARETO31).a1, abs=1e-12)

    def test_gauss_hermite_moments(self):
        assert gauss_hermite_expectation(lambda x: x ** 2, 20) == pytest.approx(1.0, rel=1e-12)
        assert gauss_hermite_expectation(lambda x: x ** 4, 20) == pytest.approx(3.0, rel=1e-12)

    @pytest.mark.parametrize("t", [GAUSSIAN, PARETO31], ids=lambda t: t.name)
    def test_j1_quadrature_matches_anchor(self, t):
        expected = J1_INTEGRAL * t.direction
        assert j1_integral_by_quadrature(t) == pytest.approx(expected, abs=1e-4)

    @pytest.mark.parametrize("t", [GAUSSIAN, PARETO31], ids=lambda t: t.name)
    def test_a1_sign_follows_direction(self, t):
        assert math.copysign(1.0, compute_summary(t).a1) == t.direction


# ---------------------------------------------------------------------------
# ARE
# ---------------------------------------------------------------------------

class TestAre:
    @pytest.mark.parametrize("d", [0.2, 0.6, 0.9])
    def test_gaussian_is_one(self, d):
        r = are_lrd(compute_summary(GAUSSIAN), d)
        assert r.value == pytest.approx(1.0, abs=1e-6)
        assert r.regime is Mode.LRD

    def test_pareto(self):
        r = are_lrd(compute_summary(PARETO31), 0.6)
        assert r.value == pytest.approx(26.655, abs=0.1)
        assert r.value * r.b == pytest.approx(1.0, abs=1e-12)
        assert r.d == 0.6

    def test_iid(self):
        r = are_iid()
        assert r.value == pytest.approx(3.0 / math.pi, abs=1e-12)
        assert r.value == pytest.approx(0.95493, abs=1e-5)
        assert r.regime is Mode.IID
        assert r.value * r.b == pytest.approx(1.0, abs=1e-12)

    def test_grows_as_memory_strengthens(self):
        s = compute_summary(PARETO31)
        values = [are_lrd(s, d).value for d in (0.9, 0.6, 0.3)]
        assert values == sorted(values)

    @pytest.mark.parametrize("d", [0.0, 1.0])
    def test_d_range(self, d):
        with pytest.raises(InvalidParameter):
            are_lrd(compute_summary(GAUSSIAN), d)

    def test_detectable_shift_ratio(self):
        s = compute_summary(PARETO31)
        h_c = detectable_shift(1000, 1.3, s, 0.6, Method.CUSUM)
        h_w = detectable_shift(1000, 1.3, s, 0.6, Method.WILCOXON)
        assert h_c / h_w == pytest.approx(s.shift_ratio)
        assert h_c == pytest.approx(1000 ** -0.3 * abs(s.a1) * 1.3)
