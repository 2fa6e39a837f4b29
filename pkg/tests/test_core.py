import json
import math

import numpy as np
import pytest

from fracheat import (
    FracParams,
    MultiIndex,
    ParabolicCylinder,
    ParabolicPolynomial,
    ScalarField,
    SpaceTimePoint,
    abs_gamma_neg,
    check_slowly_increasing,
    inverse_normalization_constant,
    multi_indices,
    normalization_constant,
    parabolic_distance,
)


class TestFracParams:
    def test_constant_halfline_value(self):
        # n=1, s=1/2: |Gamma(-1/2)| = 2 sqrt(pi), so c = 1/(4 pi)
        p = FracParams(1, 0.5)
        assert p.c_ns == pytest.approx(1.0 / (4.0 * math.pi), rel=1e-14)

    @pytest.mark.parametrize("s", [0.1, 0.3, 0.5, 0.7, 0.9])
    def test_abs_gamma_matches_reflection(self, s):
        assert abs_gamma_neg(s) == pytest.approx(math.gamma(1.0 - s) / s, rel=1e-14)

    @pytest.mark.parametrize("n,s", [(0, 0.5), (1, 0.0), (1, 1.0), (2, -0.1)])
    def test_rejects_bad_parameters(self, n, s):
        with pytest.raises(ValueError):
            FracParams(n, s)

    def test_time_exponent(self):
        assert FracParams(3, 0.25).time_exponent == pytest.approx(3 / 2 + 1 - 0.25)

    @pytest.mark.parametrize("s", [0.2, 0.5, 0.8])
    def test_inverse_constant_ratio(self, s):
        # forward/inverse constants differ by Gamma(s) s / Gamma(1-s)
        ratio = normalization_constant(1, s) / inverse_normalization_constant(1, s)
        assert ratio == pytest.approx(
            math.gamma(s) * s / math.gamma(1.0 - s), rel=1e-13
        )


class TestPointsAndCylinders:
    def test_parabolic_distance(self):
        a = SpaceTimePoint.of(0.0, 0.0)
        b = SpaceTimePoint.of(0.3, -0.16)
        assert parabolic_distance(a, b) == pytest.approx(0.5)

    def test_past_cylinder_membership(self):
        cyl = ParabolicCylinder(SpaceTimePoint.of(0.0, 0.0), 0.5, sided="past")
        x = np.array([[0.2], [0.2], [0.7], [0.2]])
        t = np.array([-0.1, 0.1, -0.1, -0.3])
        assert list(cyl.contains(x, t)) == [True, False, False, False]

    def test_two_sided_cylinder_membership(self):
        cyl = ParabolicCylinder(SpaceTimePoint.of(0.0, 0.0), 0.5, sided="two")
        x = np.array([[0.2], [0.2], [0.2]])
        t = np.array([0.1, 0.26, -0.26])
        assert list(cyl.contains(x, t)) == [True, False, False]

    def test_scaled(self):
        # parabolic scaling x -> lam x, t -> lam^2 t
        cyl = ParabolicCylinder(SpaceTimePoint.of(1.0, 0.5), 1.0, sided="past")
        half = cyl.scaled(0.5)
        assert half.radius == pytest.approx(0.5)
        assert half.center.x[0] == pytest.approx(0.5)
        assert half.t_hi == pytest.approx(0.125)
        assert half.t_lo == pytest.approx(0.125 - 0.25)


class TestMultiIndices:
    def test_enumeration_parabolic_degree_two(self):
        mis = multi_indices(1, 2)
        sigs = {mi.sigma for mi in mis}
        assert sigs == {(0, 0), (1, 0), (0, 1), (2, 0)}

    def test_parabolic_degree_counts_time_twice(self):
        assert MultiIndex(sigma=(1, 2)).parabolic_degree == 5

    def test_dimension_two(self):
        mis = multi_indices(2, 1)
        assert {mi.sigma for mi in mis} == {(0, 0, 0), (1, 0, 0), (0, 1, 0)}


class TestParabolicPolynomial:
    def _poly(self):
        base = SpaceTimePoint.of(0.5, -0.25)
        coeffs = {
            MultiIndex(sigma=(0, 0)): 2.0,
            MultiIndex(sigma=(1, 0)): -1.0,
            MultiIndex(sigma=(0, 1)): 3.0,
        }
        return ParabolicPolynomial(2, base, coeffs)

    def test_eval_matches_taylor_form(self):
        P = self._poly()
        x = np.array([[0.7]])
        t = np.array([0.0])
        # coefficients are derivatives at the base point
        expect = 2.0 - 1.0 * (0.7 - 0.5) + 3.0 * (0.0 + 0.25)
        assert P.eval(x, t)[0] == pytest.approx(expect, rel=1e-14)

    def test_json_round_trip(self):
        P = self._poly()
        Q = ParabolicPolynomial.from_json(P.to_json())
        rng = np.random.default_rng(0)
        x = rng.normal(size=(20, 1))
        t = rng.normal(size=20)
        np.testing.assert_allclose(P.eval(x, t), Q.eval(x, t), rtol=1e-14)

    def test_zero(self):
        Z = ParabolicPolynomial.zero(1)
        assert Z.eval(np.array([[1.0]]), np.array([2.0]))[0] == 0.0
        assert Z.norm() == 0.0

    def test_norm_positive(self):
        assert self._poly().norm() > 0.0

    def test_derivative_at_base(self):
        P = self._poly()
        assert P.derivative_at_base(MultiIndex(sigma=(1, 0))) == -1.0
        assert P.derivative_at_base(MultiIndex(sigma=(2, 0))) == 0.0


class TestScalarField:
    def test_eval_at_and_eval_agree(self):
        f = ScalarField(lambda x, t: np.sum(x, axis=-1) + t, 1, tail="bounded")
        pt = SpaceTimePoint.of(0.25, 0.5)
        assert f.eval_at(pt) == pytest.approx(0.75)

    def test_slowly_increasing_admits_nonnegative_growth(self):
        from fracheat import exp_symbol

        p = FracParams(1, 0.5)
        assert check_slowly_increasing(exp_symbol(1.0, [0.0], 1), p)
        assert check_slowly_increasing(exp_symbol(0.0, [2.0], 1), p)
        assert not check_slowly_increasing(exp_symbol(-1.0, [0.0], 1), p)

    def test_time_window_infinite_by_default(self):
        f = ScalarField(lambda x, t: np.zeros(len(np.atleast_1d(t))), 1,
                        tail="bounded")
        lo, hi = f.time_window()
        assert lo == -math.inf and hi == math.inf
