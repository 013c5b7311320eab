import numpy as np
import pytest

from volift.coefficients import (
    CoefficientError,
    linear_growth_check,
    registry_coefficients,
    single_coefficient,
)


class TestRegistry:
    def test_mean_revert(self):
        c = registry_coefficients("mean_revert", {"kappa": 1.0})
        np.testing.assert_allclose(c.b(0.0, np.array([2.0, -3.0])), [-2.0, 3.0])
        assert c.c_lg == 1.0

    def test_bounded_sin_bound(self):
        c = registry_coefficients("const", {}, "bounded_sin", {"a": 2.0})
        x = np.linspace(-50, 50, 1001)
        assert np.all(np.abs(c.sigma(0.0, x)) <= 2.0 * (1.0 + np.abs(x)))

    def test_sqrt_growth_passes_growth_check(self):
        c = registry_coefficients("sqrt_growth", {"a": 1.0})
        assert linear_growth_check(c)["ok"]
        assert c.b.lipschitz is None
        assert c.lipschitz is None

    def test_sqrt_growth_values(self):
        b = single_coefficient("sqrt_growth", {"a": 2.0})
        assert b(0.0, np.array([0.0]))[0] == 0.0
        assert b(0.0, np.array([3.0]))[0] == pytest.approx(2.0 * (2.0 - 1.0))
        assert b(0.0, np.array([-3.0]))[0] == pytest.approx(-2.0)

    def test_linear_constants(self):
        c = registry_coefficients("linear", {"a": 0.5, "c": 2.0})
        assert c.b.lipschitz == 0.5
        assert c.b(1.0, np.array([4.0]))[0] == pytest.approx(4.0)

    def test_unknown_name(self):
        with pytest.raises(CoefficientError):
            registry_coefficients("mystery")

    def test_compiled_dispatch_flag(self):
        assert registry_coefficients("linear").compiled_ok


def test_compiled_eval_matches_python():
    from volift._loops import _ceval
    from volift.coefficients import (
        COEF_BOUNDED_SIN,
        COEF_CONST,
        COEF_LINEAR,
        COEF_MEAN_REVERT,
        COEF_SQRT_GROWTH,
    )

    cases = [
        (COEF_CONST, 1.5, 0.0, "const", {"c": 1.5}),
        (COEF_LINEAR, 0.5, 2.0, "linear", {"a": 0.5, "c": 2.0}),
        (COEF_MEAN_REVERT, 1.3, 0.0, "mean_revert", {"kappa": 1.3}),
        (COEF_BOUNDED_SIN, 2.0, 0.0, "bounded_sin", {"a": 2.0}),
        (COEF_SQRT_GROWTH, 1.0, 0.0, "sqrt_growth", {"a": 1.0}),
    ]
    xs = np.array([-7.3, -1.0, 0.0, 0.4, 12.0])
    for code, p0, p1, name, params in cases:
        fn = single_coefficient(name, params)
        for x in xs:
            assert _ceval(code, p0, p1, 0.0, float(x)) == pytest.approx(
                float(fn(0.0, np.array([x]))[0]), abs=1e-14)
