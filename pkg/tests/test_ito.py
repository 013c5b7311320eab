import numpy as np
import pytest

from volift.coefficients import (
    COEF_CUSTOM,
    CoefFn,
    Coefficients,
    registry_coefficients,
)
from volift.ito import (
    SmoothObservable,
    gamma_st,
    ito_residuals,
    lyapunov_check,
    observable_registry,
)
from volift.kernels import ExpSumKernel, lift_measure
from volift.lifted import (
    LiftedState,
    SimGrid,
    brownian_increments,
    initial_lift,
    observable,
)
from volift.quadrature import DiscreteLiftMeasure, PartitionSpec, discretize

K = ExpSumKernel(terms=((0.5, 1.0), (2.0, 0.7)))
ATOMS = discretize(lift_measure(K), PartitionSpec(n_cells=4))
LIP = registry_coefficients("mean_revert", {"kappa": 1.0},
                            "bounded_sin", {"a": 0.5})


class TestSmoothObservable:
    @pytest.mark.parametrize("name", ["identity", "square", "cube", "time"])
    def test_registry_derivatives_consistent(self, name):
        observable_registry(name).check_derivatives()

    def test_inconsistent_derivative_caught(self):
        bad = SmoothObservable(f=lambda t, x: x ** 2, ft=lambda t, x: 0.0 * x,
                               fx=lambda t, x: 3.0 * x,
                               fxx=lambda t, x: 2.0 + 0.0 * x, name="bad")
        with pytest.raises(ValueError):
            bad.check_derivatives()

    def test_unknown_name(self):
        with pytest.raises(KeyError):
            observable_registry("mystery")


class TestGamma:
    def test_zero_lag_is_observable(self):
        s = LiftedState(ATOMS, ATOMS, np.linspace(0.1, 0.4, ATOMS.nodes.size),
                        np.linspace(-0.2, 0.1, ATOMS.nodes.size), 1.0)
        assert gamma_st(s, 0.0) == pytest.approx(observable(s), rel=1e-15)

    def test_initial_state_any_lag(self):
        s = initial_lift(2.5, ATOMS, ATOMS)
        for lag in (0.0, 0.5, 10.0):
            assert gamma_st(s, lag) == 2.5

    def test_zero_state(self):
        s = initial_lift(0.0, ATOMS, ATOMS)
        assert gamma_st(s, 1.0) == 0.0

    def test_semigroup_composition(self):
        # with zero coefficients the factor decay is exact, so splitting the
        # lag multiplies the decays
        y = np.linspace(0.1, 0.4, ATOMS.nodes.size)
        s = LiftedState(ATOMS, ATOMS, y, 0.5 * y, 0.3)
        direct = gamma_st(s, 0.7)
        relifted = LiftedState(
            ATOMS, ATOMS, np.exp(-ATOMS.nodes * 0.3) * y,
            np.exp(-ATOMS.nodes * 0.3) * 0.5 * y, 0.3)
        assert gamma_st(relifted, 0.4) == pytest.approx(direct, rel=1e-14)

    def test_negative_lag_rejected(self):
        from volift.lifted import SimulationError

        with pytest.raises(SimulationError):
            gamma_st(initial_lift(1.0, ATOMS, ATOMS), -0.1)


class TestResiduals:
    def test_identity_residual_small_and_shrinking(self):
        f = observable_registry("identity")
        means = []
        for N in (500, 1000, 2000):
            g = SimGrid(T=1.0, N=N)
            dW = brownian_increments(3, 20, g)
            r = ito_residuals(f, ATOMS, ATOMS, 1.0, LIP, g, dW)
            assert np.max(np.abs(r)) < 5.0 * g.h * 2.0  # path scale ~ 1-2
            means.append(np.mean(np.abs(r)))
        assert means[1] < means[0] / 1.5
        assert means[2] < means[1] / 1.5

    def test_square_zero_mean_and_isometry(self):
        s_const = 0.8
        c = registry_coefficients("const", {"c": 0.0}, "const", {"c": s_const})
        f = observable_registry("square")
        g = SimGrid(T=1.0, N=500)
        dW = brownian_increments(5, 10_000, g)
        r = ito_residuals(f, ATOMS, ATOMS, 1.0, c, g, dW)
        z = np.mean(r) / (np.std(r, ddof=1) / np.sqrt(r.size))
        assert abs(z) < 3.0
        # independent check: Var X_T = s^2 sum_m k(T - t_m)^2 h for the
        # atomized kernel and this scheme
        from volift.lifted import simulate_ensemble

        ens = simulate_ensemble(ATOMS, ATOMS, 1.0, c, g, dW)
        k_vals = ATOMS.kernel_values(g.times[1:][::-1])
        target = s_const ** 2 * g.h * float(np.sum(k_vals ** 2))
        sample = np.var(ens.X[:, -1], ddof=1)
        se = target * np.sqrt(2.0 / (r.size - 1))
        assert abs(sample - target) < 3.0 * se

    def test_time_observable_exact(self):
        f = observable_registry("time")
        g = SimGrid(T=1.0, N=400)
        dW = brownian_increments(9, 5, g)
        r = ito_residuals(f, ATOMS, ATOMS, 1.0, LIP, g, dW)
        assert np.max(np.abs(r)) < 1e-12

    def test_antisymmetry_exact(self):
        f = observable_registry("square")
        g = SimGrid(T=1.0, N=300)
        dW = brownian_increments(11, 50, g)
        r = ito_residuals(f, ATOMS, ATOMS, 1.0, LIP, g, dW)
        rn = ito_residuals(f.negated(), ATOMS, ATOMS, 1.0, LIP, g, dW)
        np.testing.assert_array_equal(r + rn, np.zeros_like(r))

    def test_cubic_zero_mean(self):
        f = observable_registry("cube")
        c = registry_coefficients("mean_revert", {"kappa": 0.5},
                                  "bounded_sin", {"a": 0.3})
        g = SimGrid(T=1.0, N=1000)
        dW = brownian_increments(13, 10_000, g)
        r = ito_residuals(f, ATOMS, ATOMS, 0.5, c, g, dW)
        z = np.mean(r) / (np.std(r, ddof=1) / np.sqrt(r.size))
        assert abs(z) < 3.0

    def test_subinterval_start(self):
        # starting mid-path exercises the conditional Gamma term
        f = observable_registry("square")
        g = SimGrid(T=1.0, N=400)
        dW = brownian_increments(17, 2000, g)
        r = ito_residuals(f, ATOMS, ATOMS, 1.0, LIP, g, dW, m0=200)
        z = np.mean(r) / (np.std(r, ddof=1) / np.sqrt(r.size))
        assert abs(z) < 3.0

    def test_analytic_kernel_flag_changes_little(self):
        f = observable_registry("identity")
        g = SimGrid(T=1.0, N=1000)
        dW = brownian_increments(19, 10, g)
        r_atom = ito_residuals(f, ATOMS, ATOMS, 1.0, LIP, g, dW)
        r_true = ito_residuals(f, ATOMS, ATOMS, 1.0, LIP, g, dW,
                               analytic_kernels=(K, K))
        # the atoms reproduce the exponential sum exactly here
        np.testing.assert_allclose(r_atom, r_true, atol=1e-10)

    def test_bad_window(self):
        from volift.lifted import SimulationError

        f = observable_registry("identity")
        g = SimGrid(T=1.0, N=10)
        with pytest.raises(SimulationError):
            ito_residuals(f, ATOMS, ATOMS, 1.0, LIP, g, np.zeros((1, 10)),
                          m0=10)


class TestLyapunov:
    V = observable_registry("square")

    def test_mean_revert_passes(self):
        c = registry_coefficients("mean_revert", {"kappa": 1.0},
                                  "const", {"c": 0.5})
        rep = lyapunov_check(self.V, K, K, c)
        assert rep.ok
        assert np.isfinite(rep.h_est) and np.isfinite(rep.d_est)
        assert rep.d_est >= 0.0

    def test_zero_coefficients_trivial(self):
        c = registry_coefficients("const", {"c": 0.0})
        rep = lyapunov_check(self.V, K, K, c)
        assert rep.ok and rep.h_est == 0.0 and rep.d_est == 0.0

    def test_cubic_drift_fails_with_witness(self):
        cub = Coefficients(
            b=CoefFn(lambda t, x: x ** 3, COEF_CUSTOM),
            sigma=CoefFn(lambda t, x: np.full_like(x, 0.5), COEF_CUSTOM),
            c_lg=1.0)
        rep = lyapunov_check(self.V, K, K, cub)
        assert not rep.ok
        assert rep.witness is not None
        assert abs(rep.witness[0]) > 10.0

    def test_non_polynomial_V_rejected(self):
        flat = SmoothObservable(
            f=lambda t, x: np.exp(-np.abs(x)), ft=lambda t, x: 0.0 * x,
            fx=lambda t, x: 0.0 * x, fxx=lambda t, x: 0.0 * x, name="flat")
        with pytest.raises(ValueError):
            lyapunov_check(flat, K, K, registry_coefficients("const"))
