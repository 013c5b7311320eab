import numpy as np
import pytest
from scipy import integrate
from scipy.special import gamma as gamma_fn

from volift.coefficients import registry_coefficients
from volift.kernels import (
    DampedKernel,
    ExpSumKernel,
    FractionalKernel,
    GammaKernel,
    lift_measure,
)
from volift.lifted import SimGrid, brownian_increments, simulate_ensemble
from volift.quadrature import PartitionSpec, discretize
from volift.volterra import (
    ConvolutionWeights,
    compare_paths,
    direct_euler,
    kernel_cell_integrals,
)

ML_07_HALF = 1.8249850568512025  # E_{0.7,1}(0.5)

FLAT = ExpSumKernel(terms=((1.0, 0.0),))


class TestCellIntegrals:
    def test_flat_kernel(self):
        w = kernel_cell_integrals(FLAT, 0.25, 4)
        np.testing.assert_allclose(w, [0.0, 0.25, 0.25, 0.25, 0.25])

    def test_fractional_first_cell(self):
        # int_0^h t^{alpha-1}/Gamma(alpha) dt = h^alpha / Gamma(alpha+1)
        w = kernel_cell_integrals(FractionalKernel(alpha=0.7), 0.25, 2)
        assert w[1] == pytest.approx(0.25 ** 0.7 / gamma_fn(1.7), rel=1e-12)

    def test_total_matches_quadrature(self):
        k = GammaKernel(alpha=0.7, beta=2.0)
        w = kernel_cell_integrals(k, 0.1, 20)
        total, _ = integrate.quad(lambda u: float(k(u)), 0, 2.0, limit=200)
        assert np.sum(w) == pytest.approx(total, rel=1e-9)

    def test_numeric_fallback_matches_closed_form(self):
        # damped exponential sum has no dedicated branch; it equals the
        # exponential sum with shifted rates, which does
        base = ExpSumKernel(terms=((1.0, 0.5), (2.0, 3.0)))
        damped = DampedKernel(base=base, beta=1.0)
        shifted_rates = ExpSumKernel(terms=((1.0, 1.5), (2.0, 4.0)))
        w_num = kernel_cell_integrals(damped, 0.2, 10)
        w_cf = kernel_cell_integrals(shifted_rates, 0.2, 10)
        np.testing.assert_allclose(w_num, w_cf, rtol=1e-9)

    def test_diffusion_weights_are_projected(self):
        g = SimGrid(T=1.0, N=10)
        w = ConvolutionWeights.from_kernels(FLAT, FractionalKernel(alpha=0.7), g)
        np.testing.assert_allclose(
            w.ws[1:], kernel_cell_integrals(FractionalKernel(alpha=0.7),
                                            g.h, g.N)[1:] / g.h)
        assert np.all(np.isfinite(w.ws))


class TestDirectEuler:
    def test_zero_coefficients(self):
        g = SimGrid(T=1.0, N=50)
        c = registry_coefficients("const", {"c": 0.0})
        X, rep = direct_euler(FLAT, FLAT, c, 2.0, g, np.zeros((1, g.N)))
        assert rep is None
        np.testing.assert_array_equal(X[0], np.full(51, 2.0))

    def test_flat_kernel_linear_growth_exact(self):
        g = SimGrid(T=2.0, N=32)
        c = registry_coefficients("const", {"c": 0.7})
        X, _ = direct_euler(FLAT, FLAT, c, 1.0, g, np.zeros((1, g.N)))
        np.testing.assert_allclose(X[0], 1.0 + 0.7 * g.times, rtol=1e-13)

    def test_fractional_mittag_leffler(self):
        g = SimGrid(T=1.0, N=4000)
        c = registry_coefficients("linear", {"a": 0.5})
        k = FractionalKernel(alpha=0.7)
        X, _ = direct_euler(k, k, c, 1.0, g, np.zeros((1, g.N)))
        assert X[0, -1] == pytest.approx(ML_07_HALF, rel=1e-2)

    def test_ito_isometry_variance(self):
        # b = 0, sigma = s: Var X_T = s^2 int_0^T k(u)^2 du up to O(h)
        k = ExpSumKernel(terms=((1.0, 1.0), (0.5, 3.0)))
        g = SimGrid(T=1.0, N=400)
        s_const = 0.8
        c = registry_coefficients("const", {"c": 0.0}, "const", {"c": s_const})
        dW = brownian_increments(17, 10_000, g)
        X, _ = direct_euler(k, k, c, 0.0, g, dW)
        target, _ = integrate.quad(lambda u: float(k(u)) ** 2, 0, 1.0)
        target *= s_const ** 2
        sample = np.var(X[:, -1], ddof=1)
        se = target * np.sqrt(2.0 / (X.shape[0] - 1))
        assert abs(sample - target) < 3.0 * se

    def test_determinism(self):
        k = ExpSumKernel(terms=((1.0, 1.0),))
        g = SimGrid(T=1.0, N=100)
        c = registry_coefficients("mean_revert", {}, "bounded_sin", {})
        dW = brownian_increments(23, 3, g)
        X1, _ = direct_euler(k, k, c, 1.0, g, dW)
        X2, _ = direct_euler(k, k, c, 1.0, g, dW)
        np.testing.assert_array_equal(X1, X2)


class TestComparePaths:
    def test_identical(self):
        p = np.linspace(0, 1, 11)
        assert compare_paths(p, p) == (0.0, 0.0)

    def test_grid_mismatch(self):
        with pytest.raises(ValueError):
            compare_paths(np.zeros(3), np.zeros(4))

    def test_drift_weights_identical_for_exponential_sums(self):
        # noiseless case: the phi1 cell rule and the exact cell integrals of
        # an exponential-sum kernel coincide, so the two solvers agree to
        # machine precision
        k = ExpSumKernel(terms=((0.5, 1.0), (2.0, 0.7)))
        atoms = discretize(lift_measure(k), PartitionSpec(n_cells=4))
        c = registry_coefficients("mean_revert", {"kappa": 1.0})
        g = SimGrid(T=1.0, N=500)
        ens = simulate_ensemble(atoms, atoms, 1.0, c, g, np.zeros((1, g.N)))
        X, _ = direct_euler(k, k, c, 1.0, g, np.zeros((1, g.N)))
        assert compare_paths(ens.X[0], X[0])[0] < 1e-12

    def test_lift_vs_direct_refines(self):
        # with noise the diffusion weights differ at order h; halving h
        # should shrink the gap by about half
        k = ExpSumKernel(terms=((0.5, 1.0), (2.0, 0.7)))
        atoms = discretize(lift_measure(k), PartitionSpec(n_cells=4))
        c = registry_coefficients("mean_revert", {"kappa": 1.0},
                                  "bounded_sin", {"a": 0.5})
        sups = []
        for N in (500, 1000):
            g = SimGrid(T=1.0, N=N)
            dW = brownian_increments(41, 20, g)
            ens = simulate_ensemble(atoms, atoms, 1.0, c, g, dW)
            X, _ = direct_euler(k, k, c, 1.0, g, dW)
            sups.append(np.mean([compare_paths(ens.X[p], X[p])[0]
                                 for p in range(20)]))
        assert sups[1] <= sups[0] / 1.5

    def test_lift_vs_direct_fractional_rms(self):
        k = FractionalKernel(alpha=0.7)
        atoms = discretize(lift_measure(k), PartitionSpec(n_cells=200))
        c = registry_coefficients("mean_revert", {"kappa": 1.0},
                                  "bounded_sin", {"a": 0.5})
        g = SimGrid(T=1.0, N=500)
        dW = brownian_increments(31, 20, g)
        ens = simulate_ensemble(atoms, atoms, 1.0, c, g, dW)
        X, _ = direct_euler(k, k, c, 1.0, g, dW)
        rms = np.mean([compare_paths(ens.X[p], X[p])[1] for p in range(20)])
        scale = np.mean(np.max(np.abs(X), axis=1))
        assert rms < 0.05 * scale
