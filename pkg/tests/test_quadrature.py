import numpy as np
import pytest
from scipy.special import gammaincc, gamma as gamma_fn

from volift.kernels import (
    ExpSumKernel,
    FractionalKernel,
    GammaKernel,
    KernelError,
    lift_measure,
)
from volift.quadrature import (
    DiscreteLiftMeasure,
    PartitionSpec,
    discretize,
    kernel_approx_error,
    tail_bound,
)

T_GRID = np.geomspace(0.01, 5.0, 10_000)  # brute-force comparison grid


def fractional_atoms(alpha=0.7, n=200):
    return discretize(lift_measure(FractionalKernel(alpha=alpha)), PartitionSpec(n_cells=n))


class TestDiscretize:
    def test_atoms_pass_through(self):
        m = lift_measure(ExpSumKernel(terms=((2.0, 3.0),)))
        d = discretize(m, PartitionSpec(n_cells=10))
        assert d.nodes.tolist() == [3.0]
        assert d.masses.tolist() == [2.0]

    def test_single_cell_closed_form(self):
        # one cell on [1, 2] for the alpha=0.7 density; mass and centroid from
        # the antiderivatives x^{0.3}/0.3 and x^{1.3}/1.3 (frozen via mpmath)
        m = lift_measure(FractionalKernel(alpha=0.7))
        d = discretize(m, PartitionSpec(n_cells=1, x_min=1.0, x_max=2.0))
        cell = d.masses[-1], d.nodes[-1]
        assert cell[0] == pytest.approx(0.19841290620240689, rel=1e-9)
        assert cell[1] == pytest.approx(1.4599153092837468, rel=1e-9)

    def test_masses_nonnegative(self):
        d = fractional_atoms()
        assert np.all(d.masses >= 0)
        assert np.all(np.diff(d.nodes) > 0)

    def test_mass_conservation(self):
        from scipy import integrate

        m = lift_measure(FractionalKernel(alpha=0.7))
        p = PartitionSpec(n_cells=50, x_min=1e-3, x_max=1e3)
        d = discretize(m, p)
        total, _ = integrate.quad(lambda x: float(m.density(np.asarray(x))), 0.0, 1e3 + 0.0,
                                  limit=200)
        assert d.total_mass == pytest.approx(total, rel=1e-8)

    def test_invalid_partition(self):
        with pytest.raises(KernelError):
            PartitionSpec(n_cells=0)
        with pytest.raises(KernelError):
            PartitionSpec(n_cells=5, x_min=2.0, x_max=1.0)


class TestApproxError:
    def test_expsum_exact(self):
        k = ExpSumKernel(terms=((1.0, 0.5), (2.0, 4.0)))
        d = discretize(lift_measure(k), PartitionSpec(n_cells=3))
        sup_abs, sup_rel = kernel_approx_error(k, d, T_GRID)
        assert sup_abs == 0.0
        assert sup_rel == 0.0

    def test_fractional_below_1e2(self):
        k = FractionalKernel(alpha=0.7)
        _, sup_rel = kernel_approx_error(k, fractional_atoms(n=200), T_GRID)
        assert sup_rel < 1e-2

    def test_refinement_improves(self):
        k = FractionalKernel(alpha=0.7)
        _, rel_50 = kernel_approx_error(k, fractional_atoms(n=50), T_GRID)
        _, rel_200 = kernel_approx_error(k, fractional_atoms(n=200), T_GRID)
        assert rel_200 < rel_50

    def test_gamma_kernel_below_1e2(self):
        k = GammaKernel(alpha=0.7, beta=2.0)
        d = discretize(lift_measure(k), PartitionSpec(n_cells=200))
        _, sup_rel = kernel_approx_error(k, d, T_GRID)
        assert sup_rel < 1e-2

    def test_refinement_monotonicity_with_widening(self):
        k = FractionalKernel(alpha=0.7)
        m = lift_measure(k)
        coarse = discretize(m, PartitionSpec(n_cells=100, x_min=1e-4, x_max=1e4))
        fine = discretize(m, PartitionSpec(n_cells=200, x_min=1e-5, x_max=1e5))
        _, rel_c = kernel_approx_error(k, coarse, T_GRID)
        _, rel_f = kernel_approx_error(k, fine, T_GRID)
        assert rel_f <= 1.1 * rel_c


class TestTailBound:
    def test_atoms_zero(self):
        m = lift_measure(ExpSumKernel(terms=((1.0, 2.0),)))
        assert tail_bound(m, PartitionSpec(n_cells=10), t_min=0.5) == 0.0

    def test_fractional_incomplete_gamma_oracle(self):
        # upper-tail part bounded by t^{-0.3} Gamma(0.3, t X)/(Gamma(0.7)Gamma(0.3))
        alpha, t_min, x_max = 0.7, 0.05, 100.0
        m = lift_measure(FractionalKernel(alpha=alpha))
        b = tail_bound(m, PartitionSpec(n_cells=10, x_min=1e-8, x_max=x_max), t_min)
        oracle = (
            t_min ** (alpha - 1.0)
            * gammaincc(1.0 - alpha, t_min * x_max)
            * gamma_fn(1.0 - alpha)
            / (gamma_fn(alpha) * gamma_fn(1.0 - alpha))
        )
        assert b <= oracle * 1.0001
        assert b == pytest.approx(oracle, rel=1e-4)

    def test_vanishes_as_window_grows(self):
        m = lift_measure(FractionalKernel(alpha=0.7))
        b1 = tail_bound(m, PartitionSpec(n_cells=10, x_max=1e3), t_min=0.01)
        b2 = tail_bound(m, PartitionSpec(n_cells=10, x_max=1e5), t_min=0.01)
        assert b2 < b1
        assert b2 < 1e-8


def test_decayed_and_kernel_values():
    d = DiscreteLiftMeasure(np.array([1.0, 2.0]), np.array([3.0, 4.0]))
    dd = d.decayed(0.5)
    np.testing.assert_allclose(dd.masses, [3.0 * np.exp(-0.5), 4.0 * np.exp(-1.0)])
    assert d.kernel_values(0.5)[0] == pytest.approx(dd.total_mass)
