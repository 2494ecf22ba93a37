"""Tests for heat kernels, smooth cutoffs and the Duhamel quotients."""

import math

import numpy as np
import pytest

from tclab.counterexample import WeightTriple
from tclab.errors import HypothesisError
from tclab.heatkernel import (
    HeatKernel,
    KernelDomain,
    heat_kernel_counterexample,
    inner_interval,
    kernel_mass,
    plateau_bump,
    smooth_transition,
    xi,
    zeta,
)

LINE = HeatKernel()
HALF = HeatKernel(KernelDomain.HALF_LINE)
INTERVAL = HeatKernel(KernelDomain.INTERVAL, length=5.0)


class TestKernels:
    """Free and Dirichlet kernels."""

    def test_line_mass(self):
        assert kernel_mass(LINE, 0.5, 1.0) == pytest.approx(1.0, abs=1e-6)

    def test_line_value(self):
        assert float(LINE(1.0, 0.0, 0.0)) == pytest.approx(1 / math.sqrt(4 * math.pi))

    def test_symmetry(self):
        for kernel in (LINE, HALF, INTERVAL):
            assert float(kernel(0.3, 1.0, 2.5)) == pytest.approx(float(kernel(0.3, 2.5, 1.0)))

    def test_dirichlet_below_free(self):
        y = np.linspace(0.05, 4.95, 50)
        free = LINE(0.7, 1.0, y)
        assert np.all(HALF(0.7, 1.0, y) <= free * (1 + 1e-12))
        assert np.all(INTERVAL(0.7, 1.0, y) <= free * (1 + 1e-12))
        assert np.all(INTERVAL(0.7, 1.0, y) >= 0)

    def test_dirichlet_mass_leaks(self):
        assert 0 < kernel_mass(HALF, 1.0, 0.5) < 1
        assert 0 < kernel_mass(INTERVAL, 1.0, 0.5) < kernel_mass(HALF, 1.0, 0.5) + 1e-9

    def test_outside_domain(self):
        assert float(HALF(0.5, -1.0, 1.0)) == 0.0
        assert float(INTERVAL(0.5, 1.0, 6.0)) == 0.0

    def test_long_interval_matches_half_line(self):
        wide = HeatKernel(KernelDomain.INTERVAL, length=50.0)
        assert float(wide(0.5, 1.0, 2.0)) == pytest.approx(float(HALF(0.5, 1.0, 2.0)), rel=1e-9)

    def test_needs_positive_time(self):
        with pytest.raises(HypothesisError):
            LINE(0.0, 1.0, 1.0)


class TestCutoffs:
    """Smooth transition, zeta and xi."""

    def test_transition(self):
        out = smooth_transition(np.array([-1.0, 0.0, 0.5, 1.0, 2.0]))
        np.testing.assert_allclose(out, [0, 0, 0.5, 1, 1])
        grid = np.linspace(0.01, 0.99, 50)
        assert np.all(np.diff(smooth_transition(grid)) > 0)

    def test_zeta(self):
        out = zeta(np.array([0.1, 0.25, 0.5, 0.75, 0.9]))
        np.testing.assert_allclose(out, [0, 1, 1, 1, 0])

    def test_xi_plateau(self):
        assert inner_interval((0.0, 1.0)) == (0.25, 0.75)
        np.testing.assert_allclose(xi(np.array([0.3, 0.5, 0.7]), (0.0, 1.0)), 1.0)
        assert float(xi(1.0, (0.0, 1.0))) == 0.0

    def test_plateau_must_fit(self):
        with pytest.raises(HypothesisError):
            plateau_bump(0.5, (0.0, 1.0), (0.5, 1.0))


class TestHeatCounterexample:
    """Duhamel solution with forcing on V1 observed on V2."""

    @pytest.fixture(scope="class")
    def sequence(self):
        return heat_kernel_counterexample(n_max=6, n_t=40, n_x=60, n_s=32, n_y=32)

    def test_solution_positive_at_observation_point(self, sequence):
        assert sequence.w_at_x0 > 0
        assert sequence.w_at_x0_grid > 0

    def test_gap(self, sequence):
        assert sequence.d1 == pytest.approx(1.0)
        assert sequence.d2 == pytest.approx(3.0)
        assert sequence.gap == pytest.approx(2.0)

    def test_slope(self, sequence):
        assert sequence.fitted_slope >= 0.9 * sequence.gap
        assert sequence.series.eventually_increasing()

    def test_regions_in_wrong_order(self):
        with pytest.raises(HypothesisError):
            heat_kernel_counterexample(v1=(3.0, 4.0), v2=(0.0, 1.0), n_t=4, n_x=8)

    def test_observation_point_outside(self):
        with pytest.raises(HypothesisError):
            heat_kernel_counterexample(x0=2.0)

    def test_region_outside_domain(self):
        with pytest.raises(HypothesisError):
            heat_kernel_counterexample("half-line-dirichlet", v1=(-1.0, 0.0))

    def test_constant_phi(self):
        flat = WeightTriple(np.ones_like, np.ones_like, np.ones_like)
        with pytest.raises(HypothesisError):
            heat_kernel_counterexample(weights=flat)
