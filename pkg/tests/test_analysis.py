"""Tests for cutoffs, the Hardy-type bound, the log integral and the region split."""

import math

import numpy as np
import pytest

from tclab.analysis import (
    hardy_audit,
    log_integral_audit,
    region_split_measure,
    rho_cutoff,
    rho_cutoff_derivative,
    rho_delta,
)
from tclab.errors import HypothesisError
from tclab.grid import GridFunction, build_grid
from tclab.resolvent import random_bumps

GRID = build_grid(1.0, 8.0, 1023)


class TestRhoCutoff:
    """Odd quintic cutoff between +1 and -1."""

    def test_values(self):
        out = rho_cutoff(np.array([-2.0, -1.0, 0.0, 1.0, 2.0]))
        np.testing.assert_allclose(out, [1, 1, 0, -1, -1], atol=1e-15)

    def test_derivative(self):
        z = np.linspace(-0.9, 0.9, 7)
        eps = 1e-6
        fd = (rho_cutoff(z + eps) - rho_cutoff(z - eps)) / (2 * eps)
        np.testing.assert_allclose(rho_cutoff_derivative(z), fd, rtol=1e-6, atol=1e-9)
        assert rho_cutoff_derivative(np.array([1.5]))[0] == 0.0

    def test_scaled(self):
        assert float(rho_delta(3.0, 2.0, 0.5)) == -1.0
        with pytest.raises(HypothesisError):
            rho_delta(1.0, 2.0, 0.0)


class TestHardy:
    """max |f|^2 / r is controlled by the energy norms."""

    @pytest.mark.parametrize("seed", range(5))
    def test_quotient_bounded(self, seed):
        rng = np.random.default_rng(seed)
        f = random_bumps(rng, GRID, rng.uniform(1.5, 7.0, 3), rng.uniform(0.05, 1.0, 3))
        assert hardy_audit(f).quotient <= 2.5

    def test_zero_data(self):
        assert hardy_audit(GridFunction.zeros(GRID)).quotient == 0.0


class TestLogIntegral:
    """int dr/r over a symmetric window."""

    @pytest.mark.parametrize("delta", [0.01, 0.1, 0.5])
    def test_holds(self, delta):
        result = log_integral_audit(2.0, delta)
        assert result.holds
        assert result.quadrature == pytest.approx(result.value, rel=1e-10)

    def test_closed_form(self):
        assert log_integral_audit(3.0, 0.5).value == pytest.approx(math.log(3.0))

    def test_rejects_bad_input(self):
        with pytest.raises(HypothesisError):
            log_integral_audit(1.0, 0.1)
        with pytest.raises(HypothesisError):
            log_integral_audit(2.0, 0.75)


class TestRegionSplit:
    """Splitting kappa |w/r|^2 by r^2 against kappa t."""

    def snapshots(self, count: int, dt: float):
        w = GridFunction(GRID, np.exp(-((GRID.nodes - 3.0) ** 2)))
        return [(n * dt, w) for n in range(count)]

    def test_parts_add_up(self):
        split = region_split_measure(self.snapshots(40, 0.5), 0.5, kappa=1.0)
        assert split.total == pytest.approx(split.I1 + split.I2)
        assert split.I1 > 0
        assert split.I2 > 0

    def test_bounds_hold(self):
        split = region_split_measure(self.snapshots(40, 0.5), 0.5, kappa=1.0)
        assert split.slack1 >= 0
        assert split.slack2 >= 0

    def test_early_times_stay_in_second_region(self):
        split = region_split_measure(self.snapshots(3, 0.1), 0.1, kappa=0.1)
        assert split.I1 == 0.0

    def test_needs_snapshots(self):
        with pytest.raises(HypothesisError):
            region_split_measure([], 0.1, kappa=1.0)
