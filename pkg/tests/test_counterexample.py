"""Tests for the boundary-driven local problem and its translated quotients."""

import math

import numpy as np
import pytest

from tclab.counterexample import (
    LocalProblem,
    RatioEntry,
    RatioSeries,
    WeightTriple,
    boundary_signal,
    build_tc_sequence,
    effective_horizon,
    extend_levels,
    extension_width,
    local_boundary_solve,
    poincare_eigenvalue,
    seam_jumps,
    smooth_extension,
    smoothstep5,
    tc_counterexample,
    weighted_log_norm,
)
from tclab.errors import HypothesisError
from tclab.grid import build_grid
from tclab.operators import PhysParams

P = PhysParams(1e-2, 1, 10.0)


def silent(t):
    return np.zeros_like(np.asarray(t, dtype=float))


class TestProfiles:
    """Quintic lift and the boundary signal."""

    def test_smoothstep(self):
        out = smoothstep5(np.array([-1.0, 0.0, 0.5, 1.0, 2.0]))
        np.testing.assert_allclose(out, [0, 0, 0.5, 1, 1])

    def test_boundary_signal(self):
        out = boundary_signal(np.array([0.5, 1.0, 1.5, 2.0, 3.0]))
        np.testing.assert_allclose(out, [0, 0, 1, 0, 0])
        assert 0 < float(boundary_signal(1.2)) < 1

    def test_local_problem_delta(self):
        with pytest.raises(HypothesisError):
            LocalProblem(0.3)
        with pytest.raises(HypothesisError):
            LocalProblem(0.0)
        assert LocalProblem(0.1).halved().delta == pytest.approx(0.05)


class TestWeightTriple:
    """Positivity and monotonicity of the weights."""

    def test_q2_instance(self):
        w = WeightTriple.q2_instance(2.0)
        r = np.linspace(1.0, 2.0, 11)
        phi = w.validate(r, decreasing=True)
        np.testing.assert_allclose(phi, 2.0 / r**2)

    def test_constant_phi(self):
        w = WeightTriple(np.ones_like, np.ones_like, np.ones_like)
        with pytest.raises(HypothesisError):
            w.validate(np.linspace(1.0, 2.0, 5), decreasing=False)

    def test_increasing_phi_rejected(self):
        w = WeightTriple(np.ones_like, np.ones_like, lambda r: r)
        with pytest.raises(HypothesisError):
            w.validate(np.linspace(1.0, 2.0, 5), decreasing=True)

    def test_negative_profile(self):
        w = WeightTriple(lambda r: -np.ones_like(r), np.ones_like, lambda r: 1 / r)
        with pytest.raises(HypothesisError):
            w.validate(np.linspace(1.0, 2.0, 5), decreasing=True)


class TestRatioSeries:
    """Translated quotients in log space."""

    def series(self, logs):
        return RatioSeries(tuple(RatioEntry(n, v, 0.0) for n, v in enumerate(logs)))

    def test_slope_and_growth(self):
        s = self.series([0.0, 1.0, 2.0, 3.0])
        assert s.fitted_slope() == pytest.approx(1.0)
        np.testing.assert_allclose(s.successive_ratios(), math.e)
        assert s.eventually_increasing()
        assert s.rows()[1]["R_n"] == pytest.approx(math.e)

    def test_not_increasing(self):
        assert not self.series([0.0, 2.0, 1.0, 3.0]).eventually_increasing()

    def test_rejects_non_finite(self):
        with pytest.raises(HypothesisError):
            RatioSeries((RatioEntry(0, -math.inf, 0.0),))

    def test_weighted_log_norm_matches_direct_sum(self):
        times = np.array([0.0, 0.5])
        phi = np.array([1.0, 2.0, 3.0])
        density = np.arange(1.0, 7.0).reshape(2, 3)
        direct = math.sqrt(
            sum(
                math.exp(2 * (t + 2) * f) * density[i, j]
                for i, t in enumerate(times)
                for j, f in enumerate(phi)
            )
        )
        assert weighted_log_norm(times, phi, density, 2) == pytest.approx(math.log(direct))

    def test_large_translation_does_not_overflow(self):
        value = weighted_log_norm(np.array([0.0]), np.array([50.0]), np.array([[1.0]]), 100)
        assert value == pytest.approx(5000.0)


class TestExtension:
    """Reflection across the seam reproduces quadratics."""

    N_LOCAL = 63
    DELTA = 0.1

    def quadratic_levels(self):
        h = self.DELTA / (self.N_LOCAL + 1)
        r = 1.0 + h * np.arange(1, self.N_LOCAL + 1)
        levels = np.vstack([(r - 1.0) ** 2, 2 * (r - 1.0) ** 2])
        boundary = np.array([self.DELTA**2, 2 * self.DELTA**2])
        return levels, boundary, h

    def test_width(self):
        assert extension_width(127) == 42
        assert extension_width(63) == 21

    def test_exact_on_quadratics(self):
        levels, boundary, h = self.quadratic_levels()
        out = extend_levels(levels, boundary, h)
        m = extension_width(self.N_LOCAL)
        assert out.shape == (2, self.N_LOCAL + m + 1)
        for j in range(1, m // 2 + 1):
            expected = (self.DELTA + j * h) ** 2
            assert out[0, self.N_LOCAL + j].real == pytest.approx(expected, rel=1e-10)
            assert out[1, self.N_LOCAL + j].real == pytest.approx(2 * expected, rel=1e-10)
        assert out[0, -1] == 0

    def test_no_jump_at_seam(self):
        levels, boundary, h = self.quadratic_levels()
        out = extend_levels(levels, boundary, h)
        jumps = seam_jumps(out, self.N_LOCAL, h)
        assert jumps.d1 < 1e-6
        assert jumps.d2 < 1e-6

    def test_zero_levels_stay_zero(self):
        out = extend_levels(np.zeros((3, 30)), np.zeros(3), 0.01)
        assert not np.any(out)


class TestLocalProblem:
    """Local solve on [1, 1+delta]."""

    def test_poincare_eigenvalue(self):
        g = build_grid(1.0, 1.1, 63)
        expected = 4 / g.h**2 * math.sin(math.pi / 128) ** 2
        assert poincare_eigenvalue(g) == pytest.approx(expected, rel=1e-10)

    def test_needs_enough_nodes(self):
        with pytest.raises(HypothesisError):
            local_boundary_solve(P, LocalProblem(0.1), n_local=32)

    def test_silent_boundary(self):
        run = local_boundary_solve(P, LocalProblem(0.1, silent), n_local=64, dt=1e-2, t_end=3.0)
        assert not np.any(run.eta_tilde)
        assert run.decay_rate == math.inf
        ext = smooth_extension(run)
        assert ext.interior_residual == 0.0
        with pytest.raises(HypothesisError):
            build_tc_sequence(ext, WeightTriple.q2_instance(P.kappa))

    def test_horizon(self):
        assert effective_horizon(3.0, 1.0) == pytest.approx(2 + math.log(1e6) / 4)


class TestTCCounterexample:
    """The translated quotient grows for a decreasing phi."""

    @pytest.fixture(scope="class")
    def sequence(self):
        return tc_counterexample(
            P, WeightTriple.q2_instance(P.kappa), n_local=64, dt=2e-3, n_max=6
        )

    def test_shape(self, sequence):
        assert sequence.delta == pytest.approx(0.1)
        assert len(sequence.series.entries) == 7
        assert 1.0 < sequence.centroid < 1.1

    def test_norms_finite(self, sequence):
        assert sequence.finite
        assert sequence.decay_rate > sequence.phi_max
        assert sequence.phi_max == pytest.approx(P.kappa)

    def test_quotient_grows(self, sequence):
        assert sequence.predicted_slope > 0
        assert sequence.fitted_slope > 0

    def test_consistency_report(self, sequence):
        assert sequence.consistency.max_residual >= sequence.consistency.residual
        assert 1.0 < sequence.consistency.time < 2.0
