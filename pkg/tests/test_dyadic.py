"""Tests for the dyadic shape function and partition of unity."""

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tclab.dyadic import (
    DyadicPartition,
    dyadic_shape_eval,
    junction_identity,
    junction_ok,
    partition_audit,
)
from tclab.errors import HypothesisError


class TestShape:
    """Ramp, plateau and mirrored ramp."""

    def test_junctions_are_exact(self):
        ident = junction_identity()
        assert ident["P_at_5/6"] == Fraction(1728)
        assert ident["value_at_5/6"] == 1
        assert junction_ok()

    def test_plateau_and_outside(self):
        s = dyadic_shape_eval(np.array([0.5, 0.75, 1.0, 1.5, 23 / 12, 3.0]))
        np.testing.assert_allclose(s.value, [0, 0, 1, 1, 0, 0], atol=1e-12)

    def test_continuity_at_plateau_edges(self):
        eps = 1e-7
        for edge in (5 / 6, 11 / 6):
            s = dyadic_shape_eval(np.array([edge - eps, edge + eps]))
            assert s.value == pytest.approx([1.0, 1.0], abs=1e-6)
            assert np.max(np.abs(s.d1)) < 1e-3

    def test_mirror_symmetry(self):
        r = np.linspace(0.76, 0.83, 20)
        left = dyadic_shape_eval(r)
        right = dyadic_shape_eval(8 / 3 - r)
        np.testing.assert_allclose(left.value, right.value, rtol=1e-9, atol=1e-12)
        np.testing.assert_allclose(left.d1, -right.d1, rtol=1e-9, atol=1e-9)

    def test_derivative_matches_differences(self):
        r = np.array([0.79, 0.8, 1.87, 1.9])
        eps = 1e-6
        s = dyadic_shape_eval(r)
        fd = (dyadic_shape_eval(r + eps).value - dyadic_shape_eval(r - eps).value) / (2 * eps)
        np.testing.assert_allclose(s.d1, fd, rtol=1e-5)

    def test_negative_radius(self):
        with pytest.raises(HypothesisError):
            dyadic_shape_eval(np.array([-0.1]))


class TestPartition:
    """chi_j sums to one on the covered range."""

    @settings(derandomize=True, max_examples=50, deadline=None)
    @given(st.floats(min_value=1.0, max_value=64.0))
    def test_sum_to_one(self, r):
        chi = DyadicPartition(6).all_chi(np.array([r]))
        assert chi.sum() == pytest.approx(1.0, abs=1e-12)
        assert 0.5 - 1e-12 <= float((chi**2).sum()) <= 1.0 + 1e-12

    def test_first_piece_is_one_at_inner_radius(self):
        assert DyadicPartition(6).chi(0, np.array([1.0]))[0] == pytest.approx(1.0)

    def test_negative_j_max(self):
        with pytest.raises(HypothesisError):
            DyadicPartition(-1)


class TestPartitionAudit:
    """Every invariant passes and the inputs are validated."""

    def test_passes(self):
        report = partition_audit(j_max=6)
        assert report.passed, report.failures()
        names = {c.name for c in report.checks}
        assert {"junction_exact", "sum_one", "disjoint", "support", "chi_d1"} <= names

    def test_rejects_small_inputs(self):
        with pytest.raises(HypothesisError):
            partition_audit(j_max=3)
        with pytest.raises(HypothesisError):
            partition_audit(j_max=6, r_samples=100)
