"""Tests for grids, grid functions, weights and discrete norms."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tclab.errors import GridError
from tclab.grid import (
    GridFunction,
    WeightSpec,
    build_grid,
    bump_profile,
    derivative,
    forward_difference,
    grid_with_spacing,
    inner_product,
    max_abs,
    staggered_norm,
    weighted_norm,
)

N = 16
GRID = build_grid(1.0, 3.0, N)

complex_entries = st.complex_numbers(
    max_magnitude=10.0, allow_nan=False, allow_infinity=False
)
vectors = st.lists(complex_entries, min_size=N, max_size=N).map(
    lambda xs: GridFunction(GRID, np.array(xs, dtype=complex))
)
algebra = settings(derandomize=True, max_examples=60, deadline=None)


class TestGrid:
    """Grid construction, spacing and refinement."""

    def test_spacing_and_nodes(self):
        g = build_grid(1.0, 2.0, 9)
        assert g.h == pytest.approx(0.1)
        assert g.nodes[0] == pytest.approx(1.1)
        assert g.nodes[-1] == pytest.approx(1.9)
        assert g.r_max == 2.0

    def test_rejects_empty_interval(self):
        with pytest.raises(GridError):
            build_grid(2.0, 1.0, 16)

    def test_rejects_too_few_nodes(self):
        with pytest.raises(ValueError):
            build_grid(1.0, 2.0, 4)

    def test_rejects_infinite_end(self):
        with pytest.raises(GridError):
            build_grid(1.0, math.inf, 16)

    def test_refined_keeps_old_nodes(self):
        fine = GRID.refined()
        assert fine.h == pytest.approx(GRID.h / 2)
        np.testing.assert_allclose(fine.nodes[1::2], GRID.nodes, rtol=0, atol=1e-14)

    def test_extended_keeps_spacing(self):
        wide = GRID.extended()
        assert wide.b_end == pytest.approx(5.0)
        assert wide.h == pytest.approx(GRID.h)

    def test_grid_with_spacing_is_at_least_as_fine(self):
        g = grid_with_spacing(1.0, 4.0, 0.013)
        assert g.h <= 0.013

    def test_nodes_are_read_only(self):
        with pytest.raises(ValueError):
            GRID.nodes[0] = 0.0


class TestGridFunction:
    """Grid function validation and arithmetic."""

    def test_shape_mismatch(self):
        with pytest.raises(GridError):
            GridFunction(GRID, np.zeros(N + 1))

    def test_non_finite(self):
        values = np.zeros(N)
        values[3] = np.nan
        with pytest.raises(GridError):
            GridFunction(GRID, values)

    def test_grid_mismatch_in_sum(self):
        other = build_grid(1.0, 3.0, N + 1)
        with pytest.raises(GridError):
            GridFunction.zeros(GRID) + GridFunction.zeros(other)

    def test_arithmetic(self):
        f = GridFunction.from_callable(GRID, lambda r: r)
        g = 2 * f - f
        np.testing.assert_allclose(g.values, f.values)
        assert max_abs(-f) == pytest.approx(GRID.nodes[-1])


class TestWeights:
    """Weight specifications and their config spelling."""

    def test_parse_and_describe(self):
        assert WeightSpec.parse("unit").describe() == "unit"
        assert WeightSpec.parse("power:2").describe() == "power:2"
        assert WeightSpec.power(-2).scaled(3).describe() == "3*power:-2"

    def test_parse_rejects_unknown(self):
        with pytest.raises(GridError):
            WeightSpec.parse("gaussian")
        with pytest.raises(GridError):
            WeightSpec.parse("power:x")

    def test_custom_must_be_positive(self):
        with pytest.raises(GridError):
            WeightSpec.custom(np.zeros(N))

    def test_custom_must_match_grid(self):
        w = WeightSpec.custom(np.ones(N + 2))
        with pytest.raises(GridError):
            w.sample(GRID)

    def test_power_weight_norm(self):
        f = GridFunction(GRID, np.ones(N))
        expected = math.sqrt(GRID.h * float(np.sum(GRID.nodes**2)))
        assert weighted_norm(f, WeightSpec.power(2)) == pytest.approx(expected)

    def test_unit_norm_of_constant(self):
        f = GridFunction(GRID, np.ones(N))
        assert weighted_norm(f) == pytest.approx(math.sqrt(N * GRID.h))


class TestInnerProduct:
    """Algebraic properties of the discrete inner product."""

    @algebra
    @given(vectors, vectors)
    def test_conjugate_symmetry(self, f, g):
        assert inner_product(f, g) == pytest.approx(np.conj(inner_product(g, f)), abs=1e-9)

    @algebra
    @given(vectors, vectors)
    def test_cauchy_schwarz(self, f, g):
        assert abs(inner_product(f, g)) <= weighted_norm(f) * weighted_norm(g) * (1 + 1e-12) + 1e-12

    @algebra
    @given(vectors, vectors)
    def test_triangle_inequality(self, f, g):
        assert weighted_norm(f + g) <= weighted_norm(f) + weighted_norm(g) + 1e-9

    @algebra
    @given(vectors, vectors, complex_entries)
    def test_linearity_in_first_slot(self, f, g, a):
        lhs = inner_product(f * a + g, g)
        rhs = a * inner_product(f, g) + inner_product(g, g)
        assert lhs == pytest.approx(rhs, abs=1e-8 * (1 + abs(rhs)))


class TestDifferences:
    """Central and staggered differences."""

    def test_derivative_of_linear_function(self):
        f = GridFunction.from_callable(GRID, lambda r: 3 * r)
        np.testing.assert_allclose(derivative(f).values[1:-1], 3.0)

    def test_forward_difference_has_n_plus_one_cells(self):
        f = GridFunction.from_callable(GRID, lambda r: r)
        assert forward_difference(f).shape == (N + 1,)

    def test_staggered_norm_of_hat(self):
        f = GridFunction.zeros(GRID).map(np.eye(N)[3])
        # one spike: two cells of slope +-1/h
        assert staggered_norm(f) == pytest.approx(math.sqrt(2 / GRID.h))


class TestBumpProfile:
    """Compactly supported smooth bumps."""

    def test_peak_and_support(self):
        x = np.array([1.0, 2.0, 3.0, 2.5])
        out = bump_profile(x, 2.0, 0.5)
        assert out[1] == pytest.approx(math.exp(-1))
        assert out[0] == 0.0
        assert out[2] == 0.0
        assert out[3] == 0.0
