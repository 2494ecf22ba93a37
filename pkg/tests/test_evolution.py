"""Tests for Crank-Nicolson evolution and the audits built on it."""

import logging
import math

import numpy as np
import pytest

from tclab.errors import HypothesisError
from tclab.evolution import (
    CrankNicolson,
    EvolutionSetup,
    TraceTerm,
    WeightPower,
    bump,
    decomposition_audit,
    default_dt,
    default_t_end,
    evolve,
    exponential_weight_probe,
    gp_semigroup_check,
    homogeneous_decay_audit,
    inhomogeneous_audit,
    defect_substep,
    smallness_limit,
    switched_forcing,
    theta_damping,
)
from tclab.grid import GridFunction, build_grid
from tclab.operators import OperatorKind, PhysParams
from tclab.resolvent import pseudo_bound

RADIAL = build_grid(1.0, 4.0, 255)


def tc_setup(p: PhysParams, *, dt: float = 0.1, t_end: float = 2.0, **kwargs) -> EvolutionSetup:
    initial = kwargs.pop("initial", bump(RADIAL))
    return EvolutionSetup(p, RADIAL, dt, t_end, OperatorKind.tc(), initial, **kwargs)


class TestDefaults:
    """Step size and horizon picked from the physical rates."""

    def test_default_dt_and_horizon(self):
        p = PhysParams(1e-3, 1, 1.0)
        assert default_dt(p) == pytest.approx(0.1)
        assert default_t_end(p) == pytest.approx(200.0)

    def test_without_rotation(self):
        p = PhysParams(1e-2, 2, 0.0)
        assert default_dt(p) == pytest.approx(0.1 / 4e-2)

    def test_setup_validation(self):
        p = PhysParams(1e-3, 1, 1.0)
        with pytest.raises(HypothesisError):
            tc_setup(p, dt=0.0)
        with pytest.raises(HypothesisError):
            tc_setup(p, dt=3.0, t_end=2.0)
        with pytest.raises(HypothesisError):
            tc_setup(p, initial=GridFunction.zeros(build_grid(1.0, 4.0, 64)))


class TestCrankNicolson:
    """The step matches the exact discrete amplification factor."""

    def test_heat_eigenmode(self):
        g = build_grid(0.0, 1.0, 31)
        p = PhysParams(1.0, 1, 0.0)
        initial = GridFunction.from_callable(g, lambda x: np.sin(math.pi * x))
        setup = EvolutionSetup(p, g, 0.01, 0.1, OperatorKind.heat(), initial)
        result = evolve(setup)
        mu = 4 / g.h**2 * math.sin(math.pi * g.h / 2) ** 2
        factor = ((1 - 0.005 * mu) / (1 + 0.005 * mu)) ** 10
        np.testing.assert_allclose(result.final.values, factor * initial.values, rtol=1e-10)

    def test_damping_operator_depends_on_time(self):
        stepper = CrankNicolson(OperatorKind.w1(0.0), PhysParams(1e-3, 1, 1.0), RADIAL, 0.1)
        early = stepper.operator_at(0.0).diag
        late = stepper.operator_at(10.0).diag
        assert np.all(late.real > early.real)

    def test_time_independent_factor_is_cached(self):
        stepper = CrankNicolson(OperatorKind.tc(), PhysParams(1e-3, 1, 1.0), RADIAL, 0.1)
        w = bump(RADIAL).values
        stepper.step(w, 0.0)
        cached = stepper._cache
        stepper.step(w, 0.1)
        assert stepper._cache is cached


class TestEvolve:
    """Homogeneous contraction and forced runs."""

    def test_homogeneous_contracts(self):
        result = evolve(tc_setup(PhysParams(1e-3, 1, 1.0)))
        assert result.violations == 0
        assert np.all(np.diff(result.norms) <= 1e-13 * result.norms[0])
        assert result.times[-1] == pytest.approx(2.0)
        assert result.trace.energy > 0

    def test_snapshots(self):
        result = evolve(tc_setup(PhysParams(1e-3, 1, 1.0), snapshot_every=5))
        assert [t for t, _ in result.snapshots] == pytest.approx([0.0, 0.5, 1.0, 1.5, 2.0])

    def test_switched_forcing(self):
        profile = bump(RADIAL)
        forcing = switched_forcing(profile, 0.0, 1.0)
        assert np.array_equal(forcing(0.5), profile.values)
        assert not np.any(forcing(1.5))
        setup = tc_setup(
            PhysParams(1e-3, 1, 1.0), initial=GridFunction.zeros(RADIAL), forcing=forcing
        )
        result = evolve(setup)
        assert result.norms[0] == 0.0
        assert result.norms[-1] > 0.0

    def test_non_finite_forcing(self):
        setup = tc_setup(
            PhysParams(1e-3, 1, 1.0), forcing=lambda t: np.full(RADIAL.n_interior, np.nan)
        )
        with pytest.raises(HypothesisError):
            evolve(setup)

    def test_trace_term_mode(self):
        with pytest.raises(HypothesisError):
            TraceTerm("x", mode="linf")


class TestLinearity:
    """The discrete flow is linear in the data and the forcing."""

    P = PhysParams(1e-3, 1, 1.0)

    def final(self, initial, forcing=None):
        return evolve(tc_setup(self.P, initial=initial, forcing=forcing)).final.values

    def test_superposition_of_data(self):
        u0, v0 = bump(RADIAL, 1.8), bump(RADIAL, 3.0, 0.3)
        alpha, beta = 2.0 - 1.0j, 0.5j
        mixed = GridFunction(RADIAL, alpha * u0.values + beta * v0.values)
        w = self.final(mixed)
        expected = alpha * self.final(u0) + beta * self.final(v0)
        np.testing.assert_allclose(w, expected, rtol=0, atol=1e-11 * np.max(np.abs(w)))

    def test_data_and_forcing_split(self):
        u0 = bump(RADIAL, 1.8)
        forcing = switched_forcing(bump(RADIAL, 2.5, 0.3), 0.0, 1.0)
        full = self.final(u0, forcing)
        homogeneous = self.final(u0)
        forced = self.final(GridFunction.zeros(RADIAL), forcing)
        np.testing.assert_allclose(
            full, homogeneous + forced, rtol=0, atol=1e-11 * np.max(np.abs(full))
        )


class TestDecayAudit:
    """Weighted energies of the homogeneous flow."""

    def test_weight_power(self):
        weight = WeightPower(2, 0.5)
        assert weight(2.0, np.array([1.0]))[0] == pytest.approx(4.0)
        with pytest.raises(HypothesisError):
            WeightPower(-1, 0.5)

    def test_smallness(self):
        assert smallness_limit(2) == pytest.approx(1 / 1728)
        with pytest.raises(HypothesisError):
            homogeneous_decay_audit(tc_setup(PhysParams(1e-2, 1, 1.0)), (0, 1, 2))

    def test_rejects_forcing(self):
        setup = tc_setup(PhysParams(1e-4, 1, 1.0), forcing=switched_forcing(bump(RADIAL)))
        with pytest.raises(HypothesisError):
            homogeneous_decay_audit(setup)

    def test_rows(self):
        audit = homogeneous_decay_audit(tc_setup(PhysParams(1e-4, 1, 1.0), t_end=5.0))
        assert [row["q"] for row in audit.rows] == [0, 1, 2]
        assert audit.rows[0]["recurrence"] is None
        assert all(row["recurrence"] is not None for row in audit.rows[1:])
        assert all(row["ratio"] >= 1.0 for row in audit.rows)
        assert audit.decay_sup > 0
        assert audit.violations == 0

    def test_weighted_energy_grows_with_q(self):
        # Lambda >= 1, so each extra power can only raise the weighted energy
        audit = homogeneous_decay_audit(tc_setup(PhysParams(1e-4, 1, 1.0), t_end=5.0))
        energies = [row["e_norm"] for row in audit.rows]
        assert energies == sorted(energies)
        assert energies[-1] > energies[0]


class TestInhomogeneousAudit:
    """Forced energy against the forcing norm."""

    def test_needs_zero_data(self):
        setup = tc_setup(PhysParams(1e-3, 1, 1.0), forcing=switched_forcing(bump(RADIAL)))
        with pytest.raises(HypothesisError):
            inhomogeneous_audit(setup)

    def test_quotient(self):
        setup = tc_setup(
            PhysParams(1e-3, 1, 1.0),
            initial=GridFunction.zeros(RADIAL),
            forcing=switched_forcing(bump(RADIAL), 0.0, 1.0),
        )
        audit = inhomogeneous_audit(setup)
        assert audit.rhs > 0
        assert 0 < audit.quotient < math.inf


class TestDecomposition:
    """Splitting the flow into a damped part and a remainder."""

    def test_defect_is_small(self):
        g = build_grid(1.0, 4.0, 400)
        setup = EvolutionSetup(
            PhysParams(1e-3, 1, 1.0), g, 0.05, 1.5, OperatorKind.tc(), bump(g)
        )
        audit = decomposition_audit(setup, defect_time=1.0, snapshot_every=2)
        assert audit.defect is not None
        assert audit.defect.time == pytest.approx(1.0)
        assert audit.defect.relative < 0.05
        assert set(audit.ratios()) == {
            "w_energy", "w1_energy", "w2_energy", "damping", "kappa32", "kappa52", "wtilde"
        }
        assert audit.snapshot_dt == pytest.approx(0.1)
        assert audit.snapshots[0][0] == 0.0

    def test_theta_damping(self):
        assert theta_damping(PhysParams(1e-6, 1, 1.0)) == pytest.approx(1024 * 1e-4)
        assert theta_damping(PhysParams(1e-4, 1, 100.0)) == pytest.approx(1024 * 1e-4)
        assert theta_damping(PhysParams(1e-4, 1, 1.0)) > 1.0
        assert theta_damping(PhysParams(1e-3, 1, 0.0)) == math.inf

    def test_defect_substep_resolves_phase(self):
        assert defect_substep(PhysParams(1e-4, 1, 100.0), 0.01) == pytest.approx(1e-3 / 32)
        assert defect_substep(PhysParams(1e-3, 1, 1.0), 0.05) == pytest.approx(0.05 / 32)

    def test_large_theta_damping_is_logged(self, caplog):
        g = build_grid(1.0, 4.0, 200)
        setup = EvolutionSetup(
            PhysParams(1e-3, 1, 1.0), g, 0.05, 0.5, OperatorKind.tc(), bump(g)
        )
        with caplog.at_level(logging.WARNING, logger="tclab.evolution"):
            decomposition_audit(setup)
        assert "will drift with nu" in caplog.text

    def test_only_tc(self):
        g = build_grid(0.0, 1.0, 32)
        setup = EvolutionSetup(
            PhysParams(1e-2, 1, 0.0), g, 0.1, 1.0, OperatorKind.heat(), bump(g, 0.5, 0.2)
        )
        with pytest.raises(HypothesisError):
            decomposition_audit(setup)


class TestSemigroupBound:
    """Couette semigroup against the pseudospectral bound."""

    def test_margin(self):
        g = build_grid(0.0, 1.0, 100)
        p = PhysParams(1e-2, 1, 0.0)
        psi = pseudo_bound(OperatorKind.couette(), p, g, n_scan=32).psi
        t_end = 5 / psi
        setup = EvolutionSetup(p, g, t_end / 200, t_end, OperatorKind.couette(), bump(g, 0.5, 0.2))
        check = gp_semigroup_check(setup, psi)
        assert check.psi == psi
        assert check.margin > -0.05

    def test_only_couette(self):
        with pytest.raises(HypothesisError):
            gp_semigroup_check(tc_setup(PhysParams(1e-3, 1, 1.0)), 1.0)


class TestExponentialWeights:
    """Exploratory exponential weights."""

    def test_unweighted_row_does_not_grow(self):
        rows = exponential_weight_probe(tc_setup(PhysParams(1e-3, 1, 1.0)), (0.0, 0.5), samples=10)
        assert [row.c for row in rows] == [0.0, 0.5]
        assert rows[0].growth <= 1.0 + 1e-12
        assert rows[1].sup_norm >= rows[0].sup_norm
