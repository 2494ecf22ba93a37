"""The C^2 dyadic shape function and the partition of unity built from it."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import HypothesisError

LEFT = (3 / 4, 5 / 6)
PLATEAU = (5 / 6, 11 / 6)
RIGHT = (11 / 6, 23 / 12)
MIRROR = 8 / 3  # r -> 8/3 - r maps the right ramp onto the left one

SHAPE_D1_BOUND = 540.0
SHAPE_D2_BOUND = 162.0 * 12**2
CHI_BOUND = 4e6
DEFAULT_J_MAX = 12


def _ramp(r):
    """Left ramp ``(r - 3/4)^3 P(r)`` with its first two derivatives.

    Works for floats, arrays and :class:`fractions.Fraction`.
    """
    s = r - Fraction(3, 4) if isinstance(r, Fraction) else r - 0.75
    a, b, c = 6 * 12**5, -123 * 12**4, 631 * 12**3
    poly = a * r * r + b * r + c
    dpoly = 2 * a * r + b
    ddpoly = 2 * a
    value = s**3 * poly
    d1 = 3 * s**2 * poly + s**3 * dpoly
    d2 = 6 * s * poly + 6 * s**2 * dpoly + s**3 * ddpoly
    return value, d1, d2


@dataclass(frozen=True)
class ShapeValue:
    value: np.ndarray
    d1: np.ndarray
    d2: np.ndarray


def dyadic_shape_eval(r) -> ShapeValue:
    """phi, phi' and phi'' at ``r >= 0``: ramp, plateau 1, mirrored ramp, else 0."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise HypothesisError("the shape function is defined for r >= 0")
    value = np.zeros_like(r)
    d1 = np.zeros_like(r)
    d2 = np.zeros_like(r)
    left = (r > LEFT[0]) & (r < LEFT[1])
    plateau = (r >= PLATEAU[0]) & (r <= PLATEAU[1])
    right = (r > RIGHT[0]) & (r < RIGHT[1])
    v, a, b = _ramp(r[left])
    value[left], d1[left], d2[left] = v, a, b
    value[plateau] = 1.0
    v, a, b = _ramp(MIRROR - r[right])
    value[right], d1[right], d2[right] = v, -a, b
    return ShapeValue(value, d1, d2)


def junction_identity() -> dict[str, Fraction]:
    """One-sided values at the ramp ends in exact arithmetic.

    The ramp meets 0 with a triple zero at 3/4 and the plateau at 5/6 with
    vanishing first and second derivatives; the right ramp is its mirror image.
    """
    lo, hi = Fraction(3, 4), Fraction(5, 6)
    v0, a0, b0 = _ramp(lo)
    v1, a1, b1 = _ramp(hi)
    return {
        "value_at_3/4": v0,
        "d1_at_3/4": a0,
        "d2_at_3/4": b0,
        "value_at_5/6": v1,
        "d1_at_5/6": a1,
        "d2_at_5/6": b1,
        "P_at_5/6": 6 * 12**5 * hi**2 - 123 * 12**4 * hi + 631 * 12**3,
    }


def junction_ok() -> bool:
    ident = junction_identity()
    expected = {
        "value_at_3/4": 0,
        "d1_at_3/4": 0,
        "d2_at_3/4": 0,
        "value_at_5/6": 1,
        "d1_at_5/6": 0,
        "d2_at_5/6": 0,
        "P_at_5/6": 1728,
    }
    return all(ident[key] == value for key, value in expected.items())


class DyadicPartition:
    """``phi_j(r) = phi(r / 2^j)`` and ``chi_j = phi_j / sum_i phi_i`` for ``j <= j_max``."""

    def __init__(self, j_max: int = DEFAULT_J_MAX) -> None:
        if j_max < 0:
            raise HypothesisError("j_max must be nonnegative")
        self.j_max = j_max

    @property
    def r_max(self) -> float:
        return float(2**self.j_max)

    def phi(self, j: int, r) -> ShapeValue:
        scale = 2.0**-j
        s = dyadic_shape_eval(np.asarray(r, dtype=float) * scale)
        return ShapeValue(s.value, s.d1 * scale, s.d2 * scale**2)

    def _sums(self, r) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        r = np.asarray(r, dtype=float)
        total = np.zeros_like(r)
        t1 = np.zeros_like(r)
        t2 = np.zeros_like(r)
        for j in range(self.j_max + 1):
            s = self.phi(j, r)
            total += s.value
            t1 += s.d1
            t2 += s.d2
        return total, t1, t2

    def chi(self, j: int, r) -> np.ndarray:
        return self.chi_derivatives(j, r).value

    def chi_derivatives(self, j: int, r) -> ShapeValue:
        """Quotient rule for ``phi_j / S`` up to the second derivative."""
        total, t1, t2 = self._sums(r)
        f = self.phi(j, r)
        value = f.value / total
        d1 = (f.d1 * total - f.value * t1) / total**2
        d2 = (
            f.d2 / total
            - 2 * f.d1 * t1 / total**2
            - f.value * t2 / total**2
            + 2 * f.value * t1**2 / total**3
        )
        return ShapeValue(value, d1, d2)

    def all_chi(self, r) -> np.ndarray:
        """Rows ``chi_0 .. chi_jmax`` sampled at ``r``."""
        total, _, _ = self._sums(r)
        return np.stack([self.phi(j, r).value / total for j in range(self.j_max + 1)])


@dataclass(frozen=True)
class InvariantCheck:
    name: str
    passed: bool
    worst: float
    location: float | None = None


@dataclass(frozen=True)
class PartitionReport:
    checks: tuple[InvariantCheck, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[InvariantCheck]:
        return [c for c in self.checks if not c.passed]


def _worst(name: str, excess: np.ndarray, r: np.ndarray, tol: float = 0.0) -> InvariantCheck:
    """``excess <= tol`` everywhere; reports the largest excess and where."""
    i = int(np.argmax(excess))
    return InvariantCheck(name, bool(excess[i] <= tol), float(excess[i]), float(r[i]))


def partition_audit(j_max: int = DEFAULT_J_MAX, r_samples: int = 10_000) -> PartitionReport:
    """Check every partition invariant on a log-spaced sample of ``[1, 2^j_max]``."""
    if j_max < 4:
        raise HypothesisError(f"j_max must be at least 4, got {j_max}")
    if r_samples < 10_000:
        raise HypothesisError(f"need at least 10000 samples, got {r_samples}")
    part = DyadicPartition(j_max)
    r = np.geomspace(1.0, part.r_max, r_samples)
    chi = part.all_chi(r)
    checks = [InvariantCheck("junction_exact", junction_ok(), 0.0)]

    shape_r = np.linspace(0.0, 2.0, r_samples)
    shape = dyadic_shape_eval(shape_r)
    checks.append(
        _worst("shape_range", np.maximum(shape.value - 1, -shape.value), shape_r, 1e-12)
    )
    checks.append(_worst("shape_d1", np.abs(shape.d1) - SHAPE_D1_BOUND, shape_r))
    checks.append(_worst("shape_d2", np.abs(shape.d2) - SHAPE_D2_BOUND, shape_r))

    checks.append(_worst("sum_one", np.abs(chi.sum(axis=0) - 1), r, 1e-12))
    sq = (chi**2).sum(axis=0)
    checks.append(_worst("sum_sq_lower", 0.5 - sq, r, 1e-12))
    checks.append(_worst("sum_sq_upper", sq - 1, r, 1e-12))
    chi0 = part.chi(0, np.array([1.0]))[0]
    checks.append(InvariantCheck("chi0_at_one", abs(chi0 - 1) <= 1e-12, abs(chi0 - 1), 1.0))

    overlap = np.zeros_like(r)
    support = np.zeros_like(r)
    d1_excess = np.full_like(r, -np.inf)
    d2_excess = np.full_like(r, -np.inf)
    for j in range(j_max + 1):
        for ell in range(j + 2, j_max + 1):
            overlap = np.maximum(overlap, np.abs(chi[j] * chi[ell]))
        outside = (r < 2 ** (j + 1) / 3) | (r > 2 ** (j + 1))
        support = np.maximum(support, np.where(outside, np.abs(chi[j]), 0.0))
        d = part.chi_derivatives(j, r)
        d1_excess = np.maximum(d1_excess, np.abs(d.d1) - CHI_BOUND * 2.0**-j)
        d2_excess = np.maximum(d2_excess, np.abs(d.d2) - CHI_BOUND * 2.0 ** (-2 * j))
    checks.append(_worst("disjoint", overlap, r))
    checks.append(_worst("support", support, r))
    checks.append(_worst("chi_d1", d1_excess, r))
    checks.append(_worst("chi_d2", d2_excess, r))
    return PartitionReport(tuple(checks))
