"""Cutoff functions and the small analytic inequalities used by the decay proofs."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.integrate import quad

from .dyadic import DyadicPartition
from .errors import HypothesisError
from .grid import GridFunction, staggered_norm, weighted_norm


def rho_cutoff(z):
    """1 for ``z <= -1``, -1 for ``z >= 1``, the odd quintic ``-(15z - 10z^3 + 3z^5)/8`` between."""
    z = np.asarray(z, dtype=float)
    inner = -(15 * z - 10 * z**3 + 3 * z**5) / 8
    return np.where(z <= -1, 1.0, np.where(z >= 1, -1.0, inner))


def rho_cutoff_derivative(z):
    z = np.asarray(z, dtype=float)
    return np.where(np.abs(z) < 1, -15 * (1 - z**2) ** 2 / 8, 0.0)


def rho_delta(r, r0: float, delta: float):
    if not delta > 0:
        raise HypothesisError(f"delta must be positive, got {delta}")
    return rho_cutoff((np.asarray(r, dtype=float) - r0) / delta)


@dataclass(frozen=True)
class HardyAudit:
    lhs: float
    rhs: float
    quotient: float


def hardy_audit(f: GridFunction) -> HardyAudit:
    """``max |f|^2/r`` against ``|f/r| |Df| + |f/r|^2``; zero data gives quotient 0."""
    lhs = float(np.max(np.abs(f.values) ** 2 / f.nodes))
    over_r = weighted_norm(f.scaled_by(1.0 / f.nodes))
    rhs = over_r * staggered_norm(f) + over_r**2
    return HardyAudit(lhs=lhs, rhs=rhs, quotient=lhs / rhs if rhs > 0 else 0.0)


@dataclass(frozen=True)
class LogIntegral:
    value: float
    bound: float
    quadrature: float

    @property
    def holds(self) -> bool:
        return self.value <= self.bound


def log_integral_audit(r0: float, delta_tilde: float) -> LogIntegral:
    """``int dr/r`` over ``r0 (1 -+ delta_tilde)`` against ``2 delta_tilde / (1 - delta_tilde)``."""
    if not r0 > 1:
        raise HypothesisError(f"r0 must exceed 1, got {r0}")
    if not 0 < delta_tilde <= 0.5:
        raise HypothesisError(f"delta_tilde must lie in (0, 1/2], got {delta_tilde}")
    value = math.log1p(delta_tilde) - math.log1p(-delta_tilde)
    quadrature, _ = quad(lambda r: 1.0 / r, r0 * (1 - delta_tilde), r0 * (1 + delta_tilde))
    return LogIntegral(value=value, bound=2 * delta_tilde / (1 - delta_tilde), quadrature=quadrature)


@dataclass(frozen=True)
class RegionSplit:
    """Enhanced-dissipation region ``r^2 < kappa t`` (I1) and its complement (I2)."""

    I1: float
    I2: float
    total: float
    bound1: float
    bound2: float

    @property
    def slack1(self) -> float:
        return self.bound1 - self.I1

    @property
    def slack2(self) -> float:
        return self.bound2 - self.I2


def region_split_measure(
    snapshots: Sequence[tuple[float, GridFunction]],
    dt: float,
    kappa: float,
    partition: DyadicPartition | None = None,
) -> RegionSplit:
    """Split ``kappa |w/r|^2`` over space-time by ``r^2`` versus ``kappa t``.

    ``snapshots`` are consecutive time levels ``dt`` apart; the time integral is
    the left rectangle rule over them.
    """
    if not snapshots:
        raise HypothesisError("region split needs stored snapshots")
    grid = snapshots[0][1].grid
    r = grid.nodes
    part = partition or DyadicPartition(max(4, math.ceil(math.log2(grid.r_max))))
    chi = part.all_chi(r)
    h = grid.h
    i1 = i2 = b1 = 0.0
    sup_j = np.zeros(chi.shape[0])
    for t, w in snapshots:
        dens = np.abs(w.values) ** 2
        inner = kappa * dens / r**2 * h * dt
        d1 = r**2 < kappa * t
        i1 += float(np.sum(inner[d1]))
        i2 += float(np.sum(inner[~d1]))
        b1 += 2 * kappa**3 * t**2 * float(np.sum(dens / r**6)) * h * dt
        sup_j = np.maximum(sup_j, h * np.sum(chi**2 * dens, axis=1))
    return RegionSplit(
        I1=i1, I2=i2, total=i1 + i2, bound1=b1, bound2=36 * float(np.sum(sup_j))
    )
