"""Discrete Taylor-Couette, Couette, auxiliary damping and heat operators."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import GridError, HypothesisError
from .grid import Grid, GridFunction, inner_product, staggered_norm, weighted_norm
from .linalg import DEFAULT_SEED, TridiagonalOperator

DEFAULT_THETA = 32.0


@dataclass(frozen=True)
class PhysParams:
    """Viscosity ``nu``, angular mode ``k``, rotation constant ``B`` and damping cap."""

    nu: float
    k: int
    B: float
    theta_cap: float = DEFAULT_THETA

    def __post_init__(self) -> None:
        if not (math.isfinite(self.nu) and self.nu > 0):
            raise HypothesisError(f"nu must be positive, got {self.nu}")
        if int(self.k) != self.k or self.k == 0:
            raise HypothesisError(f"k must be a nonzero integer, got {self.k}")
        if not math.isfinite(self.B):
            raise HypothesisError("B must be finite")
        if not self.theta_cap >= 0:
            raise HypothesisError("theta_cap must be nonnegative")
        object.__setattr__(self, "k", int(self.k))

    @property
    def kB(self) -> float:
        return self.k * self.B

    @property
    def kappa(self) -> float:
        """Enhanced-dissipation rate ``nu^(1/3) |kB|^(2/3)``."""
        return self.nu ** (1 / 3) * abs(self.kB) ** (2 / 3)

    @property
    def mu(self) -> float:
        return max(self.nu * self.k**2, self.kappa)

    def with_nu(self, nu: float) -> PhysParams:
        return PhysParams(nu, self.k, self.B, self.theta_cap)


class KindTag(Enum):
    TC = "tc"
    COUETTE = "couette"
    W1 = "w1"
    HEAT = "heat"


@dataclass(frozen=True)
class OperatorKind:
    tag: KindTag
    t: float = 0.0

    def __post_init__(self) -> None:
        if self.tag is KindTag.W1 and not self.t >= 0:
            raise HypothesisError(f"W1 time stamp must be nonnegative, got {self.t}")

    @classmethod
    def tc(cls) -> OperatorKind:
        return cls(KindTag.TC)

    @classmethod
    def couette(cls) -> OperatorKind:
        return cls(KindTag.COUETTE)

    @classmethod
    def w1(cls, t: float) -> OperatorKind:
        return cls(KindTag.W1, float(t))

    @classmethod
    def heat(cls) -> OperatorKind:
        return cls(KindTag.HEAT)

    @classmethod
    def parse(cls, text: str) -> OperatorKind:
        try:
            tag = KindTag(text.strip().lower())
        except ValueError as exc:
            raise HypothesisError(f"unknown operator kind {text!r}") from exc
        return cls(tag)

    @property
    def radial(self) -> bool:
        """TC and W1 live on ``r >= 1``."""
        return self.tag in (KindTag.TC, KindTag.W1)

    @property
    def time_dependent(self) -> bool:
        return self.tag is KindTag.W1

    def at(self, t: float) -> OperatorKind:
        return OperatorKind.w1(t) if self.tag is KindTag.W1 else self

    def describe(self) -> str:
        if self.tag is KindTag.W1:
            return f"w1(t={self.t:g})"
        return self.tag.value


def potential(kind: OperatorKind, p: PhysParams, x: np.ndarray) -> np.ndarray:
    """Zeroth-order coefficient sampled at the nodes ``x``."""
    if kind.tag is KindTag.TC:
        return (p.nu * (p.k**2 - 0.25) + 1j * p.kB) / x**2
    if kind.tag is KindTag.COUETTE:
        return p.nu * p.k**2 + 1j * p.k * x
    if kind.tag is KindTag.W1:
        damping = (2 * p.kB * kind.t / x**3) ** 2
        return (p.nu * (p.k**2 + p.theta_cap**2) / x**2 + p.nu * damping).astype(complex)
    return np.zeros_like(x, dtype=complex)


def assemble(kind: OperatorKind, p: PhysParams, g: Grid) -> TridiagonalOperator:
    """Three-point stencil of ``-nu d^2`` plus the kind's potential."""
    if kind.radial and g.a_end != 1.0:
        raise GridError(f"{kind.describe()} needs a grid starting at r=1, got {g.a_end}")
    off = np.full(g.n_interior - 1, -p.nu / g.h**2, dtype=complex)
    diag = 2 * p.nu / g.h**2 + potential(kind, p, g.nodes)
    return TridiagonalOperator(g, off, diag, off)


def apply(op: TridiagonalOperator, f: GridFunction) -> GridFunction:
    return op.apply(f)


@dataclass(frozen=True)
class EnergyIdentity:
    lhs: float
    rhs: float
    gap: float
    imag: float
    imag_expected: float


def energy_identity_check(p: PhysParams, f: GridFunction) -> EnergyIdentity:
    """``Re<Tf, f> = nu |Df|^2 + nu (k^2 - 1/4) |f/r|^2`` with staggered ``D``."""
    op = assemble(OperatorKind.tc(), p, f.grid)
    pairing = inner_product(op.apply(f), f)
    over_r = f.scaled_by(1.0 / f.nodes)
    rhs = p.nu * staggered_norm(f) ** 2 + p.nu * (p.k**2 - 0.25) * weighted_norm(over_r) ** 2
    return EnergyIdentity(
        lhs=pairing.real,
        rhs=rhs,
        gap=abs(pairing.real - rhs),
        imag=pairing.imag,
        imag_expected=p.kB * weighted_norm(over_r) ** 2,
    )


def accretivity_check(
    op: TridiagonalOperator, trials: int = 200, seed: int = DEFAULT_SEED
) -> float:
    """Smallest ``Re<Af, f>`` over seeded random unit grid functions."""
    rng = np.random.default_rng(seed)
    h = op.grid.h
    x = rng.standard_normal((op.n, trials)) + 1j * rng.standard_normal((op.n, trials))
    x /= np.sqrt(h * np.sum(np.abs(x) ** 2, axis=0))
    forms = h * np.sum(np.conj(x) * (op.to_sparse() @ x), axis=0)
    return float(np.min(forms.real))
