"""Uniform radial grids, complex grid functions, quadrature and weighted norms.

All grids carry homogeneous Dirichlet values at both endpoints; only interior
nodes are stored.  Quadrature is the rectangle rule on interior nodes, which
coincides with the trapezoid rule for functions that vanish at the ends.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum, auto
from functools import cached_property
from typing import Callable

import numpy as np

from .errors import GridError

MIN_INTERIOR_NODES = 8


@dataclass(frozen=True)
class Grid:
    """Uniform mesh of ``n_interior`` nodes strictly inside ``(a_end, b_end)``."""

    a_end: float
    b_end: float
    n_interior: int

    def __post_init__(self) -> None:
        if not (math.isfinite(self.a_end) and math.isfinite(self.b_end)):
            raise GridError("grid endpoints must be finite")
        if not self.a_end < self.b_end:
            raise GridError(f"a_end={self.a_end} must be below b_end={self.b_end}")
        if self.n_interior < MIN_INTERIOR_NODES:
            raise GridError(
                f"n_interior={self.n_interior} is below the minimum {MIN_INTERIOR_NODES}"
            )

    @property
    def h(self) -> float:
        return (self.b_end - self.a_end) / (self.n_interior + 1)

    @cached_property
    def nodes(self) -> np.ndarray:
        r = self.a_end + self.h * np.arange(1, self.n_interior + 1)
        r.flags.writeable = False
        return r

    @property
    def r_max(self) -> float:
        return self.b_end

    def refined(self) -> Grid:
        """Halve the spacing; every old node stays a node."""
        return Grid(self.a_end, self.b_end, 2 * self.n_interior + 1)

    def extended(self) -> Grid:
        """Double the truncation length ``b_end - a_end`` at fixed spacing."""
        return Grid(self.a_end, 2 * self.b_end - self.a_end, 2 * self.n_interior + 1)


def build_grid(a_end: float, b_end: float, n_interior: int) -> Grid:
    return Grid(float(a_end), float(b_end), int(n_interior))


def grid_with_spacing(a_end: float, b_end: float, h: float) -> Grid:
    """Grid on ``[a_end, b_end]`` whose spacing does not exceed ``h``."""
    n = max(MIN_INTERIOR_NODES, math.ceil((b_end - a_end) / h) - 1)
    return build_grid(a_end, b_end, n)


def _check_same_grid(f: GridFunction, g: GridFunction) -> None:
    if f.grid != g.grid:
        raise GridError(f"grid mismatch: {f.grid} vs {g.grid}")


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Complex samples on the interior nodes of ``grid``."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=complex)
        if values.shape != (self.grid.n_interior,):
            raise GridError(
                f"expected {self.grid.n_interior} values, got shape {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise GridError("grid function has non-finite values")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, grid: Grid) -> GridFunction:
        return cls(grid, np.zeros(grid.n_interior, dtype=complex))

    @classmethod
    def from_callable(
        cls, grid: Grid, fn: Callable[[np.ndarray], np.ndarray]
    ) -> GridFunction:
        return cls(grid, fn(grid.nodes))

    @property
    def nodes(self) -> np.ndarray:
        return self.grid.nodes

    def map(self, values: np.ndarray) -> GridFunction:
        """New grid function on the same grid."""
        return GridFunction(self.grid, values)

    def scaled_by(self, weight: np.ndarray | float) -> GridFunction:
        """Pointwise product with a real or complex sampled weight."""
        return self.map(self.values * weight)

    def __add__(self, other: GridFunction) -> GridFunction:
        _check_same_grid(self, other)
        return self.map(self.values + other.values)

    def __sub__(self, other: GridFunction) -> GridFunction:
        _check_same_grid(self, other)
        return self.map(self.values - other.values)

    def __mul__(self, scalar: complex) -> GridFunction:
        return self.map(self.values * scalar)

    __rmul__ = __mul__

    def __neg__(self) -> GridFunction:
        return self.map(-self.values)


class WeightKind(Enum):
    UNIT = auto()
    POWER = auto()
    CUSTOM = auto()


@dataclass(frozen=True, eq=False)
class WeightSpec:
    """Radial weight of a squared norm: unit, ``r**p`` or sampled per node."""

    kind: WeightKind = WeightKind.UNIT
    p: float = 0.0
    samples: np.ndarray | None = field(default=None, repr=False)
    factor: float = 1.0

    def __post_init__(self) -> None:
        if self.kind is WeightKind.CUSTOM:
            if self.samples is None:
                raise GridError("custom weight needs samples")
            samples = np.asarray(self.samples, dtype=float)
            if not np.all(samples > 0):
                raise GridError("custom weight must be strictly positive at every node")
            object.__setattr__(self, "samples", samples)
        if not self.factor > 0:
            raise GridError("weight factor must be positive")

    @classmethod
    def unit(cls) -> WeightSpec:
        return cls()

    @classmethod
    def power(cls, p: float) -> WeightSpec:
        return cls(WeightKind.POWER, p=float(p))

    @classmethod
    def custom(cls, samples: np.ndarray) -> WeightSpec:
        return cls(WeightKind.CUSTOM, samples=samples)

    @classmethod
    def parse(cls, text: str) -> WeightSpec:
        """``"unit"``, ``"power:<p>"``; the config-file spelling."""
        text = text.strip()
        if text == "unit":
            return cls.unit()
        if text.startswith("power:"):
            try:
                return cls.power(float(text.split(":", 1)[1]))
            except ValueError as exc:
                raise GridError(f"bad weight exponent in {text!r}") from exc
        raise GridError(f"unknown weight {text!r}")

    def describe(self) -> str:
        if self.kind is WeightKind.UNIT:
            base = "unit"
        elif self.kind is WeightKind.POWER:
            base = f"power:{self.p:g}"
        else:
            base = "custom"
        return base if self.factor == 1.0 else f"{self.factor:g}*{base}"

    def scaled(self, factor: float) -> WeightSpec:
        return WeightSpec(self.kind, self.p, self.samples, self.factor * factor)

    def sample(self, grid: Grid) -> np.ndarray:
        if self.kind is WeightKind.UNIT:
            w = np.ones(grid.n_interior)
        elif self.kind is WeightKind.POWER:
            w = grid.nodes**self.p
        else:
            if self.samples.shape != (grid.n_interior,):
                raise GridError("custom weight does not match the grid")
            w = self.samples
        return self.factor * w


UNIT = WeightSpec.unit()


def weighted_norm(f: GridFunction, w: WeightSpec = UNIT) -> float:
    weight = w.sample(f.grid)
    return math.sqrt(float(np.sum(weight * np.abs(f.values) ** 2)) * f.grid.h)


def inner_product(f: GridFunction, g: GridFunction, w: WeightSpec = UNIT) -> complex:
    """Weighted inner product, conjugate-linear in the second slot."""
    _check_same_grid(f, g)
    weight = w.sample(f.grid)
    return complex(np.sum(weight * f.values * np.conj(g.values)) * f.grid.h)


def derivative(f: GridFunction) -> GridFunction:
    """Central differences with zero ghost values at both ends."""
    padded = np.concatenate(([0.0], f.values, [0.0]))
    return f.map((padded[2:] - padded[:-2]) / (2.0 * f.grid.h))


def forward_difference(f: GridFunction) -> np.ndarray:
    """Staggered differences (f[i+1] - f[i]) / h on all n+1 cells, boundary included.

    Its adjoint composition is the three-point Laplacian, so summation by parts
    holds exactly.
    """
    padded = np.concatenate(([0.0], f.values, [0.0]))
    return np.diff(padded) / f.grid.h


def staggered_norm(f: GridFunction) -> float:
    """L2 norm of :func:`forward_difference` with the cell quadrature."""
    d = forward_difference(f)
    return math.sqrt(float(np.sum(np.abs(d) ** 2)) * f.grid.h)


def max_abs(f: GridFunction) -> float:
    return float(np.max(np.abs(f.values))) if f.values.size else 0.0


def bump_profile(x: np.ndarray, center: float, width: float) -> np.ndarray:
    """``exp(-1/(1-s^2))`` with ``s = (x-center)/width``, zero for ``|s| >= 1``."""
    s = (np.asarray(x, dtype=float) - center) / width
    out = np.zeros_like(s)
    inside = np.abs(s) < 1
    out[inside] = np.exp(-1.0 / (1.0 - s[inside] ** 2))
    return out
