"""Heat kernels and the Duhamel construction of divergent weighted quotients.

The forcing ``f(s, y) = zeta(s) xi(y) p(1 - s, x0, y)`` lives on ``V1`` while
its Duhamel solution is strictly positive at ``(1, x0)`` with ``x0`` in ``V2``.
With ``phi`` larger on ``V2`` than on ``V1``, time translation by ``n`` grows
the quotient like ``e^{n (d2 - d1)}``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.integrate import dblquad, trapezoid
from scipy.special import expit, logsumexp

from .counterexample import RatioSeries, WeightTriple, ratio_series
from .errors import HypothesisError

logger = logging.getLogger(__name__)

T_OBS = 1.25
ZETA_SUPPORT = (1 / 8, 7 / 8)
ZETA_PLATEAU = (1 / 4, 3 / 4)


class KernelDomain(Enum):
    LINE = "line"
    HALF_LINE = "half-line-dirichlet"
    INTERVAL = "interval-dirichlet"


@dataclass(frozen=True)
class HeatKernel:
    """``p(t, x, y)`` for ``d_t - d_x^2`` on the line, ``(0, inf)`` or ``(0, length)``."""

    domain: KernelDomain = KernelDomain.LINE
    length: float = 5.0
    images: int = 6

    def contains(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.domain is KernelDomain.LINE:
            return np.ones(x.shape, dtype=bool)
        if self.domain is KernelDomain.HALF_LINE:
            return x > 0
        return (x > 0) & (x < self.length)

    def log_value(self, t, x, y) -> np.ndarray:
        """``log p`` with ``-inf`` where the kernel vanishes; broadcasts its arguments."""
        t, x, y = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (t, x, y)))
        if np.any(t <= 0):
            raise HypothesisError("the heat kernel needs t > 0")
        base = -0.5 * np.log(4 * np.pi * t)
        inside = self.contains(x) & self.contains(y)
        if self.domain is KernelDomain.LINE:
            return base - (x - y) ** 2 / (4 * t)
        if self.domain is KernelDomain.HALF_LINE:
            with np.errstate(divide="ignore", invalid="ignore"):
                odd = np.log(-np.expm1(-x * y / t))
                out = base - (x - y) ** 2 / (4 * t) + odd
            return np.where(inside, out, -np.inf)
        shifts = 2.0 * self.length * np.arange(-self.images, self.images + 1)
        d_even = (x - y)[..., None] + shifts
        d_odd = (x + y)[..., None] + shifts
        exps = np.concatenate([-(d_even**2), -(d_odd**2)], axis=-1) / (4 * t[..., None])
        signs = np.concatenate([np.ones_like(d_even), -np.ones_like(d_odd)], axis=-1)
        log_sum, sign = logsumexp(exps, b=signs, axis=-1, return_sign=True)
        out = np.where(sign > 0, base + log_sum, -np.inf)
        return np.where(inside, out, -np.inf)

    def __call__(self, t, x, y) -> np.ndarray:
        return np.exp(self.log_value(t, x, y))


def smooth_transition(x):
    """C-infinity step ``e^{-1/x} / (e^{-1/x} + e^{-1/(1-x)})``: 0 below 0, 1 above 1."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        inner = expit(1.0 / (1.0 - x) - 1.0 / x)
    return np.where(x <= 0, 0.0, np.where(x >= 1, 1.0, inner))


def plateau_bump(x, support: tuple[float, float], plateau: tuple[float, float]):
    """1 on ``plateau``, 0 outside ``support``, smooth in between."""
    (a, b), (c, d) = support, plateau
    if not a < c <= d < b:
        raise HypothesisError(f"plateau {plateau} must sit strictly inside {support}")
    x = np.asarray(x, dtype=float)
    return smooth_transition((x - a) / (c - a)) * smooth_transition((b - x) / (b - d))


def zeta(s):
    return plateau_bump(s, ZETA_SUPPORT, ZETA_PLATEAU)


def inner_interval(v: tuple[float, float]) -> tuple[float, float]:
    """The middle half of ``v``, where ``xi`` equals 1."""
    a, b = v
    q = (b - a) / 4
    return a + q, b - q


def xi(y, v1: tuple[float, float]):
    return plateau_bump(y, v1, inner_interval(v1))


def _midpoints(a: float, b: float, n: int) -> tuple[np.ndarray, float]:
    step = (b - a) / n
    return a + step * (np.arange(n) + 0.5), step


@dataclass(frozen=True)
class HeatSequence:
    series: RatioSeries
    w_at_x0: float
    w_at_x0_grid: float
    d1: float
    d2: float
    fitted_slope: float

    @property
    def gap(self) -> float:
        return self.d2 - self.d1


def heat_kernel_counterexample(
    domain: str | KernelDomain = KernelDomain.LINE,
    weights: WeightTriple | None = None,
    v1: tuple[float, float] = (0.0, 1.0),
    v2: tuple[float, float] = (3.0, 4.0),
    n_max: int = 8,
    *,
    x0: float | None = None,
    length: float = 5.0,
    n_t: int = 80,
    n_x: int = 120,
    n_s: int = 64,
    n_y: int = 64,
) -> HeatSequence:
    """Duhamel solution of the ``V1``-supported forcing and its translated quotients."""
    kernel = HeatKernel(KernelDomain(domain), length=length)
    weights = weights or WeightTriple(
        a1=np.ones_like, a2=np.ones_like, phi=lambda x: np.asarray(x, dtype=float), label="phi=x"
    )
    for name, (a, b) in (("V1", v1), ("V2", v2)):
        if not a < b:
            raise HypothesisError(f"{name} = ({a}, {b}) is not an interval")
        if not np.all(kernel.contains(np.linspace(a, b, 33)[1:-1])):
            raise HypothesisError(f"{name} leaves the {kernel.domain.value} domain")
    x0 = 0.5 * (v2[0] + v2[1]) if x0 is None else x0
    if not v2[0] < x0 < v2[1]:
        raise HypothesisError(f"x0 = {x0} must lie inside V2")

    lo, hi = min(v1[0], v2[0]), max(v1[1], v2[1])
    x, dx = _midpoints(lo, hi, n_x)
    weights.validate(x, decreasing=False)
    d1 = float(np.max(weights.phi(np.linspace(*v1, 257))))
    d2 = float(np.min(weights.phi(np.linspace(*v2, 257))))
    if not d1 < d2:
        raise HypothesisError(f"sup phi on V1 ({d1:.4g}) must be below inf phi on V2 ({d2:.4g})")

    s, ds = _midpoints(*ZETA_SUPPORT, n_s)
    y, dy = _midpoints(*v1, n_y)
    f = zeta(s)[:, None] * xi(y, v1)[None, :] * kernel(1.0 - s[:, None], x0, y[None, :])

    t = T_OBS * np.arange(1, n_t + 1) / n_t
    dt = T_OBS / n_t
    w = np.zeros((n_t, n_x))
    for i, ti in enumerate(t):
        active = s < ti
        if not np.any(active):
            continue
        p = kernel(ti - s[active][None, :, None], x[:, None, None], y[None, None, :])
        w[i] = np.einsum("xsy,sy->x", p, f[active]) * ds * dy
    logger.debug("Duhamel grid %dx%d filled, max w = %.4g", n_t, n_x, float(np.max(w)))

    phi_x = np.asarray(weights.phi(x), dtype=float)
    phi_y = np.asarray(weights.phi(y), dtype=float)
    num_density = weights.a1(x) ** 2 * w**2 * dx * dt
    den_density = np.broadcast_to(weights.a2(y) ** 2, f.shape) * f**2 * ds * dy
    series = ratio_series(t, phi_x, num_density, s, phi_y, den_density, n_max)

    value, _ = dblquad(
        lambda yy, ss: float(zeta(ss) * xi(yy, v1) * kernel(1.0 - ss, x0, yy) ** 2),
        ZETA_SUPPORT[0],
        ZETA_SUPPORT[1],
        v1[0],
        v1[1],
    )
    i1 = int(np.argmin(np.abs(t - 1.0)))
    j0 = int(np.argmin(np.abs(x - x0)))
    return HeatSequence(
        series=series,
        w_at_x0=float(value),
        w_at_x0_grid=float(w[i1, j0]),
        d1=d1,
        d2=d2,
        fitted_slope=series.fitted_slope(),
    )


def kernel_mass(kernel: HeatKernel, t: float, x: float, n: int = 4001) -> float:
    """``int p(t, x, y) dy`` by the trapezoid rule over the domain (or ``x +- 12 sqrt t``)."""
    half = 12.0 * math.sqrt(t)
    a, b = x - half, x + half
    if kernel.domain is not KernelDomain.LINE:
        a = max(a, 0.0)
    if kernel.domain is KernelDomain.INTERVAL:
        b = min(b, kernel.length)
    y = np.linspace(a, b, n)
    return float(trapezoid(kernel(t, x, y), y))
