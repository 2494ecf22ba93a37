"""Resolvent solves, pseudospectral bounds, resolvent audits and sharpness witnesses.

The TC spectral parameter enters as ``ikB*lam`` so the critical layer sits at
``r = lam**-0.5``; Couette uses ``ik*lam`` and pure diffusion ``i*lam``.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson
from scipy.optimize import minimize_scalar

from .errors import HypothesisError
from .grid import (
    UNIT,
    Grid,
    GridFunction,
    WeightSpec,
    bump_profile,
    derivative,
    grid_with_spacing,
    staggered_norm,
    weighted_norm,
)
from .linalg import DEFAULT_SEED, TridiagonalOperator, smallest_singular_value, solve_tridiagonal
from .operators import KindTag, OperatorKind, PhysParams, assemble

logger = logging.getLogger(__name__)

DEFAULT_LAMBDAS = (-1.0, 0.0, 0.25, 0.5, 0.9, 1.0, 2.0)
MIN_SCAN = 16
REFINE_TOL = 1e-4
POINTS_PER_LAYER = 24


def spectral_shift(kind: OperatorKind, p: PhysParams, lam: float) -> complex:
    if kind.tag is KindTag.TC:
        return 1j * p.kB * lam
    if kind.tag is KindTag.COUETTE:
        return 1j * p.k * lam
    if kind.tag is KindTag.HEAT:
        return 1j * lam
    raise HypothesisError(f"no spectral shift for {kind.describe()}")


@dataclass(frozen=True)
class ResolventProbe:
    params: PhysParams
    lam: float
    kind: OperatorKind = OperatorKind.tc()

    def __post_init__(self) -> None:
        if not math.isfinite(self.lam):
            raise HypothesisError(f"lambda must be finite, got {self.lam}")
        spectral_shift(self.kind, self.params, 0.0)

    def operator(self, grid: Grid) -> TridiagonalOperator:
        shift = spectral_shift(self.kind, self.params, self.lam)
        return assemble(self.kind, self.params, grid).shifted(-shift)


def solve_resolvent(probe: ResolventProbe, F: GridFunction) -> GridFunction:
    return solve_tridiagonal(probe.operator(F.grid), F)


@dataclass(frozen=True)
class PseudoBoundResult:
    psi: float
    lambda_star: float
    scan: tuple[tuple[float, float], ...]

    def rows(self, p: PhysParams, g: Grid) -> list[dict]:
        return [
            {
                "lambda": lam,
                "sigma_min": sigma,
                "nu": p.nu,
                "k": p.k,
                "B": p.B,
                "R_max": g.r_max,
                "n_interior": g.n_interior,
            }
            for lam, sigma in self.scan
        ]


def default_lambda_range(kind: OperatorKind, g: Grid) -> tuple[float, float]:
    if kind.tag is KindTag.TC:
        return -0.5, 1.5
    if kind.tag is KindTag.COUETTE:
        return g.a_end - 0.5, g.b_end + 0.5
    return -1.0, 1.0


def pseudo_bound(
    kind: OperatorKind,
    p: PhysParams,
    g: Grid,
    w_in: WeightSpec = UNIT,
    w_out: WeightSpec = UNIT,
    lambda_range: tuple[float, float] | None = None,
    n_scan: int = 64,
    *,
    workers: int = 1,
    seed: int = DEFAULT_SEED,
) -> PseudoBoundResult:
    """Minimize ``sigma_min(A - shift(lam))`` over a real ``lam`` interval.

    A uniform scan locates the basin, a bounded scalar search refines it.
    """
    if n_scan < MIN_SCAN:
        raise HypothesisError(f"n_scan must be at least {MIN_SCAN}, got {n_scan}")
    lo, hi = lambda_range or default_lambda_range(kind, g)
    if not lo < hi:
        raise HypothesisError(f"empty lambda range [{lo}, {hi}]")
    base = assemble(kind, p, g)

    def sigma(lam: float) -> float:
        op = base.shifted(-spectral_shift(kind, p, lam))
        return smallest_singular_value(op, w_in, w_out, seed=seed, lam=lam)

    lams = np.linspace(lo, hi, n_scan)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            sigmas = list(pool.map(sigma, lams))
        # fixed order keeps the scan deterministic
    else:
        sigmas = [sigma(lam) for lam in lams]
    i = int(np.argmin(sigmas))
    best_lam, best = float(lams[i]), float(sigmas[i])
    left = float(lams[max(i - 1, 0)])
    right = float(lams[min(i + 1, n_scan - 1)])
    if best > 0.0:
        res = minimize_scalar(
            sigma,
            bounds=(left, right),
            method="bounded",
            options={"xatol": REFINE_TOL * (hi - lo)},
        )
        logger.debug("lambda refinement: %d evaluations, min %.6g", res.nfev, res.fun)
        if res.fun < best:
            best_lam, best = float(res.x), float(res.fun)
    scan = tuple((float(lam), float(s)) for lam, s in zip(lams, sigmas))
    return PseudoBoundResult(psi=max(best, 0.0), lambda_star=best_lam, scan=scan)


# -- resolvent inequality audits ------------------------------------------


@dataclass(frozen=True)
class AuditCase:
    nu: float
    lam: float
    trial: int
    split: str
    lhs: float
    rhs: float
    quotient: float


@dataclass(frozen=True)
class ResolventAudit:
    worst_constant: float
    cases: tuple[AuditCase, ...]

    def worst_by_nu(self) -> dict[float, float]:
        worst: dict[float, float] = {}
        for case in self.cases:
            worst[case.nu] = max(worst.get(case.nu, 0.0), case.quotient)
        return worst

    def rows(self) -> list[dict]:
        return [vars(case).copy() for case in self.cases]


def critical_scale(p: PhysParams, lam: float) -> float:
    """Width ``nu^(1/3) |kB|^(-1/3) lam^(-1/2)`` of the layer around ``lam^(-1/2)``."""
    if p.kB == 0:
        raise HypothesisError("the resolvent audit needs kB != 0")
    scale = p.nu ** (1 / 3) * abs(p.kB) ** (-1 / 3)
    return scale / math.sqrt(lam) if 0 < lam < 1 else scale


def audit_grid(p: PhysParams, lam: float, points_per_layer: int = POINTS_PER_LAYER) -> Grid:
    r_max = 4.0
    if 0 < lam < 1:
        r_max = max(r_max, lam**-0.5 + 2.0)
    return grid_with_spacing(1.0, r_max, critical_scale(p, lam) / points_per_layer)


def random_bumps(
    rng: np.random.Generator,
    g: Grid,
    centers: np.ndarray,
    widths: np.ndarray,
) -> GridFunction:
    """Sum of bumps with complex normal amplitudes, kept strictly inside the grid."""
    widths = np.minimum(widths, 0.45 * (g.b_end - g.a_end))
    lo = g.a_end + widths + g.h
    hi = g.b_end - widths - g.h
    centers = np.clip(centers, lo, hi)
    amps = rng.standard_normal(len(centers)) + 1j * rng.standard_normal(len(centers))
    values = sum(
        a * bump_profile(g.nodes, c, w) for a, c, w in zip(amps, centers, widths)
    )
    return GridFunction(g, values)


def _tc_test_function(
    rng: np.random.Generator, g: Grid, p: PhysParams, lam: float
) -> GridFunction:
    count = int(rng.integers(1, 4))
    if 0 < lam < 1:
        delta = critical_scale(p, lam)
        centers = lam**-0.5 + delta * rng.uniform(-3, 3, count)
        widths = delta * rng.uniform(1, 4, count)
    else:
        centers = rng.uniform(1.5, 3.0, count)
        widths = rng.uniform(0.1, 0.5, count)
    return random_bumps(rng, g, centers, widths)


def resolvent_quotient(
    probe: ResolventProbe, w: GridFunction, f1: GridFunction, f2: GridFunction
) -> tuple[float, float, float]:
    """``(lhs, rhs, lhs/rhs)`` of the weighted resolvent inequality; 0/0 counts as 0."""
    p = probe.params
    r = w.nodes
    lhs = math.sqrt(p.nu) * staggered_norm(w) + math.sqrt(p.mu) * weighted_norm(
        w.scaled_by(1 / r)
    )
    rhs = weighted_norm(f1.scaled_by(r)) / math.sqrt(p.mu) + weighted_norm(f2) / math.sqrt(
        p.nu
    )
    return lhs, rhs, (lhs / rhs if rhs > 0 else 0.0)


def resolvent_audit(
    probe: ResolventProbe,
    trials: int = 50,
    seed: int = DEFAULT_SEED,
    *,
    lambdas: tuple[float, ...] | None = None,
    nus: tuple[float, ...] | None = None,
    split: str = "f1",
    points_per_layer: int = POINTS_PER_LAYER,
) -> ResolventAudit:
    """Worst constant of the weighted resolvent inequality over random test data.

    ``split="f1"`` builds ``F1 = (T - ikB lam) w`` from a random ``w``;
    ``split="f2"`` draws ``F2`` and solves for ``w`` with right side ``d_r F2``.
    """
    if trials < 1:
        raise HypothesisError("trials must be at least 1")
    if split not in ("f1", "f2"):
        raise HypothesisError(f"split must be 'f1' or 'f2', got {split!r}")
    rng = np.random.default_rng(seed)
    cases = []
    for nu in nus or (probe.params.nu,):
        p = probe.params.with_nu(nu)
        for lam in lambdas or (probe.lam,):
            local = ResolventProbe(p, lam, probe.kind)
            g = audit_grid(p, lam, points_per_layer)
            op = local.operator(g)
            zero = GridFunction.zeros(g)
            for trial in range(trials):
                bumps = _tc_test_function(rng, g, p, lam)
                if split == "f1":
                    w, f1, f2 = bumps, op.apply(bumps), zero
                else:
                    w = solve_tridiagonal(op, derivative(bumps))
                    f1, f2 = zero, bumps
                lhs, rhs, q = resolvent_quotient(local, w, f1, f2)
                cases.append(AuditCase(nu, lam, trial, split, lhs, rhs, q))
            logger.debug("audit nu=%g lam=%g: %d trials", nu, lam, trials)
    worst = max(case.quotient for case in cases)
    return ResolventAudit(worst_constant=worst, cases=tuple(cases))


def couette_resolvent_audit(
    nu: float,
    k: int,
    lam: float,
    trials: int = 50,
    seed: int = DEFAULT_SEED,
    *,
    domain: str = "interval",
    nus: tuple[float, ...] | None = None,
    points_per_layer: int = POINTS_PER_LAYER,
) -> ResolventAudit:
    """``(nu k^2)^(1/3) |w| / |(C - ik lam) w|`` over random bumps.

    ``domain`` is ``"interval"`` for ``[0, 1]`` or ``"line"`` for a symmetric
    truncation of the real line.
    """
    if trials < 1:
        raise HypothesisError("trials must be at least 1")
    if domain == "interval":
        a, b = 0.0, 1.0
    elif domain == "line":
        half = max(2.0, abs(lam) + 1.0)
        a, b = -half, half
    else:
        raise HypothesisError(f"unknown Couette domain {domain!r}")
    rng = np.random.default_rng(seed)
    cases = []
    for nu_i in nus or (nu,):
        p = PhysParams(nu_i, k, 0.0)
        delta = nu_i ** (1 / 3) * abs(k) ** (-1 / 3)
        g = grid_with_spacing(a, b, delta / points_per_layer)
        op = ResolventProbe(p, lam, OperatorKind.couette()).operator(g)
        for trial in range(trials):
            count = int(rng.integers(1, 4))
            if trial % 2 == 0:
                centers = lam + delta * rng.uniform(-3, 3, count)
                widths = delta * rng.uniform(1, 4, count)
            else:
                centers = rng.uniform(a, b, count)
                widths = rng.uniform(0.05, 0.2, count) * (b - a)
            w = random_bumps(rng, g, centers, widths)
            lhs = (nu_i * k**2) ** (1 / 3) * weighted_norm(w)
            rhs = weighted_norm(op.apply(w))
            cases.append(
                AuditCase(nu_i, lam, trial, domain, lhs, rhs, lhs / rhs if rhs > 0 else 0.0)
            )
    worst = max(case.quotient for case in cases)
    return ResolventAudit(worst_constant=worst, cases=tuple(cases))


# -- sharpness witnesses --------------------------------------------------


@dataclass(frozen=True)
class SharpnessTC:
    r0: float
    lambda0: float
    quotient: float
    norm_over_r: float


@dataclass(frozen=True)
class SharpnessCouette:
    lambda0: float
    quotient: float
    norm: float
    support: tuple[float, float]


def _cubic_product(u: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``u^3 v^3`` and its second derivative for ``u' = 1, v' = -1``, zero off the support."""
    inside = (u >= 0) & (v >= 0)
    w = np.where(inside, u**3 * v**3, 0.0)
    w2 = np.where(inside, 6 * u * v**3 - 18 * u**2 * v**2 + 6 * u**3 * v, 0.0)
    return w, w2


def sharpness_witness_tc(nu: float, B: float, *, m: int = 64, k: int = 1) -> SharpnessTC:
    """Evaluate the compact witness ``(r-r0)^3 (r0 + 1/r0 - r)^3`` analytically.

    Quadrature runs on ``[r0 - 1/r0, r0 + 2/r0]`` with ``2m`` Simpson cells over
    the support.
    """
    if not abs(B) > nu:
        raise HypothesisError(f"the witness needs |B| > nu, got B={B}, nu={nu}")
    r0 = (abs(B) / nu) ** (1 / 6)
    lam0 = r0**-2
    eps = 1.0 / r0
    r = np.linspace(r0 - eps, r0 + 2 * eps, 6 * m + 1)
    w, w2 = _cubic_product(r - r0, r0 + eps - r)
    residual = -nu * w2 + nu * (k**2 - 0.25) * w / r**2 + 1j * k * B * (r**-2 - lam0) * w
    top = math.sqrt(simpson(np.abs(r * residual) ** 2, x=r))
    norm_over_r = math.sqrt(simpson((w / r) ** 2, x=r))
    quotient = top / (nu ** (1 / 3) * abs(B) ** (2 / 3) * norm_over_r)
    return SharpnessTC(r0=r0, lambda0=lam0, quotient=quotient, norm_over_r=norm_over_r)


def sharpness_witness_couette(nu: float, *, m: int = 64) -> SharpnessCouette:
    if not 0 < nu < 1:
        raise HypothesisError(f"the Couette witness needs 0 < nu < 1, got {nu}")
    a = nu ** (1 / 3)
    y = np.linspace(0.0, a, 2 * m + 1)
    w, w2 = _cubic_product(y, a - y)
    residual = -nu * w2 + nu * w + 1j * y * w
    top = math.sqrt(simpson(np.abs(residual) ** 2, x=y))
    norm = math.sqrt(simpson(w**2, x=y))
    return SharpnessCouette(
        lambda0=0.0, quotient=top / (a * norm), norm=norm, support=(0.0, a)
    )
