"""Divergent weighted quotients from a boundary-driven local TC problem.

A local parabolic problem on ``[1, 1+delta]`` is driven through its outer
boundary, extended smoothly past the seam and translated in time.  The
residual of the extension only lives beyond the seam, so a weight
``e^{t phi(r)}`` with decreasing ``phi`` favours the solution over its forcing
by a fixed factor per unit of translation.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import eigvalsh_tridiagonal
from scipy.special import logsumexp

from .errors import HypothesisError, NonDecayError
from .evolution import CrankNicolson
from .grid import Grid, build_grid
from .operators import OperatorKind, PhysParams, assemble

logger = logging.getLogger(__name__)

Profile = Callable[[np.ndarray], np.ndarray]

DEFAULT_DELTA = 0.1
DEFAULT_N_LOCAL = 127
DEFAULT_DT = 1e-3
MIN_LOCAL_NODES = 64
HESTENES = (6.0, -8.0, 3.0)
TAIL_TOLERANCE = 1e-6
DECAY_FIT_START = 2.5
CONSISTENCY_TIME = 1.5
SEAM_RESIDUAL = 1e-6


def smoothstep5(s):
    """Quintic ``s^3 (10 - 15 s + 6 s^2)`` clamped to ``[0, 1]``."""
    s = np.clip(np.asarray(s, dtype=float), 0.0, 1.0)
    return s**3 * (10 - 15 * s + 6 * s**2)


def boundary_signal(t):
    """``exp(-1/((t-1)(2-t)))`` on ``(1, 2)``, scaled to peak 1 at ``t = 3/2``."""
    t = np.asarray(t, dtype=float)
    u = (t - 1.0) * (2.0 - t)
    on = u > 0
    return np.where(on, np.exp(4.0 - 1.0 / np.where(on, u, 1.0)), 0.0)


@dataclass(frozen=True)
class LocalProblem:
    delta: float = DEFAULT_DELTA
    signal: Callable = boundary_signal

    def __post_init__(self) -> None:
        if not 0 < self.delta <= 0.25:
            raise HypothesisError(f"delta must lie in (0, 1/4], got {self.delta}")

    def halved(self) -> LocalProblem:
        return LocalProblem(self.delta / 2, self.signal)


@dataclass(frozen=True)
class WeightTriple:
    """Radial profiles ``a1``, ``a2`` and exponent ``phi`` of the weighted norms."""

    a1: Profile
    a2: Profile
    phi: Profile
    label: str = ""

    @classmethod
    def q2_instance(cls, kappa: float, c: float = 1.0) -> WeightTriple:
        return cls(
            a1=lambda r: 1.0 / r,
            a2=lambda r: r,
            phi=lambda r: c * kappa / r**2,
            label=f"phi={c:g}*kappa/r^2, a1=1/r, a2=r",
        )

    @classmethod
    def inverse_r(cls) -> WeightTriple:
        return cls(
            a1=np.ones_like, a2=np.ones_like, phi=lambda r: 1.0 / r, label="phi=1/r, a1=a2=1"
        )

    def validate(self, x: np.ndarray, *, decreasing: bool) -> np.ndarray:
        """Check positivity of ``a1, a2`` and the shape of ``phi`` on ``x``; returns phi."""
        if not (np.all(self.a1(x) > 0) and np.all(self.a2(x) > 0)):
            raise HypothesisError("a1 and a2 must be positive on the working domain")
        phi = np.asarray(self.phi(x), dtype=float)
        if np.ptp(phi) == 0:
            raise HypothesisError("phi must not be constant")
        if decreasing and not np.all(np.diff(phi) < 0):
            raise HypothesisError("phi must be strictly decreasing")
        return phi


@dataclass(frozen=True)
class RatioEntry:
    n: int
    log_numerator: float
    log_denominator: float

    @property
    def numerator(self) -> float:
        return math.exp(self.log_numerator)

    @property
    def denominator(self) -> float:
        return math.exp(self.log_denominator)

    @property
    def log_ratio(self) -> float:
        return self.log_numerator - self.log_denominator

    @property
    def ratio(self) -> float:
        return math.exp(self.log_ratio)


@dataclass(frozen=True)
class RatioSeries:
    entries: tuple[RatioEntry, ...]

    def __post_init__(self) -> None:
        for e in self.entries:
            if not (math.isfinite(e.log_numerator) and math.isfinite(e.log_denominator)):
                raise HypothesisError(f"ratio entry {e.n} is not finite and positive")

    @property
    def ns(self) -> np.ndarray:
        return np.array([e.n for e in self.entries], dtype=float)

    @property
    def log_ratios(self) -> np.ndarray:
        return np.array([e.log_ratio for e in self.entries])

    def fitted_slope(self) -> float:
        slope, _ = np.polyfit(self.ns, self.log_ratios, 1)
        return float(slope)

    def successive_ratios(self) -> np.ndarray:
        """``R_{n+1} / R_n``."""
        return np.exp(np.diff(self.log_ratios))

    def eventually_increasing(self, tail: int = 3) -> bool:
        return bool(np.all(np.diff(self.log_ratios[-(tail + 1):]) > 0))

    def rows(self) -> list[dict]:
        return [
            {
                "n": e.n,
                "numerator": e.numerator,
                "denominator": e.denominator,
                "R_n": e.ratio,
                "log_R_n": e.log_ratio,
            }
            for e in self.entries
        ]


def weighted_log_norm(
    times: np.ndarray, phi: np.ndarray, density: np.ndarray, n: int
) -> float:
    """``log`` of ``(sum e^{2(t+n)phi} density)^(1/2)`` without overflow."""
    exponent = 2.0 * np.add.outer(times + n, np.zeros_like(phi)) * phi
    return 0.5 * float(logsumexp(exponent, b=density))


def ratio_series(
    num_times: np.ndarray,
    num_phi: np.ndarray,
    num_density: np.ndarray,
    den_times: np.ndarray,
    den_phi: np.ndarray,
    den_density: np.ndarray,
    n_max: int,
) -> RatioSeries:
    """Translated quotients: the ``n = 0`` integrals reweighted by ``e^{2 n phi}``."""
    entries = tuple(
        RatioEntry(
            n,
            weighted_log_norm(num_times, num_phi, num_density, n),
            weighted_log_norm(den_times, den_phi, den_density, n),
        )
        for n in range(n_max + 1)
    )
    return RatioSeries(entries)


# -- local boundary problem -----------------------------------------------


def poincare_eigenvalue(g: Grid) -> float:
    """Smallest eigenvalue of the Dirichlet three-point ``-d^2`` on ``g``."""
    n = g.n_interior
    d = np.full(n, 2.0 / g.h**2)
    e = np.full(n - 1, -1.0 / g.h**2)
    return float(eigvalsh_tridiagonal(d, e, select="i", select_range=(0, 0))[0])


@dataclass(frozen=True)
class ConsistencyCheck:
    time: float
    residual: float
    max_residual: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.residual <= self.tolerance


@dataclass(frozen=True)
class LocalRun:
    params: PhysParams
    problem: LocalProblem
    grid: Grid
    dt: float
    times: np.ndarray
    eta_tilde: np.ndarray = field(repr=False)
    boundary: np.ndarray = field(repr=False)
    eta_norms: np.ndarray = field(repr=False)
    consistency: ConsistencyCheck
    decay_rate: float
    required_rate: float
    poincare_constant: float


def _boundary_action(op, values: np.ndarray, g_value: complex, coupling: float) -> np.ndarray:
    out = op.matvec(values)
    out[-1] += coupling * g_value
    return out


def local_boundary_solve(
    p: PhysParams,
    lp: LocalProblem,
    *,
    n_local: int = DEFAULT_N_LOCAL,
    dt: float = DEFAULT_DT,
    t_end: float = 4.5,
) -> LocalRun:
    """Solve ``d_t eta + T eta = -G`` on ``[1, 1+delta]`` and add back the lift.

    ``G`` applies the discrete operator to the lift including its boundary
    value, so ``eta + lift`` solves the discrete homogeneous problem with
    boundary data ``g``.
    """
    if n_local < MIN_LOCAL_NODES:
        raise HypothesisError(f"the local grid needs at least {MIN_LOCAL_NODES} nodes")
    delta = lp.delta
    g = build_grid(1.0, 1.0 + delta, n_local)
    r, h = g.nodes, g.h
    op = assemble(OperatorKind.tc(), p, g)
    coupling = -p.nu / h**2
    profile = smoothstep5((r - 1.0) / delta)
    n_steps = math.ceil(t_end / dt - 1e-9)
    times = dt * np.arange(n_steps + 1)
    gvals = lp.signal(times).astype(complex)
    stepper = CrankNicolson(OperatorKind.tc(), p, g, dt)

    eta = np.zeros(g.n_interior, dtype=complex)
    levels = np.empty((n_steps + 1, g.n_interior), dtype=complex)
    levels[0] = gvals[0] * profile
    eta_norms = np.empty(n_steps + 1)
    eta_norms[0] = 0.0
    for n in range(n_steps):
        f0, f1 = gvals[n] * profile, gvals[n + 1] * profile
        lift_residual = (f1 - f0) / dt + 0.5 * (
            _boundary_action(op, f1, gvals[n + 1], coupling)
            + _boundary_action(op, f0, gvals[n], coupling)
        )
        eta = stepper.step(eta, times[n], -lift_residual)
        levels[n + 1] = eta + f1
        eta_norms[n + 1] = math.sqrt(h * float(np.sum(np.abs(eta) ** 2)))

    consistency = _consistency(p, g, op, coupling, levels, gvals, times, delta)
    lam1 = poincare_eigenvalue(g)
    c_p = 1.0 / (delta * math.sqrt(lam1))
    required = p.nu / (4 * c_p**2 * delta**2)
    rate = _decay_rate(times, eta_norms)
    logger.debug("local problem delta=%g: decay rate %.4g (required %.4g)", delta, rate, required)
    if rate < required:
        raise NonDecayError(
            f"local solution decays at {rate:.4g}, below the Poincare rate {required:.4g}"
        )
    return LocalRun(
        params=p,
        problem=lp,
        grid=g,
        dt=dt,
        times=times,
        eta_tilde=levels,
        boundary=gvals,
        eta_norms=eta_norms,
        consistency=consistency,
        decay_rate=rate,
        required_rate=required,
        poincare_constant=c_p,
    )


def _consistency(p, g, op, coupling, levels, gvals, times, delta) -> ConsistencyCheck:
    """Integer-level central differences of the homogeneous equation."""
    dt = times[1] - times[0]
    tol = 10 * (dt**2 + g.h**2) * (4 + p.nu / delta**2) ** 2
    worst, at_probe, probe_t = 0.0, 0.0, CONSISTENCY_TIME
    best_gap = math.inf
    for n in range(1, len(times) - 1):
        if not 1.0 < times[n] < 2.0:
            continue
        res = (levels[n + 1] - levels[n - 1]) / (2 * dt) + _boundary_action(
            op, levels[n], gvals[n], coupling
        )
        value = float(np.max(np.abs(res)))
        worst = max(worst, value)
        gap = abs(times[n] - CONSISTENCY_TIME)
        if gap < best_gap:
            best_gap, at_probe, probe_t = gap, value, float(times[n])
    return ConsistencyCheck(time=probe_t, residual=at_probe, max_residual=worst, tolerance=tol)


def _decay_rate(times: np.ndarray, norms: np.ndarray) -> float:
    window = (times >= DECAY_FIT_START) & (norms > 0)
    if np.count_nonzero(window) < 2:
        return math.inf
    slope, _ = np.polyfit(times[window], np.log(norms[window]), 1)
    return float(-slope)


# -- extension --------------------------------------------------------------


@dataclass(frozen=True)
class SeamJumps:
    d1: float
    d2: float


def extension_width(n_local: int) -> int:
    """Number of reflected nodes ``m``; the reflection reaches back ``3m`` nodes."""
    return (n_local + 1) // 3


def extend_levels(levels: np.ndarray, boundary: np.ndarray, h: float) -> np.ndarray:
    """Append the seam value and ``m`` reflected, cut-off samples to each level.

    Column ``n_local`` is the seam ``1 + delta``; the last column is zero.
    """
    n_levels, n_local = levels.shape
    m = extension_width(n_local)
    if m < 2:
        raise HypothesisError("too few interior nodes to reflect across the seam")
    full = np.zeros((n_levels, n_local + 2), dtype=complex)
    full[:, 1 : n_local + 1] = levels
    full[:, n_local + 1] = boundary
    seam = n_local + 1
    out = np.zeros((n_levels, n_local + m + 1), dtype=complex)
    out[:, :n_local] = levels
    out[:, n_local] = boundary
    sigma = m * h
    for j in range(1, m + 1):
        s = j * h
        cut = 1.0 - smoothstep5((s - sigma / 2) / (sigma / 2))
        reflected = sum(c * full[:, seam - q * j] for q, c in enumerate(HESTENES, start=1))
        out[:, n_local + j] = cut * reflected
    return out


def seam_jumps(values: np.ndarray, seam: int, h: float) -> SeamJumps:
    """Relative jumps of one-sided first and second differences at column ``seam``."""
    v = values
    d1l = (3 * v[:, seam] - 4 * v[:, seam - 1] + v[:, seam - 2]) / (2 * h)
    d1r = (-3 * v[:, seam] + 4 * v[:, seam + 1] - v[:, seam + 2]) / (2 * h)
    d2l = (v[:, seam] - 2 * v[:, seam - 1] + v[:, seam - 2]) / h**2
    d2r = (v[:, seam] - 2 * v[:, seam + 1] + v[:, seam + 2]) / h**2

    def rel(a, b) -> float:
        scale = max(float(np.max(np.abs(a))), float(np.max(np.abs(b))))
        return float(np.max(np.abs(a - b))) / scale if scale > 0 else 0.0

    return SeamJumps(d1=rel(d1l, d1r), d2=rel(d2l, d2r))


@dataclass(frozen=True)
class ExtendedRun:
    local: LocalRun
    grid: Grid
    times: np.ndarray
    eta_tilde: np.ndarray = field(repr=False)
    forcing: np.ndarray = field(repr=False)
    seam_index: int
    seam: SeamJumps
    interior_residual: float

    @property
    def half_times(self) -> np.ndarray:
        return 0.5 * (self.times[1:] + self.times[:-1])


def smooth_extension(run: LocalRun) -> ExtendedRun:
    """Extend past ``1 + delta`` and compute the residual ``F`` at half levels.

    Arrays stop one node after the cutoff; everything beyond is zero up to
    ``2 + delta``.
    """
    g, h = run.grid, run.grid.h
    values = extend_levels(run.eta_tilde, run.boundary, h)
    n_ext = values.shape[1]
    ext_grid = build_grid(1.0, 1.0 + (n_ext + 1) * h, n_ext)
    op = assemble(OperatorKind.tc(), run.params, ext_grid)
    dt = run.dt
    forcing = np.empty((values.shape[0] - 1, n_ext), dtype=complex)
    for n in range(values.shape[0] - 1):
        forcing[n] = (values[n + 1] - values[n]) / dt + 0.5 * op.matvec(
            values[n + 1] + values[n]
        )
    seam = g.n_interior
    inside = float(np.max(np.abs(forcing[:, :seam]), initial=0.0))
    total = float(np.max(np.abs(forcing), initial=0.0))
    if total > 0 and inside > SEAM_RESIDUAL * total:
        raise HypothesisError(
            f"residual left of the seam is {inside:.3e}, above {SEAM_RESIDUAL:g} of |F|"
        )
    return ExtendedRun(
        local=run,
        grid=ext_grid,
        times=run.times,
        eta_tilde=values,
        forcing=forcing,
        seam_index=seam,
        seam=seam_jumps(values, seam, h),
        interior_residual=inside / total if total > 0 else 0.0,
    )


# -- translated sequence ------------------------------------------------------


@dataclass(frozen=True)
class TCSequence:
    series: RatioSeries
    delta: float
    centroid: float
    predicted_slope: float
    fitted_slope: float
    decay_rate: float
    phi_max: float
    consistency: ConsistencyCheck
    seam: SeamJumps

    @property
    def finite(self) -> bool:
        """Both weighted norms converge when the decay beats ``sup phi``."""
        return self.decay_rate > self.phi_max


def build_tc_sequence(
    run: ExtendedRun, weights: WeightTriple, n_max: int = 12
) -> TCSequence:
    """Quotients ``|e^{(t+n)phi} a1 eta~| / |e^{(t+n)phi} a2 F|`` for ``n <= n_max``."""
    r = run.grid.nodes
    delta = run.local.problem.delta
    phi = weights.validate(np.append(r, 2.0 + delta), decreasing=True)[:-1]
    h, dt = run.grid.h, run.local.dt
    if float(np.max(np.abs(run.forcing))) == 0.0:
        raise HypothesisError("the extension residual F vanishes; nothing to divide by")
    num_density = weights.a1(r) ** 2 * np.abs(run.eta_tilde) ** 2 * h * dt
    den_density = weights.a2(r) ** 2 * np.abs(run.forcing) ** 2 * h * dt
    series = ratio_series(
        run.times, phi, num_density, run.half_times, phi, den_density, n_max
    )
    local = r < 1.0 + delta - 0.5 * h
    mass = np.exp(2.0 * np.outer(run.times, phi[local]) - 2.0 * float(np.max(phi)) * run.times[-1])
    mass = np.sum(mass * num_density[:, local], axis=0)
    centroid = float(np.sum(r[local] * mass) / np.sum(mass))
    phi_seam = float(weights.phi(np.array([1.0 + delta]))[0])
    predicted = float(weights.phi(np.array([centroid]))[0]) - phi_seam
    return TCSequence(
        series=series,
        delta=delta,
        centroid=centroid,
        predicted_slope=predicted,
        fitted_slope=series.fitted_slope(),
        decay_rate=run.local.decay_rate,
        phi_max=float(weights.phi(np.array([1.0]))[0]),
        consistency=run.local.consistency,
        seam=run.seam,
    )


def effective_horizon(rate: float, phi_max: float) -> float:
    """Time after which the weighted tail is below ``TAIL_TOLERANCE`` relatively."""
    return 2.0 + math.log(1.0 / TAIL_TOLERANCE) / (2.0 * (rate - phi_max))


def tc_counterexample(
    p: PhysParams,
    weights: WeightTriple,
    *,
    delta: float = DEFAULT_DELTA,
    n_local: int = DEFAULT_N_LOCAL,
    dt: float = DEFAULT_DT,
    n_max: int = 12,
    max_halvings: int = 6,
) -> TCSequence:
    """Pick ``delta``, solve, extend and translate.

    ``delta`` is halved until the certified decay rate ``nu/(4 C_P^2 delta^2)``
    exceeds ``sup phi`` on ``[1, 2 + delta]``.
    """
    lp = LocalProblem(delta)
    for attempt in range(max_halvings + 1):
        g = build_grid(1.0, 1.0 + lp.delta, n_local)
        certified = p.nu * poincare_eigenvalue(g) / 4
        sample = np.linspace(1.0, 2.0 + lp.delta, 257)
        phi_max = float(np.max(weights.validate(sample, decreasing=True)))
        if certified > phi_max:
            break
        logger.debug("delta=%g: rate %.4g does not beat sup phi %.4g", lp.delta, certified, phi_max)
        if attempt == max_halvings:
            raise HypothesisError(
                f"no delta down to {lp.delta:g} makes the decay beat sup phi = {phi_max:.4g}"
            )
        lp = lp.halved()
    t_end = max(effective_horizon(certified, phi_max), DECAY_FIT_START + 0.5)
    local = local_boundary_solve(p, lp, n_local=n_local, dt=dt, t_end=t_end)
    return build_tc_sequence(smooth_extension(local), weights, n_max)
