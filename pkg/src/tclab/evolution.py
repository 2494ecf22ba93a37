"""Crank-Nicolson evolution and the space-time norm audits built on it."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import HypothesisError, SingularMatrixError, SolverError
from .grid import (
    Grid,
    GridFunction,
    bump_profile,
    derivative,
    staggered_norm,
    weighted_norm,
)
from .linalg import Factorization, TridiagonalOperator
from .operators import KindTag, OperatorKind, PhysParams, accretivity_check, assemble
from .resolvent import pseudo_bound

logger = logging.getLogger(__name__)

WeightFn = Callable[[float, np.ndarray], np.ndarray]
Forcing = Callable[[float], "np.ndarray | GridFunction"]

BUMP_CENTERS = (1.5, 2.0, 4.0, 8.0)
BUMP_WIDTH = 0.45
CONTRACTION_SLACK = 1e-13
DEFECT_SUBSTEPS = 32
DEFECT_PHASE_STEP = 0.1
THETA_DAMPING_LIMIT = 0.25


def bump(grid: Grid, center: float = 2.0, width: float = BUMP_WIDTH) -> GridFunction:
    return GridFunction(grid, bump_profile(grid.nodes, center, width))


def default_dt(p: PhysParams) -> float:
    rates = [x for x in (p.kappa, abs(p.kB)) if x > 0] or [p.mu]
    return min(0.1 / x for x in rates)


def default_t_end(p: PhysParams) -> float:
    return 20.0 / (p.kappa if p.kappa > 0 else p.mu)


def switched_forcing(profile: GridFunction, t_on: float = 0.0, t_off: float = 1.0) -> Forcing:
    """``profile(r) * 1[t_on <= t < t_off]``."""
    off = np.zeros_like(profile.values)

    def forcing(t: float) -> np.ndarray:
        return profile.values if t_on <= t < t_off else off

    return forcing


@dataclass(frozen=True)
class WeightPower:
    """``Lambda^q`` with ``Lambda(t, r) = 1 + kappa t / r^2``."""

    q: int
    kappa: float

    def __post_init__(self) -> None:
        if int(self.q) != self.q or self.q < 0:
            raise HypothesisError(f"q must be a nonnegative integer, got {self.q}")
        if self.kappa < 0:
            raise HypothesisError("kappa must be nonnegative")

    def __call__(self, t: float, r: np.ndarray) -> np.ndarray:
        return (1.0 + self.kappa * t / r**2) ** self.q


@dataclass(frozen=True)
class TraceTerm:
    """Accumulated ``scale * |weight(t, .) w|`` as a sup or an L2 norm in time."""

    name: str
    weight: WeightFn | None = None
    scale: float = 1.0
    mode: str = "l2"
    derivative: bool = False

    def __post_init__(self) -> None:
        if self.mode not in ("sup", "l2"):
            raise HypothesisError(f"trace mode must be 'sup' or 'l2', got {self.mode!r}")

    def instant(self, t: float, w: GridFunction) -> float:
        f = w if self.weight is None else w.scaled_by(self.weight(t, w.nodes))
        return staggered_norm(f) if self.derivative else weighted_norm(f)


def _over_r(weight: WeightFn | None) -> WeightFn:
    if weight is None:
        return lambda t, r: 1.0 / r
    return lambda t, r: weight(t, r) / r


def e_norm_terms(prefix: str, p: PhysParams, weight: WeightFn | None = None) -> tuple[TraceTerm, ...]:
    """Terms of ``sup|eta| + nu^(1/2) |d_r eta| + mu^(1/2) |eta/r|`` for ``eta = weight*w``."""
    return (
        TraceTerm(f"{prefix}.sup", weight, 1.0, "sup"),
        TraceTerm(f"{prefix}.grad", weight, math.sqrt(p.nu), "l2", derivative=True),
        TraceTerm(f"{prefix}.over_r", _over_r(weight), math.sqrt(p.mu), "l2"),
    )


@dataclass(frozen=True)
class SpaceTimeTrace:
    sup_l2: float = 0.0
    visc_grad: float = 0.0
    weighted_l2: float = 0.0
    extra: Mapping[str, float] = field(default_factory=dict)

    @property
    def energy(self) -> float:
        return self.sup_l2 + self.visc_grad + self.weighted_l2

    def e_norm(self, prefix: str) -> float:
        return sum(self.extra[f"{prefix}.{part}"] for part in ("sup", "grad", "over_r"))


class TraceAccumulator:
    """Left-rectangle time quadrature; sup terms also see the final level."""

    def __init__(self, p: PhysParams, dt: float, terms: Sequence[TraceTerm] = ()) -> None:
        self.dt = dt
        self.terms = e_norm_terms("w", p) + tuple(terms)
        self._sup = {t.name: 0.0 for t in self.terms if t.mode == "sup"}
        self._l2 = {t.name: 0.0 for t in self.terms if t.mode == "l2"}
        self._pending: dict[str, float] = {}

    def record(self, t: float, w: GridFunction) -> None:
        for name, value in self._pending.items():
            self._l2[name] += self.dt * value**2
        self._pending = {}
        for term in self.terms:
            value = term.instant(t, w)
            if term.mode == "sup":
                self._sup[term.name] = max(self._sup[term.name], value)
            else:
                self._pending[term.name] = value

    def finish(self) -> SpaceTimeTrace:
        scales = {t.name: t.scale for t in self.terms}
        values = {name: scales[name] * v for name, v in self._sup.items()}
        values |= {name: scales[name] * math.sqrt(v) for name, v in self._l2.items()}
        return SpaceTimeTrace(
            sup_l2=values["w.sup"],
            visc_grad=values["w.grad"],
            weighted_l2=values["w.over_r"],
            extra=values,
        )


class CrankNicolson:
    """``(I + dt/2 A) w+ = (I - dt/2 A) w + dt f``, coefficients at the half step."""

    def __init__(self, kind: OperatorKind, p: PhysParams, grid: Grid, dt: float) -> None:
        self.kind = kind
        self.params = p
        self.grid = grid
        self.dt = dt
        self._cache: tuple[float, TridiagonalOperator, Factorization] | None = None

    def operator_at(self, t: float) -> TridiagonalOperator:
        return assemble(self.kind.at(t), self.params, self.grid)

    def _factor(self, t_mid: float, dt: float) -> tuple[TridiagonalOperator, Factorization]:
        if self._cache is not None and self._cache[0] == dt and not self.kind.time_dependent:
            return self._cache[1], self._cache[2]
        op = self.operator_at(t_mid)
        lu = (op * (0.5 * dt)).shifted(1.0).factorize()
        self._cache = (dt, op, lu)
        return op, lu

    def step(
        self,
        w: np.ndarray,
        t: float,
        source: np.ndarray | None = None,
        dt: float | None = None,
    ) -> np.ndarray:
        dt = self.dt if dt is None else dt
        op, lu = self._factor(t + 0.5 * dt, dt)
        rhs = w - 0.5 * dt * op.matvec(w)
        if source is not None:
            rhs = rhs + dt * source
        return lu.solve(rhs)


@dataclass(frozen=True)
class EvolutionSetup:
    params: PhysParams
    grid: Grid
    dt: float
    t_end: float
    kind: OperatorKind
    initial: GridFunction
    forcing: Forcing | None = None
    snapshot_every: int = 0

    def __post_init__(self) -> None:
        if not self.dt > 0:
            raise HypothesisError(f"dt must be positive, got {self.dt}")
        if not self.dt <= self.t_end:
            raise HypothesisError(f"dt={self.dt} exceeds t_end={self.t_end}")
        if self.initial.grid != self.grid:
            raise HypothesisError("initial data lives on a different grid")

    @property
    def n_steps(self) -> int:
        return max(1, math.ceil(self.t_end / self.dt - 1e-9))

    def forcing_at(self, t: float) -> np.ndarray | None:
        if self.forcing is None:
            return None
        value = self.forcing(t)
        values = value.values if isinstance(value, GridFunction) else np.asarray(value)
        if not np.all(np.isfinite(values)):
            raise HypothesisError(f"forcing is not finite at t={t:g}")
        return values


@dataclass(frozen=True)
class EvolutionResult:
    final: GridFunction
    trace: SpaceTimeTrace
    snapshots: tuple[tuple[float, GridFunction], ...]
    times: np.ndarray
    norms: np.ndarray
    violations: int


def _checked_step(stepper: CrankNicolson, w: np.ndarray, t: float, src, n: int) -> np.ndarray:
    try:
        w_new = stepper.step(w, t, src)
    except SingularMatrixError as exc:
        raise SolverError(str(exc), n) from exc
    if not np.all(np.isfinite(w_new)):
        raise SolverError("non-finite values", n)
    return w_new


def evolve(
    setup: EvolutionSetup,
    terms: Sequence[TraceTerm] = (),
    *,
    check_accretive: bool = True,
) -> EvolutionResult:
    p, g, dt = setup.params, setup.grid, setup.dt
    stepper = CrankNicolson(setup.kind, p, g, dt)
    if check_accretive:
        worst = accretivity_check(stepper.operator_at(0.0), trials=32)
        if worst < -1e-12:
            raise HypothesisError(f"operator is not accretive: Re<Af,f> = {worst:.3e}")
    acc = TraceAccumulator(p, dt, terms)
    w = setup.initial.values
    acc.record(0.0, setup.initial)
    times = [0.0]
    norms = [weighted_norm(setup.initial)]
    snapshots = [(0.0, setup.initial)] if setup.snapshot_every else []
    violations = 0
    current = setup.initial
    for n in range(setup.n_steps):
        t = n * dt
        w = _checked_step(stepper, w, t, setup.forcing_at(t + 0.5 * dt), n)
        current = GridFunction(g, w)
        t_next = (n + 1) * dt
        acc.record(t_next, current)
        norm = weighted_norm(current)
        if setup.forcing is None and norm > norms[-1] * (1 + CONTRACTION_SLACK):
            if violations == 0:
                logger.warning("contraction violated at step %d: %.3e > %.3e", n, norm, norms[-1])
            violations += 1
        times.append(t_next)
        norms.append(norm)
        if setup.snapshot_every and (n + 1) % setup.snapshot_every == 0:
            snapshots.append((t_next, current))
    return EvolutionResult(
        final=current,
        trace=acc.finish(),
        snapshots=tuple(snapshots),
        times=np.array(times),
        norms=np.array(norms),
        violations=violations,
    )


# -- audits ---------------------------------------------------------------


def _require_homogeneous(setup: EvolutionSetup) -> None:
    if setup.forcing is not None:
        raise HypothesisError("this audit runs the homogeneous equation only")


@dataclass(frozen=True)
class DecayAudit:
    rows: tuple[dict, ...]
    decay_sup: float
    initial_norm: float
    trace: SpaceTimeTrace
    violations: int


def smallness_limit(q_max: int) -> float:
    """Largest admissible ``nu/|kB|`` for weights up to ``Lambda^q_max``."""
    return (1 + q_max) ** -3 / 64


def homogeneous_decay_audit(
    setup: EvolutionSetup, q_list: Sequence[int] = (0, 1, 2)
) -> DecayAudit:
    """Weighted energies ``E(Lambda^q w)`` and ``sup_t (1+kappa t)|w/r^2|``, over ``|w(0)|``."""
    _require_homogeneous(setup)
    p = setup.params
    if p.kB == 0:
        raise HypothesisError("the decay audit needs kB != 0")
    q_sorted = sorted(set(int(q) for q in q_list))
    ratio = p.nu / abs(p.kB)
    if ratio > smallness_limit(q_sorted[-1]):
        raise HypothesisError(
            f"nu/|kB| = {ratio:.3e} exceeds {smallness_limit(q_sorted[-1]):.3e} for q <= {q_sorted[-1]}"
        )
    kappa = p.kappa
    terms: list[TraceTerm] = []
    for q in q_sorted:
        weight = WeightPower(q, kappa)
        terms += e_norm_terms(f"q{q}", p, weight)
        terms.append(TraceTerm(f"q{q}.phi_over_r", _over_r(weight), math.sqrt(kappa), "l2"))
    terms.append(TraceTerm("decay", lambda t, r: (1 + kappa * t) / r**2, 1.0, "sup"))
    result = evolve(setup, terms)
    w0 = weighted_norm(setup.initial)
    extra = result.trace.extra
    rows = []
    previous: float | None = None
    for q in q_sorted:
        e_q = result.trace.e_norm(f"q{q}")
        thm = extra[f"q{q}.sup"] + extra[f"q{q}.phi_over_r"]
        recurrence = None
        if q >= 1 and previous is not None and w0 > 0:
            recurrence = e_q / (w0 + q * previous)
        rows.append(
            {
                "nu": p.nu,
                "k": p.k,
                "B": p.B,
                "q": q,
                "e_norm": e_q,
                "ratio": e_q / w0 if w0 > 0 else 0.0,
                "weighted_norm_ratio": thm / w0 if w0 > 0 else 0.0,
                "recurrence": recurrence,
            }
        )
        previous = e_q
    return DecayAudit(
        rows=tuple(rows),
        decay_sup=extra["decay"] / w0 if w0 > 0 else 0.0,
        initial_norm=w0,
        trace=result.trace,
        violations=result.violations,
    )


@dataclass(frozen=True)
class InhomogeneousAudit:
    quotient: float
    lhs: float
    rhs: float
    trace: SpaceTimeTrace


def inhomogeneous_audit(setup: EvolutionSetup) -> InhomogeneousAudit:
    """Energy of the forced solution against ``mu^(-1/2) |r f|_{L2 L2}``."""
    if np.any(setup.initial.values != 0):
        raise HypothesisError("the inhomogeneous audit starts from zero data")
    p, g = setup.params, setup.grid
    result = evolve(setup)
    lhs = result.trace.energy
    total = 0.0
    for n in range(setup.n_steps):
        f = setup.forcing_at((n + 0.5) * setup.dt)
        if f is not None:
            total += setup.dt * weighted_norm(GridFunction(g, f * g.nodes)) ** 2
    rhs = math.sqrt(total) / math.sqrt(p.mu)
    return InhomogeneousAudit(
        quotient=lhs / rhs if rhs > 0 else 0.0, lhs=lhs, rhs=rhs, trace=result.trace
    )


@dataclass(frozen=True)
class DefectCheck:
    time: float
    defect: float
    rhs_norm: float

    @property
    def relative(self) -> float:
        return self.defect / self.rhs_norm if self.rhs_norm > 0 else self.defect


@dataclass(frozen=True)
class DecompositionAudit:
    w: SpaceTimeTrace
    w1: SpaceTimeTrace
    w2: SpaceTimeTrace
    initial_norm: float
    defect: DefectCheck | None
    snapshots: tuple[tuple[float, GridFunction], ...]
    snapshot_dt: float

    def ratios(self) -> dict[str, float]:
        w0 = self.initial_norm
        if w0 == 0:
            return {}
        x = self.w1.extra
        return {
            "w_energy": self.w.energy / w0,
            "w1_energy": self.w1.energy / w0,
            "w2_energy": self.w2.energy / w0,
            "damping": x["w1.damping"] / w0,
            "kappa32": x["w1.kappa32"] / w0,
            "kappa52": x["w1.kappa52"] / w0,
            "wtilde": self.w1.e_norm("wtilde") / w0,
        }


def theta_damping(p: PhysParams) -> float:
    """``Theta^2 (nu/|kB|)^(2/3)``: extra decay of ``w1`` per unit of ``kappa t / r^2``.

    The auxiliary-flow ratios are nu-uniform only while this is small.
    """
    if p.kB == 0:
        return math.inf
    return p.theta_cap**2 * (p.nu / abs(p.kB)) ** (2 / 3)


def defect_substep(p: PhysParams, dt: float) -> float:
    """Step of the defect check; resolves the phase ``kB t / r^2`` whatever ``dt`` is."""
    step = dt if p.kB == 0 else min(dt, DEFECT_PHASE_STEP / abs(p.kB))
    return step / DEFECT_SUBSTEPS


def _phase(p: PhysParams, t: float, r: np.ndarray) -> np.ndarray:
    return np.exp(-1j * p.kB * t / r**2)


def decomposition_defect(
    p: PhysParams, g: Grid, w1: np.ndarray, t: float, tau: float
) -> DefectCheck:
    """Compare ``(d_t + T)(e^{-ikBt/r^2} w1)`` with its closed form after one step ``tau``."""
    r = g.nodes
    w1_next = CrankNicolson(OperatorKind.w1(0.0), p, g, tau).step(w1, t)
    c0 = _phase(p, t, r) * w1
    c1 = _phase(p, t + tau, r) * w1_next
    tc = assemble(OperatorKind.tc(), p, g)
    lhs = (c1 - c0) / tau + tc.matvec(0.5 * (c0 + c1))
    tm = t + 0.5 * tau
    mid = 0.5 * (w1 + w1_next)
    beta = p.kB * tm
    d1 = derivative(GridFunction(g, mid)).values
    rhs = _phase(p, tm, r) * (
        -p.nu * (p.theta_cap**2 + 0.25) / r**2 * mid
        - 4j * p.nu * beta / r**3 * d1
        + 6j * p.nu * beta / r**4 * mid
    )
    return DefectCheck(
        time=t,
        defect=weighted_norm(GridFunction(g, lhs - rhs)),
        rhs_norm=weighted_norm(GridFunction(g, rhs)),
    )


def decomposition_audit(
    setup: EvolutionSetup,
    *,
    defect_time: float | None = None,
    snapshot_every: int = 1,
) -> DecompositionAudit:
    """Run ``w`` under TC and ``w1`` under the damped flow in lockstep.

    ``w2 = w - e^{-ikBt/r^2} w1`` is traced too; ``w1`` snapshots feed the
    region split.
    """
    _require_homogeneous(setup)
    if setup.kind.tag is not KindTag.TC:
        raise HypothesisError("the decomposition audit splits the TC flow")
    p, g, dt = setup.params, setup.grid, setup.dt
    r = g.nodes
    kappa = p.kappa
    damping = theta_damping(p)
    if damping > THETA_DAMPING_LIMIT:
        logger.warning(
            "Theta^2 (nu/|kB|)^(2/3) = %.3g; w1 ratios will drift with nu", damping
        )
    tc = CrankNicolson(OperatorKind.tc(), p, g, dt)
    aux = CrankNicolson(OperatorKind.w1(0.0), p, g, dt)
    w1_terms = (
        TraceTerm("w1.damping", lambda t, r: p.kB * t / r**3, math.sqrt(p.nu)),
        TraceTerm("w1.kappa32", lambda t, r: t / r**3, kappa**1.5),
        TraceTerm("w1.kappa52", lambda t, r: t**2 / r**5, kappa**2.5),
        *e_norm_terms("wtilde", p, lambda t, r: kappa * t / r**2),
    )
    acc_w = TraceAccumulator(p, dt)
    acc_w1 = TraceAccumulator(p, dt, w1_terms)
    acc_w2 = TraceAccumulator(p, dt)
    n_defect = max(1, round((defect_time if defect_time is not None else dt) / dt))
    defect = None
    w = w1 = setup.initial.values
    snapshots = []
    for n in range(setup.n_steps + 1):
        t = n * dt
        gw1 = GridFunction(g, w1)
        acc_w.record(t, GridFunction(g, w))
        acc_w1.record(t, gw1)
        acc_w2.record(t, GridFunction(g, w - _phase(p, t, r) * w1))
        if n == n_defect:
            defect = decomposition_defect(p, g, w1, t, defect_substep(p, dt))
        if n == setup.n_steps:
            break
        if n % snapshot_every == 0:
            snapshots.append((t, gw1))
        w = _checked_step(tc, w, t, None, n)
        w1 = _checked_step(aux, w1, t, None, n)
    return DecompositionAudit(
        w=acc_w.finish(),
        w1=acc_w1.finish(),
        w2=acc_w2.finish(),
        initial_norm=weighted_norm(setup.initial),
        defect=defect,
        snapshots=tuple(snapshots),
        snapshot_dt=dt * snapshot_every,
    )


@dataclass(frozen=True)
class GPCheck:
    margin: float
    psi: float
    t_worst: float


def gp_semigroup_check(setup: EvolutionSetup, psi: float | None = None) -> GPCheck:
    """Slack of ``|e^{-tC} w0| <= e^{-t Psi + pi/2} |w0|`` at every step."""
    _require_homogeneous(setup)
    if setup.kind.tag is not KindTag.COUETTE:
        raise HypothesisError("the semigroup check runs the Couette operator")
    if psi is None:
        psi = pseudo_bound(setup.kind, setup.params, setup.grid).psi
    result = evolve(setup)
    norms, times = result.norms, result.times
    alive = norms > 0
    if norms[0] == 0:
        return GPCheck(margin=math.pi / 2, psi=psi, t_worst=0.0)
    slack = -times[alive] * psi + math.pi / 2 - np.log(norms[alive] / norms[0])
    i = int(np.argmin(slack))
    return GPCheck(margin=float(slack[i]), psi=psi, t_worst=float(times[alive][i]))


@dataclass(frozen=True)
class ExponentialWeightRow:
    c: float
    sup_norm: float
    l2_norm: float
    growth: float


def exponential_weight_probe(
    setup: EvolutionSetup, c_values: Sequence[float], samples: int = 200
) -> tuple[ExponentialWeightRow, ...]:
    """Accumulate ``|e^{c kappa t/r^2} w|`` norms for exploratory ``c``.

    ``growth`` compares the weighted sup over the second half of the run with
    the first half.
    """
    _require_homogeneous(setup)
    p = setup.params
    kappa = p.kappa
    terms = []
    for c in c_values:
        weight = _exp_weight(c, kappa)
        terms.append(TraceTerm(f"c{c:g}.sup", weight, 1.0, "sup"))
        terms.append(TraceTerm(f"c{c:g}.l2", _over_r(weight), math.sqrt(kappa), "l2"))
    every = max(1, setup.n_steps // samples)
    sampled = EvolutionSetup(
        p, setup.grid, setup.dt, setup.t_end, setup.kind, setup.initial, None, every
    )
    result = evolve(sampled, terms)
    half = 0.5 * setup.n_steps * setup.dt
    rows = []
    for c in c_values:
        weight = _exp_weight(c, kappa)
        early = [weighted_norm(w.scaled_by(weight(t, w.nodes))) for t, w in result.snapshots if t <= half]
        late = [weighted_norm(w.scaled_by(weight(t, w.nodes))) for t, w in result.snapshots if t > half]
        first = max(early, default=0.0)
        rows.append(
            ExponentialWeightRow(
                c=c,
                sup_norm=result.trace.extra[f"c{c:g}.sup"],
                l2_norm=result.trace.extra[f"c{c:g}.l2"],
                growth=max(late, default=0.0) / first if first > 0 else 0.0,
            )
        )
    return tuple(rows)


def _exp_weight(c: float, kappa: float) -> WeightFn:
    return lambda t, r: np.exp(c * kappa * t / r**2)
