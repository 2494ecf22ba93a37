"""Experiment runner: sweeps, verdicts and report bundles behind the ``tclab`` CLI."""

from __future__ import annotations

import argparse
import logging
import math
import sys
import time
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from itertools import repeat
from typing import Any, Callable, Iterable, Sequence

import numpy as np

from . import __version__
from .analysis import hardy_audit, log_integral_audit, region_split_measure, rho_cutoff
from .config import EXPERIMENTS, ExperimentConfig, emit_config, load_config
from .counterexample import WeightTriple, tc_counterexample
from .dyadic import partition_audit
from .errors import ConfigError, TclabError
from .evolution import (
    EvolutionSetup,
    bump,
    decomposition_audit,
    default_dt,
    default_t_end,
    evolve,
    gp_semigroup_check,
    homogeneous_decay_audit,
    inhomogeneous_audit,
    switched_forcing,
    theta_damping,
)
from .grid import (
    UNIT,
    Grid,
    GridFunction,
    WeightSpec,
    build_grid,
    grid_with_spacing,
    weighted_norm,
)
from .heatkernel import heat_kernel_counterexample
from .linalg import smallest_singular_value, weighted_matrix
from .operators import (
    KindTag,
    OperatorKind,
    PhysParams,
    accretivity_check,
    assemble,
    energy_identity_check,
)
from .report import ReportBundle, write_bundle
from .resolvent import (
    ResolventProbe,
    couette_resolvent_audit,
    pseudo_bound,
    random_bumps,
    resolvent_audit,
    sharpness_witness_couette,
    sharpness_witness_tc,
    solve_resolvent,
)

logger = logging.getLogger(__name__)

MAX_SPREAD = 3.0
TUPLE_KEYS = ("nu", "k", "B")

Tuple3 = tuple[float, int, float]


# -- helpers ----------------------------------------------------------------


def params_of(cfg: ExperimentConfig, item: Tuple3) -> PhysParams:
    nu, k, b = item
    return PhysParams(nu, k, b, cfg.phys.theta)


def layer_scale(kind: OperatorKind, p: PhysParams) -> float | None:
    """Width of the layer the grid has to resolve, when there is one."""
    if kind.radial and p.kB != 0:
        return p.nu ** (1 / 3) * abs(p.kB) ** (-1 / 3)
    if kind.tag is KindTag.COUETTE:
        return (p.nu / abs(p.k)) ** (1 / 3)
    return None


def make_grid(cfg: ExperimentConfig, p: PhysParams, kind: OperatorKind | None = None) -> Grid:
    spec = cfg.grid
    kind = kind or OperatorKind.parse(cfg.phys.kind)
    scale = layer_scale(kind, p)
    if spec.points_per_layer and scale is not None:
        return grid_with_spacing(spec.a, spec.r_max, scale / spec.points_per_layer)
    return build_grid(spec.a, spec.r_max, spec.n_interior)


def time_window(cfg: ExperimentConfig, p: PhysParams) -> tuple[float, float]:
    dt = cfg.time.dt or default_dt(p)
    t_end = cfg.time.t_end or default_t_end(p)
    return dt, max(t_end, dt)


def spread(values: Iterable[float]) -> float:
    """``max/min``; infinite when a value is missing, zero or not finite."""
    vals = list(values)
    if not vals or any(not (math.isfinite(v) and v > 0) for v in vals):
        return math.inf
    return max(vals) / min(vals)


def loglog_slope(x: Sequence[float], y: Sequence[float]) -> float:
    if len(x) < 2:
        return math.nan
    slope, _ = np.polyfit(np.log(x), np.log(y), 1)
    return float(slope)


def tuple_row(item: Tuple3, **values: Any) -> dict[str, Any]:
    return dict(zip(TUPLE_KEYS, item)) | values


TUPLE_ERRORS = (TclabError, ArithmeticError, ValueError, np.linalg.LinAlgError, RuntimeError)


def _guarded(worker: Callable, cfg: ExperimentConfig, item: Any) -> dict[str, Any]:
    try:
        return worker(cfg, item)
    except TUPLE_ERRORS as exc:
        return {"error": f"{type(exc).__name__}: {exc}"}


def sweep(
    cfg: ExperimentConfig, worker: Callable, items: Sequence[Any]
) -> list[tuple[Any, dict[str, Any]]]:
    """Run ``worker`` per item, in processes when ``jobs > 1``; results keep item order."""
    jobs = int(cfg.option("jobs", 1))
    if jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_guarded, repeat(worker), repeat(cfg), items))
    else:
        results = [_guarded(worker, cfg, item) for item in items]
    for item, result in zip(items, results):
        if "error" in result:
            logger.warning("tuple %s failed: %s", item, result["error"])
        else:
            logger.info("tuple %s done", item)
    return list(zip(items, results))


def record_errors(bundle: ReportBundle, tag: str, results) -> list[tuple[Any, dict]]:
    """Split off failed tuples into an ``errors`` table; returns the good ones."""
    good = []
    for item, result in results:
        if "error" in result:
            key = item if isinstance(item, tuple) else (item,)
            bundle.add_table("errors", [{"tuple": repr(key), "error": result["error"]}])
        else:
            good.append((item, result))
    failed = len(results) - len(good)
    bundle.check(f"{tag}.tuples", failed == 0, f"{failed} of {len(results)} tuples failed")
    return good


def group_by_kb(rows: Iterable[dict]) -> dict[tuple[int, float], list[dict]]:
    groups: dict[tuple[int, float], list[dict]] = defaultdict(list)
    for row in rows:
        groups[(row["k"], row["B"])].append(row)
    return groups


def check_uniform(bundle: ReportBundle, assertion: str, rows: list[dict], column: str) -> None:
    """``max/min < 3`` of ``column`` across nu, within every ``(k, B)`` group."""
    if not rows:
        bundle.check(assertion, False, f"no rows for {column}")
        return
    worst = 0.0
    for group in group_by_kb(rows).values():
        worst = max(worst, spread(r[column] for r in group))
    bundle.check(assertion, worst < MAX_SPREAD, f"max/min of {column} = {worst:.4g}")


# -- pseudo-bound (A3) ----------------------------------------------------------


def _pseudo_tuple(cfg: ExperimentConfig, item: Tuple3) -> dict[str, Any]:
    p = params_of(cfg, item)
    kind = OperatorKind.parse(cfg.phys.kind)
    g = make_grid(cfg, p, kind)
    w_in, w_out = UNIT, UNIT
    if kind.radial:
        w_in, w_out = WeightSpec.parse(cfg.weights.w_in), WeightSpec.parse(cfg.weights.w_out)
    n_scan = int(cfg.option("n_scan", 64))
    workers = int(cfg.option("workers", 1))
    res = pseudo_bound(kind, p, g, w_in, w_out, n_scan=n_scan, workers=workers, seed=cfg.seed)
    rate = p.kappa if kind.radial else (p.nu * p.k**2) ** (1 / 3)
    row = tuple_row(
        item,
        kind=kind.describe(),
        R_max=g.r_max,
        n_interior=g.n_interior,
        psi=res.psi,
        lambda_star=res.lambda_star,
        psi_over_rate=res.psi / rate if rate > 0 else math.nan,
    )
    if cfg.option("check_truncation", True):
        wide = g.extended()
        psi2 = pseudo_bound(
            kind, p, wide, w_in, w_out, n_scan=n_scan, workers=workers, seed=cfg.seed
        ).psi
        row["psi_doubled"] = psi2
        row["truncation_change"] = abs(psi2 - res.psi) / res.psi if res.psi > 0 else math.inf
    return {"row": row, "scan": res.rows(p, g)}


def run_pseudo_bound(cfg: ExperimentConfig, bundle: ReportBundle) -> None:
    good = record_errors(bundle, "A3", sweep(cfg, _pseudo_tuple, cfg.tuples()))
    rows = [r["row"] for _, r in good]
    bundle.add_table("pseudo_bound", rows)
    for _, r in good:
        bundle.add_table("scan", r["scan"])
    worst = 0.0
    for group in group_by_kb(rows).values():
        if len({r["nu"] for r in group}) >= 2:
            slope = loglog_slope([r["nu"] for r in group], [r["psi"] for r in group])
            worst = max(worst, abs(slope - 1 / 3))
    bundle.check("A3.slope", worst <= 0.05 and bool(rows), f"max |slope - 1/3| = {worst:.4g}")
    if cfg.option("check_truncation", True):
        change = max((r["truncation_change"] for r in rows), default=math.inf)
        bundle.check("A3.truncation", change <= 0.02, f"max R_max-doubling change {change:.3%}")


# -- resolvent-audit (A5) ---------------------------------------------------------


def _resolvent_tuple(cfg: ExperimentConfig, item: tuple[Tuple3, str]) -> dict[str, Any]:
    tup, split = item
    p = params_of(cfg, tup)
    probe = ResolventProbe(p, cfg.sweep.lam[0])
    audit = resolvent_audit(
        probe,
        int(cfg.option("trials", 50)),
        cfg.seed,
        lambdas=cfg.sweep.lam,
        split=split,
        points_per_layer=int(cfg.option("points_per_layer", 24)),
    )
    rows = [tuple_row(tup, **case) for case in audit.rows()]
    return {"rows": rows, "worst": audit.worst_constant}


def _couette_tuple(cfg: ExperimentConfig, item: Tuple3) -> dict[str, Any]:
    nu, k, _ = item
    rows, worst = [], 0.0
    for lam in cfg.sweep.lam:
        audit = couette_resolvent_audit(
            nu,
            k,
            lam,
            int(cfg.option("trials", 50)),
            cfg.seed,
            domain=cfg.option("couette_domain", "interval"),
            points_per_layer=int(cfg.option("points_per_layer", 24)),
        )
        rows += [tuple_row(item, **case) for case in audit.rows()]
        worst = max(worst, audit.worst_constant)
    return {"rows": rows, "worst": worst}


def run_resolvent_audit(cfg: ExperimentConfig, bundle: ReportBundle) -> None:
    splits = tuple(cfg.option("splits", ["f1", "f2"]))
    items = [(tup, split) for tup in cfg.tuples() for split in splits]
    good = record_errors(bundle, "A5", sweep(cfg, _resolvent_tuple, items))
    worst_rows = []
    for (tup, split), r in good:
        bundle.add_table("cases", r["rows"])
        worst_rows.append(tuple_row(tup, split=split, worst=r["worst"]))
    by_tuple: dict[Tuple3, float] = defaultdict(float)
    for row in worst_rows:
        key = (row["nu"], row["k"], row["B"])
        by_tuple[key] = max(by_tuple[key], row["worst"])
    summary = [tuple_row(key, worst=value) for key, value in by_tuple.items()]
    bundle.add_table("worst", summary)
    bounded = all(math.isfinite(r["worst"]) for r in summary) and bool(summary)
    bundle.check("A5.bounded", bounded, f"{len(summary)} tuples")
    check_uniform(bundle, "A5.nu_uniform", summary, "worst")
    if cfg.option("couette", False):
        couette = record_errors(bundle, "A5.couette", sweep(cfg, _couette_tuple, cfg.tuples()))
        rows = [tuple_row(t, worst=r["worst"]) for t, r in couette]
        for _, r in couette:
            bundle.add_table("couette_cases", r["rows"])
        bundle.add_table("couette_worst", rows)
        check_uniform(bundle, "A5.couette_uniform", rows, "worst")


# -- sharpness (A4) -----------------------------------------------------------------


def run_sharpness(cfg: ExperimentConfig, bundle: ReportBundle) -> None:
    m = int(cfg.option("m", 64))
    tc_rows, couette_rows = [], []
    for nu, k, b in cfg.tuples():
        try:
            w = sharpness_witness_tc(nu, b, m=m, k=k)
            tc_rows.append(
                tuple_row((nu, k, b), r0=w.r0, lambda0=w.lambda0, quotient=w.quotient,
                          norm_over_r=w.norm_over_r)
            )
        except TUPLE_ERRORS as exc:
            bundle.add_table("errors", [{"tuple": repr((nu, k, b)), "error": str(exc)}])
    for nu in cfg.option("couette_nu", cfg.sweep.nu):
        try:
            c = sharpness_witness_couette(nu, m=m)
            couette_rows.append({"nu": nu, "quotient": c.quotient, "norm": c.norm,
                                 "support_end": c.support[1]})
        except TUPLE_ERRORS as exc:
            bundle.add_table("errors", [{"tuple": repr((nu,)), "error": str(exc)}])
    bundle.add_table("tc", tc_rows)
    bundle.add_table("couette", couette_rows)
    check_uniform(bundle, "A4.tc_ratio", tc_rows, "quotient")
    slope = loglog_slope([r["r0"] for r in tc_rows], [r["norm_over_r"] for r in tc_rows])
    bundle.check("A4.tc_slope", abs(slope + 7.5) <= 0.1, f"slope {slope:.4f} (expected -7.5)")
    ratio = spread(r["quotient"] for r in couette_rows)
    bundle.check("A4.couette_ratio", ratio < MAX_SPREAD, f"max/min = {ratio:.4g}")
    slope = loglog_slope([r["nu"] for r in couette_rows], [r["norm"] for r in couette_rows])
    bundle.check("A4.couette_slope", abs(slope - 13 / 6) <= 0.05, f"slope {slope:.4f} (expected 13/6)")


# -- evolve (A1, A2, A6) ---------------------------------------------------------------


def _evolve_tuple(cfg: ExperimentConfig, item: Tuple3) -> dict[str, Any]:
    p = params_of(cfg, item)
    kind = OperatorKind.parse(cfg.phys.kind)
    g = make_grid(cfg, p, kind)
    dt, t_end = time_window(cfg, p)
    if cfg.time.t_end is None and p.kappa > 0:
        t_end = max(float(cfg.option("t_end_kappa", 5.0)) / p.kappa, dt)
    accretive = accretivity_check(
        assemble(kind, p, g), int(cfg.option("accretive_trials", 200)), cfg.seed
    )
    contraction = []
    for center in cfg.option("centers", [2.0]):
        if not g.a_end < center < g.b_end:
            continue
        setup = EvolutionSetup(p, g, dt, t_end, kind, bump(g, center))
        result = evolve(setup, check_accretive=False)
        contraction.append(
            tuple_row(item, center=center, violations=result.violations,
                      final_ratio=result.norms[-1] / result.norms[0])
        )
    profile = bump(g, 2.0)
    t_off = float(cfg.option("forcing_t_off", 1.0))
    forced = EvolutionSetup(
        p, g, dt, t_end, kind, GridFunction.zeros(g), switched_forcing(profile, 0.0, t_off)
    )
    inhom = inhomogeneous_audit(forced)
    return {
        "accretive": tuple_row(item, min_real_form=accretive, n_interior=g.n_interior),
        "contraction": contraction,
        "inhomogeneous": tuple_row(item, quotient=inhom.quotient, lhs=inhom.lhs, rhs=inhom.rhs),
    }


def energy_identity_rows(cfg: ExperimentConfig) -> list[dict[str, Any]]:
    rng = np.random.default_rng(cfg.seed)
    g = build_grid(cfg.grid.a, cfg.grid.r_max, cfg.grid.n_interior)
    rows = []
    tuples = cfg.tuples()
    for trial in range(int(cfg.option("identity_trials", 100))):
        item = tuples[trial % len(tuples)]
        p = params_of(cfg, item)
        count = int(rng.integers(1, 4))
        f = random_bumps(
            rng, g, rng.uniform(g.a_end + 0.5, g.b_end - 0.5, count), rng.uniform(0.1, 0.5, count)
        )
        e = energy_identity_check(p, f)
        rows.append(
            tuple_row(item, trial=trial, lhs=e.lhs, rhs=e.rhs,
                      relative_gap=e.gap / e.rhs if e.rhs > 0 else e.gap,
                      imag=e.imag, imag_expected=e.imag_expected)
        )
    return rows


def run_evolve(cfg: ExperimentConfig, bundle: ReportBundle) -> None:
    identity = energy_identity_rows(cfg)
    bundle.add_table("energy_identity", identity)
    gap = max(r["relative_gap"] for r in identity)
    bundle.check("A1.energy_identity", gap <= 1e-12, f"max relative gap {gap:.3e}")

    good = record_errors(bundle, "A2", sweep(cfg, _evolve_tuple, cfg.tuples()))
    accretive = [r["accretive"] for _, r in good]
    contraction = [row for _, r in good for row in r["contraction"]]
    inhom = [r["inhomogeneous"] for _, r in good]
    bundle.add_table("accretivity", accretive)
    bundle.add_table("contraction", contraction)
    bundle.add_table("inhomogeneous", inhom)
    worst = min((r["min_real_form"] for r in accretive), default=-math.inf)
    bundle.check("A2.accretive", worst >= -1e-12, f"min Re<Tf,f> = {worst:.3e}")
    violations = sum(r["violations"] for r in contraction)
    bundle.check("A2.contraction", violations == 0 and bool(contraction),
                 f"{violations} non-contracting steps")
    check_uniform(bundle, "A6.nu_uniform", inhom, "quotient")


# -- thm1-weights (A7) --------------------------------------------------------------------


def _thm1_tuple(cfg: ExperimentConfig, item: Tuple3) -> dict[str, Any]:
    p = params_of(cfg, item)
    g = make_grid(cfg, p, OperatorKind.tc())
    dt, t_end = time_window(cfg, p)
    setup = EvolutionSetup(
        p, g, dt, t_end, OperatorKind.tc(), bump(g, float(cfg.option("center", 2.0)))
    )
    audit = homogeneous_decay_audit(setup, cfg.sweep.q)
    return {
        "rows": list(audit.rows),
        "decay": tuple_row(item, decay_sup=audit.decay_sup, violations=audit.violations,
                           n_interior=g.n_interior, dt=dt, t_end=t_end),
    }


def run_thm1_weights(cfg: ExperimentConfig, bundle: ReportBundle) -> None:
    good = record_errors(bundle, "A7", sweep(cfg, _thm1_tuple, cfg.tuples()))
    rows = [row for _, r in good for row in r["rows"]]
    decay = [r["decay"] for _, r in good]
    bundle.add_table("weighted_energy", rows)
    bundle.add_table("decay", decay)
    finite = bool(rows) and all(math.isfinite(r["ratio"]) for r in rows)
    bundle.check("A7.finite", finite, f"{len(rows)} weighted energies")
    for q in sorted(set(cfg.sweep.q)):
        check_uniform(bundle, f"A7.uniform_q{q}", [r for r in rows if r["q"] == q], "ratio")
    check_uniform(bundle, "A7.decay_uniform", decay, "decay_sup")
    violations = sum(r["violations"] for r in decay)
    bundle.check("A7.contraction", violations == 0, f"{violations} non-contracting steps")


# -- decomposition (A8) -------------------------------------------------------------------


def _decomposition_tuple(cfg: ExperimentConfig, item: Tuple3) -> dict[str, Any]:
    p = params_of(cfg, item)
    g = make_grid(cfg, p, OperatorKind.tc())
    _, t_end = time_window(cfg, p)
    # w1 carries no kB t / r^2 phase; steps scale with 1/kappa
    dt = cfg.time.dt or float(cfg.option("dt_kappa", 0.01)) / p.kappa
    setup = EvolutionSetup(
        p, g, dt, max(t_end, dt), OperatorKind.tc(), bump(g, float(cfg.option("center", 2.0)))
    )
    every = max(1, setup.n_steps // int(cfg.option("max_snapshots", 400)))
    defect_time = float(cfg.option("defect_time_kappa", 0.25)) / p.kappa
    audit = decomposition_audit(setup, defect_time=defect_time, snapshot_every=every)
    split = region_split_measure(audit.snapshots, audit.snapshot_dt, p.kappa)
    defect = audit.defect.relative if audit.defect is not None else math.nan
    return {
        "row": tuple_row(
            item,
            theta_damping=theta_damping(p),
            n_interior=g.n_interior,
            dt=dt,
            **audit.ratios(),
            defect=defect,
            I1=split.I1,
            I2=split.I2,
            bound1=split.bound1,
            bound2=split.bound2,
            slack1=split.slack1,
            slack2=split.slack2,
        )
    }


def run_decomposition(cfg: ExperimentConfig, bundle: ReportBundle) -> None:
    good = record_errors(bundle, "A8", sweep(cfg, _decomposition_tuple, cfg.tuples()))
    rows = [r["row"] for _, r in good]
    bundle.add_table("decomposition", rows)
    check_uniform(bundle, "A8.damping_uniform", rows, "damping")
    check_uniform(bundle, "A8.kappa52_uniform", rows, "kappa52")
    slack = min((min(r["slack1"], r["slack2"]) for r in rows), default=-math.inf)
    bundle.check("A8.region", slack >= 0, f"min slack {slack:.4g}")
    tol = float(cfg.option("defect_tol", 0.05))
    defect = max((r["defect"] for r in rows), default=math.inf)
    bundle.check("A8.defect", defect <= tol, f"max relative defect {defect:.3e}")


# -- gp-check (A11) -----------------------------------------------------------------------


def _gp_tuple(cfg: ExperimentConfig, item: Tuple3) -> dict[str, Any]:
    nu, k, _ = item
    p = PhysParams(nu, k, 0.0)
    kind = OperatorKind.couette()
    g = build_grid(cfg.grid.a, cfg.grid.r_max, cfg.grid.n_interior)
    psi = pseudo_bound(kind, p, g, seed=cfg.seed).psi
    t_end = float(cfg.option("horizon", 10.0)) / psi
    dt = t_end / int(cfg.option("steps", 2000))
    initial = bump(g, float(cfg.option("center", 0.5)), float(cfg.option("width", 0.2)))
    check = gp_semigroup_check(EvolutionSetup(p, g, dt, t_end, kind, initial), psi)
    return {"row": tuple_row(item, psi=check.psi, margin=check.margin, t_worst=check.t_worst)}


def run_gp_check(cfg: ExperimentConfig, bundle: ReportBundle) -> None:
    good = record_errors(bundle, "A11", sweep(cfg, _gp_tuple, cfg.tuples()))
    rows = [r["row"] for _, r in good]
    bundle.add_table("gp_check", rows)
    margin = min((r["margin"] for r in rows), default=-math.inf)
    bundle.check("A11.margin", margin >= -0.05, f"min margin {margin:.4g}")


# -- dyadic-check (A9), hardy (A10) -----------------------------------------------------------


def run_dyadic_check(cfg: ExperimentConfig, bundle: ReportBundle) -> None:
    report = partition_audit(
        int(cfg.option("j_max", 12)), int(cfg.option("r_samples", 10_000))
    )
    bundle.add_table(
        "invariants",
        [{"name": c.name, "passed": c.passed, "worst": c.worst, "location": c.location}
         for c in report.checks],
    )
    for c in report.checks:
        bundle.check(f"A9.{c.name}", c.passed, f"worst {c.worst:.3e}")


def run_hardy(cfg: ExperimentConfig, bundle: ReportBundle) -> None:
    rng = np.random.default_rng(cfg.seed)
    g = build_grid(cfg.grid.a, cfg.grid.r_max, cfg.grid.n_interior)
    rows = []
    for trial in range(int(cfg.option("trials", 200))):
        count = int(rng.integers(1, 4))
        f = random_bumps(
            rng, g, rng.uniform(g.a_end, g.b_end, count), rng.uniform(0.05, 1.0, count)
        )
        audit = hardy_audit(f)
        rows.append({"trial": trial, "lhs": audit.lhs, "rhs": audit.rhs, "quotient": audit.quotient})
    bundle.add_table("hardy", rows)
    worst = max(r["quotient"] for r in rows)
    bundle.check("A10.hardy", worst <= 2.5, f"max quotient {worst:.4g}")

    r0 = float(cfg.option("r0", 2.0))
    logs = []
    for dtilde in cfg.option("delta_tilde", [0.01, 0.1, 0.5]):
        li = log_integral_audit(r0, float(dtilde))
        logs.append({"r0": r0, "delta_tilde": dtilde, "value": li.value, "bound": li.bound,
                     "quadrature": li.quadrature, "holds": li.holds})
    bundle.add_table("log_integral", logs)
    bundle.check("A10.log_integral", all(r["holds"] for r in logs), f"{len(logs)} cases")

    z = np.linspace(-1.5, 1.5, 61)
    rho = rho_cutoff(z)
    bundle.add_table("rho", [{"z": float(a), "rho": float(b)} for a, b in zip(z, rho)])
    bundle.check("A10.rho_range", bool(np.all(np.abs(rho) <= 1.0)), "|rho| <= 1")


# -- counterexamples (A12, A13) ---------------------------------------------------------------


def run_counterexample_tc(cfg: ExperimentConfig, bundle: ReportBundle) -> None:
    p = PhysParams(cfg.phys.nu, cfg.phys.k, cfg.phys.B, cfg.phys.theta)
    instances = {
        "q2": WeightTriple.q2_instance(p.kappa),
        "inverse_r": WeightTriple.inverse_r(),
    }
    summary = []
    for name, weights in instances.items():
        try:
            seq = tc_counterexample(
                p,
                weights,
                delta=float(cfg.option("delta", 0.1)),
                n_local=int(cfg.option("n_local", 127)),
                dt=float(cfg.option("dt", 1e-3)),
                n_max=cfg.sweep.n_max,
            )
        except TUPLE_ERRORS as exc:
            bundle.add_table("errors", [{"tuple": name, "error": f"{type(exc).__name__}: {exc}"}])
            bundle.check(f"A12.{name}", False, str(exc))
            continue
        bundle.add_table(
            f"series_{name}",
            [tuple_row((p.nu, p.k, p.B), instance=weights.label, **row) for row in seq.series.rows()],
        )
        summary.append(
            tuple_row(
                (p.nu, p.k, p.B),
                instance=name,
                delta=seq.delta,
                centroid=seq.centroid,
                predicted_slope=seq.predicted_slope,
                fitted_slope=seq.fitted_slope,
                decay_rate=seq.decay_rate,
                phi_max=seq.phi_max,
                finite=seq.finite,
                consistency_residual=seq.consistency.residual,
                consistency_tolerance=seq.consistency.tolerance,
                seam_jump_d1=seq.seam.d1,
                seam_jump_d2=seq.seam.d2,
            )
        )
        if name == "q2":
            bundle.check("A12.slope_positive", seq.fitted_slope > 0, f"slope {seq.fitted_slope:.4g}")
            bundle.check(
                "A12.slope_prediction",
                seq.fitted_slope >= 0.9 * seq.predicted_slope,
                f"fitted {seq.fitted_slope:.4g} vs predicted {seq.predicted_slope:.4g}",
            )
            bundle.check("A12.finite", seq.finite, f"delta={seq.delta:g}, rate {seq.decay_rate:.4g}")
            bundle.check("A12.consistency", seq.consistency.passed,
                         f"residual {seq.consistency.residual:.3e}")
            bundle.check("A12.increasing", seq.series.eventually_increasing(), "tail of R_n")
    bundle.add_table("summary", summary)


def run_counterexample_heat(cfg: ExperimentConfig, bundle: ReportBundle) -> None:
    v1 = tuple(cfg.option("v1", [0.0, 1.0]))
    v2 = tuple(cfg.option("v2", [3.0, 4.0]))
    seq = heat_kernel_counterexample(
        cfg.option("domain", "line"),
        None,
        v1,
        v2,
        cfg.sweep.n_max,
        x0=cfg.option("x0"),
        length=float(cfg.option("length", 5.0)),
    )
    bundle.add_table("series", seq.series.rows())
    bundle.add_table(
        "summary",
        [{"domain": cfg.option("domain", "line"), "v1_lo": v1[0], "v1_hi": v1[1],
          "v2_lo": v2[0], "v2_hi": v2[1], "w_at_x0": seq.w_at_x0,
          "w_at_x0_grid": seq.w_at_x0_grid, "d1": seq.d1, "d2": seq.d2,
          "fitted_slope": seq.fitted_slope}],
    )
    bundle.check("A13.positive", seq.w_at_x0 > 0, f"w(1, x0) = {seq.w_at_x0:.4g}")
    bundle.check(
        "A13.slope",
        seq.fitted_slope >= 0.9 * seq.gap,
        f"slope {seq.fitted_slope:.4g} vs gap {seq.gap:.4g}",
    )


# -- convergence (A14) --------------------------------------------------------------------


def observed_order(coarse: float, fine: float) -> float:
    if fine <= 0:
        return math.inf
    return math.log2(coarse / fine)


def time_order(p: PhysParams, g: Grid, dt: float, t_end: float) -> float:
    finals = []
    for level in range(3):
        step = dt / 2**level
        setup = EvolutionSetup(p, g, step, t_end, OperatorKind.tc(), bump(g, 0.5 * (g.a_end + g.b_end)))
        finals.append(evolve(setup, check_accretive=False).final)
    e1 = weighted_norm(finals[0] - finals[1])
    e2 = weighted_norm(finals[1] - finals[2])
    return observed_order(e1, e2)


def space_order(p: PhysParams, g: Grid, lam: float = 0.5) -> float:
    probe = ResolventProbe(p, lam)
    center = 0.5 * (g.a_end + g.b_end)
    sols = []
    grid = g
    for _ in range(3):
        sols.append(solve_resolvent(probe, bump(grid, center)).values)
        grid = grid.refined()
    e1 = float(np.max(np.abs(sols[0] - sols[1][1::2])))
    e2 = float(np.max(np.abs(sols[1][1::2] - sols[2][3::4])))
    return observed_order(e1, e2)


def svd_agreement(p: PhysParams, cfg: ExperimentConfig, n: int, lam: float = 0.5) -> float:
    g = build_grid(cfg.grid.a, cfg.grid.r_max, n)
    w_in, w_out = WeightSpec.parse(cfg.weights.w_in), WeightSpec.parse(cfg.weights.w_out)
    op = ResolventProbe(p, lam).operator(g)
    fast = smallest_singular_value(op, w_in, w_out, tol=1e-10, seed=cfg.seed)
    dense = np.linalg.svd(weighted_matrix(op, w_in, w_out).to_dense(), compute_uv=False)[-1]
    return abs(fast - dense) / dense


def convergence_study(cfg: ExperimentConfig) -> ReportBundle:
    """Refinement in ``h``, ``dt`` and ``R_max`` plus the dense SVD oracle."""
    bundle = ReportBundle(cfg.experiment)
    start = time.perf_counter()
    p = PhysParams(cfg.phys.nu, cfg.phys.k, cfg.phys.B, cfg.phys.theta)
    g = build_grid(cfg.grid.a, cfg.grid.r_max, cfg.grid.n_interior)
    dt, t_end = time_window(cfg, p)
    rows = []

    order_t = time_order(p, g, dt, t_end)
    rows.append({"quantity": "time_order", "value": order_t})
    bundle.check("A14.time_order", order_t >= 1.8, f"observed {order_t:.3f}")

    order_h = space_order(p, g)
    rows.append({"quantity": "space_order", "value": order_h})
    bundle.check("A14.space_order", order_h >= 1.8, f"observed {order_h:.3f}")

    worst = 0.0
    for n in cfg.option("svd_sizes", [64, 128, 256]):
        rel = svd_agreement(p, cfg, int(n))
        rows.append({"quantity": f"svd_rel_n{n}", "value": rel})
        worst = max(worst, rel)
    bundle.check("A14.svd", worst <= 1e-6, f"max relative gap {worst:.3e}")

    w_in, w_out = WeightSpec.parse(cfg.weights.w_in), WeightSpec.parse(cfg.weights.w_out)
    psi = pseudo_bound(OperatorKind.tc(), p, g, w_in, w_out, seed=cfg.seed).psi
    psi_wide = pseudo_bound(OperatorKind.tc(), p, g.extended(), w_in, w_out, seed=cfg.seed).psi
    psi_fine = pseudo_bound(OperatorKind.tc(), p, g.refined(), w_in, w_out, seed=cfg.seed).psi
    change = abs(psi_wide - psi) / psi if psi > 0 else math.inf
    rows += [
        {"quantity": "psi", "value": psi},
        {"quantity": "psi_R_doubled", "value": psi_wide},
        {"quantity": "psi_h_halved", "value": psi_fine},
    ]
    bundle.check("A14.truncation", change <= 0.02, f"R_max doubling change {change:.3%}")

    m = int(cfg.option("sharpness_m", 16))
    b = p.B if abs(p.B) > p.nu else 1.0
    q = [sharpness_witness_tc(p.nu, b, m=m * 2**i, k=p.k).quotient for i in range(3)]
    order_q = observed_order(abs(q[0] - q[1]), abs(q[1] - q[2]))
    rows.append({"quantity": "quadrature_order", "value": order_q})
    bundle.check("A14.quadrature_order", order_q >= 3, f"observed {order_q:.3f}")

    for row in rows:
        row.update(nu=p.nu, k=p.k, B=p.B, R_max=g.r_max, n_interior=g.n_interior, dt=dt)
    bundle.add_table("convergence", rows)
    bundle.manifest.update(_manifest(cfg, time.perf_counter() - start))
    return bundle


# -- dispatch -------------------------------------------------------------------------------


EXPERIMENT_RUNNERS: dict[str, Callable[[ExperimentConfig, ReportBundle], None]] = {
    "pseudo-bound": run_pseudo_bound,
    "resolvent-audit": run_resolvent_audit,
    "sharpness": run_sharpness,
    "evolve": run_evolve,
    "thm1-weights": run_thm1_weights,
    "decomposition": run_decomposition,
    "gp-check": run_gp_check,
    "dyadic-check": run_dyadic_check,
    "hardy": run_hardy,
    "counterexample-tc": run_counterexample_tc,
    "counterexample-heat": run_counterexample_heat,
}

DESCRIPTIONS = {
    "pseudo-bound": "pseudospectral bound scaling in nu (A3)",
    "resolvent-audit": "weighted resolvent inequality over random data (A5)",
    "sharpness": "analytic sharpness witnesses (A4)",
    "evolve": "energy identity, accretivity, contraction, forced runs (A1, A2, A6)",
    "thm1-weights": "Lambda^q weighted energies and decay (A7)",
    "decomposition": "damped auxiliary flow and region split (A8)",
    "gp-check": "semigroup bound from the pseudospectral bound (A11)",
    "dyadic-check": "dyadic partition of unity invariants (A9)",
    "hardy": "Hardy-type and log-integral inequalities (A10)",
    "counterexample-tc": "divergent weighted quotients for TC (A12)",
    "counterexample-heat": "divergent weighted quotients from heat kernels (A13)",
    "convergence": "time, space, truncation and quadrature orders (A14)",
}


def _manifest(cfg: ExperimentConfig, wall_time: float) -> dict[str, Any]:
    return {
        "config": cfg.to_dict(),
        "version": __version__,
        "wall_time": wall_time,
        "seed": cfg.seed,
    }


def run(cfg: ExperimentConfig) -> ReportBundle:
    """Execute the configured experiment; tuple failures are recorded, not raised."""
    if cfg.experiment == "convergence":
        return convergence_study(cfg)
    bundle = ReportBundle(cfg.experiment)
    start = time.perf_counter()
    logger.info("running %s", cfg.experiment)
    EXPERIMENT_RUNNERS[cfg.experiment](cfg, bundle)
    bundle.manifest.update(_manifest(cfg, time.perf_counter() - start))
    return bundle


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tclab",
        description="Numerical audits of the linearized Taylor-Couette operator",
    )
    parser.add_argument("experiment", nargs="?", help="experiment to run (see --list)")
    parser.add_argument("--config", help="TOML or JSON file merged over the defaults")
    parser.add_argument("--out", help="output directory (overrides TCLAB_OUT)")
    parser.add_argument("--seed", type=int, help="random seed")
    parser.add_argument("--jobs", type=int, help="parallel sweep tuples (overrides options.jobs)")
    parser.add_argument("--list", action="store_true", help="list experiments and exit")
    parser.add_argument(
        "--emit-config", action="store_true", help="print the merged config as JSON and exit"
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    parser.add_argument("--quiet", action="store_true", help="errors only")
    return parser


def main(argv: Sequence[str] | None = None) -> None:
    args = build_parser().parse_args(argv)
    level = logging.DEBUG if args.verbose else logging.ERROR if args.quiet else logging.WARNING
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")

    if args.list:
        for name in EXPERIMENTS:
            print(f"{name:22s} {DESCRIPTIONS[name]}")
        sys.exit(0)

    overrides: dict[str, Any] = {}
    if args.out:
        overrides["out_dir"] = args.out
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.jobs is not None:
        overrides["options"] = {"jobs": args.jobs}
    try:
        cfg = load_config(args.experiment, args.config, overrides=overrides)
    except ConfigError as exc:
        print(f"tclab: {exc}", file=sys.stderr)
        sys.exit(2)

    if args.emit_config:
        print(emit_config(cfg))
        sys.exit(0)

    bundle = run(cfg)
    target = write_bundle(bundle, cfg.out_dir)
    failed = [v for v in bundle.verdicts if not v.passed]
    for v in bundle.verdicts:
        logger.info("%s %s %s", v.assertion, "PASS" if v.passed else "FAIL", v.detail)
    if not args.quiet:
        print(f"{cfg.experiment}: {len(bundle.verdicts) - len(failed)}/{len(bundle.verdicts)} verdicts pass -> {target}")
        for v in failed:
            print(f"  FAIL {v.assertion}: {v.detail}")
    sys.exit(0 if not failed else 1)


if __name__ == "__main__":
    main()
