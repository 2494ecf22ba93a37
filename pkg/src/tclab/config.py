"""Experiment configuration: frozen dataclasses read from TOML or JSON.

Every experiment has a default table in ``data/experiments.json``; a user file
is merged over it table by table, validated, and can be emitted back as JSON.
"""

from __future__ import annotations

import json
import math
import os
import tomllib
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any

from .errors import ConfigError
from .grid import WeightSpec
from .operators import DEFAULT_THETA, KindTag

_DATA_DIR = Path(__file__).parent / "data"

EXPERIMENTS = (
    "pseudo-bound",
    "resolvent-audit",
    "sharpness",
    "evolve",
    "thm1-weights",
    "decomposition",
    "gp-check",
    "dyadic-check",
    "hardy",
    "counterexample-tc",
    "counterexample-heat",
    "convergence",
)
OUT_ENV = "TCLAB_OUT"


def _load_data(filename: str) -> str:
    """Load content from data directory."""
    return (_DATA_DIR / filename).read_text(encoding="utf-8")


@dataclass(frozen=True)
class PhysSpec:
    nu: float = 1e-3
    k: int = 1
    B: float = 1.0
    theta: float = DEFAULT_THETA
    kind: str = "tc"


@dataclass(frozen=True)
class GridSpec:
    a: float = 1.0
    r_max: float = 8.0
    n_interior: int = 512
    points_per_layer: int = 0  # 0: use n_interior as given


@dataclass(frozen=True)
class TimeSpec:
    dt: float | None = None
    t_end: float | None = None


@dataclass(frozen=True)
class WeightsSpec:
    w_in: str = "unit"
    w_out: str = "unit"


@dataclass(frozen=True)
class SweepSpec:
    nu: tuple[float, ...] = (1e-3,)
    k: tuple[int, ...] = (1,)
    B: tuple[float, ...] = (1.0,)
    q: tuple[int, ...] = (0, 1, 2)
    lam: tuple[float, ...] = (-1.0, 0.0, 0.25, 0.5, 0.9, 1.0, 2.0)
    n_max: int = 12


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    phys: PhysSpec = field(default_factory=PhysSpec)
    grid: GridSpec = field(default_factory=GridSpec)
    time: TimeSpec = field(default_factory=TimeSpec)
    weights: WeightsSpec = field(default_factory=WeightsSpec)
    sweep: SweepSpec = field(default_factory=SweepSpec)
    out_dir: str = "reports"
    seed: int = 20240607
    options: dict[str, Any] = field(default_factory=dict)

    def tuples(self) -> list[tuple[float, int, float]]:
        """Cartesian ``(nu, k, B)`` sweep in a fixed order."""
        return [(nu, k, b) for nu in self.sweep.nu for k in self.sweep.k for b in self.sweep.B]

    def option(self, name: str, default: Any = None) -> Any:
        return self.options.get(name, default)

    def with_out_dir(self, out_dir: str) -> ExperimentConfig:
        return replace(self, out_dir=out_dir)

    def to_dict(self) -> dict[str, Any]:
        data = asdict(self)
        for key, value in data["sweep"].items():
            if isinstance(value, tuple):
                data["sweep"][key] = list(value)
        return data


_SECTIONS = {
    "phys": PhysSpec,
    "grid": GridSpec,
    "time": TimeSpec,
    "weights": WeightsSpec,
    "sweep": SweepSpec,
}


def _build_section(name: str, cls, raw: Any):
    if not isinstance(raw, dict):
        raise ConfigError(name, "must be a table")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"{name}.{unknown[0]}", "unknown key")
    values = {}
    for key, value in raw.items():
        if isinstance(value, list):
            value = tuple(value)
        values[key] = value
    return cls(**values)


def from_dict(data: dict[str, Any]) -> ExperimentConfig:
    """Build and validate a config from plain data (no defaults merged)."""
    if not isinstance(data, dict):
        raise ConfigError("config", "must be a table")
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(unknown[0], "unknown key")
    if "experiment" not in data:
        raise ConfigError("experiment", "missing")
    kwargs: dict[str, Any] = {"experiment": data["experiment"]}
    for name, cls in _SECTIONS.items():
        if name in data:
            kwargs[name] = _build_section(name, cls, data[name])
    for name in ("out_dir", "seed"):
        if name in data:
            kwargs[name] = data[name]
    if "options" in data:
        if not isinstance(data["options"], dict):
            raise ConfigError("options", "must be a table")
        kwargs["options"] = dict(data["options"])
    cfg = ExperimentConfig(**kwargs)
    validate(cfg)
    return cfg


def _positive(name: str, value: Any) -> None:
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise ConfigError(name, f"expected a number, got {value!r}")
    if not (math.isfinite(value) and value > 0):
        raise ConfigError(name, f"must be positive, got {value!r}")


COUNT_OPTIONS = (
    "trials",
    "n_scan",
    "workers",
    "jobs",
    "m",
    "j_max",
    "r_samples",
    "steps",
    "n_local",
    "max_snapshots",
    "identity_trials",
    "accretive_trials",
    "points_per_layer",
    "sharpness_m",
)
SCALE_OPTIONS = (
    "horizon",
    "width",
    "center",
    "delta",
    "dt",
    "dt_kappa",
    "t_end_kappa",
    "defect_time_kappa",
    "defect_tol",
    "forcing_t_off",
    "r0",
    "length",
)


def _validate_options(options: dict[str, Any]) -> None:
    for name in COUNT_OPTIONS:
        value = options.get(name)
        if value is not None and (
            not isinstance(value, int) or isinstance(value, bool) or value < 1
        ):
            raise ConfigError(f"options.{name}", f"must be a positive integer, got {value!r}")
    for name in SCALE_OPTIONS:
        if options.get(name) is not None:
            _positive(f"options.{name}", options[name])


def _nonempty(name: str, values: tuple) -> None:
    if not isinstance(values, tuple) or not values:
        raise ConfigError(name, "must be a nonempty list")


def validate(cfg: ExperimentConfig) -> None:
    """Raise :class:`ConfigError` naming the first offending field."""
    if cfg.experiment not in EXPERIMENTS:
        raise ConfigError("experiment", f"unknown experiment {cfg.experiment!r}")
    p = cfg.phys
    _positive("phys.nu", p.nu)
    if not isinstance(p.k, int) or isinstance(p.k, bool) or p.k == 0:
        raise ConfigError("phys.k", f"must be a nonzero integer, got {p.k!r}")
    if not isinstance(p.B, (int, float)) or not math.isfinite(p.B):
        raise ConfigError("phys.B", f"must be a finite number, got {p.B!r}")
    if not isinstance(p.theta, (int, float)) or p.theta < 0:
        raise ConfigError("phys.theta", f"must be nonnegative, got {p.theta!r}")
    if p.kind not in {tag.value for tag in KindTag}:
        raise ConfigError("phys.kind", f"unknown operator kind {p.kind!r}")

    g = cfg.grid
    if not isinstance(g.a, (int, float)) or not math.isfinite(g.a):
        raise ConfigError("grid.a", f"must be finite, got {g.a!r}")
    if not isinstance(g.r_max, (int, float)) or not g.r_max > g.a:
        raise ConfigError("grid.r_max", f"must exceed grid.a={g.a}, got {g.r_max!r}")
    if not isinstance(g.n_interior, int) or g.n_interior < 8:
        raise ConfigError("grid.n_interior", f"must be an integer >= 8, got {g.n_interior!r}")
    if not isinstance(g.points_per_layer, int) or g.points_per_layer < 0:
        raise ConfigError("grid.points_per_layer", "must be a nonnegative integer")

    for name in ("dt", "t_end"):
        value = getattr(cfg.time, name)
        if value is not None:
            _positive(f"time.{name}", value)
    for name in ("w_in", "w_out"):
        try:
            WeightSpec.parse(getattr(cfg.weights, name))
        except (ValueError, AttributeError) as exc:
            raise ConfigError(f"weights.{name}", str(exc)) from exc

    s = cfg.sweep
    for name in ("nu", "k", "B", "q", "lam"):
        _nonempty(f"sweep.{name}", getattr(s, name))
    for nu in s.nu:
        _positive("sweep.nu", nu)
    if any(not isinstance(k, int) or isinstance(k, bool) or k == 0 for k in s.k):
        raise ConfigError("sweep.k", "entries must be nonzero integers")
    if any(not isinstance(q, int) or q < 0 for q in s.q):
        raise ConfigError("sweep.q", "entries must be nonnegative integers")
    if not isinstance(s.n_max, int) or s.n_max < 1:
        raise ConfigError("sweep.n_max", f"must be a positive integer, got {s.n_max!r}")
    _validate_options(cfg.options)

    if not isinstance(cfg.out_dir, str) or not cfg.out_dir:
        raise ConfigError("out_dir", "must be a nonempty path")
    if not isinstance(cfg.seed, int) or isinstance(cfg.seed, bool) or not 0 <= cfg.seed < 2**64:
        raise ConfigError("seed", f"must be an unsigned 64-bit integer, got {cfg.seed!r}")


def default_tables() -> dict[str, dict[str, Any]]:
    return json.loads(_load_data("experiments.json"))


def merge(base: dict[str, Any], override: dict[str, Any]) -> dict[str, Any]:
    """Table-by-table merge: nested tables merge, everything else replaces."""
    out = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = {**out[key], **value}
        else:
            out[key] = value
    return out


def read_file(path: str | Path) -> dict[str, Any]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc}") from exc
    try:
        if path.suffix.lower() == ".toml":
            return tomllib.loads(text)
        return json.loads(text)
    except (tomllib.TOMLDecodeError, json.JSONDecodeError) as exc:
        raise ConfigError("config", f"cannot parse {path}: {exc}") from exc


def load_config(
    experiment: str | None = None,
    path: str | Path | None = None,
    *,
    overrides: dict[str, Any] | None = None,
) -> ExperimentConfig:
    """Defaults for the experiment, then the file, then ``TCLAB_OUT``, then ``overrides``."""
    user = read_file(path) if path is not None else {}
    name = experiment or user.get("experiment")
    if name is None:
        raise ConfigError("experiment", "missing")
    tables = default_tables()
    if name not in tables:
        raise ConfigError("experiment", f"unknown experiment {name!r}")
    data = merge(tables[name], user)
    data["experiment"] = name
    env_out = os.environ.get(OUT_ENV)
    if env_out:
        data["out_dir"] = env_out
    if overrides:
        data = merge(data, overrides)
    return from_dict(data)


def emit_config(cfg: ExperimentConfig) -> str:
    return json.dumps(cfg.to_dict(), indent=2, ensure_ascii=False)


def parse_config(text: str) -> ExperimentConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("config", str(exc)) from exc
    return from_dict(data)
