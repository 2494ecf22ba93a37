"""Report bundles: manifest, CSV tables and verdicts on disk."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from .grid import GridFunction
from .operators import PhysParams

FLOAT_FORMAT = "%.12g"


@dataclass(frozen=True)
class Verdict:
    """Outcome of one acceptance assertion, identified as ``A<n>.<slug>``."""

    assertion: str
    passed: bool
    detail: str = ""


@dataclass
class ReportBundle:
    experiment: str
    manifest: dict[str, Any] = field(default_factory=dict)
    tables: dict[str, list[dict[str, Any]]] = field(default_factory=dict)
    verdicts: list[Verdict] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts)

    def add_table(self, name: str, rows: list[dict[str, Any]]) -> None:
        self.tables.setdefault(name, []).extend(rows)

    def check(self, assertion: str, passed: bool, detail: str = "") -> Verdict:
        verdict = Verdict(assertion, bool(passed), detail)
        self.verdicts.append(verdict)
        return verdict

    def verdict(self, assertion: str) -> Verdict:
        for v in self.verdicts:
            if v.assertion == assertion:
                return v
        raise KeyError(assertion)


def format_cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return FLOAT_FORMAT % value if math.isfinite(value) else str(value)
    return str(value)


def _columns(rows: list[dict[str, Any]]) -> list[str]:
    columns: list[str] = []
    for row in rows:
        for key in row:
            if key not in columns:
                columns.append(key)
    return columns


def write_table(path: Path, rows: list[dict[str, Any]]) -> None:
    columns = _columns(rows)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([format_cell(row.get(c)) for c in columns])


def write_bundle(bundle: ReportBundle, out_dir: str | Path) -> Path:
    """Write ``<out_dir>/<experiment>/``; returns that directory."""
    target = Path(out_dir) / bundle.experiment
    target.mkdir(parents=True, exist_ok=True)
    manifest = dict(bundle.manifest)
    manifest["experiment"] = bundle.experiment
    manifest["tables"] = sorted(bundle.tables)
    manifest["verdict_summary"] = {
        "passed": sum(v.passed for v in bundle.verdicts),
        "failed": sum(not v.passed for v in bundle.verdicts),
    }
    (target / "manifest.json").write_text(
        json.dumps(manifest, indent=2, ensure_ascii=False, default=str), encoding="utf-8"
    )
    for name, rows in bundle.tables.items():
        write_table(target / f"{name}.csv", rows)
    write_table(
        target / "verdicts.csv",
        [{"assertion": v.assertion, "passed": v.passed, "detail": v.detail} for v in bundle.verdicts],
    )
    return target


def read_table(path: Path) -> list[dict[str, str]]:
    with path.open(encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


def load_bundle(path: str | Path) -> ReportBundle:
    """Read a report directory back; table cells stay strings."""
    path = Path(path)
    manifest = json.loads((path / "manifest.json").read_text(encoding="utf-8"))
    tables = {name: read_table(path / f"{name}.csv") for name in manifest.get("tables", [])}
    verdicts = [
        Verdict(row["assertion"], row["passed"] == "true", row["detail"])
        for row in read_table(path / "verdicts.csv")
    ]
    return ReportBundle(
        experiment=manifest.get("experiment", path.name),
        manifest=manifest,
        tables=tables,
        verdicts=verdicts,
    )


def write_snapshot(
    out_dir: str | Path,
    name: str,
    w: GridFunction,
    p: PhysParams,
    *,
    dt: float,
    t: float,
) -> Path:
    """``<name>.txt`` with ``r re im`` per node plus ``<name>.manifest.json``."""
    target = Path(out_dir)
    target.mkdir(parents=True, exist_ok=True)
    lines = [
        f"{FLOAT_FORMAT % r} {FLOAT_FORMAT % v.real} {FLOAT_FORMAT % v.imag}"
        for r, v in zip(w.nodes, w.values)
    ]
    path = target / f"{name}.txt"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    meta: Mapping[str, Any] = {
        "nu": p.nu,
        "k": p.k,
        "B": p.B,
        "theta": p.theta_cap,
        "dt": dt,
        "t": t,
        "R_max": w.grid.r_max,
        "n_interior": w.grid.n_interior,
    }
    (target / f"{name}.manifest.json").write_text(
        json.dumps(meta, indent=2, ensure_ascii=False), encoding="utf-8"
    )
    return path
