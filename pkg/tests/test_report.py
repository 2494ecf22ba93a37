"""Tests for report bundles on disk."""

import json

import numpy as np

from tclab.grid import GridFunction, build_grid
from tclab.operators import PhysParams
from tclab.report import (
    ReportBundle,
    format_cell,
    load_bundle,
    read_table,
    write_bundle,
    write_snapshot,
)


def sample_bundle() -> ReportBundle:
    bundle = ReportBundle("demo", manifest={"seed": 7})
    bundle.add_table("series", [{"n": 0, "R_n": 1.0}, {"n": 1, "R_n": 2.718281828459045}])
    bundle.add_table("series", [{"n": 2, "R_n": 7.38905609893065, "note": "late"}])
    bundle.check("A1.first", True, "ok")
    bundle.check("A1.second", False, "gap 1e-3")
    return bundle


class TestFormatting:
    """Cells are written deterministically."""

    def test_cells(self):
        assert format_cell(True) == "true"
        assert format_cell(None) == ""
        assert format_cell(0.1 + 0.2) == "0.3"
        assert format_cell(1e-20) == "1e-20"
        assert format_cell(float("inf")) == "inf"
        assert format_cell(3) == "3"


class TestBundle:
    """Writing and reading report directories."""

    def test_verdicts(self):
        bundle = sample_bundle()
        assert not bundle.passed
        assert bundle.verdict("A1.first").passed

    def test_write_layout(self, tmp_path):
        target = write_bundle(sample_bundle(), tmp_path)
        assert target == tmp_path / "demo"
        names = sorted(p.name for p in target.iterdir())
        assert names == ["manifest.json", "series.csv", "verdicts.csv"]
        manifest = json.loads((target / "manifest.json").read_text(encoding="utf-8"))
        assert manifest["seed"] == 7
        assert manifest["tables"] == ["series"]
        assert manifest["verdict_summary"] == {"passed": 1, "failed": 1}

    def test_union_of_columns(self, tmp_path):
        target = write_bundle(sample_bundle(), tmp_path)
        rows = read_table(target / "series.csv")
        assert list(rows[0]) == ["n", "R_n", "note"]
        assert rows[0]["note"] == ""
        assert rows[2]["R_n"] == "7.38905609893"

    def test_round_trip(self, tmp_path):
        loaded = load_bundle(write_bundle(sample_bundle(), tmp_path))
        assert loaded.experiment == "demo"
        assert [v.passed for v in loaded.verdicts] == [True, False]
        assert loaded.verdicts[1].detail == "gap 1e-3"
        assert len(loaded.tables["series"]) == 3

    def test_rewrite_is_identical(self, tmp_path):
        a = write_bundle(sample_bundle(), tmp_path / "a")
        b = write_bundle(sample_bundle(), tmp_path / "b")
        for name in ("series.csv", "verdicts.csv"):
            assert (a / name).read_bytes() == (b / name).read_bytes()


class TestSnapshot:
    """Grid function dumps with a sidecar manifest."""

    def test_snapshot(self, tmp_path):
        g = build_grid(1.0, 2.0, 9)
        w = GridFunction(g, np.arange(9) + 1j)
        path = write_snapshot(tmp_path, "w_final", w, PhysParams(1e-3, 1, 1.0), dt=0.1, t=2.0)
        lines = path.read_text(encoding="utf-8").splitlines()
        assert len(lines) == 9
        assert lines[0].split() == ["1.1", "0", "1"]
        meta = json.loads((tmp_path / "w_final.manifest.json").read_text(encoding="utf-8"))
        assert meta["n_interior"] == 9
        assert meta["t"] == 2.0
