"""Tests for the report viewer app."""

from textual.widgets import DataTable, Select

from tclab.report import ReportBundle, load_bundle, write_bundle
from tclab.viewer import ReportViewerApp


def make_bundle() -> ReportBundle:
    bundle = ReportBundle("hardy")
    bundle.add_table("hardy", [{"trial": i, "quotient": 0.5 + i / 10} for i in range(3)])
    bundle.add_table("rho", [{"z": 0.0, "rho": 0.0}])
    bundle.check("A10.hardy", True, "max quotient 0.7")
    bundle.check("A10.rho_range", False, "|rho| <= 1")
    return bundle


class TestReportViewer:
    """Verdicts and tables are shown from a bundle."""

    async def test_mount(self):
        app = ReportViewerApp(make_bundle())
        async with app.run_test() as pilot:
            await pilot.pause()
            assert app.query_one("#verdicts", DataTable).row_count == 2
            table = app.query_one("#table", DataTable)
            assert table.row_count == 3
            assert len(table.columns) == 2

    async def test_switch_table(self):
        app = ReportViewerApp(make_bundle())
        async with app.run_test() as pilot:
            await pilot.pause()
            app.show_table("rho")
            await pilot.pause()
            table = app.query_one("#table", DataTable)
            assert table.row_count == 1
            assert [c.label.plain for c in table.columns.values()] == ["z", "rho"]

    async def test_loaded_bundle(self, tmp_path):
        path = write_bundle(make_bundle(), tmp_path)
        app = ReportViewerApp(load_bundle(path))
        async with app.run_test() as pilot:
            await pilot.pause()
            assert app.query_one("#table-select", Select).value == "hardy"
            assert app.query_one("#verdicts", DataTable).row_count == 2

    async def test_empty_bundle(self):
        app = ReportViewerApp(ReportBundle("empty"))
        async with app.run_test() as pilot:
            await pilot.pause()
            assert app.query_one("#table", DataTable).row_count == 0
