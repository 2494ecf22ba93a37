"""Terminal viewer for report bundles written by ``tclab``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from textual.app import App, ComposeResult
from textual.binding import Binding
from textual.containers import Vertical
from textual.widgets import DataTable, Footer, Header, Select, Static

from .report import ReportBundle, load_bundle


class ReportViewerApp(App):
    """Verdicts on top, one selectable data table below."""

    TITLE = "tclab report"
    ENABLE_COMMAND_PALETTE = False
    BINDINGS = [Binding("q", "quit", "Quit")]
    DEFAULT_CSS = """
    #verdicts { height: auto; max-height: 40%; }
    #table-title { padding: 0 1; }
    #table { height: 1fr; }
    """

    def __init__(self, bundle: ReportBundle, **kwargs) -> None:
        super().__init__(**kwargs)
        self.bundle = bundle

    def compose(self) -> ComposeResult:
        yield Header()
        with Vertical():
            yield Static(self._summary(), id="summary")
            yield DataTable(id="verdicts", zebra_stripes=True)
            names = sorted(self.bundle.tables)
            yield Select(
                [(name, name) for name in names],
                value=names[0] if names else Select.NULL,
                allow_blank=not names,
                id="table-select",
            )
            yield Static("", id="table-title")
            yield DataTable(id="table", zebra_stripes=True)
        yield Footer()

    def _summary(self) -> str:
        passed = sum(v.passed for v in self.bundle.verdicts)
        total = len(self.bundle.verdicts)
        return f"[b]{self.bundle.experiment}[/b]  {passed}/{total} verdicts pass"

    def on_mount(self) -> None:
        self.sub_title = self.bundle.experiment
        verdicts = self.query_one("#verdicts", DataTable)
        verdicts.add_columns("assertion", "result", "detail")
        for v in self.bundle.verdicts:
            verdicts.add_row(v.assertion, "PASS" if v.passed else "FAIL", v.detail)
        if self.bundle.tables:
            self.show_table(sorted(self.bundle.tables)[0])

    def show_table(self, name: str) -> None:
        rows = self.bundle.tables.get(name, [])
        table = self.query_one("#table", DataTable)
        table.clear(columns=True)
        self.query_one("#table-title", Static).update(f"[b]{name}[/b] ({len(rows)} rows)")
        if not rows:
            return
        columns = list(rows[0])
        table.add_columns(*columns)
        for row in rows:
            table.add_row(*(str(row.get(c, "")) for c in columns))

    def on_select_changed(self, event: Select.Changed) -> None:
        if event.value is not Select.NULL:
            self.show_table(str(event.value))


def main() -> None:
    parser = argparse.ArgumentParser(
        prog="tclab-view",
        description="Browse a tclab report directory",
    )
    parser.add_argument("report", help="report directory (contains manifest.json)")
    args = parser.parse_args()

    path = Path(args.report)
    if not (path / "manifest.json").exists():
        print(f"tclab-view: {path}: no manifest.json", file=sys.stderr)
        sys.exit(1)
    ReportViewerApp(load_bundle(path)).run()


if __name__ == "__main__":
    main()
