from typing import Optional

import pandas as pd
from rich.console import Console
from rich.panel import Panel
from rich.table import Table

from .manifest import RunManifest


class ConsoleUI:
    """
    Encapsulates all console interactions to separate presentation from logic.
    """
    def __init__(self, console: Optional[Console] = None):
        self.console = console or Console()

    def print(self, *args, **kwargs):
        """Wrapper for direct console print (use sparingly)."""
        self.console.print(*args, **kwargs)

    def print_success(self, message: str):
        self.console.print(f"[green bold]{message}[/]")

    def print_error(self, message: str):
        self.console.print(f"[red bold]{message}[/]")

    def print_warning(self, message: str):
        self.console.print(f"[yellow bold]{message}[/]")

    def print_info(self, message: str):
        self.console.print(f"[blue]{message}[/]")

    def display_header(self, title: str, style: str = "bold blue"):
        self.console.print(Panel(title, style=style))

    def display_table(self, frame: pd.DataFrame, title: str, max_rows: int = 25):
        table = Table(title=title, show_lines=False)
        for column in frame.columns:
            table.add_column(str(column), justify="right" if pd.api.types.is_numeric_dtype(frame[column]) else "left")
        for row in frame.head(max_rows).itertuples(index=False):
            table.add_row(*[f"{v:.6g}" if isinstance(v, float) else str(v) for v in row])
        self.console.print(table)
        if len(frame) > max_rows:
            self.print_info(f"... {len(frame) - max_rows} more rows")

    def display_manifest(self, manifest: RunManifest, out_dir: str):
        lines = [
            f"[bold]Command:[/][blue] {manifest.command}[/]",
            f"[bold]Seed:[/][blue] {manifest.seed}[/]",
            f"[bold]Version:[/][blue] {manifest.version}[/]",
            f"[bold]Duration:[/][blue] {manifest.duration_seconds:.2f}s[/]",
            f"[bold]Outputs:[/][blue] {', '.join(manifest.outputs)}[/]",
        ]
        self.console.print(Panel("\n".join(lines), title=f"Run written to {out_dir}", border_style="green"))
