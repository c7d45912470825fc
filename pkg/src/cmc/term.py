from typing import Any, Iterable, Optional, Sequence
import logging

from rich.logging import RichHandler
from rich.console import Console as RichConsole
from rich.table import Table
from rich.progress import (
    BarColumn,
    MofNCompleteColumn,
    Progress,
    SpinnerColumn,
    TextColumn,
    TimeElapsedColumn,
)


class BufferedHandler(RichHandler):
    """A logging handler that holds records back while a progress bar is live."""

    _buffer: list[logging.LogRecord]
    auto_flush: bool = True

    def _get_buffer(self) -> list[logging.LogRecord]:
        if not hasattr(self, "_buffer"):
            self._buffer = []
        return self._buffer

    def emit(self, record: logging.LogRecord) -> None:
        if self.auto_flush:
            super().emit(record)
        else:
            self._get_buffer().append(record)

    def flush(self) -> None:
        for record in self._get_buffer():
            super().emit(record)
        self._get_buffer().clear()


def _cell(value: Any) -> str:
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


class Console:
    """Rich console wrapper: package logging, result tables and run progress."""

    _console: RichConsole
    _progress: Progress
    _handler: BufferedHandler

    def __init__(self) -> None:
        self._console = RichConsole()
        self._handler = BufferedHandler(
            console=self._console,
            show_time=False,
            show_path=False,
        )

    def add_logger(self, logger: logging.Logger, level: Optional[int | str] = None) -> None:
        """Route a logger (and its children) through the buffered handler."""
        for stale in [h for h in logger.handlers if isinstance(h, BufferedHandler)]:
            logger.removeHandler(stale)
        logger.addHandler(self._handler)
        if level is not None:
            logger.setLevel(level)

    @property
    def print(self):
        return self._console.print

    def render_table(
        self,
        columns: Sequence[str],
        rows: Iterable[Sequence[Any]],
        title: Optional[str] = None,
    ) -> None:
        """Render result rows; floats are shown with six significant digits."""
        table = Table(show_header=True, header_style="bold", title=title)
        for name in columns:
            table.add_column(name, justify="right" if name != "method" else "left")
        for row in rows:
            table.add_row(*[_cell(cell) for cell in row])
        self._console.print(table)

    @property
    def progress(self) -> Progress:
        """Progress bar over Monte Carlo runs."""
        if not hasattr(self, "_progress"):
            self._progress = Progress(
                SpinnerColumn("point"),
                TextColumn("[progress.description]{task.description}"),
                BarColumn(),
                MofNCompleteColumn(),
                TimeElapsedColumn(),
                console=self._console,
            )
        return self._progress

    def __enter__(self):
        self._handler.auto_flush = False
        return self

    def __exit__(self, exc_type, exc_value, traceback):
        self._handler.flush()
        self._handler.auto_flush = True
