from __future__ import annotations

import csv
import io
from abc import ABC, abstractmethod
from typing import Protocol, Sequence

__all__ = ("CsvFormatter", "FormattableProtocol", "FormatterABC", "ReportFormatter")


class FormattableProtocol(Protocol):
    def to_format_dict(self) -> dict[str, str | None]:
        """Return a dict for use with Formatter."""
        ...


class FormatterABC(ABC):
    @abstractmethod
    def format(self) -> str:
        """Format the models."""


class CsvFormatter(FormatterABC):
    def __init__(self, models: Sequence[FormattableProtocol], *, header: Sequence[str] | None = None) -> None:
        """Initialize the formatter.

        Args:
            models: Rows that implement FormattableProtocol.
            header: Column order; defaults to the keys of the first row.
        """
        self.rows = [model.to_format_dict() for model in models]
        self.header = list(header) if header else list(self.rows[0]) if self.rows else []

    def format(self) -> str:
        """Comma separated rows under one header line.

        Returns:
            str: The CSV text, newline terminated.
        """
        buffer = io.StringIO()
        writer = csv.DictWriter(buffer, fieldnames=self.header, lineterminator="\n", extrasaction="ignore")
        writer.writeheader()
        for row in self.rows:
            writer.writerow({k: "" if v is None else v for k, v in row.items()})
        return buffer.getvalue()


class ReportFormatter(FormatterABC):
    def __init__(
        self,
        models: Sequence[FormattableProtocol],
        *,
        title: str,
        primary_character: str = "┣",
        secondary_character: str = "┗",
    ) -> None:
        """Initialize the formatter.

        Args:
            models: One entry per report line; "name" labels the line, other keys follow it.
            title: First line of the report.
            primary_character: Prefix for every line but the last.
            secondary_character: Prefix for the last line.
        """
        self.title = title
        self.values = [model.to_format_dict() for model in models]
        self._primary_character = primary_character
        self._secondary_character = secondary_character

    def format(self) -> str:
        """Tree-style report, skipping empty values.

        Returns:
            str: The formatted report.
        """
        res = f"{self.title}\n"
        for i, values in enumerate(self.values):
            char = self._primary_character if i + 1 < len(self.values) else self._secondary_character
            name = values.get("name") or ""
            rest = " ".join(f"{k}={v}" for k, v in values.items() if k != "name" and v not in (None, ""))
            res += f"{char} {name} {rest}\n"
        return res
