"""Shared plumbing: error types, timestamp parsing, atomic file writes, logging."""

from __future__ import annotations

import logging
import os
from datetime import datetime, timezone
from pathlib import Path

LOG_LEVELS = {
    "error": logging.ERROR,
    "warn": logging.WARNING,
    "info": logging.INFO,
    "debug": logging.DEBUG,
}


class FaultrankError(Exception):
    """Base for all errors raised by this package."""


class InputError(FaultrankError):
    """Bad user input: missing files, malformed data, invalid config. Exit code 1."""


class CorruptObjectError(InputError):
    """A repository object could not be read; carries the offending object id."""

    def __init__(self, oid: str, detail: str = "") -> None:
        self.oid = oid
        msg = f"corrupt or missing object {oid}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


def configure_logging(level_name: str | None = None) -> None:
    """Configure root logging from FAULTRANK_LOG (error|warn|info|debug)."""
    name = (level_name or os.environ.get("FAULTRANK_LOG") or "info").lower()
    if name not in LOG_LEVELS:
        raise InputError(f"unknown log level {name!r}; expected one of {sorted(LOG_LEVELS)}")
    logging.basicConfig(
        level=LOG_LEVELS[name],
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


def parse_timestamp(value: str | int | float) -> float:
    """Parse an epoch-seconds number or an ISO-8601 string into UTC epoch seconds.

    Naive ISO timestamps are interpreted as UTC; a trailing 'Z' is accepted.
    """
    if isinstance(value, (int, float)):
        return float(value)
    text = value.strip()
    if not text:
        raise ValueError("empty timestamp")
    try:
        return float(text)
    except ValueError:
        pass
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.timestamp()


def atomic_write_text(path: str | Path, content: str) -> None:
    """Write via a .partial sibling and rename, so a crash leaves no half-final file."""
    path = Path(path)
    partial = path.with_name(path.name + ".partial")
    partial.write_text(content, encoding="utf-8", newline="")
    os.replace(partial, path)
