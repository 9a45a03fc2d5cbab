"""Issue-tracker ingest and fault-report-to-fixing-commit linking."""

from __future__ import annotations

import csv
import json
import logging
import re
from dataclasses import dataclass
from pathlib import Path

from faultrank.common import InputError, parse_timestamp
from faultrank.history import CommitRecord

logger = logging.getLogger(__name__)

ISSUE_KEY_RE = re.compile(r"[A-Z][A-Z0-9]*-[0-9]+")
_FIELDS = ("key", "kind", "created", "resolved", "resolution")


@dataclass(frozen=True, slots=True)
class IssueRecord:
    """One tracker issue. ``kind`` is BUG or OTHER; timestamps are UTC epoch seconds."""

    key: str
    kind: str
    created: float
    resolved: float | None
    resolution: str


@dataclass(frozen=True, slots=True)
class FixLink:
    """A fixed bug report and the commits whose messages reference it."""

    issue_key: str
    fix_commits: tuple[str, ...]


def _record_from_row(row: dict, where: str) -> IssueRecord:
    key = str(row.get("key", "")).strip()
    if not ISSUE_KEY_RE.fullmatch(key):
        raise ValueError(f"bad issue key {key!r}")
    kind = "BUG" if str(row.get("kind", "")).strip().upper() == "BUG" else "OTHER"
    created = parse_timestamp(row["created"])
    resolved_raw = row.get("resolved")
    resolved = None
    if resolved_raw is not None and str(resolved_raw).strip() != "":
        resolved = parse_timestamp(resolved_raw)
        if resolved < created:
            raise ValueError(f"resolved {resolved} precedes created {created}")
    resolution = str(row.get("resolution", "") or "").strip()
    return IssueRecord(key, kind, created, resolved, resolution)


def parse_issues(path: str | Path) -> list[IssueRecord]:
    """Parse a CSV or JSON issue export; malformed rows are logged and skipped."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read issues file {path}: {exc}") from None

    rows: list[tuple[int, dict]]
    if path.suffix.lower() == ".json" or text.lstrip().startswith("["):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}: invalid JSON: {exc}") from None
        if not isinstance(data, list):
            raise InputError(f"{path}: expected a JSON array of issue objects")
        rows = [(i, obj) for i, obj in enumerate(data, 1)]
    else:
        reader = csv.DictReader(text.splitlines())
        missing = [f for f in _FIELDS if f not in (reader.fieldnames or [])]
        if missing:
            raise InputError(f"{path}: missing columns {missing}")
        rows = [(i, row) for i, row in enumerate(reader, 2)]  # header is line 1

    issues: list[IssueRecord] = []
    for lineno, row in rows:
        try:
            issues.append(_record_from_row(row, f"{path}:{lineno}"))
        except (ValueError, KeyError, TypeError) as exc:
            logger.warning("%s:%d: skipping malformed issue row: %s", path, lineno, exc)
    return issues


def link_fixes(commits: list[CommitRecord], issues: list[IssueRecord]) -> list[FixLink]:
    """Link each fixed BUG issue to all commits naming its key (word-boundary, case-sensitive).

    Issues without any matching commit are omitted; output is sorted by key.
    """
    links: list[FixLink] = []
    candidates = [i for i in issues if i.kind == "BUG" and i.resolution == "Fixed"]
    for issue in candidates:
        pattern = re.compile(r"\b" + re.escape(issue.key) + r"\b")
        matched = sorted({c.hash for c in commits if pattern.search(c.message)})
        if matched:
            links.append(FixLink(issue.key, tuple(matched)))
    links.sort(key=lambda l: l.issue_key)
    return links


def write_fixlinks_csv(path: str | Path, links: list[FixLink]) -> None:
    out = ["issue_key,commit_hash"]
    for link in links:
        for h in link.fix_commits:
            out.append(f"{link.issue_key},{h}")
    Path(path).write_text("\n".join(out) + "\n", encoding="utf-8", newline="")


def read_fixlinks_csv(path: str | Path) -> list[FixLink]:
    text = Path(path).read_text(encoding="utf-8")
    by_key: dict[str, list[str]] = {}
    for i, row in enumerate(csv.DictReader(text.splitlines()), 2):
        try:
            by_key.setdefault(row["issue_key"], []).append(row["commit_hash"])
        except KeyError:
            raise InputError(f"{path}:{i}: expected issue_key,commit_hash") from None
    return [FixLink(k, tuple(sorted(set(v)))) for k, v in sorted(by_key.items())]
