"""Rule catalog and violation lifecycle ingest; per-commit introduction/removal deltas.

A violation is tracked as a lifecycle event: the commit where the analyzer
first reported it (``opened_at``) and, optionally, the commit where it stopped
being reported (``closed_at``). Deltas count openings and closings per
(commit, file, rule).
"""

from __future__ import annotations

import csv
import logging
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

from faultrank.common import InputError
from faultrank.history import CommitRecord

logger = logging.getLogger(__name__)

RULE_KINDS = ("BUG", "CODE_SMELL", "VULNERABILITY")
SEVERITIES = ("BLOCKER", "CRITICAL", "MAJOR", "MINOR", "INFO")


@dataclass(frozen=True, slots=True)
class RuleDescriptor:
    squid: str
    kind: str
    severity: str


@dataclass(frozen=True, slots=True)
class ViolationEvent:
    rule: str
    file: str
    opened_at: str
    closed_at: str | None


@dataclass(frozen=True, slots=True)
class ViolationDelta:
    commit: str
    file: str
    rule: str
    introduced: int
    removed: int

    @property
    def signed(self) -> int:
        return self.introduced - self.removed


def load_rule_catalog(path: str | Path) -> list[RuleDescriptor]:
    """Load ``squid,kind,severity`` rows; duplicate squids and unknown enums are fatal."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read rule catalog {path}: {exc}") from None
    reader = csv.DictReader(text.splitlines())
    required = {"squid", "kind", "severity"}
    if not required.issubset(reader.fieldnames or []):
        raise InputError(f"{path}: expected columns squid,kind,severity")
    rules: list[RuleDescriptor] = []
    seen: set[str] = set()
    for i, row in enumerate(reader, 2):
        squid = row["squid"].strip()
        kind = row["kind"].strip().upper()
        severity = row["severity"].strip().upper()
        if not squid:
            raise InputError(f"{path}:{i}: empty squid")
        if squid in seen:
            raise InputError(f"{path}:{i}: duplicate squid {squid}")
        if kind not in RULE_KINDS:
            raise InputError(f"{path}:{i}: unknown rule kind {kind!r}")
        if severity not in SEVERITIES:
            raise InputError(f"{path}:{i}: unknown severity {severity!r}")
        seen.add(squid)
        rules.append(RuleDescriptor(squid, kind, severity))
    return rules


def load_violation_events(
    path: str | Path, commits: list[CommitRecord]
) -> list[ViolationEvent]:
    """Load ``squid,file,opened_commit,closed_commit`` rows validated against history.

    Events naming unknown commits, or closed before opened in history order,
    are skipped with a warning.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read violations file {path}: {exc}") from None
    order = {c.hash: i for i, c in enumerate(commits)}
    reader = csv.DictReader(text.splitlines())
    required = {"squid", "file", "opened_commit"}
    if not required.issubset(reader.fieldnames or []):
        raise InputError(f"{path}: expected columns squid,file,opened_commit,closed_commit")
    events: list[ViolationEvent] = []
    for i, row in enumerate(reader, 2):
        squid = row["squid"].strip()
        file = row["file"].strip()
        opened = row["opened_commit"].strip()
        closed = (row.get("closed_commit") or "").strip() or None
        if opened not in order:
            logger.warning("%s:%d: unknown opened commit %s; skipping", path, i, opened)
            continue
        if closed is not None:
            if closed not in order:
                logger.warning("%s:%d: unknown closed commit %s; skipping", path, i, closed)
                continue
            if order[closed] <= order[opened]:
                logger.warning(
                    "%s:%d: closed commit %s does not follow opened commit %s; skipping",
                    path, i, closed, opened,
                )
                continue
        events.append(ViolationEvent(squid, file, opened, closed))
    return events


def compute_deltas(events: list[ViolationEvent]) -> list[ViolationDelta]:
    """Count introductions and removals per (commit, file, rule).

    Pure aggregation: output is sorted and independent of event order.
    """
    introduced: Counter[tuple[str, str, str]] = Counter()
    removed: Counter[tuple[str, str, str]] = Counter()
    for ev in events:
        introduced[(ev.opened_at, ev.file, ev.rule)] += 1
        if ev.closed_at is not None:
            removed[(ev.closed_at, ev.file, ev.rule)] += 1
    keys = sorted(set(introduced) | set(removed))
    return [
        ViolationDelta(commit=c, file=f, rule=r, introduced=introduced[(c, f, r)], removed=removed[(c, f, r)])
        for c, f, r in keys
    ]


def write_deltas_csv(path: str | Path, deltas: list[ViolationDelta]) -> None:
    out = ["commit,file,squid,introduced,removed"]
    for d in deltas:
        out.append(f"{d.commit},{d.file},{d.rule},{d.introduced},{d.removed}")
    Path(path).write_text("\n".join(out) + "\n", encoding="utf-8", newline="")


def read_deltas_csv(path: str | Path) -> list[ViolationDelta]:
    text = Path(path).read_text(encoding="utf-8")
    result: list[ViolationDelta] = []
    for i, row in enumerate(csv.DictReader(text.splitlines()), 2):
        try:
            result.append(
                ViolationDelta(
                    commit=row["commit"],
                    file=row["file"],
                    rule=row["squid"],
                    introduced=int(row["introduced"]),
                    removed=int(row["removed"]),
                )
            )
        except (KeyError, ValueError) as exc:
            raise InputError(f"{path}:{i}: bad delta row: {exc}") from None
    return result


def write_rules_csv(path: str | Path, rules: list[RuleDescriptor]) -> None:
    out = ["squid,kind,severity"]
    for r in rules:
        out.append(f"{r.squid},{r.kind},{r.severity}")
    Path(path).write_text("\n".join(out) + "\n", encoding="utf-8", newline="")
