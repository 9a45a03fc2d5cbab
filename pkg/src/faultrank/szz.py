"""Fault-inducing commit identification: blame the lines a fix deletes.

For every fault-fixing commit, each non-blank, non-comment line deleted by the
fix is blamed at the fix's first parent; the blamed commits are candidates.
Candidates newer than the issue's creation date are kept for audit but marked
``date_filtered`` and never contribute to labels.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

from faultrank.common import FaultrankError, InputError
from faultrank.history import CommitRecord, History
from faultrank.issues import IssueRecord

logger = logging.getLogger(__name__)

_COMMENT_PREFIXES = ("//", "/*", "*")


@dataclass(frozen=True, slots=True)
class InducingCandidate:
    """One blamed (fix, file, line) -> inducing commit result."""

    issue_key: str
    fix_commit: str
    inducing_commit: str
    file: str
    line: int
    date_filtered: bool


@dataclass(frozen=True, slots=True)
class FaultLabel:
    commit_hash: str
    inducing: bool
    issue_keys: tuple[str, ...]


def is_cosmetic_line(text: str) -> bool:
    """Blank lines and comment-only lines are excluded from blame (SZZ noise)."""
    stripped = text.strip()
    if not stripped:
        return True
    return any(stripped.startswith(p) for p in _COMMENT_PREFIXES)


def identify_inducing(
    fix: CommitRecord, issue: IssueRecord, history: History
) -> list[InducingCandidate]:
    """Blame each substantive line deleted by ``fix`` at its first parent.

    Returns one candidate per (file, inducing commit), keeping the lowest
    blamed line; results are sorted by (file, line) for stable output.
    """
    if not fix.parents:
        logger.warning(
            "fix %s for %s is a root commit; nothing to blame", fix.hash, issue.key
        )
        return []
    parent = fix.parents[0]
    found: dict[tuple[str, str], InducingCandidate] = {}
    for diff in fix.diffs:
        if diff.old_path is None:
            continue
        for line_no, text in diff.deleted:
            if is_cosmetic_line(text):
                continue
            inducing = history.line_blame(diff.old_path, line_no, at=parent)
            key = (diff.old_path, inducing)
            if key in found and found[key].line <= line_no:
                continue
            filtered = history.get(inducing).timestamp > issue.created
            found[key] = InducingCandidate(
                issue_key=issue.key,
                fix_commit=fix.hash,
                inducing_commit=inducing,
                file=diff.old_path,
                line=line_no,
                date_filtered=filtered,
            )
    return sorted(found.values(), key=lambda c: (c.file, c.line, c.inducing_commit))


def label_commits(
    commits: list[CommitRecord], candidates: list[InducingCandidate]
) -> list[FaultLabel]:
    """Label every commit: inducing iff it has >=1 non-date-filtered candidate."""
    known = {c.hash for c in commits}
    induced: dict[str, set[str]] = {}
    for cand in candidates:
        if cand.inducing_commit not in known:
            raise FaultrankError(
                f"candidate references unknown commit {cand.inducing_commit}"
            )
        if cand.date_filtered:
            continue
        induced.setdefault(cand.inducing_commit, set()).add(cand.issue_key)
    return [
        FaultLabel(
            commit_hash=c.hash,
            inducing=c.hash in induced,
            issue_keys=tuple(sorted(induced.get(c.hash, ()))),
        )
        for c in commits
    ]


# --- CSV serialization --------------------------------------------------------


def write_candidates_csv(path: str | Path, candidates: list[InducingCandidate]) -> None:
    out = ["issue_key,fix_commit,inducing_commit,file,line,date_filtered"]
    for c in candidates:
        out.append(
            f"{c.issue_key},{c.fix_commit},{c.inducing_commit},{c.file},{c.line},{int(c.date_filtered)}"
        )
    Path(path).write_text("\n".join(out) + "\n", encoding="utf-8", newline="")


def read_candidates_csv(path: str | Path) -> list[InducingCandidate]:
    text = Path(path).read_text(encoding="utf-8")
    result: list[InducingCandidate] = []
    for i, row in enumerate(csv.DictReader(text.splitlines()), 2):
        try:
            result.append(
                InducingCandidate(
                    issue_key=row["issue_key"],
                    fix_commit=row["fix_commit"],
                    inducing_commit=row["inducing_commit"],
                    file=row["file"],
                    line=int(row["line"]),
                    date_filtered=bool(int(row["date_filtered"])),
                )
            )
        except (KeyError, ValueError) as exc:
            raise InputError(f"{path}:{i}: bad candidate row: {exc}") from None
    return result


def write_labels_csv(path: str | Path, labels: list[FaultLabel]) -> None:
    out = ["commit_hash,inducing,issue_keys"]
    for lab in labels:
        out.append(f"{lab.commit_hash},{int(lab.inducing)},{';'.join(lab.issue_keys)}")
    Path(path).write_text("\n".join(out) + "\n", encoding="utf-8", newline="")


def read_labels_csv(path: str | Path) -> list[FaultLabel]:
    text = Path(path).read_text(encoding="utf-8")
    result: list[FaultLabel] = []
    for i, row in enumerate(csv.DictReader(text.splitlines()), 2):
        try:
            keys = tuple(k for k in row["issue_keys"].split(";") if k)
            result.append(FaultLabel(row["commit_hash"], bool(int(row["inducing"])), keys))
        except (KeyError, ValueError) as exc:
            raise InputError(f"{path}:{i}: bad label row: {exc}") from None
    return result
