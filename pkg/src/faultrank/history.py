"""Commit history extraction with line-level diffs, plus line-ancestry (blame) queries.

Reads an on-disk git repository through git plumbing commands (``rev-list``,
``cat-file --batch``, ``diff-tree``) and computes its own line diffs so that
rename handling and blame semantics are fully under this module's control:

- merge commits are diffed against their first parent only;
- renames are detected by line-set content similarity (>= 0.6), below that a
  rename is represented as delete + add;
- binary content never enters the line universe: a binary-to-text transition
  is an add, text-to-binary is a delete, binary-to-binary is invisible.

Blame walks the first-parent chain backwards through the extracted diffs, so
its answers are exactly consistent with the emitted ``FileDiff`` stream.
"""

from __future__ import annotations

import difflib
import heapq
import json
import logging
import subprocess
from bisect import bisect_left
from dataclasses import dataclass, field
from pathlib import Path

from faultrank.common import CorruptObjectError, InputError

logger = logging.getLogger(__name__)

_GITLINK_MODE = "160000"
_BINARY_SNIFF_BYTES = 8000
RENAME_SIMILARITY = 0.6


class PathNotFoundError(InputError):
    """Queried path does not exist (in the line universe) at the given commit."""


class LineRangeError(InputError):
    """Queried line number is outside the file's length at the given commit."""


@dataclass(frozen=True, slots=True)
class FileDiff:
    """Line-level change of one file in one commit, vs the first parent.

    ``old_path`` is None for file creation, ``new_path`` is None for deletion;
    both set (and different) for a rename. ``added`` carries new-file line
    numbers, ``deleted`` old-file line numbers; both strictly increasing.
    """

    old_path: str | None
    new_path: str | None
    added: tuple[tuple[int, str], ...] = ()
    deleted: tuple[tuple[int, str], ...] = ()

    @property
    def path(self) -> str:
        return self.new_path if self.new_path is not None else self.old_path  # type: ignore[return-value]


@dataclass(frozen=True, slots=True)
class CommitRecord:
    """One mined commit: identity, ancestry, metadata and its line diffs."""

    hash: str
    parents: tuple[str, ...]
    author: str
    timestamp: int
    message: str
    diffs: tuple[FileDiff, ...] = ()


def _run_git(repo: str | Path, *args: str) -> bytes:
    proc = subprocess.run(
        ["git", "-C", str(repo), *args],
        capture_output=True,
    )
    if proc.returncode != 0:
        raise InputError(
            f"git {' '.join(args)} failed in {repo}: {proc.stderr.decode('utf-8', 'replace').strip()}"
        )
    return proc.stdout


class _CatFileBatch:
    """Persistent ``git cat-file --batch`` pipe for fast object reads."""

    def __init__(self, repo: str | Path) -> None:
        self._proc = subprocess.Popen(
            ["git", "-C", str(repo), "cat-file", "--batch"],
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
        )

    def get(self, oid: str) -> bytes:
        assert self._proc.stdin is not None and self._proc.stdout is not None
        self._proc.stdin.write(oid.encode("ascii") + b"\n")
        self._proc.stdin.flush()
        header = self._proc.stdout.readline()
        if not header:
            raise CorruptObjectError(oid, "cat-file pipe closed")
        parts = header.decode("ascii", "replace").split()
        if len(parts) < 3 or parts[1] in ("missing", "ambiguous"):
            raise CorruptObjectError(oid)
        size = int(parts[2])
        data = self._proc.stdout.read(size)
        self._proc.stdout.read(1)  # trailing LF
        if len(data) != size:
            raise CorruptObjectError(oid, "truncated object")
        return data

    def close(self) -> None:
        if self._proc.stdin is not None:
            self._proc.stdin.close()
        self._proc.wait()


def _split_lines(data: bytes) -> list[str]:
    """Split blob bytes into newline-terminated lines (decoded, replacement on bad UTF-8)."""
    if not data:
        return []
    lines = data.decode("utf-8", errors="replace").split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    return lines


def _is_binary(data: bytes) -> bool:
    return b"\0" in data[:_BINARY_SNIFF_BYTES]


def _line_diff(old_lines: list[str], new_lines: list[str]) -> tuple[tuple, tuple]:
    sm = difflib.SequenceMatcher(a=old_lines, b=new_lines, autojunk=False)
    added: list[tuple[int, str]] = []
    deleted: list[tuple[int, str]] = []
    for tag, i1, i2, j1, j2 in sm.get_opcodes():
        if tag in ("replace", "delete"):
            deleted.extend((i + 1, old_lines[i]) for i in range(i1, i2))
        if tag in ("replace", "insert"):
            added.extend((j + 1, new_lines[j]) for j in range(j1, j2))
    return tuple(added), tuple(deleted)


def _line_set_similarity(a: list[str], b: list[str]) -> float:
    sa, sb = set(a), set(b)
    if not sa and not sb:
        return 1.0
    if not sa or not sb:
        return 0.0
    return len(sa & sb) / max(len(sa), len(sb))


def _parse_commit_object(oid: str, raw: bytes) -> tuple[tuple[str, ...], str, int]:
    """Extract (parents, author, committer timestamp) from a raw commit object."""
    try:
        header, _ = raw.split(b"\n\n", 1)
    except ValueError:
        header = raw
    parents: list[str] = []
    author = ""
    timestamp = -1
    for line in header.split(b"\n"):
        if line.startswith(b" "):  # continuation (gpgsig)
            continue
        if line.startswith(b"parent "):
            parents.append(line[7:].decode("ascii").strip())
        elif line.startswith(b"author "):
            author = line[7:].rsplit(b">", 1)[0].decode("utf-8", "replace") + ">"
        elif line.startswith(b"committer "):
            fields = line.rsplit(b" ", 2)
            timestamp = int(fields[1])
    if timestamp < 0:
        raise CorruptObjectError(oid, "no committer timestamp")
    return tuple(parents), author, timestamp


def _commit_message(raw: bytes) -> str:
    try:
        _, message = raw.split(b"\n\n", 1)
    except ValueError:
        return ""
    return message.decode("utf-8", errors="replace")


@dataclass(slots=True)
class _RawEntry:
    status: str
    path: str
    old_oid: str
    new_oid: str
    old_mode: str
    new_mode: str


def _parse_diff_tree(output: bytes) -> list[_RawEntry]:
    tokens = output.split(b"\0")
    entries: list[_RawEntry] = []
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if not tok.startswith(b":"):
            i += 1
            continue
        meta = tok[1:].decode("utf-8", "replace").split(" ")
        old_mode, new_mode, old_oid, new_oid, status = meta[0], meta[1], meta[2], meta[3], meta[4]
        path = tokens[i + 1].decode("utf-8", "replace")
        entries.append(_RawEntry(status[0], path, old_oid, new_oid, old_mode, new_mode))
        i += 2
    return entries


def _compute_diffs(entries: list[_RawEntry], cat: _CatFileBatch) -> list[FileDiff]:
    """Turn raw tree-diff entries into FileDiffs with our own rename pairing."""
    adds: list[tuple[str, list[str]]] = []  # (path, lines) — text adds
    dels: list[tuple[str, list[str]]] = []
    mods: list[FileDiff] = []

    for e in entries:
        if _GITLINK_MODE in (e.old_mode, e.new_mode):
            continue
        old_data = cat.get(e.old_oid) if e.status in ("D", "M", "T") else b""
        new_data = cat.get(e.new_oid) if e.status in ("A", "M", "T") else b""
        old_text = e.status in ("D", "M", "T") and not _is_binary(old_data)
        new_text = e.status in ("A", "M", "T") and not _is_binary(new_data)
        if old_text and new_text:
            old_lines, new_lines = _split_lines(old_data), _split_lines(new_data)
            added, deleted = _line_diff(old_lines, new_lines)
            mods.append(FileDiff(e.path, e.path, added, deleted))
        elif old_text:
            dels.append((e.path, _split_lines(old_data)))
        elif new_text:
            adds.append((e.path, _split_lines(new_data)))
        # binary on both sides: invisible to the line universe

    diffs = list(mods)
    # Rename pairing between deleted and added text files, by content similarity.
    pairs: list[tuple[float, str, str, int, int]] = []
    for di, (dpath, dlines) in enumerate(dels):
        for ai, (apath, alines) in enumerate(adds):
            sim = _line_set_similarity(dlines, alines)
            if sim >= RENAME_SIMILARITY:
                pairs.append((-sim, dpath, apath, di, ai))
    pairs.sort()
    used_d: set[int] = set()
    used_a: set[int] = set()
    for _, dpath, apath, di, ai in pairs:
        if di in used_d or ai in used_a:
            continue
        used_d.add(di)
        used_a.add(ai)
        added, deleted = _line_diff(dels[di][1], adds[ai][1])
        diffs.append(FileDiff(dpath, apath, added, deleted))
    for di, (dpath, dlines) in enumerate(dels):
        if di not in used_d:
            deleted = tuple((i + 1, line) for i, line in enumerate(dlines))
            diffs.append(FileDiff(dpath, None, (), deleted))
    for ai, (apath, alines) in enumerate(adds):
        if ai not in used_a:
            added = tuple((i + 1, line) for i, line in enumerate(alines))
            diffs.append(FileDiff(None, apath, added, ()))

    diffs.sort(key=lambda d: (d.path, d.old_path or ""))
    return diffs


def _topo_order(meta: dict[str, tuple[tuple[str, ...], str, int]]) -> list[str]:
    """Deterministic topological order: parents first, ties by (timestamp, hash)."""
    children: dict[str, list[str]] = {h: [] for h in meta}
    indegree: dict[str, int] = {}
    for h, (parents, _, _) in meta.items():
        indegree[h] = len(parents)
        for p in parents:
            children[p].append(h)
    ready = [(meta[h][2], h) for h, d in indegree.items() if d == 0]
    heapq.heapify(ready)
    order: list[str] = []
    while ready:
        _, h = heapq.heappop(ready)
        order.append(h)
        for c in children[h]:
            indegree[c] -= 1
            if indegree[c] == 0:
                heapq.heappush(ready, (meta[c][2], c))
    if len(order) != len(meta):
        raise InputError("commit graph contains a cycle; repository is corrupt")
    return order


def extract_history(repo_path: str | Path, until: float | None = None) -> list[CommitRecord]:
    """Extract the commit history reachable from HEAD, oldest first.

    Commits are ordered topologically (parents before children, ties broken by
    timestamp then hash) and filtered to those with timestamp <= ``until``
    whose ancestors are all retained, so the result is always prefix-closed.
    Merge commits are diffed against their first parent.
    """
    repo = Path(repo_path)
    try:
        _run_git(repo, "rev-parse", "--git-dir")
    except InputError as exc:
        raise InputError(f"not a readable git repository: {repo}") from exc

    head = subprocess.run(
        ["git", "-C", str(repo), "rev-parse", "--verify", "-q", "HEAD"],
        capture_output=True,
    )
    if head.returncode != 0:
        return []  # no commits yet

    hashes = _run_git(repo, "rev-list", "HEAD").decode("ascii").split()
    cat = _CatFileBatch(repo)
    try:
        meta: dict[str, tuple[tuple[str, ...], str, int]] = {}
        raw_objects: dict[str, bytes] = {}
        for h in hashes:
            raw = cat.get(h)
            raw_objects[h] = raw
            meta[h] = _parse_commit_object(h, raw)

        order = _topo_order(meta)

        kept: set[str] = set()
        for h in order:
            parents, _, ts = meta[h]
            if (until is None or ts <= until) and all(p in kept for p in parents):
                kept.add(h)

        empty_tree = _run_git(repo, "hash-object", "-t", "tree", "/dev/null").decode("ascii").strip()
        records: list[CommitRecord] = []
        for h in order:
            if h not in kept:
                continue
            parents, author, ts = meta[h]
            base = parents[0] if parents else empty_tree
            out = _run_git(repo, "diff-tree", "-r", "-z", "--no-renames", base, h)
            diffs = _compute_diffs(_parse_diff_tree(out), cat)
            records.append(
                CommitRecord(
                    hash=h,
                    parents=parents,
                    author=author,
                    timestamp=ts,
                    message=_commit_message(raw_objects[h]),
                    diffs=tuple(diffs),
                )
            )
    finally:
        cat.close()
    logger.info("extracted %d commits from %s", len(records), repo)
    return records


class History:
    """Indexed view over an extracted history, answering blame queries.

    Built from CommitRecords only, so it works identically on mined and
    synthetic histories. All queries are read-only and thread-safe after
    construction.
    """

    def __init__(self, commits: list[CommitRecord]) -> None:
        self._commits = list(commits)
        self._by_hash: dict[str, CommitRecord] = {}
        self._diff_by_new: dict[str, dict[str, FileDiff]] = {}
        self._diff_by_old: dict[str, dict[str, FileDiff]] = {}
        for c in commits:
            if c.hash in self._by_hash:
                raise InputError(f"duplicate commit hash {c.hash}")
            self._by_hash[c.hash] = c
            self._diff_by_new[c.hash] = {d.new_path: d for d in c.diffs if d.new_path is not None}
            self._diff_by_old[c.hash] = {d.old_path: d for d in c.diffs if d.old_path is not None}
        self._length_cache: dict[tuple[str, str], int | None] = {}

    def __len__(self) -> int:
        return len(self._commits)

    @property
    def commits(self) -> list[CommitRecord]:
        return self._commits

    def get(self, commit_hash: str) -> CommitRecord:
        try:
            return self._by_hash[commit_hash]
        except KeyError:
            raise InputError(f"unknown commit {commit_hash}") from None

    def __contains__(self, commit_hash: str) -> bool:
        return commit_hash in self._by_hash

    def file_length_at(self, at: str, path: str) -> int | None:
        """Line count of ``path`` at commit ``at``, or None if absent (or binary)."""
        key = (at, path)
        if key in self._length_cache:
            return self._length_cache[key]
        chain: list[FileDiff] = []
        cur_path = path
        c = self.get(at)
        length: int | None = None
        while True:
            d = self._diff_by_new[c.hash].get(cur_path)
            if d is not None:
                chain.append(d)
                if d.old_path is None:
                    length = 0
                    for link in reversed(chain):
                        length += len(link.added) - len(link.deleted)
                    break
                cur_path = d.old_path
            elif cur_path in self._diff_by_old[c.hash]:
                break  # deleted or renamed away here: absent at `at`
            if not c.parents:
                break
            c = self._by_hash[c.parents[0]]
        self._length_cache[key] = length
        return length

    def line_blame(self, path: str, line: int, at: str) -> str:
        """Hash of the most recent commit at or before ``at`` that added or last
        modified the given line (old-file numbering of ``at``'s content).

        Follows renames along the first-parent chain.
        """
        length = self.file_length_at(at, path)
        if length is None:
            raise PathNotFoundError(f"{path} does not exist at {at}")
        if not 1 <= line <= length:
            raise LineRangeError(f"line {line} out of range 1..{length} for {path} at {at}")

        cur_path, cur_line = path, line
        c = self.get(at)
        while True:
            d = self._diff_by_new[c.hash].get(cur_path)
            if d is not None:
                if d.old_path is None:
                    return c.hash
                added_nums = [n for n, _ in d.added]
                pos = bisect_left(added_nums, cur_line)
                if pos < len(added_nums) and added_nums[pos] == cur_line:
                    return c.hash
                rank = cur_line - pos  # rank among non-added new lines
                old_line = rank
                for dnum, _ in d.deleted:
                    if dnum <= old_line:
                        old_line += 1
                    else:
                        break
                cur_line = old_line
                cur_path = d.old_path
            if not c.parents:
                return c.hash
            c = self._by_hash[c.parents[0]]

    def snapshot(self, at: str) -> dict[str, list[str]]:
        """Reconstruct every file's lines at ``at`` by replaying diffs from the root."""
        chain: list[CommitRecord] = []
        c = self.get(at)
        while True:
            chain.append(c)
            if not c.parents:
                break
            c = self._by_hash[c.parents[0]]
        files: dict[str, list[str]] = {}
        for commit in reversed(chain):
            _apply_commit(files, commit.diffs)
        return files


def _apply_commit(files: dict[str, list[str]], diffs: tuple[FileDiff, ...]) -> None:
    stash: dict[int, list[str]] = {}
    for i, d in enumerate(diffs):
        if d.old_path is not None:
            stash[i] = files.pop(d.old_path, [])
    for i, d in enumerate(diffs):
        if d.new_path is None:
            continue
        old = stash.get(i, [])
        deleted_at = {n for n, _ in d.deleted}
        kept = [line for j, line in enumerate(old, 1) if j not in deleted_at]
        new: list[str] = []
        ki = 0
        add_iter = iter(d.added)
        next_add = next(add_iter, None)
        pos = 1
        while next_add is not None or ki < len(kept):
            if next_add is not None and next_add[0] == pos:
                new.append(next_add[1])
                next_add = next(add_iter, None)
            else:
                new.append(kept[ki])
                ki += 1
            pos += 1
        files[d.new_path] = new


# --- JSONL serialization ----------------------------------------------------


def commit_to_dict(c: CommitRecord) -> dict:
    return {
        "hash": c.hash,
        "parents": list(c.parents),
        "author": c.author,
        "timestamp": c.timestamp,
        "message": c.message,
        "diffs": [
            {
                "old_path": d.old_path,
                "new_path": d.new_path,
                "added": [[n, t] for n, t in d.added],
                "deleted": [[n, t] for n, t in d.deleted],
            }
            for d in c.diffs
        ],
    }


def commit_from_dict(obj: dict) -> CommitRecord:
    return CommitRecord(
        hash=obj["hash"],
        parents=tuple(obj["parents"]),
        author=obj["author"],
        timestamp=int(obj["timestamp"]),
        message=obj["message"],
        diffs=tuple(
            FileDiff(
                old_path=d["old_path"],
                new_path=d["new_path"],
                added=tuple((int(n), t) for n, t in d["added"]),
                deleted=tuple((int(n), t) for n, t in d["deleted"]),
            )
            for d in obj["diffs"]
        ),
    )


def write_commits_jsonl(path: str | Path, commits: list[CommitRecord], project: str | None = None) -> None:
    """One JSON object per commit, LF-terminated; ``project`` is added when given."""
    out: list[str] = []
    for c in commits:
        obj = commit_to_dict(c)
        if project is not None:
            obj["project"] = project
        out.append(json.dumps(obj, ensure_ascii=False, sort_keys=True))
    Path(path).write_text("\n".join(out) + ("\n" if out else ""), encoding="utf-8", newline="")


def read_commits_jsonl(path: str | Path) -> list[tuple[str | None, CommitRecord]]:
    """Read (project, CommitRecord) pairs; project is None when the field is absent."""
    records: list[tuple[str | None, CommitRecord]] = []
    text = Path(path).read_text(encoding="utf-8")
    for i, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}:{i}: bad JSON: {exc}") from None
        records.append((obj.get("project"), commit_from_dict(obj)))
    return records
