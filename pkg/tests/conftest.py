from __future__ import annotations

import os
import subprocess
from pathlib import Path

import pytest


class RepoBuilder:
    """Scripts tiny deterministic git repositories for tests.

    Commit timestamps are supplied explicitly so extraction order and SZZ
    date filtering are reproducible.
    """

    def __init__(self, root: Path) -> None:
        self.root = root
        self.root.mkdir(parents=True, exist_ok=True)
        self._git("init", "-q", "-b", "main")
        self.clock = 1_000_000

    def _git(self, *args: str, ts: int | None = None) -> str:
        env = dict(os.environ)
        env.update(
            {
                "GIT_AUTHOR_NAME": "Tester",
                "GIT_AUTHOR_EMAIL": "tester@example.com",
                "GIT_COMMITTER_NAME": "Tester",
                "GIT_COMMITTER_EMAIL": "tester@example.com",
                "GIT_CONFIG_GLOBAL": "/dev/null",
                "GIT_CONFIG_SYSTEM": "/dev/null",
            }
        )
        if ts is not None:
            env["GIT_AUTHOR_DATE"] = f"@{ts} +0000"
            env["GIT_COMMITTER_DATE"] = f"@{ts} +0000"
        proc = subprocess.run(
            ["git", "-C", str(self.root), *args],
            capture_output=True,
            text=True,
            env=env,
        )
        if proc.returncode != 0:
            raise RuntimeError(f"git {' '.join(args)} failed: {proc.stderr}")
        return proc.stdout

    def write(self, path: str, content: str) -> None:
        p = self.root / path
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(content, encoding="utf-8")

    def write_bytes(self, path: str, content: bytes) -> None:
        p = self.root / path
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_bytes(content)

    def remove(self, path: str) -> None:
        (self.root / path).unlink()

    def move(self, old: str, new: str) -> None:
        dest = self.root / new
        dest.parent.mkdir(parents=True, exist_ok=True)
        (self.root / old).rename(dest)

    def commit(self, message: str, ts: int | None = None) -> str:
        """Stage everything and commit at the given (or next) timestamp; returns the hash."""
        if ts is None:
            self.clock += 100
            ts = self.clock
        else:
            self.clock = max(self.clock, ts)
        self._git("add", "-A")
        self._git("commit", "-q", "--allow-empty", "-m", message, ts=ts)
        return self._git("rev-parse", "HEAD").strip()

    def file_lines(self, path: str, at: str) -> list[str]:
        out = subprocess.run(
            ["git", "-C", str(self.root), "show", f"{at}:{path}"],
            capture_output=True,
        )
        if out.returncode != 0:
            raise RuntimeError(out.stderr.decode())
        data = out.stdout
        if not data:
            return []
        lines = data.decode("utf-8", errors="replace").split("\n")
        if lines and lines[-1] == "":
            lines.pop()
        return lines


@pytest.fixture
def repo(tmp_path: Path) -> RepoBuilder:
    return RepoBuilder(tmp_path / "repo")


@pytest.fixture
def make_repo(tmp_path: Path):
    counter = {"n": 0}

    def _make() -> RepoBuilder:
        counter["n"] += 1
        return RepoBuilder(tmp_path / f"repo{counter['n']}")

    return _make
