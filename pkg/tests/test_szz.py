from __future__ import annotations

import pytest

from faultrank.common import FaultrankError
from faultrank.history import History, extract_history
from faultrank.issues import IssueRecord
from faultrank.szz import (
    FaultLabel,
    InducingCandidate,
    identify_inducing,
    is_cosmetic_line,
    label_commits,
    read_candidates_csv,
    read_labels_csv,
    write_candidates_csv,
    write_labels_csv,
)


def _issue(key="PRJ-1", created=2500.0):
    return IssueRecord(key=key, kind="BUG", created=created, resolved=created + 1000, resolution="Fixed")


def test_cosmetic_line_filter():
    assert is_cosmetic_line("")
    assert is_cosmetic_line("   ")
    assert is_cosmetic_line("  // comment")
    assert is_cosmetic_line("/* block */")
    assert is_cosmetic_line(" * javadoc line")
    assert is_cosmetic_line(" */")
    assert not is_cosmetic_line("int x = 1; // trailing comment")
    assert not is_cosmetic_line("return null;")


class TestIdentifyInducing:
    def test_planted_bug_is_recovered(self, repo):
        repo.write("app.java", "line a\nbug here\nline c\n")
        c1 = repo.commit("introduce", ts=1000)
        repo.write("other.java", "noise\n")
        repo.commit("unrelated", ts=2000)
        repo.write("app.java", "line a\nfixed line\nline c\n")
        fix = repo.commit("Fix PRJ-1", ts=3000)

        commits = extract_history(repo.root)
        hist = History(commits)
        cands = identify_inducing(hist.get(fix), _issue(created=2500.0), hist)
        assert len(cands) == 1
        assert cands[0].inducing_commit == c1
        assert cands[0].date_filtered is False
        assert cands[0].file == "app.java"

    def test_fix_with_only_additions_yields_nothing(self, repo):
        repo.write("app.java", "line a\n")
        repo.commit("base", ts=1000)
        repo.write("app.java", "line a\nnew guard\n")
        fix = repo.commit("Fix PRJ-1 by addition", ts=3000)

        hist = History(extract_history(repo.root))
        assert identify_inducing(hist.get(fix), _issue(), hist) == []

    def test_candidate_after_issue_creation_is_date_filtered(self, repo):
        repo.write("app.java", "ok line\n")
        repo.commit("base", ts=1000)
        repo.write("app.java", "bad line\n")
        late = repo.commit("late change", ts=4000)
        repo.write("app.java", "fixed\n")
        fix = repo.commit("Fix PRJ-1", ts=5000)

        hist = History(extract_history(repo.root))
        cands = identify_inducing(hist.get(fix), _issue(created=2500.0), hist)
        assert [c.inducing_commit for c in cands] == [late]
        assert cands[0].date_filtered is True

    def test_comment_and_blank_deletions_ignored(self, repo):
        repo.write("app.java", "// old comment\n\nreal code\n")
        c1 = repo.commit("base", ts=1000)
        repo.write("app.java", "better code\n")
        fix = repo.commit("Fix PRJ-1", ts=3000)

        hist = History(extract_history(repo.root))
        cands = identify_inducing(hist.get(fix), _issue(), hist)
        assert len(cands) == 1
        assert cands[0].line == 3
        assert cands[0].inducing_commit == c1

    def test_root_fix_returns_empty_with_warning(self, repo, caplog):
        repo.write("app.java", "hello\n")
        root = repo.commit("initial is also the fix PRJ-1", ts=1000)
        hist = History(extract_history(repo.root))
        with caplog.at_level("WARNING"):
            assert identify_inducing(hist.get(root), _issue(), hist) == []
        assert "root commit" in caplog.text

    def test_duplicates_collapse_per_file(self, repo):
        repo.write("app.java", "bad one\nbad two\nbad three\n")
        c1 = repo.commit("introduce all", ts=1000)
        repo.write("app.java", "clean\n")
        fix = repo.commit("Fix PRJ-1", ts=3000)

        hist = History(extract_history(repo.root))
        cands = identify_inducing(hist.get(fix), _issue(), hist)
        assert len(cands) == 1
        assert cands[0].inducing_commit == c1
        assert cands[0].line == 1  # lowest blamed line kept

    def test_multi_file_fix_keeps_file_granularity(self, repo):
        repo.write("a.java", "bug a\n")
        repo.write("b.java", "bug b\n")
        c1 = repo.commit("introduce", ts=1000)
        repo.write("a.java", "fixed a\n")
        repo.write("b.java", "fixed b\n")
        fix = repo.commit("Fix PRJ-1", ts=3000)

        hist = History(extract_history(repo.root))
        cands = identify_inducing(hist.get(fix), _issue(), hist)
        assert [(c.file, c.inducing_commit) for c in cands] == [("a.java", c1), ("b.java", c1)]


class TestLabelCommits:
    def _commits(self, repo, n=3):
        for i in range(n):
            repo.write("f.txt", f"v{i}\n")
            repo.commit(f"c{i}", ts=1000 * (i + 1))
        return extract_history(repo.root)

    def test_no_candidates_all_clean(self, repo):
        commits = self._commits(repo)
        labels = label_commits(commits, [])
        assert all(not l.inducing and l.issue_keys == () for l in labels)

    def test_single_candidate_labels_commit(self, repo):
        commits = self._commits(repo)
        cand = InducingCandidate("ABC-1", commits[2].hash, commits[0].hash, "f.txt", 1, False)
        labels = label_commits(commits, [cand])
        by_hash = {l.commit_hash: l for l in labels}
        assert by_hash[commits[0].hash].inducing is True
        assert by_hash[commits[0].hash].issue_keys == ("ABC-1",)
        assert by_hash[commits[1].hash].inducing is False

    def test_two_issues_one_commit(self, repo):
        commits = self._commits(repo)
        cands = [
            InducingCandidate("ABC-1", commits[2].hash, commits[0].hash, "f.txt", 1, False),
            InducingCandidate("ABC-2", commits[2].hash, commits[0].hash, "f.txt", 2, False),
        ]
        labels = label_commits(commits, cands)
        target = next(l for l in labels if l.commit_hash == commits[0].hash)
        assert target.issue_keys == ("ABC-1", "ABC-2")
        assert sum(l.inducing for l in labels) == 1

    def test_date_filtered_candidates_do_not_label(self, repo):
        commits = self._commits(repo)
        cand = InducingCandidate("ABC-1", commits[2].hash, commits[0].hash, "f.txt", 1, True)
        labels = label_commits(commits, [cand])
        assert all(not l.inducing for l in labels)

    def test_unknown_commit_is_fatal(self, repo):
        commits = self._commits(repo)
        cand = InducingCandidate("ABC-1", commits[2].hash, "f" * 40, "f.txt", 1, False)
        with pytest.raises(FaultrankError):
            label_commits(commits, [cand])

    def test_labeling_idempotent_and_order_independent(self, repo):
        commits = self._commits(repo)
        cands = [
            InducingCandidate("ABC-2", commits[2].hash, commits[1].hash, "f.txt", 1, False),
            InducingCandidate("ABC-1", commits[2].hash, commits[0].hash, "f.txt", 1, False),
        ]
        a = label_commits(commits, cands)
        b = label_commits(commits, list(reversed(cands)))
        assert a == b == label_commits(commits, cands + cands)


def test_candidates_csv_round_trip(tmp_path):
    cands = [
        InducingCandidate("A-1", "f" * 40, "e" * 40, "src/x.java", 12, False),
        InducingCandidate("A-2", "d" * 40, "c" * 40, "src/y.java", 3, True),
    ]
    p = tmp_path / "candidates.csv"
    write_candidates_csv(p, cands)
    assert read_candidates_csv(p) == cands


def test_labels_csv_round_trip(tmp_path):
    labels = [
        FaultLabel("a" * 40, True, ("K-1", "K-2")),
        FaultLabel("b" * 40, False, ()),
    ]
    p = tmp_path / "labels.csv"
    write_labels_csv(p, labels)
    assert read_labels_csv(p) == labels
