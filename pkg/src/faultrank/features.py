"""Commit-level feature matrix: rule-introduction counts vs fault labels.

Rows are commits in temporal order within each project (projects concatenated
in sorted name order); columns are per-rule introduction counts in catalog
order, fixed across the whole pipeline.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from faultrank.common import InputError
from faultrank.history import CommitRecord
from faultrank.szz import FaultLabel
from faultrank.violations import RuleDescriptor, ViolationDelta

logger = logging.getLogger(__name__)


@dataclass(slots=True)
class FeatureMatrix:
    """N commit rows by P rule columns, with fault labels and row provenance."""

    X: np.ndarray  # (N, P) float64, non-negative integer-valued counts
    y: np.ndarray  # (N,) bool
    columns: tuple[str, ...]  # squids, catalog order
    commit_hashes: tuple[str, ...]
    project_ids: tuple[str, ...]
    timestamps: tuple[int, ...]

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    def projects(self) -> list[str]:
        seen: list[str] = []
        for p in self.project_ids:
            if not seen or seen[-1] != p:
                if p in seen:
                    raise InputError("project rows are not contiguous")
                seen.append(p)
        return seen


def build_feature_matrix(
    commits_by_project: dict[str, list[CommitRecord]],
    deltas: list[ViolationDelta],
    labels: list[FaultLabel],
    catalog: list[RuleDescriptor],
) -> FeatureMatrix:
    """Aggregate per-file deltas up to (commit, rule) introduction counts.

    Every mined commit becomes a row, including commits with no violations.
    Rows are ordered by (timestamp, extraction order) within each project.
    """
    columns = tuple(r.squid for r in catalog)
    col_index = {squid: j for j, squid in enumerate(columns)}
    label_by_hash = {l.commit_hash: l.inducing for l in labels}

    rows: list[tuple[str, str, int]] = []  # (project, hash, timestamp)
    for project in sorted(commits_by_project):
        ordered = sorted(
            enumerate(commits_by_project[project]), key=lambda ic: (ic[1].timestamp, ic[0])
        )
        rows.extend((project, c.hash, c.timestamp) for _, c in ordered)

    row_index = {h: i for i, (_, h, _) in enumerate(rows)}
    X = np.zeros((len(rows), len(columns)), dtype=np.float64)
    skipped_rules: set[str] = set()
    for d in deltas:
        i = row_index.get(d.commit)
        j = col_index.get(d.rule)
        if i is None:
            raise InputError(f"delta references commit {d.commit} outside the mined history")
        if j is None:
            skipped_rules.add(d.rule)
            continue
        X[i, j] += d.introduced
    if skipped_rules:
        logger.warning(
            "ignoring deltas for %d rule(s) not in the catalog: %s",
            len(skipped_rules), ", ".join(sorted(skipped_rules)[:5]),
        )

    y = np.array([label_by_hash.get(h, False) for _, h, _ in rows], dtype=bool)
    return FeatureMatrix(
        X=X,
        y=y,
        columns=columns,
        commit_hashes=tuple(h for _, h, _ in rows),
        project_ids=tuple(p for p, _, _ in rows),
        timestamps=tuple(t for _, _, t in rows),
    )


def write_features_csv(path: str | Path, fm: FeatureMatrix) -> None:
    header = "project,commit,timestamp,label," + ",".join(fm.columns)
    out = [header]
    for i in range(fm.n_rows):
        counts = ",".join(str(int(v)) for v in fm.X[i])
        out.append(
            f"{fm.project_ids[i]},{fm.commit_hashes[i]},{fm.timestamps[i]},{int(fm.y[i])},{counts}"
        )
    Path(path).write_text("\n".join(out) + "\n", encoding="utf-8", newline="")


def read_features_csv(path: str | Path) -> FeatureMatrix:
    text = Path(path).read_text(encoding="utf-8")
    lines = text.splitlines()
    if not lines:
        raise InputError(f"{path}: empty features file")
    reader = csv.reader(lines)
    header = next(reader)
    if header[:4] != ["project", "commit", "timestamp", "label"]:
        raise InputError(f"{path}: unexpected features header")
    columns = tuple(header[4:])
    projects: list[str] = []
    hashes: list[str] = []
    stamps: list[int] = []
    ys: list[bool] = []
    data: list[list[float]] = []
    for row in reader:
        projects.append(row[0])
        hashes.append(row[1])
        stamps.append(int(row[2]))
        ys.append(bool(int(row[3])))
        data.append([float(v) for v in row[4:]])
    X = np.array(data, dtype=np.float64) if data else np.zeros((0, len(columns)))
    return FeatureMatrix(
        X=X,
        y=np.array(ys, dtype=bool),
        columns=columns,
        commit_hashes=tuple(hashes),
        project_ids=tuple(projects),
        timestamps=tuple(stamps),
    )
