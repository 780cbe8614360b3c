from __future__ import annotations

import csv
from pathlib import Path

from matchaudit.audit import Correspondence, Workload
from matchaudit.ingest import GroupEncoding


def enc(size: int, *indices: int) -> GroupEncoding:
    return GroupEncoding.from_indices(size, indices)


def make_correspondence(size, left_bits, right_bits, h, y, score=0.5, n=0) -> Correspondence:
    return Correspondence(
        left_id=f"l{n}",
        right_id=f"r{n}",
        left_enc=enc(size, *left_bits),
        right_enc=enc(size, *right_bits),
        predicted=h,
        truth=y,
        score=score,
    )


def make_workload(size, rows, matcher_id="m", tau=0.5) -> Workload:
    """rows: iterable of (left_bits, right_bits, h, y)."""
    correspondences = tuple(
        make_correspondence(size, lb, rb, h, y, n=i) for i, (lb, rb, h, y) in enumerate(rows)
    )
    return Workload(matcher_id=matcher_id, threshold=tau, correspondences=correspondences)


def write_csv(path: Path, header, rows) -> Path:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    return Path(path)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    rows = []
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            if "test_acceptance" in rep.nodeid and rep.when == "call":
                rows.append((rep.nodeid.split("::")[-1], outcome))
    if rows:
        terminalreporter.write_sep("=", "acceptance criteria")
        for label, outcome in sorted(rows):
            terminalreporter.write_line(
                f"[{'PASS' if outcome == 'passed' else 'FAIL'}] {label}"
            )
