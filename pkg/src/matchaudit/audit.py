"""Workloads, per-group confusion counting, fairness measures, disparities.

A correspondence is one evaluated pair. Under the single paradigm it counts
once toward every subgroup either entity belongs to; under the pairwise
paradigm it counts once toward every unordered subgroup pair covered by the
two entities. Disparities are one-sided: groups at or above the overall
value score zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .ingest import PAIRWISE, SINGLE, Dataset, GroupEncoding, LabeledPairSet, Subgroup
from .matchers import ScoreTable

SUBTRACTION = "subtraction"
DIVISION = "division"

DEFAULT_FAIRNESS_THRESHOLD = 0.2
DEFAULT_MIN_SUPPORT = 10

ANNOTATION_LOW_SUPPORT = "low-support"
ANNOTATION_UNDEFINED = "undefined-measure"
ANNOTATION_UNDEFINED_DIVISION = "undefined-division"


@dataclass(frozen=True)
class MeasureSpec:
    """A fairness measure as a conditional-probability event pair."""

    measure_id: str
    alpha_event: str
    beta_event: str
    orientation: str  # higher-better | lower-better
    description: str


MEASURES: dict[str, MeasureSpec] = {
    spec.measure_id: spec
    for spec in (
        MeasureSpec(
            "accuracy-parity",
            "h=y",
            "any",
            "higher-better",
            "Share of correct decisions among a group's pairs.",
        ),
        MeasureSpec(
            "statistical-parity",
            "h=M",
            "any",
            "higher-better",
            "Share of pairs predicted as matches for a group.",
        ),
        MeasureSpec(
            "tprp",
            "h=M",
            "y=M",
            "higher-better",
            "True positive rate parity (equal opportunity): recall on true matches.",
        ),
        MeasureSpec(
            "fprp",
            "h=M",
            "y=NM",
            "lower-better",
            "False positive rate parity: erroneous matches among true non-matches.",
        ),
        MeasureSpec(
            "ppvp",
            "y=M",
            "h=M",
            "higher-better",
            "Positive predictive value parity: precision of predicted matches.",
        ),
    )
}

ALL_MEASURES = tuple(sorted(MEASURES))


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def as_dict(self) -> dict[str, int]:
        return {"tp": self.tp, "fp": self.fp, "fn": self.fn, "tn": self.tn}

    def replace_cell(self, cell: str, value: int) -> "ConfusionCounts":
        parts = self.as_dict()
        parts[cell] = value
        return ConfusionCounts(**parts)


@dataclass(frozen=True)
class Correspondence:
    left_id: str
    right_id: str
    left_enc: GroupEncoding
    right_enc: GroupEncoding
    predicted: int
    truth: int
    score: float

    def cell(self) -> str:
        if self.predicted == 1:
            return "tp" if self.truth == 1 else "fp"
        return "fn" if self.truth == 1 else "tn"


@dataclass(frozen=True)
class Workload:
    matcher_id: str
    threshold: float
    correspondences: tuple[Correspondence, ...]

    def __post_init__(self):
        if not self.correspondences:
            raise ValueError("a workload needs at least one correspondence")

    def __len__(self) -> int:
        return len(self.correspondences)


@dataclass(frozen=True)
class AuditConfig:
    paradigm: str = SINGLE
    measures: tuple[str, ...] = ALL_MEASURES
    tau_match: float = 0.5
    theta_fair: float = DEFAULT_FAIRNESS_THRESHOLD
    mode: str = SUBTRACTION
    unfair_only: bool = False
    min_support: int = DEFAULT_MIN_SUPPORT

    def __post_init__(self):
        if self.paradigm not in (SINGLE, PAIRWISE):
            raise ValueError(f"unknown paradigm {self.paradigm!r}")
        if self.mode not in (SUBTRACTION, DIVISION):
            raise ValueError(f"unknown disparity mode {self.mode!r}")
        if not 0.0 <= self.tau_match <= 1.0:
            raise ValueError("matching threshold must be in [0,1]")
        if not 0.0 <= self.theta_fair <= 1.0:
            raise ValueError("fairness threshold must be in [0,1]")
        for m in self.measures:
            if m not in MEASURES:
                raise ValueError(f"unknown measure {m!r}")
        if self.min_support < 0:
            raise ValueError("min_support must be non-negative")

    def to_json(self) -> dict:
        return {
            "paradigm": self.paradigm,
            "measures": list(self.measures),
            "tau_match": self.tau_match,
            "theta_fair": self.theta_fair,
            "mode": self.mode,
            "unfair_only": self.unfair_only,
            "min_support": self.min_support,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "AuditConfig":
        known = {f for f in cls.__dataclass_fields__}
        kwargs = {k: v for k, v in obj.items() if k in known}
        if "measures" in kwargs:
            kwargs["measures"] = tuple(kwargs["measures"])
        return cls(**kwargs)


@dataclass(frozen=True)
class DisparityResult:
    group: str | tuple[str, str]
    measure_id: str
    group_value: float | None
    overall_value: float | None
    disparity: float | None
    mode: str
    unfair: bool
    support: ConfusionCounts
    annotation: str = ""
    matcher: str | None = None  # set by ensemble re-audits where it varies per group


@dataclass(frozen=True)
class AuditReport:
    matcher_id: str
    config: AuditConfig
    entries: tuple[DisparityResult, ...]
    overall: dict[str, float | None] = field(default_factory=dict)

    def unfair_groups(self, measure_id: str | None = None) -> list[str | tuple[str, str]]:
        return [
            e.group
            for e in self.entries
            if e.unfair and (measure_id is None or e.measure_id == measure_id)
        ]


def build_workload(
    scores: ScoreTable, pairs: LabeledPairSet, dataset: Dataset, tau: float
) -> Workload:
    """Join scores with labels and encodings; predictions use score > tau."""
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"matching threshold must be in [0,1], got {tau}")
    score_map = scores.score_map()
    correspondences = []
    for pair in pairs.pairs:
        key = (pair.left_id, pair.right_id)
        if key not in score_map:
            raise ValueError(f"scores do not cover pair {key}")
        s = score_map[key]
        correspondences.append(
            Correspondence(
                left_id=pair.left_id,
                right_id=pair.right_id,
                left_enc=dataset.encoding_for("left", pair.left_id),
                right_enc=dataset.encoding_for("right", pair.right_id),
                predicted=1 if s > tau else 0,
                truth=pair.label,
                score=s,
            )
        )
    return Workload(
        matcher_id=scores.matcher_id, threshold=tau, correspondences=tuple(correspondences)
    )


_CELL_INDEX = {"tp": 0, "fp": 1, "fn": 2, "tn": 3}


def group_confusion(
    workload: Workload, group: int | tuple[int, int], paradigm: str
) -> ConfusionCounts:
    """Confusion counts over the correspondences legitimate for one group.

    Each correspondence increments at most one cell per group (set
    semantics), even when both entities belong to the group.
    """
    cells = [0, 0, 0, 0]
    if paradigm == SINGLE:
        if not isinstance(group, int):
            raise ValueError("single paradigm expects one subgroup index")
        g = group
        for c in workload.correspondences:
            if g >= c.left_enc.size:
                raise ValueError(f"unknown subgroup index {g}")
            if ((c.left_enc.mask | c.right_enc.mask) >> g) & 1:
                cells[_CELL_INDEX[c.cell()]] += 1
    elif paradigm == PAIRWISE:
        a, b = group
        if a > b:
            a, b = b, a
        for c in workload.correspondences:
            if b >= c.left_enc.size:
                raise ValueError(f"unknown subgroup index {b}")
            lm, rm = c.left_enc.mask, c.right_enc.mask
            if ((lm >> a) & 1 and (rm >> b) & 1) or ((lm >> b) & 1 and (rm >> a) & 1):
                cells[_CELL_INDEX[c.cell()]] += 1
    else:
        raise ValueError(f"unknown paradigm {paradigm!r}")
    return ConfusionCounts(tp=cells[0], fp=cells[1], fn=cells[2], tn=cells[3])


def confusion_by_group(
    workload: Workload, paradigm: str
) -> dict[int | tuple[int, int], ConfusionCounts]:
    """One-pass counts for every group (or unordered pair) with support >= 1."""
    acc: dict[int | tuple[int, int], list[int]] = {}
    for c in workload.correspondences:
        cell = _CELL_INDEX[c.cell()]
        if paradigm == SINGLE:
            union = c.left_enc.mask | c.right_enc.mask
            for g in range(c.left_enc.size):
                if (union >> g) & 1:
                    acc.setdefault(g, [0, 0, 0, 0])[cell] += 1
        else:
            seen = set()
            for i in c.left_enc.indices():
                for j in c.right_enc.indices():
                    seen.add((i, j) if i <= j else (j, i))
            for key in seen:
                acc.setdefault(key, [0, 0, 0, 0])[cell] += 1
    return {
        key: ConfusionCounts(tp=v[0], fp=v[1], fn=v[2], tn=v[3]) for key, v in acc.items()
    }


def overall_confusion(workload: Workload) -> ConfusionCounts:
    """Pooled counts with every correspondence counted exactly once."""
    cells = [0, 0, 0, 0]
    for c in workload.correspondences:
        cells[_CELL_INDEX[c.cell()]] += 1
    return ConfusionCounts(tp=cells[0], fp=cells[1], fn=cells[2], tn=cells[3])


def measure_value(counts: ConfusionCounts, measure_id: str) -> float | None:
    """Measure formula over the four cells; None when the denominator is 0."""
    if measure_id not in MEASURES:
        raise ValueError(f"unknown measure {measure_id!r}")
    n = counts.total()
    if measure_id == "accuracy-parity":
        return (counts.tp + counts.tn) / n if n else None
    if measure_id == "statistical-parity":
        return (counts.tp + counts.fp) / n if n else None
    if measure_id == "tprp":
        d = counts.tp + counts.fn
        return counts.tp / d if d else None
    if measure_id == "fprp":
        d = counts.fp + counts.tn
        return counts.fp / d if d else None
    d = counts.tp + counts.fp  # ppvp
    return counts.tp / d if d else None


def overall_value(workload: Workload, measure_id: str) -> float | None:
    return measure_value(overall_confusion(workload), measure_id)


def disparity(overall: float, group_value: float, mode: str) -> float:
    """One-sided gap of a group below the overall value."""
    if mode == SUBTRACTION:
        return max(0.0, overall - group_value)
    if mode == DIVISION:
        if overall <= 0:
            raise ValueError("division disparity needs overall value > 0")
        return max(0.0, 1.0 - group_value / overall)
    raise ValueError(f"unknown disparity mode {mode!r}")


def _group_label(
    key: int | tuple[int, int], subgroups: tuple[Subgroup, ...]
) -> str | tuple[str, str]:
    if isinstance(key, int):
        return subgroups[key].name
    names = sorted((subgroups[key[0]].name, subgroups[key[1]].name))
    return (names[0], names[1])


def _entry(
    group_label: str | tuple[str, str],
    measure_id: str,
    counts: ConfusionCounts,
    overall: float | None,
    mode: str,
    theta: float,
    min_support: int,
) -> DisparityResult:
    value = measure_value(counts, measure_id)
    notes: list[str] = []
    disp: float | None = None
    if value is None or overall is None:
        notes.append(ANNOTATION_UNDEFINED)
    elif mode == DIVISION and overall <= 0:
        notes.append(ANNOTATION_UNDEFINED_DIVISION)
    else:
        disp = disparity(overall, value, mode)
    low_support = counts.total() < min_support
    if low_support:
        notes.append(ANNOTATION_LOW_SUPPORT)
    unfair = disp is not None and disp > theta and not low_support
    return DisparityResult(
        group=group_label,
        measure_id=measure_id,
        group_value=value,
        overall_value=overall,
        disparity=disp,
        mode=mode,
        unfair=unfair,
        support=counts,
        annotation=";".join(notes),
    )


def audit(
    workload: Workload, config: AuditConfig, subgroups: tuple[Subgroup, ...]
) -> AuditReport:
    """Evaluate every configured measure for every group with support.

    Entries are ordered by measure id then canonical group name, so report
    serialization is reproducible.
    """
    by_group = confusion_by_group(workload, config.paradigm)
    pooled = overall_confusion(workload)
    overall = {m: measure_value(pooled, m) for m in sorted(config.measures)}
    labeled = sorted(
        ((_group_label(key, subgroups), counts) for key, counts in by_group.items()),
        key=lambda item: item[0] if isinstance(item[0], tuple) else (item[0],),
    )
    entries = [
        _entry(label, m, counts, overall[m], config.mode, config.theta_fair, config.min_support)
        for m in sorted(config.measures)
        for label, counts in labeled
    ]
    if config.unfair_only:
        entries = [e for e in entries if e.unfair]
    return AuditReport(
        matcher_id=workload.matcher_id, config=config, entries=tuple(entries), overall=overall
    )


def report_to_json(report: AuditReport) -> list[dict]:
    """Flat entry array with a fixed key order for golden-file diffs."""
    out = []
    for e in report.entries:
        out.append(
            {
                "matcher": e.matcher or report.matcher_id,
                "paradigm": report.config.paradigm,
                "measure": e.measure_id,
                "group": list(e.group) if isinstance(e.group, tuple) else e.group,
                "group_value": e.group_value,
                "overall_value": e.overall_value,
                "disparity": e.disparity,
                "mode": e.mode,
                "unfair": e.unfair,
                "support": e.support.as_dict(),
                "annotation": e.annotation,
            }
        )
    return out
