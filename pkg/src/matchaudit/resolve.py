"""Ensemble-based resolution: per-group matcher assignments scored by
worst-group performance and unfairness, with Pareto-frontier exploration
and re-audit of a chosen strategy.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace

import numpy as np

from .audit import (
    DIVISION,
    SINGLE,
    SUBTRACTION,
    AuditConfig,
    AuditReport,
    ConfusionCounts,
    DisparityResult,
    Workload,
    _entry,
    confusion_by_group,
    disparity,
    measure_value,
    MEASURES,
)
from .ingest import Subgroup

DEFAULT_ENUMERATION_CAP = 100_000


class ResolveError(ValueError):
    pass


@dataclass(frozen=True)
class ResolutionConfig:
    measure_id: str
    mode: str = SUBTRACTION
    cap: int = DEFAULT_ENUMERATION_CAP
    target_group: str | None = None
    seed: int = 0
    orientation: str | None = None  # defaults to the measure's own orientation

    def __post_init__(self):
        if self.measure_id not in MEASURES:
            raise ResolveError(f"unknown measure {self.measure_id!r}")
        if self.mode not in (SUBTRACTION, DIVISION):
            raise ResolveError(f"unknown disparity mode {self.mode!r}")
        if self.cap < 1:
            raise ResolveError("enumeration cap must be at least 1")

    def resolved_orientation(self) -> str:
        return self.orientation or MEASURES[self.measure_id].orientation

    def to_json(self) -> dict:
        return {
            "measure": self.measure_id,
            "orientation": self.resolved_orientation(),
            "mode": self.mode,
            "cap": self.cap,
            "target_group": self.target_group,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class PerformanceTable:
    """Per-(group, matcher) measure values over a shared test workload."""

    groups: tuple[str, ...]
    matchers: tuple[str, ...]
    values: dict[tuple[str, str], float | None]
    supports: dict[str, int]
    excluded_groups: tuple[str, ...] = ()

    def value(self, group: str, matcher: str) -> float | None:
        return self.values[(group, matcher)]


@dataclass(frozen=True)
class AssignmentScore:
    assignment: dict[str, str]  # group -> matcher_id
    unfairness: float  # F
    worst_performance: float  # A
    per_group: tuple[tuple[str, str, float, int], ...]  # (group, matcher, value, support)

    def key(self, groups: tuple[str, ...]) -> tuple[str, ...]:
        return tuple(self.assignment[g] for g in groups)


@dataclass(frozen=True)
class Resolution:
    config: ResolutionConfig
    groups: tuple[str, ...]
    matchers: tuple[str, ...]
    points: tuple[AssignmentScore, ...]
    frontier_indices: tuple[int, ...]
    best_per_group_index: int
    diagnostics: dict = field(default_factory=dict)


def build_performance_table(
    workloads: dict[str, Workload],
    subgroups: tuple[Subgroup, ...],
    measure_id: str,
) -> PerformanceTable:
    """Single-paradigm per-group values for every matcher on the same pairs."""
    if not workloads:
        raise ResolveError("no matcher workloads supplied")
    matcher_ids = tuple(sorted(workloads))
    sizes = {len(w) for w in workloads.values()}
    if len(sizes) != 1:
        raise ResolveError("matchers were not evaluated on the same test pairs")

    counts_by_matcher = {
        m: confusion_by_group(workloads[m], SINGLE) for m in matcher_ids
    }
    group_keys = sorted({k for counts in counts_by_matcher.values() for k in counts})
    values: dict[tuple[str, str], float | None] = {}
    supports: dict[str, int] = {}
    kept: list[str] = []
    excluded: list[str] = []
    for key in group_keys:
        name = subgroups[key].name
        supports[name] = counts_by_matcher[matcher_ids[0]][key].total()
        defined_any = False
        for m in matcher_ids:
            counts = counts_by_matcher[m].get(key, ConfusionCounts())
            value = measure_value(counts, measure_id)
            values[(name, m)] = value
            defined_any = defined_any or value is not None
        (kept if defined_any else excluded).append(name)
    return PerformanceTable(
        groups=tuple(kept),
        matchers=matcher_ids,
        values=values,
        supports=supports,
        excluded_groups=tuple(excluded),
    )


def per_group_performance(
    workloads: dict[str, Workload],
    subgroups: tuple[Subgroup, ...],
    group: str,
    matcher_id: str,
    measure_id: str,
) -> float | None:
    table = build_performance_table(workloads, subgroups, measure_id)
    if group not in table.groups and group not in table.excluded_groups:
        raise ResolveError(f"group {group!r} has no legitimate correspondences")
    return table.values[(group, matcher_id)]


def best_per_group(table: PerformanceTable, orientation: str) -> dict[str, str]:
    """Per-group argmax (argmin for lower-better); ties take the smaller id."""
    pick = max if orientation == "higher-better" else min
    out: dict[str, str] = {}
    for group in table.groups:
        defined = [
            (m, table.value(group, m)) for m in table.matchers if table.value(group, m) is not None
        ]
        if not defined:
            raise ResolveError(f"no matcher has a defined value for group {group!r}")
        best_value = pick(v for _, v in defined)
        out[group] = min(m for m, v in defined if v == best_value)
    return out


def enumerate_assignments(
    groups: tuple[str, ...],
    matchers: tuple[str, ...],
    cap: int,
    seed: int = 0,
    anchors: tuple[tuple[str, ...], ...] = (),
) -> list[tuple[str, ...]]:
    """All m^k assignment tuples, or a seeded sample of `cap` of them.

    The sample always contains every constant assignment and any supplied
    anchors (the best-per-group assignment in practice).
    """
    k, m = len(groups), len(matchers)
    space = m**k
    if space <= cap:
        return [tuple(combo) for combo in itertools.product(matchers, repeat=k)]
    chosen: list[tuple[str, ...]] = []
    seen: set[tuple[str, ...]] = set()
    for anchor in tuple((mid,) * k for mid in matchers) + anchors:
        if anchor not in seen:
            seen.add(anchor)
            chosen.append(anchor)
    rng = np.random.default_rng(seed)
    while len(chosen) < cap:
        candidate = tuple(matchers[i] for i in rng.integers(0, m, size=k))
        if candidate not in seen:
            seen.add(candidate)
            chosen.append(candidate)
    return chosen[:cap]


def score_assignment(
    assignment: dict[str, str], table: PerformanceTable, config: ResolutionConfig
) -> AssignmentScore | None:
    """Worst-group performance A and unfairness F of one assignment.

    F is the largest one-sided disparity of any group against the
    support-weighted mean; lower-better measures enter as (1 - value).
    Returns None when any assigned (group, matcher) value is undefined.
    """
    orientation = config.resolved_orientation()
    per_group = []
    values = []
    weights = []
    for group in table.groups:
        matcher = assignment[group]
        value = table.value(group, matcher)
        if value is None:
            return None
        per_group.append((group, matcher, value, table.supports[group]))
        values.append(value)
        weights.append(table.supports[group])

    if orientation == "higher-better":
        worst = min(values)
        oriented = values
    else:
        worst = max(values)
        oriented = [1.0 - v for v in values]
    reference = sum(w * v for w, v in zip(weights, oriented)) / sum(weights)
    if config.mode == DIVISION and reference <= 0:
        return None
    unfairness = max(disparity(reference, v, config.mode) for v in oriented)
    return AssignmentScore(
        assignment=dict(assignment),
        unfairness=unfairness,
        worst_performance=worst,
        per_group=tuple(per_group),
    )


def pareto_frontier(
    scores: list[AssignmentScore], orientation: str, groups: tuple[str, ...]
) -> list[int]:
    """Indices of non-dominated points, sorted by unfairness ascending.

    Point p dominates q iff F_p <= F_q and p's performance is at least as
    good, with one comparison strict. Duplicate (F, A) points keep the
    lexicographically smallest assignment.
    """
    if not scores:
        raise ResolveError("no assignment scores to search")
    sign = 1.0 if orientation == "higher-better" else -1.0
    order = sorted(
        range(len(scores)),
        key=lambda i: (
            scores[i].unfairness,
            -sign * scores[i].worst_performance,
            scores[i].key(groups),
        ),
    )
    frontier: list[int] = []
    best_adjusted: float | None = None
    for i in order:
        adjusted = sign * scores[i].worst_performance
        if best_adjusted is None or adjusted > best_adjusted:
            frontier.append(i)
            best_adjusted = adjusted
    return frontier


def resolve(
    workloads: dict[str, Workload],
    subgroups: tuple[Subgroup, ...],
    config: ResolutionConfig,
) -> Resolution:
    """Enumerate, score, and rank per-group matcher assignments."""
    table = build_performance_table(workloads, subgroups, config.measure_id)
    if not table.groups:
        raise ResolveError("no group has a defined performance value")
    orientation = config.resolved_orientation()
    best = best_per_group(table, orientation)
    best_tuple = tuple(best[g] for g in table.groups)
    assignments = enumerate_assignments(
        table.groups, table.matchers, config.cap, config.seed, anchors=(best_tuple,)
    )
    points: list[AssignmentScore] = []
    excluded = 0
    best_index = -1
    for combo in assignments:
        assignment = dict(zip(table.groups, combo))
        score = score_assignment(assignment, table, config)
        if score is None:
            excluded += 1
            continue
        if combo == best_tuple:
            best_index = len(points)
        points.append(score)
    if best_index < 0:
        raise ResolveError("best-per-group assignment could not be scored")
    frontier = pareto_frontier(points, orientation, table.groups)
    space = len(table.matchers) ** len(table.groups)
    return Resolution(
        config=config,
        groups=table.groups,
        matchers=table.matchers,
        points=tuple(points),
        frontier_indices=tuple(frontier),
        best_per_group_index=best_index,
        diagnostics={
            "assignment_space": space,  # m^k total maps group -> matcher
            "transposed_count": len(table.groups) ** len(table.matchers),  # k^m, for reference
            "enumerated": len(assignments),
            "scored": len(points),
            "excluded": excluded,
            "excluded_groups": list(table.excluded_groups),
            "sampled": space > config.cap,
        },
    )


def audit_strategy(
    assignment: dict[str, str],
    workloads: dict[str, Workload],
    audit_config: AuditConfig,
    subgroups: tuple[Subgroup, ...],
) -> AuditReport:
    """Re-audit with each group's confusion drawn from its assigned matcher.

    The overall reference is the pool of the assigned per-group counts, so
    larger groups weigh more. Single paradigm only: assignments map single
    groups, not group pairs.
    """
    config = replace(audit_config, paradigm=SINGLE)
    index_of = {sg.name: sg.index for sg in subgroups}
    for group, matcher in assignment.items():
        if group not in index_of:
            raise ResolveError(f"unknown group {group!r}")
        if matcher not in workloads:
            raise ResolveError(f"unknown matcher {matcher!r}")
    counts_by_matcher = {
        m: confusion_by_group(workloads[m], SINGLE) for m in sorted(set(assignment.values()))
    }
    group_counts = {
        group: counts_by_matcher[matcher].get(index_of[group], ConfusionCounts())
        for group, matcher in assignment.items()
    }
    pooled = ConfusionCounts(
        tp=sum(c.tp for c in group_counts.values()),
        fp=sum(c.fp for c in group_counts.values()),
        fn=sum(c.fn for c in group_counts.values()),
        tn=sum(c.tn for c in group_counts.values()),
    )
    overall = {m: measure_value(pooled, m) for m in sorted(config.measures)}
    entries: list[DisparityResult] = []
    for measure_id in sorted(config.measures):
        for group in sorted(group_counts):
            entry = _entry(
                group,
                measure_id,
                group_counts[group],
                overall[measure_id],
                config.mode,
                config.theta_fair,
                config.min_support,
            )
            entries.append(replace(entry, matcher=assignment[group]))
    if config.unfair_only:
        entries = [e for e in entries if e.unfair]
    return AuditReport(
        matcher_id="ensemble", config=config, entries=tuple(entries), overall=overall
    )


def resolution_to_json(resolution: Resolution) -> dict:
    return {
        "config": resolution.config.to_json(),
        "groups": list(resolution.groups),
        "matchers": list(resolution.matchers),
        "points": [
            {
                "F": p.unfairness,
                "A": p.worst_performance,
                "assignment": {g: p.assignment[g] for g in resolution.groups},
                "per_group": [
                    {"group": g, "matcher": m, "value": v, "support": s}
                    for g, m, v, s in p.per_group
                ],
            }
            for p in resolution.points
        ],
        "frontier_indices": list(resolution.frontier_indices),
        "best_per_group_index": resolution.best_per_group_index,
        "diagnostics": resolution.diagnostics,
    }
