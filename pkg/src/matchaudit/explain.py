"""Four explanation families for a queried (group, measure) unfairness finding:
subgroup drill-down, confusion-matrix breakdown, group representation in the
training data, and sampled problematic pairs.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .audit import (
    DIVISION,
    SINGLE,
    PAIRWISE,
    AuditConfig,
    ConfusionCounts,
    Workload,
    disparity,
    group_confusion,
    measure_value,
    overall_confusion,
)
from .ingest import Dataset, legitimate_groups

# Confusion cells that hold a measure's "problematic pairs". Ordered: for
# statistical parity false negatives are sampled before false positives.
ERROR_CELLS = {
    "tprp": ("fn",),
    "ppvp": ("fp",),
    "fprp": ("fp",),
    "statistical-parity": ("fn", "fp"),
    "accuracy-parity": ("fn", "fp"),
}
_POOLED_CELLS = {"accuracy-parity"}  # sample FN and FP as one pool

RATE_MEASURES = {"tpr": "tprp", "fpr": "fprp", "ppv": "ppvp", "accuracy": "accuracy-parity"}


class ExplainError(ValueError):
    pass


@dataclass(frozen=True)
class ExplanationQuery:
    matcher_id: str
    group: str | tuple[str, str]
    measure_id: str
    paradigm: str = SINGLE
    sample_size: int = 5
    seed: int = 0


@dataclass
class AuditContext:
    """Immutable bundle the explanation queries run against."""

    dataset: Dataset
    workloads: dict[str, Workload]
    config: AuditConfig

    def workload(self, matcher_id: str) -> Workload:
        if matcher_id not in self.workloads:
            raise ExplainError(f"no workload for matcher {matcher_id!r}")
        return self.workloads[matcher_id]

    def group_key(self, group: str | tuple[str, str]) -> int | tuple[int, int]:
        if isinstance(group, tuple):
            i = self.dataset.subgroup_named(group[0]).index
            j = self.dataset.subgroup_named(group[1]).index
            return (i, j) if i <= j else (j, i)
        return self.dataset.subgroup_named(group).index


@dataclass(frozen=True)
class ChildRow:
    name: str
    value: float | None
    disparity: float | None
    support: ConfusionCounts
    low_support: bool


@dataclass(frozen=True)
class SubgroupBreakdown:
    children: tuple[ChildRow, ...]
    reason: str = ""


@dataclass(frozen=True)
class MeasureBreakdown:
    cells: ConfusionCounts
    rates: dict[str, float | None]
    disparity: float | None
    driver: str | None
    counterfactuals: dict[str, float | None]


@dataclass(frozen=True)
class RepresentationReport:
    split: str
    entity_share: float | None
    pair_share: float | None
    match_share: float | None
    non_match_share: float | None
    counts: dict[str, int] = field(default_factory=dict)
    annotation: str = ""


@dataclass(frozen=True)
class ExampleSet:
    items: tuple[dict, ...]
    annotation: str = ""


def explain_subgroups(query: ExplanationQuery, ctx: AuditContext) -> SubgroupBreakdown:
    """Disparity rows for the hierarchy descendants of the queried group."""
    if isinstance(query.group, tuple):
        return SubgroupBreakdown(children=(), reason="subgroup drill-down applies to single groups")
    children = [sg for sg in ctx.dataset.subgroups if query.group in sg.parents]
    if not children:
        ctx.dataset.subgroup_named(query.group)  # raises KeyError for unknown groups
        return SubgroupBreakdown(children=(), reason="no descendants")
    workload = ctx.workload(query.matcher_id)
    overall = measure_value(overall_confusion(workload), query.measure_id)
    rows = []
    for child in sorted(children, key=lambda s: s.name):
        counts = group_confusion(workload, child.index, SINGLE)
        value = measure_value(counts, query.measure_id)
        disp = None
        if value is not None and overall is not None:
            if not (ctx.config.mode == DIVISION and overall <= 0):
                disp = disparity(overall, value, ctx.config.mode)
        rows.append(
            ChildRow(
                name=child.name,
                value=value,
                disparity=disp,
                support=counts,
                low_support=counts.total() < ctx.config.min_support,
            )
        )
    return SubgroupBreakdown(children=tuple(rows))


def explain_measure(query: ExplanationQuery, ctx: AuditContext) -> MeasureBreakdown:
    """The group's confusion matrix, derived rates, and the dominant error cell.

    The driver is found exactly: zero each cell in turn, recompute the
    disparity against the unchanged overall value, and take the cell whose
    zeroing reduces it the most.
    """
    workload = ctx.workload(query.matcher_id)
    counts = group_confusion(workload, ctx.group_key(query.group), query.paradigm)
    value = measure_value(counts, query.measure_id)
    if value is None:
        raise ExplainError(
            f"measure {query.measure_id} undefined for group {query.group}"
        )
    overall = measure_value(overall_confusion(workload), query.measure_id)
    rates = {
        rate: measure_value(counts, measure_id) for rate, measure_id in RATE_MEASURES.items()
    }
    base = None
    if overall is not None and not (ctx.config.mode == DIVISION and overall <= 0):
        base = disparity(overall, value, ctx.config.mode)

    counterfactuals: dict[str, float | None] = {}
    driver = None
    if base is not None and base > 0:
        best = base
        for cell in ("tp", "fp", "fn", "tn"):
            cf_value = measure_value(counts.replace_cell(cell, 0), query.measure_id)
            cf = disparity(overall, cf_value, ctx.config.mode) if cf_value is not None else None
            counterfactuals[cell] = cf
            if cf is not None and cf < best:
                best, driver = cf, cell
    return MeasureBreakdown(
        cells=counts, rates=rates, disparity=base, driver=driver, counterfactuals=counterfactuals
    )


def explain_representation(
    group: str | tuple[str, str], dataset: Dataset, split: str = "train"
) -> RepresentationReport:
    """Group coverage among entities and pairs, and conditioned on the truth."""
    if isinstance(group, tuple):
        return RepresentationReport(
            split=split, entity_share=None, pair_share=None, match_share=None,
            non_match_share=None, annotation="representation applies to single groups",
        )
    pairs = dataset.splits[split].pairs
    if not pairs:
        return RepresentationReport(
            split=split, entity_share=None, pair_share=None, match_share=None,
            non_match_share=None, annotation=f"{split} split is empty",
        )
    g = dataset.subgroup_named(group).index

    entities = {("left", p.left_id) for p in pairs} | {("right", p.right_id) for p in pairs}
    member_entities = sum(1 for side, eid in entities if dataset.encoding_for(side, eid).has(g))

    legit = match_legit = match_total = non_legit = non_total = 0
    for p in pairs:
        hit = (
            dataset.encoding_for("left", p.left_id).mask
            | dataset.encoding_for("right", p.right_id).mask
        ) >> g & 1
        legit += hit
        if p.label == 1:
            match_total += 1
            match_legit += hit
        else:
            non_total += 1
            non_legit += hit
    return RepresentationReport(
        split=split,
        entity_share=member_entities / len(entities),
        pair_share=legit / len(pairs),
        match_share=match_legit / match_total if match_total else None,
        non_match_share=non_legit / non_total if non_total else None,
        counts={
            "entities": len(entities),
            "member_entities": member_entities,
            "pairs": len(pairs),
            "member_pairs": legit,
            "match_pairs": match_total,
            "member_match_pairs": match_legit,
            "non_match_pairs": non_total,
            "member_non_match_pairs": non_legit,
        },
    )


def _legitimate(c, key, paradigm) -> bool:
    if paradigm == SINGLE:
        return bool(((c.left_enc.mask | c.right_enc.mask) >> key) & 1)
    return key in legitimate_groups(c.left_enc, c.right_enc, PAIRWISE)


def explain_examples(query: ExplanationQuery, ctx: AuditContext) -> ExampleSet:
    """A reproducible sample of the group's pairs in the measure's error cells."""
    if query.measure_id not in ERROR_CELLS:
        raise ExplainError(f"unknown measure {query.measure_id!r}")
    workload = ctx.workload(query.matcher_id)
    key = ctx.group_key(query.group)
    members = [c for c in workload.correspondences if _legitimate(c, key, query.paradigm)]
    cells = ERROR_CELLS[query.measure_id]
    rng = random.Random(query.seed)
    picked: list = []
    if query.measure_id in _POOLED_CELLS:
        pool = [c for c in members if c.cell() in cells]
        picked = rng.sample(pool, min(query.sample_size, len(pool)))
    else:
        for cell in cells:
            if len(picked) >= query.sample_size:
                break
            pool = [c for c in members if c.cell() == cell]
            picked += rng.sample(pool, min(query.sample_size - len(picked), len(pool)))
    items = tuple(
        {
            "left": {"id": c.left_id, **ctx.dataset.left.row(c.left_id)},
            "right": {"id": c.right_id, **ctx.dataset.right.row(c.right_id)},
            "score": c.score,
            "predicted": c.predicted,
            "truth": c.truth,
            "cell": c.cell(),
        }
        for c in picked
    )
    return ExampleSet(items=items, annotation="" if items else "no pairs in the error cell")


def explain(query: ExplanationQuery, ctx: AuditContext, split: str = "train") -> dict:
    """All four explanation families for one finding, as one JSON document."""
    breakdown = explain_subgroups(query, ctx)
    measure = explain_measure(query, ctx)
    representation = explain_representation(query.group, ctx.dataset, split)
    examples = explain_examples(query, ctx)
    return {
        "query": {
            "matcher": query.matcher_id,
            "group": list(query.group) if isinstance(query.group, tuple) else query.group,
            "measure": query.measure_id,
            "paradigm": query.paradigm,
            "sample_size": query.sample_size,
            "seed": query.seed,
        },
        "subgroup_breakdown": {
            "reason": breakdown.reason,
            "children": [
                {
                    "group": row.name,
                    "value": row.value,
                    "disparity": row.disparity,
                    "support": row.support.as_dict(),
                    "low_support": row.low_support,
                }
                for row in breakdown.children
            ],
        },
        "measure_breakdown": {
            "cells": measure.cells.as_dict(),
            "rates": measure.rates,
            "disparity": measure.disparity,
            "driver": measure.driver,
            "counterfactuals": measure.counterfactuals,
        },
        "representation": {
            "split": representation.split,
            "entity_share": representation.entity_share,
            "pair_share": representation.pair_share,
            "match_share": representation.match_share,
            "non_match_share": representation.non_match_share,
            "counts": representation.counts,
            "annotation": representation.annotation,
        },
        "examples": {"annotation": examples.annotation, "items": list(examples.items)},
    }
