"""Multiple-workload analysis: bootstrap resampling and fairness z-tests.

The null hypothesis is that a matcher is fair on a group, formalized as
mean disparity <= the fairness threshold; the alternative is that it
exceeds it. The test is a one-sided one-sample z-test over the disparity
population collected across workloads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .audit import (
    DIVISION,
    AuditConfig,
    Workload,
    confusion_by_group,
    disparity,
    measure_value,
    overall_confusion,
    _group_label,
)
from .ingest import Subgroup


@dataclass(frozen=True)
class DisparityPopulation:
    group: str | tuple[str, str]
    measure_id: str
    values: tuple[float, ...]

    def __post_init__(self):
        if any(v < 0 or v > 1 for v in self.values):
            raise ValueError("disparity values must lie in [0,1]")


@dataclass(frozen=True)
class TestResult:
    z_statistic: float | None  # None for degenerate (k=1 or zero-variance) cases
    p_value: float
    reject_null: bool
    k: int
    alpha_sig: float
    theta_fair: float
    mean: float
    std: float | None
    annotation: str = ""


def bootstrap_workloads(base: Workload, k: int, seed: int) -> list[Workload]:
    """k same-size resamples of the base workload, with replacement.

    Workload i depends only on (seed, i), so populations are reproducible
    and independent of k.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    n = len(base.correspondences)
    out = []
    for i in range(k):
        rng = np.random.default_rng([seed, i])
        idx = rng.integers(0, n, size=n)
        out.append(
            replace(base, correspondences=tuple(base.correspondences[j] for j in idx))
        )
    return out


def normal_tail(z: float) -> float:
    """P(Z > z) for a standard normal variable."""
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def test_fairness(pop: DisparityPopulation, theta_fair: float, alpha_sig: float) -> TestResult:
    """One-sided z-test of H0: mean disparity <= theta_fair."""
    if not pop.values:
        raise ValueError("empty disparity population")
    if not 0.0 < alpha_sig < 1.0:
        raise ValueError("significance level must be in (0,1)")
    k = len(pop.values)
    mean = sum(pop.values) / k
    if k == 1:
        p = 0.0 if mean > theta_fair else 1.0
        return TestResult(None, p, p <= alpha_sig, k, alpha_sig, theta_fair, mean, None,
                          annotation="point-comparison")
    std = math.sqrt(sum((v - mean) ** 2 for v in pop.values) / (k - 1))
    if std == 0.0:
        p = 0.0 if mean > theta_fair else 1.0
        return TestResult(None, p, p <= alpha_sig, k, alpha_sig, theta_fair, mean, 0.0,
                          annotation="zero-variance")
    z = (mean - theta_fair) / (std / math.sqrt(k))
    p = normal_tail(z)
    return TestResult(z, p, p <= alpha_sig, k, alpha_sig, theta_fair, mean, std)


test_fairness.__test__ = False  # not a pytest test, despite the name


def _workload_disparities(
    workload: Workload, config: AuditConfig, subgroups: tuple[Subgroup, ...]
) -> dict[tuple[str, str | tuple[str, str]], float]:
    """Defined disparities per (measure, group) for one workload."""
    by_group = confusion_by_group(workload, config.paradigm)
    pooled = overall_confusion(workload)
    out: dict[tuple[str, str | tuple[str, str]], float] = {}
    for measure_id in sorted(config.measures):
        overall = measure_value(pooled, measure_id)
        if overall is None:
            continue
        if config.mode == DIVISION and overall <= 0:
            continue
        for key, counts in by_group.items():
            value = measure_value(counts, measure_id)
            if value is None:
                continue
            label = _group_label(key, subgroups)
            out[(measure_id, label)] = disparity(overall, value, config.mode)
    return out


def multiworkload_analysis(
    base: Workload,
    config: AuditConfig,
    subgroups: tuple[Subgroup, ...],
    k: int,
    seed: int,
    alpha_sig: float,
) -> list[dict]:
    """Bootstrap k workloads and test every (measure, group) population.

    Resamples where a disparity is undefined contribute no value, so a
    population's effective k may be smaller than requested.
    """
    cells = sorted(_workload_disparities(base, config, subgroups))
    populations: dict[tuple[str, str | tuple[str, str]], list[float]] = {c: [] for c in cells}
    for workload in bootstrap_workloads(base, k, seed):
        observed = _workload_disparities(workload, config, subgroups)
        for cell in cells:
            if cell in observed:
                populations[cell].append(observed[cell])

    report = []
    for (measure_id, group), values in populations.items():
        row = {
            "matcher": base.matcher_id,
            "measure": measure_id,
            "group": list(group) if isinstance(group, tuple) else group,
            "k": len(values),
            "mean": None,
            "std": None,
            "z": None,
            "p_value": None,
            "reject": None,
            "alpha_sig": alpha_sig,
            "theta_fair": config.theta_fair,
            "annotation": "",
        }
        if not values:
            row["annotation"] = "no-defined-disparities"
        else:
            result = test_fairness(
                DisparityPopulation(group=group, measure_id=measure_id, values=tuple(values)),
                config.theta_fair,
                alpha_sig,
            )
            row.update(
                mean=result.mean,
                std=result.std,
                z=result.z_statistic,
                p_value=result.p_value,
                reject=result.reject_null,
                annotation=result.annotation,
            )
        report.append(row)
    return report
