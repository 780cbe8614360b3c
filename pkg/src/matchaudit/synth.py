"""Planted-bias synthetic datasets for demos and oracle-backed tests.

Two profiles:

* ``scores``   -- score files from two pretend external matchers, one with a
  deliberately depressed true-positive rate on the planted group. Per-group
  hit counts are fixed, so the expected TPRP disparity is exact arithmetic.
* ``faculty``  -- a trainable two-table dataset where the planted group's
  true matches carry heavily distorted name strings, so a mean-similarity
  matcher misses them while an institution-keyed one does not.
"""

from __future__ import annotations

import csv
import json
import random
from pathlib import Path

from .ingest import SensitiveAttribute, SensitiveAttributeSpec
from .matchers import edit_similarity, token_jaccard

PROFILES = ("scores", "faculty")

GROUPS = ("alpha", "beta", "gamma")
PLANTED_GROUP = "gamma"
CAREERS = ("junior", "senior")

_SYLLABLES = (
    "ba", "den", "ler", "mon", "ri", "sa", "tor", "vel", "win", "zo", "kel", "far",
    "nu", "ges", "pol", "tam",
)
_INSTITUTIONS = (
    "univ arden", "univ bexley", "univ corvel", "univ dunmore", "univ elswick",
    "univ farrow", "univ gildern", "univ hollis", "univ ketterly", "univ lorvane",
    "univ merton", "univ northgate",
)

# scores profile: per-group pair counts and fixed above-threshold hit counts
_SCORES_MATCHES = 40
_SCORES_NON_MATCHES = 60
_BIASED_HITS = {"alpha": 36, "beta": 36, "gamma": 18}  # TPR .9 / .9 / .45
_FAIR_HITS = {"alpha": 28, "beta": 28, "gamma": 28}  # TPR .7 everywhere
_FALSE_HITS = 3  # FPR .05 for every group and matcher

# faculty profile: per-split (match, non-match) pair counts per group
_FACULTY_COUNTS = {"train": (40, 60), "valid": (20, 30), "test": (30, 45)}
_FACULTY_NO_INSTITUTION_SHARE = 0.1
_FACULTY_TAU = 0.6


def _word(rng: random.Random, syllables: int = 3) -> str:
    return "".join(rng.choice(_SYLLABLES) for _ in range(syllables))


def _person(rng: random.Random) -> str:
    return f"{_word(rng)} {_word(rng)}"


def _typo(rng: random.Random, text: str) -> str:
    """One character substitution, never touching the token separator."""
    positions = [i for i, ch in enumerate(text) if ch != " "]
    i = rng.choice(positions)
    replacement = rng.choice([c for c in "abcdefghijklmnopqrstuvwxyz" if c != text[i]])
    return text[:i] + replacement + text[i + 1 :]


def _alias(text: str) -> str:
    """A transliteration-style variant: token order and spelling reversed."""
    return " ".join(tok[::-1] for tok in reversed(text.split()))


def _planted_name_pair(rng: random.Random) -> tuple[str, str]:
    while True:
        name = _person(rng)
        other = _alias(name)
        if token_jaccard(name, other) == 0.0 and edit_similarity(name, other) <= 0.5:
            return name, other


def _distinct_person(rng: random.Random, name: str) -> str:
    tokens = set(name.split())
    while True:
        other = _person(rng)
        if not tokens & set(other.split()):
            return other


def _write_csv(path: Path, header: tuple[str, ...], rows: list) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


class _Builder:
    """Accumulates entity rows and labeled pairs across splits."""

    def __init__(self, attributes: tuple[str, ...]):
        self.attributes = attributes
        self.left: list[list[str]] = []
        self.right: list[list[str]] = []
        self.pairs: dict[str, list[tuple[str, str, int]]] = {"train": [], "valid": [], "test": []}

    def add_pair(self, split: str, label: int, left_values: list[str], right_values: list[str]):
        left_id = f"a{len(self.left)}"
        right_id = f"b{len(self.right)}"
        self.left.append([left_id] + left_values)
        self.right.append([right_id] + right_values)
        self.pairs[split].append((left_id, right_id, label))
        return left_id, right_id

    def write(self, out_dir: Path) -> dict[str, str]:
        header = ("id",) + self.attributes
        _write_csv(out_dir / "tableA.csv", header, self.left)
        _write_csv(out_dir / "tableB.csv", header, self.right)
        files = {"table_a": "tableA.csv", "table_b": "tableB.csv"}
        for split, rows in self.pairs.items():
            _write_csv(out_dir / f"{split}.csv", ("id1", "id2", "label"), rows)
            files[split] = f"{split}.csv"
        return files


def _scores_profile(rng: random.Random, out_dir: Path) -> dict:
    builder = _Builder(("name", "origin"))
    test_pairs_by_group: dict[str, dict[int, list[tuple[str, str]]]] = {
        g: {1: [], 0: []} for g in GROUPS
    }
    for split in ("train", "valid", "test"):
        n_match = _SCORES_MATCHES if split != "valid" else _SCORES_MATCHES // 2
        n_non = _SCORES_NON_MATCHES if split != "valid" else _SCORES_NON_MATCHES // 2
        for group in GROUPS:
            for _ in range(n_match):
                name = _person(rng)
                ids = builder.add_pair(split, 1, [name, group], [_typo(rng, name), group])
                if split == "test":
                    test_pairs_by_group[group][1].append(ids)
            for _ in range(n_non):
                name = _person(rng)
                ids = builder.add_pair(split, 0, [name, group], [_distinct_person(rng, name), group])
                if split == "test":
                    test_pairs_by_group[group][0].append(ids)
    files = builder.write(out_dir)

    def write_scores(filename: str, hits: dict[str, int]) -> None:
        rows = []
        for group in GROUPS:
            matches = test_pairs_by_group[group][1]
            non_matches = test_pairs_by_group[group][0]
            hot = set(rng.sample(range(len(matches)), hits[group]))
            for i, (l, r) in enumerate(matches):
                lo, hi = (0.55, 0.99) if i in hot else (0.01, 0.45)
                rows.append((l, r, round(rng.uniform(lo, hi), 4)))
            false_hot = set(rng.sample(range(len(non_matches)), _FALSE_HITS))
            for i, (l, r) in enumerate(non_matches):
                lo, hi = (0.55, 0.99) if i in false_hot else (0.01, 0.45)
                rows.append((l, r, round(rng.uniform(lo, hi), 4)))
        _write_csv(out_dir / filename, ("ltable_id", "rtable_id", "score"), rows)

    write_scores("scores_biased.csv", _BIASED_HITS)
    write_scores("scores_fair.csv", _FAIR_HITS)
    files["scores_biased"] = "scores_biased.csv"
    files["scores_fair"] = "scores_fair.csv"

    n_groups = len(GROUPS)
    overall_biased = sum(_BIASED_HITS.values()) / (n_groups * _SCORES_MATCHES)
    overall_fair = sum(_FAIR_HITS.values()) / (n_groups * _SCORES_MATCHES)
    sensitive = SensitiveAttributeSpec(
        attributes=(SensitiveAttribute(name="origin"),), intersectional=False
    )
    return {
        "profile": "scores",
        "groups": list(GROUPS),
        "planted_group": PLANTED_GROUP,
        "files": files,
        "sensitive": sensitive.to_json(),
        "recommended": {"tau": 0.5, "theta": 0.2, "mode": "subtraction"},
        "expected": {
            "biased": {
                "tpr": {g: _BIASED_HITS[g] / _SCORES_MATCHES for g in GROUPS},
                "overall_tpr": overall_biased,
                "tprp_disparity": {
                    g: max(0.0, overall_biased - _BIASED_HITS[g] / _SCORES_MATCHES)
                    for g in GROUPS
                },
            },
            "fair": {
                "tpr": {g: _FAIR_HITS[g] / _SCORES_MATCHES for g in GROUPS},
                "overall_tpr": overall_fair,
                "tprp_disparity": {g: 0.0 for g in GROUPS},
            },
        },
    }


def _faculty_profile(rng: random.Random, out_dir: Path) -> dict:
    builder = _Builder(("name", "institution", "origin", "career"))
    for split, (n_match, n_non) in _FACULTY_COUNTS.items():
        for group in GROUPS:
            moved = set(rng.sample(range(n_match), round(_FACULTY_NO_INSTITUTION_SHARE * n_match)))
            for i in range(n_match):
                career = CAREERS[i % 2]
                inst = rng.choice(_INSTITUTIONS)
                other_inst = inst
                if i in moved:
                    other_inst = rng.choice([x for x in _INSTITUTIONS if x != inst])
                if group == PLANTED_GROUP:
                    name, variant = _planted_name_pair(rng)
                else:
                    name = _person(rng)
                    variant = _typo(rng, name)
                builder.add_pair(
                    split, 1, [name, inst, group, career], [variant, other_inst, group, career]
                )
            for i in range(n_non):
                career = CAREERS[i % 2]
                name = _person(rng)
                builder.add_pair(
                    split,
                    0,
                    [name, rng.choice(_INSTITUTIONS), group, career],
                    [_distinct_person(rng, name), rng.choice(_INSTITUTIONS), group, career],
                )
    files = builder.write(out_dir)
    sensitive = SensitiveAttributeSpec(
        attributes=(SensitiveAttribute(name="origin"), SensitiveAttribute(name="career")),
        intersectional=True,
    )
    n_match_test = _FACULTY_COUNTS["test"][0]
    with_inst = n_match_test - round(_FACULTY_NO_INSTITUTION_SHARE * n_match_test)
    tpr_kept = with_inst / n_match_test  # groups whose names survive the mean filter
    overall = 2 * tpr_kept / len(GROUPS)  # planted group contributes zero true positives
    return {
        "profile": "faculty",
        "groups": list(GROUPS),
        "planted_group": PLANTED_GROUP,
        "files": files,
        "sensitive": sensitive.to_json(),
        "recommended": {
            "tau": _FACULTY_TAU,
            "theta": 0.2,
            "mode": "subtraction",
            "matchers": ["decision-stump", "threshold"],
        },
        "expected": {
            "threshold": {
                "tpr": {"alpha": tpr_kept, "beta": tpr_kept, "gamma": 0.0},
                "overall_tpr": overall,
                "tprp_disparity": {"alpha": 0.0, "beta": 0.0, "gamma": overall},
            },
            "decision-stump": {"tpr": {g: tpr_kept for g in GROUPS}},
        },
    }


def generate(profile: str, seed: int, out_dir: str | Path) -> dict:
    """Write one synthetic dataset bundle and return its metadata document."""
    if profile not in PROFILES:
        raise ValueError(f"unknown profile {profile!r}; choose from {PROFILES}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = random.Random(seed)
    meta = _scores_profile(rng, out_dir) if profile == "scores" else _faculty_profile(rng, out_dir)
    meta["seed"] = seed
    (out_dir / "meta.json").write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
    return meta
