"""Built-in similarity-feature matchers and the external-score adapter.

Four deliberately simple non-neural matchers (threshold, logistic,
gaussian naive-bayes, decision stump) trained on per-attribute string
similarities, plus a loader for score files produced by matchers run
elsewhere. All training is deterministic for a fixed seed.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .ingest import Dataset, EntityTable, IngestError, LabeledPair, normalize_value

THRESHOLD = "threshold"
LOGISTIC = "logistic"
NAIVE_BAYES = "naive-bayes"
DECISION_STUMP = "decision-stump"
BUILTIN_KINDS = (THRESHOLD, LOGISTIC, NAIVE_BAYES, DECISION_STUMP)

LOGISTIC_EPOCHS = 500
LOGISTIC_LR = 0.1
VARIANCE_FLOOR = 1e-4
NUMERIC_SHARE = 0.9  # attribute is numeric if >= 90% of non-null values parse
SCORE_EPSILON = 1e-6

MATCHER_DESCRIPTIONS = {
    THRESHOLD: "Scores a pair by the mean of its similarity features; no learned weights.",
    LOGISTIC: "Logistic regression fit by batch gradient descent (500 epochs, lr 0.1).",
    NAIVE_BAYES: "Gaussian naive Bayes over similarity features with a variance floor.",
    DECISION_STUMP: "Single best (feature, cut) rule chosen by validation error.",
}


class UntrainableError(ValueError):
    """Training data cannot support the requested matcher kind."""


class ScoreFileError(ValueError):
    """External score file is malformed or does not cover the test pairs."""


def levenshtein(a: str, b: str) -> int:
    if a == b:
        return 0
    if not a:
        return len(b)
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def edit_similarity(a: str, b: str) -> float:
    longest = max(len(a), len(b))
    if longest == 0:
        return 1.0
    return 1.0 - levenshtein(a, b) / longest


def token_jaccard(a: str, b: str) -> float:
    ta, tb = set(a.split()), set(b.split())
    if not ta and not tb:
        return 1.0
    if not ta or not tb:
        return 0.0
    return len(ta & tb) / len(ta | tb)


def _try_float(value: str) -> float | None:
    try:
        f = float(value)
    except ValueError:
        return None
    return f if math.isfinite(f) else None


@dataclass(frozen=True)
class FeatureSchema:
    """Aligned attributes plus per-attribute numeric ranges and feature names."""

    attributes: tuple[str, ...]
    numeric_ranges: dict[str, tuple[float, float]]
    feature_names: tuple[str, ...]


def build_feature_schema(
    left: EntityTable, right: EntityTable, exclude: Iterable[str] = ()
) -> FeatureSchema:
    """Align non-id attributes present in both tables, in left-schema order.

    Attributes in `exclude` (typically the sensitive attributes) are skipped
    so matchers cannot key directly on group membership.
    """
    excluded = set(exclude)
    attributes = tuple(a for a in left.schema if a in right.schema and a not in excluded)
    numeric_ranges: dict[str, tuple[float, float]] = {}
    for attr in attributes:
        values = [
            row[attr]
            for table in (left, right)
            for row in table.rows.values()
            if row[attr] is not None
        ]
        if not values:
            continue
        parsed = [_try_float(v) for v in values]
        ok = [p for p in parsed if p is not None]
        if len(ok) >= NUMERIC_SHARE * len(values):
            numeric_ranges[attr] = (min(ok), max(ok))
    names: list[str] = []
    for attr in attributes:
        names += [f"{attr}:jaccard", f"{attr}:edit", f"{attr}:exact"]
        if attr in numeric_ranges:
            names.append(f"{attr}:numeric")
    return FeatureSchema(
        attributes=attributes, numeric_ranges=numeric_ranges, feature_names=tuple(names)
    )


def extract_features(
    schema: FeatureSchema,
    left_row: dict[str, str | None],
    right_row: dict[str, str | None],
) -> np.ndarray:
    """Similarity vector for one pair; symmetric in its two rows.

    A null on either side zeroes every component for that attribute. The
    numeric component is a similarity (1 - scaled absolute difference) so
    that 0 always reads as dissimilar.
    """
    out: list[float] = []
    for attr in schema.attributes:
        a, b = left_row.get(attr), right_row.get(attr)
        if a is None or b is None:
            out += [0.0, 0.0, 0.0]
            if attr in schema.numeric_ranges:
                out.append(0.0)
            continue
        na, nb = normalize_value(a), normalize_value(b)
        out += [token_jaccard(na, nb), edit_similarity(na, nb), 1.0 if na == nb else 0.0]
        if attr in schema.numeric_ranges:
            lo, hi = schema.numeric_ranges[attr]
            fa, fb = _try_float(na), _try_float(nb)
            if fa is None or fb is None:
                out.append(0.0)
            elif hi == lo:
                out.append(1.0 if fa == fb else 0.0)
            else:
                out.append(1.0 - min(1.0, abs(fa - fb) / (hi - lo)))
    return np.asarray(out, dtype=float)


def features_for_pairs(
    schema: FeatureSchema, dataset: Dataset, pairs: Sequence[LabeledPair]
) -> np.ndarray:
    rows = [
        extract_features(schema, dataset.left.row(p.left_id), dataset.right.row(p.right_id))
        for p in pairs
    ]
    width = len(schema.feature_names)
    return np.asarray(rows, dtype=float).reshape(len(rows), width)


@dataclass
class Matcher:
    """A trained matcher: deterministic scores in [0,1] given its parameters."""

    matcher_id: str
    kind: str
    params: dict
    training_meta: dict = field(default_factory=dict)

    def predict_scores(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        expected = len(self.training_meta.get("feature_names", ()))
        if expected and X.shape[1] != expected:
            raise ValueError(
                f"feature arity mismatch: matcher trained on {expected}, got {X.shape[1]}"
            )
        if self.kind == THRESHOLD:
            return X.mean(axis=1)
        if self.kind == LOGISTIC:
            w = np.asarray(self.params["weights"], dtype=float)
            z = X @ w + self.params["bias"]
            return 1.0 / (1.0 + np.exp(-z))
        if self.kind == NAIVE_BAYES:
            return _naive_bayes_posterior(self.params, X)
        if self.kind == DECISION_STUMP:
            return (X[:, self.params["feature"]] > self.params["cut"]).astype(float)
        raise ValueError(f"matcher kind {self.kind!r} cannot score features")

    def to_json(self) -> dict:
        return {
            "matcher_id": self.matcher_id,
            "kind": self.kind,
            "params": self.params,
            "training_meta": self.training_meta,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Matcher":
        return cls(
            matcher_id=obj["matcher_id"],
            kind=obj["kind"],
            params=obj["params"],
            training_meta=obj.get("training_meta", {}),
        )


def _naive_bayes_posterior(params: dict, X: np.ndarray) -> np.ndarray:
    logs = []
    for cls in ("0", "1"):
        mu = np.asarray(params["means"][cls], dtype=float)
        var = np.asarray(params["variances"][cls], dtype=float)
        ll = -0.5 * (np.log(2 * np.pi * var) + (X - mu) ** 2 / var).sum(axis=1)
        logs.append(ll + math.log(params["priors"][cls]))
    log0, log1 = logs
    peak = np.maximum(log0, log1)
    p1 = np.exp(log1 - peak)
    return p1 / (p1 + np.exp(log0 - peak))


def _f1(predicted: np.ndarray, truth: np.ndarray) -> float:
    tp = int(((predicted == 1) & (truth == 1)).sum())
    fp = int(((predicted == 1) & (truth == 0)).sum())
    fn = int(((predicted == 0) & (truth == 1)).sum())
    return 2 * tp / (2 * tp + fp + fn) if (2 * tp + fp + fn) else 0.0


def _cut_candidates(values: np.ndarray) -> list[float]:
    uniq = np.unique(values)
    mids = [(uniq[i] + uniq[i + 1]) / 2.0 for i in range(len(uniq) - 1)]
    return [-0.5] + mids + [1.0]


def train_matcher(
    kind: str,
    train_X: np.ndarray,
    train_y: Sequence[int],
    valid_X: np.ndarray,
    valid_y: Sequence[int],
    seed: int = 0,
    feature_names: Sequence[str] = (),
) -> Matcher:
    """Fit one built-in matcher; bitwise-reproducible for equal inputs and seed."""
    train_X = np.asarray(train_X, dtype=float)
    valid_X = np.asarray(valid_X, dtype=float)
    train_y = np.asarray(train_y, dtype=int)
    valid_y = np.asarray(valid_y, dtype=int)
    if train_X.shape[0] == 0:
        raise UntrainableError("training set is empty")
    if kind in (LOGISTIC, NAIVE_BAYES) and len(np.unique(train_y)) < 2:
        raise UntrainableError(f"{kind} needs both classes in the training data")

    meta = {"seed": seed, "feature_names": list(feature_names)}
    if kind == THRESHOLD:
        scores = valid_X.mean(axis=1)
        best_cut, best_f1 = 0.0, -1.0
        for cut in _cut_candidates(scores):
            f1 = _f1((scores > cut).astype(int), valid_y)
            if f1 > best_f1:
                best_cut, best_f1 = float(cut), f1
        return Matcher(THRESHOLD, THRESHOLD, {"cut": best_cut, "valid_f1": best_f1}, meta)

    if kind == LOGISTIC:
        n, width = train_X.shape
        w = np.zeros(width)
        b = 0.0
        meta["epochs"] = LOGISTIC_EPOCHS
        for _ in range(LOGISTIC_EPOCHS):
            p = 1.0 / (1.0 + np.exp(-(train_X @ w + b)))
            err = p - train_y
            w -= LOGISTIC_LR * (train_X.T @ err) / n
            b -= LOGISTIC_LR * float(err.mean())
        return Matcher(LOGISTIC, LOGISTIC, {"weights": w.tolist(), "bias": b}, meta)

    if kind == NAIVE_BAYES:
        params: dict = {"priors": {}, "means": {}, "variances": {}}
        for cls in (0, 1):
            rows = train_X[train_y == cls]
            params["priors"][str(cls)] = len(rows) / len(train_y)
            params["means"][str(cls)] = rows.mean(axis=0).tolist()
            params["variances"][str(cls)] = np.maximum(
                rows.var(axis=0), VARIANCE_FLOOR
            ).tolist()
        return Matcher(NAIVE_BAYES, NAIVE_BAYES, params, meta)

    if kind == DECISION_STUMP:
        best = None  # (error, feature, cut)
        for f in range(train_X.shape[1]):
            for cut in _cut_candidates(train_X[:, f]):
                err = float(((valid_X[:, f] > cut).astype(int) != valid_y).mean())
                key = (err, f, cut)
                if best is None or key < best:
                    best = key
        err, f, cut = best
        return Matcher(
            DECISION_STUMP, DECISION_STUMP, {"feature": f, "cut": float(cut), "valid_error": err}, meta
        )

    raise ValueError(f"unknown matcher kind {kind!r}")


@dataclass(frozen=True)
class ScoreTable:
    """Per-pair match scores in [0,1] for one matcher."""

    matcher_id: str
    rows: tuple[tuple[str, str, float], ...]

    def score_map(self) -> dict[tuple[str, str], float]:
        return {(l, r): s for l, r, s in self.rows}


def predict(matcher: Matcher, pairs: Sequence[LabeledPair], X: np.ndarray) -> ScoreTable:
    scores = matcher.predict_scores(np.asarray(X, dtype=float))
    rows = tuple(
        (p.left_id, p.right_id, float(s)) for p, s in zip(pairs, scores)
    )
    return ScoreTable(matcher_id=matcher.matcher_id, rows=rows)


def load_external_scores(path: str | Path, dataset: Dataset, name: str = "scores") -> ScoreTable:
    """Read an uploaded score file and check it covers every test pair.

    Scores within 1e-6 outside [0,1] are clamped with a warning; anything
    further out is rejected.
    """
    path = Path(path)
    if not path.exists():
        raise ScoreFileError(f"score file not found: {path}")
    rows: list[tuple[str, str, float]] = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip().lower() for h in next(reader)]
        except StopIteration:
            raise ScoreFileError(f"empty score file: {path}") from None
        columns = None
        for alias in (("ltable_id", "rtable_id", "score"), ("id1", "id2", "score")):
            if all(a in header for a in alias):
                columns = tuple(header.index(a) for a in alias)
                break
        if columns is None:
            raise ScoreFileError(
                f"score file needs columns ltable_id,rtable_id,score or id1,id2,score: {path}"
            )
        li, ri, si = columns
        for record in reader:
            line = reader.line_num
            left_id, right_id = record[li].strip(), record[ri].strip()
            if left_id not in dataset.left:
                raise ScoreFileError(f"unknown left id {left_id!r} [{path}:{line}]")
            if right_id not in dataset.right:
                raise ScoreFileError(f"unknown right id {right_id!r} [{path}:{line}]")
            score = _try_float(record[si].strip())
            if score is None:
                raise ScoreFileError(f"score is not a finite number [{path}:{line}]")
            if score < -SCORE_EPSILON or score > 1.0 + SCORE_EPSILON:
                raise ScoreFileError(
                    f"score {score} outside [0,1] beyond tolerance [{path}:{line}]"
                )
            if score < 0.0 or score > 1.0:
                warnings.warn(f"score {score} clamped into [0,1] ({path}:{line})", stacklevel=2)
                score = min(1.0, max(0.0, score))
            rows.append((left_id, right_id, score))
    covered = {(l, r) for l, r, _ in rows}
    for pair in dataset.splits["test"].pairs:
        if (pair.left_id, pair.right_id) not in covered:
            raise ScoreFileError(
                f"score file misses test pair ({pair.left_id}, {pair.right_id}): {path}"
            )
    return ScoreTable(matcher_id=f"external:{name}", rows=tuple(rows))


def apply_match_threshold(scores: ScoreTable | Sequence[float], tau: float) -> list[int]:
    """Binarize scores: match iff score is strictly above the cut-off."""
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"matching threshold must be in [0,1], got {tau}")
    values = [s for _, _, s in scores.rows] if isinstance(scores, ScoreTable) else scores
    return [1 if s > tau else 0 for s in values]


def save_matcher(matcher: Matcher, path: str | Path) -> None:
    Path(path).write_text(json.dumps(matcher.to_json(), indent=2) + "\n", encoding="utf-8")


def load_matcher(path: str | Path) -> Matcher:
    return Matcher.from_json(json.loads(Path(path).read_text(encoding="utf-8")))
