"""CSV ingestion, labeled-pair splits, and one-hot subgroup encodings.

Everything here is pure: a loaded Dataset is immutable and safe to share
across threads. Group extraction unifies binary, non-binary, set-valued,
and intersectional sensitive attributes into one bit vector per entity.
"""

from __future__ import annotations

import csv
import itertools
import math
import random
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable

UNKNOWN_TOKEN = "unknown"
DEFAULT_SUBGROUP_CAP = 256

SINGLE = "single"
PAIRWISE = "pairwise"

_PAIR_ALIASES = (("id1", "id2", "label"), ("ltable_id", "rtable_id", "label"))


class IngestError(ValueError):
    """Malformed or inconsistent input; carries file and line context."""

    def __init__(self, message: str, path: str | Path | None = None, line: int | None = None):
        self.path = str(path) if path is not None else None
        self.line = line
        loc = ""
        if self.path is not None:
            loc = f" [{self.path}" + (f":{line}" if line is not None else "") + "]"
        super().__init__(message + loc)


@dataclass(frozen=True)
class EntityTable:
    """One side of a record-pair dataset: ordered schema plus rows keyed by id."""

    table_id: str
    schema: tuple[str, ...]
    rows: dict[str, dict[str, str | None]]

    def row(self, entity_id: str) -> dict[str, str | None]:
        return self.rows[entity_id]

    def __contains__(self, entity_id: str) -> bool:
        return entity_id in self.rows


@dataclass(frozen=True)
class LabeledPair:
    left_id: str
    right_id: str
    label: int  # 1 = match, 0 = non-match


@dataclass(frozen=True)
class LabeledPairSet:
    split_tag: str  # train | valid | test
    pairs: tuple[LabeledPair, ...]

    def __len__(self) -> int:
        return len(self.pairs)

    def match_count(self) -> int:
        return sum(p.label for p in self.pairs)


@dataclass(frozen=True)
class SensitiveAttribute:
    name: str
    kind: str = "single-valued"  # or "set-valued"
    delimiter: str = "|"


@dataclass(frozen=True)
class SensitiveAttributeSpec:
    attributes: tuple[SensitiveAttribute, ...]
    intersectional: bool = False

    def __post_init__(self):
        if not self.attributes:
            raise IngestError("sensitive-attribute spec needs at least one attribute")
        for attr in self.attributes:
            if attr.kind not in ("single-valued", "set-valued"):
                raise IngestError(f"unknown sensitive-attribute kind {attr.kind!r}")
            if attr.kind == "set-valued" and not attr.delimiter:
                raise IngestError(f"set-valued attribute {attr.name!r} needs a non-empty delimiter")

    @classmethod
    def from_json(cls, obj: dict) -> "SensitiveAttributeSpec":
        attrs = tuple(
            SensitiveAttribute(
                name=a["name"],
                kind=a.get("kind", "single-valued"),
                delimiter=a.get("delimiter", "|"),
            )
            for a in obj.get("attributes", [])
        )
        return cls(attributes=attrs, intersectional=bool(obj.get("intersectional", False)))

    def to_json(self) -> dict:
        return {
            "attributes": [
                {"name": a.name, "kind": a.kind, "delimiter": a.delimiter} for a in self.attributes
            ],
            "intersectional": self.intersectional,
        }


@dataclass(frozen=True)
class Subgroup:
    """A named position in the encoding vector.

    Intersections carry one parent per constituent atomic value, so a
    coarse group's descendants can be enumerated for drill-down.
    """

    name: str
    index: int
    parents: frozenset[str] = frozenset()


@dataclass(frozen=True)
class GroupEncoding:
    """One-hot membership bits over the subgroup universe, packed in an int."""

    size: int
    mask: int = 0

    @classmethod
    def from_indices(cls, size: int, indices: Iterable[int]) -> "GroupEncoding":
        mask = 0
        for i in indices:
            if not 0 <= i < size:
                raise ValueError(f"subgroup index {i} outside encoding of size {size}")
            mask |= 1 << i
        return cls(size=size, mask=mask)

    def has(self, index: int) -> bool:
        return (self.mask >> index) & 1 == 1

    def indices(self) -> tuple[int, ...]:
        return tuple(i for i in range(self.size) if (self.mask >> i) & 1)

    def popcount(self) -> int:
        return self.mask.bit_count()

    def bitstring(self) -> str:
        return "".join("1" if (self.mask >> i) & 1 else "0" for i in range(self.size))

    @classmethod
    def from_bitstring(cls, bits: str) -> "GroupEncoding":
        return cls(size=len(bits), mask=sum(1 << i for i, b in enumerate(bits) if b == "1"))


@dataclass(frozen=True)
class Dataset:
    left: EntityTable
    right: EntityTable
    splits: dict[str, LabeledPairSet]
    sensitive: SensitiveAttributeSpec | None = None
    subgroups: tuple[Subgroup, ...] = ()
    encodings: dict[str, dict[str, GroupEncoding]] = field(default_factory=dict)

    def encoding_for(self, side: str, entity_id: str) -> GroupEncoding:
        return self.encodings[side][entity_id]

    def subgroup_named(self, name: str) -> Subgroup:
        for sg in self.subgroups:
            if sg.name == name:
                return sg
        raise KeyError(f"unknown subgroup {name!r}")

    def with_groups(
        self,
        sensitive: SensitiveAttributeSpec,
        subgroups: tuple[Subgroup, ...],
        encodings: dict[str, dict[str, GroupEncoding]],
    ) -> "Dataset":
        return replace(self, sensitive=sensitive, subgroups=subgroups, encodings=encodings)


def normalize_value(value: str) -> str:
    return value.strip().lower()


def _load_table(path: str | Path, table_id: str) -> EntityTable:
    path = Path(path)
    if not path.exists():
        raise IngestError("file not found", path)
    rows: dict[str, dict[str, str | None]] = {}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestError("empty file, header row required", path, 1) from None
        header = [h.strip() for h in header]
        if not header or header[0].lower() != "id":
            raise IngestError("first column must be named `id`", path, 1)
        attributes = tuple(header[1:])
        for record in reader:
            line = reader.line_num
            if len(record) != len(header):
                raise IngestError(
                    f"row has {len(record)} fields, expected {len(header)}", path, line
                )
            entity_id = record[0].strip()
            if not entity_id:
                raise IngestError("empty entity id", path, line)
            if entity_id in rows:
                raise IngestError(f"duplicate entity id {entity_id!r}", path, line)
            rows[entity_id] = {
                attr: (value if value != "" else None)
                for attr, value in zip(attributes, record[1:])
            }
    return EntityTable(table_id=table_id, schema=attributes, rows=rows)


def _load_pairs(
    path: str | Path,
    split_tag: str,
    left: EntityTable | None = None,
    right: EntityTable | None = None,
) -> LabeledPairSet:
    path = Path(path)
    if not path.exists():
        raise IngestError("file not found", path)
    pairs: list[LabeledPair] = []
    seen: set[tuple[str, str]] = set()
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise IngestError("empty file, header row required", path, 1) from None
        lower = [h.lower() for h in header]
        columns = None
        for alias in _PAIR_ALIASES:
            if all(name in lower for name in alias):
                columns = tuple(lower.index(name) for name in alias)
                break
        if columns is None:
            raise IngestError(
                "pair file needs columns id1,id2,label or ltable_id,rtable_id,label", path, 1
            )
        li, ri, lab = columns
        for record in reader:
            line = reader.line_num
            if len(record) != len(header):
                raise IngestError(
                    f"row has {len(record)} fields, expected {len(header)}", path, line
                )
            left_id, right_id, label_text = record[li].strip(), record[ri].strip(), record[lab].strip()
            if label_text not in ("0", "1"):
                raise IngestError(f"label must be 0 or 1, got {label_text!r}", path, line)
            if left is not None and left_id not in left:
                raise IngestError(f"pair references unknown left id {left_id!r}", path, line)
            if right is not None and right_id not in right:
                raise IngestError(f"pair references unknown right id {right_id!r}", path, line)
            key = (left_id, right_id)
            if key in seen:
                raise IngestError(f"duplicate pair ({left_id}, {right_id})", path, line)
            seen.add(key)
            pairs.append(LabeledPair(left_id=left_id, right_id=right_id, label=int(label_text)))
    return LabeledPairSet(split_tag=split_tag, pairs=tuple(pairs))


def load_dataset(
    left_path: str | Path,
    right_path: str | Path,
    pair_paths: tuple[str | Path, str | Path, str | Path],
) -> Dataset:
    """Load two entity tables plus train/valid/test pair files.

    Returns a Dataset without group encodings; call extract_groups next.
    """
    left = _load_table(left_path, "left")
    right = _load_table(right_path, "right")
    tags = ("train", "valid", "test")
    splits = {
        tag: _load_pairs(path, tag, left, right) for tag, path in zip(tags, pair_paths)
    }
    return Dataset(left=left, right=right, splits=splits)


def serialize_table(table: EntityTable) -> str:
    """Canonical CSV form: original header order, LF endings, empty for null."""
    import io

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("id",) + table.schema)
    for entity_id, row in table.rows.items():
        writer.writerow([entity_id] + [row[a] if row[a] is not None else "" for a in table.schema])
    return buf.getvalue()


def serialize_pairs(pairset: LabeledPairSet) -> str:
    import io

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("id1", "id2", "label"))
    for pair in pairset.pairs:
        writer.writerow((pair.left_id, pair.right_id, pair.label))
    return buf.getvalue()


def _largest_remainder(quotas: list[float], total: int) -> list[int]:
    base = [math.floor(q) for q in quotas]
    short = total - sum(base)
    order = sorted(range(len(quotas)), key=lambda i: (-(quotas[i] - base[i]), i))
    for i in order[:short]:
        base[i] += 1
    return base


def split_pairs(
    all_pairs: Iterable[LabeledPair],
    ratios: tuple[float, float, float],
    seed: int,
) -> tuple[LabeledPairSet, LabeledPairSet, LabeledPairSet]:
    """Deterministic label-stratified partition into train/valid/test.

    Split sizes follow the ratios exactly (largest remainder); each split's
    match count stays within one pair of the proportional share.
    """
    pairs = list(all_pairs)
    if not pairs:
        raise IngestError("cannot split an empty pair list")
    if any(r < 0 for r in ratios):
        raise IngestError("split ratios must be non-negative")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise IngestError(f"split ratios must sum to 1, got {sum(ratios)}")

    n = len(pairs)
    totals = _largest_remainder([r * n for r in ratios], n)
    if totals[0] == 0:
        warnings.warn("split ratios produce an empty train split", stacklevel=2)

    matches = [p for p in pairs if p.label == 1]
    non_matches = [p for p in pairs if p.label == 0]
    rng = random.Random(seed)
    rng.shuffle(matches)
    rng.shuffle(non_matches)

    m = len(matches)
    match_counts = _largest_remainder([t * m / n for t in totals], m)
    # Guard against a split drawing more matches than its total size.
    for i in range(3):
        while match_counts[i] > totals[i]:
            j = max(range(3), key=lambda k: totals[k] - match_counts[k])
            match_counts[i] -= 1
            match_counts[j] += 1

    out: list[LabeledPairSet] = []
    mi = ni = 0
    for tag, total, mc in zip(("train", "valid", "test"), totals, match_counts):
        chunk = matches[mi : mi + mc] + non_matches[ni : ni + (total - mc)]
        mi += mc
        ni += total - mc
        out.append(LabeledPairSet(split_tag=tag, pairs=tuple(chunk)))
    return out[0], out[1], out[2]


def _entity_tokens(
    row: dict[str, str | None], attr: SensitiveAttribute
) -> tuple[str, ...]:
    raw = row.get(attr.name)
    if raw is None or not raw.strip():
        return (UNKNOWN_TOKEN,)
    if attr.kind == "set-valued":
        parts = sorted({normalize_value(p) for p in raw.split(attr.delimiter) if p.strip()})
        return tuple(parts) if parts else (UNKNOWN_TOKEN,)
    return (normalize_value(raw),)


def extract_groups(
    dataset: Dataset,
    spec: SensitiveAttributeSpec,
    cap: int = DEFAULT_SUBGROUP_CAP,
) -> tuple[tuple[Subgroup, ...], dict[str, dict[str, GroupEncoding]]]:
    """Derive the subgroup universe and encode every entity in both tables.

    Non-intersectional: one subgroup per observed value (values shared across
    attributes collapse to one subgroup). Intersectional: the full cross
    product of the observed per-attribute vocabularies, named value-value-...,
    plus each atomic value as a parent subgroup.
    """
    for attr in spec.attributes:
        for table in (dataset.left, dataset.right):
            if attr.name not in table.schema:
                raise IngestError(
                    f"sensitive attribute {attr.name!r} missing from table {table.table_id!r}"
                )

    tables = {"left": dataset.left, "right": dataset.right}
    tokens: dict[str, dict[str, dict[str, tuple[str, ...]]]] = {
        side: {eid: {} for eid in table.rows} for side, table in tables.items()
    }
    vocab: dict[str, list[str]] = {}
    for attr in spec.attributes:
        observed: set[str] = set()
        for side, table in tables.items():
            for eid, row in table.rows.items():
                toks = _entity_tokens(row, attr)
                tokens[side][eid][attr.name] = toks
                observed.update(toks)
        vocab[attr.name] = sorted(observed)

    names: dict[str, frozenset[str]] = {}
    if spec.intersectional:
        sizes = [len(vocab[a.name]) for a in spec.attributes]
        product_size = math.prod(sizes)
        if product_size > cap:
            raise IngestError(
                f"intersectional cross product has {product_size} subgroups, cap is {cap}"
            )
        for combo in itertools.product(*(vocab[a.name] for a in spec.attributes)):
            names["-".join(combo)] = frozenset(combo)
        for attr in spec.attributes:
            for value in vocab[attr.name]:
                names.setdefault(value, frozenset())
    else:
        for attr in spec.attributes:
            for value in vocab[attr.name]:
                names.setdefault(value, frozenset())

    ordered = sorted(names)
    subgroups = tuple(
        Subgroup(name=name, index=i, parents=names[name]) for i, name in enumerate(ordered)
    )
    index_of = {name: i for i, name in enumerate(ordered)}

    encodings: dict[str, dict[str, GroupEncoding]] = {}
    size = len(subgroups)
    for side, table in tables.items():
        side_enc: dict[str, GroupEncoding] = {}
        for eid in table.rows:
            bits: set[int] = set()
            per_attr = [tokens[side][eid][a.name] for a in spec.attributes]
            for toks in per_attr:
                for tok in toks:
                    bits.add(index_of[tok])
            if spec.intersectional:
                for combo in itertools.product(*per_attr):
                    bits.add(index_of["-".join(combo)])
            side_enc[eid] = GroupEncoding.from_indices(size, bits)
        encodings[side] = side_enc
    return subgroups, encodings


def legitimate_groups(
    left: GroupEncoding, right: GroupEncoding, paradigm: str
) -> frozenset[int] | frozenset[tuple[int, int]]:
    """Subgroups (or unordered subgroup pairs) a correspondence counts toward.

    single: union of the two entities' subgroups. pairwise: every unordered
    pair with one side from each entity, identity pairs included.
    """
    if left.size != right.size:
        raise ValueError(f"encoding sizes differ: {left.size} vs {right.size}")
    if paradigm == SINGLE:
        return frozenset(left.indices() + right.indices())
    if paradigm == PAIRWISE:
        pairs = set()
        for i in left.indices():
            for j in right.indices():
                pairs.add((i, j) if i <= j else (j, i))
        return frozenset(pairs)
    raise ValueError(f"unknown paradigm {paradigm!r}")
