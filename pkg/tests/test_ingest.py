from __future__ import annotations

import random
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from matchaudit.ingest import (
    Dataset,
    GroupEncoding,
    IngestError,
    LabeledPair,
    SensitiveAttribute,
    SensitiveAttributeSpec,
    extract_groups,
    legitimate_groups,
    load_dataset,
    serialize_pairs,
    serialize_table,
    split_pairs,
)

from conftest import enc, write_csv


def table_a(tmp_path, rows=None):
    rows = rows or [
        ("1", "anna muir", "de"),
        ("2", "bo chen", "cn"),
        ("3", "carla voss", "de"),
        ("4", "dan wu", "cn"),
        ("5", "erik lang", "de"),
    ]
    return write_csv(tmp_path / "tableA.csv", ("id", "name", "citizenship"), rows)


def table_b(tmp_path, rows=None):
    rows = rows or [
        ("1", "ana muir", "de"),
        ("2", "bo chen", "cn"),
        ("3", "karla voss", "de"),
        ("4", "dan woo", "cn"),
        ("5", "erika lang", "de"),
    ]
    return write_csv(tmp_path / "tableB.csv", ("id", "name", "citizenship"), rows)


def pair_files(tmp_path, test_rows=None):
    train = write_csv(tmp_path / "train.csv", ("id1", "id2", "label"), [("1", "1", "1"), ("2", "3", "0")])
    valid = write_csv(tmp_path / "valid.csv", ("id1", "id2", "label"), [("3", "3", "1")])
    test = write_csv(
        tmp_path / "test.csv",
        ("id1", "id2", "label"),
        test_rows or [("2", "2", "1"), ("4", "4", "1"), ("5", "5", "1"), ("1", "4", "0")],
    )
    return train, valid, test


def test_load_dataset_roundtrip(tmp_path):
    ds = load_dataset(table_a(tmp_path), table_b(tmp_path), pair_files(tmp_path))
    assert len(ds.left.rows) == 5 and len(ds.right.rows) == 5
    assert len(ds.splits["test"]) == 4
    assert ds.left.schema == ("name", "citizenship")


def test_dangling_pair_reference_names_file_and_line(tmp_path):
    train, valid, _ = pair_files(tmp_path)
    test = write_csv(
        tmp_path / "dangling.csv", ("id1", "id2", "label"), [("1", "1", "1"), ("99", "1", "0")]
    )
    with pytest.raises(IngestError) as err:
        load_dataset(table_a(tmp_path), table_b(tmp_path), (train, valid, test))
    assert "99" in str(err.value)
    assert "dangling.csv:3" in str(err.value)


def test_magellan_layout_accepted_and_roundtrips(tmp_path):
    train, valid, _ = pair_files(tmp_path)
    test = write_csv(
        tmp_path / "magellan.csv",
        ("_id", "ltable_id", "rtable_id", "label"),
        [("0", "1", "1", "1"), ("1", "2", "4", "0")],
    )
    ds = load_dataset(table_a(tmp_path), table_b(tmp_path), (train, valid, test))
    assert [(p.left_id, p.right_id, p.label) for p in ds.splits["test"].pairs] == [
        ("1", "1", 1),
        ("2", "4", 0),
    ]
    # serialize -> reload -> serialize is a fixed point, byte for byte
    out = tmp_path / "canon"
    out.mkdir()
    (out / "tableA.csv").write_text(serialize_table(ds.left), encoding="utf-8")
    (out / "tableB.csv").write_text(serialize_table(ds.right), encoding="utf-8")
    for tag in ("train", "valid", "test"):
        (out / f"{tag}.csv").write_text(serialize_pairs(ds.splits[tag]), encoding="utf-8")
    again = load_dataset(
        out / "tableA.csv",
        out / "tableB.csv",
        (out / "train.csv", out / "valid.csv", out / "test.csv"),
    )
    assert serialize_table(again.left) == (out / "tableA.csv").read_text(encoding="utf-8")
    assert serialize_pairs(again.splits["test"]) == (out / "test.csv").read_text(encoding="utf-8")


def test_missing_id_column(tmp_path):
    bad = write_csv(tmp_path / "bad.csv", ("key", "name"), [("1", "x")])
    with pytest.raises(IngestError, match="`id`"):
        load_dataset(bad, table_b(tmp_path), pair_files(tmp_path))


def test_duplicate_entity_id(tmp_path):
    bad = write_csv(
        tmp_path / "bad.csv", ("id", "name", "citizenship"), [("1", "x", "de"), ("1", "y", "cn")]
    )
    with pytest.raises(IngestError, match="duplicate entity id"):
        load_dataset(bad, table_b(tmp_path), pair_files(tmp_path))


def test_malformed_row_arity(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("id,name,citizenship\n1,x\n", encoding="utf-8")
    with pytest.raises(IngestError, match="fields"):
        load_dataset(bad, table_b(tmp_path), pair_files(tmp_path))


def _pairs(n, n_match):
    return [
        LabeledPair(left_id=str(i), right_id=str(i), label=1 if i < n_match else 0)
        for i in range(n)
    ]


def test_split_sizes_and_union():
    pairs = _pairs(10, 5)
    train, valid, test = split_pairs(pairs, (0.6, 0.2, 0.2), seed=7)
    assert (len(train), len(valid), len(test)) == (6, 2, 2)
    assert sorted(p.left_id for s in (train, valid, test) for p in s.pairs) == sorted(
        p.left_id for p in pairs
    )


def test_split_degenerate_ratio():
    pairs = _pairs(8, 3)
    with pytest.warns(UserWarning):
        train, valid, test = split_pairs(pairs, (0, 1, 0), seed=1)
    assert (len(train), len(valid), len(test)) == (0, 8, 0)
    train, valid, test = split_pairs(pairs, (1, 0, 0), seed=1)
    assert len(train) == 8


def test_split_stratification_within_one_pair():
    pairs = _pairs(100, 20)
    train, valid, test = split_pairs(pairs, (0.6, 0.2, 0.2), seed=3)
    # brute-force recount of matches in each produced split
    counts = [sum(1 for p in s.pairs if p.label == 1) for s in (train, valid, test)]
    for got, want in zip(counts, (12, 4, 4)):
        assert abs(got - want) <= 1
    assert sum(counts) == 20


def test_split_partition_many_seeds():
    pairs = _pairs(23, 7)
    want = Counter((p.left_id, p.label) for p in pairs)
    for seed in range(1000):
        parts = split_pairs(pairs, (0.5, 0.25, 0.25), seed=seed)
        got = Counter((p.left_id, p.label) for s in parts for p in s.pairs)
        assert got == want


def test_split_deterministic():
    pairs = _pairs(50, 11)
    a = split_pairs(pairs, (0.6, 0.2, 0.2), seed=42)
    b = split_pairs(pairs, (0.6, 0.2, 0.2), seed=42)
    assert a == b


def test_split_bad_ratios():
    with pytest.raises(IngestError):
        split_pairs(_pairs(4, 2), (0.5, 0.5, 0.5), seed=0)
    with pytest.raises(IngestError):
        split_pairs([], (1, 0, 0), seed=0)


def _dataset_for_groups(tmp_path, rows_a, rows_b, header):
    a = write_csv(tmp_path / "ga.csv", header, rows_a)
    b = write_csv(tmp_path / "gb.csv", header, rows_b)
    train = write_csv(tmp_path / "gt.csv", ("id1", "id2", "label"), [(rows_a[0][0], rows_b[0][0], "1")])
    valid = write_csv(tmp_path / "gv.csv", ("id1", "id2", "label"), [(rows_a[0][0], rows_b[0][0], "1")])
    test = write_csv(tmp_path / "gs.csv", ("id1", "id2", "label"), [(rows_a[0][0], rows_b[0][0], "1")])
    return load_dataset(a, b, (train, valid, test))


def test_intersectional_groups_and_parents(tmp_path):
    rows = [("1", "white", "male"), ("2", "white", "female"), ("3", "black", "male")]
    ds = _dataset_for_groups(tmp_path, rows, [("9", "black", "female")], ("id", "race", "sex"))
    spec = SensitiveAttributeSpec(
        attributes=(SensitiveAttribute("race"), SensitiveAttribute("sex")), intersectional=True
    )
    subgroups, encodings = extract_groups(ds, spec)
    names = {sg.name for sg in subgroups}
    assert names == {
        "white-male", "white-female", "black-male", "black-female",
        "white", "black", "male", "female",
    }
    by_name = {sg.name: sg for sg in subgroups}
    assert by_name["white-male"].parents == frozenset({"white", "male"})
    assert by_name["white"].parents == frozenset()
    # entity 1 is white-male plus both parents
    bits = encodings["left"]["1"]
    assert {subgroups[i].name for i in bits.indices()} == {"white-male", "white", "male"}


def test_binary_one_hot(tmp_path):
    rows = [("1", "male"), ("2", "male"), ("3", "female")]
    ds = _dataset_for_groups(tmp_path, rows, [("9", "female")], ("id", "sex"))
    spec = SensitiveAttributeSpec(attributes=(SensitiveAttribute("sex"),))
    subgroups, encodings = extract_groups(ds, spec)
    assert [sg.name for sg in subgroups] == ["female", "male"]
    assert encodings["left"]["1"].bitstring() == "01"
    assert encodings["left"]["2"].bitstring() == "01"
    assert encodings["left"]["3"].bitstring() == "10"


def test_set_valued_attribute_sets_multiple_bits(tmp_path):
    rows = [("1", "de|cn"), ("2", "de"), ("3", "")]
    ds = _dataset_for_groups(tmp_path, rows, [("9", "cn")], ("id", "citizenships"))
    spec = SensitiveAttributeSpec(
        attributes=(SensitiveAttribute("citizenships", kind="set-valued", delimiter="|"),)
    )
    subgroups, encodings = extract_groups(ds, spec)
    names = [sg.name for sg in subgroups]
    assert names == ["cn", "de", "unknown"]
    # hand-listed memberships per entity
    memberships = {
        eid: {names[i] for i in encoding.indices()}
        for eid, encoding in encodings["left"].items()
    }
    assert memberships == {"1": {"de", "cn"}, "2": {"de"}, "3": {"unknown"}}


def test_missing_attribute_rejected(tmp_path):
    ds = _dataset_for_groups(tmp_path, [("1", "x")], [("9", "y")], ("id", "name"))
    spec = SensitiveAttributeSpec(attributes=(SensitiveAttribute("race"),))
    with pytest.raises(IngestError, match="race"):
        extract_groups(ds, spec)


def test_intersectional_cap(tmp_path):
    rows = [(str(i), f"v{i}", f"w{i}") for i in range(1, 20)]
    ds = _dataset_for_groups(tmp_path, rows, [("99", "v1", "w1")], ("id", "a", "b"))
    spec = SensitiveAttributeSpec(
        attributes=(SensitiveAttribute("a"), SensitiveAttribute("b")), intersectional=True
    )
    with pytest.raises(IngestError, match="cap"):
        extract_groups(ds, spec, cap=64)


def test_single_valued_blocks_have_exactly_one_bit(tmp_path):
    rows = [("1", "red", "male"), ("2", "blue", "female"), ("3", "red", "female")]
    ds = _dataset_for_groups(tmp_path, rows, [("9", "green", "male")], ("id", "team", "sex"))
    spec = SensitiveAttributeSpec(
        attributes=(SensitiveAttribute("team"), SensitiveAttribute("sex"))
    )
    subgroups, encodings = extract_groups(ds, spec)
    blocks = {
        "team": {sg.index for sg in subgroups if sg.name in {"red", "blue", "green"}},
        "sex": {sg.index for sg in subgroups if sg.name in {"male", "female"}},
    }
    for side in encodings.values():
        for encoding in side.values():
            on = set(encoding.indices())
            for block in blocks.values():
                assert len(on & block) == 1


def test_every_entity_encoded_with_popcount(tmp_path):
    rows = [("1", "", "de|cn"), ("2", "x", ""), ("3", "y", "de")]
    ds = _dataset_for_groups(
        tmp_path, rows, [("9", "", "")], ("id", "team", "citizenships")
    )
    spec = SensitiveAttributeSpec(
        attributes=(
            SensitiveAttribute("team"),
            SensitiveAttribute("citizenships", kind="set-valued", delimiter="|"),
        )
    )
    _, encodings = extract_groups(ds, spec)
    for side in encodings.values():
        for encoding in side.values():
            assert encoding.popcount() >= 1


def test_legitimate_groups_single_union():
    left, right = enc(3, 0), enc(3, 1)  # cn=0, de=1
    assert legitimate_groups(left, right, "single") == frozenset({0, 1})


def test_legitimate_groups_pairwise_cross():
    left, right = enc(3, 0), enc(3, 1)
    assert legitimate_groups(left, right, "pairwise") == frozenset({(0, 1)})


def _pairwise_oracle(left: GroupEncoding, right: GroupEncoding):
    out = set()
    for i in left.indices():
        for j in right.indices():
            out.add(tuple(sorted((i, j))))
    return frozenset(out)


def test_legitimate_groups_pairwise_example():
    # subgroups sorted: black=0, female=1, male=2, white=3
    left = enc(4, 3, 2)  # white male
    right = enc(4, 0, 2)  # black male
    got = legitimate_groups(left, right, "pairwise")
    assert got == _pairwise_oracle(left, right)
    assert got == frozenset({(0, 3), (2, 3), (0, 2), (2, 2)})


@given(
    st.integers(1, 16).flatmap(
        lambda size: st.tuples(
            st.just(size),
            st.sets(st.integers(0, size - 1)),
            st.sets(st.integers(0, size - 1)),
        )
    )
)
@settings(max_examples=200)
def test_legitimate_groups_matches_naive_oracle(args):
    size, lbits, rbits = args
    left, right = enc(size, *lbits), enc(size, *rbits)
    assert legitimate_groups(left, right, "single") == frozenset(lbits | rbits)
    assert legitimate_groups(left, right, "pairwise") == _pairwise_oracle(left, right)


def test_encoding_mismatch_rejected():
    with pytest.raises(ValueError):
        legitimate_groups(enc(2, 0), enc(3, 0), "single")
