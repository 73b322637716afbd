import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mcrepeat.errors import SchemaError
from mcrepeat.records import (
    DETERMINISTIC,
    HeadKind,
    HeadType,
    PredictionRecord,
    RecordSet,
    group_by_session,
    load_labels,
    load_records,
    validate_record,
    write_labels,
    write_records,
)

HEADER = "subject_id,session_id,image_id,head,k,mc_index,out_0,out_1,out_2\n"


def rec(subject="s1", session="v1", image="a", head=None, mc=0, outputs=(0.5,)):
    return PredictionRecord(subject, session, image, head or HeadKind.binary(), mc, tuple(outputs))


class TestHeadKind:
    def test_binary_requires_k2(self):
        with pytest.raises(SchemaError):
            HeadKind(HeadType.BINARY, 3)

    def test_k_at_least_two(self):
        with pytest.raises(SchemaError):
            HeadKind.multiclass(1)

    @pytest.mark.parametrize(
        "head, n_out, rng",
        [
            (HeadKind.binary(), 1, (0.0, 1.0)),
            (HeadKind.multiclass(5), 5, (0.0, 4.0)),
            (HeadKind.ordinal(4), 3, (0.0, 3.0)),
            (HeadKind.regression(3), 1, (0.0, 2.0)),
        ],
    )
    def test_arity_and_range(self, head, n_out, rng):
        assert head.n_outputs == n_out
        assert head.value_range == rng


class TestLoadRecords:
    def test_four_row_multiclass(self, tmp_path):
        path = tmp_path / "p.csv"
        rows = [f"s1,v1,a,multiclass,3,{i},0.2,0.5,0.3\n" for i in range(4)]
        path.write_text(HEADER + "".join(rows))
        rs = load_records(path)
        assert len(rs) == 4
        assert rs.head == HeadKind.multiclass(3)
        assert [r.mc_index for r in rs] == [0, 1, 2, 3]
        assert rs[0].outputs == (0.2, 0.5, 0.3)

    def test_preserves_file_order(self, tmp_path):
        path = tmp_path / "p.csv"
        path.write_text(HEADER + "s1,v1,a,binary,2,3,0.1,,\ns1,v1,a,binary,2,0,0.2,,\ns1,v1,a,binary,2,1,0.3,,\n")
        assert [r.mc_index for r in load_records(path)] == [3, 0, 1]

    def test_multiclass_sum_error_names_row(self, tmp_path):
        path = tmp_path / "p.csv"
        path.write_text(HEADER + "s1,v1,a,multiclass,3,0,0.2,0.5,0.3\ns1,v1,a,multiclass,3,1,0.4,0.5,0.3\n")
        with pytest.raises(SchemaError, match="row 2.*sum"):
            load_records(path)

    def test_header_only_is_empty(self, tmp_path):
        path = tmp_path / "p.csv"
        path.write_text(HEADER)
        rs = load_records(path)
        assert len(rs) == 0

    def test_missing_field(self, tmp_path):
        path = tmp_path / "p.csv"
        path.write_text(HEADER + ",v1,a,binary,2,0,0.5,,\n")
        with pytest.raises(SchemaError, match="row 1.*subject_id"):
            load_records(path)

    def test_wrong_arity(self, tmp_path):
        path = tmp_path / "p.csv"
        path.write_text(HEADER + "s1,v1,a,ordinal,3,0,0.5,,\n")
        with pytest.raises(SchemaError, match="row 1.*expects 2"):
            load_records(path)

    def test_probability_out_of_range(self, tmp_path):
        path = tmp_path / "p.csv"
        path.write_text(HEADER + "s1,v1,a,binary,2,0,1.5,,\n")
        with pytest.raises(SchemaError, match="row 1.*outside"):
            load_records(path)

    def test_unused_columns_must_be_empty(self, tmp_path):
        path = tmp_path / "p.csv"
        path.write_text(HEADER + "s1,v1,a,binary,2,0,0.5,,0.1\n")
        with pytest.raises(SchemaError):
            load_records(path)

    def test_mixed_heads_rejected(self, tmp_path):
        path = tmp_path / "p.csv"
        path.write_text(HEADER + "s1,v1,a,binary,2,0,0.5,,\ns1,v1,b,regression,3,0,1.5,,\n")
        with pytest.raises(SchemaError, match="mixed heads"):
            load_records(path)

    def test_regression_unconstrained(self, tmp_path):
        path = tmp_path / "p.csv"
        path.write_text(HEADER + f"s1,v1,a,regression,3,{DETERMINISTIC},-0.4,,\n")
        rs = load_records(path)
        assert rs[0].deterministic
        assert rs[0].outputs == (-0.4,)

    def test_json(self, tmp_path):
        path = tmp_path / "p.json"
        rows = [
            {"subject_id": "s1", "session_id": "v1", "image_id": "a", "head": "ordinal", "k": 3,
             "mc_index": i, "outputs": [0.9, 0.2]}
            for i in range(3)
        ]
        path.write_text(json.dumps(rows))
        rs = load_records(path)
        assert len(rs) == 3 and rs.head == HeadKind.ordinal(3)

    def test_json_error_names_row(self, tmp_path):
        path = tmp_path / "p.json"
        rows = [{"subject_id": "s1", "session_id": "v1", "image_id": "a", "head": "binary", "k": 2,
                 "mc_index": 0, "outputs": [0.9, 0.1]}]
        path.write_text(json.dumps(rows))
        with pytest.raises(SchemaError, match="row 1"):
            load_records(path)


def _sample_records():
    heads = [HeadKind.multiclass(3)] * 6
    out = []
    for i, h in enumerate(heads):
        out.append(PredictionRecord(f"s{i // 3}", "v1", f"img{i % 2}", h, i, (0.1, 0.7, 0.2 + 0.0)))
    out.append(PredictionRecord("s9", "v1", "x", heads[0], DETERMINISTIC, (1 / 3, 1 / 3, 1 / 3)))
    return out


@pytest.mark.parametrize("fmt", ["csv", "json"])
def test_round_trip(tmp_path, fmt):
    records = RecordSet(_sample_records())
    path = write_records(records, tmp_path / f"r.{fmt}")
    loaded = load_records(path)
    assert loaded == records
    again = load_records(write_records(loaded, tmp_path / f"r2.{fmt}"))
    assert again == loaded


def test_labels_round_trip(tmp_path):
    labels = {("s1", "v1", "a"): 2, ("s0", "v1", "b"): 0}
    assert load_labels(write_labels(labels, tmp_path / "l.csv")) == labels


class TestGroupBySession:
    def test_two_subjects_two_images(self):
        records = [
            rec(subject=s, image=img, mc=m) for s in ("s2", "s1") for img in ("b", "a") for m in range(3)
        ]
        groups = group_by_session(records)
        assert [g.subject_id for g in groups] == ["s1", "s2"]
        assert all(g.image_ids == ("a", "b") for g in groups)
        assert all(len(rows) == 3 for g in groups for _, rows in g.images)

    def test_three_views_one_group(self):
        records = [rec(image=img) for img in ("cc", "mlo", "lat")]
        groups = group_by_session(records)
        assert len(groups) == 1 and len(groups[0].images) == 3

    def test_two_sessions_two_groups(self):
        groups = group_by_session([rec(session="v1"), rec(session="v2")])
        assert [(g.subject_id, g.session_id) for g in groups] == [("s1", "v1"), ("s1", "v2")]
        assert not groups[0].is_test_retest

    @given(st.lists(st.tuples(st.integers(0, 4), st.integers(0, 2), st.integers(0, 3)), max_size=60))
    def test_partition(self, keys):
        records = [rec(subject=f"s{a}", session=f"v{b}", image=f"i{c}", mc=i) for i, (a, b, c) in enumerate(keys)]
        groups = group_by_session(records)
        flat = [r for g in groups for _, rows in g.images for r in rows]
        assert sorted(r.mc_index for r in flat) == list(range(len(records)))
        keys_seen = [(g.subject_id, g.session_id) for g in groups]
        assert len(keys_seen) == len(set(keys_seen))
        assert keys_seen == sorted(keys_seen)


HEAD_STRATEGY = st.sampled_from(
    [HeadKind.binary(), HeadKind.multiclass(3), HeadKind.ordinal(4), HeadKind.regression(3)]
)


@st.composite
def valid_record(draw):
    head = draw(HEAD_STRATEGY)
    if head.variant is HeadType.MULTICLASS:
        raw = draw(st.lists(st.floats(0.01, 1.0), min_size=head.k, max_size=head.k))
        total = sum(raw)
        outs = [v / total for v in raw]
    elif head.variant is HeadType.REGRESSION:
        outs = [draw(st.floats(-10, 10))]
    else:
        outs = draw(st.lists(st.floats(0.0, 1.0), min_size=head.n_outputs, max_size=head.n_outputs))
    return rec(head=head, outputs=outs)


@given(valid_record(), st.sampled_from(["none", "arity", "range", "sum"]))
@settings(max_examples=200)
def test_validation_rejects_exactly_corrupted(record, corruption):
    head = record.head
    outs = list(record.outputs)
    corrupted = False
    if corruption == "arity":
        outs = outs + [0.0]
        corrupted = True
    elif corruption == "range" and head.is_probabilistic:
        outs[0] = 1.5
        corrupted = True
    elif corruption == "sum" and head.variant is HeadType.MULTICLASS:
        outs[0] += 0.1
        corrupted = True
    candidate = rec(head=head, outputs=outs)
    if corrupted:
        with pytest.raises(SchemaError):
            validate_record(candidate)
    else:
        validate_record(candidate)
