import json

import pytest
from hypothesis import given, settings, strategies as st

from jointie.data import (
    DatasetFormatError, Document, EncodingConflictError, FieldSchema, LabeledExample, SpanAnnotation,
    ValidationError, bio_decode, bio_encode, load_dataset, read_dataset, tokenize, tokenize_with_offsets,
)
from jointie.synthetic import generate_synthetic_corpus

O = 0


def B(i):
    return 2 * i + 1


def I(i):
    return 2 * i + 2


def write(tmp_path, obj, name="data.json"):
    path = tmp_path / name
    path.write_text(json.dumps(obj))
    return path


def minimal(span=(1, 2), n=5):
    return {"schema": {"fields": [{"name": "date"}]},
            "examples": [{"doc_id": "d0", "tokens": [f"t{k}" for k in range(n)],
                          "annotations": [{"field": "date", "spans": [list(span)]}]}]}


class TestLoadDataset:
    def test_minimal_record(self, tmp_path):
        schema = FieldSchema.from_names(["date"])
        examples = load_dataset(write(tmp_path, minimal()), schema)
        assert len(examples) == 1
        assert examples[0].annotations == (SpanAnnotation(0, ((1, 2),)),)
        assert examples[0].document.tokens == ("t0", "t1", "t2", "t3", "t4")

    def test_out_of_range_span_names_doc_and_field(self, tmp_path):
        with pytest.raises(ValidationError, match=r"d0.*date"):
            load_dataset(write(tmp_path, minimal(span=(1, 7))))

    def test_parse_failure_reports_line(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"schema": {"fields": []},\n "examples": [,]}')
        with pytest.raises(DatasetFormatError, match="line 2"):
            load_dataset(path)

    def test_missing_key_reports_record(self, tmp_path):
        obj = minimal()
        del obj["examples"][0]["tokens"]
        with pytest.raises(DatasetFormatError, match="example #0"):
            load_dataset(write(tmp_path, obj))

    def test_unknown_field(self, tmp_path):
        obj = minimal()
        obj["examples"][0]["annotations"][0]["field"] = "price"
        with pytest.raises(ValidationError, match="price"):
            load_dataset(write(tmp_path, obj))

    def test_schema_mismatch(self, tmp_path):
        with pytest.raises(ValidationError, match="do not match"):
            load_dataset(write(tmp_path, minimal()), FieldSchema.from_names(["date", "price"]))

    def test_cross_field_overlap_allowed_at_ingest(self, tmp_path):
        obj = minimal()
        obj["schema"]["fields"].append({"name": "price"})
        obj["examples"][0]["annotations"].append({"field": "price", "spans": [[2, 3]]})
        (ex,) = load_dataset(write(tmp_path, obj))
        with pytest.raises(EncodingConflictError):
            bio_encode(ex.annotations, 5, 2)

    def test_deterministic(self, tmp_path):
        path = write(tmp_path, minimal())
        assert load_dataset(path) == load_dataset(path)

    def test_bundled_synthetic_corpus_shape(self, tmp_path):
        from jointie.data import write_dataset

        schema, examples, _ = generate_synthetic_corpus(seed=0, size=50, m=4)
        path = tmp_path / "synthetic.json"
        write_dataset(path, schema, examples)
        file_schema, loaded = read_dataset(path)
        assert len(loaded) == 50 and file_schema.m == 4
        assert loaded == examples


class TestTypes:
    def test_empty_document_rejected(self):
        with pytest.raises(ValidationError):
            Document("x", ())

    def test_empty_token_rejected(self):
        with pytest.raises(ValidationError):
            Document("x", ("a", ""))

    def test_offsets_must_increase(self):
        with pytest.raises(ValidationError):
            Document("x", ("a", "b"), "a b", ((2, 3), (0, 1)))

    def test_overlapping_spans_in_field_rejected(self):
        with pytest.raises(ValidationError):
            SpanAnnotation(0, ((0, 2), (2, 3)))

    def test_duplicate_field_names(self):
        with pytest.raises(ValidationError):
            FieldSchema.from_names(["a", "a"])

    def test_empty_schema(self):
        with pytest.raises(ValidationError):
            FieldSchema.from_names([])

    def test_span_beyond_document(self):
        with pytest.raises(ValidationError):
            LabeledExample(Document("x", ("a",)), (SpanAnnotation(0, ((0, 1),)),))

    def test_tokenizer_splits_punctuation(self):
        assert tokenize("Contract date: 2021-03-04.") == ["Contract", "date", ":", "2021", "-", "03", "-", "04", "."]
        toks, offs = tokenize_with_offsets("a, b")
        assert toks == ["a", ",", "b"] and offs == [(0, 1), (1, 2), (3, 4)]

    def test_text_uses_offsets(self):
        toks, offs = tokenize_with_offsets("due on 4 May.")
        doc = Document("x", tuple(toks), "due on 4 May.", tuple(offs))
        assert doc.text((2, 3)) == "4 May"


class TestBio:
    def test_encode_single_span(self):
        assert bio_encode([SpanAnnotation(0, ((1, 2),))], 5, 1) == [O, B(0), I(0), O, O]

    def test_encode_empty(self):
        assert bio_encode([], 3, 1) == [O, O, O]

    def test_encode_two_fields(self):
        anns = [SpanAnnotation(0, ((0, 0),)), SpanAnnotation(1, ((4, 5),))]
        assert bio_encode(anns, 6, 2) == [B(0), O, O, O, B(1), I(1)]

    def test_encode_conflict_lists_spans(self):
        anns = [SpanAnnotation(0, ((1, 3),)), SpanAnnotation(1, ((3, 4),))]
        with pytest.raises(EncodingConflictError) as err:
            bio_encode(anns, 6, 2)
        assert err.value.collisions == [(0, (1, 3), 1, (3, 4))]

    def test_decode_single(self):
        assert bio_decode([O, B(0), I(0), O, O], 1) == [SpanAnnotation(0, ((1, 2),))]

    def test_decode_orphan_inside_opens_entity(self):
        assert bio_decode([I(0), O, O], 1) == [SpanAnnotation(0, ((0, 0),))]

    def test_decode_label_switch_starts_new_entity(self):
        assert bio_decode([B(0), I(1), O], 2) == [SpanAnnotation(0, ((0, 0),)), SpanAnnotation(1, ((1, 1),))]

    def test_decode_consecutive_begins(self):
        assert bio_decode([B(1), I(1), B(1)], 2) == [SpanAnnotation(1, ((0, 1), (2, 2)))]

    def test_decode_out_of_range_label(self):
        with pytest.raises(ValueError):
            bio_decode([5], 2)


@st.composite
def annotation_sets(draw):
    n = draw(st.integers(1, 30))
    m = draw(st.integers(1, 4))
    # carve non-overlapping intervals out of [0, n) and assign fields
    cuts = sorted(draw(st.sets(st.integers(0, n), max_size=12)) | {0, n})
    spans = {}
    for a, b in zip(cuts, cuts[1:]):
        if draw(st.booleans()):
            spans.setdefault(draw(st.integers(0, m - 1)), []).append((a, b - 1))
    anns = [SpanAnnotation(i, tuple(s)) for i, s in sorted(spans.items())]
    return n, m, anns


@settings(max_examples=300, deadline=None)
@given(annotation_sets())
def test_bio_round_trip(case):
    n, m, anns = case
    assert bio_decode(bio_encode(anns, n, m), m) == anns


@settings(max_examples=300, deadline=None)
@given(st.integers(1, 3).flatmap(lambda m: st.tuples(st.just(m), st.lists(st.integers(0, 2 * m), min_size=1, max_size=40))))
def test_bio_decode_never_overlaps(case):
    m, labels = case
    anns = bio_decode(labels, m)
    intervals = sorted(s for a in anns for s in a.spans)
    for (_, e0), (s1, _) in zip(intervals, intervals[1:]):
        assert s1 > e0
    # decoded spans re-encode without conflict
    bio_encode(anns, len(labels), m)
