import random

from hypothesis import given, settings, strategies as st

from jointie.aggregation import NER_HEAD, SPAN_HEAD, aggregate, from_record, prediction_record
from jointie.data import Document, FieldSchema, SpanAnnotation, bio_decode


def reference_aggregate(span_answers, ner_by_field):
    """Brute-force merge: token-set intersection for every (span answer, NER span) pair."""
    out = []
    for i, best in enumerate(span_answers):
        kept = []
        if best is not None:
            kept.append((best[0], best[1], SPAN_HEAD))
        for s in ner_by_field.get(i, []):
            tokens = set(range(s[0], s[1] + 1))
            if best is None or not tokens & set(range(best[0], best[1] + 1)):
                kept.append((s[0], s[1], NER_HEAD))
        kept.sort(key=lambda x: (x[0], x[2] != SPAN_HEAD, x[1]))
        out.append(kept)
    return out


def as_tuples(agg):
    return [[(s.start, s.end, s.source) for s in field] for field in agg.fields]


def random_case(rng, n_max=12, m_max=3):
    n = rng.randint(1, n_max)
    m = rng.randint(1, m_max)
    labels = [rng.randrange(2 * m + 1) for _ in range(n)]
    ner = bio_decode(labels, m)
    answers = []
    for _ in range(m):
        if rng.random() < 0.3:
            answers.append(None)
        else:
            a = rng.randrange(n)
            answers.append((a, rng.randint(a, n - 1)))
    return answers, ner


def test_span_priority_example():
    agg = aggregate([(2, 4)], [SpanAnnotation(0, ((3, 5), (8, 9)))])
    assert as_tuples(agg) == [[(2, 4, SPAN_HEAD), (8, 9, NER_HEAD)]]


def test_no_answer_passes_ner_through():
    agg = aggregate([None], [SpanAnnotation(0, ((1, 1),))])
    assert as_tuples(agg) == [[(1, 1, NER_HEAD)]]


def test_overlap_is_per_field():
    agg = aggregate([(2, 4), None], [SpanAnnotation(1, ((2, 4),))])
    assert as_tuples(agg) == [[(2, 4, SPAN_HEAD)], [(2, 4, NER_HEAD)]]


def test_tie_broken_span_head_first():
    agg = aggregate([(5, 5), None], [])
    assert agg.first_span(0) == (5, 5) and agg.first_span(1) is None


def test_empty_ner_returns_span_answers():
    agg = aggregate([(0, 1), None, (3, 3)], [])
    assert as_tuples(agg) == [[(0, 1, SPAN_HEAD)], [], [(3, 3, SPAN_HEAD)]]


def test_matches_reference_on_1000_cases():
    rng = random.Random(1234)
    for _ in range(1000):
        answers, ner = random_case(rng)
        by_field = {a.field_index: list(a.spans) for a in ner}
        assert as_tuples(aggregate(answers, ner)) == reference_aggregate(answers, by_field)


@settings(max_examples=200)
@given(st.integers(0, 2**32 - 1))
def test_invariants(seed):
    rng = random.Random(seed)
    answers, ner = random_case(rng)
    agg = aggregate(answers, ner)
    for i, field in enumerate(agg.fields):
        head = [s for s in field if s.source == SPAN_HEAD]
        assert len(head) <= 1
        if answers[i] is not None:
            assert head[0].bounds == answers[i]
        bounds = [s.bounds for s in field]
        assert bounds == sorted(bounds)
        for (_, e0), (s1, _) in zip(bounds, bounds[1:]):
            assert s1 > e0
    # all-no-answer returns the NER spans unchanged
    passthrough = aggregate([None] * len(answers), ner)
    assert [passthrough.spans(a.field_index) for a in ner] == [list(a.spans) for a in ner]


def test_record_round_trip():
    schema = FieldSchema.from_names(["date", "price"])
    doc = Document("d", tuple("a b c d e f".split()))
    agg = aggregate([(1, 2), None], [SpanAnnotation(0, ((4, 5),)), SpanAnnotation(1, ((0, 0),))], "d")
    rec = prediction_record(agg, schema, doc)
    assert rec["fields"]["date"][0] == {"start": 1, "end": 2, "source": "span", "text": "b c"}
    assert rec["fields"]["price"] == [{"start": 0, "end": 0, "source": "ner", "text": "a"}]
    assert from_record(rec, schema) == agg
