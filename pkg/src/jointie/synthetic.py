"""Template-generated business-style documents with sparse field answers.

Each document is filler prose with field mentions of the form
``<field name tokens> : <answer> [, <answer> ...] [and <answer>] .``
inserted between sentences. Answers are drawn from field-specific word
pools (a head word plus up to two tail words), so every field value has a
recognisable shape but still has to be tied to its trigger.
"""

from __future__ import annotations

import json
import random
from dataclasses import asdict, dataclass
from pathlib import Path

from .data import Document, FieldSchema, LabeledExample, SpanAnnotation, write_dataset

FIELD_NAMES = [
    "contract_date", "contract_value", "party_name", "license_number", "expiry_date",
    "site_address", "applicant_name", "bid_deadline", "project_title", "payment_terms",
    "governing_law", "renewal_term", "delivery_date", "contact_person", "tender_number",
    "approval_authority", "permit_type", "start_date", "penalty_clause", "warranty_period",
]

_CONSONANTS = "bdfgklmnprstvz"
_VOWELS = "aeiou"


def _word(rng: random.Random, syllables: int) -> str:
    return "".join(rng.choice(_CONSONANTS) + rng.choice(_VOWELS) for _ in range(syllables))


def field_names(m: int) -> list[str]:
    return FIELD_NAMES[:m] + [f"field_{k}" for k in range(len(FIELD_NAMES), m)]


@dataclass
class CorpusStats:
    documents: int
    fields: int
    mean_length: float
    answered_fields: int
    multi_answer_fields: int
    multi_answer_fraction: float
    answer_token_fraction: float


@dataclass
class _Lexicon:
    filler: list[str]
    heads: list[list[str]]
    tails: list[list[str]]


def _lexicon(rng: random.Random, schema: FieldSchema, pool_size: int, filler_size: int) -> _Lexicon:
    reserved = {t for f in schema.fields for t in f.name_tokens} | {":", ",", ".", "and"}
    used = set(reserved)

    def fresh(syllables):
        while True:
            w = _word(rng, syllables)
            if w not in used:
                used.add(w)
                return w

    filler = [fresh(rng.choice((2, 2, 3))) for _ in range(filler_size)]
    heads = [[fresh(3) for _ in range(pool_size)] for _ in schema.fields]
    tails = [[fresh(4) for _ in range(pool_size)] for _ in schema.fields]
    return _Lexicon(filler, heads, tails)


def _answer(rng: random.Random, lex: _Lexicon, i: int) -> list[str]:
    n_tail = rng.choices((0, 1, 2), weights=(0.45, 0.4, 0.15))[0]
    return [rng.choice(lex.heads[i])] + [rng.choice(lex.tails[i]) for _ in range(n_tail)]


def _sentence(rng: random.Random, lex: _Lexicon) -> list[str]:
    return [rng.choice(lex.filler) for _ in range(rng.randint(8, 20))] + ["."]


def generate_synthetic_corpus(seed: int = 0, size: int = 50, m: int = 4, multispan_rate: float = 0.27,
                              length_range: tuple[int, int] = (450, 750), answer_rate: float = 0.85,
                              pool_size: int = 8, filler_size: int = 400, id_prefix: str = "doc"):
    """Return ``(schema, examples, stats)``; identical seeds give identical corpora.

    ``multispan_rate`` is the share of answered (document, field) pairs with
    two or three answers.
    """
    if size < 1:
        raise ValueError("size must be >= 1")
    if not (0.0 <= multispan_rate <= 1.0 and 0.0 <= answer_rate <= 1.0):
        raise ValueError("multispan_rate and answer_rate must lie in [0, 1]")
    lo, hi = length_range
    if not 1 <= lo <= hi:
        raise ValueError("length_range must satisfy 1 <= low <= high")
    rng = random.Random(seed)
    schema = FieldSchema.from_names(field_names(m))
    lex = _lexicon(rng, schema, pool_size, filler_size)

    examples = []
    answered = multi = answer_tokens = total_tokens = 0
    for k in range(size):
        target_len = rng.randint(lo, hi)
        mentions = []
        for f in schema.fields:
            if rng.random() >= answer_rate:
                continue
            count = rng.choice((2, 3)) if rng.random() < multispan_rate else 1
            mentions.append((f.index, [_answer(rng, lex, f.index) for _ in range(count)]))
        rng.shuffle(mentions)

        mention_len = sum(len(schema.fields[i].name_tokens) + 1 + sum(len(a) + 1 for a in ans)
                          for i, ans in mentions)
        sentences = []
        budget = max(target_len - mention_len, 1)
        while budget > 0:
            s = _sentence(rng, lex)
            sentences.append(s)
            budget -= len(s)
        slots = sorted(rng.randrange(len(sentences) + 1) for _ in mentions)

        tokens: list[str] = []
        spans: dict[int, list[tuple[int, int]]] = {}
        mention_iter = iter(zip(slots, mentions))
        pending = next(mention_iter, None)
        for si in range(len(sentences) + 1):
            while pending is not None and pending[0] == si:
                i, answers = pending[1]
                tokens.extend(schema.fields[i].name_tokens)
                tokens.append(":")
                for a_idx, ans in enumerate(answers):
                    if a_idx:
                        tokens.append("and" if a_idx == len(answers) - 1 else ",")
                    start = len(tokens)
                    tokens.extend(ans)
                    spans.setdefault(i, []).append((start, len(tokens) - 1))
                tokens.append(".")
                pending = next(mention_iter, None)
            if si < len(sentences):
                tokens.extend(sentences[si])

        annotations = tuple(SpanAnnotation(i, tuple(s)) for i, s in sorted(spans.items()))
        doc = Document(f"{id_prefix}-{k:05d}", tuple(tokens))
        examples.append(LabeledExample(doc, annotations))
        answered += len(spans)
        multi += sum(1 for s in spans.values() if len(s) >= 2)
        answer_tokens += sum(e - s + 1 for sp in spans.values() for s, e in sp)
        total_tokens += len(tokens)

    stats = CorpusStats(
        documents=size, fields=m, mean_length=total_tokens / size, answered_fields=answered,
        multi_answer_fields=multi, multi_answer_fraction=multi / answered if answered else 0.0,
        answer_token_fraction=answer_tokens / total_tokens)
    return schema, examples, stats


def corpus_stats(examples, m: int) -> CorpusStats:
    answered = multi = answer_tokens = total = 0
    for ex in examples:
        total += len(ex.document)
        for i in range(m):
            spans = ex.spans_for(i)
            if spans:
                answered += 1
                multi += len(spans) >= 2
                answer_tokens += sum(e - s + 1 for s, e in spans)
    return CorpusStats(len(examples), m, total / max(len(examples), 1), answered, multi,
                       multi / answered if answered else 0.0, answer_tokens / max(total, 1))


def write_synthetic_corpus(out_dir, seed=0, train_size=50, test_size=0, m=4, multispan_rate=0.27,
                           length_range=(450, 750)) -> dict:
    """Write train.json (and test.json) plus a manifest; returns the manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    schema, examples, _ = generate_synthetic_corpus(seed, train_size + test_size, m, multispan_rate,
                                                    length_range)
    splits = {"train": examples[:train_size]}
    if test_size:
        splits["test"] = examples[train_size:]
    manifest = {"generator": {"seed": seed, "train_size": train_size, "test_size": test_size, "m": m,
                              "multispan_rate": multispan_rate, "length_range": list(length_range)},
                "files": {}, "stats": {}}
    for name, exs in splits.items():
        path = out / f"{name}.json"
        write_dataset(path, schema, exs)
        manifest["files"][name] = str(path)
        manifest["stats"][name] = asdict(corpus_stats(exs, m))
    (out / "corpus_manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return manifest
