import json
from collections import Counter

import pytest
from hypothesis import given, settings, strategies as st

from nie.document import (EmptyDocumentError, EntitySpan, OCRParseError, assign_reading_order,
                          document_to_json, ingest_ocr_json, merge_blocks, merge_threshold,
                          serialize_document, tokenize, vertical_gap)
from nie.synth import GeneratorConfig, generate_document_json
from nie.document import parse_document

from conftest import make_doc, make_doc_json


def token_multiset(doc):
    return Counter(t.text for b in doc.blocks for t in b.tokens)


# --- ingestion ---------------------------------------------------------------

def test_ingest_three_blocks():
    doc = make_doc([("Jazz Night", (10, 10, 200, 30)), ("City Hall", (10, 60, 200, 20)),
                    ("$15", (10, 100, 50, 20))])
    assert len(doc.blocks) == 3
    assert [b.order_index for b in doc.blocks] == [0, 1, 2]
    assert doc.blocks[0].words == ["Jazz", "Night"]


def test_negative_width_names_field():
    obj = make_doc_json([("a", (0, 0, -5, 10))])
    with pytest.raises(OCRParseError) as err:
        ingest_ocr_json(json.dumps(obj))
    assert "width" in err.value.field
    assert "width" in str(err.value)


def test_whitespace_block_dropped():
    doc = make_doc([("one", (0, 0, 50, 10)), ("   \n\t", (0, 20, 50, 10)), ("two", (0, 40, 50, 10))])
    assert [b.text for b in doc.blocks] == ["one", "two"]


def test_all_blocks_empty_is_error():
    with pytest.raises(EmptyDocumentError):
        make_doc([("  ", (0, 0, 50, 10))])


@pytest.mark.parametrize("mutate,field", [
    (lambda o: o.pop("doc_id"), "doc_id"),
    (lambda o: o["blocks"][0].update(bbox=[0, 0, 10]), "bbox"),
    (lambda o: o["blocks"][0].update(font_size=0), "font_size"),
    (lambda o: o["blocks"][0].update(bbox=[390, 0, 50, 10]), "bbox"),
    (lambda o: o.update(gold_spans=[{"class": "title", "block": 7, "start": 0, "end": 1}]), "block"),
])
def test_schema_errors_name_field(mutate, field):
    obj = make_doc_json([("hello world", (0, 0, 50, 10))])
    mutate(obj)
    with pytest.raises(OCRParseError) as err:
        ingest_ocr_json(json.dumps(obj))
    assert field in err.value.field


def test_not_json():
    with pytest.raises(OCRParseError):
        ingest_ocr_json(b"{nope")


def test_tokenize_splits_punctuation_and_keeps_case():
    toks = tokenize('"Jazz, Night!" $15.00')
    assert [t.text for t in toks] == ['"', "Jazz", ",", "Night", "!", '"', "$", "15.00"]
    text = '"Jazz, Night!" $15.00'
    for t in toks:
        assert text[t.char_offset:t.char_offset + len(t.text)] == t.text


def test_block_font_inherited_by_tokens():
    doc = make_doc([("a b c", (0, 0, 50, 10), 17)])
    assert {t.font_size for t in doc.blocks[0].tokens} == {17}


# --- reading order -------------------------------------------------------------

def test_reading_order_sort():
    doc = make_doc([("c", (0, 100, 10, 10)), ("b", (50, 10, 10, 10)), ("a", (5, 10, 10, 10))])
    assert [b.text for b in doc.blocks] == ["a", "b", "c"]
    assert [b.order_index for b in doc.blocks] == [0, 1, 2]


def test_reading_order_single_and_stable():
    assert make_doc([("x", (0, 0, 10, 10))]).blocks[0].order_index == 0
    doc = make_doc([("first", (0, 0, 10, 10)), ("second", (0, 0, 10, 10))])
    assert [b.text for b in doc.blocks] == ["first", "second"]
    assert assign_reading_order(doc) == doc


# --- merging -------------------------------------------------------------------

def _stack(gaps, height=10):
    y, blocks = 0, []
    for i, g in enumerate([0, *gaps]):
        y += g
        blocks.append((f"b{i} t{i}", (0, y, 100, height)))
        y += height
    return make_doc(blocks)


def test_merge_gap_below_threshold():
    doc = _stack([3])
    assert merge_threshold(doc, 0.5) == 5
    merged = merge_blocks(doc, 0.5)
    assert len(merged.blocks) == 1
    assert merged.blocks[0].words == ["b0", "t0", "b1", "t1"]
    assert merged.blocks[0].id == 0


def test_merge_gap_above_threshold():
    doc = _stack([8])
    assert merge_blocks(doc, 0.5) is doc


def test_merge_cascades():
    merged = merge_blocks(_stack([2, 2]), 0.5)
    assert len(merged.blocks) == 1
    assert merged.blocks[0].words == ["b0", "t0", "b1", "t1", "b2", "t2"]
    bb = merged.blocks[0].bbox
    assert (bb.x, bb.y, bb.width, bb.height) == (0, 0, 100, 34)


# grouping fixtures with hand-derived expected groups (median height 10, alpha 0.5 -> threshold 5)
MERGE_FIXTURES = [
    ([3], [[0, 1]]),
    ([8], [[0], [1]]),
    ([2, 2], [[0, 1, 2]]),
    ([2, 9, 2], [[0, 1], [2, 3]]),
    ([5, 4.9], [[0], [1, 2]]),
    ([20, 0, 20, 1, 1], [[0], [1, 2], [3, 4, 5]]),
    ([-2], [[0, 1]]),
]


@pytest.mark.parametrize("gaps,groups", MERGE_FIXTURES)
def test_merge_grouping_fixtures(gaps, groups):
    merged = merge_blocks(_stack(gaps), 0.5)
    got = [[int(w[1:]) for w in b.words[0::2]] for b in merged.blocks]
    assert got == groups
    assert [b.id for b in merged.blocks] == [g[0] for g in groups]


def test_merge_remaps_gold_spans():
    obj = make_doc_json([("Big Jazz", (0, 0, 100, 10)), ("Night Out", (0, 12, 100, 10)),
                         ("Hall", (0, 100, 100, 10))],
                        gold=[{"class": "title", "block": 1, "start": 0, "end": 2},
                              {"class": "location", "block": 2, "start": 0, "end": 1}])
    doc = ingest_ocr_json(json.dumps(obj))
    merged = merge_blocks(doc)
    assert [s.key() for s in merged.gold_spans] == [("title", 0, 2, 4), ("location", 2, 0, 1)]
    assert merged.span_text(merged.gold_spans[0]) == "Night Out"


def _synthetic(index, domain="event"):
    return parse_document(generate_document_json(GeneratorConfig(domain=domain, count=10, seed=3,
                                                                 split_rate=0.5), index))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(["event", "product"]), st.floats(0.1, 3.0))
def test_merge_properties(index, domain, alpha):
    doc = _synthetic(index, domain)
    merged = merge_blocks(doc, alpha)
    assert token_multiset(merged) == token_multiset(doc)
    assert merge_blocks(doc, alpha) == merged
    thr = merge_threshold(doc, alpha)
    for a, b in zip(merged.blocks, merged.blocks[1:]):
        assert vertical_gap(a, b) >= thr
    before = sorted(doc.span_text(s) for s in doc.gold_spans)
    after = sorted(merged.span_text(s) for s in merged.gold_spans)
    assert before == after


# --- serialization -------------------------------------------------------------

def test_serialize_roundtrip_fixture():
    obj = make_doc_json([("A b", (1, 2, 30, 10), 14), ("c", (1, 50, 30, 10))],
                        gold=[{"class": "title", "block": 0, "start": 0, "end": 2}])
    doc = ingest_ocr_json(json.dumps(obj))
    again = json.loads(serialize_document(doc))
    assert again == obj


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(["event", "product"]))
def test_ingest_serialize_identity(index, domain):
    obj = generate_document_json(GeneratorConfig(domain=domain, count=10, seed=11), index)
    doc = parse_document(obj)
    data = serialize_document(doc)
    assert ingest_ocr_json(data) == doc
    assert serialize_document(ingest_ocr_json(data)) == data
    assert document_to_json(doc) == obj


def test_entity_span_invariants():
    with pytest.raises(ValueError):
        EntitySpan("title", 0, 2, 2)
    with pytest.raises(ValueError):
        EntitySpan("title", 0, -1, 2)
