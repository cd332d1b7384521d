import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nie.document import CorpusError, EntitySpan
from nie.head import (EntityClassSet, VisualFeatureVector, classify, decode_iob, encode_iob, fuse,
                      init_head, project_features, visual_features)

from conftest import make_doc

EVENT = EntityClassSet(("title", "location", "time", "price"))
TP = EntityClassSet(("title", "price"))


def lab(cs, name):
    return cs.labels.index(name)


def test_label_layout():
    assert TP.labels == ["O", "B-title", "I-title", "B-price", "I-price"]
    assert len(EVENT) == 9


def test_visual_feature_formula():
    doc = make_doc([("Big", (0, 50, 100, 30), 24), ("a b", (0, 200, 100, 10), 12),
                    ("c d", (0, 300, 100, 10), 12)])
    assert doc.median_font_size() == 12
    assert visual_features(doc, doc.blocks[0], 0) == VisualFeatureVector(2.0, 0.05)


def test_visual_feature_degenerate():
    doc = make_doc([("a b c", (0, 0, 100, 10), 9), ("d", (0, 40, 100, 10), 9)])
    assert {visual_features(doc, b, i).rel_font for b in doc.blocks for i in range(len(b.tokens))} == {1.0}
    single = make_doc([("x", (0, 10, 10, 10), 33)])
    assert visual_features(single, single.blocks[0], 0).rel_font == 1.0


def test_projection():
    head = init_head(10, 2, 5, np.random.default_rng(0))
    zero = {"feat.w": np.zeros((2, 4)), "feat.b": np.zeros(4)}
    assert not project_features(zero, VisualFeatureVector(2.0, 0.05)).any()
    ident = {"feat.w": np.eye(2), "feat.b": np.zeros(2)}
    assert np.allclose(project_features(ident, VisualFeatureVector(2.0, 0.05)), [2.0, 0.05])
    raw = np.array([1.3, 0.4])
    oracle = [sum(raw[r] * float(head["feat.w"][r, c]) for r in range(2)) + float(head["feat.b"][c])
              for c in range(2)]
    assert np.allclose(project_features(head, raw), oracle, atol=1e-6)


def test_fuse():
    assert fuse(np.zeros(128), np.zeros(128), np.zeros(16)).shape == (272,)
    assert fuse(np.array([1, 2]), np.array([3]), np.array([4])).tolist() == [1, 2, 3, 4]
    rng = np.random.default_rng(0)
    t, c, f = rng.normal(size=4), rng.normal(size=4), rng.normal(size=2)
    diff = fuse(t, c, f) != fuse(t, np.zeros(4), f)
    assert diff.tolist() == [False] * 4 + [True] * 4 + [False] * 2
    with pytest.raises(ValueError):
        fuse(t, c, f, dims=(4, 3, 2))


def test_classify():
    head = {"cls.w": np.zeros((6, 5)), "cls.b": np.array([0.1, 0, 0, 0, 0])}
    assert classify(head, np.ones(6))[1] == 0
    head["cls.b"] = np.zeros(5)
    assert classify(head, np.ones(6))[1] == 0
    rng = np.random.default_rng(3)
    head = {"cls.w": rng.normal(size=(6, 5)), "cls.b": rng.normal(size=5)}
    v = rng.normal(size=6)
    oracle = [sum(v[r] * head["cls.w"][r, c] for r in range(6)) + head["cls.b"][c] for c in range(5)]
    logits, pred = classify(head, v)
    assert np.allclose(logits, oracle, atol=1e-6) and pred == int(np.argmax(oracle))
    with pytest.raises(ValueError):
        classify(head, np.ones(7))


@given(st.lists(st.floats(-5, 5), min_size=5, max_size=5), st.floats(-100, 100))
def test_argmax_shift_invariance(b, c):
    head = {"cls.w": np.zeros((3, 5)), "cls.b": np.round(np.array(b), 3)}
    shifted = {"cls.w": head["cls.w"], "cls.b": head["cls.b"] + np.round(c, 3)}
    v = np.ones(3)
    assert classify(head, v)[1] == classify(shifted, v)[1]


def test_decode_examples():
    L = lambda *names: [lab(TP, n) for n in names]  # noqa: E731
    assert [s.key() for s in decode_iob(L("B-title", "I-title", "O", "B-price"), TP)] == \
        [("title", 0, 0, 2), ("price", 0, 3, 4)]
    assert decode_iob(L("O", "O", "O"), TP) == []
    assert [s.key() for s in decode_iob(L("I-title", "I-title", "I-price"), TP)] == \
        [("title", 0, 0, 2), ("price", 0, 2, 3)]
    assert [s.key() for s in decode_iob(L("B-title", "B-title"), TP, block_id=4)] == \
        [("title", 4, 0, 1), ("title", 4, 1, 2)]


def test_encode_examples():
    assert encode_iob([EntitySpan("title", 0, 0, 2)], 3, TP) == [1, 2, 0]
    assert encode_iob([], 4, TP) == [0, 0, 0, 0]
    with pytest.raises(CorpusError):
        encode_iob([EntitySpan("title", 0, 0, 2), EntitySpan("price", 0, 1, 3)], 4, TP)


@st.composite
def span_sets(draw, classes):
    n = draw(st.integers(1, 30))
    cuts = sorted(draw(st.sets(st.integers(0, n), max_size=12)))
    spans = []
    for a, b in zip(cuts, cuts[1:]):
        if draw(st.booleans()):
            spans.append(EntitySpan(draw(st.sampled_from(classes.classes)), 0, a, b))
    return n, spans


@settings(max_examples=600, deadline=None)
@given(st.sampled_from([TP, EVENT]).flatmap(lambda cs: st.tuples(st.just(cs), span_sets(cs))))
def test_iob_roundtrip(arg):
    cs, (n, spans) = arg
    assert decode_iob(encode_iob(spans, n, cs), cs) == spans


@given(st.sampled_from([TP, EVENT]).flatmap(
    lambda cs: st.tuples(st.just(cs), st.lists(st.integers(0, len(cs) - 1), max_size=40))))
def test_decode_any_labels_well_formed(arg):
    cs, labels = arg
    spans = decode_iob(labels, cs)
    covered = [0] * len(labels)
    for s in spans:
        assert 0 <= s.start < s.end <= len(labels)
        for i in range(s.start, s.end):
            covered[i] += 1
    assert max(covered, default=0) <= 1
    assert [s.start for s in spans] == sorted(s.start for s in spans)
