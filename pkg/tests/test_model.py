import time

import numpy as np
import pytest

from nie.encoder import CLS, EncoderConfig, Vocabulary, context_vector, encode
from nie.gradcheck import check_model_gradients
from nie.head import EntityClassSet
from nie.model import ModelBundle, build_examples, collate, forward, init_params
from nie.modelfile import ModelLoadError, load_model, model_from_bytes, model_to_bytes, save_model
from nie.neighborhood import NO_CONTEXT, NeighborhoodSpec
from nie.training import global_context_baseline

from conftest import make_doc

WORDS = ["jazz", "night", "city", "hall", "june", "0", "pm", "$", "00", "free", "entry"]


def bundle(neighborhood=NeighborhoodSpec(), baseline="nie", use_features=True, max_len=16, seed=0):
    vocab = Vocabulary(WORDS)
    cfg = EncoderConfig(vocab_size=len(vocab), d1=8, layers=1, heads=2, max_len=max_len, context_max_len=32, d3=4)
    classes = EntityClassSet(("title", "price"))
    return ModelBundle(cfg, classes, vocab, init_params(cfg, classes, seed), neighborhood, baseline, use_features)


def doc():
    return make_doc([("Jazz Night", (0, 10, 200, 30), 30), ("City Hall", (0, 100, 200, 12)),
                     ("June 3, 8 pm", (0, 200, 200, 12)), ("$12.00", (0, 300, 100, 12)),
                     ("Free entry", (0, 400, 100, 12))])


@pytest.mark.parametrize("use_features", [True, False])
def test_full_model_gradient_check(use_features):
    start = time.perf_counter()
    errors = check_model_gradients(seed=0, use_features=use_features)
    assert max(errors.values()) <= 1e-3, max(errors.items(), key=lambda kv: kv[1])
    assert any(k.startswith("enc.") for k in errors) and {"feat.w", "cls.w", "cls.b"} <= set(errors)
    assert time.perf_counter() - start < 60


def test_context_is_neighbourhood_cls_row():
    b = bundle()
    d = doc()
    ex = build_examples(d, b)[0]
    expected = encode(b.params, b.config, [CLS, *b.vocab.ids(["City", "Hall", "June", "3", ",", "8", "pm",
                                                               "$", "12.00", "Free", "entry"])])[0]
    assert ex.contexts == [(CLS, *b.vocab.ids([w for blk in d.blocks[1:5] for w in blk.words]))]
    batch = collate([ex], b)
    _, (_, _, V) = forward(b.params, b, batch)
    d1, d2 = b.config.d1, b.config.d2
    assert np.allclose(V[0, :, d1:d1 + d2], expected[None, :], atol=1e-6)


def test_no_context_structure():
    """mode None + features off degenerates to a per-token classifier over T (+) 0 (+) 0."""
    b = bundle(NO_CONTEXT, "no_context", use_features=False)
    assert b.params["cls.w"].shape == (b.config.d1 + b.config.d2 + b.config.d3, len(b.classes))
    d = doc()
    exs = build_examples(d, b)
    assert all(ex.contexts == [] for ex in exs)
    batch = collate(exs, b)
    logits, (_, _, V) = forward(b.params, b, batch)
    d1 = b.config.d1
    assert not V[..., d1:].any()
    manual = V[..., :d1] @ b.params["cls.w"][:d1] + b.params["cls.b"]
    assert np.allclose(logits, manual, atol=1e-6)


def test_last_block_bottom_context_is_zero():
    b = bundle()
    exs = build_examples(doc(), b)
    assert exs[-1].contexts == []


def test_long_block_is_windowed():
    b = bundle(max_len=4)
    long_doc = make_doc([("jazz night city hall june free entry", (0, 0, 300, 10))])
    exs = build_examples(long_doc, b)
    assert [len(e.token_ids) for e in exs] == [4, 4, 2]
    spans = b.predict(long_doc)
    assert all(0 <= s.start < s.end <= 7 for s in spans)


def test_predict_deterministic_and_valid():
    b = bundle()
    d = doc()
    first = b.predict(d)
    assert b.predict(d) == first
    ids = {blk.id: len(blk) for blk in d.blocks}
    for s in first:
        assert s.block_id in ids and s.end <= ids[s.block_id]


def test_global_context_baseline():
    b = bundle(NO_CONTEXT, "global_context")
    single = make_doc([("jazz night", (0, 0, 100, 10))])
    cls = context_vector(b.params, b.config, b.vocab.ids(["jazz", "night"]))
    assert np.allclose(global_context_baseline(single, b), cls, atol=1e-6)

    d = doc()
    vecs = [context_vector(b.params, b.config, b.vocab.ids(blk.words)) for blk in d.blocks[:3]]
    three = make_doc([(blk.text, (0, 100 * i, 100, 10)) for i, blk in enumerate(d.blocks[:3])])
    oracle = [sum(float(v[j]) for v in vecs) / 3 for j in range(b.config.d2)]
    assert np.allclose(global_context_baseline(three, b), oracle, atol=1e-6)

    dup = make_doc([(blk.text, (0, 50 * i, 100, 10)) for i, blk in enumerate(list(d.blocks[:3]) * 2)])
    assert np.allclose(global_context_baseline(dup, b), global_context_baseline(three, b), atol=1e-6)

    # the training forward pass uses the same vector for every block of the document
    batch = collate(build_examples(three, b), b)
    _, (_, _, V) = forward(b.params, b, batch)
    d1, d2 = b.config.d1, b.config.d2
    assert np.allclose(V[..., d1:d1 + d2], global_context_baseline(three, b), atol=1e-5)


def test_model_file_roundtrip(tmp_path):
    b = bundle()
    data = model_to_bytes(b)
    again = model_from_bytes(data)
    assert model_to_bytes(again) == data
    assert again.predict(doc()) == b.predict(doc())
    save_model(b, tmp_path / "m.nie")
    assert load_model(tmp_path / "m.nie").config == b.config


@pytest.mark.parametrize("mutate", [
    lambda d: b"XXXXXXXX" + d[8:],
    lambda d: d[:-3],
    lambda d: d + b"\0",
    lambda d: d[:20],
])
def test_model_file_corruption(mutate):
    with pytest.raises(ModelLoadError):
        model_from_bytes(mutate(model_to_bytes(bundle())))
