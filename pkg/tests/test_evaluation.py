import json
import math
import random

import pytest
from hypothesis import given, strategies as st

from nie.document import EntitySpan
from nie.evaluation import score

C = ("title", "price")


def S(cls, block, start, end):
    return EntitySpan(cls, block, start, end)


def brute_force_tp(gold, pred):
    """Largest one-to-one matching by exhaustive search over every assignment of predictions."""
    def best(i, used):
        if i == len(pred):
            return 0
        out = best(i + 1, used)  # leave pred i unmatched
        for j, g in enumerate(gold):
            if j not in used and g.key() == pred[i].key():
                out = max(out, 1 + best(i + 1, used | {j}))
        return out
    return best(0, frozenset())


def oracle(gold_docs, pred_docs, classes):
    """Micro/per-class P/R/F computed from the brute-force matching."""
    def prf(tp, np_, ng):
        p = tp / np_ if np_ else 0.0
        r = tp / ng if ng else 0.0
        return p, r, (2 * p * r / (p + r) if p + r else 0.0)
    tp = sum(brute_force_tp(g, p) for g, p in zip(gold_docs, pred_docs))
    micro = prf(tp, sum(map(len, pred_docs)), sum(map(len, gold_docs)))
    per = {}
    for k in classes:
        gk = [[s for s in g if s.label == k] for g in gold_docs]
        pk = [[s for s in p if s.label == k] for p in pred_docs]
        per[k] = prf(sum(brute_force_tp(g, p) for g, p in zip(gk, pk)), sum(map(len, pk)), sum(map(len, gk)))
    return micro, per


# six hand-counted fixtures: (gold, pred, expected micro P, R, F1)
FIXTURES = [
    ([[S("title", 0, 0, 2), S("price", 1, 0, 1)]], [[S("title", 0, 0, 2), S("price", 1, 1, 2)]], (0.5, 0.5, 0.5)),
    ([[S("title", 0, 0, 2), S("price", 1, 0, 1)]], [[S("title", 0, 0, 2), S("price", 1, 0, 1)]], (1.0, 1.0, 1.0)),
    ([[S("title", 0, 0, 2)]], [[]], (0.0, 0.0, 0.0)),
    ([[S("title", 0, 0, 2)]], [[S("title", 0, 0, 2), S("title", 0, 0, 2)]], (0.5, 1.0, 2 / 3)),
    ([[S("title", 0, 0, 2)]], [[S("price", 0, 0, 2)]], (0.0, 0.0, 0.0)),
    ([[S("title", 0, 0, 2), S("price", 3, 1, 2)], [S("title", 1, 0, 1)]],
     [[S("title", 0, 0, 2)], [S("title", 1, 0, 1), S("price", 2, 0, 1), S("title", 1, 0, 2)]],
     (0.5, 2 / 3, 4 / 7)),
]


@pytest.mark.parametrize("gold,pred,expected", FIXTURES)
def test_fixtures(gold, pred, expected):
    r = score(gold, pred, C)
    assert (r.micro_precision, r.micro_recall, r.micro_f1) == pytest.approx(expected, abs=1e-12)


def test_first_fixture_counts():
    r = score(*FIXTURES[0][:2], C)
    assert (r.tp, r.fp, r.fn) == (1, 1, 1)
    assert r.per_class["title"].f1 == 1.0 and r.per_class["price"].f1 == 0.0
    assert r.macro_f1 == 0.5


def test_zero_support_class_counts_zero_in_macro():
    r = score([[S("title", 0, 0, 1)]], [[S("title", 0, 0, 1)]], C)
    assert r.per_class["price"].support == 0 and r.per_class["price"].f1 == 0.0
    assert r.macro_f1 == 0.5


def test_empty_everything_is_zero_not_nan():
    r = score([[]], [[]], C)
    values = [r.micro_precision, r.micro_recall, r.micro_f1, r.macro_f1]
    assert values == [0.0] * 4 and not any(math.isnan(v) for v in values)


def test_invalid_references():
    with pytest.raises(ValueError):
        score([[S("venue", 0, 0, 1)]], [[]], C)
    with pytest.raises(ValueError):
        score([[S("title", 0, 0, 5)]], [[]], C, block_lengths=[{0: 3}])
    with pytest.raises(ValueError):
        score([[]], [[S("title", 9, 0, 1)]], C, block_lengths=[{0: 3}])
    with pytest.raises(ValueError):
        score([[]], [], C)


def _random_instance(rng):
    docs = rng.randint(1, 3)
    def spans():
        return [S(rng.choice(C), rng.randint(0, 1), a, a + rng.randint(1, 2))
                for a in (rng.randint(0, 2) for _ in range(rng.randint(0, 6)))]
    return [spans() for _ in range(docs)], [spans() for _ in range(docs)]


def test_matches_brute_force():
    rng = random.Random(0)
    for _ in range(200):
        gold, pred = _random_instance(rng)
        r = score(gold, pred, C)
        micro, per = oracle(gold, pred, C)
        assert abs(r.micro_precision - micro[0]) <= 1e-9
        assert abs(r.micro_recall - micro[1]) <= 1e-9
        assert abs(r.micro_f1 - micro[2]) <= 1e-9
        for k in C:
            assert abs(r.per_class[k].f1 - per[k][2]) <= 1e-9


@given(st.randoms(use_true_random=False))
def test_permutation_invariance(rnd):
    gold, pred = _random_instance(rnd)
    r = score(gold, pred, C)
    order = list(range(len(gold)))
    rnd.shuffle(order)
    g2 = [rnd.sample(gold[i], len(gold[i])) for i in order]
    p2 = [rnd.sample(pred[i], len(pred[i])) for i in order]
    assert score(g2, p2, C) == r


def test_report_json_and_table():
    r = score(*FIXTURES[0][:2], C)
    d = json.loads(r.to_json())
    assert d["micro_f1"] == 0.5 and set(d["per_class"]) == set(C)
    header = r.table().splitlines()
    cols = [line for line in header if "F1" in line and "Prec" in line][0].split()
    assert cols[:3] == ["F1", "Prec", "Rec"]
