import time

import pytest
from hypothesis import given, strategies as st

from nie.neighborhood import ContextMode, NeighborhoodSpec, build_neighborhood_text, neighbor_indices

from conftest import make_doc

MODES = list(ContextMode)


def oracle(i, N, mode, n):
    """Set definition: enumerate every j != i and keep those inside the mode's window."""
    if mode is ContextMode.NONE:
        return []
    before = n if mode is ContextMode.TOP else 0
    after = n if mode is ContextMode.BOTTOM else 0
    if mode is ContextMode.OVERLAP:
        before = (n + 1) // 2 if n % 2 else n // 2
        after = n - before
    return [j for j in range(N) if j != i and (i - before <= j < i or i < j <= i + after)]


@pytest.mark.parametrize("i,N,mode,n,expected", [
    (5, 10, "bottom", 4, [6, 7, 8, 9]),
    (5, 10, "overlap", 3, [3, 4, 6]),
    (1, 10, "top", 4, [0]),
    (0, 1, "top", 4, []),
    (0, 1, "bottom", 4, []),
    (0, 1, "overlap", 4, []),
    (0, 5, "overlap", 2, [1]),
    (3, 10, "none", 4, []),
])
def test_examples(i, N, mode, n, expected):
    assert neighbor_indices(i, N, NeighborhoodSpec(mode, n)) == expected


def test_exhaustive_oracle():
    start = time.perf_counter()
    for N in range(1, 13):
        for i in range(N):
            for n in range(7):
                for mode in MODES:
                    spec = NeighborhoodSpec(mode, n)
                    assert neighbor_indices(i, N, spec) == oracle(i, N, mode, spec.n), (i, N, mode, n)
    assert time.perf_counter() - start < 1.0


def test_out_of_range():
    with pytest.raises(IndexError):
        neighbor_indices(3, 3, NeighborhoodSpec())
    with pytest.raises(IndexError):
        neighbor_indices(-1, 3, NeighborhoodSpec())


def test_spec_invariants():
    assert NeighborhoodSpec("none", 4).n == 0
    assert NeighborhoodSpec().mode is ContextMode.BOTTOM and NeighborhoodSpec().n == 4
    with pytest.raises(ValueError):
        NeighborhoodSpec("bottom", -1)


@given(st.integers(1, 60), st.data(), st.sampled_from(MODES), st.integers(0, 12))
def test_window_properties(N, data, mode, n):
    i = data.draw(st.integers(0, N - 1))
    spec = NeighborhoodSpec(mode, n)
    out = neighbor_indices(i, N, spec)
    assert out == sorted(set(out)) and i not in out
    assert len(out) <= spec.n
    if mode is ContextMode.BOTTOM and i + n < N:
        assert len(out) == n
    if mode is ContextMode.TOP and i - n >= 0:
        assert len(out) == n
    if mode is ContextMode.OVERLAP and n % 2 == 0:
        for j in out:
            if 0 <= 2 * i - j < N:
                assert 2 * i - j in out


def test_neighborhood_text():
    doc = make_doc([("jazz night", (0, 0, 100, 10)), ("city hall", (0, 100, 100, 10))])
    assert build_neighborhood_text(doc, [0, 1], 128) == ["jazz", "night", "city", "hall"]
    assert build_neighborhood_text(doc, [], 128) == []


def test_neighborhood_text_truncates_to_prefix():
    blocks = [(" ".join(f"w{b}_{k}" for k in range(50)), (0, 100 * b, 300, 10)) for b in range(3)]
    doc = make_doc(blocks)
    full = build_neighborhood_text(doc, [0, 1, 2], 10_000)
    out = build_neighborhood_text(doc, [0, 1, 2], 120)
    assert len(full) == 150 and out == full[:120]
