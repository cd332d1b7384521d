"""Neighbour-block windows and neighbourhood token sequences."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

from .document import VisualDocument


class ContextMode(str, Enum):
    NONE = "none"
    TOP = "top"
    BOTTOM = "bottom"
    OVERLAP = "overlap"


@dataclass(frozen=True)
class NeighborhoodSpec:
    mode: ContextMode = ContextMode.BOTTOM
    n: int = 4

    def __post_init__(self):
        object.__setattr__(self, "mode", ContextMode(self.mode))
        if self.n < 0:
            raise ValueError(f"n must be >= 0, got {self.n}")
        if self.mode is ContextMode.NONE and self.n != 0:
            object.__setattr__(self, "n", 0)


NO_CONTEXT = NeighborhoodSpec(ContextMode.NONE, 0)


def neighbor_indices(i: int, N: int, spec: NeighborhoodSpec) -> list[int]:
    """Indices of the blocks forming block ``i``'s neighbourhood, ascending.

    Windows are truncated at document edges; the other side never
    compensates for a missing half.
    """
    if not 0 <= i < N:
        raise IndexError(f"block index {i} out of range for {N} blocks")
    n = spec.n
    if spec.mode is ContextMode.NONE or n == 0:
        return []
    if spec.mode is ContextMode.TOP:
        before, after = n, 0
    elif spec.mode is ContextMode.BOTTOM:
        before, after = 0, n
    elif n % 2 == 0:
        before = after = n // 2
    else:
        before = (n + 1) // 2
        after = n - before
    lo = max(0, i - before)
    hi = min(N, i + after + 1)
    return [j for j in range(lo, hi) if j != i]


def build_neighborhood_text(doc: VisualDocument, indices: Sequence[int],
                            max_tokens: int) -> list[str]:
    """Concatenate the neighbour blocks' tokens in document order, keep a prefix."""
    if max_tokens <= 0:
        raise ValueError("max_tokens must be positive")
    out: list[str] = []
    for j in indices:
        out.extend(t.text for t in doc.blocks[j].tokens)
        if len(out) >= max_tokens:
            break
    return out[:max_tokens]
