"""Visual features, fusion, per-token classifier and IOB span coding."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .document import CorpusError, EntitySpan, TextBlock, VisualDocument

EVENT_CLASSES = ("title", "location", "time", "price")
PRODUCT_CLASSES = ("title", "price")
DOMAIN_CLASSES = {"event": EVENT_CLASSES, "product": PRODUCT_CLASSES}

N_RAW_FEATURES = 2


@dataclass(frozen=True)
class EntityClassSet:
    """Entity classes K and the IOB label layout ``[O, B-k1, I-k1, ...]``."""

    classes: tuple[str, ...]

    def __post_init__(self):
        if not self.classes:
            raise ValueError("need at least one entity class")
        if len(set(self.classes)) != len(self.classes):
            raise ValueError(f"duplicate classes in {self.classes}")
        object.__setattr__(self, "classes", tuple(self.classes))

    @property
    def labels(self) -> list[str]:
        out = ["O"]
        for k in self.classes:
            out += [f"B-{k}", f"I-{k}"]
        return out

    def __len__(self) -> int:
        return 2 * len(self.classes) + 1

    def begin(self, cls: str) -> int:
        return 1 + 2 * self.classes.index(cls)

    def inside(self, cls: str) -> int:
        return 2 + 2 * self.classes.index(cls)

    def class_of(self, label: int) -> str | None:
        return None if label == 0 else self.classes[(label - 1) // 2]


@dataclass(frozen=True)
class VisualFeatureVector:
    rel_font: float
    rel_y: float

    def as_array(self) -> np.ndarray:
        return np.array([self.rel_font, self.rel_y])


def visual_features(doc: VisualDocument, block: TextBlock, token_index: int,
                    median_font: float | None = None) -> VisualFeatureVector:
    """Token font size over the document median, block top over page height."""
    if median_font is None:
        median_font = doc.median_font_size()
    return VisualFeatureVector(
        block.tokens[token_index].font_size / median_font,
        block.bbox.y / doc.page_height,
    )


def block_features(doc: VisualDocument, block: TextBlock, median_font: float) -> np.ndarray:
    """(tokens, 2) raw feature matrix for every token of ``block``."""
    out = np.empty((len(block.tokens), N_RAW_FEATURES))
    out[:, 0] = [t.font_size / median_font for t in block.tokens]
    out[:, 1] = block.bbox.y / doc.page_height
    return out


def init_head(d_in: int, d3: int, n_labels: int, rng: np.random.Generator,
              dtype=np.float32) -> dict[str, np.ndarray]:
    return {
        "feat.w": (rng.standard_normal((N_RAW_FEATURES, d3)) * 0.5).astype(dtype),
        "feat.b": np.zeros(d3, dtype),
        "cls.w": (rng.standard_normal((d_in, n_labels)) * 0.02).astype(dtype),
        "cls.b": np.zeros(n_labels, dtype),
    }


def project_features(head, raw) -> np.ndarray:
    """Affine map of raw features into the d3-dimensional embedding space."""
    if isinstance(raw, VisualFeatureVector):
        raw = raw.as_array()
    return np.asarray(raw) @ head["feat.w"] + head["feat.b"]


def fuse(t_x: np.ndarray, c: np.ndarray, f_x: np.ndarray, dims: tuple[int, int, int] | None = None) -> np.ndarray:
    """Concatenate token embedding, context vector and feature embedding, in that order."""
    if dims is not None and (t_x.shape[-1], c.shape[-1], f_x.shape[-1]) != tuple(dims):
        raise ValueError(f"dimension mismatch: got {(t_x.shape[-1], c.shape[-1], f_x.shape[-1])}, expected {dims}")
    return np.concatenate([np.asarray(t_x), np.asarray(c), np.asarray(f_x)], axis=-1)


def classify(head, v_x: np.ndarray) -> tuple[np.ndarray, int]:
    if v_x.shape[-1] != head["cls.w"].shape[0]:
        raise ValueError(f"fused vector has length {v_x.shape[-1]}, classifier expects {head['cls.w'].shape[0]}")
    logits = v_x @ head["cls.w"] + head["cls.b"]
    # np.argmax returns the first maximum: lowest index wins ties
    return logits, int(np.argmax(logits))


def decode_iob(labels: Sequence[int], classes: EntityClassSet, block_id: int = 0) -> list[EntitySpan]:
    """Turn one block's label ids into spans. A stray I-k opens a new span."""
    spans = []
    start, cur = None, None
    for i, lab in enumerate(labels):
        k = classes.class_of(lab)
        is_begin = lab != 0 and (lab - 1) % 2 == 0
        if k is None or is_begin or k != cur:
            if cur is not None:
                spans.append(EntitySpan(cur, block_id, start, i))
            start, cur = (i, k) if k is not None else (None, None)
    if cur is not None:
        spans.append(EntitySpan(cur, block_id, start, len(labels)))
    return spans


def encode_iob(spans: Sequence[EntitySpan], block_len: int, classes: EntityClassSet) -> list[int]:
    """Per-token label ids for one block; tokens outside every span get O."""
    labels = [0] * block_len
    for s in sorted(spans, key=lambda s: s.start):
        if s.end > block_len:
            raise CorpusError(f"span {s} past block end {block_len}")
        if any(labels[i] for i in range(s.start, s.end)):
            raise CorpusError(f"overlapping span {s}")
        labels[s.start] = classes.begin(s.label)
        for i in range(s.start + 1, s.end):
            labels[i] = classes.inside(s.label)
    return labels
