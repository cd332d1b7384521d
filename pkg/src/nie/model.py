"""The full tagger: encoder + context vector + visual features + linear head."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import nn
from .document import DEFAULT_MERGE_ALPHA, EntitySpan, VisualDocument, assign_reading_order, merge_blocks
from .encoder import CLS, EncoderConfig, Vocabulary, encode_backward, encode_batch, init_encoder, pad_batch
from .head import EntityClassSet, block_features, decode_iob, encode_iob, init_head
from .neighborhood import ContextMode, NeighborhoodSpec, build_neighborhood_text, neighbor_indices

BASELINES = ("nie", "no_context", "global_context")


@dataclass
class ModelBundle:
    """Everything needed to tag a document: config, vocabulary, labels, weights."""

    config: EncoderConfig
    classes: EntityClassSet
    vocab: Vocabulary
    params: dict[str, np.ndarray]
    neighborhood: NeighborhoodSpec = field(default_factory=NeighborhoodSpec)
    baseline: str = "nie"
    use_features: bool = True
    merge_alpha: float = DEFAULT_MERGE_ALPHA
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.baseline not in BASELINES:
            raise ValueError(f"unknown baseline {self.baseline!r}")

    @property
    def context_source(self) -> str:
        if self.baseline == "global_context":
            return "global"
        if self.baseline == "no_context" or self.neighborhood.mode is ContextMode.NONE:
            return "none"
        return "neighborhood"

    @property
    def fused_dim(self) -> int:
        return self.config.d1 + self.config.d2 + self.config.d3

    def prepare(self, doc: VisualDocument) -> VisualDocument:
        return prepare_document(doc, self.merge_alpha)

    def predict(self, doc: VisualDocument, prepared: bool = False) -> list[EntitySpan]:
        """Entity spans for ``doc``; block ids refer to the merged blocks."""
        if not prepared:
            doc = self.prepare(doc)
        examples = build_examples(doc, self, with_labels=False)
        labels_by_block: dict[int, list[int]] = {}
        for chunk in _chunks(examples, 64):
            batch = collate(chunk, self)
            logits, _ = forward(self.params, self, batch)
            pred = logits.argmax(axis=-1)
            for row, ex in enumerate(chunk):
                n = len(ex.token_ids) - 1
                labels_by_block.setdefault(ex.block_id, []).extend(pred[row, 1:n + 1].tolist())
        spans: list[EntitySpan] = []
        for block in doc.blocks:
            spans.extend(decode_iob(labels_by_block[block.id], self.classes, block.id))
        return spans


def init_params(config: EncoderConfig, classes: EntityClassSet, seed: int, dtype=np.float32):
    rng = np.random.default_rng(seed)
    params = init_encoder(config, rng, dtype)
    params.update(init_head(config.d1 + config.d2 + config.d3, config.d3, len(classes), rng, dtype))
    return params


def prepare_document(doc: VisualDocument, alpha: float = DEFAULT_MERGE_ALPHA) -> VisualDocument:
    return merge_blocks(assign_reading_order(doc), alpha)


# ---------------------------------------------------------------------------
# Examples and batches


@dataclass
class Example:
    block_id: int
    token_ids: list[int]           # CLS first
    features: np.ndarray           # (len(token_ids), 2), zero row at CLS
    labels: list[int] | None       # -1 at CLS
    contexts: list[tuple[int, ...]]  # each CLS first; C is the mean of their CLS rows


def _context_sequences(doc: VisualDocument, i: int, bundle: ModelBundle,
                       block_ids: list[list[int]]) -> list[tuple[int, ...]]:
    budget = bundle.config.context_max_len - 1
    source = bundle.context_source
    if source == "none":
        return []
    if source == "global":
        return [(CLS, *ids[:budget]) for ids in block_ids]
    idx = neighbor_indices(i, len(doc.blocks), bundle.neighborhood)
    if not idx:
        return []
    words = build_neighborhood_text(doc, idx, budget)
    return [(CLS, *bundle.vocab.ids(words))]


def build_examples(doc: VisualDocument, bundle: ModelBundle, with_labels: bool = True) -> list[Example]:
    """One example per target block (long blocks are cut into max_len windows)."""
    median_font = doc.median_font_size()
    block_ids = [bundle.vocab.ids(b.words) for b in doc.blocks]
    spans_by_block: dict[int, list[EntitySpan]] = {}
    if with_labels and doc.gold_spans:
        for s in doc.gold_spans:
            spans_by_block.setdefault(s.block_id, []).append(s)
    window = bundle.config.max_len - 1
    out = []
    for i, block in enumerate(doc.blocks):
        contexts = _context_sequences(doc, i, bundle, block_ids)
        feats = block_features(doc, block, median_font)
        labels = None
        if with_labels:
            labels = encode_iob(spans_by_block.get(block.id, []), len(block), bundle.classes)
        for lo in range(0, len(block), window):
            hi = min(lo + window, len(block))
            f = np.zeros((hi - lo + 1, feats.shape[1]))
            f[1:] = feats[lo:hi]
            out.append(Example(
                block_id=block.id,
                token_ids=[CLS, *block_ids[i][lo:hi]],
                features=f,
                labels=None if labels is None else [-1, *labels[lo:hi]],
                contexts=contexts,
            ))
    return out


@dataclass
class Batch:
    ids: np.ndarray
    mask: np.ndarray
    labels: np.ndarray | None
    features: np.ndarray
    ctx_ids: np.ndarray | None
    ctx_mask: np.ndarray | None
    ctx_weights: np.ndarray  # (B, S)


def collate(examples: Sequence[Example], bundle: ModelBundle, dtype=None) -> Batch:
    dtype = dtype or bundle.params["enc.tok_emb"].dtype
    ids, mask = pad_batch([e.token_ids for e in examples])
    B, L = ids.shape
    feats = np.zeros((B, L, examples[0].features.shape[1]), dtype=dtype)
    labels = None
    if examples[0].labels is not None:
        labels = np.full((B, L), -1, dtype=np.int64)
    for r, e in enumerate(examples):
        feats[r, :len(e.token_ids)] = e.features
        if labels is not None:
            labels[r, :len(e.labels)] = e.labels
    slot: dict[tuple[int, ...], int] = {}
    for e in examples:
        for c in e.contexts:
            slot.setdefault(c, len(slot))
    weights = np.zeros((B, len(slot)), dtype=dtype)
    for r, e in enumerate(examples):
        for c in e.contexts:
            weights[r, slot[c]] += 1.0 / len(e.contexts)
    ctx_ids = ctx_mask = None
    if slot:
        ctx_ids, ctx_mask = pad_batch(list(slot))
    return Batch(ids, mask, labels, feats, ctx_ids, ctx_mask, weights)


def _chunks(seq, size):
    for i in range(0, len(seq), size):
        yield seq[i:i + size]


# ---------------------------------------------------------------------------
# Forward / backward


def forward(params, bundle: ModelBundle, batch: Batch):
    """Logits (B, L, labels) for every target position, plus a backward cache."""
    cfg = bundle.config
    T, t_cache = encode_batch(params, cfg, batch.ids, batch.mask)
    B, L, _ = T.shape
    c_cache = None
    if batch.ctx_ids is not None:
        H, c_cache = encode_batch(params, cfg, batch.ctx_ids, batch.ctx_mask)
        C = batch.ctx_weights @ H[:, 0, :]
    else:
        C = np.zeros((B, cfg.d2), dtype=T.dtype)
    if bundle.use_features:
        f = batch.features @ params["feat.w"] + params["feat.b"]
    else:
        f = np.zeros((B, L, cfg.d3), dtype=T.dtype)
    V = np.concatenate([T, np.broadcast_to(C[:, None, :], (B, L, cfg.d2)), f], axis=-1)
    logits = V @ params["cls.w"] + params["cls.b"]
    return logits, (t_cache, c_cache, V)


def backward(params, bundle: ModelBundle, batch: Batch, dlogits, cache) -> dict[str, np.ndarray]:
    cfg = bundle.config
    t_cache, c_cache, V = cache
    grads: dict[str, np.ndarray] = {}
    dV, grads["cls.w"], grads["cls.b"] = nn.linear_backward(dlogits, V, params["cls.w"])
    d1, d2 = cfg.d1, cfg.d2
    dT = dV[..., :d1]
    dC = dV[..., d1:d1 + d2].sum(axis=1)
    df = dV[..., d1 + d2:]
    if bundle.use_features:
        _, grads["feat.w"], grads["feat.b"] = nn.linear_backward(df, batch.features, params["feat.w"])
    else:
        grads["feat.w"] = np.zeros_like(params["feat.w"])
        grads["feat.b"] = np.zeros_like(params["feat.b"])
    enc = encode_backward(params, cfg, np.ascontiguousarray(dT), t_cache)
    if c_cache is not None:
        dH = np.zeros((batch.ctx_ids.shape[0], batch.ctx_ids.shape[1], d1), dtype=dT.dtype)
        dH[:, 0, :] = batch.ctx_weights.T @ dC
        for k, g in encode_backward(params, cfg, dH, c_cache).items():
            enc[k] = enc[k] + g
    grads.update(enc)
    return grads


def loss_and_grads(params, bundle: ModelBundle, batch: Batch):
    logits, cache = forward(params, bundle, batch)
    loss, dlogits = nn.softmax_cross_entropy(logits, batch.labels)
    return loss, backward(params, bundle, batch, dlogits, cache)


def batch_loss(params, bundle: ModelBundle, batch: Batch) -> float:
    logits, _ = forward(params, bundle, batch)
    return nn.softmax_cross_entropy(logits, batch.labels)[0]


def predict_corpus(bundle: ModelBundle, docs: Iterable[VisualDocument]) -> list[list[EntitySpan]]:
    return [bundle.predict(d) for d in docs]
