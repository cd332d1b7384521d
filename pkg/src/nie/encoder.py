"""Small pre-norm transformer encoder trained from scratch.

The same parameters encode target blocks (per-token embeddings) and
neighbourhood text (the CLS row is the context vector).
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

import numpy as np

from . import nn

CLS, SEP, PAD, UNK = 0, 1, 2, 3
SPECIALS = ("[CLS]", "[SEP]", "[PAD]", "[UNK]")

_DIGIT = re.compile(r"\d")


def normalize(word: str) -> str:
    """Vocabulary key: lowercased, every digit folded to ``0``."""
    return _DIGIT.sub("0", word.lower())


class Vocabulary:
    def __init__(self, words: Sequence[str] = ()):
        self.itos: list[str] = list(SPECIALS)
        self.stoi: dict[str, int] = {w: i for i, w in enumerate(self.itos)}
        for w in words:
            if w not in self.stoi:
                self.stoi[w] = len(self.itos)
                self.itos.append(w)

    @classmethod
    def build(cls, texts: Iterable[Iterable[str]], min_count: int = 1) -> "Vocabulary":
        counts = Counter(normalize(w) for seq in texts for w in seq)
        words = sorted(w for w, c in counts.items() if c >= min_count and w not in SPECIALS)
        return cls(words)

    def __len__(self) -> int:
        return len(self.itos)

    def __contains__(self, word: str) -> bool:
        return normalize(word) in self.stoi

    def ids(self, words: Iterable[str]) -> list[int]:
        return [self.stoi.get(normalize(w), UNK) for w in words]

    def words(self) -> list[str]:
        return self.itos[len(SPECIALS):]


@dataclass(frozen=True)
class EncoderConfig:
    vocab_size: int
    d1: int = 128
    layers: int = 2
    heads: int = 2
    max_len: int = 64
    context_max_len: int = 128
    d3: int = 16
    ff_mult: int = 4

    def __post_init__(self):
        if self.d1 % self.heads:
            raise ValueError(f"d1={self.d1} not divisible by heads={self.heads}")
        if self.max_len < 2 or self.context_max_len < 2:
            raise ValueError("max_len must be >= 2")
        if self.vocab_size <= len(SPECIALS):
            raise ValueError("vocab_size must exceed the special tokens")

    @property
    def d2(self) -> int:
        return self.d1

    @property
    def positions(self) -> int:
        return max(self.max_len, self.context_max_len)

    def to_dict(self) -> dict:
        return asdict(self)


PRESETS = {
    "tiny": dict(d1=128, layers=2, heads=2),
    "small": dict(d1=256, layers=4, heads=4),
}


def preset(name: str, vocab_size: int, **overrides) -> EncoderConfig:
    return EncoderConfig(vocab_size=vocab_size, **{**PRESETS[name], **overrides})


def init_encoder(config: EncoderConfig, rng: np.random.Generator,
                 dtype=np.float32) -> dict[str, np.ndarray]:
    d, f = config.d1, config.d1 * config.ff_mult

    def normal(*shape):
        return (rng.standard_normal(shape) * 0.02).astype(dtype)

    p = {
        "enc.tok_emb": normal(config.vocab_size, d),
        "enc.pos_emb": normal(config.positions, d),
    }
    for l in range(config.layers):
        pre = f"enc.l{l}."
        p[pre + "ln1.g"] = np.ones(d, dtype)
        p[pre + "ln1.b"] = np.zeros(d, dtype)
        for name in ("q", "k", "v", "o"):
            p[pre + f"w{name}"] = normal(d, d)
            p[pre + f"b{name}"] = np.zeros(d, dtype)
        p[pre + "ln2.g"] = np.ones(d, dtype)
        p[pre + "ln2.b"] = np.zeros(d, dtype)
        p[pre + "w1"] = normal(d, f)
        p[pre + "b1"] = np.zeros(f, dtype)
        p[pre + "w2"] = normal(f, d)
        p[pre + "b2"] = np.zeros(d, dtype)
    p["enc.lnf.g"] = np.ones(d, dtype)
    p["enc.lnf.b"] = np.zeros(d, dtype)
    return p


def _split_heads(x, heads):
    B, L, d = x.shape
    return x.reshape(B, L, heads, d // heads).transpose(0, 2, 1, 3)


def _merge_heads(x):
    B, H, L, dh = x.shape
    return x.transpose(0, 2, 1, 3).reshape(B, L, H * dh)


def encode_batch(params, config: EncoderConfig, ids: np.ndarray, mask: np.ndarray):
    """Encode a padded batch. ``ids``/``mask`` are (B, L); returns (B, L, d1) and a cache."""
    B, L = ids.shape
    if L > config.positions:
        raise ValueError(f"sequence length {L} exceeds {config.positions} positions")
    x = params["enc.tok_emb"][ids] + params["enc.pos_emb"][:L]
    layer_caches = []
    for l in range(config.layers):
        pre = f"enc.l{l}."
        h, ln1 = nn.layernorm_forward(x, params[pre + "ln1.g"], params[pre + "ln1.b"])
        q = _split_heads(h @ params[pre + "wq"] + params[pre + "bq"], config.heads)
        k = _split_heads(h @ params[pre + "wk"] + params[pre + "bk"], config.heads)
        v = _split_heads(h @ params[pre + "wv"] + params[pre + "bv"], config.heads)
        ctx, att = nn.attention_forward(q, k, v, mask)
        ctx = _merge_heads(ctx)
        x = x + ctx @ params[pre + "wo"] + params[pre + "bo"]
        h2, ln2 = nn.layernorm_forward(x, params[pre + "ln2.g"], params[pre + "ln2.b"])
        u = h2 @ params[pre + "w1"] + params[pre + "b1"]
        a, gel = nn.gelu_forward(u)
        x = x + a @ params[pre + "w2"] + params[pre + "b2"]
        layer_caches.append((h, ln1, att, ctx, h2, ln2, a, gel))
    out, lnf = nn.layernorm_forward(x, params["enc.lnf.g"], params["enc.lnf.b"])
    return out, (ids, L, layer_caches, lnf)


def encode_backward(params, config: EncoderConfig, dout, cache) -> dict[str, np.ndarray]:
    ids, L, layer_caches, lnf = cache
    grads: dict[str, np.ndarray] = {}
    dx, grads["enc.lnf.g"], grads["enc.lnf.b"] = nn.layernorm_backward(dout, lnf)
    for l in reversed(range(config.layers)):
        pre = f"enc.l{l}."
        h, ln1, att, ctx, h2, ln2, a, gel = layer_caches[l]
        # feed-forward branch
        da, grads[pre + "w2"], grads[pre + "b2"] = nn.linear_backward(dx, a, params[pre + "w2"])
        du = nn.gelu_backward(da, gel)
        dh2, grads[pre + "w1"], grads[pre + "b1"] = nn.linear_backward(du, h2, params[pre + "w1"])
        dln2, grads[pre + "ln2.g"], grads[pre + "ln2.b"] = nn.layernorm_backward(dh2, ln2)
        dx = dx + dln2
        # attention branch
        dctx, grads[pre + "wo"], grads[pre + "bo"] = nn.linear_backward(dx, ctx, params[pre + "wo"])
        dq, dk, dv = nn.attention_backward(_split_heads(dctx, config.heads), att)
        dh = np.zeros_like(h)
        for name, dproj in (("q", dq), ("k", dk), ("v", dv)):
            dpart, grads[pre + f"w{name}"], grads[pre + f"b{name}"] = nn.linear_backward(
                _merge_heads(dproj), h, params[pre + f"w{name}"])
            dh += dpart
        dln1, grads[pre + "ln1.g"], grads[pre + "ln1.b"] = nn.layernorm_backward(dh, ln1)
        dx = dx + dln1
    dtok = nn.embedding_backward(ids, dx, params["enc.tok_emb"].shape[0])
    dpos = np.zeros_like(params["enc.pos_emb"])
    dpos[:L] = dx.sum(axis=0)
    grads["enc.tok_emb"] = dtok
    grads["enc.pos_emb"] = dpos
    return grads


def pad_batch(seqs: Sequence[Sequence[int]], length: int | None = None):
    """Right-pad id lists with PAD; returns (ids, mask)."""
    length = length or max(len(s) for s in seqs)
    ids = np.full((len(seqs), length), PAD, dtype=np.int64)
    mask = np.zeros((len(seqs), length), dtype=bool)
    for i, s in enumerate(seqs):
        ids[i, :len(s)] = s
        mask[i, :len(s)] = True
    return ids, mask


def encode(params, config: EncoderConfig, tokens: Sequence[int],
           pad_mask: Sequence[bool] | None = None) -> np.ndarray:
    """Encode one id sequence (CLS first). ``pad_mask`` marks PAD positions True."""
    tokens = np.asarray(tokens, dtype=np.int64)
    if pad_mask is None:
        pad_mask = tokens == PAD
    pad_mask = np.asarray(pad_mask, dtype=bool)
    if pad_mask.shape != tokens.shape:
        raise ValueError(f"mask length {pad_mask.shape[0]} != token length {tokens.shape[0]}")
    if tokens.size == 0 or tokens[0] != CLS:
        raise ValueError("sequence must start with CLS")
    out, _ = encode_batch(params, config, tokens[None, :], ~pad_mask[None, :])
    return out[0]


def context_vector(params, config: EncoderConfig, neighborhood_ids: Sequence[int]) -> np.ndarray:
    """CLS embedding of ``[CLS] + neighborhood_ids``; zeros for an empty neighbourhood."""
    if len(neighborhood_ids) == 0:
        return np.zeros(config.d2, dtype=params["enc.tok_emb"].dtype)
    if len(neighborhood_ids) > config.context_max_len - 1:
        raise ValueError("neighbourhood longer than the context budget; truncate first")
    return encode(params, config, [CLS, *neighborhood_ids])[0]
