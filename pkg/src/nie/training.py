"""End-to-end training of the tagger and its baselines."""

from __future__ import annotations

import copy
import logging
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Callable

import numpy as np

from .corpus import Corpus
from .document import DEFAULT_MERGE_ALPHA, VisualDocument, validate_gold
from .encoder import EncoderConfig, Vocabulary, context_vector
from .evaluation import score
from .head import EntityClassSet
from .model import BASELINES, ModelBundle, build_examples, collate, init_params, loss_and_grads, prepare_document
from .neighborhood import ContextMode, NeighborhoodSpec

logger = logging.getLogger(__name__)


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 10
    batch_size: int = 32
    learning_rate: float = 3e-4
    warmup_fraction: float = 0.1
    seed: int = 0
    neighborhood: NeighborhoodSpec = field(default_factory=NeighborhoodSpec)
    use_visual_features: bool = True
    baseline: str = "nie"
    grad_clip: float = 1.0
    merge_alpha: float = DEFAULT_MERGE_ALPHA

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.baseline not in BASELINES:
            raise ValueError(f"baseline must be one of {BASELINES}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["neighborhood"] = {"mode": self.neighborhood.mode.value, "n": self.neighborhood.n}
        return d


class Adam:
    def __init__(self, params: dict[str, np.ndarray], lr: float, betas=(0.9, 0.999), eps=1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, betas[0], betas[1], eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params, grads, lr: float) -> None:
        self.t += 1
        c1 = 1 - self.b1 ** self.t
        c2 = 1 - self.b2 ** self.t
        for k in sorted(params):
            g = grads[k]
            m, v = self.m[k], self.v[k]
            m *= self.b1
            m += (1 - self.b1) * g
            v *= self.b2
            v += (1 - self.b2) * g * g
            params[k] -= (lr * (m / c1) / (np.sqrt(v / c2) + self.eps)).astype(params[k].dtype)


def clip_gradients(grads: dict[str, np.ndarray], max_norm: float) -> float:
    norm = math.sqrt(sum(float((g.astype(np.float64) ** 2).sum()) for g in grads.values()))
    if max_norm > 0 and norm > max_norm:
        s = max_norm / (norm + 1e-12)
        for k in grads:
            grads[k] = grads[k] * s
    return norm


def warmup_lr(step: int, total: int, base: float, warmup_fraction: float) -> float:
    warm = max(1, int(round(total * warmup_fraction)))
    return base * min(1.0, (step + 1) / warm)


def _usable(docs: list[VisualDocument]) -> list[VisualDocument]:
    out = []
    for d in docs:
        if not d.blocks or all(len(b) == 0 for b in d.blocks):
            logger.warning("skipping %s: every block is empty", d.doc_id)
            continue
        out.append(d)
    return out


def global_context_baseline(doc: VisualDocument, bundle: ModelBundle) -> np.ndarray:
    """Mean of every block's CLS vector: the simplified global-context stand-in."""
    if not doc.blocks:
        raise ValueError("document has no blocks")
    budget = bundle.config.context_max_len - 1
    vecs = [context_vector(bundle.params, bundle.config, bundle.vocab.ids(b.words)[:budget])
            for b in doc.blocks]
    return np.mean(vecs, axis=0)


def evaluate_bundle(bundle: ModelBundle, docs: list[VisualDocument]):
    """Score ``bundle`` on documents that already went through ``prepare``."""
    preds = [bundle.predict(d, prepared=True) for d in docs]
    return score([list(d.gold_spans or ()) for d in docs], preds, bundle.classes.classes)


def train(corpus: Corpus, encoder_config: EncoderConfig | dict, train_config: TrainConfig,
          log: Callable[[dict], None] | None = None,
          step_hook: Callable[[dict[str, np.ndarray]], dict[str, np.ndarray]] | None = None,
          init: ModelBundle | None = None) -> ModelBundle:
    """Train encoder and head, keeping the epoch with the best dev micro F1.

    ``encoder_config`` may be a full config or a dict of overrides (the
    vocabulary size is filled in from the training split). ``step_hook``
    maps the float parameters to the ones used in the forward pass (used
    for quantization-aware fine-tuning); gradients still update the float
    copy. ``init`` resumes from an existing model instead of a fresh one.
    """
    tc = train_config
    train_docs = [prepare_document(d, tc.merge_alpha) for d in _usable(corpus.train)]
    if not train_docs:
        raise TrainingError("empty training split")
    dev_docs = [prepare_document(d, tc.merge_alpha) for d in _usable(corpus.dev)]
    for d in train_docs + dev_docs:
        validate_gold(d)

    classes = EntityClassSet(tuple(corpus.classes) or _classes_from(train_docs))
    if init is not None:
        bundle = copy.deepcopy(init)
    else:
        vocab = Vocabulary.build(b.words for d in train_docs for b in d.blocks)
        if isinstance(encoder_config, dict):
            encoder_config = EncoderConfig(vocab_size=len(vocab), **encoder_config)
        elif encoder_config.vocab_size != len(vocab):
            encoder_config = EncoderConfig(**{**encoder_config.to_dict(), "vocab_size": len(vocab)})
        # baseline no_context and mode none are the same model; record one canonical form
        if tc.baseline != "nie":
            tc = replace(tc, neighborhood=NeighborhoodSpec(ContextMode.NONE, 0))
        elif tc.neighborhood.mode is ContextMode.NONE:
            tc = replace(tc, baseline="no_context")
        neighborhood, baseline = tc.neighborhood, tc.baseline
        bundle = ModelBundle(
            config=encoder_config, classes=classes, vocab=vocab,
            params=init_params(encoder_config, classes, tc.seed),
            neighborhood=neighborhood, baseline=baseline,
            use_features=tc.use_visual_features, merge_alpha=tc.merge_alpha,
        )

    examples = [ex for d in train_docs for ex in build_examples(d, bundle)]
    rng = np.random.default_rng([tc.seed, 1])
    steps_per_epoch = math.ceil(len(examples) / tc.batch_size)
    total = steps_per_epoch * tc.epochs
    opt = Adam(bundle.params, tc.learning_rate)

    best_f1, best_params, history = -1.0, None, []
    step = 0
    for epoch in range(1, tc.epochs + 1):
        order = rng.permutation(len(examples))
        losses = []
        for s in range(steps_per_epoch):
            chunk = [examples[j] for j in order[s * tc.batch_size:(s + 1) * tc.batch_size]]
            batch = collate(chunk, bundle)
            fwd_params = step_hook(bundle.params) if step_hook else bundle.params
            loss, grads = loss_and_grads(fwd_params, bundle, batch)
            if not math.isfinite(loss):
                raise TrainingError(f"non-finite loss {loss} at epoch {epoch} step {s}")
            gnorm = clip_gradients(grads, tc.grad_clip)
            if not math.isfinite(gnorm):
                raise TrainingError(f"non-finite gradient norm at epoch {epoch} step {s}")
            opt.step(bundle.params, grads, warmup_lr(step, total, tc.learning_rate, tc.warmup_fraction))
            losses.append(loss)
            step += 1
        eval_params = step_hook(bundle.params) if step_hook else bundle.params
        dev_f1 = 0.0
        if dev_docs:
            saved, bundle.params = bundle.params, eval_params
            dev_f1 = evaluate_bundle(bundle, dev_docs).micro_f1
            bundle.params = saved
        record = {"epoch": epoch, "train_loss": round(float(np.mean(losses)), 6),
                  "dev_micro_f1": round(dev_f1, 6)}
        history.append(record)
        logger.info("epoch %d loss %.4f dev F1 %.4f", epoch, record["train_loss"], dev_f1)
        if log:
            log(record)
        if dev_f1 > best_f1 or not dev_docs:
            best_f1 = dev_f1
            best_params = {k: v.copy() for k, v in eval_params.items()}

    bundle.params = best_params
    bundle.meta = {"seed": tc.seed, "train_config": tc.to_dict(), "history": history,
                   "best_dev_micro_f1": round(best_f1, 6)}
    return bundle


def _classes_from(docs: list[VisualDocument]) -> tuple[str, ...]:
    seen: list[str] = []
    for d in docs:
        for s in d.gold_spans or ():
            if s.label not in seen:
                seen.append(s.label)
    return tuple(seen)
