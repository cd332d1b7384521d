"""Central finite-difference check of the full model's analytic gradients."""

from __future__ import annotations

import numpy as np

from .encoder import CLS, EncoderConfig, Vocabulary
from .head import EntityClassSet
from .model import Example, ModelBundle, batch_loss, collate, init_params, loss_and_grads


def relative_error(a: np.ndarray, b: np.ndarray, floor: float = 1e-6) -> float:
    """||a - b|| / (||a|| + ||b||).

    The floor sits above the rounding noise of central differences (about
    1e-10 per entry at eps=1e-5), so a tensor whose true gradient is exactly
    zero (the attention key bias, which softmax ignores) is judged by its
    absolute error instead of dividing noise by noise.
    """
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(a) + np.linalg.norm(b), floor))


def numeric_gradient(f, x: np.ndarray, eps: float = 1e-6) -> np.ndarray:
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        old = x[idx]
        x[idx] = old + eps
        hi = f()
        x[idx] = old - eps
        lo = f()
        x[idx] = old
        g[idx] = (hi - lo) / (2 * eps)
    return g


def tiny_problem(seed: int = 0, use_features: bool = True):
    """A float64 tiny model (d1=8, 1 layer, 1 head) and a batch exercising padding and shared contexts."""
    rng = np.random.default_rng(seed)
    cfg = EncoderConfig(vocab_size=12, d1=8, layers=1, heads=1, max_len=4, context_max_len=6, d3=4)
    classes = EntityClassSet(("title", "price"))
    params = {k: v.astype(np.float64) for k, v in init_params(cfg, classes, seed).items()}
    for k in params:
        # move away from the near-symmetric initial point so every path carries signal
        params[k] = params[k] + rng.normal(0, 0.3, params[k].shape)
    bundle = ModelBundle(cfg, classes, Vocabulary([f"w{i}" for i in range(8)]), params,
                         use_features=use_features)
    shared = (CLS, 4, 5)
    examples = [
        Example(0, [CLS, 5, 6, 7], rng.random((4, 2)), [-1, 1, 2, 0], [shared, (CLS, 9, 10, 11, 4)]),
        Example(1, [CLS, 8], rng.random((2, 2)), [-1, 3], [shared]),
        Example(2, [CLS, 9, 4], rng.random((3, 2)), [-1, 4, 0], []),
    ]
    return bundle, collate(examples, bundle, dtype=np.float64)


def check_model_gradients(seed: int = 0, use_features: bool = True, eps: float = 1e-5) -> dict[str, float]:
    """Relative error between analytic and numeric gradients for every parameter tensor."""
    bundle, batch = tiny_problem(seed, use_features)
    params = bundle.params
    _, grads = loss_and_grads(params, bundle, batch)
    out = {}
    for name in sorted(params):
        num = numeric_gradient(lambda: batch_loss(params, bundle, batch), params[name], eps)
        out[name] = relative_error(grads[name], num)
    return out
