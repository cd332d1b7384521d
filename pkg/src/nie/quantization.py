"""8-bit storage quantization of model files.

Every tensor is stored as int8 with one affine (scale, zero_point) pair
calibrated from its own min/max. Inference dequantizes on load and runs in
float32.
"""

from __future__ import annotations

import numpy as np

from .corpus import Corpus
from .document import EntitySpan, VisualDocument
from .model import ModelBundle
from .modelfile import (
    SCHEME_INT8,
    QuantizedTensor,
    model_from_bytes,
    model_to_bytes,
    read_container,
    write_container,
)

QMIN, QMAX = -128, 127


def quantize_tensor(x: np.ndarray) -> QuantizedTensor:
    """Per-tensor affine int8 with min/max calibration.

    The scale is the float32 at or below ``(max - min) / 255`` and the zero
    point anchors ``max`` on code 127, so ``min`` lands on code -128 and the
    grid always spans all 256 codes. Because ``scale * integer`` is exact in
    float64, quantizing the dequantized values returns the same tensor.
    """
    x = np.asarray(x, dtype=np.float64)
    lo, hi = float(x.min()), float(x.max())
    if hi == lo:
        # constant tensor: unit scale, q = 0 encodes the rounded value
        return QuantizedTensor(np.zeros(x.shape, np.int8), 1.0, -int(np.round(lo)))
    exact = (hi - lo) / (QMAX - QMIN)
    scale = np.float32(exact)
    if float(scale) > exact:
        scale = np.nextafter(scale, np.float32(0))
    # clamped so sub-normal ranges do not underflow to a zero scale
    scale = max(float(scale), float(np.finfo(np.float32).tiny))
    zero_point = int(np.ceil(QMAX - 0.5 - hi / scale))
    q = np.clip(np.floor(x / scale + zero_point + 0.5), QMIN, QMAX).astype(np.int8)
    return QuantizedTensor(q, scale, zero_point)


def dequantize_tensor(q: QuantizedTensor) -> np.ndarray:
    return q.dequantize()


def fake_quantize(params: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    """Quantize-then-dequantize every tensor (forward pass of quantization-aware training)."""
    return {k: quantize_tensor(v).dequantize().astype(v.dtype) for k, v in params.items()}


def quantize_model(model: ModelBundle | bytes) -> bytes:
    """Serialize ``model`` with every tensor stored as a :class:`QuantizedTensor`."""
    source = None
    if isinstance(model, (bytes, bytearray)):
        scheme, _, source = read_container(bytes(model))
        model = model_from_bytes(bytes(model))
        if scheme != SCHEME_INT8:
            source = None
    if source is not None:
        # already quantized: recalibrate from the exact grid values, not their float32 copies
        tensors = {k: quantize_tensor(v.dequantize()) for k, v in source.items()}
    else:
        tensors = {k: quantize_tensor(v) for k, v in model.params.items()}
    return write_container(model, tensors, SCHEME_INT8,
                           {"quantization": {"scheme": "per-tensor-affine", "bits": 8,
                                             "calibration": "minmax"}})


def load_quantized(data: bytes) -> ModelBundle:
    """Load a quantized model file; float files are rejected."""
    return model_from_bytes(data, expect_scheme=SCHEME_INT8)


def quantized_tensors(data: bytes) -> dict[str, QuantizedTensor]:
    return read_container(data)[2]


def infer_quantized(qmodel: bytes | ModelBundle, doc: VisualDocument) -> list[EntitySpan]:
    bundle = load_quantized(qmodel) if isinstance(qmodel, (bytes, bytearray)) else qmodel
    return bundle.predict(doc)


def size_ratio(model: ModelBundle) -> float:
    return len(quantize_model(model)) / len(model_to_bytes(model))


def quantization_aware_finetune(model: ModelBundle, corpus: Corpus, train_config, epochs: int = 1) -> ModelBundle:
    """Extra epochs with fake-quantized weights in the forward pass (straight-through gradients)."""
    from dataclasses import replace

    from .training import train

    tc = replace(train_config, epochs=epochs)
    return train(corpus, model.config, tc, step_hook=fake_quantize, init=model)
