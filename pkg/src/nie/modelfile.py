"""Versioned binary model container.

Layout (little-endian)::

    magic "NIEMODEL" | u16 version | u16 scheme | u32 header_len | header JSON
    u32 n_tensors
    per tensor: u16 name_len | name | u8 dtype | u8 ndim | u32 dims...
                [f32 scale | i32 zero_point]   (int8 only)
                raw data

scheme 0 stores float32 tensors, scheme 1 stores per-tensor affine int8.
The header is JSON with sorted keys, so identical models give identical bytes.
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass

import numpy as np

from .encoder import EncoderConfig, Vocabulary
from .head import EntityClassSet
from .model import ModelBundle
from .neighborhood import NeighborhoodSpec

MAGIC = b"NIEMODEL"
VERSION = 1
SCHEME_FLOAT32 = 0
SCHEME_INT8 = 1
SCHEME_NAMES = {SCHEME_FLOAT32: "float32", SCHEME_INT8: "per-tensor-affine-int8"}

_F32, _I8 = 0, 1


class ModelLoadError(ValueError):
    pass


@dataclass(frozen=True)
class QuantizedTensor:
    values: np.ndarray  # int8
    scale: float
    zero_point: int

    def dequantize(self) -> np.ndarray:
        """Exact grid values ``scale * (q - zero_point)`` in float64."""
        return self.scale * (self.values.astype(np.float64) - self.zero_point)


def _header(bundle: ModelBundle, scheme: int, extra: dict | None = None) -> bytes:
    header = {
        "format": "nie-model",
        "scheme": SCHEME_NAMES[scheme],
        "encoder_config": bundle.config.to_dict(),
        "classes": list(bundle.classes.classes),
        "vocab": bundle.vocab.words(),
        "neighborhood": {"mode": bundle.neighborhood.mode.value, "n": bundle.neighborhood.n},
        "baseline": bundle.baseline,
        "use_features": bundle.use_features,
        "merge_alpha": bundle.merge_alpha,
        "meta": bundle.meta,
    }
    if extra:
        header.update(extra)
    return json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")


def write_container(bundle: ModelBundle, tensors: dict[str, np.ndarray | QuantizedTensor],
                    scheme: int, extra_header: dict | None = None) -> bytes:
    buf = io.BytesIO()
    header = _header(bundle, scheme, extra_header)
    buf.write(MAGIC)
    buf.write(struct.pack("<HHI", VERSION, scheme, len(header)))
    buf.write(header)
    buf.write(struct.pack("<I", len(tensors)))
    for name in sorted(tensors):
        t = tensors[name]
        raw = name.encode("utf-8")
        buf.write(struct.pack("<H", len(raw)))
        buf.write(raw)
        arr = t.values if isinstance(t, QuantizedTensor) else np.asarray(t)
        code = _I8 if isinstance(t, QuantizedTensor) else _F32
        buf.write(struct.pack("<BB", code, arr.ndim))
        buf.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        if code == _I8:
            buf.write(struct.pack("<fi", t.scale, t.zero_point))
            buf.write(np.ascontiguousarray(arr, dtype="i1").tobytes())
        else:
            buf.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    return buf.getvalue()


def read_container(data: bytes):
    """Return ``(scheme, header, tensors)``; int8 tensors come back as QuantizedTensor."""
    if len(data) < len(MAGIC) + 8 or not data.startswith(MAGIC):
        raise ModelLoadError("not a model file (bad magic)")
    view = memoryview(data)
    pos = len(MAGIC)
    version, scheme, hlen = struct.unpack_from("<HHI", view, pos)
    pos += 8
    if version != VERSION:
        raise ModelLoadError(f"unsupported model file version {version}")
    if scheme not in SCHEME_NAMES:
        raise ModelLoadError(f"unknown storage scheme {scheme}")
    try:
        header = json.loads(bytes(view[pos:pos + hlen]))
        pos += hlen
        (count,) = struct.unpack_from("<I", view, pos)
        pos += 4
        tensors: dict[str, np.ndarray | QuantizedTensor] = {}
        for _ in range(count):
            (nlen,) = struct.unpack_from("<H", view, pos)
            pos += 2
            name = bytes(view[pos:pos + nlen]).decode("utf-8")
            pos += nlen
            code, ndim = struct.unpack_from("<BB", view, pos)
            pos += 2
            shape = struct.unpack_from(f"<{ndim}I", view, pos)
            pos += 4 * ndim
            size = int(np.prod(shape, dtype=np.int64))
            if code == _I8:
                scale, zp = struct.unpack_from("<fi", view, pos)
                pos += 8
                vals = np.frombuffer(view, dtype="i1", count=size, offset=pos).reshape(shape).copy()
                pos += size
                tensors[name] = QuantizedTensor(vals, float(scale), int(zp))
            elif code == _F32:
                vals = np.frombuffer(view, dtype="<f4", count=size, offset=pos).reshape(shape)
                pos += 4 * size
                tensors[name] = vals.astype(np.float32)
            else:
                raise ModelLoadError(f"tensor {name}: unknown dtype code {code}")
    except (struct.error, ValueError, UnicodeDecodeError) as exc:
        if isinstance(exc, ModelLoadError):
            raise
        raise ModelLoadError(f"corrupt model file: {exc}") from None
    if pos != len(data):
        raise ModelLoadError("trailing bytes after last tensor")
    return scheme, header, tensors


def _bundle_from(header: dict, params: dict[str, np.ndarray]) -> ModelBundle:
    cfg = EncoderConfig(**header["encoder_config"])
    nb = header["neighborhood"]
    return ModelBundle(
        config=cfg,
        classes=EntityClassSet(tuple(header["classes"])),
        vocab=Vocabulary(header["vocab"]),
        params=params,
        neighborhood=NeighborhoodSpec(nb["mode"], nb["n"]),
        baseline=header["baseline"],
        use_features=header["use_features"],
        merge_alpha=header["merge_alpha"],
        meta=header.get("meta", {}),
    )


def model_to_bytes(bundle: ModelBundle) -> bytes:
    return write_container(bundle, {k: v.astype(np.float32) for k, v in bundle.params.items()},
                           SCHEME_FLOAT32)


def model_from_bytes(data: bytes, expect_scheme: int | None = None) -> ModelBundle:
    """Load a float or quantized model; int8 tensors are dequantized to float32."""
    scheme, header, tensors = read_container(data)
    if expect_scheme is not None and scheme != expect_scheme:
        raise ModelLoadError(
            f"expected a {SCHEME_NAMES[expect_scheme]} model, file stores {SCHEME_NAMES[scheme]}")
    params = {k: (t.dequantize().astype(np.float32) if isinstance(t, QuantizedTensor) else t)
              for k, t in tensors.items()}
    return _bundle_from(header, params)


def model_scheme(data: bytes) -> str:
    return SCHEME_NAMES[read_container(data)[0]]


def save_model(bundle: ModelBundle, path) -> None:
    with open(path, "wb") as fh:
        fh.write(model_to_bytes(bundle))


def load_model(path) -> ModelBundle:
    with open(path, "rb") as fh:
        return model_from_bytes(fh.read())
