"""Information extraction from visually rich documents using the text of neighbouring blocks."""

from .document import (BoundingBox, EntitySpan, TextBlock, Token, VisualDocument,
                       ingest_ocr_json, merge_blocks, parse_document, serialize_document)
from .evaluation import EvalReport, score
from .model import ModelBundle
from .modelfile import load_model, save_model
from .neighborhood import ContextMode, NeighborhoodSpec, neighbor_indices
from .quantization import quantize_model
from .synth import GeneratorConfig, generate
from .training import TrainConfig, train

__all__ = [
    "BoundingBox", "ContextMode", "EntitySpan", "EvalReport", "GeneratorConfig", "ModelBundle",
    "NeighborhoodSpec", "TextBlock", "Token", "TrainConfig", "VisualDocument", "generate",
    "ingest_ocr_json", "load_model", "merge_blocks", "neighbor_indices", "parse_document",
    "quantize_model", "save_model", "score", "serialize_document", "train",
]
