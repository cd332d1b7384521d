"""Document model: OCR blocks, tokens, gold spans, ingestion and block merging.

Documents are immutable. Every transformation returns a new document.
"""

from __future__ import annotations

import json
import logging
import re
import statistics
from dataclasses import dataclass, replace
from typing import Any, Sequence

logger = logging.getLogger(__name__)

DEFAULT_MERGE_ALPHA = 0.5

_PUNCT = re.compile(r"[^\w]", re.UNICODE)


class OCRParseError(ValueError):
    """Input violates the OCR-JSON schema. ``field`` names the offending key."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


class EmptyDocumentError(ValueError):
    pass


class CorpusError(ValueError):
    """Gold annotations are inconsistent with the document they belong to."""


@dataclass(frozen=True)
class BoundingBox:
    x: float
    y: float
    width: float
    height: float

    def __post_init__(self):
        if self.width <= 0:
            raise ValueError(f"width must be > 0, got {self.width}")
        if self.height <= 0:
            raise ValueError(f"height must be > 0, got {self.height}")
        if self.x < 0 or self.y < 0:
            raise ValueError(f"x, y must be >= 0, got ({self.x}, {self.y})")

    @property
    def bottom(self) -> float:
        return self.y + self.height

    @property
    def right(self) -> float:
        return self.x + self.width

    def union(self, other: "BoundingBox") -> "BoundingBox":
        x0, y0 = min(self.x, other.x), min(self.y, other.y)
        x1, y1 = max(self.right, other.right), max(self.bottom, other.bottom)
        return BoundingBox(x0, y0, x1 - x0, y1 - y0)


@dataclass(frozen=True)
class Token:
    text: str
    font_size: float
    char_offset: int

    def __post_init__(self):
        if not self.text or any(c.isspace() for c in self.text):
            raise ValueError(f"token text must be non-empty without whitespace: {self.text!r}")
        if self.font_size <= 0:
            raise ValueError(f"font_size must be > 0, got {self.font_size}")


@dataclass(frozen=True)
class EntitySpan:
    """A typed token range ``[start, end)`` inside one block."""

    label: str
    block_id: int
    start: int
    end: int

    def __post_init__(self):
        if not 0 <= self.start < self.end:
            raise ValueError(f"invalid span range [{self.start}, {self.end})")

    def key(self) -> tuple[str, int, int, int]:
        return (self.label, self.block_id, self.start, self.end)


@dataclass(frozen=True)
class TextBlock:
    id: int
    tokens: tuple[Token, ...]
    bbox: BoundingBox
    order_index: int = 0
    text: str = ""
    font_size: float = 0.0

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def words(self) -> list[str]:
        return [t.text for t in self.tokens]


@dataclass(frozen=True)
class VisualDocument:
    doc_id: str
    page_width: float
    page_height: float
    blocks: tuple[TextBlock, ...]
    gold_spans: tuple[EntitySpan, ...] | None = None

    def block_by_id(self, block_id: int) -> TextBlock:
        for b in self.blocks:
            if b.id == block_id:
                return b
        raise KeyError(f"no block with id {block_id} in {self.doc_id}")

    def block_position(self) -> dict[int, int]:
        """Map block id -> position in reading order."""
        return {b.id: i for i, b in enumerate(self.blocks)}

    @property
    def text(self) -> str:
        return "\n".join(b.text for b in self.blocks)

    def span_text(self, span: EntitySpan) -> str:
        block = self.block_by_id(span.block_id)
        return " ".join(t.text for t in block.tokens[span.start:span.end])

    def median_font_size(self) -> float:
        sizes = [t.font_size for b in self.blocks for t in b.tokens]
        return float(statistics.median(sizes))


# ---------------------------------------------------------------------------
# Tokenization


def tokenize(text: str, word_font_sizes: Sequence[float] | None = None,
             font_size: float = 1.0) -> list[Token]:
    """Split on whitespace, then peel leading/trailing punctuation into tokens.

    ``word_font_sizes`` gives one size per whitespace-separated word; the
    punctuation pieces inherit the size of the word they came from.
    """
    tokens: list[Token] = []
    words = list(re.finditer(r"\S+", text))
    if word_font_sizes is not None and len(word_font_sizes) != len(words):
        raise OCRParseError(
            "token_font_sizes",
            f"expected {len(words)} sizes (one per word), got {len(word_font_sizes)}",
        )
    for w, m in enumerate(words):
        size = float(word_font_sizes[w]) if word_font_sizes is not None else float(font_size)
        word, base = m.group(), m.start()
        lo, hi = 0, len(word)
        while lo < hi and _PUNCT.match(word[lo]):
            lo += 1
        while hi > lo and _PUNCT.match(word[hi - 1]):
            hi -= 1
        pieces = [(i, word[i]) for i in range(lo)]
        if lo < hi:
            pieces.append((lo, word[lo:hi]))
        pieces += [(i, word[i]) for i in range(hi, len(word))]
        for off, piece in pieces:
            tokens.append(Token(piece, size, base + off))
    return tokens


# ---------------------------------------------------------------------------
# Ingestion / serialization


def _require(obj: dict, key: str, kind, where: str = ""):
    name = f"{where}{key}"
    if key not in obj:
        raise OCRParseError(name, "missing")
    value = obj[key]
    if kind is float:
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
    else:
        ok = isinstance(value, kind) and not isinstance(value, bool)
    if not ok:
        raise OCRParseError(name, f"expected {getattr(kind, '__name__', kind)}, got {type(value).__name__}")
    return value


def parse_document(obj: dict[str, Any]) -> VisualDocument:
    """Build a document from an already-decoded OCR-JSON object."""
    if not isinstance(obj, dict):
        raise OCRParseError("<root>", "expected an object")
    doc_id = _require(obj, "doc_id", str)
    page_w = _require(obj, "page_width", int)
    page_h = _require(obj, "page_height", int)
    if page_w <= 0:
        raise OCRParseError("page_width", "must be > 0")
    if page_h <= 0:
        raise OCRParseError("page_height", "must be > 0")
    raw_blocks = _require(obj, "blocks", list)

    blocks: list[TextBlock] = []
    for i, rb in enumerate(raw_blocks):
        where = f"blocks[{i}]."
        if not isinstance(rb, dict):
            raise OCRParseError(f"blocks[{i}]", "expected an object")
        text = _require(rb, "text", str, where)
        bbox = _require(rb, "bbox", list, where)
        if len(bbox) != 4 or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in bbox):
            raise OCRParseError(f"{where}bbox", "expected [x, y, w, h] numbers")
        x, y, w, h = bbox
        for name, v in (("x", x), ("y", y)):
            if v < 0:
                raise OCRParseError(f"{where}bbox.{name}", f"must be >= 0, got {v}")
        for name, v in (("width", w), ("height", h)):
            if v <= 0:
                raise OCRParseError(f"{where}bbox.{name}", f"must be > 0, got {v}")
        if x + w > page_w:
            raise OCRParseError(f"{where}bbox.width", "box extends past page_width")
        if y + h > page_h:
            raise OCRParseError(f"{where}bbox.height", "box extends past page_height")
        font = _require(rb, "font_size", float, where)
        if font <= 0:
            raise OCRParseError(f"{where}font_size", "must be > 0")
        word_sizes = rb.get("token_font_sizes")
        if word_sizes is not None:
            if not isinstance(word_sizes, list) or not all(
                isinstance(s, (int, float)) and not isinstance(s, bool) and s > 0 for s in word_sizes
            ):
                raise OCRParseError(f"{where}token_font_sizes", "expected a list of positive numbers")
        try:
            tokens = tokenize(text, word_sizes, font)
        except OCRParseError as exc:
            raise OCRParseError(f"{where}{exc.field}", str(exc).split(": ", 1)[1]) from None
        if not tokens:
            continue
        blocks.append(TextBlock(
            id=i, tokens=tuple(tokens), bbox=BoundingBox(x, y, w, h),
            text=text, font_size=float(font),
        ))

    if not blocks:
        raise EmptyDocumentError(f"{doc_id}: no non-empty blocks")

    gold = None
    if "gold_spans" in obj and obj["gold_spans"] is not None:
        raw_spans = obj["gold_spans"]
        if not isinstance(raw_spans, list):
            raise OCRParseError("gold_spans", "expected a list")
        lengths = {b.id: len(b.tokens) for b in blocks}
        spans = []
        for j, rs in enumerate(raw_spans):
            where = f"gold_spans[{j}]."
            if not isinstance(rs, dict):
                raise OCRParseError(f"gold_spans[{j}]", "expected an object")
            label = _require(rs, "class", str, where)
            block = _require(rs, "block", int, where)
            start = _require(rs, "start", int, where)
            end = _require(rs, "end", int, where)
            if block not in lengths:
                raise OCRParseError(f"{where}block", f"no non-empty block {block}")
            if not 0 <= start < end <= lengths[block]:
                raise OCRParseError(f"{where}end", f"range [{start}, {end}) outside block of {lengths[block]} tokens")
            spans.append(EntitySpan(label, block, start, end))
        gold = tuple(spans)

    doc = VisualDocument(doc_id, page_w, page_h, tuple(blocks), gold)
    return assign_reading_order(doc)


def ingest_ocr_json(data: bytes | str) -> VisualDocument:
    """Parse OCR-JSON bytes into a reading-ordered document; empty blocks dropped."""
    try:
        obj = json.loads(data)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise OCRParseError("<root>", f"not valid JSON ({exc})") from None
    return parse_document(obj)


def document_to_json(doc: VisualDocument) -> dict[str, Any]:
    """Inverse of :func:`parse_document`. Blocks are written in id order."""
    by_id = sorted(doc.blocks, key=lambda b: b.id)
    pos = {b.id: i for i, b in enumerate(by_id)}
    blocks = []
    for b in by_id:
        entry: dict[str, Any] = {
            "text": b.text,
            "bbox": [_num(b.bbox.x), _num(b.bbox.y), _num(b.bbox.width), _num(b.bbox.height)],
            "font_size": _num(b.font_size),
        }
        word_sizes = _word_font_sizes(b)
        if any(s != b.font_size for s in word_sizes):
            entry["token_font_sizes"] = [_num(s) for s in word_sizes]
        blocks.append(entry)
    out: dict[str, Any] = {
        "doc_id": doc.doc_id,
        "page_width": _num(doc.page_width),
        "page_height": _num(doc.page_height),
        "blocks": blocks,
    }
    if doc.gold_spans is not None:
        out["gold_spans"] = [
            {"class": s.label, "block": pos[s.block_id], "start": s.start, "end": s.end}
            for s in doc.gold_spans
        ]
    return out


def serialize_document(doc: VisualDocument) -> bytes:
    return json.dumps(document_to_json(doc), ensure_ascii=False).encode("utf-8")


def _num(v: float) -> int | float:
    return int(v) if float(v).is_integer() else float(v)


def _word_font_sizes(block: TextBlock) -> list[float]:
    # one size per whitespace word, taken from the first token inside that word
    sizes = []
    words = list(re.finditer(r"\S+", block.text))
    ti = 0
    for m in words:
        while ti < len(block.tokens) and block.tokens[ti].char_offset < m.start():
            ti += 1
        sizes.append(block.tokens[ti].font_size if ti < len(block.tokens) else block.font_size)
    return sizes


# ---------------------------------------------------------------------------
# Layout


def assign_reading_order(doc: VisualDocument) -> VisualDocument:
    """Sort blocks by (y, x), stable on ties, and renumber ``order_index``."""
    ordered = sorted(doc.blocks, key=lambda b: (b.bbox.y, b.bbox.x))
    blocks = tuple(replace(b, order_index=i) for i, b in enumerate(ordered))
    return replace(doc, blocks=blocks)


def vertical_gap(upper: TextBlock, lower: TextBlock) -> float:
    return lower.bbox.y - upper.bbox.bottom


def merge_threshold(doc: VisualDocument, alpha: float = DEFAULT_MERGE_ALPHA) -> float:
    return alpha * float(statistics.median(b.bbox.height for b in doc.blocks))


def merge_blocks(doc: VisualDocument, alpha: float = DEFAULT_MERGE_ALPHA) -> VisualDocument:
    """Rejoin reading-order neighbours closer than ``alpha`` x median block height.

    Single left-to-right pass; a merged block keeps the earlier id and may
    absorb its successor too. Gold spans move with their tokens.
    """
    if alpha <= 0:
        raise ValueError("alpha must be > 0")
    threshold = merge_threshold(doc, alpha)

    groups: list[list[TextBlock]] = [[doc.blocks[0]]]
    boxes = [doc.blocks[0].bbox]
    for block in doc.blocks[1:]:
        if block.bbox.y - boxes[-1].bottom < threshold:
            groups[-1].append(block)
            boxes[-1] = boxes[-1].union(block.bbox)
        else:
            groups.append([block])
            boxes.append(block.bbox)

    if all(len(g) == 1 for g in groups):
        return doc

    # block id -> (merged id, token offset)
    remap: dict[int, tuple[int, int]] = {}
    merged: list[TextBlock] = []
    for order, (group, box) in enumerate(zip(groups, boxes)):
        head = group[0]
        tokens: list[Token] = []
        text = ""
        for b in group:
            remap[b.id] = (head.id, len(tokens))
            base = len(text) + (1 if text else 0)
            text = f"{text}\n{b.text}" if text else b.text
            tokens.extend(replace(t, char_offset=t.char_offset + base) for t in b.tokens)
        merged.append(TextBlock(
            id=head.id, tokens=tuple(tokens), bbox=box, order_index=order,
            text=text, font_size=head.font_size,
        ))

    gold = None
    if doc.gold_spans is not None:
        gold = tuple(
            EntitySpan(s.label, remap[s.block_id][0],
                       s.start + remap[s.block_id][1], s.end + remap[s.block_id][1])
            for s in doc.gold_spans
        )
        _flag_split_spans(doc.doc_id, gold, groups, remap)
    return VisualDocument(doc.doc_id, doc.page_width, doc.page_height, tuple(merged), gold)


def _flag_split_spans(doc_id, spans, groups, remap) -> None:
    boundaries = set()
    for group in groups:
        for b in group[1:]:
            boundaries.add(remap[b.id])
    ends = {(s.label, s.block_id, s.end) for s in spans}
    for s in spans:
        if (s.block_id, s.start) in boundaries and (s.label, s.block_id, s.start) in ends:
            logger.warning("%s: %s span at block %d token %d abuts a same-class span across a "
                           "merge boundary (entity split by OCR?)", doc_id, s.label, s.block_id, s.start)


def validate_gold(doc: VisualDocument) -> None:
    """Raise :class:`CorpusError` if a gold span is out of range or overlaps another."""
    if not doc.gold_spans:
        return
    lengths = {b.id: len(b) for b in doc.blocks}
    seen: dict[int, list[EntitySpan]] = {}
    for s in doc.gold_spans:
        if s.block_id not in lengths or s.end > lengths[s.block_id]:
            raise CorpusError(f"{doc.doc_id}: span {s} outside its block")
        for other in seen.get(s.block_id, []):
            if s.start < other.end and other.start < s.end:
                raise CorpusError(f"{doc.doc_id}: overlapping spans {other} and {s}")
        seen.setdefault(s.block_id, []).append(s)
