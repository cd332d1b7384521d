"""
Documents, reading order and block merging
==========================================

OCR engines hand back text blocks with bounding boxes. This script builds a
small poster by hand, shows the (y, x) reading order and then lets
``merge_blocks`` rejoin a title that OCR cut in two.
"""

import json

from nie.document import ingest_ocr_json, merge_blocks, merge_threshold, serialize_document

# Blocks arrive in arbitrary order. The title "Midnight Jazz / Night" was
# over-split: the second half sits 2px under the first.
poster = {
    "doc_id": "poster-1",
    "page_width": 720,
    "page_height": 1280,
    "blocks": [
        {"text": "City Hall, Springfield", "bbox": [32, 220, 400, 24], "font_size": 18},
        {"text": "Midnight Jazz", "bbox": [120, 60, 480, 44], "font_size": 36},
        {"text": "Night", "bbox": [120, 106, 480, 44], "font_size": 36},
        {"text": "Saturday, June 3 at 8 pm", "bbox": [32, 180, 400, 24], "font_size": 18},
        {"text": "Tickets $15.00", "bbox": [32, 300, 300, 24], "font_size": 18},
    ],
    "gold_spans": [
        {"class": "title", "block": 1, "start": 0, "end": 2},
        {"class": "title", "block": 2, "start": 0, "end": 1},
        {"class": "location", "block": 0, "start": 0, "end": 4},
        {"class": "time", "block": 3, "start": 0, "end": 7},
        {"class": "price", "block": 4, "start": 1, "end": 3},
    ],
}
doc = ingest_ocr_json(json.dumps(poster))

# %%
# Reading order sorts by (y, x); block ids keep the input index.
for b in doc.blocks:
    print(f"order {b.order_index}  id {b.id}  y={b.bbox.y:<4} {b.text!r}")

# %%
# Consecutive blocks closer than alpha x median height are merged. The median
# height here is 24px, so with alpha 0.5 any gap under 12px joins.
print("\nmerge threshold:", merge_threshold(doc))
merged = merge_blocks(doc)
for b in merged.blocks:
    print(f"id {b.id}  {b.words}")

# The two title halves now form one block; their gold spans were remapped
# and still read the same text (the abutting halves are logged as a warning).
for s in merged.gold_spans:
    print(f"{s.label:<9} block {s.block_id} tokens {s.start}:{s.end} -> {merged.span_text(s)!r}")

# %%
# Serialization is the inverse of ingestion.
assert ingest_ocr_json(serialize_document(doc)) == doc
print("\nround trip ok")
