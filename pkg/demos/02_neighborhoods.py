"""
Neighbourhood windows
=====================

The context for block i is the text of nearby blocks in reading order. Three
window shapes exist (top, bottom, overlap); at the page edges the window is
simply cut short.
"""

from nie.document import ingest_ocr_json
from nie.neighborhood import ContextMode, NeighborhoodSpec, build_neighborhood_text, neighbor_indices

N = 10
for mode in (ContextMode.TOP, ContextMode.BOTTOM, ContextMode.OVERLAP):
    for n in (3, 4):
        spec = NeighborhoodSpec(mode, n)
        rows = {i: neighbor_indices(i, N, spec) for i in (0, 1, 5, 9)}
        print(f"{mode.value:<8} n={n}: " + "  ".join(f"i={i}->{v}" for i, v in rows.items()))

# %%
# The neighbourhood text is the blocks' tokens in document order, cut to the
# encoder's context budget.
doc = ingest_ocr_json(b"""{"doc_id": "d", "page_width": 400, "page_height": 800, "blocks": [
  {"text": "Jazz Night", "bbox": [0, 0, 300, 30], "font_size": 30},
  {"text": "City Hall", "bbox": [0, 100, 300, 20], "font_size": 14},
  {"text": "June 3, 8 pm", "bbox": [0, 200, 300, 20], "font_size": 14}]}""")
idx = neighbor_indices(0, len(doc.blocks), NeighborhoodSpec("bottom", 4))
print("\nbottom context of the title:", build_neighborhood_text(doc, idx, max_tokens=128))
print("same, budget 3 tokens:      ", build_neighborhood_text(doc, idx, max_tokens=3))
