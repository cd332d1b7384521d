"""
Encoder, fusion and classification
==================================

One small transformer encodes both the target block and its neighbourhood.
Each token's vector is concatenated with the neighbourhood's CLS vector and a
projection of two visual features, then a linear layer picks an IOB label.
"""

import numpy as np

from nie.document import ingest_ocr_json
from nie.encoder import CLS, PAD, EncoderConfig, Vocabulary, context_vector, encode, init_encoder
from nie.gradcheck import check_model_gradients
from nie.head import EntityClassSet, block_features, classify, decode_iob, fuse, init_head, project_features

vocab = Vocabulary.build([["jazz", "night", "city", "hall", "june", "3", "8", "pm"]])
cfg = EncoderConfig(vocab_size=len(vocab), d1=16, layers=1, heads=2, d3=4)
rng = np.random.default_rng(0)
params = init_encoder(cfg, rng)

# %%
# Token embeddings of the target block. Padding never changes real rows.
ids = [CLS, *vocab.ids(["Jazz", "Night"])]
T = encode(params, cfg, ids)
T_padded = encode(params, cfg, ids + [PAD] * 5)
print("T shape", T.shape, " max change from padding", np.abs(T - T_padded[:3]).max())

# %%
# Neighbourhood vector: the CLS row of the encoded context. No neighbours -> zeros.
C = context_vector(params, cfg, vocab.ids(["City", "Hall", "June", "3", ",", "8", "pm"]))
print("C[:4]", np.round(C[:4], 3), " empty ->", context_vector(params, cfg, []).any())

# %%
# Visual features: font size over the document median, block top over page height.
doc = ingest_ocr_json(b"""{"doc_id": "d", "page_width": 400, "page_height": 1000, "blocks": [
  {"text": "Jazz Night", "bbox": [0, 50, 300, 30], "font_size": 24},
  {"text": "City Hall", "bbox": [0, 200, 300, 20], "font_size": 12},
  {"text": "June 3", "bbox": [0, 300, 300, 20], "font_size": 12}]}""")
raw = block_features(doc, doc.blocks[0], doc.median_font_size())
print("raw features of the title tokens:\n", raw)

classes = EntityClassSet(("title", "location", "time", "price"))
head = init_head(cfg.d1 + cfg.d2 + cfg.d3, cfg.d3, len(classes), rng)
labels = []
for x in range(1, len(ids)):
    v = fuse(T[x], C, project_features(head, raw[x - 1]), dims=(cfg.d1, cfg.d2, cfg.d3))
    logits, label = classify(head, v)
    labels.append(label)
print("labels (untrained):", [classes.labels[k] for k in labels], "->", decode_iob(labels, classes))

# %%
# The whole stack has a hand-written backward pass; compare it to finite differences.
errors = check_model_gradients()
print("worst relative gradient error:", f"{max(errors.values()):.1e}")
