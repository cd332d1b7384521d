"""
Span scoring
============

A predicted span counts only when class, block and token range all match an
unmatched gold span. Scores pool over documents (micro) and average over
classes (macro).
"""

from nie.document import EntitySpan
from nie.evaluation import score

gold = [[EntitySpan("title", 0, 0, 2), EntitySpan("price", 1, 0, 1)]]
pred = [[EntitySpan("title", 0, 0, 2), EntitySpan("price", 1, 1, 2)]]
r = score(gold, pred, ["title", "price"])
print(r.table("one hit, one boundary miss"))

# %%
# A duplicate prediction can match only once; the copy is a false positive.
r = score([[EntitySpan("title", 0, 0, 2)]], [[EntitySpan("title", 0, 0, 2)] * 2], ["title", "price"])
print(f"\nduplicate: TP={r.tp} FP={r.fp} FN={r.fn}  P={r.micro_precision:.2f} R={r.micro_recall:.2f}")

# %%
# Reports serialize to JSON.
print(r.to_json()[:200], "...")
