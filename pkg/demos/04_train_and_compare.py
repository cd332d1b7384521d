"""
Training the tagger and its baselines
=====================================

Generate a synthetic event corpus, then train three arms with the same seed
and encoder: neighbourhood context (bottom, n=4), no context, and the
simplified global context (mean of every block's CLS vector).
"""

import time

from nie.model import prepare_document
from nie.neighborhood import NeighborhoodSpec
from nie.synth import GeneratorConfig, generate
from nie.training import TrainConfig, evaluate_bundle, train

corpus = generate(GeneratorConfig(domain="event", count=240, seed=3))
print(f"train {len(corpus.train)}  dev {len(corpus.dev)}  test {len(corpus.test)}")
test_docs = [prepare_document(d) for d in corpus.test]
encoder = dict(d1=32, layers=1, heads=2, d3=8)

arms = {
    "nie (bottom, n=4)": TrainConfig(epochs=4, learning_rate=1e-3, neighborhood=NeighborhoodSpec("bottom", 4)),
    "no context": TrainConfig(epochs=4, learning_rate=1e-3, baseline="no_context"),
    "global context": TrainConfig(epochs=4, learning_rate=1e-3, baseline="global_context"),
}
for name, tc in arms.items():
    start = time.perf_counter()
    model = train(corpus, encoder, tc, log=lambda r: print("   ", r))
    report = evaluate_bundle(model, test_docs)
    print(report.table(f"{name}  ({time.perf_counter() - start:.1f}s)"))
    print()
