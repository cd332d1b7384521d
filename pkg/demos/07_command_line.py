"""
The command line
================

Every capability is also reachable through ``nie`` (or ``python -m nie``).
This script drives the same entry point in-process inside a temporary
directory: synthesize, train, evaluate, tag, quantize, benchmark.
"""

import json
import os
import tempfile
from pathlib import Path

from nie.cli import main

work = Path(tempfile.mkdtemp(prefix="nie-demo-"))  # removed by the OS, not by this script
os.chdir(work)
print("working in", work)

steps = [
    ["synth", "--domain", "event", "--count", "80", "--seed", "7", "--out", "corpus"],
    ["train", "--corpus", "corpus", "--out", "model.nie", "--context", "bottom", "--n", "4", "--features", "on",
     "--d1", "32", "--layers", "1", "--d3", "8", "--epochs", "3", "--lr", "1e-3"],
    ["eval", "--model", "model.nie", "--corpus", "corpus", "--split", "test", "--out", "report.json"],
    ["infer", "--model", "model.nie", "--input", "corpus", "--out", "predictions"],
    ["quantize", "--model", "model.nie", "--out", "model.int8.nie"],
    ["bench", "--model", "model.int8.nie", "--corpus", "corpus", "--docs", "5", "--reps", "3"],
]
for argv in steps:
    print("\n$ nie " + " ".join(argv))
    code = main(argv)
    print(f"(exit {code})")

# %%
# A conflicting arm is a usage error (exit code 2).
print("\n$ nie train ... --baseline no_context --context bottom")
print("(exit", main(["train", "--corpus", "corpus", "--out", "x.nie", "--baseline", "no_context",
                     "--context", "bottom"]), ")")

# %%
# Each run leaves a manifest with its resolved configuration and file hashes.
manifest = json.loads(Path("model.nie.manifest.json").read_text())
print("\ntrain manifest keys:", sorted(manifest))
