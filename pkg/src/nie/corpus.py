"""Train/dev/test corpora and their on-disk form (OCR-JSON files + manifest)."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .document import VisualDocument, ingest_ocr_json, serialize_document

SPLITS = ("train", "dev", "test")
MANIFEST = "manifest.json"


@dataclass
class Corpus:
    train: list[VisualDocument] = field(default_factory=list)
    dev: list[VisualDocument] = field(default_factory=list)
    test: list[VisualDocument] = field(default_factory=list)
    classes: tuple[str, ...] = ()
    domain: str = ""

    def split(self, name: str) -> list[VisualDocument]:
        if name not in SPLITS:
            raise ValueError(f"unknown split {name!r}")
        return getattr(self, name)

    def all_documents(self) -> list[VisualDocument]:
        return [*self.train, *self.dev, *self.test]

    def check_disjoint(self) -> None:
        seen: dict[str, str] = {}
        for name in SPLITS:
            for d in self.split(name):
                if d.doc_id in seen:
                    raise ValueError(f"{d.doc_id} appears in both {seen[d.doc_id]} and {name}")
                seen[d.doc_id] = name


def split_of(doc_id: str, train: float = 0.70, dev: float = 0.15) -> str:
    """Stable split assignment from a hash of the document id."""
    h = int.from_bytes(hashlib.sha256(doc_id.encode("utf-8")).digest()[:8], "big") / 2 ** 64
    if h < train:
        return "train"
    if h < train + dev:
        return "dev"
    return "test"


def write_corpus(corpus: Corpus, out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    splits = {}
    for name in SPLITS:
        docs = corpus.split(name)
        splits[name] = [f"{d.doc_id}.json" for d in docs]
        for d in docs:
            (out / f"{d.doc_id}.json").write_bytes(serialize_document(d))
    manifest = {"domain": corpus.domain, "classes": list(corpus.classes), "splits": splits}
    path = out / MANIFEST
    path.write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    return path


def read_corpus(corpus_dir) -> Corpus:
    root = Path(corpus_dir)
    manifest = json.loads((root / MANIFEST).read_text(encoding="utf-8"))
    corpus = Corpus(classes=tuple(manifest["classes"]), domain=manifest.get("domain", ""))
    for name in SPLITS:
        docs = corpus.split(name)
        for fname in manifest["splits"].get(name, []):
            docs.append(ingest_ocr_json((root / fname).read_bytes()))
    return corpus
