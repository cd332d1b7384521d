"""Command-line entry point: synth, train, eval, infer, quantize, bench.

Exit codes: 0 success, 1 runtime failure, 2 usage error. Set
``NIE_LOG_LEVEL`` (e.g. ``DEBUG``) to change log verbosity.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import random
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .corpus import MANIFEST, Corpus, read_corpus, write_corpus
from .document import EntitySpan, OCRParseError, EmptyDocumentError, ingest_ocr_json
from .encoder import PRESETS
from .evaluation import score
from .model import ModelBundle, prepare_document
from .modelfile import ModelLoadError, model_from_bytes, model_to_bytes, model_scheme
from .neighborhood import ContextMode, NeighborhoodSpec
from .quantization import quantize_model
from .synth import GeneratorConfig, generate
from .training import TrainConfig, train

log = logging.getLogger("nie")

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


@dataclass
class RunManifest:
    command: str
    config: dict
    seed: int | None = None
    inputs: dict[str, str] = field(default_factory=dict)
    outputs: dict[str, str] = field(default_factory=dict)
    timings: dict[str, float] = field(default_factory=dict)
    hashes: dict[str, str] = field(default_factory=dict)
    errors: list[dict] = field(default_factory=list)

    def add_input(self, name: str, path) -> None:
        self.inputs[name] = str(path)
        self.hashes[str(path)] = hash_path(path)

    def add_output(self, name: str, path) -> None:
        self.outputs[name] = str(path)
        self.hashes[str(path)] = hash_path(path)

    def write(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path


def hash_path(path) -> str:
    """sha256 of a file, or of a directory's (name, file hash) listing."""
    p = Path(path)
    h = hashlib.sha256()
    if p.is_dir():
        for child in sorted(p.iterdir()):
            if child.is_file() and not child.name.endswith(".manifest.json"):
                h.update(child.name.encode())
                h.update(hash_path(child).encode())
        return h.hexdigest()
    h.update(p.read_bytes())
    return h.hexdigest()


def _manifest_path(out: str | None, command: str) -> Path:
    if out is None:
        return Path(f"nie-{command}.manifest.json")
    p = Path(out)
    if p.is_dir():
        return p / "run.manifest.json"
    return p.with_name(p.name + ".manifest.json")


def _load_model(path: str) -> ModelBundle:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"model file not found: {path}")
    return model_from_bytes(p.read_bytes())


def _load_corpus(path: str) -> Corpus:
    p = Path(path)
    if not (p / MANIFEST).is_file():
        raise UsageError(f"not a corpus directory (no {MANIFEST}): {path}")
    return read_corpus(p)


# ---------------------------------------------------------------------------
# synth


def cmd_synth(args) -> int:
    try:
        cfg = GeneratorConfig(domain=args.domain, count=args.count, seed=args.seed,
                              distractor_rate=args.distractor_rate, split_rate=args.split_rate,
                              font_jitter=args.font_jitter)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    out = Path(args.out)
    t0 = time.perf_counter()
    corpus = generate(cfg)
    try:
        write_corpus(corpus, out)
    except OSError as exc:
        log.error("cannot write corpus to %s: %s", out, exc)
        return EXIT_FAILURE
    m = RunManifest("synth", asdict(cfg), seed=cfg.seed)
    m.timings["total_s"] = round(time.perf_counter() - t0, 3)
    m.add_output("corpus", out)
    m.write(_manifest_path(str(out), "synth"))
    print(f"wrote {len(corpus.all_documents())} documents to {out} "
          f"(train {len(corpus.train)}, dev {len(corpus.dev)}, test {len(corpus.test)})")
    return EXIT_OK


# ---------------------------------------------------------------------------
# train

_TRAIN_KEYS = {
    "context": str, "n": int, "features": str, "baseline": str, "preset": str,
    "d1": int, "layers": int, "heads": int, "d3": int, "max_len": int, "context_max_len": int,
    "epochs": int, "batch_size": int, "lr": float, "seed": int, "merge_alpha": float,
}
_TRAIN_DEFAULTS = {
    "context": "bottom", "n": 4, "features": "on", "baseline": "nie", "preset": "tiny",
    "epochs": 10, "batch_size": 32, "lr": 3e-4, "seed": 0, "merge_alpha": 0.5,
}


def read_config_file(path) -> dict:
    """JSON object or ``key = value`` lines (``#`` comments allowed)."""
    text = Path(path).read_text(encoding="utf-8")
    if text.lstrip().startswith("{"):
        raw = json.loads(text)
    else:
        raw = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key = value")
            k, v = (s.strip() for s in line.split("=", 1))
            raw[k] = v
    out = {}
    for k, v in raw.items():
        key = k.replace("-", "_")
        if key not in _TRAIN_KEYS:
            raise UsageError(f"{path}: unknown config key {k!r}")
        try:
            out[key] = _TRAIN_KEYS[key](v)
        except ValueError:
            raise UsageError(f"{path}: bad value for {k}: {v!r}") from None
    return out


def resolve_train_options(args) -> tuple[dict, TrainConfig]:
    """Merge defaults, config file and flags (flags win); returns (encoder overrides, TrainConfig)."""
    file_cfg = read_config_file(args.config) if args.config else {}
    explicit = {k: getattr(args, k) for k in _TRAIN_KEYS if getattr(args, k, None) is not None}
    opts = {**_TRAIN_DEFAULTS, **file_cfg, **explicit}

    context_given = "context" in explicit or "context" in file_cfg
    if opts["baseline"] != "nie" and context_given and opts["context"] != "none":
        raise UsageError(f"--baseline {opts['baseline']} conflicts with --context {opts['context']}")
    if opts["preset"] not in PRESETS:
        raise UsageError(f"unknown --preset {opts['preset']!r}")
    context = "none" if opts["baseline"] != "nie" else opts["context"]
    enc = dict(PRESETS[opts["preset"]])
    for k in ("d1", "layers", "heads", "d3", "max_len", "context_max_len"):
        if k in opts:
            enc[k] = opts[k]
    try:
        tc = TrainConfig(
            epochs=opts["epochs"], batch_size=opts["batch_size"], learning_rate=opts["lr"],
            seed=opts["seed"], neighborhood=NeighborhoodSpec(ContextMode(context), opts["n"]),
            use_visual_features=opts["features"] == "on", baseline=opts["baseline"],
            merge_alpha=opts["merge_alpha"],
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return enc, tc


def cmd_train(args) -> int:
    enc, tc = resolve_train_options(args)
    corpus = _load_corpus(args.corpus)
    out = Path(args.out)
    log_path = out.with_name(out.name + ".log.jsonl")
    t0 = time.perf_counter()
    with open(log_path, "w", encoding="utf-8") as fh:
        def record(r):
            fh.write(json.dumps(r, sort_keys=True) + "\n")
            fh.flush()
        bundle = train(corpus, enc, tc, log=record)
    out.write_bytes(model_to_bytes(bundle))
    m = RunManifest("train", {"encoder": bundle.config.to_dict(), "train": tc.to_dict()}, seed=tc.seed)
    m.timings["total_s"] = round(time.perf_counter() - t0, 3)
    m.add_input("corpus", args.corpus)
    m.add_output("model", out)
    m.add_output("log", log_path)
    m.write(_manifest_path(str(out), "train"))
    print(f"wrote {out} (best dev micro F1 {bundle.meta['best_dev_micro_f1']:.4f})")
    return EXIT_OK


# ---------------------------------------------------------------------------
# eval / infer


def spans_to_json(doc, spans: list[EntitySpan]) -> dict:
    return {"doc_id": doc.doc_id, "spans": [
        {"class": s.label, "block": s.block_id, "start": s.start, "end": s.end, "text": doc.span_text(s)}
        for s in spans
    ]}


def spans_from_json(obj: dict) -> list[EntitySpan]:
    return [EntitySpan(s["class"], s["block"], s["start"], s["end"]) for s in obj["spans"]]


def _read_gold_dir(path: Path):
    if (path / MANIFEST).is_file():
        corpus = read_corpus(path)
        return corpus.all_documents(), corpus.classes
    docs = [ingest_ocr_json(p.read_bytes()) for p in sorted(path.glob("*.json"))]
    return docs, ()


def cmd_eval(args) -> int:
    t0 = time.perf_counter()
    m = RunManifest("eval", {"split": args.split})
    if args.gold or args.pred:
        if not (args.gold and args.pred):
            raise UsageError("--gold and --pred must be given together")
        gold_dir, pred_dir = Path(args.gold), Path(args.pred)
        for p in (gold_dir, pred_dir):
            if not p.is_dir():
                raise UsageError(f"not a directory: {p}")
        docs, classes = _read_gold_dir(gold_dir)
        if args.classes:
            classes = tuple(args.classes.split(","))
        if not classes:
            raise UsageError("cannot infer entity classes; pass --classes")
        preds = {}
        for p in sorted(pred_dir.glob("*.json")):
            obj = json.loads(p.read_text(encoding="utf-8"))
            if isinstance(obj, dict) and "doc_id" in obj and "spans" in obj:
                preds[obj["doc_id"]] = spans_from_json(obj)
        prepared = [prepare_document(d, args.merge_alpha) for d in docs]
        report = score([list(d.gold_spans or ()) for d in prepared],
                       [preds.get(d.doc_id, []) for d in prepared], classes)
        m.add_input("gold", gold_dir)
        m.add_input("pred", pred_dir)
    else:
        if not args.model or not args.corpus:
            raise UsageError("eval needs --model and --corpus (or --gold and --pred)")
        bundle = _load_model(args.model)
        corpus = _load_corpus(args.corpus)
        docs = corpus.split(args.split)
        prepared = [bundle.prepare(d) for d in docs]
        preds = [bundle.predict(d, prepared=True) for d in prepared]
        report = score([list(d.gold_spans or ()) for d in prepared], preds, bundle.classes.classes)
        m.add_input("model", args.model)
        m.add_input("corpus", args.corpus)
    m.timings["total_s"] = round(time.perf_counter() - t0, 3)
    print(report.table(f"{len(docs)} documents"))
    if args.out:
        Path(args.out).write_text(report.to_json() + "\n", encoding="utf-8")
        m.add_output("report", args.out)
    m.write(_manifest_path(args.out, "eval"))
    return EXIT_OK


def cmd_infer(args) -> int:
    bundle = _load_model(args.model)
    src, out = Path(args.input), Path(args.out)
    if not src.exists():
        raise UsageError(f"input not found: {src}")
    t0 = time.perf_counter()
    m = RunManifest("infer", {"model_scheme": model_scheme(Path(args.model).read_bytes())})
    m.add_input("model", args.model)
    m.add_input("input", src)
    if src.is_dir():
        files = sorted(p for p in src.glob("*.json") if p.name != MANIFEST)
        out.mkdir(parents=True, exist_ok=True)
        results = []
        for p in files:
            try:
                doc = ingest_ocr_json(p.read_bytes())
                prepared = bundle.prepare(doc)
                results.append((doc.doc_id, p, spans_to_json(prepared, bundle.predict(prepared, prepared=True))))
            except (OCRParseError, EmptyDocumentError) as exc:
                m.errors.append({"file": str(p), "error": str(exc)})
                log.warning("skipping %s: %s", p, exc)
        for _, p, obj in sorted(results, key=lambda r: r[0]):
            (out / p.name).write_text(json.dumps(obj, ensure_ascii=False, sort_keys=True) + "\n", encoding="utf-8")
        m.add_output("predictions", out)
        summary = {"processed": len(results), "errors": m.errors}
    else:
        try:
            doc = ingest_ocr_json(src.read_bytes())
        except (OCRParseError, EmptyDocumentError) as exc:
            log.error("%s: %s", src, exc)
            return EXIT_FAILURE
        prepared = bundle.prepare(doc)
        obj = spans_to_json(prepared, bundle.predict(prepared, prepared=True))
        out.write_text(json.dumps(obj, ensure_ascii=False, sort_keys=True) + "\n", encoding="utf-8")
        m.add_output("predictions", out)
        summary = {"processed": 1, "errors": []}
    m.timings["total_s"] = round(time.perf_counter() - t0, 3)
    m.write(_manifest_path(str(out), "infer"))
    print(json.dumps(summary, indent=2))
    return EXIT_OK


# ---------------------------------------------------------------------------
# quantize / bench


def cmd_quantize(args) -> int:
    src = Path(args.model)
    if not src.is_file():
        raise UsageError(f"model file not found: {src}")
    t0 = time.perf_counter()
    data = quantize_model(src.read_bytes())
    out = Path(args.out)
    out.write_bytes(data)
    m = RunManifest("quantize", {"scheme": "per-tensor-affine-int8"})
    m.timings["total_s"] = round(time.perf_counter() - t0, 3)
    m.add_input("model", src)
    m.add_output("quantized_model", out)
    m.write(_manifest_path(str(out), "quantize"))
    ratio = len(data) / src.stat().st_size
    print(f"wrote {out}: {len(data)} bytes ({ratio:.3f} of {src.stat().st_size})")
    return EXIT_OK


def cmd_bench(args) -> int:
    bundle = _load_model(args.model)
    corpus = _load_corpus(args.corpus)
    docs = corpus.split(args.split) or corpus.all_documents()
    if not docs:
        raise UsageError("corpus has no documents to benchmark")
    if args.docs < 1 or args.reps < 1:
        raise UsageError("--docs and --reps must be >= 1")
    picked = random.Random(args.seed).sample(docs, min(args.docs, len(docs)))
    bundle.predict(picked[0])  # warm-up
    rows = []
    for d in picked:
        times = []
        for _ in range(args.reps):
            t = time.perf_counter()
            bundle.predict(d)
            times.append((time.perf_counter() - t) * 1000)
        rows.append({"doc_id": d.doc_id, "blocks": len(d.blocks), "mean_ms": sum(times) / len(times),
                     "min_ms": min(times), "max_ms": max(times)})
    report = {
        "model": args.model,
        "scheme": model_scheme(Path(args.model).read_bytes()),
        "model_bytes": Path(args.model).stat().st_size,
        "repetitions": args.reps,
        "documents": rows,
        "mean_ms": sum(r["mean_ms"] for r in rows) / len(rows),
    }
    print(f"{'doc_id':<24}{'blocks':>7}{'mean ms':>10}{'min ms':>10}{'max ms':>10}")
    for r in rows:
        print(f"{r['doc_id']:<24}{r['blocks']:>7}{r['mean_ms']:>10.2f}{r['min_ms']:>10.2f}{r['max_ms']:>10.2f}")
    print(f"{'mean over documents':<31}{report['mean_ms']:>10.2f}")
    if args.out:
        Path(args.out).write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    m = RunManifest("bench", {"docs": args.docs, "reps": args.reps, "split": args.split}, seed=args.seed)
    m.timings["mean_ms"] = round(report["mean_ms"], 3)
    m.add_input("model", args.model)
    m.add_input("corpus", args.corpus)
    if args.out:
        m.add_output("report", args.out)
    m.write(_manifest_path(args.out, "bench"))
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nie", description="Neighbourhood-context information extraction.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic annotated corpus")
    p.add_argument("--domain", choices=["event", "product"], default="event")
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--distractor-rate", type=float, default=0.6)
    p.add_argument("--split-rate", type=float, default=0.2, help="OCR over-splitting rate")
    p.add_argument("--font-jitter", type=float, default=0.04)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train a model on a corpus directory")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="JSON or key=value file; flags override it")
    p.add_argument("--context", choices=[m.value for m in ContextMode])
    p.add_argument("--n", type=int)
    p.add_argument("--features", choices=["on", "off"])
    p.add_argument("--baseline", choices=["nie", "no_context", "global_context"])
    p.add_argument("--preset", choices=sorted(PRESETS))
    for name in ("d1", "layers", "heads", "d3", "epochs", "seed"):
        p.add_argument(f"--{name}", type=int)
    p.add_argument("--max-len", dest="max_len", type=int)
    p.add_argument("--context-max-len", dest="context_max_len", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--merge-alpha", dest="merge_alpha", type=float)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score a model on a corpus split, or prediction files against gold")
    p.add_argument("--model")
    p.add_argument("--corpus")
    p.add_argument("--split", choices=["train", "dev", "test"], default="test")
    p.add_argument("--gold", help="directory of gold OCR-JSON documents")
    p.add_argument("--pred", help="directory of prediction JSON files")
    p.add_argument("--classes", help="comma-separated classes when --gold has no manifest")
    p.add_argument("--merge-alpha", type=float, default=0.5)
    p.add_argument("--out", help="write the report as JSON")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("infer", help="tag one OCR-JSON file or a directory of them")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("quantize", help="store a model with 8-bit weights")
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_quantize)

    p = sub.add_parser("bench", help="time inference on random corpus documents")
    p.add_argument("--model", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--split", choices=["train", "dev", "test"], default="test")
    p.add_argument("--docs", type=int, default=5)
    p.add_argument("--reps", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_bench)
    return ap


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("NIE_LOG_LEVEL", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"nie {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ModelLoadError, OCRParseError, EmptyDocumentError, ValueError, OSError) as exc:
        print(f"nie {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
