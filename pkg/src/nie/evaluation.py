"""Exact-match span scoring: micro P/R/F1, per-class scores and macro F1."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Sequence

from .document import EntitySpan


@dataclass(frozen=True)
class ClassScore:
    precision: float
    recall: float
    f1: float
    support: int
    tp: int = 0
    fp: int = 0
    fn: int = 0


@dataclass(frozen=True)
class EvalReport:
    micro_precision: float
    micro_recall: float
    micro_f1: float
    per_class: dict[str, ClassScore] = field(default_factory=dict)
    macro_f1: float = 0.0
    tp: int = 0
    fp: int = 0
    fn: int = 0

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def table(self, title: str = "") -> str:
        """Fixed-width table, columns F1 / Prec / Rec."""
        lines = []
        if title:
            lines.append(title)
        lines.append(f"{'':<12}{'F1':>8}{'Prec':>8}{'Rec':>8}{'Support':>9}")
        lines.append(f"{'micro':<12}{self.micro_f1:>8.4f}{self.micro_precision:>8.4f}{self.micro_recall:>8.4f}"
                     f"{self.tp + self.fn:>9d}")
        for name, s in self.per_class.items():
            lines.append(f"{name:<12}{s.f1:>8.4f}{s.precision:>8.4f}{s.recall:>8.4f}{s.support:>9d}")
        lines.append(f"{'macro F1':<12}{self.macro_f1:>8.4f}")
        return "\n".join(lines)


def prf(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    f = 2 * p * r / (p + r) if p + r else 0.0
    return p, r, f


def _check(spans: Sequence[EntitySpan], classes: Sequence[str], what: str) -> None:
    for s in spans:
        if not isinstance(s, EntitySpan):
            raise TypeError(f"{what}: expected EntitySpan, got {type(s).__name__}")
        if s.label not in classes:
            raise ValueError(f"{what}: unknown class {s.label!r}")


def score(gold: Sequence[Sequence[EntitySpan]], pred: Sequence[Sequence[EntitySpan]],
          classes: Sequence[str], block_lengths: Sequence[dict[int, int]] | None = None) -> EvalReport:
    """Score predicted spans against gold, one list per document.

    A prediction counts only if an unmatched gold span has the same class,
    block and token range. ``block_lengths`` (block id -> token count per
    document), when given, is used to reject spans pointing outside a block.
    """
    if len(gold) != len(pred):
        raise ValueError(f"got {len(gold)} gold documents but {len(pred)} predicted")
    classes = list(classes)
    tp: Counter = Counter()
    fp: Counter = Counter()
    fn: Counter = Counter()
    for d, (g, p) in enumerate(zip(gold, pred)):
        _check(g, classes, "gold")
        _check(p, classes, "pred")
        if block_lengths is not None:
            for s in (*g, *p):
                n = block_lengths[d].get(s.block_id)
                if n is None or s.end > n:
                    raise ValueError(f"document {d}: span {s} references an invalid block or token range")
        gc = Counter(s.key() for s in g)
        pc = Counter(s.key() for s in p)
        for key in gc.keys() | pc.keys():
            hit = min(gc[key], pc[key])
            tp[key[0]] += hit
            fp[key[0]] += pc[key] - hit
            fn[key[0]] += gc[key] - hit

    per_class = {}
    for k in classes:
        p_, r_, f_ = prf(tp[k], fp[k], fn[k])
        per_class[k] = ClassScore(p_, r_, f_, tp[k] + fn[k], tp[k], fp[k], fn[k])
    TP, FP, FN = sum(tp.values()), sum(fp.values()), sum(fn.values())
    P, R, F = prf(TP, FP, FN)
    macro = sum(s.f1 for s in per_class.values()) / len(classes) if classes else 0.0
    return EvalReport(P, R, F, per_class, macro, TP, FP, FN)
