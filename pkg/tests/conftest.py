import json

import pytest

from nie.document import ingest_ocr_json


def make_doc_json(blocks, doc_id="d", page_width=400, page_height=1000, gold=None):
    """blocks: list of (text, (x, y, w, h)) or (text, bbox, font_size)."""
    out = []
    for b in blocks:
        text, bbox = b[0], b[1]
        font = b[2] if len(b) > 2 else 12
        out.append({"text": text, "bbox": list(bbox), "font_size": font})
    obj = {"doc_id": doc_id, "page_width": page_width, "page_height": page_height, "blocks": out}
    if gold is not None:
        obj["gold_spans"] = gold
    return obj


def make_doc(blocks, **kw):
    return ingest_ocr_json(json.dumps(make_doc_json(blocks, **kw)))


@pytest.fixture
def doc_factory():
    return make_doc


ACCEPTANCE_LINES: dict[int, str] = {}


def record_criterion(number: int, passed: bool, detail: str) -> None:
    """Remember one PASS/FAIL line for the acceptance summary (also printed immediately)."""
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {number:>2}: {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
