#!/usr/bin/env python3
"""Regenerate the shared differential-test corpus (fixtures/corpus.jsonl).

Each line is one case: {"op": "parse-ocr"|"parse-grounding"|"order"|"eval-ocr", ...}.
Cases marked expect_error carry inputs the strict parser must reject. Run
from the repository root with the primary package installed; the output is
committed so the bindings tests never need Python at generation time.
"""

from __future__ import annotations

import json
import random
from pathlib import Path

import sys

sys.path.insert(0, str(Path(__file__).resolve().parents[2] / "tests"))

from genutil import random_grounding_doc, random_ocr_doc  # noqa: E402
from vvkit.grammar import doc_to_json, serialize  # noqa: E402

OUT = Path(__file__).resolve().parents[1] / "fixtures" / "corpus.jsonl"

MALFORMED = [
    "<obj>x</obj><bbox>0.1, 0.2</bbox>",
    "<obj>cat",
    "<char>a b</char><bbox>0, 0, 1, 1</bbox>",
    "<char>a</char>",
    "<obj>x</obj><bbox>a, b, c, d</bbox>",
    "<obj>x</obj><bbox>0, 0, 2, 1</bbox>",
    "<bbox>0, 0, 1, 1</bbox>",
    "words outside spans",
    "<obj>a</obj>",
    "<char>x</char><bbox>0, 0, 1",
]


def eval_case(rng: random.Random, case_id: int) -> dict:
    doc = random_ocr_doc(rng)
    words = [
        {"text": seg["text"], "bbox": seg["bbox"]}
        for seg in doc_to_json(doc)["segments"]
    ]
    gt = {"id": f"img{case_id}", "units": "norm", "words": words}
    style = rng.random()
    if style < 0.4:
        response = serialize(doc)  # perfect prediction
    elif style < 0.7:
        response = serialize(random_ocr_doc(rng))  # unrelated prediction
    else:
        response = ""  # empty prediction
    return {"op": "eval-ocr", "gt": gt, "pred_text": response, "threshold": 0.5}


def main() -> None:
    rng = random.Random(20250810)
    cases: list[dict] = []
    for _ in range(55):
        cases.append({"op": "parse-ocr", "text": serialize(random_ocr_doc(rng))})
    for _ in range(55):
        cases.append(
            {"op": "parse-grounding", "text": serialize(random_grounding_doc(rng))}
        )
    for i in range(5):
        cases.append(
            {"op": "parse-grounding", "text": "<gro>" + serialize(random_grounding_doc(rng))}
        )
    for text in MALFORMED[:5]:
        cases.append({"op": "parse-grounding", "text": text, "expect_error": True})
    for text in MALFORMED[5:]:
        cases.append({"op": "parse-ocr", "text": text, "expect_error": True})
    for _ in range(35):
        doc = doc_to_json(random_ocr_doc(rng))
        rng.shuffle(doc["segments"])
        cases.append({"op": "order", "doc": doc})
    for i in range(40):
        cases.append(eval_case(rng, i))
    assert len(cases) == 200, len(cases)
    OUT.parent.mkdir(parents=True, exist_ok=True)
    with OUT.open("w", encoding="utf-8") as fh:
        for case in cases:
            fh.write(json.dumps(case, ensure_ascii=False) + "\n")
    print(f"wrote {len(cases)} cases to {OUT}")


if __name__ == "__main__":
    main()
