"""Command-line entry point wiring all modules for pipeline use.

Every subcommand is a pure function of its inputs: JSON goes to the
output stream, diagnostics (parse warnings, typed error names) go to
stderr. Exit codes: 0 success, 1 domain error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from . import anyres, budget, evaluation, grammar, layout, merge
from .errors import ToolkitError


def _read_text(path: str | None) -> str:
    if path is None or path == "-":
        return sys.stdin.read()
    return Path(path).read_text(encoding="utf-8")


def _write_text(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")
        return
    Path(path).write_text(text if text.endswith("\n") else text + "\n", encoding="utf-8")


def _emit_json(args, obj) -> None:
    _write_text(getattr(args, "output", None), json.dumps(obj, ensure_ascii=False, indent=2))


def _warn(messages: list[str]) -> None:
    for msg in messages:
        print(f"warning: {msg}", file=sys.stderr)


def _parse_options(args) -> grammar.ParseOptions:
    return grammar.ParseOptions(
        strict=not args.lenient, max_fraction_digits=args.digits
    )


def _read_jsonl(path: str) -> list[dict]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: bad JSON: {exc}") from exc
    return records


def cmd_parse(args, mode: str) -> int:
    opts = _parse_options(args)
    text = _read_text(args.input)
    if mode == grammar.OCR:
        doc = grammar.parse_ocr(text, opts)
    else:
        doc = grammar.parse_grounding(text, opts)
    _warn(doc.warnings)
    _emit_json(args, grammar.doc_to_json(doc))
    return 0


def cmd_order(args) -> int:
    doc = grammar.doc_from_json(json.loads(_read_text(args.input)))
    ordered = layout.reading_order(doc.words())
    out = grammar.OutputDoc(segments=list(ordered), mode=grammar.OCR)
    _emit_json(args, grammar.doc_to_json(out))
    return 0


def cmd_plan(args) -> int:
    cfg = anyres.PATCH_14 if args.patch == 14 else anyres.PATCH_16
    profile = anyres.STAGE_PROFILES[args.stage]
    width, height = args.width, args.height
    if args.ocr_upscale:
        width, height = anyres.ocr_upscale(width, height)
    plan = anyres.select_grid(width, height, profile, cfg)
    _emit_json(
        args,
        {
            "stage": profile.name,
            "patch": args.patch,
            "image_px": [width, height],
            "rows": plan.rows,
            "cols": plan.cols,
            "tile_px": list(plan.tile_px),
            "tokens_per_tile": plan.tokens_per_tile,
            "total_tokens": plan.total_tokens,
        },
    )
    return 0


def _load_corpus(args) -> tuple[list[evaluation.GroundTruth], dict[str, str]]:
    gts = []
    seen = set()
    for record in _read_jsonl(args.gt):
        gt = evaluation.GroundTruth.from_record(record)
        if gt.image_id in seen:
            raise ValueError(f"duplicate ground-truth id {gt.image_id!r}")
        seen.add(gt.image_id)
        gts.append(gt)
    preds: dict[str, str] = {}
    for record in _read_jsonl(args.pred):
        image_id = str(record.get("id", ""))
        if image_id in preds:
            raise ValueError(f"duplicate prediction id {image_id!r}")
        if image_id not in seen:
            raise ValueError(f"prediction for unknown image id {image_id!r}")
        preds[image_id] = str(record.get("response", ""))
    return gts, preds


def cmd_eval_ocr(args) -> int:
    gts, preds = _load_corpus(args)
    opts = grammar.ParseOptions(strict=args.strict)
    rows = []
    reports = []
    for gt in gts:
        row_extra: dict = {}
        words: list[grammar.OcrWord] = []
        if gt.image_id not in preds:
            row_extra["missing_prediction"] = True
        else:
            try:
                doc = grammar.parse_ocr(preds[gt.image_id], opts)
                words = doc.words()
            except grammar.GrammarError as exc:
                if args.strict:
                    raise
                row_extra["parse_error"] = exc.code
        match = evaluation.match_words(words, gt, args.threshold)
        report = evaluation.recognition_accuracy(
            match, words, gt, casefold=not args.no_casefold
        )
        reports.append(report)
        rows.append({**report.to_json(), **row_extra})
    aggregate = evaluation.merge_reports(reports)
    out = {
        "threshold": args.threshold,
        "casefold": not args.no_casefold,
        "images": rows,
        "aggregate": aggregate.to_json(),
    }
    _emit_json(args, out)
    if args.figures:
        from . import figures

        for path in figures.render_eval_figures(out, args.figures):
            print(f"wrote {path}", file=sys.stderr)
    return 0


def cmd_eval_grounding(args) -> int:
    gts, preds = _load_corpus(args)
    opts = grammar.ParseOptions(strict=args.strict)
    rows = []
    total_gt = 0
    total_matched = 0
    for gt in gts:
        gt_spans = [grammar.GroundedSpan(w.text, w.bbox) for w in gt.words]
        row: dict = {"id": gt.image_id, "n_gt": len(gt_spans)}
        pred_spans: list[grammar.GroundedSpan] = []
        if gt.image_id not in preds:
            row["missing_prediction"] = True
        else:
            try:
                doc = grammar.parse_grounding(preds[gt.image_id], opts)
                pred_spans = doc.grounded()
            except grammar.GrammarError as exc:
                if args.strict:
                    raise
                row["parse_error"] = exc.code
        match = evaluation.grounding_matches(
            pred_spans, gt_spans, args.threshold, casefold=not args.no_casefold
        )
        row["n_pred"] = len(pred_spans)
        row["n_matched"] = len(match.pairs)
        row["grounding_accuracy"] = (
            len(match.pairs) / len(gt_spans) if gt_spans else 1.0
        )
        total_gt += len(gt_spans)
        total_matched += len(match.pairs)
        rows.append(row)
    out = {
        "threshold": args.threshold,
        "casefold": not args.no_casefold,
        "images": rows,
        "aggregate": {
            "n_gt": total_gt,
            "n_matched": total_matched,
            "grounding_accuracy": total_matched / total_gt if total_gt else 1.0,
        },
    }
    _emit_json(args, out)
    if args.figures:
        from . import figures

        for path in figures.render_grounding_figure(out, args.figures):
            print(f"wrote {path}", file=sys.stderr)
    return 0


def cmd_merge(args) -> int:
    maps = [merge.read_file(p) for p in args.inputs]
    weights = None
    if args.weights:
        weights = [float(w) for w in args.weights.split(",")]
    merged = merge.average(maps, weights)
    merge.write_file(merged, args.out)
    print(f"wrote {args.out}", file=sys.stderr)
    return 0


def cmd_cosine(args) -> int:
    base = merge.read_file(args.base)
    maps = [merge.read_file(p) for p in args.inputs]
    report = merge.cosine_matrix(maps, base, names=[str(p) for p in args.inputs])
    out = report.to_json()
    _emit_json(args, out)
    if args.figures:
        from . import figures

        for path in figures.render_cosine_figure(out, args.figures):
            print(f"wrote {path}", file=sys.stderr)
    return 0


def cmd_budget(args) -> int:
    rows = budget.stage_table(
        vocab=args.vocab,
        batch=args.batch,
        bytes_per_element=args.bytes_per_element,
        chunk_len=args.chunk_len,
        reference_resident=args.reference_resident,
    )
    _emit_json(args, {"stages": rows})
    if args.figures:
        from . import figures

        for path in figures.render_budget_figure(rows, args.figures):
            print(f"wrote {path}", file=sys.stderr)
    return 0


def _add_io_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", help="input file (default: stdin)")
    p.add_argument("--output", help="output file (default: stdout)")


def _add_parse_flags(p: argparse.ArgumentParser) -> None:
    _add_io_flags(p)
    p.add_argument(
        "--lenient",
        action="store_true",
        help="clamp/repair instead of rejecting out-of-range or misplaced input",
    )
    p.add_argument(
        "--digits", type=int, default=3, help="max fractional digits (default 3)"
    )


def _add_eval_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--gt", required=True, help="ground-truth JSONL")
    p.add_argument("--pred", required=True, help="predictions JSONL")
    p.add_argument("--threshold", type=float, default=evaluation.DEFAULT_IOU_THRESHOLD)
    p.add_argument(
        "--no-casefold", action="store_true", help="compare text case-sensitively"
    )
    p.add_argument(
        "--strict",
        action="store_true",
        help="parse responses strictly and fail the run on the first bad one",
    )
    p.add_argument("--figures", metavar="DIR", help="also render figures into DIR")
    p.add_argument("--output", help="report file (default: stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vvkit",
        description="Grounding/OCR output grammar, reading order, tile planning, "
        "evaluation, checkpoint merging and logit budgeting.",
    )
    parser.add_argument(
        "--version",
        action="version",
        version=f"vvkit {__version__} (container format {merge.FORMAT_VERSION})",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse-ocr", help="parse an OCR response to JSON")
    _add_parse_flags(p)
    p.set_defaults(func=lambda a: cmd_parse(a, grammar.OCR))

    p = sub.add_parser("parse-grounding", help="parse a grounding response to JSON")
    _add_parse_flags(p)
    p.set_defaults(func=lambda a: cmd_parse(a, grammar.GROUNDING))

    p = sub.add_parser("order", help="apply reading order to an ocr document JSON")
    _add_io_flags(p)
    p.set_defaults(func=cmd_order)

    p = sub.add_parser("plan", help="plan a tile grid and token budget")
    p.add_argument("--width", type=int, required=True)
    p.add_argument("--height", type=int, required=True)
    p.add_argument(
        "--stage", choices=sorted(anyres.STAGE_PROFILES), required=True
    )
    p.add_argument("--patch", type=int, choices=(14, 16), default=16)
    p.add_argument(
        "--ocr-upscale",
        action="store_true",
        help="upscale small images to 2304 px on the longer side first",
    )
    p.add_argument("--output", help="output file (default: stdout)")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("eval-ocr", help="score OCR predictions against ground truth")
    _add_eval_flags(p)
    p.set_defaults(func=cmd_eval_ocr)

    p = sub.add_parser(
        "eval-grounding", help="score grounding predictions against ground truth"
    )
    _add_eval_flags(p)
    p.set_defaults(func=cmd_eval_grounding)

    p = sub.add_parser("merge", help="average checkpoint containers")
    p.add_argument("--out", required=True, help="output .vvtm path")
    p.add_argument("--weights", help="comma-separated weights (default uniform)")
    p.add_argument("inputs", nargs="+", help="input .vvtm files")
    p.set_defaults(func=cmd_merge)

    p = sub.add_parser("cosine", help="pairwise cosine of checkpoint deltas")
    p.add_argument("--base", required=True, help="base .vvtm the deltas are against")
    p.add_argument("inputs", nargs="+", help="checkpoint .vvtm files")
    p.add_argument("--figures", metavar="DIR", help="also render a heatmap into DIR")
    p.add_argument("--output", help="report file (default: stdout)")
    p.set_defaults(func=cmd_cosine)

    p = sub.add_parser("budget", help="logit-memory table for the stage profiles")
    p.add_argument("--vocab", type=int, default=budget.DEFAULT_VOCAB)
    p.add_argument("--batch", type=int, default=1)
    p.add_argument(
        "--bytes-per-element", type=int, default=budget.DEFAULT_BYTES_PER_ELEMENT
    )
    p.add_argument("--chunk-len", type=int, default=0, help="0 = unchunked")
    p.add_argument(
        "--reference-resident",
        action="store_true",
        help="count the resident reference model (peak factor 2.0)",
    )
    p.add_argument("--figures", metavar="DIR", help="also render a bar chart into DIR")
    p.add_argument("--output", help="report file (default: stdout)")
    p.set_defaults(func=cmd_budget)

    return parser


def run(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ToolkitError as exc:
        print(f"{exc.code}: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
