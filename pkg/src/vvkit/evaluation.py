"""Scoring of predicted OCR/grounding documents against ground truth.

Word matching is greedy one-to-one on IoU: candidate pairs at or above
the threshold are sorted by (iou desc, pred index asc, gt index asc) and
accepted while both endpoints are free, which leaves no unmatched pair
above the threshold. Recognition accuracy is the fraction of ground-truth
words that are both localized and transcribed exactly (after text
normalization: NFC, trim, optional case-folding).

Per-image reports carry raw counts so corpus aggregation is an exact,
order-free sum.
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass, field

from .grammar import BBox, GroundedSpan, OcrWord

DEFAULT_IOU_THRESHOLD = 0.5


def iou(a: BBox, b: BBox) -> float:
    """Intersection over union of two boxes; 0 when the union is empty."""
    ix = max(0.0, min(a.x2, b.x2) - max(a.x1, b.x1))
    iy = max(0.0, min(a.y2, b.y2) - max(a.y1, b.y1))
    inter = ix * iy
    union = a.width * a.height + b.width * b.height - inter
    if union <= 0.0:
        return 0.0
    return inter / union


def normalize_text(text: str, casefold: bool = True) -> str:
    """Canonical text form used for equality: NFC, trimmed, case-folded
    unless disabled."""
    out = unicodedata.normalize("NFC", text).strip()
    return out.casefold() if casefold else out


@dataclass(frozen=True)
class GtWord:
    """One ground-truth word with its normalized box."""

    text: str
    bbox: BBox


@dataclass(frozen=True)
class GroundTruth:
    """Ground truth for one image; boxes normalized to [0, 1] on ingestion."""

    image_id: str
    words: tuple[GtWord, ...]
    image_size: tuple[int, int] | None = None

    @classmethod
    def from_record(cls, record: dict) -> "GroundTruth":
        """Build from one ground-truth JSONL record.

        ``units`` selects pixel ("px", requires width/height) or already
        normalized ("norm") boxes. Malformed records raise ValueError.
        """
        image_id = str(record.get("id", ""))
        try:
            units = record.get("units", "norm")
            if units not in ("px", "norm"):
                raise ValueError(f"unknown units {units!r}")
            size = None
            if "width" in record or "height" in record:
                size = (int(record["width"]), int(record["height"]))
            if units == "px" and (size is None or size[0] <= 0 or size[1] <= 0):
                raise ValueError("pixel boxes need positive width/height")
            words = []
            for w in record.get("words", []):
                x1, y1, x2, y2 = (float(v) for v in w["bbox"])
                if units == "px":
                    x1, x2 = x1 / size[0], x2 / size[0]
                    y1, y2 = y1 / size[1], y2 / size[1]
                words.append(GtWord(str(w["text"]), BBox(x1, y1, x2, y2)))
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"bad ground-truth record {image_id!r}: {exc}") from exc
        return cls(image_id=image_id, words=tuple(words), image_size=size)


@dataclass(frozen=True)
class MatchResult:
    """Greedy one-to-one matching outcome between prediction and truth."""

    pairs: tuple[tuple[int, int, float], ...]
    unmatched_pred: tuple[int, ...]
    unmatched_gt: tuple[int, ...]


def _greedy_match(
    pred_boxes: list[BBox | None],
    gt_boxes: list[BBox | None],
    threshold: float,
    allowed=None,
) -> MatchResult:
    if not 0.0 < threshold <= 1.0:
        raise ValueError("threshold must be in (0, 1]")
    candidates = []
    for pi, pb in enumerate(pred_boxes):
        if pb is None:
            continue
        for gi, gb in enumerate(gt_boxes):
            if gb is None:
                continue
            if allowed is not None and not allowed(pi, gi):
                continue
            score = iou(pb, gb)
            if score >= threshold:
                candidates.append((-score, pi, gi))
    candidates.sort()
    pred_taken = [False] * len(pred_boxes)
    gt_taken = [False] * len(gt_boxes)
    pairs = []
    for neg_score, pi, gi in candidates:
        if pred_taken[pi] or gt_taken[gi]:
            continue
        pred_taken[pi] = True
        gt_taken[gi] = True
        pairs.append((pi, gi, -neg_score))
    return MatchResult(
        pairs=tuple(pairs),
        unmatched_pred=tuple(i for i, t in enumerate(pred_taken) if not t),
        unmatched_gt=tuple(i for i, t in enumerate(gt_taken) if not t),
    )


def match_words(
    pred: list[OcrWord], gt: GroundTruth, threshold: float = DEFAULT_IOU_THRESHOLD
) -> MatchResult:
    """Greedily match predicted words to ground-truth words by IoU."""
    return _greedy_match(
        [w.bbox for w in pred], [w.bbox for w in gt.words], threshold
    )


@dataclass
class EvalReport:
    """Recognition/detection statistics for one image (or a merged corpus)."""

    n_gt: int
    n_pred: int
    n_matched: int
    n_text_correct: int
    image_id: str = ""
    parse_error: str | None = None

    @property
    def recognition_accuracy(self) -> float:
        return self.n_text_correct / self.n_gt if self.n_gt else 1.0

    @property
    def detection_recall(self) -> float:
        return self.n_matched / self.n_gt if self.n_gt else 1.0

    @property
    def detection_precision(self) -> float:
        return self.n_matched / self.n_pred if self.n_pred else 1.0

    def to_json(self) -> dict:
        out = {
            "n_gt": self.n_gt,
            "n_pred": self.n_pred,
            "n_matched": self.n_matched,
            "n_text_correct": self.n_text_correct,
            "recognition_accuracy": self.recognition_accuracy,
            "detection_recall": self.detection_recall,
            "detection_precision": self.detection_precision,
        }
        if self.image_id:
            out = {"id": self.image_id, **out}
        if self.parse_error is not None:
            out["parse_error"] = self.parse_error
        return out


def recognition_accuracy(
    match: MatchResult,
    pred: list[OcrWord],
    gt: GroundTruth,
    casefold: bool = True,
) -> EvalReport:
    """Score one image from a match produced by :func:`match_words`."""
    correct = sum(
        1
        for pi, gi, _ in match.pairs
        if normalize_text(pred[pi].text, casefold)
        == normalize_text(gt.words[gi].text, casefold)
    )
    return EvalReport(
        n_gt=len(gt.words),
        n_pred=len(pred),
        n_matched=len(match.pairs),
        n_text_correct=correct,
        image_id=gt.image_id,
    )


def merge_reports(reports: list[EvalReport]) -> EvalReport:
    """Exact corpus aggregate: a commutative sum over per-image counts."""
    return EvalReport(
        n_gt=sum(r.n_gt for r in reports),
        n_pred=sum(r.n_pred for r in reports),
        n_matched=sum(r.n_matched for r in reports),
        n_text_correct=sum(r.n_text_correct for r in reports),
    )


def grounding_matches(
    pred: list[GroundedSpan],
    gt: list[GroundedSpan],
    threshold: float = DEFAULT_IOU_THRESHOLD,
    casefold: bool = True,
) -> MatchResult:
    """Greedy IoU matching restricted to pairs with equal normalized text.

    Spans without a box never match (no IoU can reach the threshold).
    """
    pred_texts = [normalize_text(s.object_text, casefold) for s in pred]
    gt_texts = [normalize_text(s.object_text, casefold) for s in gt]
    return _greedy_match(
        [s.bbox for s in pred],
        [s.bbox for s in gt],
        threshold,
        allowed=lambda pi, gi: pred_texts[pi] == gt_texts[gi],
    )


def grounding_accuracy(
    pred: list[GroundedSpan],
    gt: list[GroundedSpan],
    threshold: float = DEFAULT_IOU_THRESHOLD,
    casefold: bool = True,
) -> float:
    """Fraction of ground-truth spans matched by a same-text prediction
    with IoU at or above the threshold; each prediction is usable once,
    assignment greedy by IoU. Empty ground truth scores 1.0 (vacuous).
    """
    if not gt:
        return 1.0
    match = grounding_matches(pred, gt, threshold, casefold)
    return len(match.pairs) / len(gt)
