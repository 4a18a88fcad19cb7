import random

import pytest

from vvkit.evaluation import (
    EvalReport,
    GroundTruth,
    GtWord,
    grounding_accuracy,
    iou,
    match_words,
    merge_reports,
    normalize_text,
    recognition_accuracy,
)
from vvkit.grammar import BBox, GroundedSpan, OcrWord


def gt_of(words):
    return GroundTruth(image_id="img", words=tuple(words))


def random_box(rng, cell=4):
    # coarse grid so predictions frequently overlap ground truth
    x1 = rng.randrange(cell) / cell + rng.uniform(0, 0.05)
    y1 = rng.randrange(cell) / cell + rng.uniform(0, 0.05)
    return BBox(x1, y1, x1 + rng.uniform(0.05, 0.2), y1 + rng.uniform(0.05, 0.2))


def random_instance(rng, max_words=8):
    texts = ["alpha", "beta", "gamma", "delta", "eps"]
    gt = [GtWord(rng.choice(texts), random_box(rng)) for _ in range(rng.randint(0, max_words))]
    pred = [
        OcrWord(rng.choice(texts), random_box(rng))
        for _ in range(rng.randint(0, max_words))
    ]
    return pred, gt_of(gt)


class TestIou:
    def test_identical(self):
        b = BBox(0.2, 0.2, 0.7, 0.9)
        assert iou(b, b) == 1.0

    def test_disjoint(self):
        assert iou(BBox(0, 0, 0.2, 0.2), BBox(0.5, 0.5, 0.9, 0.9)) == 0.0

    def test_half_overlap(self):
        # areas 1 and 0.5, intersection 0.5, union 1
        assert iou(BBox(0, 0, 1, 1), BBox(0, 0, 0.5, 1)) == 0.5

    def test_degenerate_union(self):
        z = BBox(0.3, 0.3, 0.3, 0.3)
        assert iou(z, z) == 0.0

    def test_symmetry(self):
        rng = random.Random(5)
        for _ in range(200):
            a, b = random_box(rng), random_box(rng)
            assert iou(a, b) == iou(b, a)
            assert 0.0 <= iou(a, b) <= 1.0


class TestMatchWords:
    def test_identical_lists_all_matched(self):
        words = [OcrWord("a", BBox(0, 0, 0.2, 0.2)), OcrWord("b", BBox(0.5, 0.5, 0.9, 0.9))]
        gt = gt_of([GtWord(w.text, w.bbox) for w in words])
        match = match_words(words, gt, 0.5)
        assert len(match.pairs) == 2
        assert all(score == 1.0 for _, _, score in match.pairs)
        assert match.unmatched_pred == ()
        assert match.unmatched_gt == ()

    def test_empty_pred(self):
        gt = gt_of([GtWord("a", BBox(0, 0, 0.2, 0.2))])
        match = match_words([], gt, 0.5)
        assert match.pairs == ()
        assert match.unmatched_gt == (0,)

    def test_one_to_one(self):
        # two predictions on one gt word: only the better one matches
        gt = gt_of([GtWord("a", BBox(0, 0, 0.4, 0.4))])
        pred = [OcrWord("a", BBox(0, 0, 0.4, 0.38)), OcrWord("a", BBox(0, 0, 0.4, 0.4))]
        match = match_words(pred, gt, 0.5)
        assert match.pairs == ((1, 0, 1.0),)
        assert match.unmatched_pred == (0,)

    def test_threshold_validation(self):
        with pytest.raises(ValueError):
            match_words([], gt_of([]), 0.0)

    def test_greedy_is_maximal(self):
        rng = random.Random(77)
        for _ in range(400):
            pred, gt = random_instance(rng)
            match = match_words(pred, gt, 0.5)
            free_pred = set(match.unmatched_pred)
            free_gt = set(match.unmatched_gt)
            for pi in free_pred:
                for gi in free_gt:
                    assert iou(pred[pi].bbox, gt.words[gi].bbox) < 0.5

    def test_index_tie_break(self):
        # equal ious: lowest pred index, then lowest gt index wins
        box = BBox(0.1, 0.1, 0.3, 0.3)
        gt = gt_of([GtWord("a", box), GtWord("b", box)])
        pred = [OcrWord("x", box), OcrWord("y", box)]
        match = match_words(pred, gt, 0.5)
        assert match.pairs == ((0, 0, 1.0), (1, 1, 1.0))


class TestRecognitionAccuracy:
    def test_perfect(self):
        words = [OcrWord("ab", BBox(0, 0, 0.2, 0.2))]
        gt = gt_of([GtWord("ab", BBox(0, 0, 0.2, 0.2))])
        report = recognition_accuracy(match_words(words, gt, 0.5), words, gt)
        assert report.recognition_accuracy == 1.0
        assert report.detection_recall == 1.0
        assert report.detection_precision == 1.0

    def test_all_boxes_right_all_text_wrong(self):
        gt_words = [GtWord(f"w{i}", BBox(0.1 * i, 0, 0.1 * i + 0.08, 0.1)) for i in range(3)]
        pred = [OcrWord("zzz", w.bbox) for w in gt_words]
        gt = gt_of(gt_words)
        report = recognition_accuracy(match_words(pred, gt, 0.5), pred, gt)
        assert report.recognition_accuracy == 0.0
        assert report.detection_recall == 1.0

    def test_one_third_fixture(self):
        # 3 gt words; 2 matched by box; 1 of those transcribed right.
        gt = gt_of(
            [
                GtWord("aa", BBox(0.0, 0.0, 0.1, 0.1)),
                GtWord("bb", BBox(0.2, 0.0, 0.3, 0.1)),
                GtWord("cc", BBox(0.4, 0.0, 0.5, 0.1)),
            ]
        )
        pred = [
            OcrWord("aa", BBox(0.0, 0.0, 0.1, 0.1)),
            OcrWord("xx", BBox(0.2, 0.0, 0.3, 0.1)),
        ]
        report = recognition_accuracy(match_words(pred, gt, 0.5), pred, gt)
        assert report.recognition_accuracy == pytest.approx(1 / 3)
        assert report.detection_recall == pytest.approx(2 / 3)
        assert report.detection_precision == 1.0

    def test_empty_both(self):
        report = recognition_accuracy(match_words([], gt_of([]), 0.5), [], gt_of([]))
        assert report.detection_precision == 1.0
        assert report.recognition_accuracy == 1.0

    def test_casefold_flag(self):
        gt = gt_of([GtWord("Hello", BBox(0, 0, 0.2, 0.2))])
        pred = [OcrWord("hello", BBox(0, 0, 0.2, 0.2))]
        match = match_words(pred, gt, 0.5)
        assert recognition_accuracy(match, pred, gt).recognition_accuracy == 1.0
        assert (
            recognition_accuracy(match, pred, gt, casefold=False).recognition_accuracy
            == 0.0
        )

    def test_bounds_on_fuzz(self):
        rng = random.Random(13)
        for _ in range(400):
            pred, gt = random_instance(rng)
            report = recognition_accuracy(match_words(pred, gt, 0.5), pred, gt)
            for frac in (
                report.recognition_accuracy,
                report.detection_recall,
                report.detection_precision,
            ):
                assert 0.0 <= frac <= 1.0
            assert report.recognition_accuracy <= report.detection_recall

    def test_fraction_permutation_invariance(self):
        rng = random.Random(21)
        for _ in range(200):
            pred, gt = random_instance(rng)
            report = recognition_accuracy(match_words(pred, gt, 0.5), pred, gt)
            shuffled = pred[:]
            rng.shuffle(shuffled)
            gt2 = gt_of(list(gt.words)[::-1])
            report2 = recognition_accuracy(
                match_words(shuffled, gt2, 0.5), shuffled, gt2
            )
            assert report.recognition_accuracy == pytest.approx(
                report2.recognition_accuracy
            )
            assert report.detection_recall == pytest.approx(report2.detection_recall)
            assert report.detection_precision == pytest.approx(
                report2.detection_precision
            )


class TestGroundingAccuracy:
    def test_identical(self):
        spans = [
            GroundedSpan("cat", BBox(0.0, 0.0, 0.3, 0.3)),
            GroundedSpan("dog", BBox(0.5, 0.5, 0.9, 0.9)),
        ]
        assert grounding_accuracy(spans, spans, 0.5) == 1.0

    def test_empty_gt_vacuous(self):
        assert grounding_accuracy([GroundedSpan("x", BBox(0, 0, 1, 1))], [], 0.5) == 1.0

    def test_displaced_box_fixture(self):
        # 4 objects; one prediction drifted away -> 3/4
        gt = [
            GroundedSpan("cup", BBox(0.0, 0.0, 0.2, 0.2)),
            GroundedSpan("pen", BBox(0.3, 0.0, 0.5, 0.2)),
            GroundedSpan("cup", BBox(0.0, 0.5, 0.2, 0.7)),
            GroundedSpan("book", BBox(0.6, 0.6, 0.9, 0.9)),
        ]
        pred = [
            GroundedSpan("cup", BBox(0.0, 0.0, 0.2, 0.2)),
            GroundedSpan("pen", BBox(0.3, 0.0, 0.5, 0.2)),
            GroundedSpan("cup", BBox(0.6, 0.1, 0.8, 0.3)),  # displaced
            GroundedSpan("book", BBox(0.6, 0.6, 0.9, 0.9)),
        ]
        assert grounding_accuracy(pred, gt, 0.5) == 0.75

    def test_text_must_match(self):
        box = BBox(0.1, 0.1, 0.4, 0.4)
        assert grounding_accuracy(
            [GroundedSpan("cat", box)], [GroundedSpan("dog", box)], 0.5
        ) == 0.0

    def test_each_pred_used_once(self):
        box = BBox(0.1, 0.1, 0.4, 0.4)
        pred = [GroundedSpan("cat", box)]
        gt = [GroundedSpan("cat", box), GroundedSpan("cat", box)]
        assert grounding_accuracy(pred, gt, 0.5) == 0.5

    def test_boxless_spans_never_match(self):
        pred = [GroundedSpan("cat", None)]
        gt = [GroundedSpan("cat", None)]
        assert grounding_accuracy(pred, gt, 0.5) == 0.0


class TestGroundTruthIngestion:
    def test_pixel_record_normalized(self):
        gt = GroundTruth.from_record(
            {
                "id": "a",
                "width": 200,
                "height": 100,
                "units": "px",
                "words": [{"text": "hi", "bbox": [20, 10, 100, 50]}],
            }
        )
        assert gt.words[0].bbox == BBox(0.1, 0.1, 0.5, 0.5)

    def test_norm_record(self):
        gt = GroundTruth.from_record(
            {"id": "b", "units": "norm", "words": [{"text": "x", "bbox": [0, 0, 1, 1]}]}
        )
        assert gt.words[0].bbox == BBox(0, 0, 1, 1)

    def test_px_requires_size(self):
        with pytest.raises(ValueError):
            GroundTruth.from_record(
                {"id": "c", "units": "px", "words": [{"text": "x", "bbox": [0, 0, 1, 1]}]}
            )

    def test_unknown_units(self):
        with pytest.raises(ValueError):
            GroundTruth.from_record({"id": "d", "units": "inch", "words": []})


class TestReports:
    def test_merge_is_exact_over_counts(self):
        a = EvalReport(n_gt=3, n_pred=2, n_matched=2, n_text_correct=1)
        b = EvalReport(n_gt=1, n_pred=4, n_matched=1, n_text_correct=1)
        merged = merge_reports([a, b])
        assert merged.n_gt == 4 and merged.n_pred == 6
        assert merged.recognition_accuracy == 0.5
        assert merge_reports([b, a]).to_json() == merged.to_json()

    def test_normalize_text(self):
        assert normalize_text("  Café ") == "café"
        assert normalize_text("Café") == normalize_text("Café")
        assert normalize_text("AbC", casefold=False) == "AbC"
