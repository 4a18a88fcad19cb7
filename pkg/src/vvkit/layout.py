"""Reading-order reconstruction from unordered word boxes.

Words are grouped into lines by vertical-interval overlap, then emitted
top-to-bottom, left-to-right. The clustering rule: words are processed
sorted by (y1, x1, input index); a word joins the most recently started
line whose y-interval overlaps its own by at least half the smaller of
the two heights, otherwise it starts a new line. Zero-height boxes count
as height 1e-6 for the ratio so they can still join a line.

All functions are pure and deterministic; ties fall back to the original
input index.
"""

from __future__ import annotations

from dataclasses import dataclass

from .grammar import OcrWord

MIN_HEIGHT = 1e-6
OVERLAP_RATIO = 0.5


@dataclass
class Line:
    """One reconstructed text line: words in x order plus the running
    union of their y-extents."""

    words: list[OcrWord]
    y_interval: tuple[float, float]

    @property
    def height(self) -> float:
        return self.y_interval[1] - self.y_interval[0]


class _LineBuilder:
    def __init__(self, word: OcrWord, index: int):
        self.members: list[tuple[OcrWord, int]] = [(word, index)]
        self.y_top = word.bbox.y1
        self.y_bottom = word.bbox.y2

    def add(self, word: OcrWord, index: int) -> None:
        self.members.append((word, index))
        self.y_top = min(self.y_top, word.bbox.y1)
        self.y_bottom = max(self.y_bottom, word.bbox.y2)

    def overlaps(self, word: OcrWord) -> bool:
        # Degenerate intervals are widened to MIN_HEIGHT so a zero-height
        # word strictly inside a line still registers overlap.
        w_top = word.bbox.y1
        w_bottom = max(word.bbox.y2, w_top + MIN_HEIGHT)
        l_bottom = max(self.y_bottom, self.y_top + MIN_HEIGHT)
        overlap = min(w_bottom, l_bottom) - max(w_top, self.y_top)
        return overlap >= OVERLAP_RATIO * min(w_bottom - w_top, l_bottom - self.y_top)

    def mean_center(self) -> float:
        return sum((w.bbox.y1 + w.bbox.y2) / 2.0 for w, _ in self.members) / len(
            self.members
        )

    def finish(self) -> Line:
        ordered = sorted(
            self.members, key=lambda wi: (wi[0].bbox.x1, wi[0].bbox.y1, wi[1])
        )
        return Line(
            words=[w for w, _ in ordered], y_interval=(self.y_top, self.y_bottom)
        )


def cluster_lines(words: list[OcrWord]) -> list[Line]:
    """Partition words into lines, returned top-to-bottom.

    Lines are ordered by the mean vertical center of their members;
    within a line, words are ordered by x1 (ties: y1, then input index).
    Empty input yields an empty list.
    """
    indexed = sorted(
        range(len(words)),
        key=lambda i: (words[i].bbox.y1, words[i].bbox.x1, i),
    )
    builders: list[_LineBuilder] = []
    for i in indexed:
        word = words[i]
        for builder in reversed(builders):
            if builder.overlaps(word):
                builder.add(word, i)
                break
        else:
            builders.append(_LineBuilder(word, i))
    builders.sort(key=lambda b: b.mean_center())
    return [b.finish() for b in builders]


def reading_order(words: list[OcrWord]) -> list[OcrWord]:
    """Return the words in human reading order (a permutation of the input)."""
    ordered: list[OcrWord] = []
    for line in cluster_lines(words):
        ordered.extend(line.words)
    return ordered
