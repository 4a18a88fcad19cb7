"""Parser and serializer for the tagged grounding/OCR response format.

Grounding responses interleave free text with object spans::

    <obj>{object}</obj><bbox>{x1}, {y1}, {x2}, {y2}</bbox>

OCR responses are a sequence of word spans::

    <char>{word}</char><bbox>{x1}, {y1}, {x2}, {y2}</bbox>

Coordinates are fractions of image width/height in [0, 1]. All functions
here are pure; parsing is total (every input yields either an
:class:`OutputDoc` or a typed :class:`GrammarError`, never an unplanned
exception).

Error policy. Structural damage makes the rest of the input ambiguous and
always raises, in both modes: :class:`UnclosedTag`, :class:`BadBBoxArity`,
:class:`NumberSyntax`, and a reserved tag nested inside a span payload
(:class:`UnexpectedTag`). Locally repairable problems raise in strict mode
only; lenient mode repairs them and records one warning per repair:
out-of-range coordinates are clamped, inverted boxes swapped, misplaced
spans/tags and stray free text dropped, whitespace-containing words split.

Canonical form. :func:`serialize` only accepts documents in the canonical
shape that parsing produces: free-text segments are non-empty, never
adjacent, never contain a reserved tag, and ocr documents hold words only.
This makes ``parse(serialize(doc)) == doc`` hold unconditionally on
serialize's domain (coordinates compared after one rounding).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Union

from .errors import ToolkitError

GROUNDING = "grounding"
OCR = "ocr"

_RESERVED_TAGS = ("<gro>", "<obj>", "</obj>", "<char>", "</char>", "<bbox>", "</bbox>")
_TAG_RE = re.compile("|".join(re.escape(t) for t in _RESERVED_TAGS))
_NUMBER_RE = re.compile(r"[+-]?(?:\d+\.?\d*|\.\d+)")
_GRO_PREFIX_RE = re.compile(r"\s*<gro>")


class GrammarError(ToolkitError):
    """Base for all parse/serialize failures of the output grammar."""


class UnclosedTag(GrammarError):
    """An opening tag has no matching close tag."""


class BadBBoxArity(GrammarError):
    """A ``<bbox>`` payload does not hold exactly four numbers."""


class OutOfRange(GrammarError):
    """A coordinate lies outside [0, 1] (strict mode)."""


class InvertedBox(GrammarError):
    """x1 > x2 or y1 > y2 (strict mode)."""


class NumberSyntax(GrammarError):
    """A ``<bbox>`` field is not a decimal number."""


class UnexpectedTag(GrammarError):
    """A reserved tag appeared where the mode's grammar forbids it."""


class UnexpectedText(GrammarError):
    """Non-whitespace free text appeared in an ocr response (strict mode)."""


class MissingBBox(GrammarError):
    """A ``<char>`` span is not immediately followed by a ``<bbox>`` block."""


class WhitespaceInWord(GrammarError):
    """A ``<char>`` payload contains whitespace (strict mode)."""


class EmptyText(GrammarError):
    """A span payload is empty after trimming (strict mode)."""


class InvalidDoc(GrammarError):
    """A document handed to the serializer violates its invariants."""


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box, corners as fractions of image width/height."""

    x1: float
    y1: float
    x2: float
    y2: float

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x1, self.y1, self.x2, self.y2)

    @property
    def width(self) -> float:
        return self.x2 - self.x1

    @property
    def height(self) -> float:
        return self.y2 - self.y1

    def is_valid(self) -> bool:
        return (
            0.0 <= self.x1 <= self.x2 <= 1.0 and 0.0 <= self.y1 <= self.y2 <= 1.0
        )


@dataclass(frozen=True)
class FreeText:
    text: str


@dataclass(frozen=True)
class GroundedSpan:
    """An ``<obj>`` span; the box is absent when the model omitted one."""

    object_text: str
    bbox: BBox | None = None


@dataclass(frozen=True)
class OcrWord:
    """A ``<char>`` span: one whitespace-free word and its box."""

    text: str
    bbox: BBox


Segment = Union[FreeText, GroundedSpan, OcrWord]


@dataclass
class OutputDoc:
    """One parsed model response.

    ``warnings`` and ``gro_stripped`` are parse metadata, not document
    content; they are excluded from equality so round-trips compare clean.
    """

    segments: list[Segment]
    mode: str
    warnings: list[str] = field(default_factory=list, compare=False)
    gro_stripped: bool = field(default=False, compare=False)

    def words(self) -> list[OcrWord]:
        return [s for s in self.segments if isinstance(s, OcrWord)]

    def grounded(self) -> list[GroundedSpan]:
        return [s for s in self.segments if isinstance(s, GroundedSpan)]


@dataclass(frozen=True)
class ParseOptions:
    """``strict`` rejects repairable input instead of clamp-and-warn;
    ``max_fraction_digits`` bounds serializer precision (>= 1)."""

    strict: bool = True
    max_fraction_digits: int = 3

    def __post_init__(self) -> None:
        if self.max_fraction_digits < 1:
            raise ValueError("max_fraction_digits must be >= 1")


DEFAULT_OPTIONS = ParseOptions()


def parse_grounding(text: str, opts: ParseOptions = DEFAULT_OPTIONS) -> OutputDoc:
    """Parse a grounding/referring response into an OutputDoc.

    Free text is preserved verbatim; each ``<obj>`` span becomes a
    :class:`GroundedSpan`, with a box when a ``<bbox>`` block immediately
    follows the closing tag. A leading ``<gro>`` marker is consumed and
    recorded on ``gro_stripped``. Unknown angle-bracket tokens stay
    literal text.
    """
    return _parse(text, GROUNDING, opts)


def parse_ocr(text: str, opts: ParseOptions = DEFAULT_OPTIONS) -> OutputDoc:
    """Parse an OCR response into a words-only OutputDoc.

    Whitespace between spans is ignored. Non-whitespace free text and
    ``<obj>`` spans are rejected in strict mode, dropped with a warning
    otherwise.
    """
    return _parse(text, OCR, opts)


class _Parser:
    def __init__(self, text: str, mode: str, opts: ParseOptions):
        self.text = text
        self.mode = mode
        self.opts = opts
        self.segments: list[Segment] = []
        self.warnings: list[str] = []
        self.buf: list[str] = []

    def warn(self, message: str) -> None:
        self.warnings.append(message)

    def flush_text(self) -> None:
        if not self.buf:
            return
        chunk = "".join(self.buf)
        self.buf.clear()
        if self.mode == OCR:
            if chunk.strip():
                if self.opts.strict:
                    raise UnexpectedText(
                        f"free text {chunk.strip()[:40]!r} in ocr response"
                    )
                self.warn(f"dropped free text {chunk.strip()[:40]!r} in ocr response")
            return
        self.segments.append(FreeText(chunk))

    def run(self) -> OutputDoc:
        text = self.text
        pos = 0
        gro_stripped = False
        lead = _GRO_PREFIX_RE.match(text)
        if lead:
            gro_stripped = True
            pos = lead.end()
        while pos < len(text):
            m = _TAG_RE.search(text, pos)
            if m is None:
                self.buf.append(text[pos:])
                break
            if m.start() > pos:
                self.buf.append(text[pos : m.start()])
            pos = self.handle_tag(m.group(), m.start(), m.end())
        self.flush_text()
        return OutputDoc(
            segments=self.segments,
            mode=self.mode,
            warnings=self.warnings,
            gro_stripped=gro_stripped,
        )

    def handle_tag(self, tag: str, start: int, end: int) -> int:
        if tag == "<gro>":
            # Query-side marker: always stripped, never an error.
            self.warn(f"stripped <gro> at offset {start}")
            return end
        if tag == "<obj>":
            return self.handle_span("<obj>", "</obj>", start, end)
        if tag == "<char>":
            return self.handle_span("<char>", "</char>", start, end)
        if tag == "<bbox>":
            payload, end = self.read_span_payload("<bbox>", "</bbox>", start, end)
            if self.opts.strict:
                raise UnexpectedTag(f"<bbox> at offset {start} follows no span")
            self.warn(f"dropped dangling <bbox> at offset {start}")
            return end
        # Stray close tag.
        if self.opts.strict:
            raise UnexpectedTag(f"{tag} at offset {start} has no opening tag")
        self.warn(f"dropped stray {tag} at offset {start}")
        return end

    def read_span_payload(
        self, open_tag: str, close_tag: str, start: int, end: int
    ) -> tuple[str, int]:
        m = _TAG_RE.search(self.text, end)
        if m is None:
            raise UnclosedTag(f"{open_tag} at offset {start} has no {close_tag}")
        if m.group() != close_tag:
            raise UnexpectedTag(
                f"{m.group()} inside {open_tag} span at offset {m.start()}"
            )
        return self.text[end : m.start()], m.end()

    def read_bbox_if_adjacent(self, pos: int) -> tuple[tuple[str, int] | None, int]:
        """Consume an immediately adjacent <bbox> block, returning its raw
        payload and offset; numbers are validated only for kept spans."""
        if not self.text.startswith("<bbox>", pos):
            return None, pos
        payload, end = self.read_span_payload("<bbox>", "</bbox>", pos, pos + 6)
        return (payload, pos), end

    def parse_bbox(self, payload: str, where: int) -> BBox:
        if payload.strip() == "":
            raise BadBBoxArity(f"<bbox> at offset {where} holds 0 numbers, need 4")
        fields = payload.split(",")
        if len(fields) != 4:
            raise BadBBoxArity(
                f"<bbox> at offset {where} holds {len(fields)} numbers, need 4"
            )
        values = []
        for raw in fields:
            s = raw.strip()
            if not _NUMBER_RE.fullmatch(s):
                raise NumberSyntax(f"bad number {raw.strip()!r} in <bbox> at {where}")
            values.append(float(s))
        clamped = []
        for v in values:
            if 0.0 <= v <= 1.0:
                clamped.append(v)
                continue
            if self.opts.strict:
                raise OutOfRange(f"coordinate {v} outside [0, 1] in <bbox> at {where}")
            c = min(1.0, max(0.0, v))
            self.warn(f"clamped coordinate {v} to {c} in <bbox> at offset {where}")
            clamped.append(c)
        x1, y1, x2, y2 = clamped
        if x1 > x2:
            if self.opts.strict:
                raise InvertedBox(f"x1 {x1} > x2 {x2} in <bbox> at offset {where}")
            self.warn(f"swapped inverted x pair in <bbox> at offset {where}")
            x1, x2 = x2, x1
        if y1 > y2:
            if self.opts.strict:
                raise InvertedBox(f"y1 {y1} > y2 {y2} in <bbox> at offset {where}")
            self.warn(f"swapped inverted y pair in <bbox> at offset {where}")
            y1, y2 = y2, y1
        return BBox(x1, y1, x2, y2)

    def handle_span(self, open_tag: str, close_tag: str, start: int, end: int) -> int:
        payload, end = self.read_span_payload(open_tag, close_tag, start, end)
        raw_bbox, end = self.read_bbox_if_adjacent(end)

        # Mode violations trump whatever is inside the dropped span.
        wrong_mode = (open_tag == "<char>") != (self.mode == OCR)
        if wrong_mode:
            if self.opts.strict:
                raise UnexpectedTag(
                    f"{open_tag} at offset {start} not allowed in {self.mode} mode"
                )
            self.warn(f"dropped {open_tag} span at offset {start} in {self.mode} mode")
            return end
        bbox = self.parse_bbox(*raw_bbox) if raw_bbox is not None else None

        if open_tag == "<obj>":
            if payload.strip() == "":
                if self.opts.strict:
                    raise EmptyText(f"empty <obj> payload at offset {start}")
                self.warn(f"dropped empty <obj> span at offset {start}")
                return end
            self.flush_text()
            self.segments.append(GroundedSpan(payload, bbox))
            return end

        # <char> word span: box is mandatory, text must be one word.
        if bbox is None:
            if self.opts.strict:
                raise MissingBBox(f"<char> at offset {start} has no <bbox> block")
            self.warn(f"dropped <char> span without <bbox> at offset {start}")
            return end
        if payload.strip() == "":
            if self.opts.strict:
                raise EmptyText(f"empty <char> payload at offset {start}")
            self.warn(f"dropped empty <char> span at offset {start}")
            return end
        if any(ch.isspace() for ch in payload):
            if self.opts.strict:
                raise WhitespaceInWord(
                    f"<char> payload {payload!r} at offset {start} contains whitespace"
                )
            parts = payload.split()
            self.warn(
                f"split <char> payload {payload!r} at offset {start} "
                f"into {len(parts)} words"
            )
            self.flush_text()
            for part in parts:
                self.segments.append(OcrWord(part, bbox))
            return end
        self.flush_text()
        self.segments.append(OcrWord(payload, bbox))
        return end


def _parse(text: str, mode: str, opts: ParseOptions) -> OutputDoc:
    return _Parser(text, mode, opts).run()


def format_coordinate(value: float, max_fraction_digits: int = 3) -> str:
    """Render a coordinate with at most the given fractional digits.

    Round-half-even, trailing zeros (and a bare trailing point) trimmed,
    so 0.5 -> "0.5", 1.0 -> "1", 0.125 at 2 digits -> "0.12".
    """
    s = format(value, f".{max_fraction_digits}f")
    s = s.rstrip("0").rstrip(".")
    if s in ("", "-0", "-"):
        return "0"
    return s


def round_coordinate(value: float, max_fraction_digits: int = 3) -> float:
    """The value a coordinate becomes after one serialize/parse trip."""
    return float(format_coordinate(value, max_fraction_digits))


def _check_plain_text(text: str, what: str) -> None:
    for tag in _RESERVED_TAGS:
        if tag in text:
            raise InvalidDoc(f"{what} contains reserved tag {tag}")


def _check_bbox(bbox: BBox, what: str) -> None:
    if not bbox.is_valid():
        raise InvalidDoc(f"{what} has invalid bbox {bbox.as_tuple()}")


def serialize(doc: OutputDoc, opts: ParseOptions = DEFAULT_OPTIONS) -> str:
    """Serialize a canonical OutputDoc back to tagged text.

    Coordinates use ``", "`` separators and ``max_fraction_digits``
    precision. Raises :class:`InvalidDoc` for documents that violate the
    mode invariant or cannot survive a parse round-trip (see module
    docstring for the canonical-form rules). Never emits ``<gro>``.
    """
    if doc.mode not in (GROUNDING, OCR):
        raise InvalidDoc(f"unknown mode {doc.mode!r}")
    parts: list[str] = []
    prev_free = False
    for i, seg in enumerate(doc.segments):
        if isinstance(seg, FreeText):
            if doc.mode == OCR:
                raise InvalidDoc(f"segment {i}: free text in ocr document")
            if seg.text == "":
                raise InvalidDoc(f"segment {i}: empty free-text segment")
            if prev_free:
                raise InvalidDoc(f"segment {i}: adjacent free-text segments")
            _check_plain_text(seg.text, f"segment {i}")
            parts.append(seg.text)
            prev_free = True
            continue
        prev_free = False
        if isinstance(seg, GroundedSpan):
            if doc.mode == OCR:
                raise InvalidDoc(f"segment {i}: object span in ocr document")
            if seg.object_text.strip() == "":
                raise InvalidDoc(f"segment {i}: empty object text")
            _check_plain_text(seg.object_text, f"segment {i}")
            parts.append(f"<obj>{seg.object_text}</obj>")
            if seg.bbox is not None:
                _check_bbox(seg.bbox, f"segment {i}")
                parts.append(_render_bbox(seg.bbox, opts))
            continue
        if isinstance(seg, OcrWord):
            if doc.mode == GROUNDING:
                raise InvalidDoc(f"segment {i}: word span in grounding document")
            if seg.text == "" or any(ch.isspace() for ch in seg.text):
                raise InvalidDoc(f"segment {i}: word text {seg.text!r} not one word")
            _check_plain_text(seg.text, f"segment {i}")
            if seg.bbox is None:
                raise InvalidDoc(f"segment {i}: word without bbox")
            _check_bbox(seg.bbox, f"segment {i}")
            parts.append(f"<char>{seg.text}</char>")
            parts.append(_render_bbox(seg.bbox, opts))
            continue
        raise InvalidDoc(f"segment {i}: unknown segment type {type(seg).__name__}")
    return "".join(parts)


def _render_bbox(bbox: BBox, opts: ParseOptions) -> str:
    coords = ", ".join(
        format_coordinate(v, opts.max_fraction_digits) for v in bbox.as_tuple()
    )
    return f"<bbox>{coords}</bbox>"


def doc_to_json(doc: OutputDoc) -> dict:
    """Project an OutputDoc onto its JSON wire shape."""
    segments = []
    for seg in doc.segments:
        if isinstance(seg, FreeText):
            segments.append({"kind": "text", "text": seg.text})
        elif isinstance(seg, OcrWord):
            segments.append(
                {"kind": "word", "text": seg.text, "bbox": list(seg.bbox.as_tuple())}
            )
        elif isinstance(seg, GroundedSpan):
            bbox = list(seg.bbox.as_tuple()) if seg.bbox is not None else None
            segments.append({"kind": "object", "text": seg.object_text, "bbox": bbox})
        else:
            raise InvalidDoc(f"unknown segment type {type(seg).__name__}")
    return {"mode": doc.mode, "segments": segments}


def doc_from_json(obj: dict) -> OutputDoc:
    """Rebuild an OutputDoc from its JSON wire shape."""
    if not isinstance(obj, dict):
        raise InvalidDoc("document JSON must be an object")
    mode = obj.get("mode")
    if mode not in (GROUNDING, OCR):
        raise InvalidDoc(f"unknown mode {mode!r}")
    raw_segments = obj.get("segments")
    if not isinstance(raw_segments, list):
        raise InvalidDoc("segments must be a list")
    segments: list[Segment] = []
    for i, raw in enumerate(raw_segments):
        if not isinstance(raw, dict):
            raise InvalidDoc(f"segment {i} must be an object")
        kind = raw.get("kind")
        text = raw.get("text")
        if not isinstance(text, str):
            raise InvalidDoc(f"segment {i}: text must be a string")
        if kind == "text":
            segments.append(FreeText(text))
        elif kind == "word":
            segments.append(OcrWord(text, _bbox_from_json(raw.get("bbox"), i)))
        elif kind == "object":
            bbox = raw.get("bbox")
            segments.append(
                GroundedSpan(text, None if bbox is None else _bbox_from_json(bbox, i))
            )
        else:
            raise InvalidDoc(f"segment {i}: unknown kind {kind!r}")
    return OutputDoc(segments=segments, mode=mode)


def _bbox_from_json(raw, index: int) -> BBox:
    if (
        not isinstance(raw, list)
        or len(raw) != 4
        or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in raw)
    ):
        raise InvalidDoc(f"segment {index}: bbox must be a list of 4 numbers")
    return BBox(*(float(v) for v in raw))
