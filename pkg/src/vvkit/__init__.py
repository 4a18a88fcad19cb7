"""Toolkit for the machine-facing contracts of a bilingual grounding/OCR
vision-language pipeline: tagged output parsing and serialization,
reading-order reconstruction, tiled-resolution token planning, OCR and
grounding evaluation, checkpoint weight averaging with an interference
diagnostic, and logit-memory budgeting."""

from .errors import ToolkitError
from .grammar import (
    BBox,
    FreeText,
    GroundedSpan,
    OcrWord,
    OutputDoc,
    ParseOptions,
    doc_from_json,
    doc_to_json,
    parse_grounding,
    parse_ocr,
    serialize,
)
from .layout import Line, cluster_lines, reading_order
from .anyres import (
    GridPlan,
    PatchConfig,
    StageProfile,
    ocr_upscale,
    reduce_tokens,
    select_grid,
    tokens_per_tile,
)
from .evaluation import (
    EvalReport,
    GroundTruth,
    MatchResult,
    grounding_accuracy,
    iou,
    match_words,
    recognition_accuracy,
)
from .merge import InterferenceReport, TensorMap, average, cosine_matrix
from .budget import LogitSpec, dpo_peak_factor, logit_memory

__version__ = "0.1.0"

__all__ = [
    "ToolkitError",
    "BBox",
    "FreeText",
    "GroundedSpan",
    "OcrWord",
    "OutputDoc",
    "ParseOptions",
    "doc_from_json",
    "doc_to_json",
    "parse_grounding",
    "parse_ocr",
    "serialize",
    "Line",
    "cluster_lines",
    "reading_order",
    "GridPlan",
    "PatchConfig",
    "StageProfile",
    "ocr_upscale",
    "reduce_tokens",
    "select_grid",
    "tokens_per_tile",
    "EvalReport",
    "GroundTruth",
    "MatchResult",
    "grounding_accuracy",
    "iou",
    "match_words",
    "recognition_accuracy",
    "InterferenceReport",
    "TensorMap",
    "average",
    "cosine_matrix",
    "LogitSpec",
    "dpo_peak_factor",
    "logit_memory",
    "__version__",
]
