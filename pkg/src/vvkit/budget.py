"""Peak-memory estimation for the sequence-by-vocabulary logit tensor.

The logit tensor dominates peak memory once vocabularies reach the 150K
range: unchunked it costs batch * seq_len * vocab * bytes_per_element.
Chunking the sequence dimension bounds the live slice at chunk_len rows;
preference-optimization phases that keep a reference model resident pay
the logit cost twice. Estimates cover the logit tensor only, not hidden
states or gradients.
"""

from __future__ import annotations

from dataclasses import dataclass

from .anyres import STAGE_PROFILES
from .errors import ToolkitError

DEFAULT_VOCAB = 150_000
DEFAULT_BYTES_PER_ELEMENT = 2


class InvalidSpec(ToolkitError):
    """A logit spec with non-positive fields or chunk_len > seq_len."""


@dataclass(frozen=True)
class LogitSpec:
    """Shape of one logit computation; chunk_len 0 means unchunked."""

    batch: int
    seq_len: int
    vocab: int
    bytes_per_element: int = DEFAULT_BYTES_PER_ELEMENT
    chunk_len: int = 0

    def __post_init__(self) -> None:
        if self.batch < 1 or self.seq_len < 1 or self.vocab < 1:
            raise InvalidSpec("batch, seq_len and vocab must be positive")
        if self.bytes_per_element < 1:
            raise InvalidSpec("bytes_per_element must be positive")
        if self.chunk_len < 0:
            raise InvalidSpec("chunk_len must be >= 0")
        if self.chunk_len > self.seq_len:
            raise InvalidSpec("chunk_len cannot exceed seq_len")


def logit_memory(spec: LogitSpec) -> int:
    """Peak bytes held by the logit tensor (the live chunk when chunked)."""
    rows = spec.chunk_len if spec.chunk_len else spec.seq_len
    return spec.batch * rows * spec.vocab * spec.bytes_per_element


def dpo_peak_factor(spec: LogitSpec, reference_resident: bool) -> float:
    """Multiplier on :func:`logit_memory` for the preference-optimization
    phase: 2.0 with the reference model resident, 1.0 when offloaded."""
    return 2.0 if reference_resident else 1.0


def stage_table(
    vocab: int = DEFAULT_VOCAB,
    batch: int = 1,
    bytes_per_element: int = DEFAULT_BYTES_PER_ELEMENT,
    chunk_len: int = 0,
    reference_resident: bool = False,
) -> list[dict]:
    """Logit-memory rows for the four training-stage context lengths."""
    rows = []
    for key in ("1", "2", "3", "4"):
        profile = STAGE_PROFILES[key]
        spec = LogitSpec(
            batch=batch,
            seq_len=profile.context_length,
            vocab=vocab,
            bytes_per_element=bytes_per_element,
            chunk_len=min(chunk_len, profile.context_length) if chunk_len else 0,
        )
        factor = dpo_peak_factor(spec, reference_resident)
        unchunked = LogitSpec(
            batch=batch,
            seq_len=profile.context_length,
            vocab=vocab,
            bytes_per_element=bytes_per_element,
        )
        rows.append(
            {
                "stage": profile.name,
                "context_length": profile.context_length,
                "batch": batch,
                "vocab": vocab,
                "bytes_per_element": bytes_per_element,
                "chunk_len": spec.chunk_len,
                "logit_bytes_unchunked": logit_memory(unchunked),
                "logit_bytes": logit_memory(spec),
                "peak_factor": factor,
                "peak_bytes": int(logit_memory(spec) * factor),
            }
        )
    return rows
