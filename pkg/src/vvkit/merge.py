"""Checkpoint weight averaging and the delta-interference diagnostic.

Tensors travel in a small binary container (magic ``VVTM``): a uint32
little-endian format version, a uint64 header length, a compact UTF-8
JSON header mapping each tensor name to its shape and byte offset into
the payload, then one contiguous little-endian float32 payload. The
writer is canonical (names sorted, tensors tightly packed in name order,
minified JSON), so write(read(f)) is byte-identical for files it wrote.

Averaging accumulates in float64. Per element, the addends are summed in
ascending value order, a canonical order independent of the argument
list, which makes ``average`` permutation-invariant bit for bit.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ToolkitError

MAGIC = b"VVTM"
FORMAT_VERSION = 1
_HEAD = struct.Struct("<4sIQ")


class MergeError(ToolkitError):
    """Base for merge/container failures."""


class EmptyInput(MergeError):
    """No tensor maps were supplied."""


class NameSetMismatch(MergeError):
    """Tensor maps do not share the same tensor names."""


class ShapeMismatch(MergeError):
    """A tensor has different shapes across maps."""


class ContainerFormatError(MergeError):
    """A container file is malformed or has an unsupported version."""


class TensorMap:
    """Named float32 tensors; arrays are C-contiguous and treated as
    immutable once loaded."""

    def __init__(self, entries: dict[str, np.ndarray]):
        self._entries: dict[str, np.ndarray] = {}
        for name, array in entries.items():
            arr = np.ascontiguousarray(array, dtype=np.float32)
            self._entries[str(name)] = arr

    def __len__(self) -> int:
        return len(self._entries)

    def __getitem__(self, name: str) -> np.ndarray:
        return self._entries[name]

    def __contains__(self, name: str) -> bool:
        return name in self._entries

    def names(self) -> list[str]:
        return sorted(self._entries)

    def items(self):
        for name in self.names():
            yield name, self._entries[name]

    def allclose(self, other: "TensorMap", rtol: float = 0.0, atol: float = 0.0) -> bool:
        if self.names() != other.names():
            return False
        return all(
            a.shape == other[n].shape and np.allclose(a, other[n], rtol=rtol, atol=atol)
            for n, a in self.items()
        )


def write_bytes(tmap: TensorMap) -> bytes:
    """Serialize a TensorMap to canonical container bytes."""
    header: dict[str, dict] = {}
    chunks: list[bytes] = []
    offset = 0
    for name, arr in tmap.items():
        data = arr.astype("<f4", copy=False).tobytes(order="C")
        header[name] = {"shape": list(arr.shape), "offset": offset}
        chunks.append(data)
        offset += len(data)
    header_bytes = json.dumps(
        header, sort_keys=True, separators=(",", ":"), ensure_ascii=False
    ).encode("utf-8")
    return (
        _HEAD.pack(MAGIC, FORMAT_VERSION, len(header_bytes))
        + header_bytes
        + b"".join(chunks)
    )


def read_bytes(data: bytes) -> TensorMap:
    """Parse container bytes into a TensorMap, validating the layout."""
    if len(data) < _HEAD.size:
        raise ContainerFormatError("file shorter than the fixed header")
    magic, version, header_len = _HEAD.unpack_from(data)
    if magic != MAGIC:
        raise ContainerFormatError(f"bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise ContainerFormatError(f"unsupported format version {version}")
    header_end = _HEAD.size + header_len
    if header_end > len(data):
        raise ContainerFormatError("header length exceeds file size")
    try:
        header = json.loads(data[_HEAD.size : header_end].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ContainerFormatError(f"bad JSON header: {exc}") from exc
    if not isinstance(header, dict):
        raise ContainerFormatError("header must be a JSON object")
    payload = data[header_end:]
    entries: dict[str, np.ndarray] = {}
    used = 0
    for name, meta in header.items():
        try:
            shape = tuple(int(d) for d in meta["shape"])
            offset = int(meta["offset"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ContainerFormatError(f"bad entry for {name!r}: {exc}") from exc
        if any(d < 0 for d in shape) or offset < 0:
            raise ContainerFormatError(f"negative shape/offset for {name!r}")
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        nbytes = count * 4
        if offset + nbytes > len(payload):
            raise ContainerFormatError(f"tensor {name!r} runs past end of payload")
        arr = np.frombuffer(payload, dtype="<f4", count=count, offset=offset)
        entries[name] = arr.reshape(shape).copy()
        used += nbytes
    if used != len(payload):
        raise ContainerFormatError(
            f"payload holds {len(payload)} bytes, tensors account for {used}"
        )
    return TensorMap(entries)


def write_file(tmap: TensorMap, path: str | Path) -> None:
    Path(path).write_bytes(write_bytes(tmap))


def read_file(path: str | Path) -> TensorMap:
    return read_bytes(Path(path).read_bytes())


def _check_aligned(maps: list[TensorMap]) -> list[str]:
    if not maps:
        raise EmptyInput("need at least one tensor map")
    names = maps[0].names()
    for i, m in enumerate(maps[1:], start=1):
        if m.names() != names:
            raise NameSetMismatch(f"map {i} has a different tensor name set")
    for name in names:
        shapes = {m[name].shape for m in maps}
        if len(shapes) != 1:
            raise ShapeMismatch(f"tensor {name!r} has shapes {sorted(shapes)}")
    return names


def average(maps: list[TensorMap], weights: list[float] | None = None) -> TensorMap:
    """Elementwise (optionally weighted) mean across checkpoints.

    Accumulates in float64 and rounds once to float32. The per-element
    ascending-value summation order makes the result independent of the
    order maps are listed in.
    """
    names = _check_aligned(maps)
    if weights is None:
        weights = [1.0] * len(maps)
    if len(weights) != len(maps):
        raise ValueError(f"{len(weights)} weights for {len(maps)} maps")
    total = float(sum(weights))
    if total == 0.0:
        raise ValueError("weights sum to zero")
    out: dict[str, np.ndarray] = {}
    for name in names:
        shape = maps[0][name].shape
        stacked = np.stack(
            [m[name].ravel().astype(np.float64) * w for m, w in zip(maps, weights)]
        )
        stacked.sort(axis=0)
        acc = stacked[0].copy()
        for row in stacked[1:]:
            acc += row
        out[name] = (acc / total).astype(np.float32).reshape(shape)
    return TensorMap(out)


@dataclass
class InterferenceReport:
    """Pairwise cosine similarities between flattened checkpoint deltas."""

    names: list[str]
    pairwise: np.ndarray
    norms: np.ndarray

    def to_json(self) -> dict:
        return {
            "inputs": list(self.names),
            "pairwise": [[float(v) for v in row] for row in self.pairwise],
            "norms": [float(v) for v in self.norms],
        }


def cosine_matrix(
    maps: list[TensorMap], base: TensorMap, names: list[str] | None = None
) -> InterferenceReport:
    """Cosine similarity matrix of per-checkpoint deltas against a base.

    Deltas are flattened across all tensors (lexicographic name order)
    and accumulated in float64. A zero-norm delta scores 0 against every
    other delta; the diagonal is exactly 1.
    """
    tensor_names = _check_aligned([base, *maps])
    k = len(maps)
    deltas = []
    for m in maps:
        parts = [
            (m[n].astype(np.float64) - base[n].astype(np.float64)).ravel()
            for n in tensor_names
        ]
        deltas.append(np.concatenate(parts) if parts else np.zeros(0))
    norms = np.array([float(np.linalg.norm(d)) for d in deltas])
    pairwise = np.zeros((k, k))
    for i in range(k):
        pairwise[i, i] = 1.0
        for j in range(i + 1, k):
            if norms[i] == 0.0 or norms[j] == 0.0:
                value = 0.0
            else:
                value = float(np.dot(deltas[i], deltas[j]) / (norms[i] * norms[j]))
            pairwise[i, j] = value
            pairwise[j, i] = value
    labels = list(names) if names is not None else [str(i) for i in range(k)]
    return InterferenceReport(names=labels, pairwise=pairwise, norms=norms)
