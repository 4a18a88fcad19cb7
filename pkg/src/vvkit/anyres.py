"""Tiled-resolution planning and visual-token budgeting.

A high-resolution image is represented as a rows x cols grid of
fixed-size tiles plus one base thumbnail view; every tile yields
``(base_resolution / patch_size)**2`` tokens (floor division). A 1x1
plan is the base view itself, so it carries no extra thumbnail; larger
grids pay the +1. When a grid's full token load exceeds the stage cap,
per-tile tokens are pooled down to the largest perfect square that fits,
keeping the per-tile token grid square.

Grid selection maximizes the image area covered when the image is
aspect-preserving fit into the candidate's canvas without upscaling;
ties prefer fewer tiles, then squarer grids, then fewer rows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ToolkitError

# 384 x 6: the finest tokenization the six-tile grid supports; OCR inputs
# below this on their longer side get upscaled to it.
OCR_MIN_LONG_SIDE = 2304


class InvalidConfig(ToolkitError):
    """Patch configuration with a non-positive or oversized patch."""


class NoAdmissibleGrid(ToolkitError):
    """No grid fits under the profile's token cap, even at 1 token/tile."""


@dataclass(frozen=True)
class PatchConfig:
    """Tile geometry: pixels per tile side and per patch side."""

    base_resolution: int = 384
    patch_size: int = 16


@dataclass(frozen=True)
class StageProfile:
    """Per-stage limits: grid dimension cap, visual-token cap, context length."""

    name: str
    max_grid_dim: int
    max_total_tokens: int
    context_length: int


@dataclass(frozen=True)
class GridPlan:
    """A selected tiling: grid shape, canvas size, and token budget."""

    rows: int
    cols: int
    tile_px: tuple[int, int]
    tokens_per_tile: int
    total_tokens: int


PATCH_16 = PatchConfig(384, 16)
PATCH_14 = PatchConfig(384, 14)

STAGE_PROFILES: dict[str, StageProfile] = {
    "1": StageProfile("stage1", 1, 576, 1024),
    "2": StageProfile("stage2", 2, (4 + 1) * 576, 16384),
    "3": StageProfile("stage3", 6, (9 + 1) * 576, 16384),
    "4": StageProfile("stage4", 6, (9 + 1) * 576, 9216),
    "extrapolate": StageProfile("extrapolate", 8, (16 + 1) * 576, 16384),
}


def tokens_per_tile(cfg: PatchConfig) -> int:
    """Tokens one tile produces: floor(base/patch) squared."""
    if cfg.patch_size <= 0 or cfg.patch_size > cfg.base_resolution:
        raise InvalidConfig(
            f"patch_size {cfg.patch_size} not in [1, {cfg.base_resolution}]"
        )
    return (cfg.base_resolution // cfg.patch_size) ** 2


def tile_count(rows: int, cols: int) -> int:
    """Effective tile count: grid tiles plus the base thumbnail.

    A 1x1 grid IS the base view, so it counts once; anything larger adds
    the thumbnail (2x2 -> 4+1, 3x3 -> 9+1, ...).
    """
    n = rows * cols
    return n + 1 if n > 1 else 1


def reduce_tokens(rows: int, cols: int, profile: StageProfile, cfg: PatchConfig) -> int:
    """Per-tile token count after pooling the grid under the stage cap.

    Returns the full per-tile count when it fits, otherwise the largest
    perfect square s*s with tile_count * s*s <= cap.
    """
    if rows < 1 or cols < 1:
        raise ValueError("rows and cols must be >= 1")
    full = tokens_per_tile(cfg)
    n = tile_count(rows, cols)
    if n * full <= profile.max_total_tokens:
        return full
    side = math.isqrt(profile.max_total_tokens // n)
    if side < 1:
        raise NoAdmissibleGrid(
            f"{rows}x{cols} needs {n} tiles; cap {profile.max_total_tokens} "
            "cannot hold even 1 token per tile"
        )
    return side * side


def covered_area(
    image_w: int, image_h: int, rows: int, cols: int, cfg: PatchConfig
) -> float:
    """Image area covered by an aspect-preserving, never-upscaling fit
    into the rows x cols canvas."""
    canvas_w = cols * cfg.base_resolution
    canvas_h = rows * cfg.base_resolution
    scale = min(1.0, canvas_w / image_w, canvas_h / image_h)
    return (scale * image_w) * (scale * image_h)


def select_grid(
    image_w: int,
    image_h: int,
    profile: StageProfile,
    cfg: PatchConfig = PATCH_16,
) -> GridPlan:
    """Pick the admissible grid maximizing covered image area.

    Admissible means rows, cols <= the profile's grid cap and the token
    load representable under the token cap after pooling. Ties break by
    fewer tiles, then smaller |rows - cols|, then smaller rows.
    """
    if image_w < 1 or image_h < 1:
        raise ValueError("image dimensions must be >= 1")
    best: tuple | None = None
    best_plan: GridPlan | None = None
    for rows in range(1, profile.max_grid_dim + 1):
        for cols in range(1, profile.max_grid_dim + 1):
            try:
                per_tile = reduce_tokens(rows, cols, profile, cfg)
            except NoAdmissibleGrid:
                continue
            area = covered_area(image_w, image_h, rows, cols, cfg)
            key = (-area, rows * cols, abs(rows - cols), rows)
            if best is None or key < best:
                best = key
                best_plan = GridPlan(
                    rows=rows,
                    cols=cols,
                    tile_px=(cols * cfg.base_resolution, rows * cfg.base_resolution),
                    tokens_per_tile=per_tile,
                    total_tokens=tile_count(rows, cols) * per_tile,
                )
    if best_plan is None:
        raise NoAdmissibleGrid(
            f"profile {profile.name} admits no grid for a {image_w}x{image_h} image"
        )
    return best_plan


def ocr_upscale(image_w: int, image_h: int) -> tuple[int, int]:
    """Scale a small image up so its longer side is exactly 2304 px.

    Images already at or above the threshold pass through unchanged. The
    shorter side rounds to the nearest integer, ties away from zero;
    integer arithmetic throughout, so results are platform-exact.
    """
    if image_w < 1 or image_h < 1:
        raise ValueError("image dimensions must be >= 1")
    longer = max(image_w, image_h)
    if longer >= OCR_MIN_LONG_SIDE:
        return (image_w, image_h)

    def scaled(side: int) -> int:
        q, r = divmod(side * OCR_MIN_LONG_SIDE, longer)
        return q + (1 if 2 * r >= longer else 0)

    return (scaled(image_w), scaled(image_h))
