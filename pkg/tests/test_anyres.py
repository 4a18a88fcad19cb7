import random

import pytest

from vvkit.anyres import (
    OCR_MIN_LONG_SIDE,
    PATCH_14,
    PATCH_16,
    STAGE_PROFILES,
    GridPlan,
    InvalidConfig,
    NoAdmissibleGrid,
    PatchConfig,
    StageProfile,
    covered_area,
    ocr_upscale,
    reduce_tokens,
    select_grid,
    tile_count,
    tokens_per_tile,
)


def brute_force_plan(image_w, image_h, profile, cfg):
    """Independent exhaustive search used as the selection oracle."""
    full_side = cfg.base_resolution // cfg.patch_size
    candidates = []
    for rows in range(1, profile.max_grid_dim + 1):
        for cols in range(1, profile.max_grid_dim + 1):
            n = rows * cols + 1 if rows * cols > 1 else 1
            per_tile = None
            for side in range(full_side, 0, -1):
                if n * side * side <= profile.max_total_tokens:
                    per_tile = side * side
                    break
            if per_tile is None:
                continue
            canvas_w = cols * cfg.base_resolution
            canvas_h = rows * cfg.base_resolution
            scale = min(1.0, canvas_w / image_w, canvas_h / image_h)
            area = (scale * image_w) * (scale * image_h)
            candidates.append(
                ((-area, rows * cols, abs(rows - cols), rows), rows, cols, per_tile, n)
            )
    key, rows, cols, per_tile, n = min(candidates)
    return GridPlan(
        rows=rows,
        cols=cols,
        tile_px=(cols * cfg.base_resolution, rows * cfg.base_resolution),
        tokens_per_tile=per_tile,
        total_tokens=n * per_tile,
    )


class TestTokensPerTile:
    def test_patch16(self):
        assert tokens_per_tile(PatchConfig(384, 16)) == 576

    def test_patch14_floor_division(self):
        assert tokens_per_tile(PatchConfig(384, 14)) == 729

    def test_single_patch(self):
        assert tokens_per_tile(PatchConfig(16, 16)) == 1

    @pytest.mark.parametrize("patch", [0, -3, 400])
    def test_invalid_config(self, patch):
        with pytest.raises(InvalidConfig):
            tokens_per_tile(PatchConfig(384, patch))


class TestStageProfiles:
    def test_table_values(self):
        assert STAGE_PROFILES["1"].max_total_tokens == 576
        assert STAGE_PROFILES["1"].context_length == 1024
        assert STAGE_PROFILES["2"].max_total_tokens == 2880
        assert STAGE_PROFILES["3"].max_total_tokens == 5760
        assert STAGE_PROFILES["3"].context_length == 16384
        assert STAGE_PROFILES["4"].max_total_tokens == 5760
        assert STAGE_PROFILES["4"].context_length == 9216
        assert STAGE_PROFILES["extrapolate"].max_total_tokens == 17 * 576
        assert STAGE_PROFILES["extrapolate"].max_grid_dim == 8

    def test_stage3_cap_is_ten_tiles_of_576(self):
        assert 10 * tokens_per_tile(PATCH_16) == STAGE_PROFILES["3"].max_total_tokens


class TestReduceTokens:
    def test_within_cap_unreduced(self):
        assert reduce_tokens(3, 3, STAGE_PROFILES["3"], PATCH_16) == 576

    def test_over_cap_reduced_to_square(self):
        # 4x4 + base = 17 tiles; 17*324 = 5508 <= 5760 < 17*361
        assert reduce_tokens(4, 4, STAGE_PROFILES["3"], PATCH_16) == 324

    @pytest.mark.parametrize("stage", sorted(STAGE_PROFILES))
    def test_one_by_one_always_full(self, stage):
        assert reduce_tokens(1, 1, STAGE_PROFILES[stage], PATCH_16) == 576

    def test_single_tile_has_no_thumbnail(self):
        assert tile_count(1, 1) == 1
        assert tile_count(2, 2) == 5
        assert tile_count(3, 3) == 10
        assert tile_count(1, 2) == 3

    def test_no_admissible_grid(self):
        tiny = StageProfile("tiny", 6, 30, 1024)
        with pytest.raises(NoAdmissibleGrid):
            reduce_tokens(6, 6, tiny, PATCH_16)  # 37 tiles > 30 token cap
        assert reduce_tokens(5, 5, tiny, PATCH_16) == 1  # 26 tiles of 1 token

    def test_bad_dims(self):
        with pytest.raises(ValueError):
            reduce_tokens(0, 1, STAGE_PROFILES["3"], PATCH_16)


class TestSelectGrid:
    def test_stage1_square(self):
        plan = select_grid(384, 384, STAGE_PROFILES["1"])
        assert (plan.rows, plan.cols, plan.total_tokens) == (1, 1, 576)

    def test_stage2_double(self):
        plan = select_grid(768, 768, STAGE_PROFILES["2"])
        assert (plan.rows, plan.cols) == (2, 2)
        assert plan.total_tokens == (4 + 1) * 576 == 2880

    def test_wide_image_stage3_matches_oracle(self):
        plan = select_grid(2304, 768, STAGE_PROFILES["3"])
        assert plan == brute_force_plan(2304, 768, STAGE_PROFILES["3"], PATCH_16)
        # the full-width grid covers everything at native scale
        assert (plan.rows, plan.cols) == (2, 6)
        assert plan.total_tokens == 13 * 441 == 5733

    def test_2x4_beats_1x6_on_covered_area(self):
        assert covered_area(2304, 768, 2, 4, PATCH_16) > covered_area(
            2304, 768, 1, 6, PATCH_16
        )

    def test_matches_oracle_on_random_inputs(self):
        rng = random.Random(2024)
        profiles = list(STAGE_PROFILES.values())
        for _ in range(1500):
            w = rng.randint(1, 6000)
            h = rng.randint(1, 6000)
            profile = rng.choice(profiles)
            cfg = PATCH_16 if rng.random() < 0.8 else PATCH_14
            assert select_grid(w, h, profile, cfg) == brute_force_plan(
                w, h, profile, cfg
            )

    def test_plan_respects_caps(self):
        rng = random.Random(9)
        for _ in range(500):
            profile = rng.choice(list(STAGE_PROFILES.values()))
            plan = select_grid(rng.randint(1, 5000), rng.randint(1, 5000), profile)
            assert plan.total_tokens <= profile.max_total_tokens
            assert plan.rows <= profile.max_grid_dim
            assert plan.cols <= profile.max_grid_dim
            side = int(plan.tokens_per_tile**0.5)
            assert side * side == plan.tokens_per_tile

    def test_monotone_in_token_cap(self):
        rng = random.Random(10)
        for _ in range(300):
            w, h = rng.randint(1, 4000), rng.randint(1, 4000)
            small = StageProfile("small", 6, rng.randint(1200, 4000), 16384)
            big = StageProfile(
                "big", 6, small.max_total_tokens + rng.randint(0, 4000), 16384
            )
            area_small = covered_area(
                w, h, *_grid_of(select_grid(w, h, small)), PATCH_16
            )
            area_big = covered_area(w, h, *_grid_of(select_grid(w, h, big)), PATCH_16)
            assert area_big >= area_small

    def test_bad_dims(self):
        with pytest.raises(ValueError):
            select_grid(0, 100, STAGE_PROFILES["1"])


def _grid_of(plan):
    return plan.rows, plan.cols


class TestOcrUpscale:
    def test_reference_case(self):
        # 800 * 2304 / 1000 = 1843.2 -> 1843
        assert ocr_upscale(1000, 800) == (2304, 1843)

    def test_at_threshold_unchanged(self):
        assert ocr_upscale(2304, 100) == (2304, 100)

    def test_above_threshold_unchanged(self):
        assert ocr_upscale(4000, 3000) == (4000, 3000)

    def test_tie_rounds_away_from_zero(self):
        # 1 * 2304 / 2 = 1152 exact; 3 * 2304 / 4 = 1728 exact; craft a tie:
        # w=2, h=3 -> 2*2304/3 = 1536 exact. Use h=1536: shorter*2304/1536
        # with shorter=1 gives 1.5 -> 2.
        assert ocr_upscale(1536, 1) == (2304, 2)

    def test_idempotent_and_never_shrinks(self):
        rng = random.Random(11)
        for _ in range(500):
            w = rng.randint(1, OCR_MIN_LONG_SIDE - 1)
            h = rng.randint(1, OCR_MIN_LONG_SIDE - 1)
            w2, h2 = ocr_upscale(w, h)
            assert max(w2, h2) == OCR_MIN_LONG_SIDE
            assert w2 >= w and h2 >= h
            assert ocr_upscale(w2, h2) == (w2, h2)

    def test_square_input(self):
        assert ocr_upscale(100, 100) == (2304, 2304)

    def test_bad_dims(self):
        with pytest.raises(ValueError):
            ocr_upscale(0, 5)
