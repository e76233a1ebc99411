from __future__ import annotations

import numpy as np
import pytest

from lesionwise import (
    MatchKind,
    MetricParams,
    PercentileMethod,
    boundary,
    dice,
    distance_transform,
    hd95,
    lesionwise_eval,
    precision_recall,
)
from lesionwise.errors import EmptyMaskError, GeometryMismatchError
from lesionwise.metrics import _percentile

from oracles import brute_boundary, brute_distance_transform
from util import cube, mask, random_mask

EMPTY = np.zeros((8, 8, 8), dtype=bool)


class TestDice:
    def test_identity(self):
        m = random_mask((8, 8, 8), 0.3, seed=0)
        assert dice(m, m) == 1.0

    def test_disjoint(self):
        a = cube((10, 10, 10), (0, 0, 0), (2, 2, 2))
        b = cube((10, 10, 10), (5, 5, 5), (7, 7, 7))
        assert dice(a, b) == 0.0

    def test_shifted_cube(self):
        # 4^3 cube against itself shifted +2 in x: overlap 32 of 64+64.
        a = cube((12, 12, 12), (2, 2, 2), (6, 6, 6))
        b = cube((12, 12, 12), (4, 2, 2), (8, 6, 6))
        assert dice(a, b) == pytest.approx(2 * 32 / 128)

    def test_empty_pair_convention(self):
        assert dice(mask(EMPTY), mask(EMPTY)) == 1.0
        assert dice(mask(EMPTY), mask(EMPTY), empty_value=0.25) == 0.25

    def test_one_empty(self):
        m = random_mask((8, 8, 8), 0.2, seed=1)
        assert dice(m, mask(EMPTY)) == 0.0

    def test_geometry_mismatch(self):
        with pytest.raises(GeometryMismatchError):
            dice(random_mask((8, 8, 8), 0.2, 0), random_mask((8, 8, 7), 0.2, 0))

    def test_symmetry(self):
        a = random_mask((9, 9, 9), 0.25, seed=2)
        b = random_mask((9, 9, 9), 0.25, seed=3)
        assert dice(a, b) == dice(b, a)


class TestPrecisionRecall:
    def test_identity(self):
        m = random_mask((8, 8, 8), 0.3, seed=4)
        assert precision_recall(m, m) == (1.0, 1.0)

    def test_overprediction(self):
        gt = cube((12, 12, 12), (2, 2, 2), (6, 6, 4))  # 32 voxels
        pred = cube((12, 12, 12), (2, 2, 2), (6, 6, 6))  # 64 voxels, superset
        assert precision_recall(pred, gt) == (0.5, 1.0)

    def test_empty_conventions(self):
        m = random_mask((8, 8, 8), 0.2, seed=5)
        empty = mask(EMPTY)
        assert precision_recall(empty, m) == (0.0, 0.0)
        assert precision_recall(m, empty) == (0.0, 0.0)
        assert precision_recall(empty, empty) == (1.0, 1.0)


class TestBoundary:
    def test_solid_cube(self):
        m = cube((9, 9, 9), (3, 3, 3), (6, 6, 6))
        b = boundary(m)
        assert b.count == 26
        assert not b.data[4, 4, 4]

    def test_single_voxel(self):
        data = np.zeros((5, 5, 5), dtype=bool)
        data[2, 2, 2] = True
        assert np.array_equal(boundary(mask(data)).data, data)

    def test_grid_border_counts_as_outside(self):
        m = mask(np.ones((3, 3, 3), dtype=bool))
        assert boundary(m).count == 26  # all but the center voxel

    def test_matches_scan_oracle(self):
        for seed in range(8):
            m = random_mask((12, 12, 12), 0.35, seed=seed + 10)
            assert np.array_equal(boundary(m).data, brute_boundary(m.data))


class TestDistanceTransform:
    def test_pythagoras(self):
        data = np.zeros((8, 8, 8), dtype=bool)
        data[0, 0, 0] = True
        dt = distance_transform(mask(data))
        assert dt[3, 4, 0] == pytest.approx(5.0, abs=1e-12)
        assert dt[0, 0, 0] == 0.0

    def test_anisotropic_spacing(self):
        data = np.zeros((4, 4, 4), dtype=bool)
        data[0, 0, 0] = True
        dt = distance_transform(mask(data, spacing=(1.0, 1.0, 2.5)))
        assert dt[0, 0, 1] == pytest.approx(2.5, abs=1e-12)

    def test_explicit_spacing_overrides_geometry(self):
        data = np.zeros((4, 4, 4), dtype=bool)
        data[0, 0, 0] = True
        dt = distance_transform(mask(data), spacing=(2.0, 2.0, 2.0))
        assert dt[1, 0, 0] == pytest.approx(2.0, abs=1e-12)

    @pytest.mark.parametrize("spacing", [(1.0, 1.0, 1.0), (1.0, 1.0, 2.5), (0.5, 0.5, 0.5)])
    def test_matches_scan_oracle(self, spacing):
        for seed in range(5):
            m = random_mask((16, 16, 16), 0.05, seed=seed + 40, spacing=spacing)
            if m.is_empty:
                continue
            got = distance_transform(m)
            assert np.abs(got - brute_distance_transform(m.data, spacing)).max() <= 1e-9

    def test_zero_exactly_on_foreground(self):
        m = random_mask((10, 10, 10), 0.1, seed=6)
        dt = distance_transform(m)
        assert np.array_equal(dt == 0.0, m.data)

    def test_face_neighbor_lipschitz(self):
        m = random_mask((10, 10, 10), 0.05, seed=7, spacing=(1.0, 1.2, 0.7))
        dt = distance_transform(m)
        for axis, step in enumerate((1.0, 1.2, 0.7)):
            diff = np.abs(np.diff(dt, axis=axis))
            assert diff.max() <= step + 1e-9

    def test_empty_mask_error(self):
        with pytest.raises(EmptyMaskError):
            distance_transform(mask(EMPTY))


class TestHd95:
    def test_identical(self):
        m = random_mask((10, 10, 10), 0.2, seed=8)
        assert hd95(m, m) == 0.0

    def test_one_empty_penalty(self):
        m = random_mask((10, 10, 10), 0.2, seed=9)
        empty = mask(np.zeros((10, 10, 10), dtype=bool))
        assert hd95(m, empty) == 374.0
        assert hd95(empty, m) == 374.0
        params = MetricParams(hd95_penalty=99.0)
        assert hd95(m, empty, params=params) == 99.0

    def test_both_empty(self):
        empty = mask(np.zeros((6, 6, 6), dtype=bool))
        assert hd95(empty, empty) == 0.0
        params = MetricParams(empty_pair_hd95=1.5)
        assert hd95(empty, empty, params=params) == 1.5

    def test_two_voxels_seven_apart(self):
        data_a = np.zeros((12, 12, 12), dtype=bool)
        data_b = np.zeros((12, 12, 12), dtype=bool)
        data_a[2, 5, 5] = True
        data_b[9, 5, 5] = True
        for method in PercentileMethod:
            params = MetricParams(percentile_method=method)
            assert hd95(mask(data_a), mask(data_b), params=params) == pytest.approx(7.0, abs=1e-12)

    def test_symmetric(self):
        a = random_mask((12, 12, 12), 0.1, seed=10)
        b = random_mask((12, 12, 12), 0.1, seed=11)
        assert hd95(a, b) == hd95(b, a)

    def test_translation_invariance(self):
        a = random_mask((16, 16, 16), 0.2, seed=12).data[:8, :8, :8]
        b = random_mask((16, 16, 16), 0.2, seed=13).data[:8, :8, :8]
        big_a = np.zeros((20, 20, 20), dtype=bool)
        big_b = np.zeros((20, 20, 20), dtype=bool)
        big_a[1:9, 1:9, 1:9] = a
        big_b[1:9, 1:9, 1:9] = b
        shift_a = np.zeros_like(big_a)
        shift_b = np.zeros_like(big_b)
        shift_a[6:14, 9:17, 3:11] = a
        shift_b[6:14, 9:17, 3:11] = b
        assert hd95(mask(big_a), mask(big_b)) == pytest.approx(
            hd95(mask(shift_a), mask(shift_b)), abs=1e-12
        )
        assert dice(mask(big_a), mask(big_b)) == dice(mask(shift_a), mask(shift_b))

    def test_spacing_scaling(self):
        a = random_mask((12, 12, 12), 0.15, seed=14)
        b = random_mask((12, 12, 12), 0.15, seed=15)
        base = hd95(a, b, spacing=(1.0, 1.0, 1.0))
        for k in (0.5, 2.0):
            scaled = hd95(a, b, spacing=(k, k, k))
            assert scaled == pytest.approx(k * base, rel=1e-12)

    def test_boundary_convention(self):
        # Hollow vs solid cube share the same boundary, so hd95 must be 0.
        solid = cube((12, 12, 12), (3, 3, 3), (9, 9, 9))
        hollow = solid.data.copy()
        hollow[4:8, 4:8, 4:8] = False
        assert hd95(mask(hollow), solid) == 0.0


def test_percentile_methods():
    values = np.arange(1.0, 21.0)  # 1..20
    assert _percentile(values, PercentileMethod.LINEAR_INTERP) == pytest.approx(19.05)
    assert _percentile(values, PercentileMethod.NEAREST_RANK) == 19.0
    single = np.array([4.2])
    for method in PercentileMethod:
        assert _percentile(single, method) == 4.2


class TestLesionwiseEval:
    def test_perfect_two_lesions(self):
        data = np.zeros((24, 24, 24), dtype=bool)
        data[2:7, 2:7, 2:7] = True      # 125 voxels
        data[15:20, 15:20, 15:20] = True
        m = mask(data)
        matches, scores = lesionwise_eval(m, m)
        assert [x.kind for x in matches] == [MatchKind.MATCHED, MatchKind.MATCHED]
        assert all(x.dice == 1.0 and x.hd95 == 0.0 for x in matches)
        assert scores.lesionwise_dice == 1.0
        assert scores.lesionwise_hd95 == 0.0
        assert (scores.n_matched, scores.n_missed, scores.n_false_positive) == (2, 0, 0)

    def test_missed_lesion_penalty(self):
        gt = cube((20, 20, 20), (5, 5, 5), (10, 10, 10))  # 125 >= 50
        pred = mask(np.zeros((20, 20, 20), dtype=bool))
        matches, scores = lesionwise_eval(pred, gt)
        assert len(matches) == 1
        assert matches[0].kind is MatchKind.MISSED_GT
        assert matches[0].dice == 0.0 and matches[0].hd95 == 374.0
        assert scores.lesionwise_dice == 0.0
        assert scores.lesionwise_hd95 == 374.0

    def test_false_positive_blob(self):
        gt_data = np.zeros((32, 32, 32), dtype=bool)
        gt_data[2:7, 2:7, 2:7] = True
        pred_data = gt_data.copy()
        pred_data[20:25, 20:25, 20:25] = True  # distant 125-voxel blob
        matches, scores = lesionwise_eval(mask(pred_data), mask(gt_data))
        kinds = sorted(m.kind for m in matches)
        assert kinds == sorted([MatchKind.MATCHED, MatchKind.FALSE_POSITIVE])
        assert scores.lesionwise_dice == pytest.approx(0.5)
        assert scores.lesionwise_hd95 == pytest.approx((0.0 + 374.0) / 2)
        assert (scores.n_matched, scores.n_missed, scores.n_false_positive) == (1, 0, 1)

    def test_pred_component_assigned_to_multiple_zones(self):
        gt_data = np.zeros((40, 14, 14), dtype=bool)
        gt_data[2:7, 4:9, 4:9] = True    # lesion 1
        gt_data[13:18, 4:9, 4:9] = True  # lesion 2, gap of 6 > radius 3
        pred_data = np.zeros_like(gt_data)
        pred_data[5:15, 4:9, 4:9] = True  # one bar within 3 of both lesions
        params = MetricParams(min_lesion_size=50)
        matches, scores = lesionwise_eval(mask(pred_data), mask(gt_data), params=params)
        matched = [m for m in matches if m.kind is MatchKind.MATCHED]
        assert len(matched) == 2
        assert matched[0].matched_pred_ids == (1,)
        assert matched[1].matched_pred_ids == (1,)
        assert scores.n_false_positive == 0

    def test_small_components_filtered_both_sides(self):
        gt = cube((16, 16, 16), (5, 5, 5), (7, 7, 7))  # 8 voxels < 50
        pred = mask(np.zeros((16, 16, 16), dtype=bool))
        matches, scores = lesionwise_eval(pred, gt)
        assert matches == []
        assert scores.lesionwise_dice == 1.0  # empty-pair fallback
        assert scores.lesionwise_hd95 == 0.0
        assert scores.voxel_dice == 0.0  # voxel level still sees the lesion
        matches, scores = lesionwise_eval(pred, gt, params=MetricParams(min_lesion_size=5))
        assert [m.kind for m in matches] == [MatchKind.MISSED_GT]

    def test_single_pair_matches_plain_dice_and_hd95(self):
        gt = cube((20, 20, 20), (4, 4, 4), (10, 10, 10))
        pred = cube((20, 20, 20), (6, 4, 4), (12, 10, 10))
        params = MetricParams(min_lesion_size=1)
        matches, scores = lesionwise_eval(pred, gt, params=params)
        assert len(matches) == 1
        assert matches[0].dice == pytest.approx(dice(pred, gt))
        assert matches[0].hd95 == pytest.approx(hd95(pred, gt, params=params))
        assert scores.lesionwise_dice == pytest.approx(dice(pred, gt))

    def test_matched_dice_uses_full_pred_components(self):
        # The pred component extends beyond the matching zone; dice must use all of it.
        gt = cube((40, 12, 12), (2, 2, 2), (7, 7, 7))
        pred = cube((40, 12, 12), (2, 2, 2), (30, 7, 7))
        params = MetricParams(min_lesion_size=1)
        matches, _ = lesionwise_eval(pred, gt, params=params)
        assert matches[0].kind is MatchKind.MATCHED
        assert matches[0].dice == pytest.approx(dice(pred, gt))

    def test_protocol_matches_brute_force_reimplementation(self):
        # Whole-protocol oracle: components via flood fill, zones via scan
        # dilation, scores via voxel counts and the exhaustive-pairwise hd95.
        from lesionwise import Connectivity, brute_force_hd95
        from oracles import FACE6_OFFSETS, FULL26_OFFSETS, brute_dilate, flood_fill_partition

        def oracle(pred, gt, params):
            offsets = FACE6_OFFSETS if params.connectivity is Connectivity.FACE6 else FULL26_OFFSETS
            gt_parts = sorted(
                (c for c in flood_fill_partition(gt.data, offsets) if len(c) >= params.min_lesion_size),
                key=lambda c: min(c),
            )
            pred_parts = sorted(
                (c for c in flood_fill_partition(pred.data, offsets) if len(c) >= params.min_lesion_size),
                key=lambda c: min(c),
            )
            entries = []
            assigned = set()
            for part in gt_parts:
                part_mask = np.zeros(gt.data.shape, dtype=bool)
                part_mask[tuple(np.array(sorted(part)).T)] = True
                zone = brute_dilate(part_mask, params.dilation_radius)
                hits = [i for i, pp in enumerate(pred_parts) if any(zone[v] for v in pp)]
                if not hits:
                    entries.append((0.0, params.hd95_penalty))
                    continue
                assigned.update(hits)
                union_mask = np.zeros_like(part_mask)
                for i in hits:
                    union_mask[tuple(np.array(sorted(pred_parts[i])).T)] = True
                inter = int(np.count_nonzero(part_mask & union_mask))
                d = 2.0 * inter / (len(part) + int(union_mask.sum()))
                h = brute_force_hd95(mask(part_mask, gt.geometry.spacing),
                                     mask(union_mask, gt.geometry.spacing), params=params)
                entries.append((d, h))
            entries += [(0.0, params.hd95_penalty)
                        for i in range(len(pred_parts)) if i not in assigned]
            if not entries:
                return params.empty_pair_dice, params.empty_pair_hd95, 0
            return (
                float(np.mean([e[0] for e in entries])),
                float(np.mean([e[1] for e in entries])),
                len(entries),
            )

        for seed in range(12):
            params = MetricParams(
                connectivity=[Connectivity.FACE6, Connectivity.FULL26][seed % 2],
                dilation_radius=1 + seed % 3,
                min_lesion_size=(1, 3, 8)[seed % 3],
            )
            pred = random_mask((18, 18, 14), 0.04 + 0.03 * (seed % 4), seed=900 + 2 * seed)
            gt = random_mask((18, 18, 14), 0.04 + 0.03 * (seed % 4), seed=901 + 2 * seed)
            matches, scores = lesionwise_eval(pred, gt, params=params)
            want_dice, want_hd95, want_n = oracle(pred, gt, params)
            assert len(matches) == want_n, f"seed {seed}"
            assert scores.lesionwise_dice == pytest.approx(want_dice, abs=1e-12), f"seed {seed}"
            assert scores.lesionwise_hd95 == pytest.approx(want_hd95, abs=1e-9), f"seed {seed}"

    def test_spacing_scaling_covariance(self):
        a = random_mask((14, 14, 14), 0.12, seed=21)
        b = random_mask((14, 14, 14), 0.12, seed=22)
        params = MetricParams(min_lesion_size=1)
        base_matches, base = lesionwise_eval(a, b, spacing=(1, 1, 1), params=params)
        for k in (0.5, 2.0):
            matches, scores = lesionwise_eval(a, b, spacing=(k, k, k), params=params)
            assert scores.voxel_dice == base.voxel_dice
            assert scores.voxel_precision == base.voxel_precision
            assert scores.voxel_recall == base.voxel_recall
            assert scores.lesionwise_dice == base.lesionwise_dice
            for m0, m1 in zip(base_matches, matches):
                if m0.kind is MatchKind.MATCHED:
                    assert m1.hd95 == pytest.approx(k * m0.hd95, rel=1e-12)
