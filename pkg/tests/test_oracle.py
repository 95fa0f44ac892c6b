import numpy as np
import pytest

from regional.geometry import Box, ImageExtent, coverage_fraction, iou
from regional.oracle import (
    BudgetLedger,
    QueryKind,
    charge,
    oracle_image_query,
    oracle_object_query,
    oracle_region_query,
)
from regional.scene import Category, GroundTruthObject, SceneDataset, SceneImage


def scene_with(boxes, categories=None, extent=ImageExtent(100, 100)):
    cats = categories or [0] * len(boxes)
    gts = [
        GroundTruthObject(i, 0, cats[i], box) for i, box in enumerate(boxes)
    ]
    ds = SceneDataset(
        [Category(c, f"c{c}") for c in sorted(set(cats))],
        [SceneImage(0, extent)],
        gts,
    )
    return ds, ds.images[0]


class TestObjectQuery:
    def test_exact_match_returned(self):
        ds, img = scene_with([Box(10, 10, 20, 20)])
        resp = oracle_object_query(Box(10, 10, 20, 20), img, ds)
        assert resp.returned_gt_ids == frozenset({0})
        assert resp.budget_consumed == 1

    def test_disjoint_is_background_charged_one(self):
        ds, img = scene_with([Box(10, 10, 20, 20)])
        resp = oracle_object_query(Box(60, 60, 70, 70), img, ds)
        assert resp.returned_gt_ids == frozenset()
        assert resp.budget_consumed == 1
        assert resp.is_background

    def test_highest_iou_wins_regardless_of_category(self):
        # query overlaps gt0 weakly and gt1 strongly; categories differ
        ds, img = scene_with(
            [Box(0, 0, 10, 10), Box(4, 0, 14, 10)], categories=[0, 1]
        )
        query = Box(5, 0, 15, 10)
        assert iou(ds.gts[0].box, query) < iou(ds.gts[1].box, query)
        resp = oracle_object_query(query, img, ds)
        assert resp.returned_gt_ids == frozenset({1})

    def test_below_threshold_not_matched(self):
        ds, img = scene_with([Box(0, 0, 10, 10)])
        query = Box(8, 8, 30, 30)  # IoU well under 0.25
        assert iou(ds.gts[0].box, query) < 0.25
        resp = oracle_object_query(query, img, ds)
        assert resp.is_background

    def test_labeled_gt_never_returned(self):
        ds, img = scene_with([Box(10, 10, 20, 20)])
        ds.gts[0].labeled = True
        resp = oracle_object_query(Box(10, 10, 20, 20), img, ds)
        assert resp.is_background

    def test_tie_broken_by_lowest_id(self):
        ds, img = scene_with([Box(0, 0, 10, 10), Box(0, 0, 10, 10)])
        resp = oracle_object_query(Box(0, 0, 10, 10), img, ds)
        assert resp.returned_gt_ids == frozenset({0})

    def test_matches_brute_force_on_random_scenes(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            boxes = []
            for _ in range(rng.integers(1, 8)):
                x0, y0 = rng.uniform(0, 80, 2)
                w, h = rng.uniform(2, 20, 2)
                boxes.append(Box(x0, y0, min(x0 + w, 100), min(y0 + h, 100)))
            ds, img = scene_with(boxes)
            qx, qy = rng.uniform(0, 80, 2)
            query = Box(qx, qy, min(qx + rng.uniform(2, 20), 100), min(qy + rng.uniform(2, 20), 100))
            resp = oracle_object_query(query, img, ds)
            ious = [(iou(b.box, query), b.id) for b in ds.gts.values()]
            eligible = [(v, gid) for v, gid in ious if v >= 0.25]
            if eligible:
                best = max(v for v, _ in eligible)
                expected = min(gid for v, gid in eligible if v == best)
                assert resp.returned_gt_ids == frozenset({expected})
            else:
                assert resp.is_background


class TestRegionQuery:
    def test_whole_image_region_returns_everything(self):
        ds, img = scene_with([Box(1, 1, 9, 9), Box(50, 50, 60, 60), Box(80, 80, 95, 95)])
        resp = oracle_region_query(Box(0, 0, 100, 100), img, ds)
        assert resp.returned_gt_ids == frozenset({0, 1, 2})
        assert resp.budget_consumed == 3

    def test_24_percent_coverage_not_returned(self):
        gt = Box(0, 0, 10, 10)
        region = Box(7.6, 0, 30, 10)  # covers 2.4 * 10 = 24%
        ds, img = scene_with([gt])
        assert coverage_fraction(gt, region) == pytest.approx(0.24)
        resp = oracle_region_query(region, img, ds)
        assert resp.is_background
        assert resp.budget_consumed == 1

    def test_25_percent_coverage_returned(self):
        gt = Box(0, 0, 10, 10)
        region = Box(7.5, 0, 30, 10)
        ds, img = scene_with([gt])
        resp = oracle_region_query(region, img, ds)
        assert resp.returned_gt_ids == frozenset({0})

    def test_empty_region_charges_one(self):
        ds, img = scene_with([Box(0, 0, 10, 10)])
        resp = oracle_region_query(Box(50, 50, 60, 60), img, ds)
        assert resp.budget_consumed == 1

    def test_matches_brute_force_coverage_filter(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            boxes = []
            for _ in range(rng.integers(1, 10)):
                x0, y0 = rng.uniform(0, 80, 2)
                w, h = rng.uniform(2, 25, 2)
                boxes.append(Box(x0, y0, min(x0 + w, 100), min(y0 + h, 100)))
            ds, img = scene_with(boxes)
            x0, y0 = rng.uniform(0, 60, 2)
            region = Box(x0, y0, min(x0 + rng.uniform(5, 40), 100), min(y0 + rng.uniform(5, 40), 100))
            resp = oracle_region_query(region, img, ds)
            expected = {
                gt.id for gt in ds.gts.values() if coverage_fraction(gt.box, region) >= 0.25
            }
            assert resp.returned_gt_ids == frozenset(expected)


class TestImageQuery:
    def test_all_unlabeled_returned_and_charged(self):
        ds, img = scene_with([Box(i * 10, 0, i * 10 + 5, 5) for i in range(5)])
        resp = oracle_image_query(img, ds)
        assert len(resp.returned_gt_ids) == 5
        assert resp.budget_consumed == 5
        assert resp.query_area == 100 * 100

    def test_no_double_counting(self):
        ds, img = scene_with([Box(i * 10, 0, i * 10 + 5, 5) for i in range(5)])
        ds.gts[0].labeled = True
        ds.gts[1].labeled = True
        ds.gts[2].labeled = True
        resp = oracle_image_query(img, ds)
        assert resp.returned_gt_ids == frozenset({3, 4})
        assert resp.budget_consumed == 2

    def test_empty_image_costs_nothing(self):
        ds = SceneDataset(
            [Category(0, "c")],
            [SceneImage(0, ImageExtent(100, 100))],
            [],
        )
        resp = oracle_image_query(ds.images[0], ds)
        assert resp.returned_gt_ids == frozenset()
        assert resp.budget_consumed == 0

    def test_fully_labeled_image_raises(self):
        ds, img = scene_with([Box(0, 0, 5, 5)])
        ds.gts[0].labeled = True
        with pytest.raises(ValueError, match="fully labeled"):
            oracle_image_query(img, ds)


class TestLedger:
    def test_partial_progress(self):
        ds, img = scene_with([Box(i * 10, 0, i * 10 + 5, 5) for i in range(4)])
        ledger = BudgetLedger(budget=10)
        resp = oracle_image_query(img, ds)
        done = charge(ledger, resp, ds)
        assert not done
        assert ledger.labels_applied == 4

    def test_overshoot_completes(self):
        ds, img = scene_with([Box(i * 10, 0, i * 10 + 5, 5) for i in range(3)])
        ledger = BudgetLedger(budget=10)
        ledger.labels_applied = 9  # simulate nine labels already recorded
        resp = oracle_region_query(Box(0, 0, 100, 100), img, ds)
        assert len(resp.returned_gt_ids) == 3
        done = ledger.charge(resp, ds)
        assert done
        assert ledger.labels_applied == 12

    def test_background_completes_exactly(self):
        ds, img = scene_with([Box(0, 0, 10, 10)])
        ledger = BudgetLedger(budget=10)
        ledger.labels_applied = 9
        resp = oracle_object_query(Box(80, 80, 90, 90), img, ds)
        done = ledger.charge(resp, ds)
        assert done
        assert ledger.background_queries == 1
        assert ledger.consumed == 10

    def test_charging_complete_ledger_raises(self):
        ds, img = scene_with([Box(0, 0, 10, 10)])
        ledger = BudgetLedger(budget=1)
        ledger.charge(oracle_object_query(Box(0, 0, 10, 10), img, ds), ds)
        with pytest.raises(RuntimeError):
            ledger.charge(oracle_object_query(Box(50, 50, 60, 60), img, ds), ds)

    def test_conservation(self):
        ds, img = scene_with([Box(i * 10, 0, i * 10 + 5, 5) for i in range(6)])
        ledger = BudgetLedger(budget=8)
        responses = [
            oracle_object_query(Box(0, 0, 5, 5), img, ds),
            oracle_object_query(Box(70, 70, 80, 80), img, ds),
        ]
        for resp in responses:
            for gid in resp.returned_gt_ids:
                ds.gts[gid].labeled = True
            ledger.charge(resp, ds)
        resp = oracle_image_query(img, ds)
        for gid in resp.returned_gt_ids:
            ds.gts[gid].labeled = True
        ledger.charge(resp, ds)
        assert ledger.labels_applied + ledger.background_queries == sum(
            r.budget_consumed for r in ledger.interactions
        )
        assert ledger.labels_applied == sum(ledger.per_category_labels.values())

    def test_category_tallies(self):
        ds, img = scene_with(
            [Box(0, 0, 10, 10), Box(20, 0, 30, 10)], categories=[3, 5]
        )
        ledger = BudgetLedger(budget=5)
        ledger.charge(oracle_image_query(img, ds), ds)
        assert ledger.per_category_labels == {3: 1, 5: 1}
