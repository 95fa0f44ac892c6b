import math

import numpy as np
import pytest

from regional.geometry import (
    Box,
    ImageExtent,
    contained_in,
    context_window,
    coverage_fraction,
    enclosing_box,
    iou,
)


def pixel_iou(a, b, grid=32):
    """Brute-force IoU on an integer grid by counting unit cells."""
    cells_a = {(x, y) for x in range(int(a.x_min), int(a.x_max)) for y in range(int(a.y_min), int(a.y_max))}
    cells_b = {(x, y) for x in range(int(b.x_min), int(b.x_max)) for y in range(int(b.y_min), int(b.y_max))}
    union = cells_a | cells_b
    if not union:
        return 0.0
    return len(cells_a & cells_b) / len(union)


def pixel_coverage(gt, query):
    cells_gt = {(x, y) for x in range(int(gt.x_min), int(gt.x_max)) for y in range(int(gt.y_min), int(gt.y_max))}
    cells_q = {(x, y) for x in range(int(query.x_min), int(query.x_max)) for y in range(int(query.y_min), int(query.y_max))}
    return len(cells_gt & cells_q) / len(cells_gt)


def random_int_box(rng, grid=32, min_size=1):
    x0 = int(rng.integers(0, grid - min_size))
    y0 = int(rng.integers(0, grid - min_size))
    x1 = int(rng.integers(x0 + min_size, grid + 1))
    y1 = int(rng.integers(y0 + min_size, grid + 1))
    return Box(x0, y0, x1, y1)


class TestBox:
    def test_rejects_inverted_corners(self):
        with pytest.raises(ValueError):
            Box(5, 0, 4, 10)
        with pytest.raises(ValueError):
            Box(0, 5, 10, 4)

    def test_zero_area_box_is_valid(self):
        assert Box(3, 3, 3, 3).area == 0.0

    def test_properties(self):
        b = Box(1, 2, 5, 10)
        assert b.width == 4 and b.height == 8 and b.area == 32
        assert b.center == (3.0, 6.0)


class TestIou:
    def test_identical(self):
        assert iou(Box(0, 0, 10, 10), Box(0, 0, 10, 10)) == 1.0

    def test_disjoint(self):
        assert iou(Box(0, 0, 10, 10), Box(20, 20, 30, 30)) == 0.0

    def test_half_overlap(self):
        # intersection 5x10 = 50, union 100 + 100 - 50 = 150
        assert iou(Box(0, 0, 10, 10), Box(5, 0, 15, 10)) == pytest.approx(50 / 150)

    def test_degenerate_boxes_give_zero(self):
        degenerate = Box(1, 1, 1, 1)
        assert iou(degenerate, degenerate) == 0.0
        assert iou(degenerate, Box(5, 5, 6, 6)) == 0.0

    def test_symmetric(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            a, b = random_int_box(rng), random_int_box(rng)
            assert iou(a, b) == iou(b, a)

    def test_self_iou_is_one(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            a = random_int_box(rng)
            assert iou(a, a) == 1.0

    def test_matches_pixel_counting(self):
        rng = np.random.default_rng(2)
        for _ in range(300):
            a, b = random_int_box(rng), random_int_box(rng)
            assert iou(a, b) == pixel_iou(a, b)


class TestCoverage:
    def test_full_containment(self):
        assert coverage_fraction(Box(0, 0, 10, 10), Box(0, 0, 10, 10)) == 1.0

    def test_disjoint(self):
        assert coverage_fraction(Box(0, 0, 10, 10), Box(100, 100, 110, 110)) == 0.0

    def test_half_covered(self):
        assert coverage_fraction(Box(0, 0, 10, 10), Box(5, 0, 20, 10)) == 0.5

    def test_rejects_zero_area_gt(self):
        with pytest.raises(ValueError):
            coverage_fraction(Box(0, 0, 0, 10), Box(0, 0, 10, 10))

    def test_containment_implies_full_coverage(self):
        rng = np.random.default_rng(3)
        window = Box(0, 0, 32, 32)
        for _ in range(100):
            gt = random_int_box(rng)
            if contained_in(gt, window):
                assert coverage_fraction(gt, window) == 1.0

    def test_matches_pixel_counting(self):
        rng = np.random.default_rng(4)
        for _ in range(300):
            gt, q = random_int_box(rng), random_int_box(rng)
            assert coverage_fraction(gt, q) == pixel_coverage(gt, q)


class TestContextWindow:
    def test_beta_two_example(self):
        # width 10 in a 100-wide image: 2 * 0.9^2 * 10 = 16.2
        w = context_window(Box(45, 45, 55, 55), ImageExtent(100, 100), beta=2.0)
        assert w.width == pytest.approx(16.2)
        assert w.height == pytest.approx(16.2)

    def test_beta_one_example(self):
        w = context_window(Box(45, 45, 55, 55), ImageExtent(100, 100), beta=1.0)
        assert w.width == pytest.approx(9.0)

    def test_full_width_box_degenerates(self):
        w = context_window(Box(0, 40, 100, 60), ImageExtent(100, 100), beta=3.0)
        assert w.width == 0.0

    def test_centered_on_box_center(self):
        q = Box(40, 20, 50, 40)
        w = context_window(q, ImageExtent(1000, 1000), beta=2.0)
        assert (w.x_min + w.x_max) / 2 == pytest.approx(45.0)
        assert (w.y_min + w.y_max) / 2 == pytest.approx(30.0)

    def test_clipped_to_image(self):
        w = context_window(Box(0, 0, 10, 10), ImageExtent(12, 12), beta=5.0)
        assert w.x_min >= 0 and w.y_min >= 0
        assert w.x_max <= 12 and w.y_max <= 12

    def test_small_box_ratio_approaches_beta(self):
        extent = ImageExtent(1e9, 1e9)
        q = Box(1e6, 1e6, 1e6 + 10, 1e6 + 10)
        for beta in (1.0, 2.0, 3.5):
            w = context_window(q, extent, beta)
            assert w.width / q.width == pytest.approx(beta, rel=1e-6)

    def test_rejects_box_outside_extent(self):
        with pytest.raises(ValueError):
            context_window(Box(0, 0, 20, 20), ImageExtent(10, 10), beta=2.0)

    def test_rejects_nonpositive_beta(self):
        with pytest.raises(ValueError):
            context_window(Box(0, 0, 5, 5), ImageExtent(10, 10), beta=0.0)


class TestEnclosingBox:
    def test_singleton(self):
        assert enclosing_box([Box(0, 0, 10, 10)]) == Box(0, 0, 10, 10)

    def test_two_disjoint(self):
        assert enclosing_box([Box(0, 0, 10, 10), Box(20, 20, 30, 30)]) == Box(0, 0, 30, 30)

    def test_overlapping(self):
        assert enclosing_box([Box(5, 5, 10, 10), Box(0, 0, 8, 8)]) == Box(0, 0, 10, 10)

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            enclosing_box([])

    def test_idempotent(self):
        rng = np.random.default_rng(5)
        boxes = [random_int_box(rng) for _ in range(7)]
        once = enclosing_box(boxes)
        assert enclosing_box([once]) == once


class TestContainedIn:
    def test_strictly_inside(self):
        assert contained_in(Box(1, 1, 2, 2), Box(0, 0, 10, 10))

    def test_identical_boxes_are_contained(self):
        assert contained_in(Box(0, 0, 10, 10), Box(0, 0, 10, 10))

    def test_protruding(self):
        assert not contained_in(Box(9, 9, 11, 11), Box(0, 0, 10, 10))

    def test_shared_edge(self):
        assert contained_in(Box(0, 2, 10, 8), Box(0, 0, 10, 10))
