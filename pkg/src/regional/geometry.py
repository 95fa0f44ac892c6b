"""Axis-aligned box arithmetic on continuous pixel coordinates.

All functions are pure and total on valid inputs, so they are safe to call
from parallel scorers without locking.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence


@dataclass(frozen=True, slots=True)
class Box:
    """Axis-aligned box in corner form, same units as the image."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        if self.x_min > self.x_max or self.y_min > self.y_max:
            raise ValueError(
                f"box corners out of order: ({self.x_min}, {self.y_min}, "
                f"{self.x_max}, {self.y_max})"
            )

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def center(self) -> tuple[float, float]:
        return (self.x_min + self.x_max) / 2.0, (self.y_min + self.y_max) / 2.0

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x_min, self.y_min, self.x_max, self.y_max)


@dataclass(frozen=True, slots=True)
class ImageExtent:
    """Width and height of an image in pixels."""

    width: float
    height: float

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"image extent must be positive: {self.width}x{self.height}")

    @property
    def area(self) -> float:
        return self.width * self.height

    def contains(self, box: Box) -> bool:
        return (
            box.x_min >= 0
            and box.y_min >= 0
            and box.x_max <= self.width
            and box.y_max <= self.height
        )


def intersection_area(a: Box, b: Box) -> float:
    """Area of the overlap between two boxes (0 when disjoint)."""
    iw = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    ih = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if iw <= 0 or ih <= 0:
        return 0.0
    return iw * ih


def iou(a: Box, b: Box) -> float:
    """Intersection over union of two boxes.

    Returns 0 when the union has zero area (both boxes degenerate).
    """
    inter = intersection_area(a, b)
    union = a.area + b.area - inter
    if union <= 0.0:
        return 0.0
    return inter / union


def coverage_fraction(gt: Box, query: Box) -> float:
    """Fraction of ``gt``'s area that lies inside ``query``.

    Raises:
        ValueError: if ``gt`` has zero area (corrupt annotation).
    """
    gt_area = gt.area
    if gt_area <= 0.0:
        raise ValueError(f"ground-truth box has zero area: {gt.as_tuple()}")
    return intersection_area(gt, query) / gt_area


def context_window(q_box: Box, extent: ImageExtent, beta: float) -> Box:
    """Neighborhood box around a query candidate, clipped to the image.

    The window is centered on the center of ``q_box``. Its width is
    ``beta * (1 - bw/iw)**beta * bw`` (height analogous), so it shrinks to
    nothing as the box approaches the full image dimension and approaches
    ``beta`` times the box size for small boxes.
    """
    if beta <= 0:
        raise ValueError(f"beta must be positive, got {beta}")
    if not extent.contains(q_box):
        raise ValueError(f"query box {q_box.as_tuple()} exceeds image extent {extent}")
    ratio_w = q_box.width / extent.width
    ratio_h = q_box.height / extent.height
    window_w = beta * (1.0 - ratio_w) ** beta * q_box.width
    window_h = beta * (1.0 - ratio_h) ** beta * q_box.height
    cx, cy = q_box.center
    return Box(
        max(0.0, cx - window_w / 2.0),
        max(0.0, cy - window_h / 2.0),
        min(extent.width, cx + window_w / 2.0),
        min(extent.height, cy + window_h / 2.0),
    )


def enclosing_box(boxes: Sequence[Box] | Iterable[Box]) -> Box:
    """Smallest axis-aligned box containing every input box."""
    boxes = list(boxes)
    if not boxes:
        raise ValueError("enclosing_box requires at least one box")
    return Box(
        min(b.x_min for b in boxes),
        min(b.y_min for b in boxes),
        max(b.x_max for b in boxes),
        max(b.y_max for b in boxes),
    )


def contained_in(inner: Box, window: Box) -> bool:
    """Closed containment: every coordinate extent of ``inner`` lies in ``window``."""
    return (
        inner.x_min >= window.x_min
        and inner.x_max <= window.x_max
        and inner.y_min >= window.y_min
        and inner.y_max <= window.y_max
    )
