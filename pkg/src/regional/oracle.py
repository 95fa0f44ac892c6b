"""Simulated labeling oracle and the audited budget ledger.

The oracle answers image, object, and region queries against ground truth.
It is perfect but cost-accounted: every interaction is logged, and zero-yield
object/region queries are charged one budget unit as background interactions.
The oracle never sees predicted categories, so its outcomes are blind to the
query's class probabilities.
"""

from __future__ import annotations

import enum
from collections import Counter
from dataclasses import dataclass, field

from regional.geometry import Box, coverage_fraction, iou
from regional.scene import SceneDataset, SceneImage

IOU_MATCH_THRESHOLD = 0.25
COVERAGE_MATCH_THRESHOLD = 0.25


class QueryKind(enum.Enum):
    IMAGE = "image"
    OBJECT = "object"
    REGION = "region"


@dataclass(frozen=True, slots=True)
class OracleResponse:
    """Outcome of one oracle interaction.

    ``budget_consumed`` equals the number of labels returned, except for
    zero-yield object/region queries which are charged one background unit.
    """

    returned_gt_ids: frozenset[int]
    query_kind: QueryKind
    query_area: float
    budget_consumed: int
    image_id: int

    @property
    def is_background(self) -> bool:
        return not self.returned_gt_ids


def _background_charge(kind: QueryKind) -> int:
    return 0 if kind is QueryKind.IMAGE else 1


def _response(kind: QueryKind, gt_ids: set[int], area: float, image_id: int) -> OracleResponse:
    consumed = len(gt_ids) if gt_ids else _background_charge(kind)
    return OracleResponse(frozenset(gt_ids), kind, area, consumed, image_id)


def oracle_object_query(query_box: Box, image: SceneImage, dataset: SceneDataset) -> OracleResponse:
    """Label the unlabeled ground-truth box best matching the query.

    Among unlabeled annotations of the image with IoU >= 0.25 against the
    query box, the single highest-IoU one is returned (ties broken by lowest
    annotation id), regardless of any predicted category. No match means a
    background interaction charged one unit.
    """
    best_id: int | None = None
    best_iou = 0.0
    for gid in image.gt_ids:
        gt = dataset.gts[gid]
        if gt.labeled:
            continue
        overlap = iou(gt.box, query_box)
        if overlap >= IOU_MATCH_THRESHOLD and overlap > best_iou:
            best_iou = overlap
            best_id = gid
    matched = {best_id} if best_id is not None else set()
    return _response(QueryKind.OBJECT, matched, query_box.area, image.id)


def oracle_region_query(region_bounds: Box, image: SceneImage, dataset: SceneDataset) -> OracleResponse:
    """Label every unlabeled ground truth at least 25% covered by the region."""
    matched = set()
    for gid in image.gt_ids:
        gt = dataset.gts[gid]
        if gt.labeled:
            continue
        if coverage_fraction(gt.box, region_bounds) >= COVERAGE_MATCH_THRESHOLD:
            matched.add(gid)
    return _response(QueryKind.REGION, matched, region_bounds.area, image.id)


def oracle_image_query(image: SceneImage, dataset: SceneDataset) -> OracleResponse:
    """Exhaustively label an image; charged per label returned.

    An annotation-free image yields an empty response at zero charge (the
    interaction is still logged for the query-area metric). Querying an image
    whose annotations are all labeled already signals a selection bug.
    """
    unlabeled = {gid for gid in image.gt_ids if not dataset.gts[gid].labeled}
    if image.gt_ids and not unlabeled:
        raise ValueError(f"image {image.id} is already fully labeled")
    return OracleResponse(
        frozenset(unlabeled), QueryKind.IMAGE, image.extent.area, len(unlabeled), image.id
    )


@dataclass(slots=True)
class BudgetLedger:
    """Append-only record of oracle interactions for one split.

    A split is complete once labels plus background charges reach the budget.
    A multi-label response arriving at the boundary is honored in full, so the
    recorded total may overshoot; reported metrics use actual totals.
    """

    budget: int
    labels_applied: int = 0
    background_queries: int = 0
    interactions: list[OracleResponse] = field(default_factory=list)
    per_category_labels: Counter = field(default_factory=Counter)

    def __post_init__(self):
        if self.budget < 1:
            raise ValueError(f"budget must be >= 1, got {self.budget}")

    @property
    def consumed(self) -> int:
        return self.labels_applied + self.background_queries

    @property
    def complete(self) -> bool:
        return self.consumed >= self.budget

    def charge(self, response: OracleResponse, dataset: SceneDataset) -> bool:
        """Record one interaction; returns True when the split budget is done."""
        if self.complete:
            raise RuntimeError("charging a completed ledger (harness bug)")
        self.interactions.append(response)
        if response.returned_gt_ids:
            self.labels_applied += len(response.returned_gt_ids)
            for gid in response.returned_gt_ids:
                self.per_category_labels[dataset.gts[gid].category_id] += 1
        else:
            self.background_queries += _background_charge(response.query_kind)
        return self.complete


def charge(ledger: BudgetLedger, response: OracleResponse, dataset: SceneDataset) -> bool:
    """Module-level convenience wrapper around :meth:`BudgetLedger.charge`."""
    return ledger.charge(response, dataset)
