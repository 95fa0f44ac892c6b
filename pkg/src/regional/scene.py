"""Dataset model and label-pool bookkeeping.

A :class:`SceneDataset` owns images, ground-truth annotations, and category
metadata. Label state lives on the annotations; :class:`PoolState` partitions
the images by label completeness and is kept in sync incrementally by
:func:`apply_labels`.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from regional.geometry import Box, ImageExtent
from regional.informativeness import SIMPLEX_TOLERANCE


@dataclass(frozen=True, slots=True)
class Category:
    id: int
    name: str
    instance_count: int = 0


@dataclass(slots=True)
class GroundTruthObject:
    id: int
    image_id: int
    category_id: int
    box: Box
    labeled: bool = False


@dataclass(frozen=True, slots=True)
class SceneImage:
    id: int
    extent: ImageExtent
    gt_ids: tuple[int, ...] = ()


@dataclass(slots=True)
class CandidateObject:
    """One detector prediction: box, class probabilities, feature embedding.

    ``labeledness`` is the optional score of a head that predicts whether the
    object is already in the labeled pool. ``consumed`` flips to True once an
    oracle interaction has resolved the candidate's area and never reverts.
    """

    id: int
    image_id: int
    box: Box
    class_probs: np.ndarray
    feature: np.ndarray
    labeledness: float | None = None
    consumed: bool = False

    def validate(self) -> None:
        total = float(np.sum(self.class_probs))
        if abs(total - 1.0) > SIMPLEX_TOLERANCE or float(np.min(self.class_probs)) < -SIMPLEX_TOLERANCE:
            raise ValueError(f"candidate {self.id}: class_probs off the simplex (sum={total!r})")
        if self.labeledness is not None and not 0.0 <= self.labeledness <= 1.0:
            raise ValueError(f"candidate {self.id}: labeledness {self.labeledness} outside [0, 1]")


class SceneDataset:
    """Images with ground-truth annotations and category metadata."""

    def __init__(
        self,
        categories: Sequence[Category],
        images: Sequence[SceneImage],
        gts: Sequence[GroundTruthObject],
    ):
        if not images:
            raise ValueError("dataset has no images")
        self.images: dict[int, SceneImage] = {}
        for img in images:
            if img.id in self.images:
                raise ValueError(f"duplicate image id {img.id}")
            self.images[img.id] = img
        self.gts: dict[int, GroundTruthObject] = {}
        for gt in gts:
            if gt.id in self.gts:
                raise ValueError(f"duplicate annotation id {gt.id}")
            if gt.image_id not in self.images:
                raise ValueError(f"annotation {gt.id} references missing image {gt.image_id}")
            if gt.box.area <= 0:
                raise ValueError(f"annotation {gt.id} has a zero-area box")
            self.gts[gt.id] = gt

        counts = Counter(gt.category_id for gt in gts)
        by_id = {c.id: c for c in categories}
        if len(by_id) != len(categories):
            raise ValueError("duplicate category ids")
        for cat_id in counts:
            if cat_id not in by_id:
                raise ValueError(f"annotation references missing category {cat_id}")
        self.categories: list[Category] = [
            Category(c.id, c.name, counts.get(c.id, 0)) for c in sorted(categories, key=lambda c: c.id)
        ]

        # per-image and per-category annotation indexes
        by_image: dict[int, list[int]] = {img_id: [] for img_id in self.images}
        by_category: dict[int, list[int]] = {c.id: [] for c in self.categories}
        for gt in gts:
            by_image[gt.image_id].append(gt.id)
            by_category[gt.category_id].append(gt.id)
        for img in images:
            declared = set(img.gt_ids)
            actual = set(by_image[img.id])
            if declared and declared != actual:
                raise ValueError(f"image {img.id} gt_ids disagree with annotations")
        # rebuild images so gt_ids are always populated and sorted
        self.images = {
            img.id: SceneImage(img.id, img.extent, tuple(sorted(by_image[img.id])))
            for img in images
        }
        self.gt_ids_by_category: dict[int, list[int]] = {
            cat_id: sorted(ids) for cat_id, ids in by_category.items()
        }

    @property
    def image_ids(self) -> list[int]:
        return sorted(self.images)

    @property
    def total_instances(self) -> int:
        return len(self.gts)

    def category_by_id(self, cat_id: int) -> Category:
        for c in self.categories:
            if c.id == cat_id:
                return c
        raise KeyError(cat_id)

    def image_gts(self, image_id: int) -> list[GroundTruthObject]:
        return [self.gts[gid] for gid in self.images[image_id].gt_ids]

    def labeled_counts_by_category(self) -> Counter:
        """Full recount of labeled annotations per category."""
        counts: Counter = Counter()
        for gt in self.gts.values():
            if gt.labeled:
                counts[gt.category_id] += 1
        return counts


@dataclass(slots=True)
class PoolState:
    """Partition of images into unlabeled / partially / fully labeled.

    Images with no annotations sit in the unlabeled set until an exhaustive
    query resolves them; such images are tracked in ``exhausted_image_ids``
    and counted as fully labeled from then on.
    """

    unlabeled_image_ids: set[int] = field(default_factory=set)
    partial_image_ids: set[int] = field(default_factory=set)
    full_image_ids: set[int] = field(default_factory=set)
    labeled_gt_ids: set[int] = field(default_factory=set)
    exhausted_image_ids: set[int] = field(default_factory=set)
    labeled_per_category: Counter = field(default_factory=Counter)

    @classmethod
    def from_dataset(cls, dataset: SceneDataset, exhausted: Iterable[int] = ()) -> "PoolState":
        """Recompute the full partition from annotation label flags."""
        pool = cls(exhausted_image_ids=set(exhausted))
        for gt in dataset.gts.values():
            if gt.labeled:
                pool.labeled_gt_ids.add(gt.id)
                pool.labeled_per_category[gt.category_id] += 1
        for img in dataset.images.values():
            pool._classify(img, dataset)
        return pool

    def _classify(self, img: SceneImage, dataset: SceneDataset) -> None:
        self.unlabeled_image_ids.discard(img.id)
        self.partial_image_ids.discard(img.id)
        self.full_image_ids.discard(img.id)
        n_total = len(img.gt_ids)
        if n_total == 0:
            if img.id in self.exhausted_image_ids:
                self.full_image_ids.add(img.id)
            else:
                self.unlabeled_image_ids.add(img.id)
            return
        n_labeled = sum(1 for gid in img.gt_ids if dataset.gts[gid].labeled)
        if n_labeled == 0:
            self.unlabeled_image_ids.add(img.id)
        elif n_labeled == n_total:
            self.full_image_ids.add(img.id)
        else:
            self.partial_image_ids.add(img.id)

    def mark_image_exhausted(self, image_id: int, dataset: SceneDataset) -> None:
        """Record that an annotation-free image was exhaustively queried."""
        self.exhausted_image_ids.add(image_id)
        self._classify(dataset.images[image_id], dataset)

    def active_image_ids(self) -> set[int]:
        """Images the detector should still look at (not fully labeled)."""
        return self.unlabeled_image_ids | self.partial_image_ids


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def initial_pool_quota(n_instances: int, p: float, k: int, floor_at_one: bool = True) -> int:
    """Closed-form per-category sample size: min(max(round(p*n/100), 1), k)."""
    if n_instances <= 0:
        return 0
    quota = round_half_up(p * n_instances / 100.0)
    if floor_at_one:
        quota = max(quota, 1)
    return min(quota, k)


def sample_initial_pool(
    dataset: SceneDataset,
    p: float,
    k: int,
    seed: int,
    floor_at_one: bool = True,
) -> PoolState:
    """Label a uniform per-category sample of annotations and build the pool.

    For each category with n instances, exactly min(round(p*n/100), k)
    annotations are marked labeled, lifted to at least 1 when
    ``floor_at_one`` (so rare categories are never absent from the initial
    pool). Marks the sampled annotations on ``dataset`` in place.

    Deterministic for a fixed seed.
    """
    if not 0 < p <= 100:
        raise ValueError(f"p must be in (0, 100], got {p}")
    if k < 1:
        raise ValueError(f"cap k must be >= 1, got {k}")
    if not dataset.gts:
        raise ValueError("cannot sample an initial pool from a dataset with no annotations")
    rng = np.random.default_rng(seed)
    for cat in dataset.categories:
        ids = dataset.gt_ids_by_category.get(cat.id, [])
        quota = initial_pool_quota(len(ids), p, k, floor_at_one)
        if quota == 0:
            continue
        chosen = rng.choice(np.array(ids, dtype=np.int64), size=quota, replace=False)
        for gid in chosen:
            dataset.gts[int(gid)].labeled = True
    return PoolState.from_dataset(dataset)


def apply_labels(pool: PoolState, gt_ids: Iterable[int], dataset: SceneDataset) -> PoolState:
    """Mark annotations labeled and update the pool partition incrementally.

    Idempotent for already-labeled ids. Raises KeyError for unknown ids,
    which signals a harness bug rather than bad data.
    """
    touched_images: set[int] = set()
    for gid in gt_ids:
        gt = dataset.gts.get(gid)
        if gt is None:
            raise KeyError(f"unknown annotation id {gid}")
        if gt.labeled:
            continue
        gt.labeled = True
        pool.labeled_gt_ids.add(gid)
        pool.labeled_per_category[gt.category_id] += 1
        touched_images.add(gt.image_id)
    for image_id in touched_images:
        pool._classify(dataset.images[image_id], dataset)
    return pool
