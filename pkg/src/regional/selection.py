"""Acquisition strategies: image-level, object-level, and region-level.

The region-level strategy builds, for every candidate taken as a query, the
set of dissimilar neighbors inside its context window, then greedily selects
the highest-scoring region. Selector classes keep per-split state so that the
greedy repeat loop can consume candidates and re-score incrementally; the
module-level ``select_*`` functions are thin single-pick wrappers over them.

Regions are built once per split from fresh detections; consumption only
filters members afterwards, it never re-derives context windows.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from regional import kernels
from regional.geometry import Box, ImageExtent, contained_in, context_window, enclosing_box
from regional.informativeness import MethodKind, cosine_similarity
from regional.oracle import IOU_MATCH_THRESHOLD
from regional.scene import CandidateObject, PoolState


class Approach(enum.Enum):
    IMAGE_LEVEL = "image"
    OBJECT_LEVEL = "object"
    REGION_LEVEL = "real"


# Which scoring methods each approach supports. Model-free random needs whole
# images; model-random needs detections; dmal is region/object-level only.
ALLOWED_METHODS: dict[Approach, frozenset[MethodKind]] = {
    Approach.IMAGE_LEVEL: frozenset({MethodKind.MAX_ENT, MethodKind.RANDOM}),
    Approach.OBJECT_LEVEL: frozenset({MethodKind.MAX_ENT, MethodKind.MODEL_RAND, MethodKind.DMAL}),
    Approach.REGION_LEVEL: frozenset({MethodKind.MAX_ENT, MethodKind.MODEL_RAND, MethodKind.DMAL}),
}


def check_pairing(approach: Approach, method: MethodKind) -> None:
    if method not in ALLOWED_METHODS[approach]:
        allowed = ", ".join(sorted(m.value for m in ALLOWED_METHODS[approach]))
        raise ValueError(
            f"method '{method.value}' is not valid with the {approach.value} approach "
            f"(allowed: {allowed})"
        )


@dataclass(frozen=True, slots=True)
class SelectionParams:
    """Strategy knobs shared by the selectors."""

    alpha: float = 0.5
    beta: float = 3.0
    budget: int = 1
    approach: Approach = Approach.REGION_LEVEL
    method: MethodKind = MethodKind.MAX_ENT

    def __post_init__(self):
        if not -1.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [-1, 1], got {self.alpha}")
        if self.beta <= 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if self.budget < 1:
            raise ValueError(f"budget must be >= 1, got {self.budget}")
        check_pairing(self.approach, self.method)


@dataclass(frozen=True, slots=True)
class Region:
    """A query candidate plus its admitted dissimilar neighbors."""

    query_id: int
    member_ids: frozenset[int]
    bounds: Box
    image_id: int
    score: float = float("nan")


def build_region(
    query: CandidateObject,
    all_candidates: Iterable[CandidateObject],
    extent: ImageExtent,
    params: SelectionParams,
) -> Region:
    """Build the region around one query from its image's candidates.

    Neighbors are unconsumed same-image candidates fully inside the query's
    context window; those with cosine similarity below alpha are admitted.
    """
    window = context_window(query.box, extent, params.beta)
    member_ids = {query.id}
    member_boxes = [query.box]
    for cand in all_candidates:
        if cand.id == query.id or cand.image_id != query.image_id or cand.consumed:
            continue
        if not contained_in(cand.box, window):
            continue
        if cosine_similarity(query.feature, cand.feature) < params.alpha:
            member_ids.add(cand.id)
            member_boxes.append(cand.box)
    return Region(
        query_id=query.id,
        member_ids=frozenset(member_ids),
        bounds=enclosing_box(member_boxes),
        image_id=query.image_id,
    )


def region_score(
    region: Region,
    psi: Callable[[CandidateObject], float],
    candidates: Mapping[int, CandidateObject],
) -> float:
    """Accumulated informativeness: psi(q) + sum of psi(n) * (1 - cos(q, n))."""
    query = candidates[region.query_id]
    total = psi(query)
    for member_id in region.member_ids:
        if member_id == region.query_id:
            continue
        neighbor = candidates[member_id]
        total += psi(neighbor) * (1.0 - cosine_similarity(query.feature, neighbor.feature))
    return total


class CandidateIndex:
    """Array views over an id-sorted candidate list, grouped by image."""

    def __init__(self, candidates: Sequence[CandidateObject]):
        self.candidates = sorted(candidates, key=lambda c: c.id)
        ids = [c.id for c in self.candidates]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate candidate ids")
        self.ids = np.array(ids, dtype=np.int64)
        self.position_by_id = {cid: pos for pos, cid in enumerate(ids)}
        self.boxes = np.array(
            [c.box.as_tuple() for c in self.candidates], dtype=np.float64
        ).reshape(len(ids), 4)
        self.image_ids = np.array([c.image_id for c in self.candidates], dtype=np.int64)
        self.positions_by_image: dict[int, np.ndarray] = {}
        for pos, cand in enumerate(self.candidates):
            self.positions_by_image.setdefault(cand.image_id, []).append(pos)  # type: ignore[arg-type]
        self.positions_by_image = {
            img: np.array(pos_list, dtype=np.int64)
            for img, pos_list in self.positions_by_image.items()
        }

    def __len__(self) -> int:
        return len(self.candidates)

    def unit_features(self) -> np.ndarray:
        feats = np.array([c.feature for c in self.candidates], dtype=np.float64)
        norms = np.linalg.norm(feats, axis=1, keepdims=True)
        if np.any(norms == 0):
            bad = self.ids[np.nonzero(norms[:, 0] == 0)[0][0]]
            raise ValueError(f"candidate {bad} has a zero feature vector")
        return feats / norms

    def overlapping_positions(
        self, image_id: int, gt_boxes: Sequence[Box], threshold: float
    ) -> np.ndarray:
        """Positions of the image's candidates with IoU >= threshold to any box."""
        positions = self.positions_by_image.get(image_id)
        if positions is None or not gt_boxes:
            return np.zeros(0, dtype=np.int64)
        gt_arr = np.array([b.as_tuple() for b in gt_boxes], dtype=np.float64).reshape(-1, 4)
        overlaps = kernels.iou_matrix(self.boxes[positions], gt_arr)
        hit = (overlaps >= threshold).any(axis=1)
        return positions[hit]


class ObjectLevelSelector:
    """Greedy picker of the highest-psi unconsumed candidate."""

    def __init__(self, candidates: Sequence[CandidateObject], psi: np.ndarray):
        self.index = CandidateIndex(candidates)
        order = np.argsort([c.id for c in candidates], kind="stable")
        self.psi = np.asarray(psi, dtype=np.float64)[order]
        self.scores = self.psi.copy()
        self.alive = np.ones(len(self.index), dtype=bool)
        pre = [c.id for c in self.index.candidates if c.consumed]
        if pre:
            self.mark_consumed(pre)

    @property
    def exhausted(self) -> bool:
        return not bool(self.alive.any())

    def next_query(self) -> CandidateObject | None:
        if self.exhausted:
            return None
        pos = int(np.argmax(self.scores))
        return self.index.candidates[pos]

    def mark_consumed(self, candidate_ids: Iterable[int]) -> None:
        for cid in candidate_ids:
            pos = self.index.position_by_id.get(cid)
            if pos is None or not self.alive[pos]:
                continue
            self.alive[pos] = False
            self.scores[pos] = -np.inf
            self.index.candidates[pos].consumed = True

    def consume_resolved(self, image_id: int, labeled_boxes: Sequence[Box]) -> None:
        """Consume candidates overlapping freshly labeled ground truth."""
        hits = self.index.overlapping_positions(image_id, labeled_boxes, IOU_MATCH_THRESHOLD)
        self.mark_consumed(self.index.ids[hits].tolist())


class RegionLevelSelector:
    """Region builder plus greedy argmax with incremental consume/re-score."""

    def __init__(
        self,
        candidates: Sequence[CandidateObject],
        psi: np.ndarray,
        extents: Mapping[int, ImageExtent],
        params: SelectionParams,
    ):
        self.index = CandidateIndex(candidates)
        self.params = params
        order = np.argsort([c.id for c in candidates], kind="stable")
        self.psi = np.asarray(psi, dtype=np.float64)[order]
        feats = self.index.unit_features()
        n = len(self.index)

        # Region membership, built per image in local indices and stitched
        # into one global CSR over candidate positions.
        indptr = np.zeros(n + 1, dtype=np.int64)
        index_chunks: list[np.ndarray] = []
        weight_chunks: list[np.ndarray] = []
        for image_id in sorted(self.index.positions_by_image):
            positions = self.index.positions_by_image[image_id]
            extent = extents[image_id]
            local_indptr, local_indices, local_weights = kernels.build_regions(
                np.ascontiguousarray(self.index.boxes[positions]),
                np.ascontiguousarray(feats[positions]),
                float(extent.width),
                float(extent.height),
                params.alpha,
                params.beta,
            )
            counts = np.diff(local_indptr)
            indptr[positions + 1] = counts
            for row, (lo, hi) in enumerate(zip(local_indptr[:-1], local_indptr[1:])):
                if hi > lo:
                    index_chunks.append((positions[local_indices[lo:hi]], positions[row]))  # type: ignore[arg-type]
                    weight_chunks.append(local_weights[lo:hi])
        np.cumsum(indptr, out=indptr)
        self.indptr = indptr

        if index_chunks:
            # chunks were appended in (image, row) order; reorder to global row order
            rows = np.concatenate([np.full(len(w), row) for (_, row), w in zip(index_chunks, weight_chunks)])
            members = np.concatenate([chunk for chunk, _ in index_chunks])
            weights = np.concatenate(weight_chunks)
            order2 = np.argsort(rows, kind="stable")
            self.indices = members[order2].astype(np.int64)
            self.weights = weights[order2]
        else:
            self.indices = np.zeros(0, dtype=np.int64)
            self.weights = np.zeros(0, dtype=np.float64)

        # reverse CSR: member position -> rows of regions containing it
        rev_counts = np.bincount(self.indices, minlength=n)
        self.rev_indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(rev_counts, out=self.rev_indptr[1:])
        region_rows = np.repeat(np.arange(n, dtype=np.int64), np.diff(self.indptr))
        by_member = np.argsort(self.indices, kind="stable")
        self.rev_regions = region_rows[by_member]
        self.rev_weights = self.weights[by_member]

        self.scores = kernels.region_scores(self.indptr, self.indices, self.weights, self.psi)
        self.alive = np.ones(n, dtype=bool)
        pre = [c.id for c in self.index.candidates if c.consumed]
        if pre:
            self.mark_consumed(pre)

    @property
    def exhausted(self) -> bool:
        return not bool(self.alive.any())

    def next_query(self) -> Region | None:
        if self.exhausted:
            return None
        pos = int(np.argmax(self.scores))
        return self._materialize(pos)

    def _materialize(self, pos: int) -> Region:
        lo, hi = self.indptr[pos], self.indptr[pos + 1]
        member_pos = self.indices[lo:hi]
        member_pos = member_pos[self.alive[member_pos]]
        all_pos = np.concatenate(([pos], member_pos))
        boxes = self.index.boxes[all_pos]
        bounds = Box(
            float(boxes[:, 0].min()),
            float(boxes[:, 1].min()),
            float(boxes[:, 2].max()),
            float(boxes[:, 3].max()),
        )
        return Region(
            query_id=int(self.index.ids[pos]),
            member_ids=frozenset(int(i) for i in self.index.ids[all_pos]),
            bounds=bounds,
            image_id=int(self.index.image_ids[pos]),
            score=float(self.scores[pos]),
        )

    def mark_consumed(self, candidate_ids: Iterable[int]) -> None:
        fresh = []
        for cid in candidate_ids:
            pos = self.index.position_by_id.get(cid)
            if pos is None or not self.alive[pos]:
                continue
            self.alive[pos] = False
            self.index.candidates[pos].consumed = True
            fresh.append(pos)
        if not fresh:
            return
        consumed = np.array(fresh, dtype=np.int64)
        kernels.consume_update(
            self.scores, self.rev_indptr, self.rev_regions, self.rev_weights, self.psi, consumed
        )
        self.scores[consumed] = -np.inf

    def consume_resolved(self, image_id: int, labeled_boxes: Sequence[Box]) -> None:
        """Consume candidates overlapping freshly labeled ground truth."""
        hits = self.index.overlapping_positions(image_id, labeled_boxes, IOU_MATCH_THRESHOLD)
        self.mark_consumed(self.index.ids[hits].tolist())


class ImageLevelSelector:
    """Whole-image picker over the unlabeled image set.

    MaxEnt ranks images by the mean candidate score; images with no
    detections score -inf so they are only drawn once scored images run out.
    The random method ignores scores and draws a uniform order instead.
    """

    def __init__(
        self,
        eligible_image_ids: Iterable[int],
        scores_by_image: Mapping[int, Sequence[float]],
        method: MethodKind,
        rng: np.random.Generator | None = None,
    ):
        self.image_ids = sorted(eligible_image_ids)
        self._pos_by_id = {img: i for i, img in enumerate(self.image_ids)}
        self.method = method
        if method is MethodKind.RANDOM:
            if rng is None:
                raise ValueError("random image selection needs a random stream")
            self._order = [self.image_ids[i] for i in rng.permutation(len(self.image_ids))]
            self._cursor = 0
        else:
            self._scores = np.array(
                [
                    float(np.mean(scores_by_image[img])) if len(scores_by_image.get(img, ())) else -np.inf
                    for img in self.image_ids
                ],
                dtype=np.float64,
            )
            self._remaining = np.ones(len(self.image_ids), dtype=bool)

    @property
    def exhausted(self) -> bool:
        if self.method is MethodKind.RANDOM:
            return self._cursor >= len(self._order)
        return not bool(self._remaining.any())

    def next_query(self) -> int | None:
        if self.exhausted:
            return None
        if self.method is MethodKind.RANDOM:
            return self._order[self._cursor]
        masked = np.where(self._remaining, self._scores, -np.inf)
        # all-(-inf) rows still resolve to the lowest remaining image id
        pos = int(np.argmax(masked))
        if not self._remaining[pos]:
            pos = int(np.nonzero(self._remaining)[0][0])
        return self.image_ids[pos]

    def mark_queried(self, image_id: int) -> None:
        if self.method is MethodKind.RANDOM:
            if self._order[self._cursor] != image_id:
                raise ValueError("random image order consumed out of sequence")
            self._cursor += 1
        else:
            self._remaining[self._pos_by_id[image_id]] = False


def select_object_level(
    candidates: Sequence[CandidateObject], psi: np.ndarray, params: SelectionParams
) -> CandidateObject:
    """Single highest-psi unconsumed candidate (ties by lowest id)."""
    selector = ObjectLevelSelector(candidates, psi)
    pick = selector.next_query()
    if pick is None:
        raise LookupError("no unconsumed candidates remain (split exhausted)")
    return pick


def select_region_level(
    candidates: Sequence[CandidateObject],
    psi: np.ndarray,
    extents: Mapping[int, ImageExtent],
    params: SelectionParams,
) -> Region:
    """Best region over every unconsumed candidate as query (ties by lowest id)."""
    selector = RegionLevelSelector(candidates, psi, extents, params)
    pick = selector.next_query()
    if pick is None:
        raise LookupError("no unconsumed candidates remain (split exhausted)")
    return pick


def select_image_level(
    pool: PoolState,
    scores_by_image: Mapping[int, Sequence[float]],
    params: SelectionParams,
    rng: np.random.Generator | None = None,
) -> int:
    """Unlabeled image with the best mean candidate score (or a random one)."""
    selector = ImageLevelSelector(pool.unlabeled_image_ids, scores_by_image, params.method, rng)
    pick = selector.next_query()
    if pick is None:
        raise LookupError("no unlabeled images remain (split exhausted)")
    return pick
