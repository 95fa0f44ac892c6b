"""Pure numpy implementations of the hot selection kernels.

Mirrors ``regional.kernels._native`` exactly; see that module's docstrings
for the array contracts. Boxes are (n, 4) float64 arrays in corner form,
features are (n, d) float64 rows.
"""

from __future__ import annotations

import numpy as np


def iou_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise IoU between the rows of ``a`` (n, 4) and ``b`` (m, 4)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    ix = np.minimum(a[:, None, 2], b[None, :, 2]) - np.maximum(a[:, None, 0], b[None, :, 0])
    iy = np.minimum(a[:, None, 3], b[None, :, 3]) - np.maximum(a[:, None, 1], b[None, :, 1])
    inter = np.clip(ix, 0.0, None) * np.clip(iy, 0.0, None)
    area_a = (a[:, 2] - a[:, 0]) * (a[:, 3] - a[:, 1])
    area_b = (b[:, 2] - b[:, 0]) * (b[:, 3] - b[:, 1])
    union = area_a[:, None] + area_b[None, :] - inter
    out = np.zeros_like(inter)
    np.divide(inter, union, out=out, where=union > 0)
    return out


def coverage_matrix(gt: np.ndarray, queries: np.ndarray) -> np.ndarray:
    """Fraction of each gt row's area covered by each query row, (n, m)."""
    gt = np.asarray(gt, dtype=np.float64)
    queries = np.asarray(queries, dtype=np.float64)
    ix = np.minimum(gt[:, None, 2], queries[None, :, 2]) - np.maximum(gt[:, None, 0], queries[None, :, 0])
    iy = np.minimum(gt[:, None, 3], queries[None, :, 3]) - np.maximum(gt[:, None, 1], queries[None, :, 1])
    inter = np.clip(ix, 0.0, None) * np.clip(iy, 0.0, None)
    gt_area = (gt[:, 2] - gt[:, 0]) * (gt[:, 3] - gt[:, 1])
    return inter / gt_area[:, None]


def build_regions(
    boxes: np.ndarray,
    feats: np.ndarray,
    width: float,
    height: float,
    alpha: float,
    beta: float,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Region membership for every candidate of one image taken as query.

    For query i the member list holds the indices j != i whose box is fully
    inside i's context window and whose cosine similarity to i is < alpha
    (the query itself is implicit). Weights are 1 - cos(i, j).

    Returns (indptr, indices, weights) in CSR layout, indptr of length n+1.
    """
    boxes = np.ascontiguousarray(boxes, dtype=np.float64)
    feats = np.ascontiguousarray(feats, dtype=np.float64)
    n = boxes.shape[0]
    if n == 0:
        return (np.zeros(1, dtype=np.int64), np.zeros(0, dtype=np.int64),
                np.zeros(0, dtype=np.float64))

    bw = boxes[:, 2] - boxes[:, 0]
    bh = boxes[:, 3] - boxes[:, 1]
    cx = (boxes[:, 0] + boxes[:, 2]) / 2.0
    cy = (boxes[:, 1] + boxes[:, 3]) / 2.0
    ww = beta * (1.0 - bw / width) ** beta * bw
    wh = beta * (1.0 - bh / height) ** beta * bh
    wx0 = np.maximum(0.0, cx - ww / 2.0)
    wy0 = np.maximum(0.0, cy - wh / 2.0)
    wx1 = np.minimum(width, cx + ww / 2.0)
    wy1 = np.minimum(height, cy + wh / 2.0)

    # inside[i, j]: box j fully inside query i's window
    inside = (
        (boxes[None, :, 0] >= wx0[:, None])
        & (boxes[None, :, 2] <= wx1[:, None])
        & (boxes[None, :, 1] >= wy0[:, None])
        & (boxes[None, :, 3] <= wy1[:, None])
    )
    sims = feats @ feats.T
    member = inside & (sims < alpha)
    np.fill_diagonal(member, False)

    counts = member.sum(axis=1)
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    rows, cols = np.nonzero(member)
    return indptr, cols.astype(np.int64), 1.0 - sims[rows, cols]


def region_scores(
    indptr: np.ndarray,
    indices: np.ndarray,
    weights: np.ndarray,
    psi: np.ndarray,
) -> np.ndarray:
    """Initial score per region: psi[i] + sum over members of psi[j] * w."""
    n = len(indptr) - 1
    if len(indices) == 0:
        return psi.astype(np.float64, copy=True)
    contrib = psi[indices] * weights
    rows = np.repeat(np.arange(n), np.diff(indptr))
    return psi + np.bincount(rows, weights=contrib, minlength=n)


def consume_update(
    scores: np.ndarray,
    rev_indptr: np.ndarray,
    rev_regions: np.ndarray,
    rev_weights: np.ndarray,
    psi: np.ndarray,
    consumed: np.ndarray,
) -> None:
    """Subtract consumed members' contributions from their regions, in place.

    ``rev_*`` is the CSR transpose of the membership: for member j,
    rev_regions[rev_indptr[j]:rev_indptr[j+1]] lists the regions that contain
    j and rev_weights the matching 1 - cos weights.
    """
    for j in consumed:
        lo, hi = rev_indptr[j], rev_indptr[j + 1]
        if lo == hi:
            continue
        rows = rev_regions[lo:hi]
        np.subtract.at(scores, rows, psi[j] * rev_weights[lo:hi])
