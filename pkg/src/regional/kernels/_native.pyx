# cython: language_level=3
"""Compiled selection kernels.

Same contracts as ``regional.kernels._numpy``: boxes are (n, 4) float64
corner-form arrays, features (n, d) float64 rows, CSR membership uses int64
index arrays.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def iou_matrix(double[:, ::1] a not None, double[:, ::1] b not None):
    cdef Py_ssize_t n = a.shape[0], m = b.shape[0], i, j
    cdef double ix, iy, inter, union_, area_a
    out_arr = np.zeros((n, m), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    for i in range(n):
        area_a = (a[i, 2] - a[i, 0]) * (a[i, 3] - a[i, 1])
        for j in range(m):
            ix = min(a[i, 2], b[j, 2]) - max(a[i, 0], b[j, 0])
            iy = min(a[i, 3], b[j, 3]) - max(a[i, 1], b[j, 1])
            inter = (ix if ix > 0 else 0.0) * (iy if iy > 0 else 0.0)
            union_ = area_a + (b[j, 2] - b[j, 0]) * (b[j, 3] - b[j, 1]) - inter
            if union_ > 0:
                out[i, j] = inter / union_
    return out_arr


def coverage_matrix(double[:, ::1] gt not None, double[:, ::1] queries not None):
    cdef Py_ssize_t n = gt.shape[0], m = queries.shape[0], i, j
    cdef double ix, iy, inter, gt_area
    out_arr = np.zeros((n, m), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    for i in range(n):
        gt_area = (gt[i, 2] - gt[i, 0]) * (gt[i, 3] - gt[i, 1])
        for j in range(m):
            ix = min(gt[i, 2], queries[j, 2]) - max(gt[i, 0], queries[j, 0])
            iy = min(gt[i, 3], queries[j, 3]) - max(gt[i, 1], queries[j, 1])
            inter = (ix if ix > 0 else 0.0) * (iy if iy > 0 else 0.0)
            out[i, j] = inter / gt_area
    return out_arr


def build_regions(double[:, ::1] boxes not None, double[:, ::1] feats not None,
                  double width, double height, double alpha, double beta):
    cdef Py_ssize_t n = boxes.shape[0], d = feats.shape[1], i, j, k, pos
    indptr_arr = np.zeros(n + 1, dtype=np.int64)
    if n == 0:
        return indptr_arr, np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.float64)

    cdef double[::1] wx0 = np.empty(n), wy0 = np.empty(n)
    cdef double[::1] wx1 = np.empty(n), wy1 = np.empty(n)
    cdef double bw, bh, cx, cy, ww, wh, sim
    for i in range(n):
        bw = boxes[i, 2] - boxes[i, 0]
        bh = boxes[i, 3] - boxes[i, 1]
        cx = (boxes[i, 0] + boxes[i, 2]) / 2.0
        cy = (boxes[i, 1] + boxes[i, 3]) / 2.0
        ww = beta * (1.0 - bw / width) ** beta * bw
        wh = beta * (1.0 - bh / height) ** beta * bh
        wx0[i] = max(0.0, cx - ww / 2.0)
        wy0[i] = max(0.0, cy - wh / 2.0)
        wx1[i] = min(width, cx + ww / 2.0)
        wy1[i] = min(height, cy + wh / 2.0)

    sims_arr = np.asarray(feats) @ np.asarray(feats).T
    cdef double[:, ::1] sims = np.ascontiguousarray(sims_arr)

    cdef cnp.int64_t[::1] indptr = indptr_arr
    # first pass: counts
    for i in range(n):
        k = 0
        for j in range(n):
            if j == i:
                continue
            if (boxes[j, 0] >= wx0[i] and boxes[j, 2] <= wx1[i]
                    and boxes[j, 1] >= wy0[i] and boxes[j, 3] <= wy1[i]
                    and sims[i, j] < alpha):
                k += 1
        indptr[i + 1] = indptr[i] + k

    indices_arr = np.empty(indptr_arr[n], dtype=np.int64)
    weights_arr = np.empty(indptr_arr[n], dtype=np.float64)
    cdef cnp.int64_t[::1] indices = indices_arr
    cdef double[::1] weights = weights_arr
    for i in range(n):
        pos = indptr[i]
        for j in range(n):
            if j == i:
                continue
            if (boxes[j, 0] >= wx0[i] and boxes[j, 2] <= wx1[i]
                    and boxes[j, 1] >= wy0[i] and boxes[j, 3] <= wy1[i]
                    and sims[i, j] < alpha):
                indices[pos] = j
                weights[pos] = 1.0 - sims[i, j]
                pos += 1
    return indptr_arr, indices_arr, weights_arr


def region_scores(cnp.int64_t[::1] indptr not None, cnp.int64_t[::1] indices not None,
                  double[::1] weights not None, double[::1] psi not None):
    cdef Py_ssize_t n = indptr.shape[0] - 1, i, p
    cdef double acc
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    for i in range(n):
        acc = psi[i]
        for p in range(indptr[i], indptr[i + 1]):
            acc += psi[indices[p]] * weights[p]
        out[i] = acc
    return out_arr


def consume_update(double[::1] scores not None, cnp.int64_t[::1] rev_indptr not None,
                   cnp.int64_t[::1] rev_regions not None, double[::1] rev_weights not None,
                   double[::1] psi not None, cnp.int64_t[::1] consumed not None):
    cdef Py_ssize_t i, p
    cdef cnp.int64_t j
    for i in range(consumed.shape[0]):
        j = consumed[i]
        for p in range(rev_indptr[j], rev_indptr[j + 1]):
            scores[rev_regions[p]] -= psi[j] * rev_weights[p]
