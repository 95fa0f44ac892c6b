"""Synthetic scene generation and a statistical stand-in for the detector.

The generator produces long-tail, cluttered datasets: category counts follow
a Zipf law, per-image object counts a negative binomial, and boxes are placed
uniformly. The simulated detector emits candidate objects whose recall and
class confidence improve with the number of labels each category has
accumulated, which preserves the feedback loop that active learning depends
on without training a network.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from regional.geometry import Box, ImageExtent
from regional.scene import (
    CandidateObject,
    Category,
    GroundTruthObject,
    PoolState,
    SceneDataset,
    SceneImage,
)


@dataclass(frozen=True, slots=True)
class SynthConfig:
    """Knobs for one synthetic regime (cluttered satellite-ish vs curated)."""

    n_images: int = 1000
    image_size: float = 512.0
    n_categories: int = 35
    zipf_exponent: float = 2.45
    clutter_mean: float = 20.6
    clutter_dispersion: float = 0.4
    box_scale_range: tuple[float, float] = (0.02, 0.2)
    feature_dim: int = 48
    prototype_noise_sigma: float = 0.25
    seed: int = 7

    def __post_init__(self):
        lo, hi = self.box_scale_range
        if not (0 < lo <= hi <= 1):
            raise ValueError(f"box_scale_range must satisfy 0 < min <= max <= 1, got {self.box_scale_range}")
        if self.n_images < 1 or self.n_categories < 1:
            raise ValueError("need at least one image and one category")
        if self.zipf_exponent < 0 or self.clutter_mean <= 0 or self.clutter_dispersion <= 0:
            raise ValueError("zipf_exponent must be >= 0, clutter mean/dispersion positive")
        if self.prototype_noise_sigma < 0:
            raise ValueError("prototype_noise_sigma must be >= 0")


@dataclass(frozen=True, slots=True)
class DetectorConfig:
    """Noise model standing in for a trained detector.

    Recall and class-confidence sharpening grow with each category's labeled
    count, so labeling progress feeds back into later splits. Feature noise
    and dimension mirror the generator's prototype settings; the harness
    copies them over for synthetic runs.
    """

    recall_base: float = 0.45
    recall_per_label_gain: float = 0.004
    precision_base: float = 0.8
    box_jitter_sigma: float = 0.05
    confusion_temperature: float = 1.5
    labeledness_noise: float = 0.05
    feature_dim: int = 48
    prototype_noise_sigma: float = 0.25
    seed: int = 0

    def __post_init__(self):
        if not (0 <= self.recall_base <= 1 and 0 < self.precision_base <= 1):
            raise ValueError("recall_base in [0,1] and precision_base in (0,1] required")
        if self.confusion_temperature <= 0:
            raise ValueError("confusion_temperature must be positive")
        if self.box_jitter_sigma < 0 or self.labeledness_noise < 0:
            raise ValueError("noise sigmas must be >= 0")


@lru_cache(maxsize=8)
def category_prototypes(n: int, dim: int) -> np.ndarray:
    """(n, dim) mutually well-separated unit vectors, deterministic in (n, dim).

    Orthonormal when the dimension allows; otherwise a greedy farthest-point
    pick over a fixed random pool. Both the generator and the simulated
    detector derive prototypes from this function, so they agree without
    shared state.
    """
    rng = np.random.default_rng(20240 + 31 * n + dim)
    if dim >= n:
        gauss = rng.standard_normal((dim, n))
        q, r = np.linalg.qr(gauss)
        # fix signs so the decomposition is unique
        q = q * np.sign(np.diag(r))
        return np.ascontiguousarray(q.T)
    pool = rng.standard_normal((max(4096, 64 * n), dim))
    pool /= np.linalg.norm(pool, axis=1, keepdims=True)
    chosen = [0]
    max_sim = np.abs(pool @ pool[0])
    for _ in range(n - 1):
        nxt = int(np.argmin(max_sim))
        chosen.append(nxt)
        max_sim = np.maximum(max_sim, np.abs(pool @ pool[nxt]))
    return np.ascontiguousarray(pool[chosen])


def zipf_weights(n_categories: int, exponent: float) -> np.ndarray:
    ranks = np.arange(1, n_categories + 1, dtype=np.float64)
    weights = ranks ** (-exponent)
    return weights / weights.sum()


def generate_dataset(cfg: SynthConfig) -> SceneDataset:
    """Draw a synthetic dataset; deterministic for a fixed config seed."""
    lo, hi = cfg.box_scale_range
    mean_box_frac = ((lo + hi) / 2.0) ** 2
    if cfg.clutter_mean * mean_box_frac > 5.0:
        warnings.warn(
            f"expected box area sums to {cfg.clutter_mean * mean_box_frac:.1f}x the "
            "image; scenes will be heavily overlapped",
            stacklevel=2,
        )

    rng = np.random.default_rng(cfg.seed)
    r = cfg.clutter_dispersion
    counts = rng.negative_binomial(r, r / (r + cfg.clutter_mean), size=cfg.n_images)
    total = int(counts.sum())
    weights = zipf_weights(cfg.n_categories, cfg.zipf_exponent)
    cats = rng.choice(cfg.n_categories, size=total, p=weights)

    size = cfg.image_size
    w = rng.uniform(lo, hi, size=total) * size
    h = rng.uniform(lo, hi, size=total) * size
    x0 = rng.uniform(0.0, size - w)
    y0 = rng.uniform(0.0, size - h)

    extent = ImageExtent(size, size)
    images = []
    gts = []
    gt_id = 0
    offsets = np.concatenate(([0], np.cumsum(counts)))
    for img_id in range(cfg.n_images):
        start, stop = offsets[img_id], offsets[img_id + 1]
        ids = []
        for k in range(start, stop):
            gts.append(
                GroundTruthObject(
                    id=gt_id,
                    image_id=img_id,
                    category_id=int(cats[k]),
                    box=Box(float(x0[k]), float(y0[k]), float(x0[k] + w[k]), float(y0[k] + h[k])),
                )
            )
            ids.append(gt_id)
            gt_id += 1
        images.append(SceneImage(id=img_id, extent=extent, gt_ids=tuple(ids)))

    categories = [Category(i, f"category_{i:02d}") for i in range(cfg.n_categories)]
    return SceneDataset(categories, images, gts)


def _jitter_boxes(boxes: np.ndarray, sigma: float, width: float, height: float,
                  rng: np.random.Generator) -> np.ndarray:
    """Gaussian corner jitter scaled by box size, clipped to the image."""
    if sigma == 0.0:
        return boxes.copy()
    bw = (boxes[:, 2] - boxes[:, 0])[:, None]
    bh = (boxes[:, 3] - boxes[:, 1])[:, None]
    noise = rng.standard_normal(boxes.shape) * sigma
    out = boxes + noise * np.hstack([bw, bh, bw, bh])
    x_lo = np.minimum(out[:, 0], out[:, 2])
    x_hi = np.maximum(out[:, 0], out[:, 2])
    y_lo = np.minimum(out[:, 1], out[:, 3])
    y_hi = np.maximum(out[:, 1], out[:, 3])
    x_lo = np.clip(x_lo, 0.0, width)
    x_hi = np.clip(x_hi, 0.0, width)
    y_lo = np.clip(y_lo, 0.0, height)
    y_hi = np.clip(y_hi, 0.0, height)
    # keep a sliver of area when clipping or jitter collapsed a side
    eps = 1e-3
    x_lo = np.minimum(x_lo, width - eps)
    y_lo = np.minimum(y_lo, height - eps)
    x_hi = np.maximum(x_hi, x_lo + eps)
    y_hi = np.maximum(y_hi, y_lo + eps)
    return np.column_stack([x_lo, y_lo, np.minimum(x_hi, width), np.minimum(y_hi, height)])


def _softmax_rows(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    expd = np.exp(shifted)
    return expd / expd.sum(axis=1, keepdims=True)


def simulate_detections(
    dataset: SceneDataset,
    pool: PoolState,
    cfg: DetectorConfig,
    split_index: int,
) -> list[CandidateObject]:
    """Emit candidate objects for all images that are not fully labeled.

    Each ground-truth object is detected with probability
    min(1, recall_base + recall_per_label_gain * labeled_count(category)).
    Detected boxes are jittered, features are noisy category prototypes, and
    class probabilities are a softmax over prototype similarities sharpened
    by per-category labeled counts. False positives carry background-prototype
    features, are placed away from ground truth (IoU < 0.25), and arrive at a
    rate that keeps precision near ``precision_base``. Labeledness is high for
    candidates matching unlabeled ground truth and low for already-labeled
    ones.

    Deterministic given (cfg.seed, split_index): every image draws from its
    own substream keyed by image id.
    """
    n_cats = len(dataset.categories)
    cat_ids = np.array([c.id for c in dataset.categories], dtype=np.int64)
    cat_pos = {int(cid): i for i, cid in enumerate(cat_ids)}
    labeled_counts = np.array(
        [pool.labeled_per_category.get(int(cid), 0) for cid in cat_ids], dtype=np.float64
    )
    recall = np.minimum(1.0, cfg.recall_base + cfg.recall_per_label_gain * labeled_counts)
    sharpness = 1.0 + np.log1p(labeled_counts)
    protos = category_prototypes(n_cats + 1, cfg.feature_dim)
    class_protos = protos[:n_cats]
    background_proto = protos[n_cats]
    fp_rate = (1.0 - cfg.precision_base) / cfg.precision_base

    candidates: list[CandidateObject] = []
    next_id = 0
    for image_id in sorted(pool.active_image_ids()):
        img = dataset.images[image_id]
        if not img.gt_ids:
            continue
        rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, split_index, image_id]))
        gts = [dataset.gts[gid] for gid in img.gt_ids]
        gt_boxes = np.array([g.box.as_tuple() for g in gts], dtype=np.float64)
        gt_cat_pos = np.array([cat_pos[g.category_id] for g in gts], dtype=np.int64)
        detected = rng.random(len(gts)) < recall[gt_cat_pos]
        det_idx = np.nonzero(detected)[0]

        width, height = img.extent.width, img.extent.height
        boxes = _jitter_boxes(gt_boxes[det_idx], cfg.box_jitter_sigma, width, height, rng)
        feats = class_protos[gt_cat_pos[det_idx]] + (
            rng.standard_normal((len(det_idx), cfg.feature_dim)) * cfg.prototype_noise_sigma
        )
        lab_base = np.array([0.0 if gts[i].labeled else 1.0 for i in det_idx])

        n_fp = int(rng.poisson(len(det_idx) * fp_rate)) if fp_rate > 0 else 0
        fp_boxes = []
        for _ in range(n_fp):
            template = gt_boxes[int(rng.integers(len(gts)))]
            tw, th = template[2] - template[0], template[3] - template[1]
            for _attempt in range(20):
                fx = rng.uniform(0.0, max(width - tw, 1e-3))
                fy = rng.uniform(0.0, max(height - th, 1e-3))
                fp = np.array([fx, fy, min(fx + tw, width), min(fy + th, height)])
                overlaps = _iou_one_vs_many(fp, gt_boxes)
                if overlaps.max() < 0.25:
                    fp_boxes.append(fp)
                    break
        if fp_boxes:
            fp_arr = np.array(fp_boxes)
            fp_feats = background_proto + (
                rng.standard_normal((len(fp_boxes), cfg.feature_dim)) * cfg.prototype_noise_sigma
            )
            boxes = np.vstack([boxes, fp_arr]) if len(boxes) else fp_arr
            feats = np.vstack([feats, fp_feats]) if len(feats) else fp_feats
            lab_base = np.concatenate([lab_base, np.ones(len(fp_boxes))])

        if len(boxes) == 0:
            continue
        norms = np.linalg.norm(feats, axis=1, keepdims=True)
        feats = feats / np.maximum(norms, 1e-12)
        logits = (feats @ class_protos.T) * sharpness / cfg.confusion_temperature
        probs = _softmax_rows(logits)
        labeledness = lab_base
        if cfg.labeledness_noise > 0:
            labeledness = lab_base + rng.standard_normal(len(lab_base)) * cfg.labeledness_noise
        labeledness = np.clip(labeledness, 0.0, 1.0)

        for k in range(len(boxes)):
            candidates.append(
                CandidateObject(
                    id=next_id,
                    image_id=image_id,
                    box=Box(*(float(v) for v in boxes[k])),
                    class_probs=probs[k],
                    feature=feats[k],
                    labeledness=float(labeledness[k]),
                )
            )
            next_id += 1
    return candidates


def _iou_one_vs_many(box: np.ndarray, others: np.ndarray) -> np.ndarray:
    ix = np.minimum(box[2], others[:, 2]) - np.maximum(box[0], others[:, 0])
    iy = np.minimum(box[3], others[:, 3]) - np.maximum(box[1], others[:, 1])
    inter = np.clip(ix, 0.0, None) * np.clip(iy, 0.0, None)
    area = (box[2] - box[0]) * (box[3] - box[1])
    other_areas = (others[:, 2] - others[:, 0]) * (others[:, 3] - others[:, 1])
    union = area + other_areas - inter
    return np.where(union > 0, inter / union, 0.0)


def xview_like(n_images: int = 4000, seed: int = 7) -> SynthConfig:
    """Cluttered, heavily imbalanced satellite-tile regime."""
    return SynthConfig(
        n_images=n_images,
        image_size=512.0,
        n_categories=35,
        zipf_exponent=2.45,
        clutter_mean=20.6,
        clutter_dispersion=0.4,
        box_scale_range=(0.02, 0.2),
        feature_dim=48,
        prototype_noise_sigma=0.25,
        seed=seed,
    )


def coco_like(n_images: int = 3000, seed: int = 11) -> SynthConfig:
    """Curated low-clutter, mildly imbalanced benchmark regime."""
    return SynthConfig(
        n_images=n_images,
        image_size=640.0,
        n_categories=35,
        zipf_exponent=1.0,
        clutter_mean=7.7,
        clutter_dispersion=10.0,
        box_scale_range=(0.05, 0.4),
        feature_dim=48,
        prototype_noise_sigma=0.25,
        seed=seed,
    )


def detector_for(synth: SynthConfig, seed: int, curated: bool = False) -> DetectorConfig:
    """Detector noise model matched to a synthetic regime."""
    return DetectorConfig(
        recall_base=0.55 if curated else 0.45,
        recall_per_label_gain=0.004,
        precision_base=0.95 if curated else 0.8,
        box_jitter_sigma=0.03 if curated else 0.05,
        confusion_temperature=1.5,
        labeledness_noise=0.05,
        feature_dim=synth.feature_dim,
        prototype_noise_sigma=synth.prototype_noise_sigma,
        seed=seed,
    )
