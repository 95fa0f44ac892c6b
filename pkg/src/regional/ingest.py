"""Reading and writing datasets, detection dumps, and interaction logs.

Ground truth travels as a single JSON document with ``images``,
``annotations`` and ``categories`` arrays (bbox as [x, y, width, height],
matching the common benchmark schema, so real tiled annotation files drop
in). Detections travel as line-delimited JSON records. Features are stored
as 32-bit floats on disk; similarity math happens in 64-bit.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from regional.geometry import Box, ImageExtent
from regional.oracle import BudgetLedger
from regional.scene import (
    CandidateObject,
    Category,
    GroundTruthObject,
    SceneDataset,
    SceneImage,
)

PROB_SUM_TOLERANCE = 1e-6


class IngestError(ValueError):
    """Malformed or inconsistent input file; the message names the record."""


def _bbox_to_corners(bbox, record: str) -> tuple[float, float, float, float]:
    if len(bbox) != 4:
        raise IngestError(f"{record}: bbox must be [x, y, width, height], got {bbox}")
    x, y, w, h = (float(v) for v in bbox)
    if w <= 0 or h <= 0:
        raise IngestError(f"{record}: nonpositive bbox dimensions {w}x{h}")
    return x, y, x + w, y + h


def load_ground_truth(path: str | Path) -> SceneDataset:
    """Parse a ground-truth file into a dataset, validating referential integrity."""
    path = Path(path)
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise IngestError(f"{path}: not valid JSON ({exc})") from None

    for key in ("images", "annotations", "categories"):
        if key not in doc:
            raise IngestError(f"{path}: missing '{key}' array")

    images = []
    for rec in doc["images"]:
        try:
            images.append(SceneImage(int(rec["id"]), ImageExtent(float(rec["width"]), float(rec["height"]))))
        except (KeyError, ValueError, TypeError) as exc:
            raise IngestError(f"{path}: bad image record {rec!r} ({exc})") from None

    categories = []
    for rec in doc["categories"]:
        try:
            categories.append(Category(int(rec["id"]), str(rec["name"])))
        except (KeyError, ValueError, TypeError) as exc:
            raise IngestError(f"{path}: bad category record {rec!r} ({exc})") from None

    gts = []
    for rec in doc["annotations"]:
        try:
            ann_id = int(rec["id"])
            corners = _bbox_to_corners(rec["bbox"], f"annotation {rec.get('id')}")
            gts.append(
                GroundTruthObject(
                    id=ann_id,
                    image_id=int(rec["image_id"]),
                    category_id=int(rec["category_id"]),
                    box=Box(*corners),
                )
            )
        except IngestError:
            raise
        except (KeyError, ValueError, TypeError) as exc:
            raise IngestError(f"{path}: bad annotation record {rec!r} ({exc})") from None

    try:
        return SceneDataset(categories, images, gts)
    except ValueError as exc:
        raise IngestError(f"{path}: {exc}") from None


def write_dataset(dataset: SceneDataset, path: str | Path) -> None:
    """Write a dataset in the ground-truth format; round-trips losslessly."""
    doc = {
        "images": [
            {"id": img.id, "width": img.extent.width, "height": img.extent.height}
            for img in sorted(dataset.images.values(), key=lambda i: i.id)
        ],
        "annotations": [
            {
                "id": gt.id,
                "image_id": gt.image_id,
                "category_id": gt.category_id,
                "bbox": [gt.box.x_min, gt.box.y_min, gt.box.width, gt.box.height],
            }
            for gt in sorted(dataset.gts.values(), key=lambda g: g.id)
        ],
        "categories": [{"id": c.id, "name": c.name} for c in dataset.categories],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_detections(path: str | Path, dataset: SceneDataset) -> list[CandidateObject]:
    """Parse a line-delimited detection dump against a loaded dataset.

    Candidate ids are assigned by line number. Class probability vectors may
    be off by at most 1e-6 and are renormalized; features must share one
    dimension across the file. Boxes are clipped to their image extent.
    """
    path = Path(path)
    n_cats = len(dataset.categories)
    candidates = []
    feature_dim: int | None = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise IngestError(f"{path}:{lineno}: not valid JSON ({exc})") from None
            try:
                image_id = int(rec["image_id"])
                bbox = rec["bbox"]
                probs = np.asarray(rec["class_probs"], dtype=np.float64)
                feature = np.asarray(rec["feature"], dtype=np.float64)
            except (KeyError, TypeError, ValueError) as exc:
                raise IngestError(f"{path}:{lineno}: bad record ({exc})") from None

            image = dataset.images.get(image_id)
            if image is None:
                raise IngestError(f"{path}:{lineno}: unknown image id {image_id}")
            if probs.ndim != 1 or len(probs) != n_cats:
                raise IngestError(
                    f"{path}:{lineno}: class_probs has {probs.size} entries, expected {n_cats}"
                )
            total = float(probs.sum())
            if abs(total - 1.0) > PROB_SUM_TOLERANCE or float(probs.min()) < -PROB_SUM_TOLERANCE:
                raise IngestError(f"{path}:{lineno}: class_probs off the simplex (sum={total!r})")
            probs = probs / total
            if feature_dim is None:
                feature_dim = len(feature)
            elif len(feature) != feature_dim:
                raise IngestError(
                    f"{path}:{lineno}: feature length {len(feature)} != {feature_dim} seen earlier"
                )

            x0, y0, x1, y1 = _bbox_to_corners(bbox, f"{path}:{lineno}")
            box = Box(
                min(max(x0, 0.0), image.extent.width),
                min(max(y0, 0.0), image.extent.height),
                min(max(x1, 0.0), image.extent.width),
                min(max(y1, 0.0), image.extent.height),
            )
            labeledness = rec.get("labeledness")
            cand = CandidateObject(
                id=lineno - 1,
                image_id=image_id,
                box=box,
                class_probs=probs,
                feature=feature,
                labeledness=None if labeledness is None else float(labeledness),
            )
            try:
                cand.validate()
            except ValueError as exc:
                raise IngestError(f"{path}:{lineno}: {exc}") from None
            candidates.append(cand)
    return candidates


def write_detections(candidates: Iterable[CandidateObject], path: str | Path) -> None:
    """Write candidates as a detection dump (features quantized to float32)."""
    with open(path, "w") as fh:
        for cand in candidates:
            rec = {
                "image_id": cand.image_id,
                "bbox": [cand.box.x_min, cand.box.y_min, cand.box.width, cand.box.height],
                "class_probs": [float(p) for p in cand.class_probs],
                "feature": [float(np.float32(v)) for v in cand.feature],
            }
            if cand.labeledness is not None:
                rec["labeledness"] = cand.labeledness
            fh.write(json.dumps(rec))
            fh.write("\n")


def write_interactions(ledger: BudgetLedger, path: str | Path) -> None:
    """Write a ledger as line-delimited records plus a final summary record."""
    with open(path, "w") as fh:
        for resp in ledger.interactions:
            rec = {
                "kind": resp.query_kind.value,
                "image_id": resp.image_id,
                "returned_gt_ids": sorted(resp.returned_gt_ids),
                "budget_consumed": resp.budget_consumed,
                "query_area": resp.query_area,
            }
            fh.write(json.dumps(rec))
            fh.write("\n")
        summary = {
            "summary": {
                "budget": ledger.budget,
                "labels_applied": ledger.labels_applied,
                "background_queries": ledger.background_queries,
                "interactions": len(ledger.interactions),
            }
        }
        fh.write(json.dumps(summary))
        fh.write("\n")
