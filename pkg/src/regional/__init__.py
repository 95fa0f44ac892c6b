"""Detector-agnostic active-learning selection engine.

Provides image-level, object-level, and region-level acquisition over
detector predictions, a simulated oracle with audited budget accounting,
synthetic cluttered/imbalanced scene generation, and a multi-split
experiment harness.
"""

__version__ = "0.1.0"

from regional.geometry import Box, ImageExtent
from regional.informativeness import MethodKind
from regional.scene import CandidateObject, PoolState, SceneDataset
from regional.selection import Approach, Region, SelectionParams

__all__ = [
    "Approach",
    "Box",
    "CandidateObject",
    "ImageExtent",
    "MethodKind",
    "PoolState",
    "Region",
    "SceneDataset",
    "SelectionParams",
    "__version__",
]
