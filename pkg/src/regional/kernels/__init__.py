"""Hot-loop kernels with a compiled core and a numpy fallback.

The compiled extension is preferred when present; set ``REGIONAL_PURE_PYTHON=1``
to force the numpy backend (used by the benchmark and CI sanity runs).
"""

import os

if os.environ.get("REGIONAL_PURE_PYTHON"):
    from regional.kernels import _numpy as _impl

    BACKEND = "numpy"
else:
    try:
        from regional.kernels import _native as _impl  # type: ignore[attr-defined]

        BACKEND = "native"
    except ImportError:
        from regional.kernels import _numpy as _impl

        BACKEND = "numpy"

iou_matrix = _impl.iou_matrix
coverage_matrix = _impl.coverage_matrix
build_regions = _impl.build_regions
region_scores = _impl.region_scores
consume_update = _impl.consume_update

__all__ = [
    "BACKEND",
    "iou_matrix",
    "coverage_matrix",
    "build_regions",
    "region_scores",
    "consume_update",
]
