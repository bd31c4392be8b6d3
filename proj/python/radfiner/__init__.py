"""Python access to the radfiner core: ball query, refinement and metrics."""

from ._radfiner import (
    CLASS_NAMES,
    DataError,
    ball_query,
    ball_query_reference,
    generate_scene,
    panoptic_quality,
    refine_instances,
)

__all__ = [
    "CLASS_NAMES",
    "DataError",
    "ball_query",
    "ball_query_reference",
    "generate_scene",
    "panoptic_quality",
    "refine_instances",
]
