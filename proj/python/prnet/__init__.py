"""Pairwise relational face recognition: python face of the C++ core."""

from ._core import (
    NumericalError,
    ValidationError,
    aggregate,
    align,
    enumerate_pairs,
    face_template,
    gradcheck,
    identify,
    landmark_subset,
    pairwise_loss,
    roi_project,
    triplet_ratio_loss,
    verify_pairs,
)

__all__ = [
    "NumericalError",
    "ValidationError",
    "aggregate",
    "align",
    "enumerate_pairs",
    "face_template",
    "gradcheck",
    "identify",
    "landmark_subset",
    "pairwise_loss",
    "roi_project",
    "triplet_ratio_loss",
    "verify_pairs",
]
