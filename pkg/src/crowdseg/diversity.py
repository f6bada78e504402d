"""Segmentation diversity: how far annotations sit from their majority reference.

Two measures are supported.  The region measure is one minus a weighted
F-measure between annotation and reference; the boundary measure is a
symmetric mean Chamfer distance between their boundaries.  Batch totals sum
the first annotation's diversity over all images plus the redundant
annotations' diversity over the images selected by an allocation plan.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy import ndimage

from .errors import (
    DimensionMismatch,
    EmptyMask,
    EmptyReference,
    IndexOutOfRange,
    InsufficientAnnotations,
)
from .masks import PixelMask, boundary_coords, majority_reference

# Weighted F-measure constants: 7x7 Gaussian dependency window with sigma 5,
# and a background-importance decay reaching 0.5 at distance 5.
_WINDOW_RADIUS = 3
_WINDOW_SIGMA = 5.0
_BG_DECAY = math.log(0.5) / 5.0

_CHUNK = 4096  # rows per block in pairwise-distance sweeps


def _gaussian_kernel() -> np.ndarray:
    span = np.arange(-_WINDOW_RADIUS, _WINDOW_RADIUS + 1)
    g = np.exp(-(span[:, None] ** 2 + span[None, :] ** 2) / (2 * _WINDOW_SIGMA**2))
    return g / g.sum()


_KERNEL = _gaussian_kernel()


def _nearest_foreground(fg: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Exact nearest-foreground assignment for every background pixel.

    Returns (bg_coords, distances, nearest_fg_coords).  Squared distances are
    compared in integers, and ties resolve to the first foreground pixel in
    row-major order, so results are bit-reproducible.
    """
    fg_yx = np.argwhere(fg).astype(np.int64)
    bg_yx = np.argwhere(~fg).astype(np.int64)
    if bg_yx.size == 0:
        return bg_yx, np.zeros(0), fg_yx[:0]
    best_d2 = np.empty(len(bg_yx), dtype=np.int64)
    best_ix = np.empty(len(bg_yx), dtype=np.int64)
    for start in range(0, len(bg_yx), _CHUNK):
        block = bg_yx[start : start + _CHUNK]
        d2 = (block[:, 0:1] - fg_yx[None, :, 0]) ** 2 + (
            block[:, 1:2] - fg_yx[None, :, 1]
        ) ** 2
        ix = d2.argmin(axis=1)  # first minimum = row-major-first foreground pixel
        best_ix[start : start + _CHUNK] = ix
        best_d2[start : start + _CHUNK] = d2[np.arange(len(block)), ix]
    return bg_yx, np.sqrt(best_d2.astype(float)), fg_yx[best_ix]


def weighted_fmeasure(candidate: PixelMask, reference: PixelMask) -> float:
    """Region similarity of a candidate mask to a non-empty reference, in [0, 1].

    The absolute error map is first made boundary-aware: background errors are
    copied from the nearest reference-foreground pixel, foreground errors are
    smoothed by a truncated Gaussian window (renormalised where the window
    leaves the image) and floored against the raw error.  Background errors
    are then emphasised by how far they fall from the object, and the
    resulting weighted true positives, false positives and false negatives
    combine into a balanced F-score.  Equals 1 exactly iff the masks match.
    """
    if candidate.pixels.shape != reference.pixels.shape:
        raise DimensionMismatch("candidate and reference dimensions differ")
    fg = reference.pixels
    if not fg.any():
        raise EmptyReference("reference mask has no foreground")

    err = (candidate.pixels != fg).astype(float)
    bg_yx, bg_dist, nearest = _nearest_foreground(fg)

    # copy each background error from its nearest foreground pixel before
    # smoothing, so fully-wrong masks cannot leak credit across the boundary
    propagated = err.copy()
    if len(bg_yx):
        propagated[bg_yx[:, 0], bg_yx[:, 1]] = err[nearest[:, 0], nearest[:, 1]]
    window_num = ndimage.convolve(propagated, _KERNEL, mode="constant", cval=0.0)
    window_den = ndimage.convolve(
        np.ones_like(propagated), _KERNEL, mode="constant", cval=0.0
    )
    smoothed = window_num / window_den

    weighted_err = err.copy()
    weighted_err[fg] = np.minimum(err[fg], smoothed[fg])

    importance = np.ones_like(err)
    if len(bg_yx):
        importance[bg_yx[:, 0], bg_yx[:, 1]] = 2.0 - np.exp(_BG_DECAY * bg_dist)

    cost = weighted_err * importance
    tp = float(np.sum(1.0 - cost[fg]))
    fp = float(np.sum(cost[~fg]))
    fn = float(np.sum(cost[fg]))

    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def region_diversity(annotation: PixelMask, reference: PixelMask) -> float:
    """1 - weighted F-measure; with an empty reference, 1 unless the annotation
    is empty too (then 0)."""
    if reference.is_empty():
        return 0.0 if annotation.is_empty() else 1.0
    return 1.0 - weighted_fmeasure(annotation, reference)


def _directed_mean_distance(src: np.ndarray, dst: np.ndarray) -> float:
    """Mean over src boundary pixels of the nearest Euclidean distance to dst."""
    total = 0.0
    for start in range(0, len(src), _CHUNK):
        block = src[start : start + _CHUNK]
        d2 = (block[:, 0:1] - dst[None, :, 0]) ** 2 + (block[:, 1:2] - dst[None, :, 1]) ** 2
        total += float(np.sqrt(d2.min(axis=1).astype(float)).sum())
    return total / len(src)


def chamfer_distance(a: PixelMask, b: PixelMask) -> float:
    """Symmetric mean boundary distance in pixels; 0 iff boundaries coincide."""
    if a.pixels.shape != b.pixels.shape:
        raise DimensionMismatch("mask dimensions differ")
    if a.is_empty() or b.is_empty():
        raise EmptyMask("chamfer distance needs two non-empty masks")
    ba = boundary_coords(a).astype(np.int64)
    bb = boundary_coords(b).astype(np.int64)
    return 0.5 * (_directed_mean_distance(ba, bb) + _directed_mean_distance(bb, ba))


@dataclass(frozen=True)
class DiversityScore:
    """Per-annotation diversity; boundary is None when the image's reference
    is empty (no strict-majority pixel), excluding it from boundary totals."""

    region: float
    boundary: float | None


class AnnotationSet:
    """Ordered annotations for one image plus their majority-vote reference."""

    __slots__ = ("image_id", "masks", "reference", "_scores")

    def __init__(self, image_id: str, masks: Sequence[PixelMask]):
        masks = tuple(masks)
        self.image_id = image_id
        self.masks = masks
        self.reference = majority_reference(masks)
        self._scores: tuple[DiversityScore, ...] | None = None

    def __len__(self) -> int:
        return len(self.masks)

    def with_mask(self, mask: PixelMask) -> "AnnotationSet":
        """New set with one more annotation; the reference is recomputed."""
        return AnnotationSet(self.image_id, self.masks + (mask,))


def _score_one(aset: AnnotationSet, index: int) -> DiversityScore:
    mask = aset.masks[index]
    if aset.reference.is_empty():
        return DiversityScore(region=region_diversity(mask, aset.reference), boundary=None)
    return DiversityScore(
        region=region_diversity(mask, aset.reference),
        boundary=chamfer_distance(mask, aset.reference),
    )


def annotation_diversity(aset: AnnotationSet, index: int) -> DiversityScore:
    """Diversity of the annotation at `index` against the set's reference."""
    if not 0 <= index < len(aset.masks):
        raise IndexOutOfRange(f"annotation index {index} out of range")
    if aset._scores is None:
        aset._scores = tuple(_score_one(aset, i) for i in range(len(aset.masks)))
    return aset._scores[index]


def per_annotation_diversity(aset: AnnotationSet) -> list[DiversityScore]:
    return [annotation_diversity(aset, i) for i in range(len(aset.masks))]


@dataclass(frozen=True)
class BatchDiversity:
    """Region and boundary totals for a batch under one allocation plan."""

    per_image: dict[str, list[DiversityScore]]
    total_region: float
    total_boundary: float


def batch_total_diversity(sets: Mapping[str, AnnotationSet], plan) -> BatchDiversity:
    """Total diversity: first annotations everywhere, plus `plan.extra`
    redundant annotations on the plan's selected images."""
    selected = set(plan.selected)
    per_image: dict[str, list[DiversityScore]] = {}
    total_region = 0.0
    total_boundary = 0.0
    for image_id in sorted(sets):
        aset = sets[image_id]
        wanted = 1 + (plan.extra if image_id in selected else 0)
        if len(aset.masks) < wanted:
            raise InsufficientAnnotations(
                f"{image_id}: plan needs {wanted} annotations, pool has {len(aset.masks)}"
            )
        scores = [annotation_diversity(aset, i) for i in range(wanted)]
        per_image[image_id] = scores
        total_region += sum(s.region for s in scores)
        if scores[0].boundary is not None:
            total_boundary += sum(s.boundary for s in scores)
    return BatchDiversity(
        per_image=per_image, total_region=total_region, total_boundary=total_boundary
    )
