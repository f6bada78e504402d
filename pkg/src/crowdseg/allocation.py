"""Redundancy allocation: decide which images get extra annotations under a
budget, and turn strategies into budget-versus-diversity curves."""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass
from typing import Mapping, Sequence

from .diversity import AnnotationSet, annotation_diversity, per_annotation_diversity
from .errors import InsufficientAnnotations, MissingScore, PoolTooSmall
from .masks import PixelMask, bounding_box, box_iou, iou

log = logging.getLogger(__name__)

SECONDS_PER_SEGMENTATION = 54.0

REGION = "region"
BOUNDARY = "boundary"


@dataclass(frozen=True)
class AllocationPlan:
    """Budgeted selection of images to receive `extra` redundant annotations."""

    strategy: str
    budget: int
    extra: int
    selected: tuple[str, ...]  # in selection-priority order


@dataclass(frozen=True)
class DiversityCurve:
    strategy: str
    measure: str  # REGION or BOUNDARY
    points: tuple[tuple[float, float], ...]  # (budget_fraction, captured_fraction)
    seeds_used: int = 0


def greedy_allocate(
    scores: Mapping[str, float], budget: int, extra: int, strategy: str = "greedy"
) -> AllocationPlan:
    """Spend the budget on the lowest-scoring (most ambiguous-looking) images."""
    ids = sorted(scores)
    missing = [i for i in ids if scores[i] is None]
    if missing:
        raise MissingScore(f"no score for {missing[:3]}")
    if budget > len(ids):
        log.warning("budget %d exceeds batch size %d; clamping", budget, len(ids))
        budget = len(ids)
    ranked = sorted(ids, key=lambda i: (scores[i], i))
    return AllocationPlan(
        strategy=strategy, budget=budget, extra=extra, selected=tuple(ranked[:budget])
    )


def random_allocate(
    image_ids: Sequence[str], budget: int, seed: int, extra: int = 0
) -> AllocationPlan:
    """Seeded uniform selection without replacement (the status-quo policy)."""
    ids = sorted(image_ids)
    budget = min(budget, len(ids))
    rng = random.Random(seed)
    selected = tuple(rng.sample(ids, budget))
    return AllocationPlan(strategy="status_quo", budget=budget, extra=extra, selected=selected)


def _redundant_diversity(aset: AnnotationSet, extra: int, measure: str) -> float:
    """Sum of the chosen measure over annotation indices 1..extra."""
    if len(aset.masks) < 1 + extra:
        raise InsufficientAnnotations(
            f"{aset.image_id}: need {1 + extra} annotations, have {len(aset.masks)}"
        )
    total = 0.0
    for index in range(1, 1 + extra):
        s = annotation_diversity(aset, index)
        if measure == REGION:
            total += s.region
        elif s.boundary is not None:
            total += s.boundary
    return total


def perfect_allocate(
    sets: Mapping[str, AnnotationSet], budget: int, extra: int, measure: str
) -> AllocationPlan:
    """Hindsight selection: rank images by the true diversity their redundant
    annotations carry, using all collected masks."""
    gains = {i: _redundant_diversity(sets[i], extra, measure) for i in sets}
    ranked = sorted(sets, key=lambda i: (-gains[i], i))
    budget = min(budget, len(ranked))
    return AllocationPlan(
        strategy="perfect", budget=budget, extra=extra, selected=tuple(ranked[:budget])
    )


def wp_simulate(
    pool: AnnotationSet, threshold: float, mode: str
) -> tuple[int, list[PixelMask]]:
    """Agreement-driven collection: take two annotations, then keep consuming
    until mean pairwise similarity reaches the threshold or the pool runs out.

    Similarity is bounding-box IoU in `bb` mode and mask IoU in `seg` mode.
    """
    if mode not in ("bb", "seg"):
        raise ValueError(f"mode must be 'bb' or 'seg', got {mode!r}")
    masks = list(pool.masks)
    if len(masks) < 2:
        raise PoolTooSmall(f"{pool.image_id}: agreement needs >= 2 annotations")

    def similarity(a: PixelMask, b: PixelMask) -> float:
        if mode == "bb":
            return box_iou(bounding_box(a), bounding_box(b))
        return iou(a, b)

    consumed = masks[:2]
    while True:
        pairs = [
            similarity(consumed[i], consumed[j])
            for i in range(len(consumed))
            for j in range(i + 1, len(consumed))
        ]
        if sum(pairs) / len(pairs) >= threshold or len(consumed) == len(masks):
            return len(consumed), consumed
        consumed = masks[: len(consumed) + 1]


@dataclass(frozen=True)
class _PoolDiversity:
    """Per-annotation diversity values for one image, measure-resolved."""

    values: tuple[float, ...]  # index 0 = first annotation
    usable: bool  # False when the boundary measure is undefined (empty reference)


def _pool_diversities(
    sets: Mapping[str, AnnotationSet], measure: str
) -> dict[str, _PoolDiversity]:
    out = {}
    for image_id in sorted(sets):
        scores = per_annotation_diversity(sets[image_id])
        if measure == REGION:
            out[image_id] = _PoolDiversity(
                values=tuple(s.region for s in scores), usable=True
            )
        else:
            usable = scores[0].boundary is not None
            values = tuple((s.boundary or 0.0) for s in scores) if usable else ()
            out[image_id] = _PoolDiversity(values=values, usable=usable)
    return out


def wp_curve(
    sets: Mapping[str, AnnotationSet],
    thresholds: Sequence[float],
    mode: str,
    measure: str,
    strategy: str | None = None,
) -> DiversityCurve:
    """Sweep agreement thresholds into an effort-versus-diversity curve.

    x is the fraction of the maximum redundant-annotation budget consumed
    beyond the mandatory first annotation; y is the consumed annotations'
    diversity relative to consuming every pool entirely.
    """
    points = {}
    for row in wp_sweep_table(sets, thresholds, mode, measure):
        points[row["budget_fraction"]] = row["captured_fraction"]  # dedupe equal costs
    ordered = tuple(sorted(points.items()))
    return DiversityCurve(
        strategy=strategy or f"wp_{mode}", measure=measure, points=ordered
    )


def wp_sweep_table(
    sets: Mapping[str, AnnotationSet],
    thresholds: Sequence[float],
    mode: str,
    measure: str,
) -> list[dict]:
    """Per-threshold consumption table behind :func:`wp_curve` (not deduped)."""
    n = len(sets)
    extra_max = max(len(s.masks) for s in sets.values()) - 1
    pools = _pool_diversities(sets, measure)
    full_total = sum(sum(p.values) for p in pools.values() if p.usable)
    rows = []
    for threshold in sorted(thresholds):
        consumed_total = 0
        captured = 0.0
        for image_id in sorted(sets):
            count, _ = wp_simulate(sets[image_id], threshold, mode)
            consumed_total += count
            pool = pools[image_id]
            if pool.usable:
                captured += sum(pool.values[:count])
        rows.append(
            {
                "threshold": threshold,
                "mode": mode,
                "measure": measure,
                "consumed": consumed_total,
                "budget_fraction": (consumed_total - n) / (n * extra_max),
                "captured_fraction": captured / full_total if full_total > 0 else 0.0,
            }
        )
    return rows


def budget_diversity_curve(
    orderings: Sequence[Sequence[str]],
    sets: Mapping[str, AnnotationSet],
    extra: int,
    measure: str,
    strategy: str,
    seeds_used: int = 0,
) -> DiversityCurve:
    """Captured-diversity fractions for every budget B in 0..N.

    Each ordering lists image ids by redundancy priority; the plan at budget B
    grants `extra` additional annotations to its first B images.  Multiple
    orderings (randomized strategies) are averaged pointwise.
    """
    if not orderings:
        raise ValueError("need at least one priority ordering")
    n = len(sets)
    pools = _pool_diversities(sets, measure)
    for image_id, pool in pools.items():
        if pool.usable and len(pool.values) < 1 + extra:
            raise InsufficientAnnotations(
                f"{image_id}: need {1 + extra} annotations, have {len(pool.values)}"
            )
    base = sum(p.values[0] for p in pools.values() if p.usable)
    gain = {
        i: (sum(pools[i].values[1 : 1 + extra]) if pools[i].usable else 0.0)
        for i in pools
    }
    full_total = base + sum(gain.values())

    captured = [0.0] * (n + 1)
    for ordering in orderings:
        if sorted(ordering) != sorted(sets):
            raise ValueError("ordering must cover exactly the batch's image ids")
        running = base
        captured[0] += running
        for b, image_id in enumerate(ordering, start=1):
            running += gain[image_id]
            captured[b] += running
    k = len(orderings)
    points = tuple(
        (b / n, (captured[b] / k) / full_total if full_total > 0 else 0.0)
        for b in range(n + 1)
    )
    return DiversityCurve(
        strategy=strategy, measure=measure, points=points, seeds_used=seeds_used
    )


def priority_from_scores(scores: Mapping[str, float]) -> list[str]:
    """Full greedy priority ordering (lowest unambiguity score first)."""
    return sorted(scores, key=lambda i: (scores[i], i))


def priority_perfect(sets: Mapping[str, AnnotationSet], extra: int, measure: str) -> list[str]:
    gains = {i: _redundant_diversity(sets[i], extra, measure) for i in sets}
    return sorted(sets, key=lambda i: (-gains[i], i))


def status_quo_orderings(
    image_ids: Sequence[str], seeds: Sequence[int]
) -> list[list[str]]:
    ids = sorted(image_ids)
    orderings = []
    for seed in seeds:
        shuffled = ids[:]
        random.Random(seed).shuffle(shuffled)
        orderings.append(shuffled)
    return orderings


def human_hours_saved(annotations_avoided: int) -> float:
    """Annotation effort avoided, in hours, at 54 seconds per segmentation."""
    if annotations_avoided < 0:
        raise ValueError("avoided annotation count must be >= 0")
    return annotations_avoided * SECONDS_PER_SEGMENTATION / 3600.0
