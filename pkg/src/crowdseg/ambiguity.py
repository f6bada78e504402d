"""Per-image ambiguity labels and unambiguity scores.

Labels come from two independent crowd populations: judgers vote on whether
everyone would pick the same object, and drawers reveal ambiguity through the
segmentations themselves.  Scores may come from the built-in classifier, from
externally computed score files, or by converting detection windows or
salient-object-count distributions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import (
    DuplicateWorker,
    EmptyMask,
    InvalidDistribution,
    NonFiniteScore,
    NoWindows,
    ParseError,
    TooFewMasks,
    UnknownImage,
    WrongVoteCount,
)
from .masks import BoundingBox, PixelMask, box_iou, connected_components, iou

UNAMBIGUOUS = "unambiguous"
AMBIGUOUS = "ambiguous"

VOTES_PER_IMAGE = 5
DRAWER_IOU_THRESHOLD = 0.5
NMS_IOU_THRESHOLD = 0.1


@dataclass(frozen=True)
class VoteRecord:
    """One judger's yes/no on whether all people would pick the same object."""

    image_id: str
    worker_id: str
    vote: int  # 1 = same object (unambiguous), 0 = not

    def __post_init__(self):
        if self.vote not in (0, 1):
            raise ValueError("vote must be 0 or 1")


@dataclass(frozen=True)
class AmbiguityLabel:
    image_id: str
    label: str  # UNAMBIGUOUS / AMBIGUOUS
    source: str  # "judgers" / "drawers"


def aggregate_votes(votes: Sequence[VoteRecord]) -> AmbiguityLabel:
    """Majority of exactly five votes from distinct workers on one image."""
    votes = list(votes)
    if len(votes) != VOTES_PER_IMAGE:
        raise WrongVoteCount(f"need exactly {VOTES_PER_IMAGE} votes, got {len(votes)}")
    image_ids = {v.image_id for v in votes}
    if len(image_ids) != 1:
        raise ValueError(f"votes span multiple images: {sorted(image_ids)}")
    workers = [v.worker_id for v in votes]
    if len(set(workers)) != len(workers):
        raise DuplicateWorker("each worker may vote once per image")
    yes = sum(v.vote for v in votes)
    label = UNAMBIGUOUS if yes * 2 > len(votes) else AMBIGUOUS
    return AmbiguityLabel(image_id=votes[0].image_id, label=label, source="judgers")


def label_from_drawings(image_id: str, masks: Sequence[PixelMask]) -> AmbiguityLabel:
    """Ambiguous iff any drawing has multiple objects or any pair overlaps
    below 50% IoU."""
    masks = list(masks)
    if len(masks) < 2:
        raise TooFewMasks("need at least two drawings")
    for m in masks:
        if m.is_empty():
            raise EmptyMask("drawings must be non-empty")
    ambiguous = any(connected_components(m)[0] > 1 for m in masks)
    if not ambiguous:
        for i in range(len(masks)):
            for j in range(i + 1, len(masks)):
                if iou(masks[i], masks[j]) < DRAWER_IOU_THRESHOLD:
                    ambiguous = True
                    break
            if ambiguous:
                break
    return AmbiguityLabel(
        image_id=image_id, label=AMBIGUOUS if ambiguous else UNAMBIGUOUS, source="drawers"
    )


# --- external score files ----------------------------------------------------


def ingest_scores(path, known_ids: Iterable[str]) -> dict[str, float]:
    """Read a tab-separated image_id/score file, one finite score per image."""
    known = set(known_ids)
    scores: dict[str, float] = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise ParseError(f"{path}:{lineno}: expected 'image_id<TAB>score'")
        image_id, raw = parts[0].strip(), parts[1].strip()
        if image_id in scores:
            raise ParseError(f"{path}:{lineno}: duplicate image_id {image_id!r}")
        if image_id not in known:
            raise UnknownImage(f"{path}:{lineno}: unknown image_id {image_id!r}")
        try:
            value = float(raw)
        except ValueError as exc:
            raise ParseError(f"{path}:{lineno}: bad score {raw!r}") from exc
        if not math.isfinite(value):
            raise NonFiniteScore(f"{path}:{lineno}: score for {image_id!r} is {raw}")
        scores[image_id] = value
    return scores


def write_scores(scores: Mapping[str, float], path) -> None:
    lines = [f"{image_id}\t{scores[image_id]!r}" for image_id in sorted(scores)]
    Path(path).write_text("\n".join(lines) + "\n")


# --- detection windows -------------------------------------------------------


@dataclass(frozen=True)
class DetectionWindow:
    box: BoundingBox
    confidence: float

    def __post_init__(self):
        if not math.isfinite(self.confidence):
            raise NonFiniteScore("detection confidence must be finite")


def nms(windows: Sequence[DetectionWindow], iou_threshold: float = NMS_IOU_THRESHOLD) -> list[DetectionWindow]:
    """Greedy suppression: keep the most confident window, drop overlaps."""
    remaining = sorted(windows, key=lambda w: -w.confidence)
    kept: list[DetectionWindow] = []
    while remaining:
        best = remaining.pop(0)
        kept.append(best)
        remaining = [w for w in remaining if box_iou(best.box, w.box) <= iou_threshold]
    return kept


def feng_unambiguity(windows: Sequence[DetectionWindow]) -> float:
    """Score from ranked detections: a lone window's confidence, otherwise the
    margin between the two best surviving windows."""
    if not windows:
        raise NoWindows("need at least one detection window")
    surviving = nms(windows, NMS_IOU_THRESHOLD)
    if len(surviving) == 1:
        return surviving[0].confidence
    return surviving[0].confidence - surviving[1].confidence


def read_detections(path, known_ids: Iterable[str] | None = None) -> dict[str, list[DetectionWindow]]:
    """Read `image_id<TAB>x_min,y_min,x_max,y_max<TAB>confidence` lines."""
    known = set(known_ids) if known_ids is not None else None
    out: dict[str, list[DetectionWindow]] = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise ParseError(f"{path}:{lineno}: expected three tab-separated fields")
        image_id, coords, conf = parts
        if known is not None and image_id not in known:
            raise UnknownImage(f"{path}:{lineno}: unknown image_id {image_id!r}")
        try:
            x0, y0, x1, y1 = (float(v) for v in coords.split(","))
            window = DetectionWindow(
                box=BoundingBox(x_min=x0, y_min=y0, x_max=x1, y_max=y1),
                confidence=float(conf),
            )
        except (ValueError, TypeError) as exc:
            raise ParseError(f"{path}:{lineno}: malformed detection") from exc
        out.setdefault(image_id, []).append(window)
    return out


# --- salient-object-count distributions ---------------------------------------


@dataclass(frozen=True)
class SubitizingDistribution:
    """Probabilities that an image shows 0, 1, 2, 3 or 4+ salient objects."""

    p0: float
    p1: float
    p2: float
    p3: float
    p4plus: float

    def __post_init__(self):
        probs = self.as_tuple()
        if any(p < 0 for p in probs):
            raise InvalidDistribution("probabilities must be non-negative")
        if abs(sum(probs) - 1.0) > 1e-6:
            raise InvalidDistribution(f"probabilities sum to {sum(probs)}, not 1")

    def as_tuple(self) -> tuple[float, ...]:
        return (self.p0, self.p1, self.p2, self.p3, self.p4plus)


def sos_priority_order(distributions: Mapping[str, SubitizingDistribution]) -> list[str]:
    """Rank images for redundancy, most in need first.

    Confidence in unambiguity runs: confident one-object images first, then
    the two-, three-, four-plus- and zero-object images from least to most
    confident.  Redundancy priority reverses that ranking; ties break on
    ascending image_id.
    """
    confidence_group = {1: 4, 2: 3, 3: 2, 4: 1, 0: 0}  # higher = lower priority

    def key(image_id: str):
        probs = distributions[image_id].as_tuple()
        count = max(range(5), key=lambda c: (probs[c], -c))  # first max wins
        conf = probs[count]
        # most confident single-object images come last; within every other
        # count group, higher confidence means earlier redundancy
        conf_term = conf if count == 1 else -conf
        return (confidence_group[count], conf_term, image_id)

    return sorted(distributions, key=key)


def read_subitizing(path, known_ids: Iterable[str] | None = None) -> dict[str, SubitizingDistribution]:
    """Read `image_id<TAB>p0,p1,p2,p3,p4plus` lines."""
    known = set(known_ids) if known_ids is not None else None
    out: dict[str, SubitizingDistribution] = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise ParseError(f"{path}:{lineno}: expected two tab-separated fields")
        image_id, raw = parts
        if image_id in out:
            raise ParseError(f"{path}:{lineno}: duplicate image_id {image_id!r}")
        if known is not None and image_id not in known:
            raise UnknownImage(f"{path}:{lineno}: unknown image_id {image_id!r}")
        try:
            probs = [float(v) for v in raw.split(",")]
        except ValueError as exc:
            raise ParseError(f"{path}:{lineno}: malformed probabilities") from exc
        if len(probs) != 5:
            raise ParseError(f"{path}:{lineno}: expected five probabilities")
        out[image_id] = SubitizingDistribution(*probs)
    return out
