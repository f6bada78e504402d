"""Line-delimited JSON manifests: one image record per line, carrying the
image's votes, stored annotations (as run-length masks), scores and labels."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .ambiguity import VoteRecord
from .diversity import AnnotationSet
from .errors import ParseError
from .masks import RunLengthMask, decode_rle


@dataclass
class MaskAnnotation:
    worker_id: str
    timestamp: float
    rle: RunLengthMask

    def to_json(self) -> dict:
        return {"worker_id": self.worker_id, "timestamp": self.timestamp, "rle": self.rle.to_json()}

    @classmethod
    def from_json(cls, obj: dict) -> "MaskAnnotation":
        return cls(
            worker_id=obj["worker_id"],
            timestamp=float(obj["timestamp"]),
            rle=RunLengthMask.from_json(obj["rle"]),
        )


@dataclass
class ImageRecord:
    image_id: str
    width: int
    height: int
    source: str = ""
    path: str = ""
    votes: list[VoteRecord] = field(default_factory=list)
    annotations: list[MaskAnnotation] = field(default_factory=list)
    scores: dict[str, float] = field(default_factory=dict)
    labels: dict[str, str] = field(default_factory=dict)  # label source -> label

    def to_json(self) -> dict:
        return {
            "image_id": self.image_id,
            "width": self.width,
            "height": self.height,
            "source": self.source,
            "path": self.path,
            "votes": [
                {"worker_id": v.worker_id, "vote": v.vote} for v in self.votes
            ],
            "annotations": [a.to_json() for a in self.annotations],
            "scores": self.scores,
            "labels": self.labels,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ImageRecord":
        try:
            return cls(
                image_id=obj["image_id"],
                width=int(obj["width"]),
                height=int(obj["height"]),
                source=obj.get("source", ""),
                path=obj.get("path", ""),
                votes=[
                    VoteRecord(image_id=obj["image_id"], worker_id=v["worker_id"], vote=int(v["vote"]))
                    for v in obj.get("votes", [])
                ],
                annotations=[MaskAnnotation.from_json(a) for a in obj.get("annotations", [])],
                scores={k: float(v) for k, v in obj.get("scores", {}).items()},
                labels=dict(obj.get("labels", {})),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"malformed image record: {exc}") from exc


def write_manifest(records: Iterable[ImageRecord], path) -> None:
    lines = [json.dumps(r.to_json(), sort_keys=True) for r in records]
    Path(path).write_text("\n".join(lines) + "\n")


def read_manifest(path) -> list[ImageRecord]:
    records = []
    seen = set()
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}:{lineno}: invalid JSON") from exc
        record = ImageRecord.from_json(obj)
        if record.image_id in seen:
            raise ParseError(f"{path}:{lineno}: duplicate image_id {record.image_id!r}")
        seen.add(record.image_id)
        records.append(record)
    return records


def annotation_sets(records: Iterable[ImageRecord]) -> dict[str, AnnotationSet]:
    """Decode every record's stored annotations into an AnnotationSet."""
    sets = {}
    for record in records:
        if record.annotations:
            masks = [decode_rle(a.rle) for a in record.annotations]
            sets[record.image_id] = AnnotationSet(record.image_id, masks)
    return sets
