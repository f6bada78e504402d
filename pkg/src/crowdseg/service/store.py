"""Persistent task store behind the collection service.

All state lives in an append-only JSONL event log.  Live operations validate
under a lock, append the events they decided on, and then apply them through
the same reducer the replay path uses, so reloading the log always
reconstructs the exact server state.  Task assignment and submission are
linearizable: one lock covers the decide-append-apply sequence.
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

from ..allocation import AllocationPlan, greedy_allocate
from ..ambiguity import VoteRecord, aggregate_votes
from ..errors import (
    EmptyRasterization,
    IneligibleWorker,
    MissingImage,
    NotAssigned,
    ParseError,
    RoundOneIncomplete,
    VoteCountMismatch,
    WrongKind,
)
from ..manifest import ImageRecord, MaskAnnotation, read_manifest
from ..masks import PolygonOutline, RunLengthMask, encode_rle, rasterize_polygon

VOTE = "vote"
SEGMENT = "segment"
VOTE_GROUP_SIZE = 5


@dataclass(frozen=True)
class WorkerProfile:
    worker_id: str
    completed_tasks: int = 0
    approval_rate: float = 0.0


@dataclass
class ServiceConfig:
    """Operator-declared worker roster and qualification thresholds."""

    min_completed_tasks: int = 100
    min_approval_rate: float = 0.92
    assignment_timeout: float = 1800.0
    votes_per_image: int = 5
    workers: dict[str, WorkerProfile] = field(default_factory=dict)
    default_profile: WorkerProfile | None = None

    def profile(self, worker_id: str) -> WorkerProfile:
        if worker_id in self.workers:
            return self.workers[worker_id]
        if self.default_profile is not None:
            return WorkerProfile(
                worker_id=worker_id,
                completed_tasks=self.default_profile.completed_tasks,
                approval_rate=self.default_profile.approval_rate,
            )
        return WorkerProfile(worker_id=worker_id)

    def is_eligible(self, worker_id: str) -> bool:
        p = self.profile(worker_id)
        return (
            p.completed_tasks >= self.min_completed_tasks
            and p.approval_rate >= self.min_approval_rate
        )

    @classmethod
    def from_json(cls, obj: dict) -> "ServiceConfig":
        workers = {
            wid: WorkerProfile(
                worker_id=wid,
                completed_tasks=int(w.get("completed_tasks", 0)),
                approval_rate=float(w.get("approval_rate", 0.0)),
            )
            for wid, w in obj.get("workers", {}).items()
        }
        default = obj.get("default_profile")
        return cls(
            min_completed_tasks=int(obj.get("min_completed_tasks", 100)),
            min_approval_rate=float(obj.get("min_approval_rate", 0.92)),
            assignment_timeout=float(obj.get("assignment_timeout_seconds", 1800.0)),
            votes_per_image=int(obj.get("votes_per_image", 5)),
            workers=workers,
            default_profile=(
                WorkerProfile(
                    worker_id="*",
                    completed_tasks=int(default.get("completed_tasks", 0)),
                    approval_rate=float(default.get("approval_rate", 0.0)),
                )
                if default
                else None
            ),
        )

    @classmethod
    def load(cls, path) -> "ServiceConfig":
        return cls.from_json(json.loads(Path(path).read_text()))


@dataclass
class Task:
    task_id: str
    batch_id: str
    kind: str
    image_ids: tuple[str, ...]
    seq: int
    quota: int  # completions by distinct workers before the task is done
    state: str = "open"  # open -> assigned -> (open | done)
    assigned_to: str | None = None
    deadline: float | None = None
    completed_by: tuple[str, ...] = ()

    def to_view(self) -> dict:
        return {
            "task_id": self.task_id,
            "batch_id": self.batch_id,
            "kind": self.kind,
            "image_ids": list(self.image_ids),
            "state": self.state,
        }


@dataclass
class BatchState:
    batch_id: str
    kind: str
    extra: int
    image_ids: tuple[str, ...]


@dataclass
class ImageState:
    record: ImageRecord
    batch_id: str

    @property
    def image_id(self) -> str:
        return self.record.image_id


class TaskStore:
    """Event-sourced task queue with linearizable assignment."""

    def __init__(self, log_path, config: ServiceConfig | None = None, clock=time.time):
        self._lock = threading.RLock()
        self._log_path = Path(log_path)
        self.config = config or ServiceConfig()
        self._clock = clock
        self.images: dict[str, ImageState] = {}
        self.tasks: dict[str, Task] = {}
        self.batches: dict[str, BatchState] = {}
        self._touched: dict[tuple[str, str], set[str]] = {}  # (worker, kind) -> image ids
        self._batch_counter = 0
        self._task_counter = 0
        self._seq_counter = 0
        if self._log_path.exists():
            for lineno, line in enumerate(self._log_path.read_text().splitlines(), 1):
                if not line.strip():
                    continue
                try:
                    event = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ParseError(f"{log_path}:{lineno}: invalid event") from exc
                self._apply(event)

    # ---- event plumbing ----

    def _append(self, events: list[dict]) -> None:
        with self._log_path.open("a") as fh:
            for event in events:
                fh.write(json.dumps(event, sort_keys=True) + "\n")
            fh.flush()

    def _commit(self, events: list[dict]) -> None:
        self._append(events)
        for event in events:
            self._apply(event)

    def _apply(self, event: dict) -> None:
        kind = event["event"]
        if kind == "batch_created":
            records = [ImageRecord.from_json(r) for r in event["records"]]
            batch = BatchState(
                batch_id=event["batch_id"],
                kind=event["kind"],
                extra=int(event["extra"]),
                image_ids=tuple(r.image_id for r in records),
            )
            self.batches[batch.batch_id] = batch
            for record in records:
                self.images[record.image_id] = ImageState(record=record, batch_id=batch.batch_id)
            self._batch_counter = max(self._batch_counter, int(event["batch_id"][1:]))
        elif kind == "task_created":
            task = Task(
                task_id=event["task_id"],
                batch_id=event["batch_id"],
                kind=event["kind"],
                image_ids=tuple(event["image_ids"]),
                seq=int(event["seq"]),
                quota=int(event["quota"]),
            )
            self.tasks[task.task_id] = task
            self._task_counter = max(self._task_counter, int(event["task_id"][1:]))
            self._seq_counter = max(self._seq_counter, task.seq)
        elif kind == "task_assigned":
            task = self.tasks[event["task_id"]]
            task.state = "assigned"
            task.assigned_to = event["worker_id"]
            task.deadline = float(event["deadline"])
            for image_id in task.image_ids:
                self._touched.setdefault((task.assigned_to, task.kind), set()).add(image_id)
        elif kind == "task_reopened":
            task = self.tasks[event["task_id"]]
            task.state = "open"
            task.assigned_to = None
            task.deadline = None
        elif kind == "task_done":
            task = self.tasks[event["task_id"]]
            task.state = "done"
            task.assigned_to = None
            task.deadline = None
        elif kind == "vote_submitted":
            task = self.tasks[event["task_id"]]
            worker_id = event["worker_id"]
            task.completed_by = task.completed_by + (worker_id,)
            for image_id, vote in event["votes"].items():
                self.images[image_id].record.votes.append(
                    VoteRecord(image_id=image_id, worker_id=worker_id, vote=int(vote))
                )
        elif kind == "label_assigned":
            record = self.images[event["image_id"]].record
            record.labels[event["source"]] = event["label"]
        elif kind == "annotation_submitted":
            record = self.images[event["image_id"]].record
            record.annotations.append(
                MaskAnnotation(
                    worker_id=event["worker_id"],
                    timestamp=float(event["ts"]),
                    rle=RunLengthMask.from_json(event["rle"]),
                )
            )
        elif kind == "score_recorded":
            record = self.images[event["image_id"]].record
            record.scores[event["method"]] = float(event["score"])
        elif kind == "round_planned":
            pass  # provenance only; the accompanying task_created events carry state
        else:
            raise ParseError(f"unknown event type {kind!r}")

    # ---- operations ----

    def create_batch(self, manifest_path, kind: str, extra: int = 0) -> tuple[str, list[str]]:
        """Register a manifest and open its first-round tasks.

        Segment batches get one task per not-yet-annotated image; vote batches
        group five images per task, each task needing five distinct workers.
        """
        if kind not in (VOTE, SEGMENT):
            raise ValueError(f"batch kind must be vote or segment, got {kind!r}")
        records = read_manifest(manifest_path)
        base = Path(manifest_path).parent
        for record in records:
            if record.path:
                resolved = (base / record.path).resolve()
                if not resolved.exists():
                    raise MissingImage(
                        f"{record.image_id}: missing image file {record.path}"
                    )
                record.path = str(resolved)
            if record.image_id in self.images:
                raise ParseError(f"image {record.image_id!r} already registered")
        with self._lock:
            self._batch_counter += 1
            batch_id = f"b{self._batch_counter:04d}"
            events = [
                {
                    "event": "batch_created",
                    "batch_id": batch_id,
                    "kind": kind,
                    "extra": extra,
                    "records": [r.to_json() for r in records],
                    "ts": self._clock(),
                }
            ]
            task_ids = []
            if kind == SEGMENT:
                pending = [r.image_id for r in records if not r.annotations]
                groups = [[image_id] for image_id in pending]
                quota = 1
            else:
                pending = [
                    r.image_id
                    for r in records
                    if len(r.votes) < self.config.votes_per_image
                ]
                groups = [
                    pending[i : i + VOTE_GROUP_SIZE]
                    for i in range(0, len(pending), VOTE_GROUP_SIZE)
                ]
                quota = self.config.votes_per_image
            for group in groups:
                events.append(self._task_event(batch_id, kind, group, quota))
                task_ids.append(events[-1]["task_id"])
            self._commit(events)
            return batch_id, task_ids

    def _task_event(self, batch_id: str, kind: str, image_ids: list[str], quota: int) -> dict:
        self._task_counter += 1
        self._seq_counter += 1
        return {
            "event": "task_created",
            "task_id": f"t{self._task_counter:06d}",
            "batch_id": batch_id,
            "kind": kind,
            "image_ids": list(image_ids),
            "seq": self._seq_counter,
            "quota": quota,
            "ts": self._clock(),
        }

    def _sweep_expired(self, now: float) -> list[dict]:
        events = []
        for task in self.tasks.values():
            if task.state == "assigned" and task.deadline is not None and task.deadline <= now:
                events.append(
                    {"event": "task_reopened", "task_id": task.task_id, "reason": "timeout", "ts": now}
                )
        return events

    def next_task(self, worker_id: str) -> Task | None:
        """Oldest open task this worker has not touched, atomically assigned."""
        if not self.config.is_eligible(worker_id):
            p = self.config.profile(worker_id)
            raise IneligibleWorker(
                f"{worker_id}: {p.completed_tasks} completed tasks / "
                f"{p.approval_rate:.2f} approval below qualification thresholds"
            )
        with self._lock:
            now = self._clock()
            events = self._sweep_expired(now)
            if events:
                self._commit(events)
            candidates = sorted(
                (t for t in self.tasks.values() if t.state == "open"),
                key=lambda t: t.seq,
            )
            for task in candidates:
                seen = self._touched.get((worker_id, task.kind), set())
                if any(i in seen for i in task.image_ids):
                    continue
                if worker_id in task.completed_by:
                    continue
                self._commit(
                    [
                        {
                            "event": "task_assigned",
                            "task_id": task.task_id,
                            "worker_id": worker_id,
                            "deadline": now + self.config.assignment_timeout,
                            "ts": now,
                        }
                    ]
                )
                return task
            return None

    def _assigned_task(self, task_id: str, worker_id: str, kind: str) -> Task:
        task = self.tasks.get(task_id)
        if task is None:
            raise NotAssigned(f"no such task {task_id!r}")
        if task.kind != kind:
            raise WrongKind(f"{task_id} is a {task.kind} task")
        if task.state != "assigned" or task.assigned_to != worker_id:
            raise NotAssigned(f"{task_id} is not assigned to {worker_id!r}")
        return task

    def submit_vote(self, task_id: str, worker_id: str, votes: list[int]) -> dict:
        """Record one worker's votes; labels materialise at five votes per image."""
        with self._lock:
            now = self._clock()
            pre = self._sweep_expired(now)
            if pre:
                self._commit(pre)
            task = self._assigned_task(task_id, worker_id, VOTE)
            if len(votes) != len(task.image_ids):
                raise VoteCountMismatch(
                    f"expected {len(task.image_ids)} votes, got {len(votes)}"
                )
            if any(v not in (0, 1) for v in votes):
                raise VoteCountMismatch("votes must be 0 or 1")
            cap = self.config.votes_per_image
            for image_id in task.image_ids:
                if len(self.images[image_id].record.votes) >= cap:
                    raise VoteCountMismatch(f"{image_id} already has {cap} votes")
            events = [
                {
                    "event": "vote_submitted",
                    "task_id": task_id,
                    "worker_id": worker_id,
                    "votes": {i: int(v) for i, v in zip(task.image_ids, votes)},
                    "ts": now,
                }
            ]
            for image_id, vote in zip(task.image_ids, votes):
                record = self.images[image_id].record
                if len(record.votes) + 1 == cap:
                    full = record.votes + [
                        VoteRecord(image_id=image_id, worker_id=worker_id, vote=int(vote))
                    ]
                    label = aggregate_votes(full)
                    events.append(
                        {
                            "event": "label_assigned",
                            "image_id": image_id,
                            "label": label.label,
                            "source": label.source,
                            "ts": now,
                        }
                    )
            if len(task.completed_by) + 1 >= task.quota:
                events.append({"event": "task_done", "task_id": task_id, "ts": now})
            else:
                events.append(
                    {"event": "task_reopened", "task_id": task_id, "reason": "quota", "ts": now}
                )
            self._commit(events)
            return {"task_id": task_id, "state": self.tasks[task_id].state}

    def submit_segmentation(
        self, task_id: str, worker_id: str, polygon: PolygonOutline
    ) -> dict:
        """Rasterise a single polygon server-side and persist the mask."""
        with self._lock:
            now = self._clock()
            pre = self._sweep_expired(now)
            if pre:
                self._commit(pre)
            task = self._assigned_task(task_id, worker_id, SEGMENT)
            image_id = task.image_ids[0]
            record = self.images[image_id].record
            mask = rasterize_polygon(polygon, record.width, record.height)
            if mask.is_empty():
                raise EmptyRasterization("polygon covers no pixel centre")
            rle = encode_rle(mask)
            events = [
                {
                    "event": "annotation_submitted",
                    "task_id": task_id,
                    "worker_id": worker_id,
                    "image_id": image_id,
                    "rle": rle.to_json(),
                    "ts": now,
                },
                {"event": "task_done", "task_id": task_id, "ts": now},
            ]
            self._commit(events)
            return {"task_id": task_id, "state": "done", "mask": rle.to_json()}

    def record_scores(self, scores: dict[str, float], method: str) -> None:
        with self._lock:
            now = self._clock()
            for image_id in sorted(scores):
                if image_id not in self.images:
                    raise MissingImage(f"unknown image {image_id!r}")
            self._commit(
                [
                    {
                        "event": "score_recorded",
                        "image_id": image_id,
                        "method": method,
                        "score": float(scores[image_id]),
                        "ts": now,
                    }
                    for image_id in sorted(scores)
                ]
            )

    def run_adaptive_round(
        self, batch_id: str, scores: dict[str, float], budget: int, extra: int,
        method: str = "external",
    ) -> tuple[AllocationPlan, list[str]]:
        """Score the batch, pick the most ambiguous-looking images, and open
        `extra` more segmentation tasks for each."""
        with self._lock:
            batch = self.batches.get(batch_id)
            if batch is None or batch.kind != SEGMENT:
                raise WrongKind(f"{batch_id!r} is not a segment batch")
            missing = [i for i in batch.image_ids if not self.images[i].record.annotations]
            if missing:
                raise RoundOneIncomplete(
                    f"{len(missing)} images still lack a first annotation"
                )
            covered = set(scores)
            if not covered.issuperset(batch.image_ids):
                raise MissingImage("scores must cover every image in the batch")
            now = self._clock()
            plan = greedy_allocate(
                {i: scores[i] for i in batch.image_ids}, budget=budget, extra=extra
            )
            events = [
                {
                    "event": "score_recorded",
                    "image_id": image_id,
                    "method": method,
                    "score": float(scores[image_id]),
                    "ts": now,
                }
                for image_id in sorted(batch.image_ids)
            ]
            events.append(
                {
                    "event": "round_planned",
                    "batch_id": batch_id,
                    "strategy": plan.strategy,
                    "budget": plan.budget,
                    "extra": plan.extra,
                    "selected": list(plan.selected),
                    "ts": now,
                }
            )
            task_ids = []
            cap = 1 + max(batch.extra, extra)
            for image_id in plan.selected:
                existing = len(self.images[image_id].record.annotations)
                pending = sum(
                    1
                    for t in self.tasks.values()
                    if t.state != "done" and t.kind == SEGMENT and image_id in t.image_ids
                )
                room = cap - existing - pending
                for _ in range(min(extra, max(room, 0))):
                    events.append(self._task_event(batch_id, SEGMENT, [image_id], quota=1))
                    task_ids.append(events[-1]["task_id"])
            self._commit(events)
            return plan, task_ids

    # ---- introspection ----

    def status(self, batch_id: str) -> dict:
        with self._lock:
            batch = self.batches.get(batch_id)
            if batch is None:
                raise MissingImage(f"no such batch {batch_id!r}")
            tasks = [t for t in self.tasks.values() if t.batch_id == batch_id]
            records = [self.images[i].record for i in batch.image_ids]
            return {
                "batch_id": batch_id,
                "kind": batch.kind,
                "extra": batch.extra,
                "images": len(batch.image_ids),
                "tasks": {
                    state: sum(1 for t in tasks if t.state == state)
                    for state in ("open", "assigned", "done")
                },
                "votes": sum(len(r.votes) for r in records),
                "annotations": sum(len(r.annotations) for r in records),
                "labels": sum(1 for r in records if r.labels),
                "round_one_complete": all(r.annotations for r in records)
                if batch.kind == SEGMENT
                else None,
            }

    def report(self, batch_id: str) -> dict:
        with self._lock:
            batch = self.batches.get(batch_id)
            if batch is None:
                raise MissingImage(f"no such batch {batch_id!r}")
            rows = []
            for image_id in batch.image_ids:
                record = self.images[image_id].record
                rows.append(
                    {
                        "image_id": image_id,
                        "votes": len(record.votes),
                        "annotations": len(record.annotations),
                        "labels": dict(record.labels),
                        "scores": dict(record.scores),
                    }
                )
            return {"batch_id": batch_id, "kind": batch.kind, "images": rows}

    def export_records(self) -> list[ImageRecord]:
        with self._lock:
            return [self.images[i].record for i in sorted(self.images)]

    def snapshot(self) -> dict:
        """Deterministic dump of all event-derived state, for replay checks."""
        with self._lock:
            return {
                "batches": {
                    b.batch_id: {"kind": b.kind, "extra": b.extra, "image_ids": list(b.image_ids)}
                    for b in self.batches.values()
                },
                "tasks": {
                    t.task_id: {
                        "state": t.state,
                        "assigned_to": t.assigned_to,
                        "deadline": t.deadline,
                        "seq": t.seq,
                        "quota": t.quota,
                        "completed_by": list(t.completed_by),
                        "image_ids": list(t.image_ids),
                    }
                    for t in self.tasks.values()
                },
                "images": {i: s.record.to_json() for i, s in self.images.items()},
                "touched": {
                    f"{worker}:{kind}": sorted(images)
                    for (worker, kind), images in sorted(self._touched.items())
                    if images
                },
            }
