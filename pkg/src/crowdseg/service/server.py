"""HTTP face of the task store: JSON endpoints for batch creation, task
assignment, vote/segmentation submission, status and reports."""

from __future__ import annotations

import io
from pathlib import Path

from fastapi import FastAPI, Query, Request
from fastapi.responses import JSONResponse, Response
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .. import errors
from ..masks import PolygonOutline
from .store import TaskStore

_STATUS_BY_ERROR = {
    errors.IneligibleWorker: 403,
    errors.NotAssigned: 409,
    errors.WrongKind: 409,
    errors.RoundOneIncomplete: 409,
    errors.MissingImage: 404,
    errors.VoteCountMismatch: 400,
    errors.EmptyRasterization: 400,
    errors.MultiplePolygons: 400,
    errors.TooFewVertices: 400,
    errors.ParseError: 400,
}


class BatchRequest(BaseModel):
    manifest: str
    kind: str
    extra: int = 0


class VoteRequest(BaseModel):
    worker: str
    votes: list[int]


class SegmentationRequest(BaseModel):
    worker: str
    polygon: list[tuple[float, float]] | None = None
    polygons: list[list[tuple[float, float]]] | None = None


class RoundRequest(BaseModel):
    budget: int
    extra: int
    scores: dict[str, float] | None = None
    method: str | None = Field(default=None, description="use scores stored under this method")


def create_app(store: TaskStore, ui_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="crowdseg collection service")

    @app.exception_handler(errors.CrowdsegError)
    async def on_domain_error(request: Request, exc: errors.CrowdsegError):
        status = _STATUS_BY_ERROR.get(type(exc), 400)
        return JSONResponse(
            status_code=status,
            content={"error": type(exc).__name__, "detail": str(exc)},
        )

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.post("/batches")
    def create_batch(body: BatchRequest):
        batch_id, task_ids = store.create_batch(body.manifest, body.kind, body.extra)
        return {"batch_id": batch_id, "task_ids": task_ids}

    @app.get("/tasks/next")
    def next_task(worker: str = Query(...)):
        task = store.next_task(worker)
        if task is None:
            return {"task": None}
        view = task.to_view()
        view["images"] = [f"/images/{image_id}" for image_id in task.image_ids]
        if task.kind == "vote":
            view["question"] = (
                "If we asked multiple people to draw the boundary of a single "
                "object in the given image, do you think all people would pick "
                "the same object?"
            )
        return {"task": view}

    @app.post("/tasks/{task_id}/vote")
    def submit_vote(task_id: str, body: VoteRequest):
        return store.submit_vote(task_id, body.worker, body.votes)

    @app.post("/tasks/{task_id}/segmentation")
    def submit_segmentation(task_id: str, body: SegmentationRequest):
        polygons = body.polygons
        if polygons is None:
            polygons = [body.polygon] if body.polygon is not None else []
        if len(polygons) > 1:
            raise errors.MultiplePolygons(f"expected one polygon, got {len(polygons)}")
        if not polygons:
            raise errors.TooFewVertices("no polygon supplied")
        outline = PolygonOutline(tuple((x, y) for x, y in polygons[0]))
        return store.submit_segmentation(task_id, body.worker, outline)

    @app.get("/batches/{batch_id}/status")
    def batch_status(batch_id: str):
        return store.status(batch_id)

    @app.get("/batches/{batch_id}/report")
    def batch_report(batch_id: str):
        return store.report(batch_id)

    @app.post("/batches/{batch_id}/rounds")
    def run_round(batch_id: str, body: RoundRequest):
        if body.scores is not None:
            scores = body.scores
            method = body.method or "external"
        elif body.method is not None:
            scores = {}
            for state in store.images.values():
                if body.method in state.record.scores:
                    scores[state.image_id] = state.record.scores[body.method]
            method = body.method
        else:
            raise errors.MissingScore("provide scores inline or name a stored method")
        plan, task_ids = store.run_adaptive_round(
            batch_id, scores, budget=body.budget, extra=body.extra, method=method
        )
        return {
            "strategy": plan.strategy,
            "budget": plan.budget,
            "extra": plan.extra,
            "selected": list(plan.selected),
            "task_ids": task_ids,
        }

    @app.get("/images/{image_id}")
    def image_file(image_id: str):
        state = store.images.get(image_id)
        if state is None or not state.record.path:
            raise errors.MissingImage(f"no image file for {image_id!r}")
        path = Path(state.record.path)
        if not path.exists():
            raise errors.MissingImage(f"missing image file {path}")
        from PIL import Image

        buf = io.BytesIO()
        Image.open(path).convert("L").save(buf, format="PNG")
        return Response(content=buf.getvalue(), media_type="image/png")

    if ui_dir:
        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app
