"""Classifier and system evaluation: precision-recall, label agreement,
multi-ground-truth overlap scoring, and deterministic report emission."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .ambiguity import AMBIGUOUS, UNAMBIGUOUS, AmbiguityLabel
from .errors import (
    DimensionMismatch,
    EmptyGroundTruthSet,
    EmptyResults,
    IdMismatch,
    IoFailure,
    SingleClass,
)
from .masks import PixelMask, iou


@dataclass(frozen=True)
class PrCurve:
    """(recall, precision) points at distinct score thresholds, plus the
    step-summed average precision."""

    points: tuple[tuple[float, float], ...]
    average_precision: float


def average_precision(scores: np.ndarray, positive: np.ndarray) -> tuple[float, tuple[tuple[float, float], ...]]:
    """AP over descending-score threshold groups; tied scores form one group.

    Returns (ap, points) where points are (recall, precision) per group in
    increasing recall order.  No interpolation or smoothing is applied.
    """
    scores = np.asarray(scores, dtype=float)
    positive = np.asarray(positive, dtype=bool)
    pos_total = int(positive.sum())
    order = np.argsort(-scores, kind="stable")
    s, p = scores[order], positive[order]
    points: list[tuple[float, float]] = []
    ap = 0.0
    prev_recall = 0.0
    tp = fp = 0
    i = 0
    while i < len(s):
        j = i
        while j < len(s) and s[j] == s[i]:
            j += 1
        group_pos = int(p[i:j].sum())
        tp += group_pos
        fp += (j - i) - group_pos
        recall = tp / pos_total if pos_total else 0.0
        precision = tp / (tp + fp)
        points.append((recall, precision))
        ap += (recall - prev_recall) * precision
        prev_recall = recall
        i = j
    return ap, tuple(points)


def pr_curve(
    scores: Mapping[str, float], labels: Mapping[str, AmbiguityLabel | str]
) -> PrCurve:
    """Precision-recall of unambiguity scores against ambiguity labels.

    The positive class is `unambiguous`, matching the score convention that
    higher means more confidently single-object.
    """
    if set(scores) != set(labels):
        raise IdMismatch("scores and labels must cover the same image ids")
    ids = sorted(scores)
    label_values = [
        labels[i].label if isinstance(labels[i], AmbiguityLabel) else labels[i]
        for i in ids
    ]
    for value in label_values:
        if value not in (UNAMBIGUOUS, AMBIGUOUS):
            raise ValueError(f"bad label {value!r}")
    positive = np.array([v == UNAMBIGUOUS for v in label_values])
    if positive.all() or not positive.any():
        raise SingleClass("need both unambiguous and ambiguous labels")
    score_arr = np.array([scores[i] for i in ids], dtype=float)
    ap, points = average_precision(score_arr, positive)
    return PrCurve(points=points, average_precision=ap)


@dataclass(frozen=True)
class AgreementMatrix:
    """Jointly normalised fractions for (judger, drawer) label pairs."""

    fractions: dict[tuple[str, str], float]
    overall_agreement: float


def agreement_matrix(
    judger_labels: Mapping[str, AmbiguityLabel | str],
    drawer_labels: Mapping[str, AmbiguityLabel | str],
) -> AgreementMatrix:
    if set(judger_labels) != set(drawer_labels):
        raise IdMismatch("judger and drawer labels must cover the same image ids")
    total = len(judger_labels)
    if total == 0:
        raise IdMismatch("need at least one labelled image")

    def value(lab) -> str:
        return lab.label if isinstance(lab, AmbiguityLabel) else lab

    counts = {
        (j, d): 0 for j in (UNAMBIGUOUS, AMBIGUOUS) for d in (UNAMBIGUOUS, AMBIGUOUS)
    }
    for image_id in judger_labels:
        counts[(value(judger_labels[image_id]), value(drawer_labels[image_id]))] += 1
    fractions = {cell: n / total for cell, n in counts.items()}
    overall = fractions[(UNAMBIGUOUS, UNAMBIGUOUS)] + fractions[(AMBIGUOUS, AMBIGUOUS)]
    return AgreementMatrix(fractions=fractions, overall_agreement=overall)


def best_overlap_eval(predicted: PixelMask, ground_truths: Sequence[PixelMask]) -> float:
    """Best IoU of a prediction against any of several valid ground truths."""
    truths = list(ground_truths)
    if not truths:
        raise EmptyGroundTruthSet("need at least one ground truth")
    for gt in truths:
        if gt.pixels.shape != predicted.pixels.shape:
            raise DimensionMismatch("ground truth dimensions differ from prediction")
    return max(iou(predicted, gt) for gt in truths)


# --- report emission ---------------------------------------------------------


def emit_report(rows: Sequence[Mapping], path, format: str = "csv") -> Path:
    """Write rows to CSV (field order from the first row) or JSON with sorted
    keys.  Identical inputs yield byte-identical files."""
    rows = list(rows)
    if not rows:
        raise EmptyResults("refusing to write an empty report")
    if format not in ("csv", "json"):
        raise ValueError(f"unsupported format {format!r}")
    path = Path(path)
    try:
        if format == "csv":
            buf = io.StringIO()
            writer = csv.DictWriter(buf, fieldnames=list(rows[0].keys()), lineterminator="\n")
            writer.writeheader()
            for row in rows:
                writer.writerow({k: _render(v) for k, v in row.items()})
            path.write_text(buf.getvalue())
        else:
            path.write_text(json.dumps(rows, sort_keys=True, indent=2, default=_render) + "\n")
    except OSError as exc:
        raise IoFailure(f"cannot write report to {path}: {exc}") from exc
    return path


def _render(value):
    if isinstance(value, float):
        return repr(value)
    return value


def load_report(path, format: str = "csv") -> list[dict]:
    path = Path(path)
    try:
        if format == "csv":
            with path.open(newline="") as fh:
                return [dict(row) for row in csv.DictReader(fh)]
        return json.loads(path.read_text())
    except OSError as exc:
        raise IoFailure(f"cannot read report from {path}: {exc}") from exc
