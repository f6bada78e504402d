"""Binary pixel masks and the geometric primitives built on them.

Everything here is pure: masks are immutable once constructed, operations
return new values, and no function touches global state.  Coordinates are
(x, y) with x = column, y = row; bit sequences are row-major.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy import ndimage

from .errors import (
    DimensionMismatch,
    EmptyInput,
    EmptyMask,
    RunSumMismatch,
    TooFewVertices,
)


class PixelMask:
    """Binary foreground mask over a pixel grid (True = foreground)."""

    __slots__ = ("pixels",)

    def __init__(self, pixels):
        a = np.asarray(pixels)
        if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
            raise ValueError("mask must be a non-empty 2-D grid")
        if a.dtype != bool:
            if not np.isin(a, (0, 1)).all():
                raise ValueError("mask values must be 0 or 1")
            a = a.astype(bool)
        else:
            a = a.copy()
        a.setflags(write=False)
        self.pixels = a

    @classmethod
    def from_bits(cls, width: int, height: int, bits: Sequence[int]) -> "PixelMask":
        bits = np.asarray(bits)
        if bits.size != width * height:
            raise ValueError(f"expected {width * height} bits, got {bits.size}")
        return cls(bits.reshape(height, width))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def bits(self) -> np.ndarray:
        """Row-major flat 0/1 view."""
        return self.pixels.astype(np.uint8).ravel()

    def foreground_count(self) -> int:
        return int(self.pixels.sum())

    def is_empty(self) -> bool:
        return not self.pixels.any()

    def __eq__(self, other) -> bool:
        if not isinstance(other, PixelMask):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and bool(
            (self.pixels == other.pixels).all()
        )

    def __hash__(self):
        return hash((self.pixels.shape, self.pixels.tobytes()))

    def __repr__(self) -> str:
        return f"PixelMask({self.width}x{self.height}, fg={self.foreground_count()})"


@dataclass(frozen=True)
class RunLengthMask:
    """Row-major run-length encoding, background run first."""

    width: int
    height: int
    runs: tuple[int, ...]

    def __post_init__(self):
        runs = tuple(int(r) for r in self.runs)
        object.__setattr__(self, "runs", runs)
        if any(r < 0 for r in runs):
            raise ValueError("runs must be non-negative")
        if any(r == 0 for r in runs[1:]):
            raise ValueError("only the leading background run may be 0")

    def to_json(self) -> dict:
        return {"w": self.width, "h": self.height, "runs": list(self.runs)}

    @classmethod
    def from_json(cls, obj: dict) -> "RunLengthMask":
        return cls(width=int(obj["w"]), height=int(obj["h"]), runs=tuple(obj["runs"]))


@dataclass(frozen=True)
class BoundingBox:
    """Inclusive pixel-coordinate box."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        if self.x_min > self.x_max or self.y_min > self.y_max:
            raise ValueError("box min corner must not exceed max corner")


@dataclass(frozen=True)
class PolygonOutline:
    """Closed polygon in continuous image coordinates (last vertex joins first)."""

    vertices: tuple[tuple[float, float], ...]

    def __post_init__(self):
        verts = tuple((float(x), float(y)) for x, y in self.vertices)
        object.__setattr__(self, "vertices", verts)
        if len(verts) < 3:
            raise TooFewVertices(f"polygon needs >= 3 vertices, got {len(verts)}")


def _require_same_shape(a: PixelMask, b: PixelMask) -> None:
    if a.pixels.shape != b.pixels.shape:
        raise DimensionMismatch(
            f"mask dimensions differ: {a.width}x{a.height} vs {b.width}x{b.height}"
        )


def encode_rle(mask: PixelMask) -> RunLengthMask:
    """Losslessly encode a mask; the first run counts background pixels."""
    flat = mask.bits
    # boundaries between runs of equal values
    change = np.flatnonzero(np.diff(flat)) + 1
    edges = np.concatenate(([0], change, [flat.size]))
    runs = np.diff(edges).tolist()
    if flat[0] == 1:
        runs = [0] + runs
    return RunLengthMask(width=mask.width, height=mask.height, runs=tuple(runs))


def decode_rle(rle: RunLengthMask) -> PixelMask:
    """Inverse of :func:`encode_rle`."""
    total = sum(rle.runs)
    if total != rle.width * rle.height:
        raise RunSumMismatch(
            f"runs sum to {total}, expected {rle.width * rle.height}"
        )
    flat = np.zeros(total, dtype=bool)
    pos = 0
    value = False
    for run in rle.runs:
        if value:
            flat[pos : pos + run] = True
        pos += run
        value = not value
    return PixelMask(flat.reshape(rle.height, rle.width))


def iou(a: PixelMask, b: PixelMask) -> float:
    """Intersection over union; two empty masks agree perfectly (1.0)."""
    _require_same_shape(a, b)
    union = int((a.pixels | b.pixels).sum())
    if union == 0:
        return 1.0
    inter = int((a.pixels & b.pixels).sum())
    return inter / union


def box_iou(a: BoundingBox, b: BoundingBox) -> float:
    """IoU of two inclusive pixel boxes (a 1x1 box has area 1)."""
    iw = min(a.x_max, b.x_max) - max(a.x_min, b.x_min) + 1
    ih = min(a.y_max, b.y_max) - max(a.y_min, b.y_min) + 1
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    area_a = (a.x_max - a.x_min + 1) * (a.y_max - a.y_min + 1)
    area_b = (b.x_max - b.x_min + 1) * (b.y_max - b.y_min + 1)
    return inter / (area_a + area_b - inter)


def bounding_box(mask: PixelMask) -> BoundingBox:
    """Tightest box containing every foreground pixel."""
    ys, xs = np.nonzero(mask.pixels)
    if ys.size == 0:
        raise EmptyMask("cannot bound an all-background mask")
    return BoundingBox(
        x_min=int(xs.min()), y_min=int(ys.min()), x_max=int(xs.max()), y_max=int(ys.max())
    )


_EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


def connected_components(mask: PixelMask) -> tuple[int, np.ndarray]:
    """8-connected foreground components.

    Returns (count, labels) where labels is an int grid, 0 for background and
    1..count for components numbered by first appearance in row-major order.
    """
    raw, count = ndimage.label(mask.pixels, structure=_EIGHT_CONNECTED)
    if count == 0:
        return 0, raw
    flat = raw.ravel()
    fg = flat > 0
    # renumber by first row-major occurrence so the labelling is deterministic
    first_seen, order = {}, []
    for lab in flat[fg]:
        if lab not in first_seen:
            first_seen[lab] = len(order) + 1
            order.append(lab)
    remap = np.zeros(count + 1, dtype=raw.dtype)
    for lab, new in first_seen.items():
        remap[lab] = new
    return count, remap[raw]


def boundary_pixels(mask: PixelMask) -> set[tuple[int, int]]:
    """Foreground pixels with a background 4-neighbour or on the image border."""
    m = mask.pixels
    interior = m.copy()
    interior[1:, :] &= m[:-1, :]
    interior[:-1, :] &= m[1:, :]
    interior[:, 1:] &= m[:, :-1]
    interior[:, :-1] &= m[:, 1:]
    # border rows/cols can never be interior
    interior[0, :] = False
    interior[-1, :] = False
    interior[:, 0] = False
    interior[:, -1] = False
    ys, xs = np.nonzero(m & ~interior)
    return {(int(x), int(y)) for x, y in zip(xs, ys)}


def boundary_coords(mask: PixelMask) -> np.ndarray:
    """Boundary pixels as an (n, 2) array of (y, x) rows in row-major order."""
    m = mask.pixels
    interior = m.copy()
    interior[1:, :] &= m[:-1, :]
    interior[:-1, :] &= m[1:, :]
    interior[:, 1:] &= m[:, :-1]
    interior[:, :-1] &= m[:, 1:]
    interior[0, :] = False
    interior[-1, :] = False
    interior[:, 0] = False
    interior[:, -1] = False
    return np.argwhere(m & ~interior)


def rasterize_polygon(poly: PolygonOutline, width: int, height: int) -> PixelMask:
    """Fill a polygon onto a pixel grid.

    A pixel (x, y) is foreground iff its centre (x+0.5, y+0.5) is inside the
    closed polygon under the even-odd rule.  Crossings are counted on the
    vertical line through the centre, strictly below it, with a half-open
    straddle test on x so shared vertices are never double counted.
    """
    if len(poly.vertices) < 3:
        raise TooFewVertices("polygon needs >= 3 vertices")
    cx = np.arange(width) + 0.5
    cy = np.arange(height) + 0.5
    inside = np.zeros((height, width), dtype=bool)
    verts = poly.vertices
    for i in range(len(verts)):
        x1, y1 = verts[i]
        x2, y2 = verts[(i + 1) % len(verts)]
        if x1 == x2:
            continue
        straddle = (x1 > cx) != (x2 > cx)  # (width,)
        if not straddle.any():
            continue
        t = (cx[straddle] - x1) / (x2 - x1)
        y_cross = y1 + t * (y2 - y1)  # (k,)
        below = y_cross[None, :] > cy[:, None]  # (height, k)
        inside[:, straddle] ^= below
    return PixelMask(inside)


def majority_reference(masks: Sequence[PixelMask]) -> PixelMask:
    """Per-pixel strict-majority vote; ties go to background."""
    masks = list(masks)
    if not masks:
        raise EmptyInput("need at least one mask")
    first = masks[0]
    for m in masks[1:]:
        _require_same_shape(first, m)
    counts = np.zeros(first.pixels.shape, dtype=np.int32)
    for m in masks:
        counts += m.pixels
    return PixelMask(counts * 2 > len(masks))
