"""Synthetic fixture corpora for desk-scale experiments and demos.

Unambiguous images get annotation pools that are near-identical rectangles;
ambiguous ones get pools split 3-2 between two disjoint objects, so the
majority reference stays non-empty while redundant annotations carry real
diversity.  Matching grayscale blob images are generated so the built-in
classifier has something to look at.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .ambiguity import AMBIGUOUS, UNAMBIGUOUS
from .diversity import AnnotationSet
from .manifest import ImageRecord, MaskAnnotation, write_manifest
from .masks import PixelMask, encode_rle
from .pnm import write_grayscale


def _jittered_rect(size: int, rect: tuple[int, int, int, int], rng, jitter: int) -> PixelMask:
    y0, y1, x0, x1 = rect
    if jitter:
        y0 = int(np.clip(y0 + rng.integers(-jitter, jitter + 1), 0, size - 2))
        y1 = int(np.clip(y1 + rng.integers(-jitter, jitter + 1), y0 + 1, size))
        x0 = int(np.clip(x0 + rng.integers(-jitter, jitter + 1), 0, size - 2))
        x1 = int(np.clip(x1 + rng.integers(-jitter, jitter + 1), x0 + 1, size))
    px = np.zeros((size, size), dtype=bool)
    px[y0:y1, x0:x1] = True
    return PixelMask(px)


def _one_edge_nudged_rect(size: int, rect: tuple[int, int, int, int], rng) -> PixelMask:
    y0, y1, x0, x1 = rect
    edge = int(rng.integers(0, 4))
    delta = 1 if rng.random() < 0.5 else -1
    if edge == 0:
        y0 = int(np.clip(y0 + delta, 0, y1 - 1))
    elif edge == 1:
        y1 = int(np.clip(y1 + delta, y0 + 1, size))
    elif edge == 2:
        x0 = int(np.clip(x0 + delta, 0, x1 - 1))
    else:
        x1 = int(np.clip(x1 + delta, x0 + 1, size))
    px = np.zeros((size, size), dtype=bool)
    px[y0:y1, x0:x1] = True
    return PixelMask(px)


def _pool_for_label(label: str, size: int, pool_size: int, rng) -> list[PixelMask]:
    if label == UNAMBIGUOUS:
        rect = (size // 4, 3 * size // 4, size // 4, 3 * size // 4)
        masks = [_jittered_rect(size, rect, rng, jitter=0) for _ in range(pool_size)]
        if rng.random() < 0.7:  # at most one lightly nudged drawer per pool
            masks[int(rng.integers(0, pool_size))] = _one_edge_nudged_rect(size, rect, rng)
        return masks
    # two disjoint interpretations, majority-side first count = ceil(pool/2) + ...
    left = (size // 5, 3 * size // 5, size // 10, 2 * size // 5)
    right = (2 * size // 5, 9 * size // 10, 3 * size // 5, 9 * size // 10)
    majority = pool_size // 2 + 1
    masks = [_jittered_rect(size, left, rng, 1) for _ in range(majority)]
    masks += [_jittered_rect(size, right, rng, 1) for _ in range(pool_size - majority)]
    order = rng.permutation(pool_size)
    return [masks[i] for i in order]


def allocation_corpus(
    seed: int,
    n_images: int = 100,
    ambiguous_frac: float = 0.3,
    pool_size: int = 5,
    size: int = 40,
) -> tuple[dict[str, AnnotationSet], dict[str, str]]:
    """Annotation pools plus ground-truth ambiguity labels."""
    rng = np.random.default_rng(seed)
    n_ambiguous = round(n_images * ambiguous_frac)
    sets: dict[str, AnnotationSet] = {}
    labels: dict[str, str] = {}
    flags = np.array([True] * n_ambiguous + [False] * (n_images - n_ambiguous))
    rng.shuffle(flags)
    for k, is_ambiguous in enumerate(flags):
        image_id = f"img{k:04d}"
        label = AMBIGUOUS if is_ambiguous else UNAMBIGUOUS
        labels[image_id] = label
        sets[image_id] = AnnotationSet(
            image_id, _pool_for_label(label, size, pool_size, rng)
        )
    return sets, labels


def blob_image(
    rng, size: int, n_blobs: int, background: float = 0.25, noise: float = 0.01
) -> np.ndarray:
    """Grayscale image with bright Gaussian blobs on a flat background."""
    yy, xx = np.mgrid[0:size, 0:size].astype(float)
    img = np.full((size, size), background)
    if n_blobs == 1:
        centers = [(size / 2 + rng.uniform(-size / 8, size / 8),
                    size / 2 + rng.uniform(-size / 8, size / 8))]
        sigmas = [rng.uniform(size / 8, size / 5)]
    else:
        # "scattered" means scattered: keep centres at least a quarter image
        # apart so a blob pair cannot masquerade as one elongated object
        margin, min_sep = size / 6, size / 4
        centers: list[tuple[float, float]] = []
        attempts = 0
        while len(centers) < n_blobs:
            c = (rng.uniform(margin, size - margin), rng.uniform(margin, size - margin))
            if all(np.hypot(c[0] - o[0], c[1] - o[1]) >= min_sep for o in centers):
                centers.append(c)
            attempts += 1
            if attempts > 200:  # earlier picks may block the box; start over
                centers.clear()
                attempts = 0
        sigmas = [rng.uniform(size / 16, size / 10) for _ in range(n_blobs)]
    for (cy, cx), s in zip(centers, sigmas):
        img += rng.uniform(0.5, 0.7) * np.exp(
            -((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * s * s)
        )
    img += rng.normal(0.0, noise, size=(size, size))
    return np.clip(img, 0.0, 1.0)


def classifier_corpus(
    seed: int, n_images: int = 400, size: int = 64, ambiguous_frac: float = 0.5
) -> tuple[list[np.ndarray], list[int]]:
    """Blob images with labels +1 (single blob) / -1 (2-4 scattered blobs)."""
    rng = np.random.default_rng(seed)
    n_ambiguous = round(n_images * ambiguous_frac)
    flags = np.array([True] * n_ambiguous + [False] * (n_images - n_ambiguous))
    rng.shuffle(flags)
    images, labels = [], []
    for is_ambiguous in flags:
        n_blobs = int(rng.integers(2, 5)) if is_ambiguous else 1
        images.append(blob_image(rng, size, n_blobs))
        labels.append(-1 if is_ambiguous else 1)
    return images, labels


def write_synthetic_corpus(
    out_dir,
    seed: int,
    n_images: int = 40,
    ambiguous_frac: float = 0.3,
    pool_size: int = 5,
    size: int = 48,
) -> Path:
    """Write images plus a manifest with annotation pools and labels.

    Grayscale blobs are placed where the drawn objects sit, so the same corpus
    serves both the allocation experiments and classifier training.
    """
    out_dir = Path(out_dir)
    image_dir = out_dir / "images"
    image_dir.mkdir(parents=True, exist_ok=True)
    sets, labels = allocation_corpus(
        seed, n_images=n_images, ambiguous_frac=ambiguous_frac,
        pool_size=pool_size, size=size,
    )
    img_rng = np.random.default_rng(seed + 1)
    records = []
    for k, image_id in enumerate(sorted(sets)):
        label = labels[image_id]
        n_blobs = 1 if label == UNAMBIGUOUS else int(img_rng.integers(2, 5))
        grid = blob_image(img_rng, size, n_blobs)
        rel = f"images/{image_id}.pgm"
        write_grayscale(grid, out_dir / rel)
        records.append(
            ImageRecord(
                image_id=image_id,
                width=size,
                height=size,
                source="synthetic",
                path=rel,
                annotations=[
                    MaskAnnotation(worker_id=f"drawer{j:02d}", timestamp=float(k * 100 + j), rle=encode_rle(m))
                    for j, m in enumerate(sets[image_id].masks)
                ],
                labels={"judgers": label},
            )
        )
    manifest_path = out_dir / "manifest.jsonl"
    write_manifest(records, manifest_path)
    return manifest_path
