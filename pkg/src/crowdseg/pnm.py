"""Plain PBM mask files and 8-bit PGM grayscale images."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import ParseError
from .masks import PixelMask


def _tokens(data: bytes):
    """Yield whitespace-separated tokens, skipping # comments."""
    for line in data.split(b"\n"):
        body = line.split(b"#", 1)[0]
        yield from body.split()


def read_mask(path) -> PixelMask:
    """Read a plain (P1) portable bitmap; 1 = foreground."""
    data = Path(path).read_bytes()
    toks = _tokens(data)
    try:
        magic = next(toks)
        if magic != b"P1":
            raise ParseError(f"{path}: expected P1 bitmap, got {magic!r}")
        width, height = int(next(toks)), int(next(toks))
        bits = []
        for tok in toks:
            # plain PBM permits unseparated digits
            bits.extend(int(c) for c in tok.decode("ascii"))
        if len(bits) != width * height:
            raise ParseError(f"{path}: expected {width * height} bits, got {len(bits)}")
    except (StopIteration, ValueError) as exc:
        raise ParseError(f"{path}: malformed bitmap header or body") from exc
    return PixelMask.from_bits(width, height, bits)


def write_mask(mask: PixelMask, path) -> None:
    lines = [f"P1", f"{mask.width} {mask.height}"]
    for row in mask.pixels:
        lines.append(" ".join("1" if v else "0" for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def read_grayscale(path) -> np.ndarray:
    """Read an 8-bit P2/P5 portable graymap as floats in [0, 1]."""
    data = Path(path).read_bytes()
    toks = _tokens(data)
    try:
        magic = next(toks)
        if magic not in (b"P2", b"P5"):
            raise ParseError(f"{path}: expected P2/P5 graymap, got {magic!r}")
        width, height = int(next(toks)), int(next(toks))
        maxval = int(next(toks))
        if not 0 < maxval < 256:
            raise ParseError(f"{path}: only 8-bit graymaps supported (maxval {maxval})")
        if magic == b"P2":
            values = np.array([int(next(toks)) for _ in range(width * height)])
        else:
            # binary body follows the single whitespace byte after maxval
            header_end = _p5_body_offset(data)
            body = data[header_end : header_end + width * height]
            if len(body) != width * height:
                raise ParseError(f"{path}: truncated P5 body")
            values = np.frombuffer(body, dtype=np.uint8).astype(int)
    except (StopIteration, ValueError) as exc:
        raise ParseError(f"{path}: malformed graymap") from exc
    return (values / maxval).reshape(height, width)


def _p5_body_offset(data: bytes) -> int:
    """Offset of the raster: one whitespace byte after the third header field."""
    pos, fields = 0, 0
    while fields < 4:  # magic, width, height, maxval
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        fields += 1
    return pos + 1


def write_grayscale(grid: np.ndarray, path, plain: bool = False) -> None:
    """Write floats in [0, 1] as an 8-bit graymap (binary P5 unless plain)."""
    values = np.clip(np.asarray(grid, dtype=float), 0.0, 1.0)
    raw = np.rint(values * 255).astype(np.uint8)
    height, width = raw.shape
    if plain:
        lines = ["P2", f"{width} {height}", "255"]
        lines.extend(" ".join(str(v) for v in row) for row in raw)
        Path(path).write_text("\n".join(lines) + "\n")
    else:
        header = f"P5\n{width} {height}\n255\n".encode("ascii")
        Path(path).write_bytes(header + raw.tobytes())
