"""Grayscale entropy maps as binary PGM (P5) images, one pixel per cell.

Pixel value is ``round(255 * min(entropy / max_bits, 1))``. Image row 0 is
the highest y cell row, so the picture reads with y pointing up.
"""
from __future__ import annotations

import os
from pathlib import Path

import numpy as np

from .entropy import EntropyField


def entropy_image(ef: EntropyField, max_bits: float | None = None,
                  z_slice: int | None = None) -> np.ndarray:
    """8-bit image array (rows top to bottom) for a 2D field or one z cell-plane."""
    if max_bits is None:
        max_bits = ef.max_bits
    if not max_bits > 0:
        raise ValueError("max_bits must be positive")
    cells = ef.cell_entropy
    if cells.ndim == 3:
        if z_slice is None:
            raise ValueError("a 3D entropy field needs a z slice index to render")
        if not 0 <= z_slice < cells.shape[0]:
            raise ValueError(f"z slice {z_slice} out of range [0, {cells.shape[0]})")
        cells = cells[z_slice]
    scaled = np.minimum(cells / max_bits, 1.0)
    img = np.rint(255.0 * scaled).astype(np.uint8)
    return img[::-1]


def write_pgm(img: np.ndarray, path) -> Path:
    img = np.asarray(img, dtype=np.uint8)
    h, w = img.shape
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(img).tobytes())
    os.replace(tmp, path)
    return path


def read_pgm(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    fields, pos = [], 0
    while len(fields) < 4:
        while raw[pos:pos + 1].isspace():
            pos += 1
        end = pos
        while not raw[end:end + 1].isspace():
            end += 1
        fields.append(raw[pos:end])
        pos = end
    if fields[0] != b"P5":
        raise ValueError(f"{path} is not a binary PGM")
    w, h, maxval = int(fields[1]), int(fields[2]), int(fields[3])
    if maxval != 255:
        raise ValueError("only 8-bit PGM is supported")
    # exactly one whitespace byte separates the header from the pixels
    data = raw[pos + 1: pos + 1 + w * h]
    return np.frombuffer(data, dtype=np.uint8).reshape(h, w)


def render_entropy_map(ef: EntropyField, out_path, max_bits: float | None = None,
                       z_slice: int | None = None) -> Path:
    return write_pgm(entropy_image(ef, max_bits, z_slice), out_path)
