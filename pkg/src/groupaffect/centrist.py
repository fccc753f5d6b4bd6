"""Census transform and the spatial-pyramid CENTRIST scene descriptor.

Images are 2-D ``uint8`` arrays indexed ``[row, col]``. The census code of a
pixel packs eight comparisons against its neighbors, NW N NE W E SW S SE from
the most significant bit down; a bit is set when the center is ``>=`` the
neighbor, so a flat patch maps to 255.

The descriptor concatenates 31 block histograms of 255 bins each (7905
values):

* level 0: the whole image;
* level 1: the 2x2 partition, then one centered block of the same size;
* level 2: the 4x4 partition, then a 3x3 grid of blocks of the same size
  shifted by half a block along both axes.

Within a level blocks are row-major, partition blocks first. Block edges use
floor division and the last row/column of a partition absorbs the remainder.
"""

from pathlib import Path

import numpy as np

from ._backend import kernels

HIST_BINS = 256
# Bin 0 is the complement of bin 255 under the >= convention; switching to
# the other redundant bin only needs this constant changed.
DROPPED_BIN = 0
BINS_PER_BLOCK = HIST_BINS - 1
N_BLOCKS = 31
DESCRIPTOR_DIM = N_BLOCKS * BINS_PER_BLOCK

_KEPT_BINS = np.array([b for b in range(HIST_BINS) if b != DROPPED_BIN])


class ImageTooSmallError(ValueError):
    pass


def as_gray_image(img):
    """Validate and return ``img`` as a C-contiguous ``uint8`` array."""
    arr = np.asarray(img)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D grayscale image, got shape {arr.shape}")
    if arr.dtype != np.uint8:
        if not np.issubdtype(arr.dtype, np.integer) and not np.all(np.isfinite(arr)):
            raise ValueError("image contains non-finite intensities")
        if arr.size and (arr.min() < 0 or arr.max() > 255 or np.any(arr != np.round(arr))):
            raise ValueError("intensities must be integers in [0, 255]")
        arr = arr.astype(np.uint8)
    return np.ascontiguousarray(arr)


def census_transform(img):
    """Census codes of the interior pixels; output shape is ``(h - 2, w - 2)``."""
    img = as_gray_image(img)
    h, w = img.shape
    if h < 3 or w < 3:
        raise ImageTooSmallError(f"census transform needs at least 3x3 pixels, got {w}x{h}")
    return kernels.census_transform(img)


def _edges(n, parts):
    size = n // parts
    return [(i * size, (i + 1) * size if i < parts - 1 else n) for i in range(parts)]


def _shifted(n, parts, count):
    size = n // parts
    offset = size // 2
    return [(offset + i * size, offset + (i + 1) * size) for i in range(count)]


def pyramid_blocks(height, width):
    """``(31, 4)`` array of ``(r0, r1, c0, c1)`` half-open block bounds."""
    blocks = [(0, height, 0, width)]
    for parts in (2, 4):
        rows, cols = _edges(height, parts), _edges(width, parts)
        blocks += [(r0, r1, c0, c1) for r0, r1 in rows for c0, c1 in cols]
        srows, scols = _shifted(height, parts, parts - 1), _shifted(width, parts, parts - 1)
        blocks += [(r0, r1, c0, c1) for r0, r1 in srows for c0, c1 in scols]
    return np.array(blocks, dtype=np.int64)


def block_histograms(census, blocks):
    """Raw 256-bin code counts for each block."""
    census = np.ascontiguousarray(census, dtype=np.uint8)
    return kernels.block_histograms(census, np.asarray(blocks, dtype=np.int64))


def normalize_blocks(counts):
    """Drop :data:`DROPPED_BIN` and L1-normalize each block; empty blocks stay zero."""
    kept = np.asarray(counts, dtype=np.float64)[:, _KEPT_BINS]
    totals = kept.sum(axis=1, keepdims=True)
    return np.divide(kept, totals, out=np.zeros_like(kept), where=totals > 0)


def centrist_descriptor(census):
    """7905-dim spatial-pyramid histogram of a census image."""
    census = np.asarray(census)
    if census.ndim != 2:
        raise ValueError(f"expected a 2-D census image, got shape {census.shape}")
    h, w = census.shape
    if h < 4 or w < 4:
        raise ImageTooSmallError(f"pyramid blocks need a census image of at least 4x4, got {w}x{h}")
    blocks = pyramid_blocks(h, w)
    return normalize_blocks(block_histograms(census, blocks)).ravel()


def centrist(img):
    """Descriptor straight from a grayscale image (at least 6x6 pixels)."""
    return centrist_descriptor(census_transform(img))


def read_pgm(path):
    """Read a binary PGM (P5, maxval 255) into a ``uint8`` array."""
    data = Path(path).read_bytes()
    magic, width, height, maxval, offset = _parse_pnm_header(data, path)
    if magic != b"P5":
        raise ValueError(f"{path}: expected binary PGM (P5), found {magic!r}")
    return _pnm_payload(data, offset, height, width, 1, path)[:, :, 0]


def write_pgm(path, img):
    img = as_gray_image(img)
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (w, h))
        fh.write(img.tobytes())


def _parse_pnm_header(data, path):
    fields = []
    pos = 0
    while len(fields) < 4:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ValueError(f"{path}: truncated PNM header")
        fields.append(data[start:pos])
    pos += 1  # single whitespace byte before the raster
    magic = fields[0]
    try:
        width, height, maxval = (int(v) for v in fields[1:])
    except ValueError:
        raise ValueError(f"{path}: malformed PNM header") from None
    if maxval != 255:
        raise ValueError(f"{path}: only maxval 255 is supported, got {maxval}")
    return magic, width, height, maxval, pos


def _pnm_payload(data, offset, height, width, channels, path):
    need = height * width * channels
    raster = data[offset:offset + need]
    if len(raster) < need:
        raise ValueError(f"{path}: raster truncated ({len(raster)} of {need} bytes)")
    return np.frombuffer(raster, dtype=np.uint8).reshape(height, width, channels).copy()


def read_pnm_gray(path):
    """Read P5 directly, or P6 converted to gray with Rec. 601 luma weights."""
    data = Path(path).read_bytes()
    magic, width, height, _, offset = _parse_pnm_header(data, path)
    if magic == b"P5":
        return _pnm_payload(data, offset, height, width, 1, path)[:, :, 0]
    if magic == b"P6":
        rgb = _pnm_payload(data, offset, height, width, 3, path).astype(np.float64)
        gray = rgb @ np.array([0.299, 0.587, 0.114])
        return np.clip(np.round(gray), 0, 255).astype(np.uint8)
    raise ValueError(f"{path}: unsupported PNM type {magic!r}")
