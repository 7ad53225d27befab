"""Chunking of report fields into ordered byte chunks, and redacted rendering.

Pictures are chunked either on a grid (coarse 4x4 / fine 16x16 by default) or
by caller-supplied object regions; descriptions split into words or
sentences; locations stay atomic.  Chunk 0 of every picture message is a
scheme header carrying the geometry, so a renderer can place black fills even
after heavy redaction.  That header chunk is by convention never redacted.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import IntEnum
from typing import List, Optional, Tuple

import numpy as np

from .encoding import Reader, u8, u16, u32
from .redactable import ChunkedMessage, FieldTag, Present, Redacted, RedactedMessage

# 0xff never occurs in valid UTF-8, so the marker cannot collide with text
TEXT_EMPTY_MARKER = b"\xff"


class ChunkMode(IntEnum):
    GridCoarse = 0
    GridFine = 1
    ObjectBased = 2
    TextWords = 3
    LocationAtomic = 4


class GridTooFine(ValueError):
    pass


class RegionOutOfBounds(ValueError):
    pass


class OverlappingRegions(ValueError):
    pass


class SchemeMismatch(ValueError):
    pass


Rect = Tuple[int, int, int, int]  # x, y, w, h in pixels


@dataclass(frozen=True)
class ChunkingScheme:
    mode: ChunkMode = ChunkMode.GridCoarse
    grid_rows: int = 4
    grid_cols: int = 4
    regions: Tuple[Rect, ...] = ()

    def header_bytes(self) -> bytes:
        out = [
            u8(self.mode),
            u16(self.grid_rows),
            u16(self.grid_cols),
            u16(len(self.regions)),
        ]
        for x, y, w, h in self.regions:
            out.append(u32(x) + u32(y) + u32(w) + u32(h))
        return b"".join(out)

    @classmethod
    def from_header_bytes(cls, data: bytes) -> "ChunkingScheme":
        r = Reader(data)
        mode = ChunkMode(r.u8())
        rows = r.u16()
        cols = r.u16()
        count = r.u16()
        regions = tuple((r.u32(), r.u32(), r.u32(), r.u32()) for _ in range(count))
        r.expect_done()
        return cls(mode, rows, cols, regions)


@dataclass(frozen=True)
class ImageDescriptor:
    """Raw RGB8 image, row-major."""

    width: int
    height: int
    data: bytes

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("image dimensions must be positive")
        if len(self.data) != self.width * self.height * 3:
            raise ValueError("data length must be width*height*3")

    def as_array(self) -> np.ndarray:
        return np.frombuffer(self.data, dtype=np.uint8).reshape(self.height, self.width, 3)

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "ImageDescriptor":
        h, w, _ = arr.shape
        return cls(w, h, np.ascontiguousarray(arr, dtype=np.uint8).tobytes())


def grid_rects(width: int, height: int, rows: int, cols: int) -> List[Rect]:
    """Row-major cell rectangles; last row/col absorb remainder pixels."""
    if rows < 1 or cols < 1:
        raise GridTooFine("rows and cols must be >= 1")
    if rows > height or cols > width:
        raise GridTooFine(f"{rows}x{cols} grid too fine for {width}x{height} image")
    base_w = width // cols
    base_h = height // rows
    rects = []
    for r in range(rows):
        y = r * base_h
        h = base_h if r < rows - 1 else height - base_h * (rows - 1)
        for c in range(cols):
            x = c * base_w
            w = base_w if c < cols - 1 else width - base_w * (cols - 1)
            rects.append((x, y, w, h))
    return rects


def _cell_chunk(img_arr: np.ndarray, rect: Rect) -> bytes:
    x, y, w, h = rect
    pixels = np.ascontiguousarray(img_arr[y : y + h, x : x + w]).tobytes()
    return u32(x) + u32(y) + u32(w) + u32(h) + pixels


def parse_cell_chunk(chunk: bytes) -> Tuple[Rect, np.ndarray]:
    r = Reader(chunk)
    x, y, w, h = r.u32(), r.u32(), r.u32(), r.u32()
    pixels = r.take(w * h * 3)
    r.expect_done()
    return (x, y, w, h), np.frombuffer(pixels, dtype=np.uint8).reshape(h, w, 3)


def chunk_image_grid(img: ImageDescriptor, rows: int, cols: int) -> ChunkedMessage:
    """Grid chunks in row-major order, preceded by the scheme header chunk."""
    mode = ChunkMode.GridFine if (rows, cols) == (16, 16) else ChunkMode.GridCoarse
    scheme = ChunkingScheme(mode, rows, cols)
    arr = img.as_array()
    chunks = [scheme.header_bytes()]
    for rect in grid_rects(img.width, img.height, rows, cols):
        chunks.append(_cell_chunk(arr, rect))
    return ChunkedMessage(FieldTag.Picture, tuple(chunks))


def _validate_regions(img: ImageDescriptor, regions: Tuple[Rect, ...]) -> None:
    for x, y, w, h in regions:
        if w < 1 or h < 1 or x < 0 or y < 0 or x + w > img.width or y + h > img.height:
            raise RegionOutOfBounds(f"region {(x, y, w, h)} outside {img.width}x{img.height}")
    for i in range(len(regions)):
        for j in range(i + 1, len(regions)):
            ax, ay, aw, ah = regions[i]
            bx, by, bw, bh = regions[j]
            if ax < bx + bw and bx < ax + aw and ay < by + bh and by < ay + ah:
                raise OverlappingRegions(f"regions {i} and {j} overlap")


def chunk_image_objects(img: ImageDescriptor, regions: List[Rect]) -> ChunkedMessage:
    """One chunk per region (input order) plus a background chunk.

    The background chunk is the image with all regions zeroed, so the union
    of chunks reproduces the image exactly.
    """
    regions = tuple(regions)
    _validate_regions(img, regions)
    scheme = ChunkingScheme(ChunkMode.ObjectBased, 1, 1, regions)
    arr = img.as_array()
    chunks = [scheme.header_bytes()]
    for rect in regions:
        chunks.append(_cell_chunk(arr, rect))
    background = arr.copy()
    for x, y, w, h in regions:
        background[y : y + h, x : x + w] = 0
    chunks.append(_cell_chunk(background, (0, 0, img.width, img.height)))
    return ChunkedMessage(FieldTag.Picture, tuple(chunks))


def chunk_picture(img: ImageDescriptor, scheme: ChunkingScheme) -> ChunkedMessage:
    if scheme.mode == ChunkMode.ObjectBased:
        return chunk_image_objects(img, list(scheme.regions))
    return chunk_image_grid(img, scheme.grid_rows, scheme.grid_cols)


def reassemble_image(msg: ChunkedMessage) -> Tuple[ImageDescriptor, ChunkingScheme]:
    """Invert chunk_picture for an unredacted message."""
    scheme = ChunkingScheme.from_header_bytes(msg.chunks[0])
    cells = [parse_cell_chunk(c) for c in msg.chunks[1:]]
    width = max(x + w for (x, y, w, h), _ in cells)
    height = max(y + h for (x, y, w, h), _ in cells)
    canvas = np.zeros((height, width, 3), dtype=np.uint8)
    if scheme.mode == ChunkMode.ObjectBased:
        # background last; paste it first so regions overwrite its zeroes
        cells = [cells[-1]] + cells[:-1]
    for (x, y, w, h), pixels in cells:
        canvas[y : y + h, x : x + w] = pixels
    return ImageDescriptor.from_array(canvas), scheme


class TextGranularity(IntEnum):
    Words = 0
    Sentences = 1


def chunk_text(text: str, granularity: TextGranularity = TextGranularity.Words) -> ChunkedMessage:
    """Split free text so that chunk concatenation reproduces it byte-exactly.

    Words keep their trailing (and any leading) whitespace as part of the
    chunk; sentences split after '.', '!' or '?' plus trailing whitespace.
    Empty input yields a single marker chunk.
    """
    if text == "":
        return ChunkedMessage(FieldTag.Description, (TEXT_EMPTY_MARKER,))
    if granularity == TextGranularity.Words:
        parts = re.findall(r"\s*\S+\s*", text)
    else:
        parts = re.findall(r"[^.!?]*[.!?]+\s*|[^.!?]+$", text)
    if "".join(parts) != text:  # whitespace-only or other pathological input
        parts = [text]
    return ChunkedMessage(FieldTag.Description, tuple(p.encode("utf-8") for p in parts))


def reassemble_text(msg: ChunkedMessage) -> str:
    if msg.chunks == (TEXT_EMPTY_MARKER,):
        return ""
    return b"".join(msg.chunks).decode("utf-8")


def chunk_location(lat_udeg: int, lon_udeg: int) -> ChunkedMessage:
    """Locations are a single atomic chunk; partial redaction is meaningless."""
    from .encoding import i32

    return ChunkedMessage(FieldTag.Location, (i32(lat_udeg) + i32(lon_udeg),))


def parse_location_chunk(chunk: bytes) -> Tuple[int, int]:
    r = Reader(chunk)
    lat, lon = r.i32(), r.i32()
    r.expect_done()
    return lat, lon


def scheme_rects(scheme: ChunkingScheme, width: int, height: int) -> List[Rect]:
    """Rectangles for content chunks 1..N of a picture message, in order."""
    if scheme.mode == ChunkMode.ObjectBased:
        return list(scheme.regions) + [(0, 0, width, height)]
    return grid_rects(width, height, scheme.grid_rows, scheme.grid_cols)


def render_redacted_image(width: int, height: int, redacted: RedactedMessage) -> ImageDescriptor:
    """Composite present chunks at their rectangles; fill redacted rects black.

    The scheme header (slot 0) must be present; it carries the geometry.
    """
    if redacted.field_tag != FieldTag.Picture:
        raise SchemeMismatch("not a picture message")
    header = redacted.slots[0]
    if not isinstance(header, Present):
        raise SchemeMismatch("scheme header chunk was redacted")
    try:
        scheme = ChunkingScheme.from_header_bytes(header.chunk)
    except (ValueError, KeyError) as e:
        raise SchemeMismatch(f"bad scheme header: {e}") from e
    rects = scheme_rects(scheme, width, height)
    if len(rects) != redacted.n - 1:
        raise SchemeMismatch("chunk count does not match scheme geometry")
    canvas = np.zeros((height, width, 3), dtype=np.uint8)
    order = list(range(1, redacted.n))
    if scheme.mode == ChunkMode.ObjectBased:
        order = [order[-1]] + order[:-1]  # background first
    for slot_index in order:
        slot = redacted.slots[slot_index]
        x, y, w, h = rects[slot_index - 1]
        if isinstance(slot, Present):
            rect, pixels = parse_cell_chunk(slot.chunk)
            if rect != (x, y, w, h):
                raise SchemeMismatch(f"chunk {slot_index} rect {rect} != scheme rect {(x, y, w, h)}")
            canvas[y : y + h, x : x + w] = pixels
        else:
            canvas[y : y + h, x : x + w] = 0
    return ImageDescriptor.from_array(canvas)
