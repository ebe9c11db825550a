"""2D occupancy grids: projection from an octree, PGM persistence, footprint tests."""

from __future__ import annotations

import enum
import math
import os
from dataclasses import dataclass

import numpy as np

from .octree import OctoMap


class CellState(enum.IntEnum):
    # values double as PGM pixel values
    OCCUPIED = 0
    UNKNOWN = 205
    FREE = 254


PIXEL_LEVELS = np.array([CellState.OCCUPIED, CellState.UNKNOWN, CellState.FREE], dtype=np.int16)


class GridFileError(ValueError):
    pass


class BadMagic(GridFileError):
    pass


class DimensionMismatch(GridFileError):
    pass


class MissingMetadataKey(GridFileError):
    pass


@dataclass(frozen=True, eq=False)
class OccupancyGrid:
    """``cells[y, x]`` with y growing upward; origin is the world position of
    the lower-left corner of cell (0, 0)."""

    cells: np.ndarray
    cell_size: float = 1.0
    origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        cells = np.array(self.cells, dtype=np.uint8)
        if cells.ndim != 2 or cells.size == 0:
            raise ValueError("cells must be a non-empty 2D array")
        if not np.isin(cells, PIXEL_LEVELS).all():
            raise ValueError("cells must hold CellState values")
        if not self.cell_size > 0:
            raise ValueError("cell_size must be > 0")
        cells.setflags(write=False)
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))

    @classmethod
    def filled(cls, width: int, height: int, state=CellState.FREE, **kw) -> "OccupancyGrid":
        return cls(np.full((height, width), state, dtype=np.uint8), **kw)

    @property
    def width(self) -> int:
        return self.cells.shape[1]

    @property
    def height(self) -> int:
        return self.cells.shape[0]

    def __getitem__(self, xy) -> CellState:
        x, y = xy
        return CellState(int(self.cells[y, x]))

    def with_rect(self, x0: int, y0: int, x1: int, y1: int, state=CellState.OCCUPIED) -> "OccupancyGrid":
        """Copy with cells x in [x0, x1), y in [y0, y1) set to ``state``."""
        cells = self.cells.copy()
        cells[y0:y1, x0:x1] = state
        return OccupancyGrid(cells, self.cell_size, self.origin)

    def count(self, state: CellState) -> int:
        return int(np.count_nonzero(self.cells == state))

    def __eq__(self, other) -> bool:
        if not isinstance(other, OccupancyGrid):
            return NotImplemented
        return (
            self.cell_size == other.cell_size
            and self.origin == other.origin
            and np.array_equal(self.cells, other.cells)
        )

    __hash__ = None


@dataclass(frozen=True)
class ZBand:
    z_min: float
    z_max: float

    def __post_init__(self):
        if not self.z_min < self.z_max:
            raise ValueError("z_min must be < z_max")


def project_octree(octomap: OctoMap, band: ZBand, cell_size: float) -> OccupancyGrid:
    """Flatten the occupied space that reaches into ``band`` onto the xy plane.

    Cells under an occupied max-depth voxel are occupied. Remaining cells inside the xy
    bounding box of the in-band points are free; everything else is unknown.
    """
    if not cell_size > 0:
        raise ValueError("cell_size must be > 0")
    root = octomap.root
    ox, oy = root.lo[0], root.lo[1]
    n = max(1, math.ceil(root.edge / cell_size - 1e-9))
    cells = np.full((n, n), CellState.UNKNOWN, dtype=np.uint8)

    xyz = octomap.cloud.xyz
    in_band = xyz[(xyz[:, 2] >= band.z_min) & (xyz[:, 2] <= band.z_max)]
    if len(in_band):
        (bx0, by0), (bx1, by1) = in_band[:, :2].min(axis=0), in_band[:, :2].max(axis=0)
        i0, i1 = _cell_span_closed(bx0, bx1, ox, cell_size, n)
        j0, j1 = _cell_span_closed(by0, by1, oy, cell_size, n)
        cells[j0:j1, i0:i1] = CellState.FREE

    # Each occupied leaf contributes the max-depth voxels of its own points
    # rather than its whole box, so refining a leaf never frees a cell.
    res = octomap.resolution
    vlo = np.asarray(root.lo) + octomap.point_keys * res
    keep = (vlo[:, 2] <= band.z_max) & (vlo[:, 2] + res > band.z_min)
    for vx, vy in np.unique(vlo[keep][:, :2], axis=0):
        i0, i1 = _cell_span_open(vx, vx + res, ox, cell_size, n)
        j0, j1 = _cell_span_open(vy, vy + res, oy, cell_size, n)
        cells[j0:j1, i0:i1] = CellState.OCCUPIED
    return OccupancyGrid(cells, cell_size, (ox, oy))


def _cell_span_open(a: float, b: float, origin: float, c: float, n: int) -> tuple[int, int]:
    # cells [k*c, (k+1)*c) with positive-length overlap against [a, b)
    lo = math.floor((a - origin) / c)
    hi = math.ceil((b - origin) / c)
    return max(lo, 0), min(hi, n)


def _cell_span_closed(a: float, b: float, origin: float, c: float, n: int) -> tuple[int, int]:
    # cells touching the closed interval [a, b]
    lo = math.floor((a - origin) / c)
    hi = math.floor((b - origin) / c) + 1
    return max(lo, 0), min(hi, n)


def footprint_collides(grid: OccupancyGrid, x: int, y: int, w: int, h: int) -> bool:
    if w < 1 or h < 1:
        raise ValueError("footprint must be at least 1x1")
    if x < 0 or y < 0 or x + w > grid.width or y + h > grid.height:
        return True
    return bool(np.any(grid.cells[y : y + h, x : x + w] != CellState.FREE))


# persistence


def write_grid(grid: OccupancyGrid, image_name: str = "map.pgm") -> tuple[bytes, str]:
    """Return ``(pgm_bytes, metadata_text)``. Raster row 0 is the top of the map."""
    header = f"P5\n{grid.width} {grid.height}\n255\n".encode("ascii")
    pgm = header + np.flipud(grid.cells).tobytes()
    meta = (
        f"image: {image_name}\n"
        f"resolution: {grid.cell_size!r}\n"
        f"origin_x: {grid.origin[0]!r}\n"
        f"origin_y: {grid.origin[1]!r}\n"
        "negate: 0\n"
    )
    return pgm, meta


META_KEYS = ("image", "resolution", "origin_x", "origin_y", "negate")


def parse_metadata(text: str) -> dict[str, str]:
    meta = {}
    for line in text.splitlines():
        if not line.strip():
            continue
        key, sep, value = line.partition(":")
        if not sep:
            raise GridFileError(f"bad metadata line {line!r}")
        meta[key.strip()] = value.strip()
    for key in META_KEYS:
        if key not in meta:
            raise MissingMetadataKey(key)
    return meta


def _read_token(data: bytes, pos: int) -> tuple[bytes, int]:
    while pos < len(data) and data[pos : pos + 1].isspace():
        pos += 1
    if data[pos : pos + 1] == b"#":
        while pos < len(data) and data[pos : pos + 1] != b"\n":
            pos += 1
        return _read_token(data, pos)
    start = pos
    while pos < len(data) and not data[pos : pos + 1].isspace():
        pos += 1
    return data[start:pos], pos


def snap_pixels(values: np.ndarray) -> np.ndarray:
    """Map arbitrary 8-bit values to the nearest of the three cell levels."""
    v = np.asarray(values, dtype=np.int16)
    idx = np.abs(v[..., None] - PIXEL_LEVELS).argmin(axis=-1)
    return PIXEL_LEVELS[idx].astype(np.uint8)


def read_grid(pgm: bytes, meta_text: str) -> OccupancyGrid:
    if pgm[:2] != b"P5":
        raise BadMagic(f"expected P5, got {pgm[:2]!r}")
    pos = 2
    try:
        tok, pos = _read_token(pgm, pos)
        width = int(tok)
        tok, pos = _read_token(pgm, pos)
        height = int(tok)
        tok, pos = _read_token(pgm, pos)
        maxval = int(tok)
    except ValueError as exc:
        raise GridFileError("malformed PGM header") from exc
    if maxval != 255:
        raise GridFileError(f"maxval must be 255, got {maxval}")
    payload = pgm[pos + 1 :]
    if width < 1 or height < 1 or len(payload) != width * height:
        raise DimensionMismatch(f"{width}x{height} header but {len(payload)} pixel bytes")
    meta = parse_metadata(meta_text)
    raster = np.frombuffer(payload, dtype=np.uint8).reshape(height, width)
    cells = np.flipud(snap_pixels(raster))
    return OccupancyGrid(
        cells,
        float(meta["resolution"]),
        (float(meta["origin_x"]), float(meta["origin_y"])),
    )


def save_grid(grid: OccupancyGrid, prefix) -> tuple[str, str]:
    """Write ``prefix.pgm`` and ``prefix.meta``; returns both paths."""
    prefix = str(prefix)
    pgm_path, meta_path = prefix + ".pgm", prefix + ".meta"
    pgm, meta = write_grid(grid, os.path.basename(pgm_path))
    with open(pgm_path, "wb") as f:
        f.write(pgm)
    with open(meta_path, "w") as f:
        f.write(meta)
    return pgm_path, meta_path


def load_grid(prefix) -> OccupancyGrid:
    prefix = str(prefix)
    with open(prefix + ".pgm", "rb") as f:
        pgm = f.read()
    with open(prefix + ".meta") as f:
        meta = f.read()
    return read_grid(pgm, meta)
