"""Minimal ASCII PCD reader/writer.

Only the subset needed to carry x/y/z coordinates is supported. Extra
fields (rgb, intensity, ...) are parsed positionally and dropped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

import numpy as np

HEADER_KEYS = (
    "VERSION",
    "FIELDS",
    "SIZE",
    "TYPE",
    "COUNT",
    "WIDTH",
    "HEIGHT",
    "VIEWPOINT",
    "POINTS",
    "DATA",
)


class PcdError(ValueError):
    pass


class MalformedHeader(PcdError):
    pass


class CountMismatch(PcdError):
    pass


class NonAsciiData(PcdError):
    pass


class BadNumber(PcdError):
    pass


class EmptyCloud(ValueError):
    pass


class Point3(NamedTuple):
    x: float
    y: float
    z: float


class AABB(NamedTuple):
    lo: tuple[float, float, float]
    hi: tuple[float, float, float]

    def contains(self, p) -> bool:
        return all(l <= v <= h for l, v, h in zip(self.lo, p, self.hi))


@dataclass(frozen=True, eq=False)
class PointCloud:
    """Ordered points stored as an (N, 3) float64 array."""

    xyz: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))

    def __post_init__(self):
        arr = np.array(self.xyz, dtype=np.float64).reshape(-1, 3)
        if not np.all(np.isfinite(arr)):
            raise BadNumber("point coordinates must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "xyz", arr)

    @classmethod
    def from_points(cls, points: Iterable) -> "PointCloud":
        return cls(np.array([tuple(p) for p in points], dtype=np.float64).reshape(-1, 3))

    @property
    def declared_count(self) -> int:
        return len(self.xyz)

    @property
    def points(self) -> list[Point3]:
        return [Point3(*map(float, row)) for row in self.xyz]

    def __len__(self) -> int:
        return len(self.xyz)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PointCloud):
            return NotImplemented
        return self.xyz.shape == other.xyz.shape and bool(np.array_equal(self.xyz, other.xyz))

    __hash__ = None


def parse_pcd(data: bytes | str) -> PointCloud:
    if isinstance(data, bytes):
        try:
            text = data.decode("ascii")
        except UnicodeDecodeError as exc:
            raise NonAsciiData("PCD payload is not ASCII text") from exc
    else:
        text = data

    lines = text.splitlines()
    header: dict[str, list[str]] = {}
    pos = 0
    while pos < len(lines) and len(header) < len(HEADER_KEYS):
        line = lines[pos].strip()
        pos += 1
        if not line or line.startswith("#"):
            continue
        key, *rest = line.split()
        expected = HEADER_KEYS[len(header)]
        if key != expected:
            raise MalformedHeader(f"expected {expected!r}, got {key!r}")
        header[key] = rest

    missing = [k for k in HEADER_KEYS if k not in header]
    if missing:
        raise MalformedHeader(f"missing header key(s): {', '.join(missing)}")

    fields = header["FIELDS"]
    if fields[:3] != ["x", "y", "z"]:
        raise MalformedHeader("FIELDS must begin with 'x y z'")
    if header["DATA"] != ["ascii"]:
        raise NonAsciiData(f"DATA must be 'ascii', got {' '.join(header['DATA'])!r}")
    try:
        n_points = int(header["POINTS"][0])
    except (IndexError, ValueError) as exc:
        raise MalformedHeader("POINTS must be a non-negative integer") from exc
    if n_points < 0:
        raise MalformedHeader("POINTS must be a non-negative integer")

    rows = [ln for ln in lines[pos:] if ln.strip()]
    if len(rows) != n_points:
        raise CountMismatch(f"POINTS says {n_points}, found {len(rows)} data rows")

    xyz = np.empty((n_points, 3), dtype=np.float64)
    for i, row in enumerate(rows):
        parts = row.split()
        if len(parts) < 3:
            raise BadNumber(f"row {i}: expected at least 3 values")
        try:
            vals = [float(v) for v in parts[:3]]
        except ValueError as exc:
            raise BadNumber(f"row {i}: {exc}") from exc
        if not all(math.isfinite(v) for v in vals):
            raise BadNumber(f"row {i}: non-finite coordinate")
        xyz[i] = vals
    return PointCloud(xyz)


def write_pcd(cloud: PointCloud) -> bytes:
    n = len(cloud)
    out = [
        "VERSION 0.7",
        "FIELDS x y z",
        "SIZE 4 4 4",
        "TYPE F F F",
        "COUNT 1 1 1",
        f"WIDTH {n}",
        "HEIGHT 1",
        "VIEWPOINT 0 0 0 1 0 0 0",
        f"POINTS {n}",
        "DATA ascii",
    ]
    out.extend(f"{x:.6f} {y:.6f} {z:.6f}" for x, y, z in cloud.xyz)
    return ("\n".join(out) + "\n").encode("ascii")


def read_pcd_file(path) -> PointCloud:
    with open(path, "rb") as f:
        return parse_pcd(f.read())


def bounding_box(cloud: PointCloud) -> AABB:
    if len(cloud) == 0:
        raise EmptyCloud("bounding box of an empty cloud")
    lo = cloud.xyz.min(axis=0)
    hi = cloud.xyz.max(axis=0)
    return AABB(tuple(map(float, lo)), tuple(map(float, hi)))
