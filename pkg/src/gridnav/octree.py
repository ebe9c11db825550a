"""Point-count octree over a cubic root region.

A node splits into eight children while it holds more than
``split_threshold`` points and sits above ``max_depth``. Leaves holding at
least one point are occupied, the rest are free. Child boxes are half-open
``[lo, hi)`` on every axis; the maximal faces of the root are closed so
every point inside the root lands in exactly one leaf.

Child index bit layout: bit 0 = upper x half, bit 1 = upper y, bit 2 = upper z.

Points are keyed once to integer max-depth voxel coordinates and the tree
splits on key bits, so boundary points never disagree between levels.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .pointcloud import AABB, EmptyCloud, PointCloud, bounding_box


class CloudExceedsRootCube(ValueError):
    pass


class VoxelState(enum.Enum):
    OCCUPIED = "occupied"
    FREE = "free"
    OUTSIDE = "outside"


@dataclass(frozen=True)
class OctreeConfig:
    resolution: float = 1.0
    max_depth: int = 8
    split_threshold: int = 1

    def __post_init__(self):
        if not self.resolution > 0:
            raise ValueError("resolution must be > 0")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.split_threshold < 1:
            raise ValueError("split_threshold must be >= 1")

    @property
    def root_edge(self) -> float:
        return self.resolution * 2**self.max_depth


class OctreeNode:
    __slots__ = ("lo", "edge", "depth", "path", "children", "indices")

    def __init__(self, lo, edge, depth, indices, path=(0, 0, 0)):
        self.lo = lo
        self.edge = edge
        self.depth = depth
        # integer coordinates of this node among the 2**depth nodes per axis
        self.path = path
        self.children: list[OctreeNode] | None = None
        self.indices = indices

    @property
    def is_leaf(self) -> bool:
        return self.children is None

    @property
    def count(self) -> int:
        return len(self.indices)

    @property
    def occupied(self) -> bool:
        return self.is_leaf and len(self.indices) >= 1

    @property
    def box(self) -> AABB:
        return AABB(self.lo, tuple(v + self.edge for v in self.lo))

    def child_path(self, k: int) -> tuple[int, int, int]:
        return tuple(2 * self.path[i] + ((k >> i) & 1) for i in range(3))


def _root_lo(cloud: PointCloud, cfg: OctreeConfig) -> tuple[float, float, float]:
    """Root corner snapped to the resolution lattice, cube centred on the bbox."""
    box = bounding_box(cloud)
    edge = cfg.root_edge
    res = cfg.resolution
    lo = []
    for axis in range(3):
        bmin, bmax = box.lo[axis], box.hi[axis]
        if bmax - bmin > edge:
            raise CloudExceedsRootCube(
                f"cloud extent {bmax - bmin:g} exceeds root edge {edge:g} on axis {axis}"
            )
        cand = math.floor(((bmin + bmax) / 2 - edge / 2) / res) * res
        if not (cand <= bmin and bmax <= cand + edge):
            cand = math.floor(bmin / res) * res
        if not (cand <= bmin and bmax <= cand + edge):
            raise CloudExceedsRootCube(f"cloud does not fit a lattice-aligned root on axis {axis}")
        lo.append(float(cand))
    return tuple(lo)


class OctoMap:
    """Built octree plus the cloud it was built from."""

    def __init__(self, cloud: PointCloud, cfg: OctreeConfig, root_lo=None):
        if len(cloud) == 0:
            raise EmptyCloud("cannot build an octree from an empty cloud")
        self.cfg = cfg
        self.cloud = cloud
        lo = tuple(map(float, root_lo)) if root_lo is not None else _root_lo(cloud, cfg)
        edge = cfg.root_edge
        xyz = cloud.xyz
        inside = np.all((xyz >= lo) & (xyz <= np.add(lo, edge)), axis=1)
        if not inside.all():
            raise CloudExceedsRootCube("cloud does not fit inside the root cube")
        self._keys = self._key_array(xyz, lo)
        self.root = OctreeNode(lo, edge, 0, np.arange(len(xyz)))
        self._build(self.root)

    def _key_array(self, xyz: np.ndarray, lo) -> np.ndarray:
        top = 2**self.cfg.max_depth - 1
        return np.clip(np.floor((xyz - lo) / self.cfg.resolution), 0, top).astype(np.int64)

    # construction

    def _build(self, node: OctreeNode) -> None:
        stack = [node]
        root_lo = node.lo
        while stack:
            n = stack.pop()
            if n.count <= self.cfg.split_threshold or n.depth >= self.cfg.max_depth:
                continue
            shift = self.cfg.max_depth - n.depth - 1
            bits = (self._keys[n.indices] >> shift) & 1
            codes = bits[:, 0] | (bits[:, 1] << 1) | (bits[:, 2] << 2)
            half = n.edge / 2
            n.children = []
            for k in range(8):
                path = n.child_path(k)
                lo = tuple(root_lo[i] + path[i] * half for i in range(3))
                n.children.append(OctreeNode(lo, half, n.depth + 1, n.indices[codes == k], path))
            stack.extend(n.children)

    # queries

    @property
    def point_keys(self) -> np.ndarray:
        """(N, 3) integer max-depth voxel coordinates, one row per cloud point."""
        return self._keys

    @property
    def root_bounds(self) -> AABB:
        return self.root.box

    @property
    def resolution(self) -> float:
        return self.cfg.resolution

    def iter_nodes(self) -> Iterator[OctreeNode]:
        """Depth-first, children visited in index order 0..7."""
        stack = [self.root]
        while stack:
            n = stack.pop()
            yield n
            if n.children is not None:
                stack.extend(reversed(n.children))

    def leaves(self) -> Iterator[OctreeNode]:
        return (n for n in self.iter_nodes() if n.is_leaf)

    def in_root(self, p) -> bool:
        lo = self.root.lo
        e = self.root.edge
        return all(lo[i] <= p[i] <= lo[i] + e for i in range(3))

    def voxel_key(self, p) -> tuple[int, int, int]:
        """Integer max-depth voxel holding ``p`` (clamped onto the root)."""
        return tuple(int(v) for v in self._key_array(np.asarray(p, dtype=np.float64)[None], self.root.lo)[0])

    def locate(self, p) -> OctreeNode | None:
        if not self.in_root(p):
            return None
        key = self.voxel_key(p)
        node = self.root
        while node.children is not None:
            shift = self.cfg.max_depth - node.depth - 1
            node = node.children[sum(((key[i] >> shift) & 1) << i for i in range(3))]
        return node

    def occupied_voxels(self) -> set[tuple[int, int, int]]:
        """Max-depth voxels holding at least one point, read off the leaves:
        a leaf's path gives the high bits, the point's own key the rest."""
        out = set()
        depth = self.cfg.max_depth
        for leaf in self.leaves():
            below = depth - leaf.depth
            low = self._keys[leaf.indices] & ((1 << below) - 1)
            base = np.array(leaf.path, dtype=np.int64) << below
            out.update(map(tuple, (base + low).tolist()))
        return out


def build_octree(cloud: PointCloud, cfg: OctreeConfig | None = None) -> OctoMap:
    return OctoMap(cloud, cfg or OctreeConfig())


def occupied_leaves(octomap: OctoMap) -> list[tuple[AABB, int]]:
    return [(n.box, n.depth) for n in octomap.leaves() if n.count >= 1]


def query_voxel(octomap: OctoMap, p) -> VoxelState:
    leaf = octomap.locate(p)
    if leaf is None:
        return VoxelState.OUTSIDE
    return VoxelState.OCCUPIED if leaf.count >= 1 else VoxelState.FREE


def dump_leaves(octomap: OctoMap) -> str:
    """Debug dump, one occupied leaf per line: ``lo_x lo_y lo_z edge depth``."""
    lines = [
        f"{box.lo[0]:g} {box.lo[1]:g} {box.lo[2]:g} {box.hi[0] - box.lo[0]:g} {depth}"
        for box, depth in occupied_leaves(octomap)
    ]
    return "\n".join(lines) + ("\n" if lines else "")
