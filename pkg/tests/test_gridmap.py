import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gridnav.gridmap import (
    BadMagic,
    CellState,
    DimensionMismatch,
    MissingMetadataKey,
    OccupancyGrid,
    PIXEL_LEVELS,
    ZBand,
    footprint_collides,
    load_grid,
    project_octree,
    read_grid,
    save_grid,
    snap_pixels,
    write_grid,
)
from gridnav.octree import OctoMap, OctreeConfig
from gridnav.pointcloud import PointCloud

STATES = [CellState.OCCUPIED, CellState.FREE, CellState.UNKNOWN]


@st.composite
def grids(draw, max_side=24):
    w = draw(st.integers(1, max_side))
    h = draw(st.integers(1, max_side))
    flat = draw(st.lists(st.sampled_from(STATES), min_size=w * h, max_size=w * h))
    cell = draw(st.sampled_from([0.05, 0.1, 0.25, 1.0, 2.5]))
    ox = draw(st.floats(-100, 100, allow_nan=False))
    oy = draw(st.floats(-100, 100, allow_nan=False))
    return OccupancyGrid(np.array(flat, dtype=np.uint8).reshape(h, w), cell, (ox, oy))


def test_pixel_values_match_cell_states():
    assert (CellState.OCCUPIED, CellState.UNKNOWN, CellState.FREE) == (0, 205, 254)


def test_two_by_two_free_grid():
    pgm, meta = write_grid(OccupancyGrid.filled(2, 2))
    assert pgm == b"P5\n2 2\n255\n" + bytes([254] * 4)
    assert len(pgm) < 30 + 11
    assert meta.splitlines()[0] == "image: map.pgm"


def test_metadata_keys_in_order():
    _, meta = write_grid(OccupancyGrid.filled(3, 3, cell_size=0.05, origin=(-1.5, 2.0)))
    keys = [line.split(":")[0] for line in meta.splitlines()]
    assert keys == ["image", "resolution", "origin_x", "origin_y", "negate"]
    assert "negate: 0" in meta


def test_hundred_square_grid_payload_size():
    pgm, _ = write_grid(OccupancyGrid.filled(100, 100))
    assert len(pgm) == 10_015
    assert pgm.startswith(b"P5\n100 100\n255\n")


def test_top_row_written_first():
    # only the cell at world y = height-1 is occupied
    g = OccupancyGrid.filled(3, 2).with_rect(0, 1, 1, 2)
    pgm, _ = write_grid(g)
    assert list(pgm[-6:]) == [0, 254, 254, 254, 254, 254]


@settings(max_examples=60, deadline=None)
@given(grids())
def test_round_trip(g):
    assert read_grid(*write_grid(g)) == g


def test_bad_magic_for_ascii_pgm():
    pgm, meta = write_grid(OccupancyGrid.filled(2, 2))
    with pytest.raises(BadMagic):
        read_grid(b"P2" + pgm[2:], meta)


def test_dimension_mismatch():
    pgm, meta = write_grid(OccupancyGrid.filled(4, 4))
    with pytest.raises(DimensionMismatch):
        read_grid(pgm[:-1], meta)


def test_missing_metadata_key():
    pgm, meta = write_grid(OccupancyGrid.filled(2, 2))
    trimmed = "\n".join(l for l in meta.splitlines() if not l.startswith("origin_y"))
    with pytest.raises(MissingMetadataKey):
        read_grid(pgm, trimmed)


def test_nearest_level_exhaustive():
    values = np.arange(256)
    snapped = snap_pixels(values)
    for v, s in zip(values, snapped):
        dists = [abs(int(v) - int(level)) for level in PIXEL_LEVELS]
        assert abs(int(v) - int(s)) == min(dists)
    assert snapped[100] == CellState.OCCUPIED
    assert snapped[229] == CellState.UNKNOWN
    assert snapped[230] == CellState.FREE
    assert snapped[255] == CellState.FREE


def test_odd_pixels_load_as_nearest_state():
    pgm = b"P5\n3 1\n255\n" + bytes([100, 200, 240])
    _, meta = write_grid(OccupancyGrid.filled(3, 1))
    g = read_grid(pgm, meta)
    assert [g[x, 0] for x in range(3)] == [CellState.OCCUPIED, CellState.UNKNOWN, CellState.FREE]


def test_save_and_load(tmp_path):
    g = OccupancyGrid.filled(10, 7, cell_size=0.1).with_rect(2, 2, 5, 4, CellState.UNKNOWN)
    pgm_path, meta_path = save_grid(g, tmp_path / "m")
    assert pgm_path.endswith("m.pgm") and meta_path.endswith("m.meta")
    assert load_grid(tmp_path / "m") == g


# footprint


def test_footprint_empty_grid(open_env):
    assert not footprint_collides(open_env.grid, 0, 0, 10, 10)


def test_footprint_out_of_bounds(open_env):
    assert footprint_collides(open_env.grid, -10, 0, 10, 10)
    assert footprint_collides(open_env.grid, 91, 0, 10, 10)


def test_footprint_on_first_wall(paper_env):
    assert footprint_collides(paper_env.grid, 30, 0, 10, 10)
    assert not footprint_collides(paper_env.grid, 20, 0, 10, 10)
    assert not footprint_collides(paper_env.grid, 40, 0, 10, 10)


def test_unknown_cells_block():
    g = OccupancyGrid.filled(20, 20).with_rect(5, 5, 6, 6, CellState.UNKNOWN)
    assert footprint_collides(g, 0, 0, 10, 10)
    assert not footprint_collides(g, 10, 10, 10, 10)


@settings(max_examples=80, deadline=None)
@given(grids(max_side=16), st.integers(-2, 16), st.integers(-2, 16), st.integers(1, 6),
       st.integers(1, 6), st.integers(0, 4), st.integers(0, 4))
def test_footprint_monotone_in_size(g, x, y, w, h, dw, dh):
    if footprint_collides(g, x, y, w, h):
        assert footprint_collides(g, x, y, w + dw, h + dh)


# projection


def _map(points, **kw):
    return OctoMap(PointCloud.from_points(points), OctreeConfig(**kw))


def test_projection_covers_root_extent():
    m = _map([(0.5, 0.5, 0.5), (3.5, 2.5, 0.5)], resolution=1.0, max_depth=3)
    g = project_octree(m, ZBand(0.0, 1.0), 1.0)
    assert (g.width, g.height) == (8, 8)
    assert g.origin == m.root.lo[:2]


def test_single_voxel_projects_to_single_cell():
    # a lone point stays in the unsplit root leaf; only its voxel is painted
    m = _map([(3.5, 4.5, 0.5)], resolution=1.0, max_depth=3)
    assert m.root.is_leaf
    g = project_octree(m, ZBand(0.0, 1.0), 1.0)
    ox, oy = g.origin
    occupied = [(x, y) for y in range(g.height) for x in range(g.width) if g[x, y] == CellState.OCCUPIED]
    assert occupied == [(int(3 - ox), int(4 - oy))]


def test_leaf_above_band_is_not_projected():
    m = _map([(3.5, 4.5, 0.5), (3.5, 4.5, 7.5)], resolution=1.0, max_depth=3)
    g = project_octree(m, ZBand(5.0, 6.0), 1.0)
    assert g.count(CellState.OCCUPIED) == 0
    # no point in the band, so nothing is known to be free either
    assert g.count(CellState.UNKNOWN) == g.width * g.height


def test_free_cells_inside_band_bbox():
    pts = [(0.5, 0.5, 0.5), (5.5, 0.5, 0.5), (0.5, 5.5, 0.5), (5.5, 5.5, 0.5)]
    m = _map(pts, resolution=1.0, max_depth=3)
    g = project_octree(m, ZBand(0.0, 1.0), 1.0)
    assert g.count(CellState.OCCUPIED) == 4
    assert g.count(CellState.FREE) == 36 - 4
    assert g.count(CellState.UNKNOWN) == 64 - 36


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(*[st.floats(0, 15.99, allow_nan=False)] * 3), min_size=1, max_size=40),
       st.lists(st.tuples(*[st.floats(0, 15.99, allow_nan=False)] * 3), min_size=1, max_size=20))
def test_projection_monotone_under_added_points(base, extra):
    cfg = OctreeConfig(resolution=1.0, max_depth=4)
    band = ZBand(2.0, 9.0)
    before = OctoMap(PointCloud.from_points(base), cfg, root_lo=(0, 0, 0))
    after = OctoMap(PointCloud.from_points(base + extra), cfg, root_lo=(0, 0, 0))
    g0 = project_octree(before, band, 1.0)
    g1 = project_octree(after, band, 1.0)
    was = g0.cells == CellState.OCCUPIED
    assert np.all(g1.cells[was] == CellState.OCCUPIED)
