import numpy as np
import pytest

from hexsr import resample as R
from hexsr import synthetic as Y
from hexsr.errors import DegenerateTriangulationError, UnsupportedFactorError
from hexsr.observe import HexImage, RasterImage, sample_to_hex
from hexsr.sampling import HexGrid, RectGrid, hex_pitch_from_rect

T1 = hex_pitch_from_rect(4.0)


def _plane_hex_image(a=2.0, b=3.0, c=5.0, extent=60.0):
    grid = HexGrid.from_extent(T1, extent, extent)
    planes = []
    for p in (0, 1):
        rows, cols = grid.plane_shape(p)
        xy = grid.plane_coordinates(p).reshape(rows, cols, 2)
        vals = a * xy[..., 0] + b * xy[..., 1] + c
        planes.append(np.stack([vals, vals, vals]))
    return HexImage(planes[0], planes[1], grid)


def test_ni_reproduces_affine_planes():
    img = _plane_hex_image()
    target = RectGrid(1.0, 40, 40, origin=(8.0, 8.0))  # interior of the hull
    out = R.nonuniform_interpolate(img, target)
    xs = 8.0 + np.arange(40)
    want = 2.0 * xs[None, :] + 3.0 * xs[:, None] + 5.0
    assert np.max(np.abs(out.values[0] - want)) < 1e-9


def test_ni_constant_and_vertex_exactness():
    grid = HexGrid.from_extent(4.0, 40.0, 40.0, t2=8.0, approximate=True)
    p0 = np.full((3,) + grid.plane_shape(0), 9.25)
    p1 = np.full((3,) + grid.plane_shape(1), 9.25)
    out = R.nonuniform_interpolate(HexImage(p0, p1, grid), RectGrid(1.0, 20, 20, origin=(4.0, 4.0)))
    assert np.max(np.abs(out.values - 9.25)) < 1e-9

    # a target point that coincides with a lattice sample takes its exact value
    rng = np.random.default_rng(0)
    p0r = rng.uniform(0, 255, (3,) + grid.plane_shape(0))
    p1r = rng.uniform(0, 255, (3,) + grid.plane_shape(1))
    img = HexImage(p0r, p1r, grid)
    out = R.nonuniform_interpolate(img, RectGrid(4.0, 3, 3, origin=(8.0, 8.0)))
    # target (8+4i, 8+4j) hits plane-0 samples at (x/4, y/8) when y%8==0
    assert out.values[0, 0, 0] == pytest.approx(p0r[0, 1, 2], abs=1e-12)
    assert out.values[0, 2, 2] == pytest.approx(p0r[0, 2, 4], abs=1e-12)


def test_ni_fill_value_outside_hull():
    img = _plane_hex_image(extent=30.0)
    target = RectGrid(10.0, 8, 8, origin=(-15.0, -15.0))
    out = R.nonuniform_interpolate(img, target)
    assert out.values[0, 0, 0] == 0.0  # far corner is outside the hull


def test_ni_convexity_bounds():
    rng = np.random.default_rng(1)
    grid = HexGrid.from_extent(T1, 50.0, 50.0)
    p0 = rng.uniform(10, 240, (3,) + grid.plane_shape(0))
    p1 = rng.uniform(10, 240, (3,) + grid.plane_shape(1))
    out = R.nonuniform_interpolate(HexImage(p0, p1, grid), RectGrid(1.0, 30, 30, origin=(8.0, 8.0)))
    lo = min(p0.min(), p1.min())
    hi = max(p0.max(), p1.max())
    assert out.values.min() >= lo - 1e-9
    assert out.values.max() <= hi + 1e-9


def test_ni_degenerate_points_raise():
    pts = np.stack([np.arange(5.0), np.arange(5.0)], axis=1)  # collinear
    with pytest.raises(DegenerateTriangulationError):
        R.ScatterSet(pts, np.ones((5, 1)))


def test_scatterset_rejects_duplicates():
    pts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1e-12, 0.0]])
    with pytest.raises(ValueError):
        R.ScatterSet(pts, np.ones((4, 1)))


def test_bicubic_upsample_exactness():
    const = Y.constant_image(16, 31.0)
    up = R.bicubic_upsample(const, 2)
    assert up.values.shape == (3, 32, 32)
    assert up.pitch == 0.5
    assert np.max(np.abs(up.values - 31.0)) < 1e-12

    img = Y.blobs_image(16, seed=2)
    up = R.bicubic_upsample(img, 4)
    assert np.max(np.abs(up.values[:, ::4, ::4] - img.values)) < 1e-12


def test_bicubic_reproduces_cubics_interior():
    x = np.arange(33, dtype=float)
    p = ((0.05 * x - 0.8) ** 3 + 0.2 * (0.05 * x) ** 2 + 1.0) * 40.0
    plane = np.tile(p, (33, 1))
    img = RasterImage(np.stack([plane] * 3), 1.0)
    up = R.bicubic_upsample(img, 2)
    xs = np.arange(66) / 2.0
    want = ((0.05 * xs - 0.8) ** 3 + 0.2 * (0.05 * xs) ** 2 + 1.0) * 40.0
    got = up.values[0, 16, 4:-6]
    ref = want[4:-6]
    rms = np.sqrt(np.mean((got - ref) ** 2))
    assert rms < 1e-9


def test_bicubic_unsupported_factor():
    with pytest.raises(UnsupportedFactorError):
        R.bicubic_upsample(Y.constant_image(8, 1.0), 3)


def test_distance_matrix_basics():
    grid = RectGrid(1.0, 5, 5)
    dm = R.distance_matrix(np.array([[0.0, 0.0]]), grid)
    assert dm.values[0, 0] == 0.0
    assert dm.values[4, 3] == pytest.approx(5.0, abs=1e-12)  # 3-4-5 triangle


def test_distance_matrix_matches_brute_force():
    rng = np.random.default_rng(3)
    for trial in range(25):
        n_src = int(rng.integers(3, 500))
        rows = int(rng.integers(4, 50))
        cols = int(rng.integers(4, 50))
        pts = rng.uniform(-10, 60, (n_src, 2))
        grid = RectGrid(float(rng.uniform(0.5, 3.0)), rows, cols)
        dm = R.distance_matrix(pts, grid)
        tq = grid.coordinates()
        brute = np.sqrt(((tq[:, None, :] - pts[None, :, :]) ** 2).sum(-1)).min(1)
        assert np.allclose(dm.values.ravel(), brute, rtol=0, atol=0), f"trial {trial}"


def test_distance_matrix_deep_hole_bound():
    grid = HexGrid.from_extent(T1, 80.0, 80.0)
    pts = grid.coordinates()
    # target anchored at a lattice deep hole (triangle circumcenter)
    target = RectGrid(1.0, 48, 48, origin=(T1 / 2.0, grid.t2 / 6.0))
    dm = R.distance_matrix(pts, target)
    limit = T1 / np.sqrt(3.0)
    assert dm.values.max() <= limit + 1e-9
    assert dm.values.max() == pytest.approx(limit, abs=1e-6)
    assert limit == pytest.approx(2.482, abs=1e-3)


def test_distance_matrix_periodicity():
    # x-periodicity with period t1 on an ideal lattice
    grid = HexGrid.from_extent(T1, 90.0, 90.0, origin=(-10.0, -10.0))
    target = RectGrid(T1 / 4.0, 24, 24, origin=(10.0, 10.0))
    dm = R.distance_matrix(grid.coordinates(), target)
    assert np.allclose(dm.values[:, :-4], dm.values[:, 4:], atol=1e-9)

    # full 2-D periodicity on a commensurate approximate lattice
    agrid = HexGrid.from_extent(4.0, 90.0, 90.0, origin=(-10.0, -10.0), t2=8.0, approximate=True)
    target2 = RectGrid(2.0, 20, 20, origin=(10.0, 10.0))
    dm2 = R.distance_matrix(agrid.coordinates(), target2)
    assert np.allclose(dm2.values[:, :-2], dm2.values[:, 2:], atol=1e-9)
    assert np.allclose(dm2.values[:-4, :], dm2.values[4:, :], atol=1e-9)


def test_distance_matrix_from_hex_image_scatter():
    img = Y.blobs_image(48, seed=5)
    grid = HexGrid.from_extent(T1, 47.0, 47.0)
    hx = sample_to_hex(img, grid)
    scatter = R.ScatterSet.from_hex_image(hx)
    assert scatter.points.shape[0] == hx.sample_count
    dm = R.distance_matrix(scatter, RectGrid(2.0, 20, 20, origin=(2.0, 2.0)))
    assert dm.values.max() <= T1 / np.sqrt(3.0) + 1e-9
