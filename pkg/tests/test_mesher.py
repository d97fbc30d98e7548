import warnings

import numpy as np
import pytest

from ifsdf.mesher import EmptyMeshWarning, GridSpec, Mesh, evaluate_grid, marching_cubes, sample_mesh_surface
from ifsdf.shapes import BoxField, SphereField, icosphere


def edge_use(mesh):
    t = mesh.triangles
    e = np.sort(np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]]), axis=1)
    _, counts = np.unique(e, axis=0, return_counts=True)
    return counts


@pytest.fixture(scope="module")
def sphere_mesh():
    return marching_cubes(SphereField(0.4), GridSpec.cube(128, 0.55))


def test_sphere_vertices_within_a_cell(sphere_mesh):
    h = GridSpec.cube(128, 0.55).spacing[0]
    r = np.linalg.norm(sphere_mesh.vertices, axis=1)
    assert np.all(np.abs(r - 0.4) <= h)


def test_sphere_mesh_closed_and_outward(sphere_mesh):
    assert sphere_mesh.euler_characteristic() == 2
    assert np.all(edge_use(sphere_mesh) == 2)
    centroids = sphere_mesh.vertices[sphere_mesh.triangles].mean(1)
    assert np.all((sphere_mesh.face_normals() * centroids).sum(1) > 0)
    # vertex normals come from the field gradient
    np.testing.assert_allclose(sphere_mesh.normals,
                               sphere_mesh.vertices / np.linalg.norm(sphere_mesh.vertices, axis=1, keepdims=True),
                               atol=1e-9)


def test_box_surface_error_within_cell_diagonal():
    grid = GridSpec.cube(128, 0.55)
    f = BoxField((0.3, 0.2, 0.25))
    m = marching_cubes(f, grid)
    assert np.abs(f.values(m.vertices)).max() <= grid.cell_diagonal
    assert m.euler_characteristic() == 2


def test_iso_offset_shifts_radius(sphere_mesh):
    grid = GridSpec.cube(128, 0.55)
    m = marching_cubes(SphereField(0.4), grid, iso=0.001)
    shift = np.linalg.norm(m.vertices, axis=1).mean() - np.linalg.norm(sphere_mesh.vertices, axis=1).mean()
    assert abs(shift - 0.001) <= grid.spacing[0]
    assert abs(np.linalg.norm(m.vertices, axis=1).mean() - 0.401) <= grid.spacing[0]


def test_no_crossing_gives_empty_mesh():
    with pytest.warns(EmptyMeshWarning):
        m = marching_cubes(lambda x: np.ones(len(x)), GridSpec.cube(16))
    assert m.is_empty


def test_shared_edge_vertices_are_identical():
    # marching cubes must reuse one vertex per crossed grid edge: no duplicate positions
    m = marching_cubes(SphereField(0.3, center=(0.013, -0.02, 0.007)), GridSpec.cube(48, 0.5))
    _, counts = np.unique(m.vertices, axis=0, return_counts=True)
    assert counts.max() == 1
    assert m.triangles.min() >= 0 and m.triangles.max() < len(m.vertices)


def test_grid_evaluation_matches_direct():
    grid = GridSpec((9, 10, 11), (-1, -1, -1), (1, 0.5, 1))
    f = SphereField(0.5)
    vol = evaluate_grid(f, grid)
    xs, ys, zs = grid.axes()
    assert vol[3, 4, 5] == pytest.approx(np.linalg.norm([xs[3], ys[4], zs[5]]) - 0.5)


def test_grid_validation():
    from ifsdf.geom import InputError
    with pytest.raises(InputError):
        GridSpec.cube(4)


def test_sample_single_triangle():
    m = Mesh([[0, 0, 0], [1, 0, 0], [0, 1, 0]], [[0, 1, 2]])
    pts, nrm = sample_mesh_surface(m, 2000, seed=1)
    assert np.all(pts[:, :2] >= 0) and np.all(pts[:, 0] + pts[:, 1] <= 1 + 1e-12)
    assert np.all(pts[:, 2] == 0)
    np.testing.assert_array_equal(nrm, np.tile([0, 0, 1.0], (2000, 1)))


def test_sample_area_weighting():
    # triangles of area 1.5 and 0.5
    m = Mesh([[0, 0, 0], [3, 0, 0], [0, 1, 0], [10, 0, 0], [11, 0, 0], [10, 1, 0]], [[0, 1, 2], [3, 4, 5]])
    n = 100_000
    _, _, face = sample_mesh_surface(m, n, seed=2, return_face_index=True)
    k = np.sum(face == 0)
    p = 0.75
    assert abs(k - n * p) <= 3 * np.sqrt(n * p * (1 - p))


def test_sample_sphere_radius():
    v, t = icosphere(1.0, 4)
    m = Mesh(v, t)
    pts, _ = sample_mesh_surface(m, 100_000, seed=3)
    # area-weighted mean radius of the flat faces, computed exactly per face
    a = m.face_areas()
    tri = m.vertices[m.triangles]
    r_face = np.linalg.norm(tri.mean(1), axis=1)
    assert abs(np.linalg.norm(pts, axis=1).mean() / 1.0 - 1) < 0.005
    assert abs(np.linalg.norm(pts, axis=1).mean() - (a * r_face).sum() / a.sum()) < 0.005


def test_mesh_rejects_bad_indices():
    from ifsdf.geom import InputError
    with pytest.raises(InputError):
        Mesh(np.zeros((3, 3)), [[0, 1, 3]])
