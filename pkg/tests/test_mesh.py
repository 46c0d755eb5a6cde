import numpy as np
import pytest

from cqwave.mesh import MeshError, SurfaceMesh, icosphere, load_mesh, write_off

TETRA_V = np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]])
TETRA_T = np.array([[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]])


def test_icosphere_counts_and_area():
    for s, n in [(0, 20), (1, 80), (2, 320), (3, 1280)]:
        mesh = icosphere(s)
        assert mesh.n_panels == n
        np.testing.assert_allclose(np.linalg.norm(mesh.vertices, axis=1), 1.0, atol=1e-15)
    assert icosphere(2).total_area() == pytest.approx(4 * np.pi, rel=0.02)
    assert icosphere(2) is icosphere(2)


def test_icosphere_normals_point_outward():
    mesh = icosphere(2)
    assert np.all(np.einsum("ij,ij->i", mesh.normals, mesh.centroids) > 0)
    assert mesh.volume() > 0


def test_orientation_repair():
    # one flipped face plus a globally inward tetrahedron
    T = TETRA_T[:, [0, 2, 1]].copy()
    T[1] = T[1, [0, 2, 1]]
    mesh = SurfaceMesh(TETRA_V, T)
    assert mesh.volume() == pytest.approx(1 / 6)
    outward = mesh.centroids - TETRA_V.mean(axis=0)
    assert np.all(np.einsum("ij,ij->i", mesh.normals, outward) > 0)


def test_reversed_file_is_flipped(tmp_path):
    mesh = icosphere(1)
    path = tmp_path / "inward.off"
    write_off((mesh.vertices, mesh.triangles[:, [0, 2, 1]]), path)
    loaded = load_mesh(path)
    assert loaded.volume() > 0
    np.testing.assert_allclose(loaded.normals, mesh.normals, atol=1e-14)


def test_round_trip(tmp_path):
    mesh = icosphere(2)
    path = tmp_path / "s.off"
    write_off(mesh, path)
    loaded = load_mesh(path)
    np.testing.assert_array_equal(loaded.vertices, mesh.vertices)
    np.testing.assert_array_equal(loaded.triangles, mesh.triangles)


def test_comments_and_inline_counts(tmp_path):
    path = tmp_path / "t.off"
    lines = ["# tetrahedron", "OFF 4 4 0"] + [" ".join(map(str, v)) + "  # vertex" for v in TETRA_V]
    lines += ["3 " + " ".join(map(str, t)) for t in TETRA_T]
    path.write_text("\n".join(lines) + "\n")
    assert load_mesh(path).n_panels == 4


def test_zero_area_triangle(tmp_path):
    V = np.vstack([TETRA_V, [0.5, 0.5, 0.0]])
    T = np.vstack([TETRA_T, [1, 2, 4]])
    with pytest.raises(MeshError, match="degenerate"):
        SurfaceMesh(V, T, require_closed=False)
    path = tmp_path / "bad.off"
    write_off((V, T), path)
    with pytest.raises(MeshError, match="bad.off"):
        load_mesh(path, require_closed=False)


def test_open_surface():
    with pytest.raises(MeshError, match="not closed"):
        SurfaceMesh(TETRA_V, TETRA_T[:3])
    assert not SurfaceMesh(TETRA_V, TETRA_T[:3], require_closed=False).closed


@pytest.mark.parametrize(
    "body,match",
    [
        ("PLY\n", "OFF"),
        ("OFF\nx y z\n", "counts"),
        ("OFF\n4 4 0\n0 0 0\n", "expected 4 vertices"),
        ("OFF\n3 1 0\n0 0 0\n1 0 0\n0 1\n3 0 1 2\n", ":5: malformed vertex"),
        ("OFF\n4 1 0\n0 0 0\n1 0 0\n0 1 0\n0 0 1\n4 0 1 2 3\n", "only triangular"),
        ("OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 7\n", "out of range"),
    ],
)
def test_parse_errors(tmp_path, body, match):
    path = tmp_path / "m.off"
    path.write_text(body)
    with pytest.raises(MeshError, match=match):
        load_mesh(path, require_closed=False)


def test_shape_validation():
    with pytest.raises(MeshError):
        SurfaceMesh(np.zeros((4, 2)), TETRA_T)
    with pytest.raises(MeshError):
        SurfaceMesh(TETRA_V, np.array([[0, 1, 9]]), require_closed=False)


def test_immutable():
    mesh = icosphere(1)
    with pytest.raises(ValueError):
        mesh.vertices[0, 0] = 3.0
