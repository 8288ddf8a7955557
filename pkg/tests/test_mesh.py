import numpy as np
import pytest
from hypothesis import given, strategies as st

from romdd import mesh
from romdd.mesh import Mesh2D, MeshError, MeshFormatError


@pytest.mark.parametrize("gen,k", [(mesh.gen_quad_grid, 4), (mesh.gen_tri_grid, 3)])
@given(n=st.integers(1, 12))
def test_grids_cover_unit_square(gen, k, n):
    m = gen(n)
    m.validate()
    assert m.elements.shape[1] == k
    assert m.area == pytest.approx(1.0, abs=1e-13)
    assert np.all(m.element_areas > 0)
    assert len(m.boundary_edges) == 4 * n
    for side in mesh.SIDES:
        tr = mesh.side_trace(m, side)
        assert len(tr) == n
        np.testing.assert_allclose(tr.breakpoints, np.linspace(0, 1, n + 1), atol=1e-15)


def test_euler_characteristic():
    # V - E + F = 1 for a simply connected region, 0 with one hole
    for m, chi in [(mesh.gen_quad_grid(5), 1), (mesh.gen_tri_grid(4), 1), (mesh.gen_circle_obstacle(0.25, 8, 3), 0)]:
        assert m.n_vertices - len(m.edges) + m.n_elements == chi


@given(r=st.floats(0.1, 0.35), nb=st.integers(4, 10), nr=st.integers(2, 5))
def test_circle_obstacle_area_balance(r, nb, nr):
    m = mesh.gen_circle_obstacle(r, nb, nr)
    m.validate()
    hole = mesh.obstacle_area(m)
    assert m.area + hole == pytest.approx(1.0, abs=1e-12)
    # the hole is a polygon inscribed in the circle
    assert hole < np.pi * r * r
    assert hole > 0.8 * np.pi * r * r
    radius = np.hypot(*(m.vertices[m.boundary_edges[m.edges_with("obstacle")]].reshape(-1, 2) - 0.5).T)
    np.testing.assert_allclose(radius, r, rtol=1e-12)


def test_boundary_owner_matches_edges():
    m = mesh.gen_tri_grid(3)
    owner, local = m.boundary_owner
    assert np.all(owner >= 0)
    k = m.elements.shape[1]
    for e, (o, l) in enumerate(zip(owner, local)):
        pair = {m.elements[o, l], m.elements[o, (l + 1) % k]}
        assert pair == set(m.boundary_edges[e])


@pytest.mark.parametrize("m", [mesh.gen_quad_grid(3), mesh.gen_tri_grid(2), mesh.gen_circle_obstacle(0.2, 4, 2)])
def test_write_parse_round_trip(m):
    text = mesh.write_mesh(m)
    back = mesh.parse_mesh(text)
    assert back.same_as(m)
    assert mesh.write_mesh(back) == text


def test_parse_reports_line_numbers():
    good = mesh.write_mesh(mesh.gen_quad_grid(1)).splitlines()
    with pytest.raises(MeshFormatError) as exc:
        mesh.parse_mesh("\n".join(["MESH2 4 1 4"] + good[1:]))
    assert exc.value.line == 1
    bad = list(good)
    bad[5] = "e 4 0 3 2 1"  # clockwise
    with pytest.raises(MeshFormatError) as exc:
        mesh.parse_mesh("\n".join(bad))
    assert exc.value.line == 6
    with pytest.raises(MeshFormatError):
        mesh.parse_mesh("\n".join(good[:-1]))


def test_validate_rejects_misplaced_side():
    m = mesh.gen_quad_grid(2)
    attrs = list(m.boundary_attrs)
    i = attrs.index("left")
    attrs[i] = "right"
    with pytest.raises(MeshError):
        Mesh2D(m.vertices, m.elements, m.boundary_edges, attrs).validate()
    with pytest.raises(MeshError):
        Mesh2D(m.vertices, m.elements, m.boundary_edges, ["north"] * len(attrs))


def test_side_trace_needs_full_cover():
    m = mesh.gen_quad_grid(2)
    keep = [i for i, a in enumerate(m.boundary_attrs) if not (a == "top" and i == m.boundary_attrs.index("top"))]
    cut = Mesh2D(m.vertices, m.elements, m.boundary_edges[keep], [m.boundary_attrs[i] for i in keep])
    with pytest.raises(MeshError):
        mesh.side_trace(cut, "top")
