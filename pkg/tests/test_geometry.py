import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ceramopt.errors import (DegenerateElement, DegenerateGeometry, GeometryError,
                             InvalidDesign)
from ceramopt.geometry import (DIRICHLET, FREE, NEUMANN, AdmissibilityConstants, BoxScenario,
                               Mesh, PointLocator, RectangleScenario, box_mesh,
                               check_admissible, extract_boundary_facets, generate_mesh,
                               local_thickness, read_mesh, rectangle_mesh, single_simplex_mesh,
                               volume, write_mesh)


def shoelace(poly):
    x, y = np.asarray(poly).T
    return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def boundary_polygon(sc, params):
    """Counter-clockwise outline of a rectangle-scenario design through its stations."""
    xs = sc.stations
    bottom, top = sc.profiles(np.asarray(params, float), xs)
    return np.vstack([np.column_stack([xs, bottom]), np.column_stack([xs[::-1], top[::-1]])])


# -- generate_mesh ---------------------------------------------------------

def test_reference_rectangle_triangle_count():
    sc = RectangleScenario(length=2.0, height=1.0, n_stations=3)
    mesh = generate_mesh(sc.design(), 4)
    assert mesh.dim == 2
    assert mesh.n_elements == 2 * 4 * 4
    assert volume(mesh) == pytest.approx(2.0, rel=1e-14)


def test_out_of_bounds_design_rejected():
    sc = RectangleScenario()
    lo, hi = sc.bounds()
    p = np.zeros(sc.n_params)
    p[2] = hi[2] + 1e-3
    with pytest.raises(InvalidDesign):
        sc.design(p)
    with pytest.raises(InvalidDesign):
        sc.design(np.full(sc.n_params, lo[0] - 1.0))


def test_halved_interior_height_matches_polygon_area():
    # every interior station loses a quarter of the height on each side
    sc = RectangleScenario(length=2.0, height=1.0, n_stations=4)
    params = np.full(sc.n_params, -0.25)
    mesh = generate_mesh(sc.design(params), 8)
    expected = shoelace(boundary_polygon(sc, params))
    assert volume(mesh) == pytest.approx(expected, rel=1e-13)
    # the interior columns are at half the reference height
    _, top = sc.profiles(params, sc.stations[1:-1])
    bottom, _ = sc.profiles(params, sc.stations[1:-1])
    np.testing.assert_allclose(top - bottom, 0.5)


def test_crossing_edges_are_degenerate():
    sc = RectangleScenario(lower_offset=-0.8, upper_offset=0.5)
    with pytest.raises(DegenerateGeometry):
        generate_mesh(sc.design(np.full(sc.n_params, -0.6)), 4)


@pytest.mark.parametrize("res", [0, -2, 2.5])
def test_bad_resolution(res):
    with pytest.raises(GeometryError):
        generate_mesh(RectangleScenario().design(), res)


def test_element_diameter_scales_like_one_over_resolution():
    sc = RectangleScenario()
    d = [generate_mesh(sc.design(), r).diameters().max() for r in (4, 8, 16)]
    assert d[0] / d[1] == pytest.approx(2.0, rel=0.05)
    assert d[1] / d[2] == pytest.approx(2.0, rel=0.05)


# -- volume ----------------------------------------------------------------

def test_volume_examples():
    assert volume(rectangle_mesh(1.0, 1.0, 3, 5)) == pytest.approx(1.0, rel=1e-14)
    assert volume(box_mesh((1.0, 1.0, 1.0), (2, 3, 2))) == pytest.approx(1.0, rel=1e-14)
    assert volume(rectangle_mesh(2.0, 0.5, 4, 2)) == pytest.approx(1.0, rel=1e-14)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-0.4, 0.45), min_size=8, max_size=8), st.sampled_from([3, 5, 8]))
def test_volume_independent_of_resolution(params, res):
    sc = RectangleScenario()
    design = sc.design(params)
    v_coarse = volume(generate_mesh(design, res))
    v_fine = volume(generate_mesh(design, 2 * res + 1))
    exact = shoelace(boundary_polygon(sc, params))
    assert v_coarse == pytest.approx(exact, rel=1e-12)
    assert v_fine == pytest.approx(exact, rel=1e-12)
    assert sc.exact_volume(np.asarray(params)) == pytest.approx(exact, rel=1e-12)


@settings(max_examples=10, deadline=None)
@given(st.lists(st.floats(-0.4, 0.45), min_size=3, max_size=3))
def test_box_volume_independent_of_resolution(params):
    design = BoxScenario().design(params)
    v = [volume(generate_mesh(design, r)) for r in (2, 4)]
    assert v[0] == pytest.approx(v[1], rel=1e-12)


# -- mesh invariants -------------------------------------------------------

@pytest.mark.parametrize("mesh", [
    generate_mesh(RectangleScenario().design(np.linspace(-0.3, 0.3, 8)), 5),
    generate_mesh(BoxScenario().design([0.2, -0.1, 0.3]), 3),
    single_simplex_mesh(2), single_simplex_mesh(3, 2.5),
], ids=["rect", "box", "tri", "tet"])
def test_mesh_invariants(mesh):
    assert (mesh.element_volumes > 0).all()
    facets, owner = extract_boundary_facets(mesh.elements)
    assert len(facets) == len(mesh.facets)
    # each boundary facet is a face of exactly one element
    for f, e in zip(facets.tolist(), owner.tolist()):
        hits = [k for k, el in enumerate(mesh.elements.tolist()) if set(f) <= set(el)]
        assert hits == [e]
    assert set(mesh.facet_tags.tolist()) <= {DIRICHLET, NEUMANN, FREE}
    assert len(mesh.tagged(DIRICHLET)) > 0 and len(mesh.tagged(NEUMANN)) > 0
    with pytest.raises(ValueError):
        mesh.nodes[0, 0] = 1.0


def test_single_simplex_volume():
    assert volume(single_simplex_mesh(3, 1.0)) == pytest.approx(1.0, rel=1e-15)
    assert volume(single_simplex_mesh(2, 0.7)) == pytest.approx(0.7, rel=1e-15)


@pytest.mark.parametrize("sc,designs", [
    (RectangleScenario(), [np.zeros(8), np.linspace(-0.4, 0.4, 8)]),
    (BoxScenario(), [np.zeros(3), np.array([0.3, -0.3, 0.1])]),
])
def test_fixed_boundary_support_is_design_and_resolution_independent(sc, designs):
    L = sc.length if hasattr(sc, "length") else sc.lengths[0]
    for params in designs:
        for res in (3, 6):
            mesh = generate_mesh(sc.design(params), res)
            d_pts = mesh.nodes[mesh.tagged_nodes(DIRICHLET)]
            n_pts = mesh.nodes[mesh.tagged_nodes(NEUMANN)]
            np.testing.assert_allclose(d_pts[:, 0], 0.0, atol=1e-14)
            np.testing.assert_allclose(n_pts[:, 0], L, atol=1e-14)
            # the D face spans the same extent as the reference shape
            h = sc.height if hasattr(sc, "height") else sc.lengths[2]
            assert d_pts[:, -1].min() == pytest.approx(0.0, abs=1e-14)
            assert d_pts[:, -1].max() == pytest.approx(h, rel=1e-14)


def test_inverted_and_degenerate_elements_rejected():
    good = single_simplex_mesh(2)
    flipped = good.elements[:, [1, 0, 2]]
    with pytest.raises(DegenerateGeometry):
        Mesh(good.nodes, flipped, good.facets, good.facet_tags)
    flat = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]])
    with pytest.raises(DegenerateElement):
        Mesh(flat, good.elements, good.facets, good.facet_tags)


def test_missing_tags_rejected():
    m = single_simplex_mesh(2)
    with pytest.raises(GeometryError):
        Mesh(m.nodes, m.elements, m.facets, ["F"] * len(m.facets))
    with pytest.raises(GeometryError):
        Mesh(m.nodes, m.elements, m.facets[:-1], m.facet_tags[:-1])


# -- admissibility ----------------------------------------------------------

def test_admissibility_constants_invariants():
    with pytest.raises(GeometryError):
        AdmissibilityConstants(math.pi / 2, 0.2, 0.05, 0.1)
    with pytest.raises(GeometryError):
        AdmissibilityConstants(0.0, 0.2, 0.05, 0.1)
    with pytest.raises(GeometryError):
        AdmissibilityConstants(0.5, 0.2, 0.11, 0.1)  # 2r > l
    with pytest.raises(GeometryError):
        AdmissibilityConstants(0.5, 0.2, 0.05, 0.0)
    c = AdmissibilityConstants.for_height(2.0)
    assert (c.theta, c.l, c.r, c.min_thickness) == pytest.approx((math.pi / 6, 0.4, 0.1, 0.4))


def test_point_locator_matches_analytic_oracle(rng):
    mesh = rectangle_mesh(2.0, 1.0, 6, 4)
    pts = rng.uniform([-0.5, -0.5], [2.5, 1.5], size=(2000, 2))
    inside = (pts[:, 0] >= 0) & (pts[:, 0] <= 2) & (pts[:, 1] >= 0) & (pts[:, 1] <= 1)
    np.testing.assert_array_equal(PointLocator(mesh).contains(pts), inside)


def test_reference_rectangle_admissible():
    sc = RectangleScenario()
    mesh = generate_mesh(sc.design(), 8)
    report = check_admissible(mesh, AdmissibilityConstants.for_height(sc.height))
    assert report.ok, report


def test_reference_box_admissible():
    mesh = box_mesh((1.0, 1.0, 1.0), (3, 3, 3))
    assert check_admissible(mesh, AdmissibilityConstants.for_height(1.0)).ok


def test_pinched_design_fails_with_diagnostics():
    sc = RectangleScenario()
    params = np.zeros(sc.n_params)
    params[[1, 5]] = -0.45  # top and bottom pulled in at the same station
    mesh = generate_mesh(sc.design(params), 8)
    report = check_admissible(mesh, AdmissibilityConstants.for_height(sc.height))
    assert not report
    assert report.thickness_violations
    node, t = report.thickness_violations[0]
    assert t < 0.2


def test_local_thickness_of_reference_rectangle():
    mesh = rectangle_mesh(2.0, 1.0, 4, 4)
    th = local_thickness(mesh)
    # interior points of the free edges see the full height
    interior = [v for v in th if 0 < mesh.nodes[v, 0] < 2]
    assert interior
    np.testing.assert_allclose([th[v] for v in interior], 1.0, rtol=1e-9)


@settings(max_examples=8, deadline=None)
@given(st.floats(0.05, 0.6), st.floats(0.1, 0.9))
def test_admissibility_monotone_in_min_thickness(t, shrink):
    sc = RectangleScenario()
    mesh = generate_mesh(sc.design(np.linspace(-0.3, 0.2, 8)), 6)
    base = AdmissibilityConstants(math.pi / 6, 0.2, 0.05, t)
    looser = AdmissibilityConstants(math.pi / 6, 0.2, 0.05, shrink * t)
    if check_admissible(mesh, base).ok:
        assert check_admissible(mesh, looser).ok


# -- ASCII mesh format -----------------------------------------------------

@pytest.mark.parametrize("mesh", [
    generate_mesh(RectangleScenario().design(np.linspace(-0.2, 0.2, 8)), 4),
    generate_mesh(BoxScenario().design([0.1, 0.0, -0.1]), 2),
], ids=["2d", "3d"])
def test_mesh_roundtrip(tmp_path, mesh):
    path = tmp_path / "mesh.txt"
    write_mesh(mesh, path)
    header = path.read_text().splitlines()[0].split()
    assert header == [str(mesh.dim), str(mesh.n_nodes), str(mesh.n_elements), str(len(mesh.facets))]
    back = read_mesh(path)
    np.testing.assert_array_equal(back.nodes, mesh.nodes)
    np.testing.assert_array_equal(back.elements, mesh.elements)
    np.testing.assert_array_equal(back.facets, mesh.facets)
    np.testing.assert_array_equal(back.facet_tags, mesh.facet_tags)


def test_malformed_mesh_file(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("2 3 1 3\n0 0\n1 0\n")
    with pytest.raises(GeometryError):
        read_mesh(p)
