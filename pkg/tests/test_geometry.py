"""Tests for mesh generation, refinement, measures and the text format."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from insulab import geometry as geo
from insulab.errors import MeshError


def unit_square(h=0.25):
    return geo.build_mesh(geo.DomainSpec.rectangle(1.0, 1.0, h))


# ---------------------------------------------------------------------------
# build_mesh
# ---------------------------------------------------------------------------

def test_disk_vertices_inside_and_boundary_on_circle():
    mesh = geo.build_mesh(geo.DomainSpec.disk(1.0, 0.5))
    r = np.hypot(mesh.vertices[:, 0], mesh.vertices[:, 1])
    assert np.all(r <= 1.0 + 1e-12)
    assert np.max(np.abs(r[mesh.boundary_vertex_mask()] - 1.0)) < 1e-12


def test_unit_square_single_loop_exact_perimeter():
    mesh = unit_square()
    assert len(np.unique(mesh.boundary_component)) == 1
    assert geo.measures(mesh).perimeter == pytest.approx(4.0, abs=1e-14)


def test_annulus_two_loops():
    mesh = geo.build_mesh(geo.DomainSpec.annulus(1.0, 2.0, 0.2))
    assert len(np.unique(mesh.boundary_component)) == 2


@pytest.mark.parametrize("spec", [
    geo.DomainSpec.disk(1.0, 0.5),
    geo.DomainSpec.disk(2.0, 0.3),
    geo.DomainSpec.annulus(1.0, 2.0, 0.2),
    geo.DomainSpec.ellipse(2.0, 1.0, 0.25),
    geo.DomainSpec.rectangle(2.0, 1.0, 0.25),
    geo.DomainSpec.polygon([(0, 0), (2, 0), (2, 1), (1, 1), (1, 2), (0, 2)], 0.3),
])
def test_max_edge_length_contract(spec):
    mesh = geo.build_mesh(spec)
    geo.validate(mesh)
    assert mesh.max_edge_length() <= 1.5 * spec.edge_length + 1e-12


def test_degenerate_polygon_rejected():
    with pytest.raises(MeshError):
        geo.DomainSpec.polygon([(0, 0), (1, 0), (0.5, 0.0)], 0.1)  # zero area
    with pytest.raises(MeshError):
        geo.DomainSpec.polygon([(0, 0), (1, 1), (1, 0), (0, 1)], 0.1)  # bowtie
    with pytest.raises(MeshError):
        geo.DomainSpec.polygon([(0, 0), (0, 1), (1, 1), (1, 0)], 0.1)  # clockwise


def test_invalid_scalar_domains_rejected():
    with pytest.raises(MeshError):
        geo.DomainSpec.disk(-1.0, 0.1)
    with pytest.raises(MeshError):
        geo.DomainSpec.annulus(2.0, 1.0, 0.1)
    with pytest.raises(MeshError):
        geo.DomainSpec.disk(1.0, 0.0)


# ---------------------------------------------------------------------------
# refine
# ---------------------------------------------------------------------------

def test_refine_quadruples_triangles():
    mesh = unit_square()
    fine = geo.refine(mesh)
    assert fine.num_triangles == 4 * mesh.num_triangles


def test_refine_vertex_count_grows_by_edges():
    mesh = geo.build_mesh(geo.DomainSpec.disk(1.0, 0.5))
    fine = geo.refine(mesh)
    assert fine.num_vertices == mesh.num_vertices + len(mesh.edges())


def test_refine_square_perimeter_unchanged():
    mesh = unit_square()
    for _ in range(3):
        mesh = geo.refine(mesh)
        assert geo.measures(mesh).perimeter == pytest.approx(4.0, abs=1e-13)


def test_refine_disk_perimeter_increases_toward_circumference():
    mesh = geo.build_mesh(geo.DomainSpec.disk(1.0, 0.5))
    perims = [geo.measures(mesh).perimeter]
    for _ in range(4):
        mesh = geo.refine(mesh)
        geo.validate(mesh)
        perims.append(geo.measures(mesh).perimeter)
    assert all(a < b for a, b in zip(perims, perims[1:]))
    assert perims[-1] < 2.0 * math.pi


def test_refine_preserves_invariants_on_curved_domains():
    for spec in (geo.DomainSpec.annulus(1.0, 2.0, 0.3),
                 geo.DomainSpec.ellipse(2.0, 1.0, 0.4)):
        mesh = geo.build_mesh(spec)
        for _ in range(2):
            mesh = geo.refine(mesh)
            geo.validate(mesh)


def test_refined_area_monotone_for_inscribed_domains():
    mesh = geo.build_mesh(geo.DomainSpec.disk(1.0, 0.4))
    prev = geo.measures(mesh).area
    for _ in range(3):
        mesh = geo.refine(mesh)
        cur = geo.measures(mesh).area
        assert cur >= prev
        prev = cur


# ---------------------------------------------------------------------------
# measures
# ---------------------------------------------------------------------------

def test_unit_square_measures_exact():
    for h in (0.5, 0.25, 0.125):
        ms = geo.measures(unit_square(h))
        assert ms.area == pytest.approx(1.0, abs=1e-13)
        assert ms.perimeter == pytest.approx(4.0, abs=1e-13)


def test_disk_measures_converge():
    mesh = geo.build_mesh(geo.DomainSpec.disk(1.0, 0.5))
    for _ in range(4):
        mesh = geo.refine(mesh)
    ms = geo.measures(mesh)
    assert abs(ms.area - math.pi) / math.pi < 0.005
    assert abs(ms.perimeter - 2 * math.pi) / (2 * math.pi) < 0.005


def test_annulus_component_perimeters():
    mesh = geo.build_mesh(geo.DomainSpec.annulus(1.0, 2.0, 0.2))
    mesh = geo.refine(mesh)
    ms = geo.measures(mesh)
    assert abs(ms.perimeter - 6 * math.pi) / (6 * math.pi) < 0.005
    assert abs(ms.component_perimeters[0] - 2 * math.pi) / (2 * math.pi) < 0.005
    assert abs(ms.component_perimeters[1] - 4 * math.pi) / (4 * math.pi) < 0.005


def test_measures_sum_identities():
    mesh = geo.build_mesh(geo.DomainSpec.annulus(1.0, 2.0, 0.25))
    ms = geo.measures(mesh)
    assert ms.area == pytest.approx(float(np.sum(mesh.triangle_areas())), rel=1e-14)
    assert ms.perimeter == pytest.approx(
        float(np.sum(mesh.boundary_lengths())), rel=1e-14
    )
    assert ms.perimeter == pytest.approx(sum(ms.component_perimeters.values()),
                                         rel=1e-14)


# ---------------------------------------------------------------------------
# global invariants
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("spec,holes", [
    (geo.DomainSpec.disk(1.0, 0.3), 0),
    (geo.DomainSpec.annulus(1.0, 2.0, 0.3), 1),
    (geo.DomainSpec.rectangle(1.0, 1.0, 0.3), 0),
    (geo.DomainSpec.ellipse(2.0, 1.0, 0.4), 0),
])
def test_euler_relation(spec, holes):
    # with the unbounded face counted the characteristic is 2 - holes,
    # i.e. V - E + T = 1 - holes for the triangles alone
    mesh = geo.build_mesh(spec)
    e = len(mesh.edges())
    assert mesh.num_vertices - e + mesh.num_triangles == 1 - holes


def _rigid(pts, angle, shift):
    c, s = math.cos(angle), math.sin(angle)
    rot = np.array([[c, -s], [s, c]])
    return [tuple(rot @ np.array(p) + np.array(shift)) for p in pts]


def test_rigid_motion_invariance_of_measures():
    base = [(0.0, 0.0), (2.0, 0.0), (2.3, 1.1), (1.0, 1.9), (-0.2, 1.0)]
    ms0 = geo.measures(geo.build_mesh(geo.DomainSpec.polygon(base, 0.3)))
    moved = _rigid(base, 0.7321, (3.5, -1.25))
    ms1 = geo.measures(geo.build_mesh(geo.DomainSpec.polygon(moved, 0.3)))
    assert ms1.area == pytest.approx(ms0.area, rel=1e-12)
    assert ms1.perimeter == pytest.approx(ms0.perimeter, rel=1e-12)


@settings(max_examples=25, deadline=None)
@given(
    n=st.integers(min_value=3, max_value=9),
    seed=st.integers(min_value=0, max_value=10_000),
)
def test_random_star_polygons_mesh_cleanly(n, seed):
    rng = np.random.default_rng(seed)
    angles = np.sort(rng.uniform(0.0, 2.0 * math.pi, size=n))
    if np.min(np.diff(angles)) < 0.05:
        angles = np.linspace(0.0, 2.0 * math.pi, n, endpoint=False)
    radii = rng.uniform(0.5, 1.5, size=n)
    pts = [(r * math.cos(a), r * math.sin(a)) for r, a in zip(radii, angles)]
    # angular order is clockwise when the origin falls outside the hull
    x = np.array([p[0] for p in pts])
    y = np.array([p[1] for p in pts])
    if np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)) < 0.0:
        pts = pts[::-1]
    mesh = geo.build_mesh(geo.DomainSpec.polygon(pts, 0.4))
    geo.validate(mesh)
    assert np.all(mesh.triangle_areas() > 0.0)


# ---------------------------------------------------------------------------
# text format
# ---------------------------------------------------------------------------

def test_mesh_format_roundtrip_bit_exact(tmp_path):
    mesh = geo.build_mesh(geo.DomainSpec.disk(1.0, 0.4))
    p1 = tmp_path / "a.mesh"
    p2 = tmp_path / "b.mesh"
    geo.write_mesh(mesh, p1)
    back = geo.read_mesh(p1)
    assert np.array_equal(back.vertices, mesh.vertices)
    assert np.array_equal(back.triangles, mesh.triangles)
    assert np.array_equal(back.boundary_edges, mesh.boundary_edges)
    assert np.array_equal(back.boundary_component, mesh.boundary_component)
    geo.write_mesh(back, p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_mesh_format_header_checked(tmp_path):
    bad = tmp_path / "bad.mesh"
    bad.write_text("something else\n")
    with pytest.raises(MeshError):
        geo.read_mesh(bad)
