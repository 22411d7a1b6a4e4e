"""Structured triangulations of disks, annuli, ellipses and polygons.

The generators are deterministic and dependency-free: disks are meshed by
concentric rings with six extra vertices per ring, annuli and ellipses by
ring lattices, and polygons by ear clipping followed by uniform midpoint
refinement.  Curved boundaries are approximated by inscribed polygons whose
vertices lie exactly on the true curve; midpoint refinement projects new
boundary vertices back onto the curve, which keeps the geometric error at
second order in the edge length.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import MeshError

MESH_FORMAT_HEADER = "insulab-mesh v1"

DISK = "disk"
ANNULUS = "annulus"
POLYGON = "polygon"
ELLIPSE = "ellipse"


# ---------------------------------------------------------------------------
# Domain specification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DomainSpec:
    """A planar domain family member plus the target mesh edge length."""

    kind: str
    edge_length: float
    params: tuple[float, ...] = ()
    points: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        if self.edge_length <= 0.0:
            raise MeshError("target edge length must be positive")
        if self.kind == DISK:
            (r,) = self.params
            if r <= 0.0:
                raise MeshError("disk radius must be positive")
        elif self.kind == ANNULUS:
            r_in, r_out = self.params
            if not 0.0 < r_in < r_out:
                raise MeshError("annulus radii must satisfy 0 < r_in < r_out")
        elif self.kind == ELLIPSE:
            a, b = self.params
            if a <= 0.0 or b <= 0.0:
                raise MeshError("ellipse semi-axes must be positive")
        elif self.kind == POLYGON:
            _validate_polygon(np.asarray(self.points, dtype=float))
        else:
            raise MeshError(f"unknown domain kind {self.kind!r}")

    @classmethod
    def disk(cls, radius: float, edge_length: float) -> "DomainSpec":
        return cls(DISK, edge_length, (float(radius),))

    @classmethod
    def annulus(cls, r_in: float, r_out: float, edge_length: float) -> "DomainSpec":
        return cls(ANNULUS, edge_length, (float(r_in), float(r_out)))

    @classmethod
    def ellipse(cls, a: float, b: float, edge_length: float) -> "DomainSpec":
        return cls(ELLIPSE, edge_length, (float(a), float(b)))

    @classmethod
    def polygon(cls, vertices, edge_length: float) -> "DomainSpec":
        pts = tuple((float(x), float(y)) for x, y in vertices)
        return cls(POLYGON, edge_length, (), pts)

    @classmethod
    def rectangle(cls, width: float, height: float, edge_length: float) -> "DomainSpec":
        w, h = float(width), float(height)
        return cls.polygon([(0.0, 0.0), (w, 0.0), (w, h), (0.0, h)], edge_length)


def _validate_polygon(pts: np.ndarray):
    if pts.ndim != 2 or pts.shape[0] < 3 or pts.shape[1] != 2:
        raise MeshError("polygon needs at least three planar vertices")
    x, y = pts[:, 0], pts[:, 1]
    area2 = np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))
    scale = float(np.max(np.abs(pts)) + 1.0)
    if area2 <= 1e-14 * scale * scale:
        raise MeshError(
            "degenerate polygon: vertices must be counterclockwise with area > 0"
        )
    n = len(pts)
    for i in range(n):
        a0, a1 = pts[i], pts[(i + 1) % n]
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or (i + 1) % n == j:
                continue
            b0, b1 = pts[j], pts[(j + 1) % n]
            if _segments_intersect(a0, a1, b0, b1):
                raise MeshError(
                    f"degenerate polygon: edges {i} and {j} intersect"
                )


def _segments_intersect(a0, a1, b0, b1) -> bool:
    def orient(p, q, r):
        return (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])

    d1 = orient(b0, b1, a0)
    d2 = orient(b0, b1, a1)
    d3 = orient(a0, a1, b0)
    d4 = orient(a0, a1, b1)
    return ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0))


# ---------------------------------------------------------------------------
# Mesh container
# ---------------------------------------------------------------------------

@dataclass
class TriMesh:
    """A conforming triangulation with oriented boundary loops.

    Triangles are counterclockwise.  Boundary edges are oriented along
    their loop (domain on the left) and tagged with the index of the
    boundary component they belong to: annuli have components 0 (inner)
    and 1 (outer), every other domain has the single component 0.
    """

    vertices: np.ndarray                 # (V, 2) float64
    triangles: np.ndarray                # (T, 3) int32, CCW
    boundary_edges: np.ndarray           # (B, 2) int32, oriented
    boundary_component: np.ndarray       # (B,) int32
    domain: DomainSpec | None = None

    @property
    def num_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def num_triangles(self) -> int:
        return self.triangles.shape[0]

    def triangle_areas(self) -> np.ndarray:
        p0 = self.vertices[self.triangles[:, 0]]
        p1 = self.vertices[self.triangles[:, 1]]
        p2 = self.vertices[self.triangles[:, 2]]
        u = p1 - p0
        v = p2 - p0
        return 0.5 * (u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0])

    def boundary_lengths(self) -> np.ndarray:
        a = self.vertices[self.boundary_edges[:, 0]]
        b = self.vertices[self.boundary_edges[:, 1]]
        return np.hypot(*(b - a).T)

    def boundary_vertex_mask(self) -> np.ndarray:
        mask = np.zeros(self.num_vertices, dtype=bool)
        mask[self.boundary_edges.ravel()] = True
        return mask

    def edges(self) -> np.ndarray:
        """All undirected edges as sorted index pairs, each listed once."""
        tri = self.triangles
        raw = np.vstack([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]])
        raw.sort(axis=1)
        return np.unique(raw, axis=0)

    def max_edge_length(self) -> float:
        e = self.edges()
        d = self.vertices[e[:, 1]] - self.vertices[e[:, 0]]
        return float(np.max(np.hypot(d[:, 0], d[:, 1])))

    def diameter(self) -> float:
        lo = self.vertices.min(axis=0)
        hi = self.vertices.max(axis=0)
        return float(np.hypot(*(hi - lo)))


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

def validate(mesh: TriMesh):
    """Check all mesh invariants, raising MeshError on the first violation."""
    areas = mesh.triangle_areas()
    if np.any(areas <= 0.0):
        raise MeshError("triangle with non-positive signed area")

    tri = mesh.triangles
    raw = np.vstack([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]])
    raw.sort(axis=1)
    uniq, counts = np.unique(raw, axis=0, return_counts=True)
    if np.any(counts > 2):
        raise MeshError("edge shared by more than two triangles")
    rim = {tuple(e) for e in uniq[counts == 1]}
    listed = {tuple(sorted(e)) for e in mesh.boundary_edges.tolist()}
    if rim != listed:
        raise MeshError("boundary edge list does not match single-triangle edges")

    # each loop is closed: along the oriented edges of one component,
    # every vertex has exactly one successor and one predecessor
    comps = np.unique(mesh.boundary_component)
    for comp in comps:
        edges = mesh.boundary_edges[mesh.boundary_component == comp]
        heads = edges[:, 0]
        tails = edges[:, 1]
        if (len(np.unique(heads)) != len(heads)
                or len(np.unique(tails)) != len(tails)
                or set(heads.tolist()) != set(tails.tolist())):
            raise MeshError(f"boundary component {comp} is not a closed loop")

    expected = 2 if (mesh.domain is not None and mesh.domain.kind == ANNULUS) else None
    if expected is not None and len(comps) != expected:
        raise MeshError(f"expected {expected} boundary loops, found {len(comps)}")

    order = np.lexsort((mesh.vertices[:, 1], mesh.vertices[:, 0]))
    pts = mesh.vertices[order]
    gaps = np.hypot(*(pts[1:] - pts[:-1]).T)
    if np.any(gaps < 1e-12 * mesh.diameter()):
        raise MeshError("duplicate vertices within tolerance")


# ---------------------------------------------------------------------------
# Structured generators
# ---------------------------------------------------------------------------

def _merge_rings(inner: list[int], outer: list[int], tris: list):
    """Triangulate the strip between two concentric vertex rings.

    Both rings are ordered by increasing angle starting at angle 0; the
    two-pointer merge keeps the angular mismatch of every strip edge below
    one ring spacing, which bounds edge lengths.  Integer cross products
    of the index fractions avoid floating-point ties.
    """
    k_in, k_out = len(inner), len(outer)
    if k_in == 1:
        for b in range(k_out):
            tris.append((inner[0], outer[b], outer[(b + 1) % k_out]))
        return
    a = b = 0
    while a < k_in or b < k_out:
        if b < k_out and (a == k_in or (b + 1) * k_in < (a + 1) * k_out):
            tris.append((inner[a % k_in], outer[b % k_out], outer[(b + 1) % k_out]))
            b += 1
        else:
            tris.append((inner[a % k_in], outer[b % k_out], inner[(a + 1) % k_in]))
            a += 1


def _ring_points(radius: float, count: int) -> np.ndarray:
    theta = 2.0 * math.pi * np.arange(count) / count
    return np.column_stack([radius * np.cos(theta), radius * np.sin(theta)])


def _build_disk(radius: float, h: float) -> TriMesh:
    n = max(1, math.ceil(radius / h))
    verts = [np.zeros((1, 2))]
    rings = [[0]]
    offset = 1
    for i in range(1, n + 1):
        count = 6 * i
        verts.append(_ring_points(radius * i / n, count))
        rings.append(list(range(offset, offset + count)))
        offset += count
    tris: list = []
    for i in range(1, n + 1):
        _merge_rings(rings[i - 1], rings[i], tris)
    outer = rings[-1]
    edges = [(outer[j], outer[(j + 1) % len(outer)]) for j in range(len(outer))]
    return TriMesh(
        vertices=np.vstack(verts),
        triangles=np.asarray(tris, dtype=np.int32),
        boundary_edges=np.asarray(edges, dtype=np.int32),
        boundary_component=np.zeros(len(edges), dtype=np.int32),
    )


def _build_annulus(r_in: float, r_out: float, h: float) -> TriMesh:
    layers = max(1, math.ceil((r_out - r_in) / h))
    count = max(8, math.ceil(2.0 * math.pi * r_out / h))
    verts = []
    rings = []
    offset = 0
    for i in range(layers + 1):
        radius = r_in + (r_out - r_in) * i / layers
        verts.append(_ring_points(radius, count))
        rings.append(list(range(offset, offset + count)))
        offset += count
    tris: list = []
    for i in range(1, layers + 1):
        _merge_rings(rings[i - 1], rings[i], tris)
    inner, outer = rings[0], rings[-1]
    edges = []
    comps = []
    # inner rim: reversed orientation keeps the domain on the left
    for j in range(count):
        edges.append((inner[(j + 1) % count], inner[j]))
        comps.append(0)
    for j in range(count):
        edges.append((outer[j], outer[(j + 1) % count]))
        comps.append(1)
    return TriMesh(
        vertices=np.vstack(verts),
        triangles=np.asarray(tris, dtype=np.int32),
        boundary_edges=np.asarray(edges, dtype=np.int32),
        boundary_component=np.asarray(comps, dtype=np.int32),
    )


def _ear_clip(pts: np.ndarray) -> list[tuple[int, int, int]]:
    n = len(pts)
    idx = list(range(n))
    scale = float(np.max(np.abs(pts)) + 1.0)
    eps = 1e-14 * scale * scale
    tris = []
    while len(idx) > 3:
        clipped = False
        for pos in range(len(idx)):
            i_prev = idx[pos - 1]
            i_cur = idx[pos]
            i_next = idx[(pos + 1) % len(idx)]
            a, b, c = pts[i_prev], pts[i_cur], pts[i_next]
            cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
            if cross <= eps:
                continue  # reflex or collinear corner, not an ear
            ear = True
            for other in idx:
                if other in (i_prev, i_cur, i_next):
                    continue
                if _point_in_triangle(pts[other], a, b, c, eps):
                    ear = False
                    break
            if ear:
                tris.append((i_prev, i_cur, i_next))
                del idx[pos]
                clipped = True
                break
        if not clipped:
            raise MeshError("ear clipping failed: polygon is degenerate")
    tris.append((idx[0], idx[1], idx[2]))
    return tris


def _point_in_triangle(p, a, b, c, eps) -> bool:
    d1 = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
    d2 = (c[0] - b[0]) * (p[1] - b[1]) - (c[1] - b[1]) * (p[0] - b[0])
    d3 = (a[0] - c[0]) * (p[1] - c[1]) - (a[1] - c[1]) * (p[0] - c[0])
    return d1 >= -eps and d2 >= -eps and d3 >= -eps


def _build_polygon(spec: DomainSpec) -> TriMesh:
    pts = np.asarray(spec.points, dtype=float)
    tris = _ear_clip(pts)
    n = len(pts)
    edges = [(j, (j + 1) % n) for j in range(n)]
    mesh = TriMesh(
        vertices=pts.copy(),
        triangles=np.asarray(tris, dtype=np.int32),
        boundary_edges=np.asarray(edges, dtype=np.int32),
        boundary_component=np.zeros(n, dtype=np.int32),
        domain=spec,
    )
    while mesh.max_edge_length() > 1.5 * spec.edge_length:
        mesh = refine(mesh)
    return mesh


def build_mesh(spec: DomainSpec) -> TriMesh:
    """Triangulate the domain with maximum edge length at most 1.5 h."""
    if spec.kind == DISK:
        mesh = _build_disk(spec.params[0], spec.edge_length)
    elif spec.kind == ANNULUS:
        mesh = _build_annulus(spec.params[0], spec.params[1], spec.edge_length)
    elif spec.kind == ELLIPSE:
        a, b = spec.params
        scale = max(a, b)
        mesh = _build_disk(1.0, spec.edge_length / scale)
        mesh.vertices[:, 0] *= a
        mesh.vertices[:, 1] *= b
    elif spec.kind == POLYGON:
        mesh = _build_polygon(spec)
    else:  # pragma: no cover - DomainSpec already validates
        raise MeshError(f"unknown domain kind {spec.kind!r}")
    mesh.domain = spec
    validate(mesh)
    return mesh


# ---------------------------------------------------------------------------
# Refinement
# ---------------------------------------------------------------------------

def _project_to_curve(spec: DomainSpec | None, comp: int, point: np.ndarray) -> np.ndarray:
    if spec is None or spec.kind == POLYGON:
        return point
    if spec.kind == DISK:
        return point * (spec.params[0] / np.hypot(point[0], point[1]))
    if spec.kind == ANNULUS:
        target = spec.params[0] if comp == 0 else spec.params[1]
        return point * (target / np.hypot(point[0], point[1]))
    if spec.kind == ELLIPSE:
        a, b = spec.params
        t = math.atan2(point[1] / b, point[0] / a)
        return np.array([a * math.cos(t), b * math.sin(t)])
    return point


def refine(mesh: TriMesh) -> TriMesh:
    """Split every triangle into four via edge midpoints.

    New midpoints of curved-boundary edges are projected back onto the true
    curve, so inscribed approximations improve under refinement; polygon
    boundaries are reproduced exactly.
    """
    verts = [mesh.vertices]
    next_id = mesh.num_vertices
    midpoint: dict[tuple[int, int], int] = {}
    boundary_comp = {}
    for (i, j), comp in zip(mesh.boundary_edges.tolist(),
                            mesh.boundary_component.tolist()):
        boundary_comp[(min(i, j), max(i, j))] = comp

    new_points = []

    def mid(i: int, j: int) -> int:
        nonlocal next_id
        key = (min(i, j), max(i, j))
        if key in midpoint:
            return midpoint[key]
        p = 0.5 * (mesh.vertices[i] + mesh.vertices[j])
        if key in boundary_comp:
            p = _project_to_curve(mesh.domain, boundary_comp[key], p)
        midpoint[key] = next_id
        new_points.append(p)
        next_id += 1
        return midpoint[key]

    tris = []
    for v0, v1, v2 in mesh.triangles.tolist():
        m01 = mid(v0, v1)
        m12 = mid(v1, v2)
        m20 = mid(v2, v0)
        tris.extend([(v0, m01, m20), (v1, m12, m01), (v2, m20, m12), (m01, m12, m20)])

    edges = []
    comps = []
    for (i, j), comp in zip(mesh.boundary_edges.tolist(),
                            mesh.boundary_component.tolist()):
        m = midpoint[(min(i, j), max(i, j))]
        edges.append((i, m))
        edges.append((m, j))
        comps.extend([comp, comp])

    vertices = np.vstack([mesh.vertices, np.asarray(new_points)])
    return TriMesh(
        vertices=vertices,
        triangles=np.asarray(tris, dtype=np.int32),
        boundary_edges=np.asarray(edges, dtype=np.int32),
        boundary_component=np.asarray(comps, dtype=np.int32),
        domain=mesh.domain,
    )


# ---------------------------------------------------------------------------
# Measures
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Measures:
    """Area and perimeter of the meshed domain."""

    area: float
    perimeter: float
    component_perimeters: dict = field(default_factory=dict)


def measures(mesh: TriMesh) -> Measures:
    """Total area, total perimeter, and per-component boundary lengths."""
    area = float(np.sum(mesh.triangle_areas()))
    lengths = mesh.boundary_lengths()
    per_comp = {
        int(comp): float(lengths[mesh.boundary_component == comp].sum())
        for comp in np.unique(mesh.boundary_component)
    }
    return Measures(
        area=area,
        perimeter=float(lengths.sum()),
        component_perimeters=per_comp,
    )


# ---------------------------------------------------------------------------
# Mesh text format (versioned)
# ---------------------------------------------------------------------------

def write_mesh(mesh: TriMesh, path):
    """Write the documented `insulab-mesh v1` text format.

    Vertex coordinates use shortest round-tripping decimal representation,
    so read(write(mesh)) reproduces the arrays bit-exactly.
    """
    lines = [MESH_FORMAT_HEADER, str(mesh.num_vertices)]
    lines.extend(f"{repr(float(x))} {repr(float(y))}" for x, y in mesh.vertices)
    lines.append(str(mesh.num_triangles))
    lines.extend(f"{i} {j} {k}" for i, j, k in mesh.triangles)
    lines.append(str(len(mesh.boundary_edges)))
    lines.extend(
        f"{i} {j} {c}"
        for (i, j), c in zip(mesh.boundary_edges, mesh.boundary_component)
    )
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_mesh(path) -> TriMesh:
    """Read the `insulab-mesh v1` format; the DomainSpec is not stored."""
    with open(path) as fh:
        lines = [line.strip() for line in fh if line.strip()]
    if not lines or lines[0] != MESH_FORMAT_HEADER:
        raise MeshError(f"not an {MESH_FORMAT_HEADER!r} file: {path}")
    pos = 1
    nv = int(lines[pos]); pos += 1
    verts = np.array(
        [[float(t) for t in lines[pos + i].split()] for i in range(nv)]
    )
    pos += nv
    nt = int(lines[pos]); pos += 1
    tris = np.array(
        [[int(t) for t in lines[pos + i].split()] for i in range(nt)], dtype=np.int32
    )
    pos += nt
    nb = int(lines[pos]); pos += 1
    rows = [[int(t) for t in lines[pos + i].split()] for i in range(nb)]
    edges = np.array([r[:2] for r in rows], dtype=np.int32)
    comps = np.array([r[2] for r in rows], dtype=np.int32)
    return TriMesh(
        vertices=verts,
        triangles=tris,
        boundary_edges=edges,
        boundary_component=comps,
        domain=None,
    )
