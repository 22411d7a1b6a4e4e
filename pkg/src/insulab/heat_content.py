"""The heat-content problem: minimize the insulation quotient

    [ int |grad u|^2 dx + (1/m) (int_bnd |u| dsigma)^2 ] / (int u dx)^2.

The module computes the torsion-type field u0, the asymmetry constant
delta_Omega, the breaking threshold m1 = delta_Omega * P^2 / |Omega|,
the closed-form linear candidate above the threshold, a randomized
minimality certificate, and a regularized fixed-point minimizer that
also works below the threshold where the trace develops a vanishing set.
All boundary integrals of P1 traces use the exact vertex weights b.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sparse

from .errors import CertificateError, StagnationError
from .fem_core import MeshOperators, neumann_poisson, operators, solve_spd
from .geometry import TriMesh, refine

DELTA_SCHEDULE = (1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6)
DAMPING = 0.5
VANISH_TOL = 1e-3


def sparse_diag(values: np.ndarray) -> sparse.csr_matrix:
    return sparse.diags(values).tocsr()


# ---------------------------------------------------------------------------
# Torsion-type field and the breaking threshold
# ---------------------------------------------------------------------------

def solve_u0(mesh: TriMesh, ops: MeshOperators | None = None) -> np.ndarray:
    """Zero-mean solution of -Lap u = 1 with flux -|Omega|/P on the boundary."""
    if ops is None:
        ops = operators(mesh)
    return neumann_poisson(mesh, 1.0, -ops.area / ops.perimeter, ops=ops)


def delta_omega(u0: np.ndarray, mesh: TriMesh,
                ops: MeshOperators | None = None) -> float:
    """Boundary mean of u0 minus its boundary minimum.

    Zero exactly on balls; strictly positive otherwise.  P1 traces attain
    extrema at vertices, so the minimum is taken over boundary vertices.
    """
    if ops is None:
        ops = operators(mesh)
    mean = float(ops.boundary_vector @ u0) / ops.perimeter
    minimum = float(np.min(u0[ops.boundary_mask]))
    return mean - minimum


@dataclass(frozen=True)
class M1Report:
    """Breaking threshold of the heat-content problem with its ingredients."""

    m1: float
    delta_omega: float
    perimeter: float
    area: float
    u0_boundary_mean: float
    u0_boundary_min: float
    resolution: float            # maximum edge length of the mesh used
    m1_refined: float            # same quantity on the once-refined mesh
    m1_extrapolated: float       # Richardson extrapolation of the pair


def threshold_m1(mesh: TriMesh, ops: MeshOperators | None = None) -> M1Report:
    """Compute m1 = delta_Omega * P^2 / |Omega| on the mesh and a refinement.

    The extrapolated value assumes the O(h^2) convergence of the P1
    discretization: m1* = m1_fine + (m1_fine - m1_coarse) / 3.
    """
    if ops is None:
        ops = operators(mesh)
    u0 = solve_u0(mesh, ops)
    delta = delta_omega(u0, mesh, ops)
    m1 = delta * ops.perimeter**2 / ops.area

    fine = refine(mesh)
    fine_ops = operators(fine)
    delta_fine = delta_omega(solve_u0(fine, fine_ops), fine, fine_ops)
    m1_fine = delta_fine * fine_ops.perimeter**2 / fine_ops.area

    return M1Report(
        m1=m1,
        delta_omega=delta,
        perimeter=ops.perimeter,
        area=ops.area,
        u0_boundary_mean=float(ops.boundary_vector @ u0) / ops.perimeter,
        u0_boundary_min=float(np.min(u0[ops.boundary_mask])),
        resolution=mesh.max_edge_length(),
        m1_refined=m1_fine,
        m1_extrapolated=m1_fine + (m1_fine - m1) / 3.0,
    )


def linear_candidate(mesh: TriMesh, m: float,
                     ops: MeshOperators | None = None,
                     u0: np.ndarray | None = None) -> np.ndarray:
    """The shifted torsion field u0 + m|Omega|/P^2 - mean_bnd(u0).

    Solves the linear Euler-Lagrange system of the problem; it is the
    actual minimizer whenever its boundary minimum -delta + m|Omega|/P^2
    is nonnegative, i.e. for m >= m1.
    """
    if m <= 0.0:
        raise ValueError("m must be positive")
    if ops is None:
        ops = operators(mesh)
    if u0 is None:
        u0 = solve_u0(mesh, ops)
    shift = m * ops.area / ops.perimeter**2 - float(ops.boundary_vector @ u0) / ops.perimeter
    return u0 + shift


# ---------------------------------------------------------------------------
# Objective
# ---------------------------------------------------------------------------

def boundary_absolute_integral(u: np.ndarray, ops: MeshOperators,
                               delta: float = 0.0) -> float:
    """int_bnd sqrt(u^2 + delta^2) dsigma with the vertex boundary weights."""
    if delta == 0.0:
        return float(ops.boundary_vector @ np.abs(u))
    return float(ops.boundary_vector @ np.sqrt(u * u + delta * delta))


def heat_objective(u: np.ndarray, mesh_or_ops, m: float,
                   delta: float = 0.0) -> float:
    """T_m(u) (or its delta-regularized version) for a field with int u = 1."""
    ops = mesh_or_ops if isinstance(mesh_or_ops, MeshOperators) else operators(mesh_or_ops)
    grad = float(u @ (ops.stiffness @ u))
    trace = boundary_absolute_integral(u, ops, delta)
    return grad + trace * trace / m


# ---------------------------------------------------------------------------
# Minimality certificate
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MinimizerCertificate:
    passed: bool
    trials: int
    worst_margin: float
    objective: float


def certify_minimizer(u: np.ndarray, mesh: TriMesh, m: float,
                      trials: int = 100, seed: int = 0,
                      ops: MeshOperators | None = None) -> MinimizerCertificate:
    """Check T_m(u) <= T_m(v) against seeded random competitors.

    Applies only when u solves the linear Euler-Lagrange system with a
    nonnegative boundary trace; competitors share the prescribed integral
    int v dx = int u dx.  Deterministic for a fixed seed.
    """
    if ops is None:
        ops = operators(mesh)
    ones = np.ones(mesh.num_vertices)
    trace = u[ops.boundary_mask]
    top = float(np.max(np.abs(trace))) if trace.size else 0.0
    if trace.size and float(np.min(trace)) < -1e-8 * max(top, 1e-30):
        raise CertificateError(
            "certificate inapplicable: boundary trace has negative values"
        )
    # verify u actually solves the linear system it claims to solve
    flux = -(ops.boundary_vector @ u) / m
    rhs = ops.mass @ ones + flux * ops.boundary_vector
    residual = float(np.linalg.norm(ops.stiffness @ u - rhs))
    if residual > 1e-6 * max(float(np.linalg.norm(rhs)), 1e-30):
        raise CertificateError(
            f"certificate inapplicable: field does not solve the "
            f"Euler-Lagrange system (residual {residual:.3e})"
        )

    target = float(ones @ (ops.mass @ u))
    base = heat_objective(u, ops, m)
    rng = np.random.default_rng(seed)
    worst = np.inf
    n = mesh.num_vertices
    for trial in range(trials):
        if trial % 2 == 0:
            # local competitor: small zero-integral perturbation of u
            w = rng.standard_normal(n)
            w -= ones * (ones @ (ops.mass @ w)) / ops.area
            eps = 10.0 ** rng.uniform(-4.0, -1.0)
            v = u + eps * w
        else:
            v = rng.standard_normal(n)
            v += ones * (target - ones @ (ops.mass @ v)) / ops.area
        margin = heat_objective(v, ops, m) - base
        worst = min(worst, margin)
    passed = worst >= -1e-10 * max(base, 1.0)
    return MinimizerCertificate(passed=passed, trials=trials,
                                worst_margin=float(worst), objective=base)


# ---------------------------------------------------------------------------
# Regularized minimization
# ---------------------------------------------------------------------------

@dataclass
class HeatMinimizerResult:
    u: np.ndarray
    objective: float                       # T_m(u) with the exact |u| trace term
    boundary_values: np.ndarray            # trace at boundary vertices
    boundary_vertices: np.ndarray          # their vertex indices
    vanishing_edges: np.ndarray            # boundary edge indices
    vanishing_measure: float
    delta_schedule: tuple
    iterations: list = field(default_factory=list)


def _renormalized(u: np.ndarray, ops: MeshOperators, ones: np.ndarray) -> np.ndarray:
    total = float(ones @ (ops.mass @ u))
    return u / total


def minimize_heat_content(
    mesh: TriMesh,
    m: float,
    schedule=DELTA_SCHEDULE,
    damping: float = DAMPING,
    tol: float = 1e-10,
    max_inner: int = 400,
    initial: np.ndarray | None = None,
    ops: MeshOperators | None = None,
) -> HeatMinimizerResult:
    """Minimize T_m over fields with int u dx = 1.

    The nonsmooth trace term is regularized by sqrt(u^2 + delta^2) and the
    regularization is driven to zero along the schedule with warm starts.
    Each step re-solves the Euler-Lagrange system with the boundary coupling
    frozen at the current iterate and renormalizes the integral; damping
    kicks in only if solver inexactness breaks the descent, and
    StagnationError is raised if it cannot be restored.
    """
    if m <= 0.0:
        raise ValueError("m must be positive")
    deltas = tuple(schedule)
    if any(b >= a for a, b in zip(deltas, deltas[1:])):
        raise ValueError("delta schedule must be strictly decreasing")
    if ops is None:
        ops = operators(mesh)
    ones = np.ones(mesh.num_vertices)

    if initial is None:
        u = ones / ops.area
    else:
        u = _renormalized(np.asarray(initial, dtype=float), ops, ones)

    mass_ones = ops.mass @ ones

    # Each step freezes the boundary coupling of the Euler-Lagrange system
    # at the current iterate and re-solves; writing the frozen coupling as a
    # Robin-type diagonal term makes the step minimize a quadratic upper
    # bound of the objective (Cauchy-Schwarz on the squared trace term), so
    # descent is monotone and no damping factor is needed.
    warm = None
    log = []
    for delta in deltas:
        obj = heat_objective(u, ops, m, delta)
        for inner in range(max_inner):
            smooth = np.sqrt(u * u + delta * delta)
            trace_mass = float(ops.boundary_vector @ smooth)
            coupling = sparse_diag(ops.boundary_vector / smooth * (trace_mass / m))
            y = solve_spd(ops.stiffness + coupling, mass_ones, x0=warm)
            warm = y
            candidate = y / float(mass_ones @ y)
            cand_obj = heat_objective(candidate, ops, m, delta)
            if cand_obj > obj * (1.0 + 1e-13):
                # only solver inexactness can break monotonicity; damp toward
                # the current iterate until descent is restored
                theta = damping
                recovered = False
                for _ in range(12):
                    trial = u + theta * (candidate - u)
                    trial_obj = heat_objective(trial, ops, m, delta)
                    if trial_obj <= obj * (1.0 + 1e-14):
                        candidate, cand_obj = trial, trial_obj
                        recovered = True
                        break
                    theta *= 0.5
                if not recovered:
                    raise StagnationError(
                        f"descent stagnated at delta={delta:g} after "
                        f"{inner} iterations (objective {obj:.12e})"
                    )
            # vertexwise absolute value never increases the quotient on the
            # acute meshes used here; apply it only when it actually helps
            folded = _renormalized(np.abs(candidate), ops, ones)
            folded_obj = heat_objective(folded, ops, m, delta)
            if folded_obj < cand_obj:
                candidate, cand_obj = folded, folded_obj

            shift = float(np.sqrt((candidate - u) @ (ops.mass @ (candidate - u))))
            scale = max(1.0, float(np.sqrt(u @ (ops.mass @ u))))
            final_stage = delta == deltas[-1]
            done = (abs(obj - cand_obj) <= tol * max(abs(obj), 1e-30)
                    and shift <= (1e-9 if final_stage else 1e-7) * scale)
            u, obj = candidate, cand_obj
            if done:
                break
        log.append({"delta": delta, "iterations": inner + 1, "objective": obj})

    bmask = ops.boundary_mask
    edges, measure = vanishing_set(u, mesh, VANISH_TOL)
    return HeatMinimizerResult(
        u=u,
        objective=heat_objective(u, ops, m),
        boundary_values=u[bmask],
        boundary_vertices=np.flatnonzero(bmask),
        vanishing_edges=edges,
        vanishing_measure=measure,
        delta_schedule=deltas,
        iterations=log,
    )


# ---------------------------------------------------------------------------
# Vanishing set and material density
# ---------------------------------------------------------------------------

def vanishing_set(u: np.ndarray, mesh: TriMesh,
                  tol_rel: float = VANISH_TOL) -> tuple[np.ndarray, float]:
    """Boundary edges whose endpoints both satisfy |u| < tol_rel * max|u|.

    Returns the edge indices and their total length.  A zero trace counts
    the whole boundary.
    """
    trace_ids = np.unique(mesh.boundary_edges.ravel())
    top = float(np.max(np.abs(u[trace_ids]))) if trace_ids.size else 0.0
    lengths = mesh.boundary_lengths()
    if top == 0.0:
        return np.arange(len(mesh.boundary_edges)), float(lengths.sum())
    small = np.abs(u) < tol_rel * top
    hit = small[mesh.boundary_edges[:, 0]] & small[mesh.boundary_edges[:, 1]]
    idx = np.flatnonzero(hit)
    return idx, float(lengths[idx].sum())


def material_distribution(u: np.ndarray, mesh: TriMesh, m: float,
                          ops: MeshOperators | None = None) -> np.ndarray:
    """Optimal density h = m |u| / int_bnd |u| dsigma at boundary vertices.

    Zero at interior vertices; integrates to exactly m over the boundary.
    """
    if ops is None:
        ops = operators(mesh)
    total = float(ops.boundary_vector @ np.abs(u))
    if total <= 0.0:
        raise CertificateError("material density undefined: boundary trace is zero")
    h = np.zeros_like(u)
    bmask = ops.boundary_mask
    h[bmask] = m * np.abs(u[bmask]) / total
    return h


def result_document(result: HeatMinimizerResult, mesh: TriMesh, m: float,
                    ops: MeshOperators | None = None) -> dict:
    """JSON-ready document for a minimizer: objective, trace, density.

    The boundary trace and the optimal material density are keyed by vertex
    id; vanishing edges are indices into the mesh boundary edge list.
    """
    if ops is None:
        ops = operators(mesh)
    total = float(ops.boundary_vector @ np.abs(result.u))
    density = material_distribution(result.u, mesh, m, ops) if total > 0 else None
    return {
        "m": m,
        "objective": result.objective,
        "delta_schedule": list(result.delta_schedule),
        "boundary_trace": {
            str(int(v)): float(x)
            for v, x in zip(result.boundary_vertices, result.boundary_values)
        },
        "vanishing_edges": [int(e) for e in result.vanishing_edges],
        "vanishing_measure": result.vanishing_measure,
        "material_density": None if density is None else {
            str(int(v)): float(density[v]) for v in result.boundary_vertices
        },
    }


# ---------------------------------------------------------------------------
# Torsion concentration predictor
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TorsionPrediction:
    argmax_edges: np.ndarray        # boundary edge indices within tolerance of the max
    edge_midpoints: np.ndarray      # (k, 2) midpoints of those edges
    normal_derivative: np.ndarray   # |du/dnu| estimate per boundary edge
    max_value: float


def torsion_predictor(mesh: TriMesh, tol_loc: float = 0.05,
                      ops: MeshOperators | None = None) -> TorsionPrediction:
    """Locate where |du/dnu| of the Dirichlet torsion function is largest.

    Solves -Lap u = 1 with u = 0 on the boundary and estimates the normal
    derivative per boundary edge by the one-sided gradient of the adjacent
    triangle.  This is where insulation concentrates as the total amount of
    material tends to zero.
    """
    if ops is None:
        ops = operators(mesh)
    n = mesh.num_vertices
    interior = np.flatnonzero(~ops.boundary_mask)
    K_int = ops.stiffness[np.ix_(interior, interior)].tocsr()
    ones = np.ones(n)
    rhs = (ops.mass @ ones)[interior]
    u = np.zeros(n)
    u[interior] = solve_spd(K_int, rhs)

    # one adjacent triangle per boundary edge
    edge_owner = {}
    for t, (a, b, c) in enumerate(mesh.triangles.tolist()):
        for i, j in ((a, b), (b, c), (c, a)):
            edge_owner[(min(i, j), max(i, j))] = t

    pts = mesh.vertices
    tri = mesh.triangles
    values = np.zeros(len(mesh.boundary_edges))
    mids = np.zeros((len(mesh.boundary_edges), 2))
    for e, (i, j) in enumerate(mesh.boundary_edges.tolist()):
        t = edge_owner[(min(i, j), max(i, j))]
        a, b, c = tri[t]
        p0, p1, p2 = pts[a], pts[b], pts[c]
        area2 = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p1[1] - p0[1]) * (p2[0] - p0[0])
        grad = (
            u[a] * np.array([p1[1] - p2[1], p2[0] - p1[0]])
            + u[b] * np.array([p2[1] - p0[1], p0[0] - p2[0]])
            + u[c] * np.array([p0[1] - p1[1], p1[0] - p0[0]])
        ) / area2
        tangent = pts[j] - pts[i]
        normal = np.array([tangent[1], -tangent[0]])  # outward for CCW loops
        normal /= np.linalg.norm(normal)
        values[e] = abs(float(grad @ normal))
        mids[e] = 0.5 * (pts[i] + pts[j])

    top = float(values.max())
    hits = np.flatnonzero(values >= (1.0 - tol_loc) * top)
    return TorsionPrediction(
        argmax_edges=hits,
        edge_midpoints=mids[hits],
        normal_derivative=values,
        max_value=top,
    )
