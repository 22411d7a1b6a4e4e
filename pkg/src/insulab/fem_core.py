"""P1 finite element assembly and iterative solvers.

Stiffness, mass and boundary operators are assembled exactly (piecewise
linear elements integrate in closed form).  Linear systems are solved by
Jacobi-preconditioned conjugate gradients; generalized eigenvalues by
inverse power iteration with deflation and linear constraints handled by
projection, which keeps every inner operator symmetric positive definite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import CompatibilityError, ConvergenceError
from .geometry import TriMesh, measures

CG_TOL = 1e-10
EIG_TOL = 1e-8


# ---------------------------------------------------------------------------
# Assembly
# ---------------------------------------------------------------------------

def _triangle_geometry(mesh: TriMesh):
    pts = mesh.vertices
    tri = mesh.triangles
    p0, p1, p2 = pts[tri[:, 0]], pts[tri[:, 1]], pts[tri[:, 2]]
    # e_i is the edge opposite vertex i; grad(phi_i) = rot90(e_i) / (2A)
    e0 = p2 - p1
    e1 = p0 - p2
    e2 = p1 - p0
    area = 0.5 * (e2[:, 0] * (-e1[:, 1]) - e2[:, 1] * (-e1[:, 0]))
    return (e0, e1, e2), area


def assemble_stiffness(mesh: TriMesh) -> sp.csr_matrix:
    """Exact P1 stiffness matrix; constant fields lie in its kernel."""
    edges, area = _triangle_geometry(mesh)
    tri = mesh.triangles
    n = mesh.num_vertices
    rows, cols, vals = [], [], []
    for i in range(3):
        for j in range(3):
            rows.append(tri[:, i])
            cols.append(tri[:, j])
            vals.append(np.sum(edges[i] * edges[j], axis=1) / (4.0 * area))
    mat = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n),
    ).tocsr()
    return (mat + mat.T) * 0.5


def assemble_mass(mesh: TriMesh) -> sp.csr_matrix:
    """Exact (consistent) P1 mass matrix; 1^T M 1 equals the mesh area."""
    _, area = _triangle_geometry(mesh)
    tri = mesh.triangles
    n = mesh.num_vertices
    rows, cols, vals = [], [], []
    for i in range(3):
        for j in range(3):
            rows.append(tri[:, i])
            cols.append(tri[:, j])
            vals.append(area * ((2.0 if i == j else 1.0) / 12.0))
    mat = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n),
    ).tocsr()
    return (mat + mat.T) * 0.5


def assemble_boundary(mesh: TriMesh) -> tuple[np.ndarray, sp.csr_matrix]:
    """Boundary load vector b and boundary mass matrix B.

    b_i = int_bnd phi_i dsigma (exact for P1 traces, zero at interior
    vertices); B is the one-dimensional mass matrix of the boundary edges,
    so x^T B y integrates the product of two P1 traces.
    """
    n = mesh.num_vertices
    lengths = mesh.boundary_lengths()
    b = np.zeros(n)
    rows, cols, vals = [], [], []
    for (i, j), length in zip(mesh.boundary_edges.tolist(), lengths):
        b[i] += 0.5 * length
        b[j] += 0.5 * length
        rows.extend([i, j, i, j])
        cols.extend([i, j, j, i])
        vals.extend([length / 3.0, length / 3.0, length / 6.0, length / 6.0])
    mat = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    return b, mat


def boundary_weights_by_component(mesh: TriMesh) -> dict[int, np.ndarray]:
    """The boundary load vector split by boundary component."""
    n = mesh.num_vertices
    lengths = mesh.boundary_lengths()
    out: dict[int, np.ndarray] = {}
    for (i, j), comp, length in zip(
        mesh.boundary_edges.tolist(), mesh.boundary_component.tolist(), lengths
    ):
        vec = out.setdefault(int(comp), np.zeros(n))
        vec[i] += 0.5 * length
        vec[j] += 0.5 * length
    return out


@dataclass
class MeshOperators:
    """Assembled operators plus measures, shared by the problem solvers."""

    mesh: TriMesh
    stiffness: sp.csr_matrix
    mass: sp.csr_matrix
    boundary_vector: np.ndarray
    boundary_mass: sp.csr_matrix
    area: float
    perimeter: float
    boundary_mask: np.ndarray


def operators(mesh: TriMesh) -> MeshOperators:
    b, bmat = assemble_boundary(mesh)
    ms = measures(mesh)
    return MeshOperators(
        mesh=mesh,
        stiffness=assemble_stiffness(mesh),
        mass=assemble_mass(mesh),
        boundary_vector=b,
        boundary_mass=bmat,
        area=ms.area,
        perimeter=ms.perimeter,
        boundary_mask=mesh.boundary_vertex_mask(),
    )


# ---------------------------------------------------------------------------
# Conjugate gradients
# ---------------------------------------------------------------------------

def solve_spd(
    A: sp.csr_matrix,
    rhs: np.ndarray,
    tol: float = CG_TOL,
    nullspace: np.ndarray | None = None,
    x0: np.ndarray | None = None,
    maxiter: int | None = None,
) -> np.ndarray:
    """Solve A x = rhs for symmetric positive (semi)definite A by CG.

    With `nullspace` given (the constant vector for a pure-Neumann
    stiffness matrix), the right-hand side must be orthogonal to it within
    tol, and the solution is returned orthogonal to it.  The run is
    deterministic for fixed inputs.
    """
    n = A.shape[0]
    rhs = np.asarray(rhs, dtype=float)
    scale = float(np.linalg.norm(rhs))

    z = None
    if nullspace is not None:
        z = nullspace / np.linalg.norm(nullspace)
        drift = float(z @ rhs)
        if abs(drift) > max(tol, 1e-10) * (scale + 1e-300):
            raise CompatibilityError(
                "right-hand side not orthogonal to the operator kernel: "
                f"<kernel, rhs> = {drift:.3e}, |rhs| = {scale:.3e}"
            )
        rhs = rhs - z * drift
        scale = float(np.linalg.norm(rhs))

    if scale == 0.0:
        return np.zeros(n)

    diag = A.diagonal()
    safe = np.where(diag > 0.0, diag, 1.0)
    inv_diag = 1.0 / safe

    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    if z is not None:
        x -= z * (z @ x)
    r = rhs - A @ x
    if z is not None:
        r -= z * (z @ r)
    d = inv_diag * r
    delta = float(r @ d)
    p = d.copy()
    if maxiter is None:
        maxiter = max(1000, 2 * n)

    history = []
    for it in range(maxiter):
        res = float(np.linalg.norm(r))
        history.append(res)
        if res <= tol * scale:
            if z is not None:
                x -= z * (z @ x)
            return x
        q = A @ p
        alpha = delta / float(p @ q)
        x += alpha * p
        r -= alpha * q
        if z is not None:
            r -= z * (z @ r)
        d = inv_diag * r
        delta_new = float(r @ d)
        p = d + (delta_new / delta) * p
        delta = delta_new
    raise ConvergenceError(
        f"CG did not reach tol={tol:g} in {maxiter} iterations; "
        f"last residual {history[-1]:.3e} vs target {tol * scale:.3e}",
        history=history[-10:],
    )


# ---------------------------------------------------------------------------
# Neumann Poisson problem
# ---------------------------------------------------------------------------

def neumann_poisson(
    mesh: TriMesh,
    source: float,
    flux,
    tol: float = CG_TOL,
    ops: MeshOperators | None = None,
) -> np.ndarray:
    """Solve -Lap u = source with du/dnu = flux, zero mean, by CG.

    `source` is a constant; `flux` is a constant per boundary component
    (a scalar applies to every component).  The data must satisfy the
    compatibility condition int_Omega f dx = -int_bnd g dsigma within
    1e-10 relative, otherwise CompatibilityError cites the violated
    identity.  The returned field has zero integral over the domain.
    """
    if ops is None:
        ops = operators(mesh)
    by_comp = boundary_weights_by_component(mesh)
    if np.isscalar(flux):
        flux_map = {comp: float(flux) for comp in by_comp}
    else:
        flux_map = {int(c): float(g) for c, g in dict(flux).items()}
        if set(flux_map) != set(by_comp):
            raise CompatibilityError(
                f"flux given for components {sorted(flux_map)} but mesh has "
                f"{sorted(by_comp)}"
            )

    volume_term = float(source) * ops.area
    boundary_term = sum(flux_map[c] * float(vec.sum()) for c, vec in by_comp.items())
    total = volume_term + boundary_term
    magnitude = abs(volume_term) + abs(boundary_term)
    if abs(total) > 1e-10 * max(magnitude, 1e-300):
        raise CompatibilityError(
            "incompatible Neumann data: int_Omega f dx = "
            f"{volume_term:.12e} but -int_bnd g dsigma = {-boundary_term:.12e}"
        )

    ones = np.ones(mesh.num_vertices)
    rhs = float(source) * (ops.mass @ ones)
    for comp, vec in by_comp.items():
        rhs = rhs + flux_map[comp] * vec
    u = solve_spd(ops.stiffness, rhs, tol=tol, nullspace=ones)
    # zero mean in the integral sense, not just the algebraic kernel sense
    u -= (ones @ (ops.mass @ u)) / ops.area
    return u


# ---------------------------------------------------------------------------
# Smallest constrained generalized eigenvalue
# ---------------------------------------------------------------------------

@dataclass
class SpectralResult:
    """Converged eigenpair of the generalized problem K x = lambda M x."""

    eigenvalue: float
    eigenfunction: np.ndarray
    residual: float
    iterations: int


def _start_block(n: int, coords: np.ndarray | None, q: int) -> np.ndarray:
    rng = np.random.default_rng(12345)
    block = rng.standard_normal((n, q))
    if coords is not None:
        # smooth low-frequency leads speed up convergence on nice domains
        x = coords[:, 0] - coords[:, 0].mean()
        y = coords[:, 1] - coords[:, 1].mean()
        for col, lead in enumerate((x + 0.618 * y, y - 0.618 * x)):
            if col >= q:
                break
            nrm = np.linalg.norm(lead)
            if nrm > 0.0:
                block[:, col] = lead / nrm + 1e-3 * block[:, col] / np.linalg.norm(
                    block[:, col]
                )
    return block


def _eig_core(K, M, rows, tol, maxiter, sigma, cg_tol, start):
    # block inverse iteration with Rayleigh-Ritz extraction; the block
    # resolves (near-)degenerate lowest clusters that stall a single vector
    A = (K + sigma * M).tocsr() if sigma != 0.0 else K

    k = len(rows)
    if k:
        L = np.vstack(rows)
        Y = np.column_stack([solve_spd(A, L[i], tol=cg_tol) for i in range(k)])
        G = L @ Y
        LLt = L @ L.T

    def into_admissible(vec):
        if not k:
            return vec
        return vec - Y @ np.linalg.solve(G, L @ vec)

    def project_residual(vec):
        if not k:
            return vec
        return vec - L.T @ np.linalg.solve(LLt, L @ vec)

    rng = np.random.default_rng(777)
    block = start.copy()
    q = block.shape[1]
    warm = [None] * q
    history = []
    for it in range(1, maxiter + 1):
        for col in range(q):
            sol = solve_spd(A, M @ block[:, col], tol=cg_tol, x0=warm[col])
            warm[col] = sol
            block[:, col] = into_admissible(sol)
        # M-orthonormalize (modified Gram-Schmidt), re-seeding collapsed columns
        for col in range(q):
            v = block[:, col]
            for prev in range(col):
                w = block[:, prev]
                v = v - w * float(w @ (M @ v))
            nrm = float(np.sqrt(v @ (M @ v)))
            if nrm < 1e-14:
                v = into_admissible(rng.standard_normal(v.shape[0]))
                for prev in range(col):
                    w = block[:, prev]
                    v = v - w * float(w @ (M @ v))
                nrm = float(np.sqrt(v @ (M @ v)))
            block[:, col] = v / nrm
        kr = block.T @ (K @ block)
        kr = 0.5 * (kr + kr.T)
        evals, evecs = np.linalg.eigh(kr)
        block = block @ evecs
        lam = float(evals[0])
        y = block[:, 0]
        r = project_residual(K @ y - lam * (M @ y))
        denom = float(np.linalg.norm(K @ y) + abs(lam) * np.linalg.norm(M @ y))
        rel = float(np.linalg.norm(r)) / max(denom, 1e-300)
        history.append(rel)
        if rel <= tol:
            return SpectralResult(lam, y.copy(), rel, it)
    raise ConvergenceError(
        f"inverse iteration did not reach tol={tol:g} in {maxiter} iterations "
        f"(last residual {history[-1]:.3e})",
        history=history[-10:],
    )


def eig_smallest(
    K: sp.csr_matrix,
    M: sp.csr_matrix,
    constraints=(),
    dirichlet: bool = False,
    skip: int = 0,
    boundary_mask: np.ndarray | None = None,
    coords: np.ndarray | None = None,
    tol: float = EIG_TOL,
    maxiter: int = 300,
    cg_tol: float = 1e-12,
) -> SpectralResult:
    """Smallest admissible eigenvalue of K x = lambda M x.

    `constraints` are vectors c defining the admissible space {x: c.x = 0};
    `dirichlet` restricts to interior vertices (requires boundary_mask);
    `skip` deflates that many lowest eigenpairs first (skip=1 on a pure
    Neumann pencil deflates the constant kernel and returns the second
    Neumann eigenvalue).  Solved by shift-inverted power iteration with
    Gram-Schmidt deflation in the M inner product; constraints are applied
    by projection inside the iteration so all operators stay SPD.
    """
    n = K.shape[0]
    constraints = [np.asarray(c, dtype=float) for c in constraints]

    if dirichlet:
        if boundary_mask is None:
            raise ValueError("dirichlet=True requires boundary_mask")
        keep = ~boundary_mask
        idx = np.flatnonzero(keep)
        Kr = K[np.ix_(idx, idx)].tocsr()
        Mr = M[np.ix_(idx, idx)].tocsr()
        rows = [c[idx] for c in constraints]
        coords_r = coords[idx] if coords is not None else None
        start = _start_block(len(idx), coords_r, 3)
        deflate: list[np.ndarray] = []
        for _ in range(skip):
            res = _eig_core(Kr, Mr, rows + [Mr @ d for d in deflate],
                            tol, maxiter, 0.0, cg_tol, start)
            deflate.append(res.eigenfunction)
        res = _eig_core(Kr, Mr, rows + [Mr @ d for d in deflate],
                        tol, maxiter, 0.0, cg_tol, start)
        full = np.zeros(n)
        full[idx] = res.eigenfunction
        return SpectralResult(res.eigenvalue, full, res.residual, res.iterations)

    ones = np.ones(n)
    if not constraints and skip == 0:
        # pure Neumann pencil: the kernel is exactly the constants
        c = ones / float(np.sqrt(ones @ (M @ ones)))
        resid = float(np.linalg.norm(K @ c))
        return SpectralResult(0.0, c, resid, 0)

    deflate = []
    remaining = skip
    if remaining >= 1 and not constraints:
        # the constant kernel vector is known exactly; deflate it analytically
        deflate.append(ones / float(np.sqrt(ones @ (M @ ones))))
        remaining -= 1

    start = _start_block(n, coords, 3)
    lead = start[:, 0]
    sigma0 = float(lead @ (K @ lead)) / float(lead @ (M @ lead))
    sigma = max(0.25 * sigma0, 1e-12)

    for _ in range(remaining):
        rows = [np.asarray(M @ d) for d in deflate] + constraints
        res = _eig_core(K, M, rows, tol, maxiter, sigma, cg_tol, start)
        deflate.append(res.eigenfunction)
    rows = [np.asarray(M @ d) for d in deflate] + constraints
    return _eig_core(K, M, rows, tol, maxiter, sigma, cg_tol, start)
