"""The temperature-decay problem: minimize the Rayleigh-type quotient

    [ int |grad u|^2 dx + (1/m) (int_bnd |u| dsigma)^2 ] / int u^2 dx.

Its infimum lambda_m is the slowest exponential decay rate of temperature
for total insulation mass m.  The module computes lambda_m by a regularized
eigen-style descent, the comparison eigenvalues kappa_1 <= mu_2 < lambda_D,
the breaking threshold m0 defined by lambda_{m0} = kappa_1, and vanishing
scans across an m-grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sparse

from .errors import BracketError, StagnationError
from .fem_core import (
    MeshOperators,
    SpectralResult,
    eig_smallest,
    operators,
    solve_spd,
)
from .geometry import TriMesh
from .heat_content import DELTA_SCHEDULE, VANISH_TOL, vanishing_set

M0_TOL = 5e-3


# ---------------------------------------------------------------------------
# Comparison eigenvalues
# ---------------------------------------------------------------------------

def eig_dirichlet(mesh: TriMesh, ops: MeshOperators | None = None) -> SpectralResult:
    """First Dirichlet eigenvalue lambda_D of the Laplacian."""
    if ops is None:
        ops = operators(mesh)
    return eig_smallest(
        ops.stiffness, ops.mass, dirichlet=True,
        boundary_mask=ops.boundary_mask, coords=mesh.vertices,
    )


def eig_neumann2(mesh: TriMesh, ops: MeshOperators | None = None) -> SpectralResult:
    """Second (first nonzero) Neumann eigenvalue mu_2."""
    if ops is None:
        ops = operators(mesh)
    return eig_smallest(ops.stiffness, ops.mass, skip=1, coords=mesh.vertices)


def eig_kappa1(mesh: TriMesh, ops: MeshOperators | None = None) -> SpectralResult:
    """Smallest eigenvalue kappa_1 under the zero-boundary-mean constraint.

    Constants violate the constraint, so no kernel deflation is applied;
    kappa_1 <= mu_2 holds on every mesh.
    """
    if ops is None:
        ops = operators(mesh)
    return eig_smallest(
        ops.stiffness, ops.mass, constraints=[ops.boundary_vector],
        coords=mesh.vertices,
    )


# ---------------------------------------------------------------------------
# Quotient minimization
# ---------------------------------------------------------------------------

def decay_quotient(u: np.ndarray, ops: MeshOperators, m: float,
                   delta: float = 0.0) -> float:
    """The decay quotient of a field (optionally delta-regularized)."""
    if delta == 0.0:
        trace = float(ops.boundary_vector @ np.abs(u))
    else:
        trace = float(ops.boundary_vector @ np.sqrt(u * u + delta * delta))
    num = float(u @ (ops.stiffness @ u)) + trace * trace / m
    return num / float(u @ (ops.mass @ u))


@dataclass
class DecayMinimizerResult:
    lam: float                       # the minimized quotient lambda_m
    u: np.ndarray                    # minimizer with int u^2 dx = 1, u >= 0
    boundary_values: np.ndarray
    boundary_vertices: np.ndarray
    vanishing_edges: np.ndarray
    vanishing_measure: float
    delta_schedule: tuple
    iterations: list = field(default_factory=list)


def _normalize_mass(u: np.ndarray, ops: MeshOperators) -> np.ndarray:
    return u / math.sqrt(float(u @ (ops.mass @ u)))


def _quotient_noise(u, abs_stiffness, ops, m) -> float:
    # absolute floating-point noise floor of evaluating the quotient: the
    # stiffness energy of a near-constant field is a sum of large cancelling
    # terms, so tiny quotients (huge m) cannot be compared more finely
    au = np.abs(u)
    spread = float(au @ (abs_stiffness @ au))
    trace = float(ops.boundary_vector @ au)
    return 50.0 * np.finfo(float).eps * (spread + trace * trace / m) / float(
        u @ (ops.mass @ u)
    )


def _descend(u, ops, m, deltas, tol, max_inner, log):
    # alternate one inverse-iteration step of the linearized pencil
    # (K + (1/m) s(u) W(u)) x = lambda M x with renormalization; the
    # linearized operator majorizes the quotient numerator (Cauchy-Schwarz
    # on the squared trace), so accepted steps never increase the quotient
    # beyond the floating-point noise floor
    abs_stiffness = abs(ops.stiffness)
    warm = None
    for delta in deltas:
        obj = decay_quotient(u, ops, m, delta)
        for inner in range(max_inner):
            noise = _quotient_noise(u, abs_stiffness, ops, m)
            slack = max(1e-13 * obj, noise)
            smooth = np.sqrt(u * u + delta * delta)
            trace_mass = float(ops.boundary_vector @ smooth)
            coupling = sparse.diags(
                ops.boundary_vector / smooth * (trace_mass / m)
            ).tocsr()
            L = ops.stiffness + coupling
            y = solve_spd(L, ops.mass @ u, x0=warm)
            warm = y
            candidate = _normalize_mass(y, ops)
            cand_obj = decay_quotient(candidate, ops, m, delta)
            if cand_obj > obj + slack:
                theta = 0.5
                recovered = False
                for _ in range(16):
                    trial = _normalize_mass(u + theta * (candidate - u), ops)
                    trial_obj = decay_quotient(trial, ops, m, delta)
                    if trial_obj <= obj + slack:
                        candidate, cand_obj = trial, trial_obj
                        recovered = True
                        break
                    theta *= 0.5
                if not recovered:
                    raise StagnationError(
                        f"decay descent stagnated at delta={delta:g} after "
                        f"{inner} iterations (quotient {obj:.12e})"
                    )
            folded = _normalize_mass(np.abs(candidate), ops)
            folded_obj = decay_quotient(folded, ops, m, delta)
            if folded_obj < cand_obj:
                candidate, cand_obj = folded, folded_obj

            shift = float(np.sqrt((candidate - u) @ (ops.mass @ (candidate - u))))
            final_stage = delta == deltas[-1]
            done = (abs(obj - cand_obj) <= max(tol * abs(obj), noise)
                    and shift <= (1e-9 if final_stage else 1e-7))
            u, obj = candidate, cand_obj
            if done:
                break
        log.append({"delta": delta, "iterations": inner + 1, "quotient": obj})
    return u, obj


def minimize_lambda_m(
    mesh: TriMesh,
    m: float,
    schedule=DELTA_SCHEDULE,
    tol: float = 1e-10,
    max_inner: int = 500,
    seed: int = 0,
    ops: MeshOperators | None = None,
    kappa1: SpectralResult | None = None,
) -> DecayMinimizerResult:
    """Minimize the decay quotient; returns lambda_m and the minimizer.

    The iteration starts from a seeded positive random field.  Converged
    values are cross-checked against the constant trial field and the
    Dirichlet ground state, and against perturbations by the zero-boundary-
    mean eigenfunction: whenever the current value exceeds kappa_1, mixing
    in that eigenfunction strictly lowers the quotient, which is exactly
    what breaks the radial saddle below the threshold.  The reported lam is
    the exact (unregularized) quotient of the returned field, which is
    sign-normalized to be nonnegative.
    """
    if m <= 0.0:
        raise ValueError("m must be positive")
    deltas = tuple(schedule)
    if any(b >= a for a, b in zip(deltas, deltas[1:])):
        raise ValueError("delta schedule must be strictly decreasing")
    if ops is None:
        ops = operators(mesh)

    rng = np.random.default_rng(seed)
    u = _normalize_mass(np.abs(rng.standard_normal(mesh.num_vertices)) + 0.05, ops)
    log: list = []
    u, obj = _descend(u, ops, m, deltas, tol, max_inner, log)
    best_u, best_q = u, decay_quotient(u, ops, m)

    def consider(start):
        # descend at the final regularization only: re-running the full
        # continuation would smooth the perturbation away again
        nonlocal best_u, best_q
        iterated, _ = _descend(start, ops, m, deltas[-1:], tol, max_inner, log)
        q = decay_quotient(iterated, ops, m)
        if q < best_q:
            best_u, best_q = iterated, q
            return True
        return False

    # safeguard trials: the constant field and the Dirichlet ground state;
    # keep whichever field (iterated or plain trial) has the lowest quotient
    ones = np.ones(mesh.num_vertices)
    trials = [_normalize_mass(ones, ops)]
    dirichlet = eig_dirichlet(mesh, ops)
    trials.append(_normalize_mass(np.abs(dirichlet.eigenfunction), ops))
    for trial in trials:
        trial_q = decay_quotient(trial, ops, m)
        if trial_q < best_q:
            best_u, best_q = trial, trial_q
            consider(trial)

    # saddle escape along the constrained eigenfunction
    if kappa1 is None:
        kappa1 = eig_kappa1(mesh, ops)
    w = kappa1.eigenfunction
    abs_stiffness = abs(ops.stiffness)
    for _ in range(4):
        escaped = False
        floor = max(1e-12 * best_q, _quotient_noise(best_u, abs_stiffness, ops, m))
        for eps in (0.3, -0.3, 0.1, -0.1, 0.02, -0.02):
            cand = _normalize_mass(best_u + eps * w, ops)
            if decay_quotient(cand, ops, m) < best_q - floor:
                escaped = consider(cand) or escaped
                break
        if not escaped:
            break
    u = best_u

    if float(ops.boundary_vector @ u) < 0.0 or float(u.sum()) < 0.0:
        u = -u
    folded = _normalize_mass(np.abs(u), ops)
    if decay_quotient(folded, ops, m) <= decay_quotient(u, ops, m) * (1 + 1e-13):
        u = folded

    lam = decay_quotient(u, ops, m)
    bmask = ops.boundary_mask
    edges, measure = vanishing_set(u, mesh, VANISH_TOL)
    return DecayMinimizerResult(
        lam=lam,
        u=u,
        boundary_values=u[bmask],
        boundary_vertices=np.flatnonzero(bmask),
        vanishing_edges=edges,
        vanishing_measure=measure,
        delta_schedule=deltas,
        iterations=log,
    )


# ---------------------------------------------------------------------------
# Breaking threshold m0
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class M0Report:
    """Breaking threshold of the decay problem with its ingredients."""

    m0: float
    kappa1: float
    mu2: float
    lambda_d: float
    bracket_history: tuple        # ((m, lambda_m) pairs in evaluation order)
    fine_m0: float | None = None  # optional once-refined cross-check


def threshold_m0(
    mesh: TriMesh,
    tol: float = M0_TOL,
    ops: MeshOperators | None = None,
    seed: int = 0,
) -> M0Report:
    """Locate m0 with lambda_{m0} = kappa_1 by bisection in m.

    lambda_m is nonincreasing in m, tends to lambda_D > kappa_1 as m -> 0
    and to 0 as m -> infinity, so the crossing exists and is unique.  The
    upper bracket 10 P^2/(kappa_1 |Omega|) guarantees lambda_m < kappa_1
    there by the constant trial bound.  Bisection stops when the bracket
    width is below tol * m0.
    """
    if ops is None:
        ops = operators(mesh)
    kappa1 = eig_kappa1(mesh, ops)
    mu2 = eig_neumann2(mesh, ops)
    lam_d = eig_dirichlet(mesh, ops)

    history = []

    def gap(m: float) -> float:
        res = minimize_lambda_m(mesh, m, ops=ops, seed=seed, kappa1=kappa1)
        history.append((m, res.lam))
        return res.lam - kappa1.eigenvalue

    hi = 10.0 * ops.perimeter**2 / (kappa1.eigenvalue * ops.area)
    gap_hi = gap(hi)
    if gap_hi >= 0.0:
        raise BracketError(
            f"lambda_m never crosses kappa_1: gap at m={hi:g} is {gap_hi:g}"
        )
    lo = hi / 64.0
    gap_lo = gap(lo)
    guard = 0
    while gap_lo <= 0.0:
        hi, gap_hi = lo, gap_lo
        lo /= 8.0
        gap_lo = gap(lo)
        guard += 1
        if guard > 20:
            raise BracketError(
                f"no lower bracket: gap still {gap_lo:g} at m={lo:g}"
            )
    while (hi - lo) > tol * 0.5 * (hi + lo):
        mid = 0.5 * (lo + hi)
        if gap(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    m0 = 0.5 * (lo + hi)
    return M0Report(
        m0=m0,
        kappa1=kappa1.eigenvalue,
        mu2=mu2.eigenvalue,
        lambda_d=lam_d.eigenvalue,
        bracket_history=tuple(history),
    )


def threshold_m0_pair(mesh: TriMesh, tol: float = M0_TOL,
                      seed: int = 0) -> M0Report:
    """threshold_m0 on the mesh plus a once-refined cross-check value."""
    from .geometry import refine

    coarse = threshold_m0(mesh, tol=tol, seed=seed)
    fine = threshold_m0(refine(mesh), tol=tol, seed=seed)
    return M0Report(
        m0=coarse.m0,
        kappa1=coarse.kappa1,
        mu2=coarse.mu2,
        lambda_d=coarse.lambda_d,
        bracket_history=coarse.bracket_history,
        fine_m0=fine.m0,
    )


# ---------------------------------------------------------------------------
# Dichotomy scan
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScanRow:
    m: float
    lam: float
    vanish_measure: float
    min_trace: float


def breaking_scan(mesh: TriMesh, m_values, seed: int = 0,
                  ops: MeshOperators | None = None) -> list[ScanRow]:
    """lambda_m, vanishing measure and minimum trace across an m-grid."""
    if ops is None:
        ops = operators(mesh)
    kappa1 = eig_kappa1(mesh, ops)
    rows = []
    for m in m_values:
        res = minimize_lambda_m(mesh, float(m), ops=ops, seed=seed, kappa1=kappa1)
        rows.append(ScanRow(
            m=float(m),
            lam=res.lam,
            vanish_measure=res.vanishing_measure,
            min_trace=float(np.min(res.boundary_values)),
        ))
    return rows
