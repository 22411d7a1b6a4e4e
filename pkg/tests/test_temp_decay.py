"""Tests for the temperature-decay problem: eigenvalues, lambda_m, m0."""

import math

import numpy as np
import pytest

from insulab import fem_core as fem
from insulab import geometry as geo
from insulab import radial_exact as rx
from insulab import temp_decay as td

# FEM m0 of the unit square, frozen after a refinement consistency check
# (0.80979 at h=1/16, 0.81173 at h=1/32)
SQUARE_M0_GOLDEN = 0.8117

BALL = rx.ball_thresholds(2, 1.0)


@pytest.fixture(scope="module")
def disk():
    mesh = geo.build_mesh(geo.DomainSpec.disk(1.0, 0.25))
    for _ in range(2):
        mesh = geo.refine(mesh)
    return mesh, fem.operators(mesh)


@pytest.fixture(scope="module")
def square():
    mesh = geo.build_mesh(geo.DomainSpec.rectangle(1.0, 1.0, 0.25))
    for _ in range(3):
        mesh = geo.refine(mesh)
    return mesh, fem.operators(mesh)


@pytest.fixture(scope="module")
def disk_kappa1(disk):
    mesh, ops = disk
    return td.eig_kappa1(mesh, ops)


# ---------------------------------------------------------------------------
# comparison eigenvalues
# ---------------------------------------------------------------------------

def test_lambda_d_disk(disk):
    mesh, ops = disk
    res = td.eig_dirichlet(mesh, ops)
    assert abs(res.eigenvalue - BALL.lambda_d) / BALL.lambda_d < 0.01
    assert abs(res.eigenvalue - 5.7832) / 5.7832 < 0.01


def test_lambda_d_square(square):
    mesh, ops = square
    res = td.eig_dirichlet(mesh, ops)
    exact = 2.0 * math.pi**2
    assert abs(res.eigenvalue - exact) / exact < 0.01


def test_lambda_d_scaling():
    small = geo.refine(geo.build_mesh(geo.DomainSpec.disk(1.0, 0.25)))
    large = geo.refine(geo.build_mesh(geo.DomainSpec.disk(2.0, 0.5)))
    a = td.eig_dirichlet(small).eigenvalue
    b = td.eig_dirichlet(large).eigenvalue
    assert b == pytest.approx(a / 4.0, rel=1e-7)


def test_mu2_disk(disk):
    mesh, ops = disk
    res = td.eig_neumann2(mesh, ops)
    assert abs(res.eigenvalue - 3.390) / 3.390 < 0.01


def test_mu2_square(square):
    mesh, ops = square
    res = td.eig_neumann2(mesh, ops)
    exact = math.pi**2
    assert abs(res.eigenvalue - exact) / exact < 0.01


def test_mu2_eigenfunction_zero_mean(square):
    mesh, ops = square
    res = td.eig_neumann2(mesh, ops)
    ones = np.ones(mesh.num_vertices)
    assert abs(ones @ (ops.mass @ res.eigenfunction)) < 1e-8


def test_kappa1_disk_equals_mu2(disk, disk_kappa1):
    mesh, ops = disk
    mu2 = td.eig_neumann2(mesh, ops)
    assert abs(disk_kappa1.eigenvalue - mu2.eigenvalue) / mu2.eigenvalue < 0.01


def test_kappa1_square_equals_mu2(square):
    mesh, ops = square
    mu2 = td.eig_neumann2(mesh, ops)
    kappa1 = td.eig_kappa1(mesh, ops)
    assert abs(kappa1.eigenvalue - mu2.eigenvalue) / mu2.eigenvalue < 0.01


def test_kappa1_below_mu2_on_asymmetric_polygon():
    pts = [(1.4, 0.1), (0.3, 1.0), (-0.9, 0.8), (-1.1, -0.4), (0.2, -1.2)]
    mesh = geo.build_mesh(geo.DomainSpec.polygon(pts, 0.2))
    ops = fem.operators(mesh)
    mu2 = td.eig_neumann2(mesh, ops).eigenvalue
    kappa1 = td.eig_kappa1(mesh, ops).eigenvalue
    assert kappa1 <= mu2 + 1e-8


def test_eigenvalue_ordering_with_friedlander_margin(disk):
    mesh, ops = disk
    kappa1 = td.eig_kappa1(mesh, ops).eigenvalue
    mu2 = td.eig_neumann2(mesh, ops).eigenvalue
    lam_d = td.eig_dirichlet(mesh, ops).eigenvalue
    assert kappa1 <= mu2 + 1e-8
    assert mu2 < lam_d - 1e-6 * lam_d


# ---------------------------------------------------------------------------
# minimize_lambda_m
# ---------------------------------------------------------------------------

def test_lambda_m_radial_regime_matches_oracle(disk, disk_kappa1):
    mesh, ops = disk
    m = 2.0 * BALL.m0
    res = td.minimize_lambda_m(mesh, m, ops=ops, kappa1=disk_kappa1)
    oracle = rx.lambda_m_disk(2, 1.0, m)
    assert abs(res.lam - oracle) / oracle < 0.01
    # the minimizer is radial: relative angular spread of the trace is tiny
    trace = res.boundary_values
    assert float(trace.std() / abs(trace.mean())) < 1e-3
    assert res.vanishing_measure == 0.0


def test_lambda_m_large_m_constant_regime(disk, disk_kappa1):
    mesh, ops = disk
    m = 1e6 * ops.area
    res = td.minimize_lambda_m(mesh, m, ops=ops, kappa1=disk_kappa1)
    bound = ops.perimeter**2 / (m * ops.area)
    assert res.lam <= bound * (1.0 + 1e-6)
    assert float(np.min(res.boundary_values)) > 1e-3 * float(
        np.max(res.boundary_values)
    )


def test_lambda_m_small_m_dirichlet_regime(disk, disk_kappa1):
    mesh, ops = disk
    res = td.minimize_lambda_m(mesh, 1e-6, ops=ops, kappa1=disk_kappa1)
    lam_d = td.eig_dirichlet(mesh, ops).eigenvalue
    assert abs(res.lam - lam_d) / lam_d < 0.02


def test_lambda_m_result_invariants(disk, disk_kappa1):
    mesh, ops = disk
    res = td.minimize_lambda_m(mesh, 1.0, ops=ops, kappa1=disk_kappa1)
    # mass normalization, nonnegativity, Rayleigh consistency, upper bounds
    assert float(res.u @ (ops.mass @ res.u)) == pytest.approx(1.0, abs=1e-10)
    assert float(res.u.min()) >= -1e-8
    assert res.lam == pytest.approx(td.decay_quotient(res.u, ops, 1.0), rel=1e-10)
    lam_d = td.eig_dirichlet(mesh, ops).eigenvalue
    assert res.lam <= lam_d + 1e-8
    assert res.lam <= ops.perimeter**2 / (1.0 * ops.area) + 1e-8


def test_lambda_m_below_threshold_breaks_symmetry(disk, disk_kappa1):
    mesh, ops = disk
    res = td.minimize_lambda_m(mesh, 0.5 * BALL.m0, ops=ops, kappa1=disk_kappa1)
    assert res.vanishing_measure > 0.05 * ops.perimeter
    assert res.lam < td.eig_dirichlet(mesh, ops).eigenvalue


def test_lambda_m_rejects_nonpositive_m(disk):
    mesh, ops = disk
    with pytest.raises(ValueError):
        td.minimize_lambda_m(mesh, 0.0, ops=ops)


# ---------------------------------------------------------------------------
# threshold_m0
# ---------------------------------------------------------------------------

def test_m0_disk_two_pi_law(disk):
    mesh, ops = disk
    report = td.threshold_m0(mesh, ops=ops)
    product = report.m0 * report.mu2
    assert abs(product - 2.0 * math.pi) / (2.0 * math.pi) < 0.02
    assert report.kappa1 <= report.mu2 + 1e-8
    assert report.mu2 < report.lambda_d
    assert len(report.bracket_history) >= 3


def test_m0_square_golden_consistency():
    mesh = geo.build_mesh(geo.DomainSpec.rectangle(1.0, 1.0, 0.25))
    for _ in range(2):
        mesh = geo.refine(mesh)
    report = td.threshold_m0_pair(mesh)
    assert report.fine_m0 is not None
    assert abs(report.m0 - report.fine_m0) / report.fine_m0 < 0.02
    assert report.fine_m0 == pytest.approx(SQUARE_M0_GOLDEN, rel=0.02)


def test_m0_disk_scaling():
    small = geo.refine(geo.build_mesh(geo.DomainSpec.disk(1.0, 0.25)))
    large = geo.refine(geo.build_mesh(geo.DomainSpec.disk(2.0, 0.5)))
    a = td.threshold_m0(small).m0
    b = td.threshold_m0(large).m0
    assert b == pytest.approx(4.0 * a, rel=0.02)


# ---------------------------------------------------------------------------
# breaking_scan
# ---------------------------------------------------------------------------

def test_breaking_scan_dichotomy(disk):
    mesh, ops = disk
    m0 = td.threshold_m0(mesh, ops=ops).m0
    grid = [0.5 * m0, 0.9 * m0, 1.1 * m0, 2.0 * m0]
    rows = td.breaking_scan(mesh, grid, ops=ops)
    assert rows[0].vanish_measure > 0.0
    assert rows[-1].vanish_measure == 0.0
    assert rows[-1].min_trace > 1e-3 * float(np.max(np.abs(rows[-1].min_trace)))
    lams = [r.lam for r in rows]
    assert all(a >= b - 1e-8 * abs(a) for a, b in zip(lams, lams[1:]))


def test_breaking_scan_rows_carry_inputs(disk):
    mesh, ops = disk
    rows = td.breaking_scan(mesh, [1.0, 2.0], ops=ops)
    assert [r.m for r in rows] == [1.0, 2.0]
