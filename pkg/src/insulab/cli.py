"""Command-line entry point for reproducible insulation experiments.

Commands compute breaking thresholds, m-sweeps and closed-form oracle
tables, and write JSON/CSV/SVG reports plus mesh files.  Every command is
a pure function of its flags: re-running writes byte-identical files.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import click
import numpy as np

from . import radial_exact, reports
from .errors import InsulabError
from .fem_core import operators
from .geometry import DomainSpec, TriMesh, build_mesh, refine, write_mesh
from .heat_content import solve_u0, threshold_m1
from .temp_decay import breaking_scan, threshold_m0


def parse_domain(text: str) -> DomainSpec:
    """Parse `kind:params` strings like disk:1, annulus:1,2 or square:1.

    The base edge length is a quarter of the characteristic size; use
    --refine to subdivide further.
    """
    kind, _, rest = text.partition(":")
    try:
        params = [float(p) for p in rest.split(",") if p != ""]
    except ValueError:
        raise click.UsageError(f"malformed domain parameters in {text!r}")
    try:
        if kind == "disk" and len(params) == 1:
            (radius,) = params
            return DomainSpec.disk(radius, radius / 4.0)
        if kind == "annulus" and len(params) == 2:
            r_in, r_out = params
            return DomainSpec.annulus(r_in, r_out, (r_out - r_in) / 4.0)
        if kind == "ellipse" and len(params) == 2:
            a, b = params
            return DomainSpec.ellipse(a, b, max(a, b) / 4.0)
        if kind == "square" and len(params) == 1:
            (side,) = params
            return DomainSpec.rectangle(side, side, side / 4.0)
        if kind == "rect" and len(params) == 2:
            w, h = params
            return DomainSpec.rectangle(w, h, max(w, h) / 4.0)
        if kind == "polygon" and len(params) >= 6 and len(params) % 2 == 0:
            pts = list(zip(params[0::2], params[1::2]))
            spread = max(max(p) for p in pts) - min(min(p) for p in pts)
            return DomainSpec.polygon(pts, spread / 4.0)
    except InsulabError as err:
        raise click.UsageError(f"invalid domain {text!r}: {err}")
    raise click.UsageError(
        f"unknown domain {text!r}; expected disk:R, annulus:RIN,ROUT, "
        "ellipse:A,B, square:L, rect:W,H or polygon:X1,Y1,X2,Y2,..."
    )


def parse_grid(text: str) -> np.ndarray:
    try:
        lo_s, hi_s, n_s = text.split(":")
        lo, hi, n = float(lo_s), float(hi_s), int(n_s)
    except ValueError:
        raise click.UsageError(f"malformed grid {text!r}; expected a:b:n")
    if n < 1 or lo <= 0.0 or hi < lo:
        raise click.UsageError(f"grid {text!r} must satisfy 0 < a <= b, n >= 1")
    return np.linspace(lo, hi, n)


def _built_mesh(domain: str, refinements: int) -> TriMesh:
    mesh = build_mesh(parse_domain(domain))
    for _ in range(refinements):
        mesh = refine(mesh)
    return mesh


def _outdir(out: str) -> Path:
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _boundary_trace_by_arclength(mesh: TriMesh, values: np.ndarray):
    """Per boundary component: cumulative arclength and trace values."""
    succ = {}
    for (i, j), comp in zip(mesh.boundary_edges.tolist(),
                            mesh.boundary_component.tolist()):
        succ.setdefault(comp, {})[i] = j
    out = []
    for comp in sorted(succ):
        chain = succ[comp]
        start = min(chain)
        order = [start]
        while True:
            nxt = chain[order[-1]]
            if nxt == start:
                break
            order.append(nxt)
        pts = mesh.vertices[order]
        seg = np.hypot(*np.diff(np.vstack([pts, pts[:1]]), axis=0).T)
        arclength = np.concatenate([[0.0], np.cumsum(seg[:-1])])
        out.append((comp, arclength, values[order]))
    return out


@click.group()
def main():
    """Numerical laboratory for optimal boundary insulation."""


@main.command("threshold-m1")
@click.option("--domain", required=True, help="domain as kind:params")
@click.option("--refine", "refinements", default=0, show_default=True, type=int)
@click.option("--tol", default=1e-10, show_default=True, type=float)
@click.option("--out", default=".", show_default=True)
@click.option("--seed", default=0, show_default=True, type=int)
def cmd_threshold_m1(domain, refinements, tol, out, seed):
    """Heat-content breaking threshold m1 = delta * P^2 / |Omega|."""
    del tol, seed  # the linear pipeline has no tunable tolerance or seed
    mesh = _built_mesh(domain, refinements)
    ops = operators(mesh)
    report = threshold_m1(mesh, ops)
    outdir = _outdir(out)
    reports.write_json(outdir / "threshold_m1.json", {
        "command": "threshold-m1",
        "domain": domain,
        "refine": refinements,
        "report": report,
    })
    u0 = solve_u0(mesh, ops)
    series = [
        (f"component {comp}", arcs.tolist(), vals.tolist())
        for comp, arcs, vals in _boundary_trace_by_arclength(mesh, u0)
    ]
    reports.write_svg(outdir / "u0_trace.svg", reports.line_plot_svg(
        series, title="u0 boundary trace", xlabel="arclength",
        ylabel="u0",
    ))
    click.echo(f"m1 = {report.m1!r} (extrapolated {report.m1_extrapolated!r})")
    click.echo(f"wrote {outdir / 'threshold_m1.json'} and {outdir / 'u0_trace.svg'}")


@main.command("threshold-m0")
@click.option("--domain", required=True, help="domain as kind:params")
@click.option("--refine", "refinements", default=0, show_default=True, type=int)
@click.option("--tol", default=5e-3, show_default=True, type=float)
@click.option("--out", default=".", show_default=True)
@click.option("--seed", default=0, show_default=True, type=int)
def cmd_threshold_m0(domain, refinements, tol, out, seed):
    """Decay breaking threshold m0, defined by lambda_m0 = kappa_1."""
    mesh = _built_mesh(domain, refinements)
    try:
        report = threshold_m0(mesh, tol=tol, seed=seed)
    except InsulabError as err:
        raise click.ClickException(str(err))
    payload = {
        "command": "threshold-m0",
        "domain": domain,
        "refine": refinements,
        "tol": tol,
        "report": report,
        "kappa1_equals_mu2": bool(
            abs(report.kappa1 - report.mu2) <= 0.01 * report.mu2
        ),
    }
    if domain.startswith("disk:"):
        radius = float(domain.split(":")[1])
        exact = radial_exact.ball_thresholds(2, radius)
        payload["exact_disk"] = {
            "m0": exact.m0, "mu2": exact.mu2, "lambda_d": exact.lambda_d,
        }
    outdir = _outdir(out)
    reports.write_json(outdir / "threshold_m0.json", payload)
    click.echo(f"m0 = {report.m0!r} (kappa1 = {report.kappa1!r}, "
               f"mu2 = {report.mu2!r})")
    click.echo(f"wrote {outdir / 'threshold_m0.json'}")


def _sweep_point(args):
    mesh, m, seed = args
    row = breaking_scan(mesh, [m], seed=seed)[0]
    return (row.m, row.lam, row.vanish_measure, row.min_trace)


@main.command("sweep")
@click.option("--domain", required=True, help="domain as kind:params")
@click.option("--refine", "refinements", default=0, show_default=True, type=int)
@click.option("--m-grid", "m_grid", required=True, help="grid as a:b:n")
@click.option("--tol", default=5e-3, show_default=True, type=float)
@click.option("--out", default=".", show_default=True)
@click.option("--jobs", default=1, show_default=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
def cmd_sweep(domain, refinements, m_grid, tol, out, jobs, seed):
    """Vanishing-set scan of the decay problem over an m-grid."""
    grid = parse_grid(m_grid)
    mesh = _built_mesh(domain, refinements)
    try:
        if jobs > 1:
            # grid points are independent; merge preserves grid order
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                rows = list(pool.map(
                    _sweep_point, [(mesh, float(m), seed) for m in grid]
                ))
        else:
            rows = [
                (row.m, row.lam, row.vanish_measure, row.min_trace)
                for row in breaking_scan(mesh, grid, seed=seed)
            ]
        m0_report = threshold_m0(mesh, tol=tol, seed=seed)
    except InsulabError as err:
        raise click.ClickException(str(err))
    outdir = _outdir(out)
    reports.write_csv(outdir / "sweep.csv", reports.SWEEP_CSV_HEADER, rows)
    reports.write_svg(outdir / "sweep.svg", reports.line_plot_svg(
        [("vanishing measure", [r[0] for r in rows], [r[2] for r in rows])],
        title="vanishing measure vs m",
        xlabel="m", ylabel="measure", marker_x=m0_report.m0,
    ))
    lam_col = [r[1] for r in rows]
    if any(a < b - 1e-8 * abs(b) for a, b in zip(lam_col, lam_col[1:])):
        raise click.ClickException("lambda_m column is not nonincreasing")
    click.echo(f"m0 = {m0_report.m0!r}")
    click.echo(f"wrote {outdir / 'sweep.csv'} and {outdir / 'sweep.svg'}")


@main.command("oracle")
@click.option("--dim", default=2, show_default=True, type=int)
@click.option("--radius", default=1.0, show_default=True, type=float)
def cmd_oracle(dim, radius):
    """Closed-form ball thresholds and identity residual checks."""
    if dim < 2:
        raise click.UsageError("--dim must be at least 2")
    try:
        th = radial_exact.ball_thresholds(dim, radius)
    except (InsulabError, ValueError) as err:
        raise click.ClickException(str(err))
    rows = [
        ("dimension", th.n),
        ("radius", th.radius),
        ("p (first derivative zero)", th.p),
        ("mu2", th.mu2),
        ("lambda_D", th.lambda_d),
        ("m0", th.m0),
        ("m0 * mu2", th.m0 * th.mu2),
        ("m0 * mu2 * |Omega| / P^2", th.m0 * th.mu2 * th.volume / th.perimeter**2),
    ]
    for name, value in rows:
        click.echo(f"{name:28s} {value!r}")

    failures = []
    recurrence_worst = 0.0
    for s in (0.5, 1.0, 1.5, 2.0):
        for z in np.arange(0.1, 30.0 + 1e-9, 0.1):
            z = float(z)
            res = abs(radial_exact._bessel_any(s - 1.0, z)
                      + radial_exact.bessel_j(s + 1.0, z)
                      - 2.0 * s * radial_exact.bessel_j(s, z) / z)
            recurrence_worst = max(recurrence_worst, res)
    click.echo(f"{'recurrence residual (max)':28s} {recurrence_worst!r}")
    if recurrence_worst >= 1e-11:
        failures.append("recurrence residual exceeds 1e-11")

    if dim == 2:
        worst = abs(radial_exact.identity_2bel_check(radius, th.m0, th.mu2))
        for factor in (1.5, 2.0, 3.0, 5.0):
            m = factor * th.m0
            lam = radial_exact.lambda_m_disk(2, radius, m)
            worst = max(worst, abs(radial_exact.identity_2bel_check(radius, m, lam)))
        click.echo(f"{'curvature identity residual':28s} {worst!r}")
        if worst >= 1e-8:
            failures.append("curvature identity residual exceeds 1e-8")

    if failures:
        raise click.ClickException("; ".join(failures))
    click.echo("all residual checks passed")


@main.command("mesh")
@click.option("--domain", required=True, help="domain as kind:params")
@click.option("--refine", "refinements", default=0, show_default=True, type=int)
@click.option("--out", default=".", show_default=True)
def cmd_mesh(domain, refinements, out):
    """Build a mesh and write it in the insulab-mesh v1 text format."""
    mesh = _built_mesh(domain, refinements)
    outdir = _outdir(out)
    target = outdir / "domain.mesh"
    write_mesh(mesh, target)
    click.echo(f"wrote {target} ({mesh.num_vertices} vertices, "
               f"{mesh.num_triangles} triangles)")


if __name__ == "__main__":
    main()
