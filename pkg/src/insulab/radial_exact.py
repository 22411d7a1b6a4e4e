"""Closed-form results on balls and annuli used to validate the FEM modules.

Bessel functions of the first kind are evaluated from the ascending series
for small arguments and by backward (Miller-type) recurrence beyond, for
integer and half-integer orders.  All roots are located by deterministic
sign scans followed by bisection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import BracketError, OutOfRegimeError

Z_MAX = 60.0
ORDER_MAX = 6.0
_SERIES_Z_MAX = 8.0
_SCAN_STEP = 0.05
_SCAN_HI = 20.0


# ---------------------------------------------------------------------------
# Bessel J evaluation
# ---------------------------------------------------------------------------

def _series(s: float, z: float) -> float:
    # ascending series sum_k (-1)^k (z/2)^(2k+s) / (k! Gamma(k+s+1));
    # accurate to ~1e-13 absolute for z <= 8 (cancellation stays mild there)
    half = 0.5 * z
    term = half**s / math.gamma(s + 1.0)
    total = term
    zz = half * half
    for k in range(1, 200):
        term *= -zz / (k * (k + s))
        total += term
        if abs(term) <= 1e-18 * (1.0 + abs(total)) and k > half:
            break
    return total


def _miller_int(nmax: int, z: float) -> list[float]:
    # J_0..J_nmax by downward recurrence, normalized via J_0 + 2*sum J_{2k} = 1
    start = int(z + 10.0 * z ** (1.0 / 3.0)) + 30 + nmax
    vals = [0.0] * (nmax + 1)
    jp = 0.0
    jc = 1e-30
    norm = 0.0
    for k in range(start, 0, -1):
        jm = (2.0 * k / z) * jc - jp
        jp, jc = jc, jm
        if abs(jc) > 1e250:
            jc *= 1e-250
            jp *= 1e-250
            norm *= 1e-250
            vals = [v * 1e-250 for v in vals]
        order = k - 1
        if order <= nmax:
            vals[order] = jc
        if order >= 2 and order % 2 == 0:
            norm += 2.0 * jc
    norm += jc  # J_0 term of the normalization identity
    return [v / norm for v in vals]


def _miller_half(smax: float, z: float) -> dict[float, float]:
    # half-integer orders -1/2 .. smax, normalized against the closed forms
    # J_{1/2} = sqrt(2/(pi z)) sin z and J_{-1/2} = sqrt(2/(pi z)) cos z
    # (whichever is larger in magnitude, so the scale never degenerates)
    ktop = int(smax - 0.5) + int(z + 10.0 * z ** (1.0 / 3.0)) + 30
    orders = [k + 0.5 for k in range(-1, ktop + 1)]
    vals = {}
    jp = 0.0
    jc = 1e-30
    s = orders[-1]
    vals[s] = jc
    while s > -0.5:
        jm = (2.0 * s / z) * jc - jp
        jp, jc = jc, jm
        if abs(jc) > 1e250:
            jc *= 1e-250
            jp *= 1e-250
            vals = {o: v * 1e-250 for o, v in vals.items()}
        s -= 1.0
        vals[s] = jc
    amp = math.sqrt(2.0 / (math.pi * z))
    ref_half = amp * math.sin(z)
    ref_mhalf = amp * math.cos(z)
    if abs(ref_half) >= abs(ref_mhalf):
        scale = ref_half / vals[0.5]
    else:
        scale = ref_mhalf / vals[-0.5]
    return {o: v * scale for o, v in vals.items()}


def _is_near_int(x: float) -> bool:
    return abs(x - round(x)) < 1e-12


def _bessel_any(s: float, z: float) -> float:
    # internal evaluator; permits s = -1/2 for recurrence cross-checks
    if not 0.0 <= z <= Z_MAX:
        raise ValueError(f"argument z={z!r} outside supported range [0, {Z_MAX}]")
    if s < -0.5 or s > ORDER_MAX + 1.5:
        raise ValueError(f"order s={s!r} outside supported range")
    if z == 0.0:
        if s == 0.0:
            return 1.0
        if s < 0.0:
            return math.inf
        return 0.0
    if z <= _SERIES_Z_MAX:
        return _series(s, z)
    if _is_near_int(s):
        n = int(round(s))
        return _miller_int(n, z)[n]
    if _is_near_int(s - 0.5):
        return _miller_half(s, z)[round(s * 2.0) / 2.0]
    raise ValueError(
        f"order s={s!r} must be an integer or half-integer for z > {_SERIES_Z_MAX}"
    )


def bessel_j(s: float, z: float) -> float:
    """Bessel function of the first kind J_s(z) for s >= 0, 0 <= z <= 60."""
    if s < 0.0:
        raise ValueError("order must be nonnegative")
    return _bessel_any(s, z)


def bessel_j_deriv(s: float, z: float) -> float:
    """Derivative J_s'(z), with an internal recurrence consistency check.

    The value is computed as -J_{s+1}(z) + s*J_s(z)/z and cross-checked
    against J_{s-1}(z) - s*J_s(z)/z; disagreement beyond 1e-11 of the term
    scale raises ArithmeticError.  At z = 0 the limit value is returned.
    """
    if s < 0.0:
        raise ValueError("order must be nonnegative")
    if z == 0.0:
        if s == 0.0:
            return 0.0
        if s < 1.0:
            return math.inf
        if s == 1.0:
            return 0.5
        return 0.0
    js = _bessel_any(s, z)
    jnext = _bessel_any(s + 1.0, z)
    ratio = s * js / z
    value = -jnext + ratio
    if s == 0.0:
        jprev = -jnext  # J_{-1} = -J_1
    else:
        jprev = _bessel_any(s - 1.0, z)
    other = jprev - ratio
    scale = 1.0 + abs(jprev) + abs(jnext) + abs(ratio)
    if abs(value - other) > 1e-11 * scale:
        raise ArithmeticError(
            f"recurrence cross-check failed at s={s}, z={z}: {value} vs {other}"
        )
    return value


# ---------------------------------------------------------------------------
# Root finding
# ---------------------------------------------------------------------------

def _bisect(f, lo: float, hi: float, flo: float, rtol: float = 1e-13) -> float:
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0.0:
            return mid
        if (flo < 0.0) == (fm < 0.0):
            lo, flo = mid, fm
        else:
            hi = mid
        if hi - lo <= rtol * hi:
            break
    return 0.5 * (lo + hi)


def _first_sign_change(f, lo: float = _SCAN_STEP, hi: float = _SCAN_HI,
                       step: float = _SCAN_STEP) -> float:
    z = lo
    fz = f(z)
    while z < hi:
        z_next = min(z + step, hi)
        f_next = f(z_next)
        if (fz < 0.0) != (f_next < 0.0) or f_next == 0.0:
            return _bisect(f, z, z_next, fz)
        z, fz = z_next, f_next
    raise BracketError(f"no sign change found in [{lo}, {hi}]")


def first_bessel_zero(s: float) -> float:
    """First positive zero of J_s, from a sign scan plus bisection."""
    return _first_sign_change(lambda z: bessel_j(s, z))


def first_deriv_zero(n: int) -> float:
    """First positive zero p of the derivative of t -> t^(1-n/2) J_{n/2}(t).

    Equivalently the first positive root of (1-n/2) J_{n/2}(t) + t J_{n/2}'(t);
    p/R is the square root of the second Neumann eigenvalue of the n-ball of
    radius R.  For n = 2 this is the first zero of J_1'.
    """
    if n < 2 or n != int(n):
        raise ValueError("dimension must be an integer >= 2")
    s = 0.5 * n

    def f(t: float) -> float:
        return (1.0 - s) * bessel_j(s, t) + t * bessel_j_deriv(s, t)

    return _first_sign_change(f, lo=0.1)


# ---------------------------------------------------------------------------
# Ball thresholds and radial profiles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BallThresholds:
    """Exact spectral and breaking constants of the n-ball of radius R."""

    n: int
    radius: float
    p: float            # first positive zero of d/dt [t^(1-n/2) J_{n/2}(t)]
    mu2: float          # second Neumann eigenvalue (p/R)^2
    lambda_d: float     # first Dirichlet eigenvalue (j_{n/2-1,1}/R)^2
    m0: float           # decay breaking threshold
    volume: float
    perimeter: float


def ball_thresholds(n: int, radius: float) -> BallThresholds:
    """Exact thresholds of the n-ball: mu2, lambda_D and m0.

    m0 = ((n-1)/n) * P^2/(|Omega| mu2); in two dimensions m0 * mu2 = 2*pi.
    """
    if n < 2 or n != int(n):
        raise ValueError("dimension must be an integer >= 2")
    if radius <= 0.0:
        raise ValueError("radius must be positive")
    n = int(n)
    p = first_deriv_zero(n)
    mu2 = (p / radius) ** 2
    j_dirichlet = first_bessel_zero(0.5 * n - 1.0)
    lambda_d = (j_dirichlet / radius) ** 2
    omega = math.pi ** (0.5 * n) / math.gamma(0.5 * n + 1.0)
    volume = omega * radius**n
    perimeter = n * omega * radius ** (n - 1)
    m0 = (n - 1.0) / n * perimeter**2 / (volume * mu2)
    return BallThresholds(
        n=n, radius=radius, p=p, mu2=mu2, lambda_d=lambda_d,
        m0=m0, volume=volume, perimeter=perimeter,
    )


def radial_profile(n: int, lam: float, r: float) -> float:
    """Radial minimizer profile r^(1-n/2) J_{n/2-1}(sqrt(lam) r); J_0 for n=2."""
    if lam <= 0.0 or r <= 0.0:
        raise ValueError("lam and r must be positive")
    x = math.sqrt(lam) * r
    return r ** (1.0 - 0.5 * n) * bessel_j(0.5 * n - 1.0, x)


def second_normal_derivative(n: int, lam: float, r: float) -> float:
    """Second radial derivative of the profile at radius r.

    Vanishes at r = R exactly when lam equals the second Neumann eigenvalue
    of the ball of radius R.
    """
    if lam <= 0.0 or r <= 0.0:
        raise ValueError("lam and r must be positive")
    root = math.sqrt(lam)
    x = root * r
    s = 0.5 * n
    return (-root * (1.0 - s) * r**(-s) * bessel_j(s, x)
            - lam * r ** (1.0 - s) * bessel_j_deriv(s, x))


def identity_2bel_check(radius: float, m: float, lam: float) -> float:
    """Residual of (m*lam - 2*pi) * int_bnd u + m * int_bnd u_rr on the disk.

    Boundary integrals reduce to 2*pi*R times the pointwise radial values.
    The residual vanishes for every radial solution pair (m, lambda_m) of the
    decay problem in two dimensions, and both terms vanish separately at m0.
    """
    if radius <= 0.0 or m <= 0.0:
        raise ValueError("radius and m must be positive")
    ring = 2.0 * math.pi * radius
    u_bnd = radial_profile(2, lam, radius)
    upp_bnd = second_normal_derivative(2, lam, radius)
    return (m * lam - 2.0 * math.pi) * ring * u_bnd + m * ring * upp_bnd


def lambda_m_disk(n: int, radius: float, m: float) -> float:
    """Decay rate lambda_m of the radial minimizer on the n-ball, for m > m0.

    Solves sqrt(lam) J_{n/2}(sqrt(lam) R) = (P/m) J_{n/2-1}(sqrt(lam) R) for
    lam in (0, mu2] by a sign scan plus bisection.  Below m0 the radial
    profile is no longer a minimizer and OutOfRegimeError is raised.
    """
    th = ball_thresholds(n, radius)
    if m <= 0.0:
        raise ValueError("m must be positive")
    s = 0.5 * n
    ratio = th.perimeter / m

    def g(lam: float) -> float:
        x = math.sqrt(lam) * radius
        return math.sqrt(lam) * bessel_j(s, x) - ratio * bessel_j(s - 1.0, x)

    hi = th.mu2
    g_hi = g(hi)
    if g_hi < 0.0:
        if m >= th.m0 * (1.0 - 1e-9):
            return th.mu2  # boundary case m = m0 up to roundoff
        raise OutOfRegimeError(
            f"m={m!r} is below the radial regime threshold m0={th.m0!r}"
        )
    # scan for the first sign change so the smallest branch is always taken
    grid = 400
    lo = hi * 1e-13
    g_lo = g(lo)
    if g_lo > 0.0:
        raise BracketError("no sign change: transcendental bracket failed at 0+")
    prev, g_prev = lo, g_lo
    for k in range(1, grid + 1):
        lam = lo + (hi - lo) * k / grid
        g_lam = g(lam)
        if (g_prev < 0.0) != (g_lam < 0.0) or g_lam == 0.0:
            return _bisect(g, prev, lam, g_prev, rtol=1e-13)
        prev, g_prev = lam, g_lam
    return _bisect(g, prev, hi, g_prev, rtol=1e-13)


# ---------------------------------------------------------------------------
# Annulus closed forms
# ---------------------------------------------------------------------------

def _annulus_constants(r_in: float, r_out: float) -> tuple[float, float]:
    if not 0.0 < r_in < r_out:
        raise ValueError("radii must satisfy 0 < r_in < r_out")
    # u = -r^2/4 + A ln r + B; the constant-flux condition -|Omega|/P on both
    # rims forces A = r_in*r_out/2, and B is fixed by zero mean over the annulus
    a = 0.5 * r_in * r_out

    def antiderivative(r: float) -> float:
        # of (-r^3/4 + A r ln r) dr, for the zero-mean normalization
        return -r**4 / 16.0 + a * (0.5 * r * r * math.log(r) - 0.25 * r * r)

    span = 0.5 * (r_out**2 - r_in**2)
    b = -(antiderivative(r_out) - antiderivative(r_in)) / span
    return a, b


def annulus_u0(r_in: float, r_out: float, r: float) -> float:
    """Zero-mean torsion-type solution on the annulus at radius r.

    Solves -Lap u = 1 with constant outward flux -|Omega|/P on both boundary
    circles: u = -r^2/4 + A ln r + B with A = r_in*r_out/2.
    """
    if not r_in <= r <= r_out:
        raise ValueError("r must lie within [r_in, r_out]")
    a, b = _annulus_constants(r_in, r_out)
    return -r * r / 4.0 + a * math.log(r) + b


def annulus_delta_omega(r_in: float, r_out: float) -> float:
    """Boundary mean minus boundary minimum of the annulus torsion solution.

    For the (1, 2) annulus this equals 1/4 - ln(2)/3.
    """
    u_in = annulus_u0(r_in, r_out, r_in)
    u_out = annulus_u0(r_in, r_out, r_out)
    mean = (r_in * u_in + r_out * u_out) / (r_in + r_out)
    return mean - min(u_in, u_out)


def annulus_m1(r_in: float, r_out: float) -> float:
    """Heat-content breaking threshold of the annulus, delta * P^2 / |Omega|."""
    perimeter = 2.0 * math.pi * (r_in + r_out)
    area = math.pi * (r_out**2 - r_in**2)
    return annulus_delta_omega(r_in, r_out) * perimeter**2 / area
