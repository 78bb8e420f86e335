"""Semi-wave profiles ``-d Z'' + k Z' = a Z - b Z^2`` and the spreading speed.

The initial slope ``Z_k'(0)`` is found by shooting from ``r = 0`` with a
fixed-step RK4 integrator and bisecting on a two-event classifier. The
spreading speed ``c*`` is the root of ``F(k) = mu Z_k'(0) - k``, which is
strictly decreasing on ``(0, 2 sqrt(a d))``.

Tabulated profiles are built separately by integrating *backwards* along the
stable manifold of the plateau ``a/b``; that direction is numerically stable,
so the table never inherits the exponential divergence of forward shooting.
The two routes must agree on ``Z'(0)`` and the difference is kept on the
profile as ``manifold_slope``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from numba import njit

from .errors import DeltaTooLarge, NoConvergence, OutOfTabulatedRange, SpeedOutOfRange
from .model import ModelParams, validate


@dataclass(frozen=True)
class ShootingOptions:
    h_ode: Optional[float] = None  # default 1e-3 * sqrt(d/a)
    r_max: Optional[float] = None  # default 40 * sqrt(d/a)
    tol_slope: float = 1e-10
    tol_speed: float = 1e-8
    tol_plateau: float = 1e-3
    max_iter: int = 200
    overshoot_margin: float = 1e-12

    def step(self, params: ModelParams) -> float:
        return self.h_ode if self.h_ode is not None else 1e-3 * params.length_scale

    def radius(self, params: ModelParams) -> float:
        return self.r_max if self.r_max is not None else 40.0 * params.length_scale


DEFAULT_OPTIONS = ShootingOptions()


# --------------------------------------------------------------------------
# compiled kernels
# --------------------------------------------------------------------------

@njit(cache=True)
def _classify(s, k, a, b, d, h, n_steps, z_hi):
    """+1: overshoots a/b (slope too large); -1: turns back below a/b
    (slope too small); 0: neither event fired before r_max."""
    cap = a / b
    z = 0.0
    p = s
    for _ in range(n_steps):
        k1z = p
        k1p = (k * p - a * z + b * z * z) / d
        z2 = z + 0.5 * h * k1z
        p2 = p + 0.5 * h * k1p
        k2z = p2
        k2p = (k * p2 - a * z2 + b * z2 * z2) / d
        z3 = z + 0.5 * h * k2z
        p3 = p + 0.5 * h * k2p
        k3z = p3
        k3p = (k * p3 - a * z3 + b * z3 * z3) / d
        z4 = z + h * k3z
        p4 = p + h * k3p
        k4z = p4
        k4p = (k * p4 - a * z4 + b * z4 * z4) / d
        z += h / 6.0 * (k1z + 2.0 * k2z + 2.0 * k3z + k4z)
        p += h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
        if z > z_hi:
            return 1
        if p <= 0.0 and z < cap:
            return -1
    return 0


@njit(cache=True)
def _bisect_slope(k, a, b, d, h, n_steps, z_hi, s_lo, s_hi, tol, max_iter):
    it = 0
    while s_hi - s_lo > tol and it < max_iter:
        s = 0.5 * (s_lo + s_hi)
        c = _classify(s, k, a, b, d, h, n_steps, z_hi)
        it += 1
        if c > 0:
            s_hi = s
        elif c < 0:
            s_lo = s
        else:
            return s, s, it
    return s_lo, s_hi, it


@njit(cache=True)
def _rk4_backward(k, a, b, d, hh, y, p, sign):
    """One RK4 step of length ``hh`` for ``d y'' = k y' + sign (a y - b y^2)``
    after the shift used by the caller (see ``_manifold_backward``)."""
    k1y = p
    k1p = (k * p + sign * (a * y - b * y * y)) / d
    y2 = y + 0.5 * hh * k1y
    p2 = p + 0.5 * hh * k1p
    k2y = p2
    k2p = (k * p2 + sign * (a * y2 - b * y2 * y2)) / d
    y3 = y + 0.5 * hh * k2y
    p3 = p + 0.5 * hh * k2p
    k3y = p3
    k3p = (k * p3 + sign * (a * y3 - b * y3 * y3)) / d
    y4 = y + hh * k3y
    p4 = p + hh * k3p
    k4y = p4
    k4p = (k * p4 + sign * (a * y4 - b * y4 * y4)) / d
    return (y + hh / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y),
            p + hh / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p))


@njit(cache=True)
def _manifold_backward(k, a, b, d, h, eta0, first_step, zs, ps):
    """Integrate the stable manifold of ``a/b`` towards decreasing r.

    Near the plateau the unknown is ``eta = a/b - Z``, which solves
    ``d eta'' - k eta' = a eta - b eta^2`` and starts on the stable
    eigendirection ``(eta0, nu*eta0)``; this keeps full relative precision
    there. Once Z drops below half the plateau the integration continues in
    Z itself, which keeps precision near Z = 0 (close to the KPP speed the
    profile spirals into 0 at amplitudes far below one ulp of a/b). Stores
    ``(Z, Z')``. The first step has length ``first_step``, the rest ``h``.
    Returns the number of stored states; the last is the first with Z <= 0,
    or -1 if the buffers ran out.
    """
    cap = a / b
    nu = (k - math.sqrt(k * k + 4.0 * a * d)) / (2.0 * d)
    e = eta0
    q = nu * eta0
    zs[0] = cap - e
    ps[0] = -q
    n = zs.shape[0]
    i = 1
    while i < n:
        hh = -(first_step if i == 1 else h)
        e, q = _rk4_backward(k, a, b, d, hh, e, q, 1.0)
        zs[i] = cap - e
        ps[i] = -q
        i += 1
        if e >= 0.5 * cap:
            break
    z = cap - e
    p = -q
    if z <= 0.0:
        return i
    while i < n:
        hh = -(first_step if i == 1 else h)
        # Z solves d Z'' = k Z' - a Z + b Z^2
        z, p = _rk4_backward(k, a, b, d, hh, z, p, -1.0)
        zs[i] = z
        ps[i] = p
        i += 1
        if z <= 0.0:
            return i
    return -1


# --------------------------------------------------------------------------
# slope of the semi-wave
# --------------------------------------------------------------------------

def _check_speed(params: ModelParams, k: float) -> None:
    if not (0.0 <= k < params.c_max):
        raise SpeedOutOfRange(f"k={k!r} outside [0, 2*sqrt(a*d)) = [0, {params.c_max!r})")


def _kernel_args(params: ModelParams, opts: ShootingOptions):
    h = opts.step(params)
    n_steps = int(math.ceil(opts.radius(params) / h))
    z_hi = params.capacity * (1.0 + opts.overshoot_margin)
    return h, n_steps, z_hi


def k_zero_slope(params: ModelParams) -> float:
    """Closed form ``Z_0'(0) = sqrt(a^3 / (3 b^2 d))`` from the first integral."""
    return math.sqrt(params.a ** 3 / (3.0 * params.b ** 2 * params.d))


def shooting_slope(params: ModelParams, k: float, opts: ShootingOptions = DEFAULT_OPTIONS,
                   bracket: Optional[tuple[float, float]] = None,
                   tol: Optional[float] = None) -> tuple[float, int]:
    """Bisect the initial slope of the semi-wave at speed ``k``.

    Returns ``(slope, iterations)``. A caller that already knows a bracket
    (e.g. from the monotonicity of the slope in ``k``) may pass it; it is
    verified before use and silently replaced if it does not classify.
    """
    _check_speed(params, k)
    a, b, d = params.a, params.b, params.d
    h, n_steps, z_hi = _kernel_args(params, opts)
    tol = opts.tol_slope if tol is None else tol

    def cls(s):
        return _classify(s, k, a, b, d, h, n_steps, z_hi)

    lo, hi = (None, None)
    if bracket is not None:
        lo, hi = max(bracket[0], 0.0), bracket[1]
        if lo > 0.0 and cls(lo) >= 0:
            lo = None
        if hi is not None and cls(hi) <= 0:
            hi = None
    if lo is None:
        lo = 0.0
    if hi is None:
        hi = 1.5 * k_zero_slope(params)
        for _ in range(60):
            if cls(hi) > 0:
                break
            lo = max(lo, hi) if cls(hi) < 0 else lo
            hi *= 2.0
        else:
            raise NoConvergence(f"could not bracket the semi-wave slope at k={k}")
    s_lo, s_hi, it = _bisect_slope(k, a, b, d, h, n_steps, z_hi, lo, hi, tol, opts.max_iter)
    if s_hi - s_lo > tol:
        raise NoConvergence(f"slope bisection did not reach {tol} in {opts.max_iter} iterations")
    return 0.5 * (s_lo + s_hi), it


# --------------------------------------------------------------------------
# tabulated profile
# --------------------------------------------------------------------------

def _quintic_hermite(r, grid_h, z, p, q, nu_tail, cap, deriv):
    """Evaluate the C^2 quintic Hermite interpolant (and derivatives).

    ``z, p, q`` are Z, Z', Z'' at nodes ``j * grid_h``.
    """
    r = np.asarray(r, dtype=float)
    n = z.shape[0] - 1
    t = r / grid_h
    j = np.clip(np.floor(t).astype(np.int64), 0, n - 1)
    s = t - j
    h = grid_h
    z0, z1 = z[j], z[j + 1]
    p0, p1 = p[j] * h, p[j + 1] * h
    q0, q1 = q[j] * h * h, q[j + 1] * h * h
    s2 = s * s
    s3 = s2 * s
    s4 = s3 * s
    s5 = s4 * s
    out = []
    # basis functions of the quintic Hermite interpolant on [0, 1]
    if 0 in deriv:
        h0 = 1 - 10 * s3 + 15 * s4 - 6 * s5
        h1 = s - 6 * s3 + 8 * s4 - 3 * s5
        h2 = 0.5 * s2 - 1.5 * s3 + 1.5 * s4 - 0.5 * s5
        h5 = 10 * s3 - 15 * s4 + 6 * s5
        h4 = -4 * s3 + 7 * s4 - 3 * s5
        h3 = 0.5 * s3 - s4 + 0.5 * s5
        out.append(h0 * z0 + h1 * p0 + h2 * q0 + h3 * q1 + h4 * p1 + h5 * z1)
    if 1 in deriv:
        d0 = -30 * s2 + 60 * s3 - 30 * s4
        d1 = 1 - 18 * s2 + 32 * s3 - 15 * s4
        d2 = s - 4.5 * s2 + 6 * s3 - 2.5 * s4
        d5 = -d0
        d4 = -12 * s2 + 28 * s3 - 15 * s4
        d3 = 1.5 * s2 - 4 * s3 + 2.5 * s4
        out.append((d0 * z0 + d1 * p0 + d2 * q0 + d3 * q1 + d4 * p1 + d5 * z1) / h)
    if 2 in deriv:
        e0 = -60 * s + 180 * s2 - 120 * s3
        e1 = -36 * s + 96 * s2 - 60 * s3
        e2 = 1 - 9 * s + 18 * s2 - 10 * s3
        e5 = -e0
        e4 = -24 * s + 84 * s2 - 60 * s3
        e3 = 3 * s - 12 * s2 + 10 * s3
        out.append((e0 * z0 + e1 * p0 + e2 * q0 + e3 * q1 + e4 * p1 + e5 * z1) / (h * h))
    return out


@dataclass(frozen=True, eq=False)
class SemiWaveProfile:
    """Tabulated semi-wave ``Z_k`` on a uniform grid over ``[0, r_max]``."""

    k: float
    slope0: float
    r: np.ndarray = field(repr=False)
    Z: np.ndarray = field(repr=False)
    dZ: np.ndarray = field(repr=False)
    r_max: float
    params: ModelParams
    manifold_slope: float = float("nan")

    @property
    def grid(self) -> np.ndarray:
        return self.Z

    @property
    def h(self) -> float:
        return float(self.r[1] - self.r[0])

    def _second(self, z, p):
        prm = self.params
        return (self.k * p - prm.a * z + prm.b * z * z) / prm.d

    def evaluate(self, r, deriv: int = 0):
        """``Z^(deriv)(r)`` for ``deriv`` in {0, 1, 2}; C^2 between nodes."""
        r = np.asarray(r, dtype=float)
        if np.any(r < -1e-12) or np.any(r > self.r_max * (1 + 1e-12)):
            raise OutOfTabulatedRange(
                f"semi-wave evaluated outside [0, {self.r_max}] (min {r.min()}, max {r.max()})")
        r = np.clip(r, 0.0, self.r_max)
        q = self._second(self.Z, self.dZ)
        return _quintic_hermite(r, self.h, self.Z, self.dZ, q, None, None, (deriv,))[0]

    def __call__(self, r):
        return self.evaluate(r, 0)

    def derivatives(self, r):
        """``(Z, Z', Z'')`` at ``r`` in one pass."""
        r = np.asarray(r, dtype=float)
        if np.any(r < -1e-12) or np.any(r > self.r_max * (1 + 1e-12)):
            raise OutOfTabulatedRange(f"semi-wave evaluated outside [0, {self.r_max}]")
        r = np.clip(r, 0.0, self.r_max)
        q = self._second(self.Z, self.dZ)
        return tuple(_quintic_hermite(r, self.h, self.Z, self.dZ, q, None, None, (0, 1, 2)))

    def ode_residual(self) -> np.ndarray:
        """Centered-difference residual of the ODE at the interior nodes."""
        prm, h, Z = self.params, self.h, self.Z
        zpp = (Z[2:] - 2 * Z[1:-1] + Z[:-2]) / (h * h)
        zp = (Z[2:] - Z[:-2]) / (2 * h)
        zc = Z[1:-1]
        return -prm.d * zpp + self.k * zp - prm.a * zc + prm.b * zc * zc

    def to_csv(self, path) -> Path:
        path = Path(path)
        prm = self.params
        with path.open("w", encoding="utf-8") as fh:
            fh.write(f"# k={self.k!r} slope0={self.slope0!r} a={prm.a!r} b={prm.b!r} "
                     f"d={prm.d!r} mu={prm.mu!r}\n")
            fh.write("r,Z\n")
            for r, z in zip(self.r, self.Z):
                fh.write(f"{r:.17g},{z:.17g}\n")
        return path


def _tabulate_manifold(params: ModelParams, k: float, h: float, r_max: float,
                       eta0_rel: float = 1e-12, plateau_tol: Optional[float] = None):
    """Grid ``r``, ``Z`` and ``Z'`` on ``[0, r_max]``.

    With ``plateau_tol`` set, ``r_max`` is enlarged when needed so that the
    table ends with ``Z >= (1 - plateau_tol/10) a/b`` (close to the KPP speed
    the profile needs far more than the default length to saturate).
    """
    a, b, d = params.a, params.b, params.d
    cap = a / b
    eta0 = eta0_rel * cap
    nu = (k - math.sqrt(k * k + 4.0 * a * d)) / (2.0 * d)
    L = params.length_scale
    n_buf = int((math.log(1.0 / eta0_rel) / abs(nu) + 200.0 * L) / h) + 16
    for _ in range(8):
        es = np.empty(n_buf)
        qs = np.empty(n_buf)
        n = _manifold_backward(k, a, b, d, h, eta0, h, es, qs)
        if n > 0:
            break
        n_buf *= 4
    else:
        raise NoConvergence(f"stable manifold did not reach Z=0 at k={k}")
    # backward distance grows while r decreases, so dZ/d(distance) = -Z';
    # locate Z = 0 inside the last step by cubic Hermite root finding
    z0, z1 = es[n - 2], es[n - 1]
    tau = _hermite_root(z0, -qs[n - 2], z1, -qs[n - 1], h)
    dist = (n - 2) * h + tau
    m = int(math.floor(dist / h + 1e-9))
    first = dist - m * h
    if first < 1e-9 * h:
        first = h
        m -= 1
    # second pass: the shortened first step puts Z = 0 exactly on a node
    es = np.empty(m + 2)
    qs = np.empty(m + 2)
    _manifold_backward(k, a, b, d, h, eta0, first, es, qs)
    # index 0 is the manifold start (off-grid by `first`); drop it
    Z = es[1:][::-1].copy()
    P = qs[1:][::-1].copy()
    eta = cap - Z
    Z[0] = 0.0
    if plateau_tol is not None:
        reached = np.flatnonzero(eta <= 0.1 * plateau_tol * cap)
        j = int(reached[0]) if reached.size else eta.shape[0] - 1
        if j * h > r_max:
            r_max = (j + int(math.ceil(5.0 * L / h))) * h
    n_grid = int(round(r_max / h))
    r = np.arange(n_grid + 1) * h
    if Z.shape[0] >= n_grid + 1:
        Z, P = Z[: n_grid + 1], P[: n_grid + 1]
    else:
        j0 = Z.shape[0] - 1
        extra = r[j0 + 1:] - r[j0]
        tail = eta[j0] * np.exp(nu * extra)
        Z = np.concatenate([Z, cap - tail])
        P = np.concatenate([P, -nu * tail])
    return r, Z, P


def _hermite_root(z0, dz0, z1, dz1, h):
    """Root in (0, h] of the cubic Hermite through (0,z0,dz0), (h,z1,dz1)."""
    lo, hi = 0.0, h
    def f(t):
        s = t / h
        h00 = 2 * s ** 3 - 3 * s ** 2 + 1
        h10 = s ** 3 - 2 * s ** 2 + s
        h01 = -2 * s ** 3 + 3 * s ** 2
        h11 = s ** 3 - s ** 2
        return h00 * z0 + h10 * h * dz0 + h01 * z1 + h11 * h * dz1
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def solve_profile(params: ModelParams, k: float,
                  opts: ShootingOptions = DEFAULT_OPTIONS) -> SemiWaveProfile:
    """Semi-wave at speed ``k`` with its shooting slope and a tabulated profile."""
    validate(params)
    _check_speed(params, float(k))
    slope, _ = shooting_slope(params, float(k), opts)
    h = opts.step(params)
    r, Z, P = _tabulate_manifold(params, float(k), h, opts.radius(params),
                                 plateau_tol=opts.tol_plateau if opts.r_max is None else None)
    cap = params.capacity
    if Z[-1] < (1.0 - opts.tol_plateau) * cap:
        raise NoConvergence(f"profile at k={k} reaches only {Z[-1]!r} < (1 - tol_plateau) a/b "
                            f"by r_max={r[-1]!r}")
    return SemiWaveProfile(k=float(k), slope0=slope, r=r, Z=Z, dZ=P, r_max=float(r[-1]),
                           params=params, manifold_slope=float(P[0]))


# --------------------------------------------------------------------------
# spreading speed
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SpeedResult:
    c_star: float
    residual: float
    iterations: int
    slope0: float = float("nan")


def compute_cstar(params: ModelParams, opts: ShootingOptions = DEFAULT_OPTIONS) -> SpeedResult:
    """Spreading speed: the root of ``mu * Z_k'(0) = k`` on ``(0, 2 sqrt(a d))``."""
    validate(params)
    mu, cmax = params.mu, params.c_max
    # slope errors are amplified by mu in F; tighten so F is resolved to tol_speed
    tol_s = min(opts.tol_slope, opts.tol_speed / (10.0 * mu))

    def slope(k, bracket=None):
        return shooting_slope(params, k, opts, bracket=bracket, tol=tol_s)[0]

    k_lo, k_hi = 1e-6 * cmax, (1.0 - 1e-6) * cmax
    s_lo, s_hi = slope(k_lo), slope(k_hi)
    f_lo, f_hi = mu * s_lo - k_lo, mu * s_hi - k_hi
    for _ in range(60):
        if f_lo > 0:
            break
        k_lo *= 0.01
        s_lo = slope(k_lo)
        f_lo = mu * s_lo - k_lo
    else:
        raise NoConvergence("F(k) not positive near k=0")
    if f_hi >= 0:
        raise NoConvergence("F(k) not negative near k=2*sqrt(a*d)")

    it = 0
    pad = 4.0 * tol_s
    while k_hi - k_lo > opts.tol_speed:
        if it >= opts.max_iter:
            raise NoConvergence(f"speed bisection did not converge in {it} iterations")
        k = 0.5 * (k_lo + k_hi)
        s = slope(k, bracket=(s_hi - pad, s_lo + pad))
        f = mu * s - k
        it += 1
        if f > 0:
            k_lo, s_lo, f_lo = k, s, f
        elif f < 0:
            k_hi, s_hi, f_hi = k, s, f
        else:
            k_lo = k_hi = k
            f_lo = f_hi = 0.0
            break
    if f_lo == f_hi:
        c = 0.5 * (k_lo + k_hi)
    else:
        # final regula-falsi estimate inside the converged bracket
        c = k_lo + f_lo * (k_hi - k_lo) / (f_lo - f_hi)
    s_c = slope(c, bracket=(s_hi - pad, s_lo + pad))
    return SpeedResult(c_star=c, residual=abs(mu * s_c - c), iterations=it, slope0=s_c)


def perturbed_speeds(params: ModelParams, delta: float,
                     opts: ShootingOptions = DEFAULT_OPTIONS) -> tuple[float, float]:
    """``(c*(mu, a-δ, b+δ, d), c*(mu, a+δ, b-δ, d))``."""
    validate(params)
    if delta < 0 or params.a - delta <= 0 or params.b - delta <= 0:
        raise DeltaTooLarge(f"delta={delta!r} must satisfy 0 <= delta < min(a, b)")
    minus = compute_cstar(params.with_(a=params.a - delta, b=params.b + delta), opts).c_star
    plus = compute_cstar(params.with_(a=params.a + delta, b=params.b - delta), opts).c_star
    return minus, plus
