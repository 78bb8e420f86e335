"""Sampled certification of super/subsolutions and comparison batteries.

The supersolution is the travelling regularised cone

    ū(t, x) = (1-δ)^-2 Z^δ(dist(z, ∂Λ_R)),    z = x - ξ_R(t) e_N,
    ξ_R(t) = ξ₂ - (R + r₂)/sin φ - (1-δ)^-2 (c^δ / sin φ) t,

built from the semi-wave ``Z^δ`` of the parameters ``(a+δ, b-δ)`` at its
own spreading speed ``c^δ``. ``Λ_R`` (points of the cone at distance more
than R from its surface) has a spherical cap (stratum 1, within angle
``φ - π/2`` of e_N) and a conical part (stratum 2). The interior
inequality ``ū_t - dΔū ≥ aū - bū²`` is checked with centred differences at
stratified samples. The free-boundary inequality ``Φ_t ≤ μ∇ū·∇Φ`` is
checked analytically on the boundary.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import enthalpy
from .errors import HypothesisViolated, SpecInvariantViolated
from .fb1d import Front1DConfig, run_front1d
from .model import ModelParams, Reaction, logistic_reaction, validate
from .semiwave import DEFAULT_OPTIONS, SemiWaveProfile, ShootingOptions, compute_cstar, solve_profile

# Centred second differences of a function with bounded fourth derivatives
# carry an error of about (h^2/12) * sum |∂⁴u|. The constant below was fixed by
# measuring max |FD - exact| / h_fd^2 for u = tanh(x1) * tanh(x2) on
# [-4, 4]^2 (0.34, see tests/oracles/fd_calibration.py) and adding a
# safety factor of about 5 for profile amplitudes up to 1.5.
FD_TOL_CONSTANT = 2.0


@dataclass(frozen=True)
class SamplePlan:
    per_stratum: int = 10_000
    h_fd: Optional[float] = None       # default 1e-3 * sqrt(d/a)
    s_max: Optional[float] = None      # largest sampled depth, default 15 * sqrt(d/a)
    seed: int = 12345
    exclusion: float = 5.0             # in units of h_fd
    t: float = 1.0

    def step(self, params: ModelParams) -> float:
        return self.h_fd if self.h_fd is not None else 1e-3 * params.length_scale


@dataclass
class ResidualReport:
    n_samples: int
    min_interior_residual: float
    min_boundary_slack: float
    tolerance: float
    fd_error: float = float("nan")
    extra: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return (self.min_interior_residual >= -self.tolerance
                and self.min_boundary_slack >= -self.tolerance)

    @property
    def near_zero_margin(self) -> bool:
        return self.min_interior_residual < 10.0 * self.tolerance

    def to_text(self) -> str:
        lines = [f"n_samples={self.n_samples}",
                 f"min_interior_residual={self.min_interior_residual!r}",
                 f"min_boundary_slack={self.min_boundary_slack!r}",
                 f"tolerance={self.tolerance!r}", f"fd_error={self.fd_error!r}",
                 f"near_zero_margin={str(self.near_zero_margin).lower()}"]
        lines += [f"{k}={v!r}" for k, v in self.extra.items()]
        lines.append(f"ok={str(self.ok).lower()}")
        return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# supersolution
# --------------------------------------------------------------------------

@dataclass
class SupersolutionSpec:
    params: ModelParams
    delta: float
    R: float
    phi: float = 3 * math.pi / 4
    N: int = 2
    xi2: float = 0.0
    r2: float = 0.0
    profile: Optional[SemiWaveProfile] = None
    c_delta: float = float("nan")

    @property
    def theta(self) -> float:
        return math.pi - self.phi

    @property
    def amplitude(self) -> float:
        return (1.0 - self.delta) ** -2

    def R_min(self) -> float:
        if self.delta == 0:
            return 0.0
        return self.params.d * (self.N - 1) / (self.delta * self.c_delta)

    def xi_R(self, t):
        s = math.sin(self.phi)
        return (self.xi2 - (self.R + self.r2) / s
                - self.amplitude * (self.c_delta / s) * np.asarray(t, dtype=float))

    def xi_R_rate(self) -> float:
        return -self.amplitude * self.c_delta / math.sin(self.phi)


def make_supersolution(params: ModelParams, delta: float, R: Optional[float] = None,
                       phi: float = 3 * math.pi / 4, N: int = 2, R_factor: float = 2.0,
                       xi2: float = 0.0, r2: float = 0.0,
                       opts: ShootingOptions = DEFAULT_OPTIONS) -> SupersolutionSpec:
    """Tabulate ``Z^δ`` at ``c^δ`` and fix ``R`` (default ``R_factor`` times the minimum)."""
    validate(params)
    if not (math.pi / 2 < phi < math.pi):
        raise SpecInvariantViolated(f"the cone supersolution needs pi/2 < phi < pi, got {phi}")
    if delta < 0 or delta >= min(params.a, params.b):
        raise SpecInvariantViolated(f"delta={delta} outside [0, min(a, b))")
    up = params.with_(a=params.a + delta, b=params.b - delta)
    c_up = compute_cstar(up, opts).c_star
    spec = SupersolutionSpec(params, delta, 0.0, phi, N, xi2, r2, solve_profile(up, c_up, opts), c_up)
    spec.R = R_factor * spec.R_min() if R is None else float(R)
    if spec.R <= 0:
        spec.R = 10.0 * params.length_scale
    _check_spec(spec)
    return spec


def _check_spec(spec: SupersolutionSpec) -> None:
    if spec.delta > 0 and spec.R < spec.R_min() * (1 - 1e-12):
        raise SpecInvariantViolated(
            f"R={spec.R!r} below d(N-1)/(delta c^delta) = {spec.R_min()!r}")


def _axial(x: np.ndarray):
    rho = np.sqrt(np.sum(x[..., :-1] ** 2, axis=-1))
    return rho, x[..., -1]


def _regularised_distance(spec: SupersolutionSpec, z: np.ndarray):
    """Signed depth inside ``Λ_R`` (negative outside) and the stratum (1 or 2)."""
    rho, zn = _axial(z)
    th = spec.theta
    r = np.hypot(rho, zn)
    # stratum 1: angle from e_N below phi - pi/2, i.e. zn * cos(th) > rho * sin(th)
    s1 = zn * math.cos(th) > rho * math.sin(th)
    dist = np.where(s1, r - spec.R, rho * math.cos(th) + zn * math.sin(th) - spec.R)
    return dist, np.where(s1, 1, 2)


def eval_supersolution(spec: SupersolutionSpec, t, x) -> np.ndarray:
    """``ū_R(t, x)``; zero outside the moving regularised cone."""
    x = np.asarray(x, dtype=float)
    z = x.copy()
    z[..., -1] = z[..., -1] - spec.xi_R(t)
    dist, _ = _regularised_distance(spec, z)
    inside = dist > 0
    out = np.zeros(dist.shape)
    if np.any(inside):
        out[inside] = spec.amplitude * spec.profile.evaluate(dist[inside])
    return out


def _embed(rho: np.ndarray, zn: np.ndarray, N: int, rng) -> np.ndarray:
    if N == 2:
        sign = np.where(rng.random(rho.shape) < 0.5, -1.0, 1.0)
        return np.column_stack([sign * rho, zn])
    v = rng.normal(size=(rho.shape[0], N - 1))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return np.column_stack([v * rho[:, None], zn])


def sample_strata(spec: SupersolutionSpec, plan: SamplePlan) -> tuple[np.ndarray, np.ndarray]:
    """Travelling-frame points ``z`` in both strata, clear of the seam and of ∂Λ_R."""
    rng = np.random.default_rng(plan.seed)
    h = plan.step(spec.params)
    gap = plan.exclusion * h
    s_max = plan.s_max if plan.s_max is not None else 15.0 * spec.params.length_scale
    s_max = min(s_max, spec.profile.r_max - 10 * gap)
    th, R, n = spec.theta, spec.R, plan.per_stratum
    # stratum 1: polar coordinates around the origin, angle from e_N in [0, pi/2 - th)
    depth = rng.uniform(gap, s_max, n)
    r = R + depth
    max_ang = math.pi / 2 - th
    ang = rng.uniform(0.0, max_ang, n)
    ang = np.minimum(ang, max_ang - np.arcsin(np.minimum(gap / r, 1.0)))
    z1 = _embed(r * np.sin(ang), r * np.cos(ang), spec.N, rng)
    # stratum 2: tangential offset tau along the conical boundary from the seam
    depth2 = rng.uniform(gap, s_max, n)
    tau = R / math.tan(th) + rng.uniform(gap, gap + 4.0 * s_max, n)
    rho2 = tau * math.sin(th) + depth2 * math.cos(th)
    zn2 = R / math.sin(th) - tau * math.cos(th) + depth2 * math.sin(th)
    z2 = _embed(rho2, zn2, spec.N, rng)
    return np.vstack([z1, z2]), np.concatenate([np.ones(n, int), np.full(n, 2)])


def _analytic_residual(spec: SupersolutionSpec, z: np.ndarray, strata: np.ndarray) -> np.ndarray:
    """``ū_t - dΔū - aū + bū²`` from the profile's own derivatives."""
    prm = spec.params
    A = spec.amplitude
    rho, zn = _axial(z)
    dist, _ = _regularised_distance(spec, z)
    Z, Z1, Z2 = spec.profile.derivatives(dist)
    r = np.hypot(rho, zn)
    speed = -spec.xi_R_rate()  # dz_N/dt
    N = spec.N
    th = spec.theta
    # gradient of dist along e_N, and its Laplacian
    ddist_dzn = np.where(strata == 1, zn / r, math.sin(th))
    lap_dist = np.where(strata == 1, (N - 1) / r,
                        (N - 2) * math.cos(th) / np.where(rho > 0, rho, np.inf))
    u = A * Z
    u_t = A * Z1 * ddist_dzn * speed
    lap = A * (Z2 + Z1 * lap_dist)
    return u_t - prm.d * lap - prm.a * u + prm.b * u * u


def _profile_at_offset(spec: SupersolutionSpec, z: np.ndarray, dist: np.ndarray,
                       strata: np.ndarray, e: np.ndarray) -> np.ndarray:
    """``u_R(z + e)`` for a small offset ``e``, with the stratum of ``z``.

    The depth is formed as ``dist(z) + Δ`` with ``Δ`` computed from ``e``
    directly, so stencil points never round at the magnitude of ``z``.
    """
    rho, zn = _axial(z)
    r = np.hypot(rho, zn)
    th = spec.theta
    if z.shape[1] == 1:
        d_rho = np.zeros(z.shape[0])
    else:
        xp = z[:, :-1]
        ep = e[:-1]
        # |x' + e'| - |x'| without cancellation
        d_rho = (2.0 * xp @ ep + ep @ ep) / (np.sqrt(np.sum((xp + ep) ** 2, axis=1)) + rho)
    en = e[-1]
    # r(z + e) - r(z), same trick
    d_r = (2.0 * (z @ e) + e @ e) / (np.sqrt(np.sum((z + e) ** 2, axis=1)) + r)
    inc = np.where(strata == 1, d_r, d_rho * math.cos(th) + en * math.sin(th))
    depth = dist + inc
    out = np.zeros(depth.shape)
    inside = depth > 0
    if np.any(inside):
        out[inside] = spec.amplitude * spec.profile.evaluate(depth[inside])
    return out


def _fd_residual(spec: SupersolutionSpec, z: np.ndarray, h: float) -> np.ndarray:
    """Centred-difference residual of ``ū`` at ``x = z + ξ_R(t) e_N``.

    The stencil is laid out in the travelling frame: because ``ξ_R`` is affine
    in t, ``ū(t ± k, x) = u_R(z ∓ k ξ_R' e_N)`` exactly. Samples stay at least
    5 h_fd from the seam, so every stencil point shares its centre's stratum.
    """
    prm = spec.params
    n_dim = z.shape[1]
    k = h * h
    dist, strata = _regularised_distance(spec, z)

    def at(e):
        return _profile_at_offset(spec, z, dist, strata, e)

    shift = np.zeros(n_dim)
    shift[-1] = k * spec.xi_R_rate()
    u0 = at(np.zeros(n_dim))
    u_t = (at(-shift) - at(shift)) / (2 * k)
    lap = np.zeros_like(u0)
    for i in range(n_dim):
        e = np.zeros(n_dim)
        e[i] = h
        lap += at(e) - 2 * u0 + at(-e)
    lap /= h * h
    return u_t - prm.d * lap - prm.a * u0 + prm.b * u0 * u0


def boundary_slack(spec: SupersolutionSpec, z_boundary: np.ndarray) -> np.ndarray:
    """``μ∇ū·∇Φ - Φ_t`` at travelling-frame points on ∂Λ_R."""
    A = spec.amplitude
    rho, zn = _axial(z_boundary)
    _, strata = _regularised_distance(spec, z_boundary)
    r = np.hypot(rho, zn)
    slope0 = float(spec.profile.evaluate(np.array([0.0]), 1)[0])
    grad_dot = -A * slope0
    phi_t = np.where(strata == 1, -A * (zn / r) * spec.c_delta / math.sin(spec.theta),
                     -A * spec.c_delta)
    return spec.params.mu * grad_dot - phi_t


def _boundary_points(spec: SupersolutionSpec, n: int, rng, s_max: float) -> np.ndarray:
    th, R = spec.theta, spec.R
    ang = rng.uniform(0.0, math.pi / 2 - th, n)
    z1 = _embed(R * np.sin(ang), R * np.cos(ang), spec.N, rng)
    tau = R / math.tan(th) + rng.uniform(0.0, 4.0 * s_max, n)
    z2 = _embed(tau * math.sin(th), R / math.sin(th) - tau * math.cos(th), spec.N, rng)
    return np.vstack([z1, z2])


def check_supersolution(spec: SupersolutionSpec, plan: SamplePlan = SamplePlan()) -> ResidualReport:
    _check_spec(spec)
    h = plan.step(spec.params)
    z, strata = sample_strata(spec, plan)
    fd = _fd_residual(spec, z, h)
    exact = _analytic_residual(spec, z, strata)
    rng = np.random.default_rng(plan.seed + 1)
    s_max = plan.s_max if plan.s_max is not None else 15.0 * spec.params.length_scale
    slack = boundary_slack(spec, _boundary_points(spec, plan.per_stratum, rng, s_max))
    tol = FD_TOL_CONSTANT * h * h
    return ResidualReport(
        n_samples=int(z.shape[0]), min_interior_residual=float(fd.min()),
        min_boundary_slack=float(slack.min()), tolerance=tol,
        fd_error=float(np.max(np.abs(fd - exact))),
        extra={"min_exact_residual": float(exact.min()), "R": spec.R, "R_min": spec.R_min(),
               "c_delta": spec.c_delta, "delta": spec.delta})


# --------------------------------------------------------------------------
# 1D subsolution
# --------------------------------------------------------------------------

def check_subsolution_1d(params: ModelParams, delta: float, plan: SamplePlan = SamplePlan(),
                         opts: ShootingOptions = DEFAULT_OPTIONS) -> ResidualReport:
    """``w̲ = (1-δ)² Z_δ(y - η(t))``, ``η(t) = -(1-δ)² c_δ t``, on ``y > η(t)``."""
    validate(params)
    if delta < 0 or delta >= min(params.a, params.b):
        raise SpecInvariantViolated(f"delta={delta} outside [0, min(a, b))")
    low = params.with_(a=params.a - delta, b=params.b + delta)
    c_low = compute_cstar(low, opts).c_star
    prof = solve_profile(low, c_low, opts)
    A = (1.0 - delta) ** 2
    h = plan.step(params)
    rng = np.random.default_rng(plan.seed)
    s_max = min(plan.s_max if plan.s_max is not None else 15.0 * params.length_scale,
                prof.r_max - 10 * plan.exclusion * h)
    s = rng.uniform(plan.exclusion * h, s_max, plan.per_stratum)
    t = plan.t

    def eta(tt):
        return -A * c_low * tt

    def w(tt, y):
        r = y - eta(tt)
        out = np.zeros_like(r)
        pos = r > 0
        out[pos] = A * prof.evaluate(r[pos])
        return out

    y = eta(t) + s
    k = h * h
    w0 = w(t, y)
    w_t = (w(t + k, y) - w(t - k, y)) / (2 * k)
    w_yy = (w(t, y + h) - 2 * w0 + w(t, y - h)) / (h * h)
    fd = params.a * w0 - params.b * w0 * w0 - (w_t - params.d * w_yy)
    Z, Z1, Z2 = prof.derivatives(s)
    exact = (params.a * A * Z - params.b * (A * Z) ** 2
             - (A * Z1 * A * c_low - params.d * A * Z2))
    eta_rate = -A * c_low
    w_y0 = A * float(prof.evaluate(np.array([0.0]), 1)[0])
    stefan_gap = abs(eta_rate + params.mu * w_y0)
    w_at_front = float(w(t, np.array([eta(t)]))[0])
    tol = FD_TOL_CONSTANT * h * h
    slack = -stefan_gap  # equality law; reported as a (non-positive) slack
    rep = ResidualReport(
        n_samples=int(s.size), min_interior_residual=float(fd.min()),
        min_boundary_slack=slack, tolerance=tol, fd_error=float(np.max(np.abs(fd - exact))),
        extra={"stefan_law_gap": stefan_gap, "w_at_front": w_at_front, "c_delta": c_low,
               "min_exact_residual": float(exact.min()), "delta": delta})
    if stefan_gap > 1e-6:
        rep.min_boundary_slack = -max(stefan_gap, 2 * tol)
    return rep


# --------------------------------------------------------------------------
# comparison batteries
# --------------------------------------------------------------------------

@dataclass
class OrderingCase:
    name: str
    lower: enthalpy.Scenario
    upper: enthalpy.Scenario


@dataclass
class OrderingResult:
    name: str
    max_violation: float
    n_compared: int


@dataclass
class BatteryReport:
    results: list
    tolerance: float = 1e-8

    @property
    def max_violation(self) -> float:
        return max(r.max_violation for r in self.results)

    @property
    def ok(self) -> bool:
        return self.max_violation <= self.tolerance

    def to_text(self) -> str:
        lines = [f"case.{r.name}.max_violation={r.max_violation!r}" for r in self.results]
        lines += [f"max_violation={self.max_violation!r}", f"tolerance={self.tolerance!r}",
                  f"ok={str(self.ok).lower()}"]
        return "\n".join(lines) + "\n"


def _check_hypotheses(case: OrderingCase) -> None:
    lo, up = case.lower, case.upper
    f_lo, f_up = enthalpy.initial_field(lo), enthalpy.initial_field(up)
    if f_lo.shape != f_up.shape or f_lo.x_lo != f_up.x_lo or f_lo.h != f_up.h:
        raise HypothesisViolated(f"{case.name}: grids differ")
    if np.any(f_lo.u > f_up.u):
        raise HypothesisViolated(f"{case.name}: initial data not ordered")
    if np.any((f_lo.u > 0) & ~(f_up.u > 0)):
        raise HypothesisViolated(f"{case.name}: initial ranges not nested")
    if lo.params.mu > up.params.mu or lo.params.d != up.params.d:
        raise HypothesisViolated(f"{case.name}: need mu <= mu_hat and equal d")
    g_lo = lo.reaction or logistic_reaction(lo.params)
    g_up = up.reaction or logistic_reaction(up.params)
    u = np.linspace(0.0, 2.0 * max(lo.params.capacity, up.params.capacity, float(f_up.u.max())), 201)
    x = np.zeros((u.size, f_lo.dim))
    if np.any(g_lo(x, u) > g_up(x, u) + 1e-15):
        raise HypothesisViolated(f"{case.name}: reactions not ordered")


def run_ordering_case(case: OrderingCase) -> OrderingResult:
    _check_hypotheses(case)
    a = enthalpy.run_scenario(case.lower)
    b = enthalpy.run_scenario(case.upper)
    worst, count = 0.0, 0
    for ua, ub in zip(a.snapshots, b.snapshots):
        worst = max(worst, float(np.max(ua - ub)))
        count += ua.size
    return OrderingResult(case.name, max(worst, 0.0), count)


def default_battery(params: ModelParams = ModelParams(), h: float = 0.25, T: float = 4.0,
                    half_width: float = 10.0) -> list:
    """Six ordered pairs on one 2D grid."""
    box = (-half_width, half_width, -half_width, half_width)
    base = dict(box=box, h=h, T=T, snap_every=T / 16, margin_cells=0, margin_faces=())

    def ball(r, prm=params, profile="plateau", reaction=None):
        return enthalpy.Scenario(params=prm, shape="ball", center=(0.0, 0.0), radius=r,
                                 profile=profile, reaction=reaction, **base)

    def bumped(x, sd):
        return np.minimum(params.capacity, np.maximum(sd, 0.0)) + 0.1 * (sd > 0)

    weaker = Reaction(lambda x, u: params.a * np.asarray(u) - 0.5 * params.b * np.asarray(u) ** 2,
                      params.a, logistic=(params.a, 0.5 * params.b))
    return [
        OrderingCase("identical", ball(3.0), ball(3.0)),
        OrderingCase("data_plus", ball(3.0), ball(3.0, profile=bumped)),
        OrderingCase("mu_double", ball(3.0), ball(3.0, prm=params.with_(mu=2 * params.mu))),
        OrderingCase("range_nested", ball(3.0), ball(4.0)),
        OrderingCase("reaction", ball(3.0), ball(3.0, reaction=weaker)),
        OrderingCase("combined", ball(3.0),
                     ball(4.0, prm=params.with_(mu=2 * params.mu), profile=bumped, reaction=weaker)),
    ]


def comparison_battery(cases: Optional[Sequence[OrderingCase]] = None,
                       tolerance: float = 1e-8) -> BatteryReport:
    cases = default_battery() if cases is None else cases
    return BatteryReport([run_ordering_case(c) for c in cases], tolerance)


@dataclass
class Front1DOrdering:
    rho_violation: float
    value_violation: float
    interpolation_allowance: float


def compare_front1d(lower: Front1DConfig, upper: Front1DConfig,
                    check_times: Sequence[float]) -> Front1DOrdering:
    """Ordering of two left-moving 1D runs with ``w0 <= ŵ0``.

    Expected: ``rho >= rho_hat`` and ``w <= ŵ`` on the common domain. The upper
    profile is read off at the lower grid's physical nodes by linear
    interpolation; its error bound ``h²/8 · max|ŵ''|`` is subtracted.
    """
    lower = Front1DConfig(**{**lower.__dict__, "snapshot_times": tuple(check_times)})
    upper = Front1DConfig(**{**upper.__dict__, "snapshot_times": tuple(check_times)})
    a, b = run_front1d(lower), run_front1d(upper)
    if a.orientation != -1 or b.orientation != -1:
        raise HypothesisViolated("compare_front1d expects left-moving fronts")
    rho_v, val_v, allow_max = 0.0, 0.0, 0.0
    for t in check_times:
        key = round(float(t), 12)
        ia = int(np.argmin(np.abs(a.times - t)))
        ib = int(np.argmin(np.abs(b.times - t)))
        ra, rb = a.rho_values[ia], b.rho_values[ib]
        rho_v = max(rho_v, rb - ra)
        wa, wb = a.snapshots[key], b.snapshots[key]
        y = ra + a.xi  # physical nodes of the lower run
        hb = b.xi[1] - b.xi[0]
        wb_at = np.interp(y - rb, b.xi, wb, left=0.0)
        curv = np.abs(np.diff(wb, 2)) / hb ** 2
        allow = hb * hb / 8.0 * (float(curv.max()) if curv.size else 0.0)
        allow_max = max(allow_max, allow)
        val_v = max(val_v, float(np.max(wa - wb_at)) - allow)
    return Front1DOrdering(max(rho_v, 0.0), max(val_v, 0.0), allow_max)
