"""Radially symmetric free boundary solvers.

Interior (expanding ball ``0 <= r < k(t)``) uses the dilation ``xi = r/k(t)``:

    V_t = d/k^2 (V_xixi + (N-1)/xi V_xi) + xi (k'/k) V_xi + g(V),
    V_xi(t, 0) = 0,  V(t, 1) = 0,  k' = -mu V_xi(t, 1) / k.

At ``xi = 0`` the Laplacian is replaced by its limit ``N V_xixi``. Whenever
the physical spacing ``k * dxi`` exceeds ``h_max`` the grid is refined by
inserting midpoints, so the resolution stays bounded as the ball grows.

Exterior (shrinking hole, ``r > h(t)``) uses the translation ``xi = r - h(t)``:

    V_t = d V_xixi + d (N-1)/(xi + h) V_xi + h' V_xi + g(V),
    V(t, 0) = 0,  h' = -mu V_xi(t, 0),

truncated at ``xi = L`` with a homogeneous Neumann condition.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from numba import njit
from scipy.interpolate import CubicSpline

from .errors import BadInitialData, CFLViolation, ConfigError, FrontCollapse, HoleClosed
from .model import ModelParams, Reaction, logistic_reaction, validate

CFL_FACTOR = 0.25
J01 = 2.404825557695773  # first zero of the Bessel function J_0


def first_eigenvalue(N: int) -> float:
    """First Dirichlet eigenvalue of the Laplacian on the unit ball (N = 2, 3)."""
    if N == 2:
        return J01 * J01
    if N == 3:
        return math.pi ** 2
    raise ConfigError(f"first eigenvalue only provided for N=2,3, got N={N}")


def critical_radius(params: ModelParams, N: int) -> float:
    return math.sqrt(params.d * first_eigenvalue(N) / params.a)


@dataclass
class RadialState:
    t: float
    front: float
    values: np.ndarray
    mode: str  # "interior" | "exterior"
    N: int

    @property
    def n(self) -> int:
        return self.values.shape[0] - 1


@dataclass
class RadialTrajectory:
    times: np.ndarray
    fronts: np.ndarray
    mode: str
    N: int
    final: Optional[RadialState] = None
    max_abs_speed: float = 0.0
    sup_values: np.ndarray = field(default_factory=lambda: np.empty(0))

    def to_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", encoding="utf-8") as fh:
            fh.write("t,front\n")
            for t, f in zip(self.times, self.fronts):
                fh.write(f"{t:.17g},{f:.17g}\n")
        return path


@dataclass
class RadialGrid:
    h: Optional[float] = None      # initial physical spacing, default 0.02*sqrt(d/a)
    h_max: Optional[float] = None  # interior remesh threshold, default 2*h
    L: Optional[float] = None      # exterior truncation, default 60*sqrt(d/a)
    output_dt: float = 0.5
    cfl: float = CFL_FACTOR

    def resolved(self, params: ModelParams) -> "RadialGrid":
        ell = params.length_scale
        h = 0.02 * ell if self.h is None else self.h
        return RadialGrid(h, 2.0 * h if self.h_max is None else self.h_max,
                          60.0 * ell if self.L is None else self.L, self.output_dt, self.cfl)


def _logistic_coeffs(params: ModelParams, reaction: Optional[Reaction]) -> tuple[float, float]:
    reaction = reaction or logistic_reaction(params)
    if reaction.logistic is None:
        raise ConfigError("radial solvers support the logistic (or zero) reaction only")
    return float(reaction.logistic[0]), float(reaction.logistic[1])


# --------------------------------------------------------------------------
# interior
# --------------------------------------------------------------------------

@njit(cache=True)
def _interior_kernel(v, k, t, t_end, d, mu, a, b, N, cfl, h_max):
    """Advance until ``t_end`` or until ``k*dxi > h_max``; returns (k, t, max|k'|, status).

    status 0: reached t_end, 1: remesh needed, 2: CFL / advection breach.
    """
    n = v.shape[0] - 1
    dxi = 1.0 / n
    new = np.empty_like(v)
    vmax_kp = 0.0
    while t < t_end - 1e-14:
        if k * dxi > h_max:
            return k, t, vmax_kp, 1
        hp = k * dxi
        dt = cfl * hp * hp / (N * d)
        if t + dt > t_end:
            dt = t_end - t
        grad_front = (3.0 * v[n] - 4.0 * v[n - 1] + v[n - 2]) / (2.0 * dxi)
        kp = -mu * grad_front / k
        if kp > vmax_kp:
            vmax_kp = kp
        if dt * abs(kp) / hp > 0.5:
            return k, t, vmax_kp, 2
        coef = d / (k * k)
        new[0] = v[0] + dt * (coef * N * 2.0 * (v[1] - v[0]) / (dxi * dxi)
                              + a * v[0] - b * v[0] * v[0])
        for j in range(1, n):
            xi = j * dxi
            lap = (v[j + 1] - 2.0 * v[j] + v[j - 1]) / (dxi * dxi)
            grad = (v[j + 1] - v[j - 1]) / (2.0 * dxi)
            u = v[j]
            new[j] = u + dt * (coef * (lap + (N - 1) / xi * grad) + xi * (kp / k) * grad
                               + a * u - b * u * u)
        new[n] = 0.0
        for j in range(n + 1):
            v[j] = new[j]
        k += dt * kp
        t += dt
    return k, t, vmax_kp, 0


def _refine(v: np.ndarray) -> np.ndarray:
    n = v.shape[0] - 1
    xi = np.linspace(0.0, 1.0, n + 1)
    spline = CubicSpline(xi, v, bc_type=((1, 0.0), "not-a-knot"))
    fine = spline(np.linspace(0.0, 1.0, 2 * n + 1))
    fine[-1] = 0.0
    return np.maximum(fine, 0.0)


def default_interior_data(params: ModelParams, r0: float, amplitude: Optional[float] = None) -> Callable:
    """``A cos(pi r / (2 r0))``: zero at r0, flat at the origin."""
    A = 0.5 * params.capacity if amplitude is None else amplitude
    return lambda r: A * np.cos(0.5 * math.pi * np.asarray(r) / r0)


def run_interior(params: ModelParams, N: int, r0: float, v0: Optional[Callable] = None,
                 T: float = 100.0, grid: Optional[RadialGrid] = None,
                 reaction: Optional[Reaction] = None) -> RadialTrajectory:
    validate(params)
    if r0 <= 0:
        raise BadInitialData(f"r0 must be positive, got {r0}")
    if N < 2:
        raise ConfigError("interior radial solver needs N >= 2")
    g = (grid or RadialGrid()).resolved(params)
    a, b = _logistic_coeffs(params, reaction)
    v0 = v0 or default_interior_data(params, r0)
    n = max(8, int(math.ceil(r0 / g.h)))
    r = np.linspace(0.0, r0, n + 1)
    v = np.asarray(v0(r), dtype=float).copy()
    if abs(v[-1]) > 1e-12 or np.any(v < 0) or not np.all(np.isfinite(v)):
        raise BadInitialData("interior data must be finite, nonnegative and vanish at r0")
    v[-1] = 0.0
    k, t = float(r0), 0.0
    n_out = int(round(T / g.output_dt))
    times, fronts, sups = [0.0], [k], [float(v.max())]
    max_kp = 0.0
    for i in range(1, n_out + 1):
        t_mark = i * g.output_dt
        while True:
            k, t, kp, status = _interior_kernel(v, k, t, t_mark, params.d, params.mu, a, b,
                                                float(N), g.cfl, g.h_max)
            max_kp = max(max_kp, kp)
            if status == 1:
                v = _refine(v)
                continue
            if status == 2:
                raise CFLViolation(f"front advection number exceeded 0.5 at t={t}")
            break
        if not (math.isfinite(k) and k > 1e-9 * r0):
            raise FrontCollapse(f"front collapsed at t={t}")
        times.append(t)
        fronts.append(k)
        sups.append(float(v.max()))
    return RadialTrajectory(np.array(times), np.array(fronts), "interior", N,
                            RadialState(t, k, v, "interior", N), max_kp, np.array(sups))


# --------------------------------------------------------------------------
# exterior
# --------------------------------------------------------------------------

@njit(cache=True)
def _exterior_kernel(v, h, t, t_end, dx, d, mu, a, b, N, cfl):
    """Returns (h, t, max|h'|, status); status 2 = advection breach, 3 = hole closed."""
    n = v.shape[0] - 1
    new = np.empty_like(v)
    dt0 = cfl * dx * dx / d
    max_hp = 0.0
    while t < t_end - 1e-14:
        dt = dt0
        if t + dt > t_end:
            dt = t_end - t
        q = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * dx)
        hp = -mu * q
        if abs(hp) > max_hp:
            max_hp = abs(hp)
        if dt * abs(hp) / dx > 0.5:
            return h, t, max_hp, 2
        for j in range(1, n):
            lap = (v[j + 1] - 2.0 * v[j] + v[j - 1]) / (dx * dx)
            grad = (v[j + 1] - v[j - 1]) / (2.0 * dx)
            u = v[j]
            new[j] = u + dt * (d * lap + (d * (N - 1) / (j * dx + h) + hp) * grad
                               + a * u - b * u * u)
        u = v[n]
        new[n] = u + dt * (2.0 * d * (v[n - 1] - u) / (dx * dx) + a * u - b * u * u)
        new[0] = 0.0
        for j in range(n + 1):
            v[j] = new[j]
        h += dt * hp
        t += dt
        if h <= 0.0:
            return h, t, max_hp, 3
    return h, t, max_hp, 0


@dataclass(frozen=True)
class ExteriorCertificate:
    R0: float
    T: float
    h_T: float
    bound_ok: bool
    max_abs_hprime: float
    C4: float
    C3: float = float("nan")
    M: float = float("nan")

    @property
    def speed_ok(self) -> bool:
        return self.max_abs_hprime <= self.C4 * 1.05

    def to_text(self) -> str:
        return "\n".join([
            f"R0={self.R0!r}", f"T={self.T!r}", f"hT={self.h_T!r}",
            f"bound_ok={str(self.bound_ok).lower()}", f"C3={self.C3!r}", f"M={self.M!r}",
            f"C4={self.C4!r}", f"max_abs_hprime={self.max_abs_hprime!r}",
        ]) + "\n"


def certificate_constants(params: ModelParams, N: int, T: float, C1: float, C2: float,
                          K: Optional[float] = None) -> tuple[float, float, float]:
    """``(C3, M, C4)`` of the a-priori front speed bound."""
    K = params.K if K is None else K
    C3 = C1 * math.exp(K * T)
    M = max((N - 1) + math.sqrt(K / (2.0 * params.d) + (N - 1) ** 2), 2.0 * C2 / C3)
    return C3, M, 2.0 * M * C3 * params.mu


def default_exterior_data(params: ModelParams, amplitude: float = 0.5) -> Callable:
    ell = params.length_scale
    return lambda s: amplitude * (1.0 - np.exp(-np.asarray(s) / ell))


def run_exterior(params: ModelParams, N: int, R0: float, v0: Optional[Callable] = None,
                 T: float = 1.0, grid: Optional[RadialGrid] = None, C1: float = 1.0,
                 C2: float = 1.0, reaction: Optional[Reaction] = None):
    """Returns ``(trajectory, certificate)``."""
    validate(params)
    if R0 <= 1:
        raise BadInitialData(f"R0 must exceed 1, got {R0}")
    g = (grid or RadialGrid()).resolved(params)
    a, b = _logistic_coeffs(params, reaction)
    v0 = v0 or default_exterior_data(params)
    n = int(round(g.L / g.h))
    s = np.arange(n + 1) * g.h
    v = np.asarray(v0(s), dtype=float).copy()
    if abs(v[0]) > 1e-12 or np.any(v < 0) or not np.all(np.isfinite(v)):
        raise BadInitialData("exterior data must be finite, nonnegative and vanish at the hole")
    if v.max() > C1 * (1 + 1e-12):
        raise BadInitialData(f"sup v0 = {v.max()} exceeds the declared C1 = {C1}")
    v[0] = 0.0
    h, t = float(R0), 0.0
    n_out = max(1, int(round(T / g.output_dt)))
    times, fronts, sups = [0.0], [h], [float(v.max())]
    max_hp = 0.0
    for i in range(1, n_out + 1):
        t_mark = T * i / n_out
        h, t, hp, status = _exterior_kernel(v, h, t, t_mark, g.h, params.d, params.mu, a, b,
                                            float(N), g.cfl)
        max_hp = max(max_hp, hp)
        if status == 2:
            raise CFLViolation(f"front advection number exceeded 0.5 at t={t}")
        if status == 3:
            raise HoleClosed(f"hole closed at t={t}")
        times.append(t)
        fronts.append(h)
        sups.append(float(v.max()))
    C3, M, C4 = certificate_constants(params, N, T, C1, C2, K=a)
    cert = ExteriorCertificate(R0=float(R0), T=float(T), h_T=h, bound_ok=h >= R0 / 2.0,
                               max_abs_hprime=max_hp, C4=C4, C3=C3, M=M)
    traj = RadialTrajectory(np.array(times), np.array(fronts), "exterior", N,
                            RadialState(t, h, v, "exterior", N), max_hp, np.array(sups))
    return traj, cert


def empirical_threshold(params: ModelParams, N: int, T: float, candidates, **kw) -> Optional[float]:
    """Smallest ``R0`` among ``candidates`` (ascending) from which every larger
    candidate keeps ``h(T) >= R0/2``; ``None`` if the largest one fails."""
    ok = []
    for R0 in candidates:
        try:
            _, cert = run_exterior(params, N, R0, T=T, **kw)
            ok.append(cert.bound_ok)
        except HoleClosed:
            ok.append(False)
    threshold = None
    for R0, good in zip(reversed(list(candidates)), reversed(ok)):
        if not good:
            break
        threshold = R0
    return threshold
