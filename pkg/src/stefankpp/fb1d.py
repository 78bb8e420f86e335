"""Front-fixing solver for the one-dimensional free boundary problem.

The occupied domain lies on one side of the front ``rho(t)``. With
``orientation`` the direction in which the front moves (-1: front moves
left, domain to its right; +1: front moves right, domain to its left) the
solver works in the distance-into-the-domain coordinate

    xi = -orientation * (y - rho(t)) in [0, L],

so both cases share one kernel. In that frame

    W_t = d W_xixi - mu W_xi(0) W_xi + g(W),    W(t, 0) = 0,
    rho'(t) = orientation * mu * W_xi(t, 0),

with homogeneous Neumann closure at ``xi = L``. Time stepping is explicit
Euler with centered differences, which is monotone whenever
``dt <= h^2 / (2d)`` and the cell Peclet number ``mu W_xi(0) h / d`` is at most 2.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence, Union

import numpy as np
from numba import njit

from .errors import BadInitialData, CFLViolation, ConfigError, WindowTooShort
from .model import ModelParams, Reaction, logistic_reaction, validate

CFL_FACTOR = 0.25
ADVECTION_LIMIT = 0.5

_ORIENTATIONS = {"eqlow": -1, "left": -1, "c2eqlow": 1, "right": 1}


def _orientation(value) -> int:
    if isinstance(value, str):
        try:
            return _ORIENTATIONS[value.lower()]
        except KeyError:
            raise ConfigError(f"unknown orientation {value!r}") from None
    if value not in (-1, 1):
        raise ConfigError(f"orientation must be -1 or +1, got {value!r}")
    return int(value)


@dataclass
class Front1DState:
    t: float
    rho: float
    values: np.ndarray
    h: float
    orientation: int
    params: ModelParams
    reaction: Optional[Reaction] = None

    @property
    def xi(self) -> np.ndarray:
        return np.arange(self.values.shape[0]) * self.h

    @property
    def L(self) -> float:
        return (self.values.shape[0] - 1) * self.h

    def boundary_gradient(self) -> float:
        w = self.values
        return (-3.0 * w[0] + 4.0 * w[1] - w[2]) / (2.0 * self.h)

    def front_speed(self) -> float:
        return self.orientation * self.params.mu * self.boundary_gradient()

    def physical_positions(self) -> np.ndarray:
        """``y`` coordinates of the grid nodes."""
        return self.rho - self.orientation * self.xi

    def copy(self) -> "Front1DState":
        return Front1DState(self.t, self.rho, self.values.copy(), self.h, self.orientation,
                            self.params, self.reaction)


@dataclass
class FrontTrajectory:
    times: np.ndarray
    rho_values: np.ndarray
    xi: np.ndarray
    snapshots: dict = field(default_factory=dict)
    orientation: int = -1

    def to_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", encoding="utf-8") as fh:
            fh.write("t,rho\n")
            for t, r in zip(self.times, self.rho_values):
                fh.write(f"{t:.17g},{r:.17g}\n")
        return path


def init_front1d(params: ModelParams, w0: Union[Callable, np.ndarray], orientation=-1,
                 L: Optional[float] = None, h: Optional[float] = None,
                 rho0: Optional[float] = None, reaction: Optional[Reaction] = None,
                 check_length: bool = True) -> Front1DState:
    """Sample ``w0`` on ``xi = 0, h, ..., L`` and build the t=0 state.

    ``rho0`` defaults to 0 for a left-moving front and 1 for a right-moving one.
    """
    validate(params)
    orient = _orientation(orientation)
    ell = params.length_scale
    L = 60.0 * ell if L is None else float(L)
    h = 0.02 * ell if h is None else float(h)
    if check_length and L < 40.0 * ell * (1 - 1e-12):
        raise ConfigError(f"L={L} shorter than 40*sqrt(d/a)={40 * ell}")
    n = L / h
    if abs(n - round(n)) > 1e-9 * max(1.0, n):
        raise ConfigError(f"h={h} does not divide L={L}")
    n = int(round(n))
    xi = np.arange(n + 1) * h
    values = np.asarray(w0(xi) if callable(w0) else w0, dtype=float).copy()
    if values.shape != xi.shape:
        raise BadInitialData(f"initial profile has {values.shape} samples, grid has {xi.shape}")
    if not np.all(np.isfinite(values)):
        raise BadInitialData("initial profile is not finite")
    if values[0] != 0.0:
        raise BadInitialData(f"w0(0) must be 0, got {values[0]!r}")
    if np.any(values < 0):
        raise BadInitialData("initial profile has negative values")
    if rho0 is None:
        rho0 = 0.0 if orient < 0 else 1.0
    return Front1DState(0.0, float(rho0), values, h, orient, params, reaction)


def stable_dt(params: ModelParams, h: float) -> float:
    return CFL_FACTOR * h * h / params.d


@njit(cache=True)
def _advance_logistic(w, n_steps, dt, h, d, mu, a, b, orient, rho):
    n = w.shape[0]
    new = np.empty_like(w)
    inv_h2 = 1.0 / (h * h)
    inv_2h = 1.0 / (2.0 * h)
    for _ in range(n_steps):
        q = (-3.0 * w[0] + 4.0 * w[1] - w[2]) * inv_2h
        if dt * mu * abs(q) / h > 0.5:
            return rho, False
        adv = mu * q
        new[0] = 0.0
        for j in range(1, n - 1):
            lap = (w[j + 1] - 2.0 * w[j] + w[j - 1]) * inv_h2
            grad = (w[j + 1] - w[j - 1]) * inv_2h
            u = w[j]
            new[j] = u + dt * (d * lap - adv * grad + a * u - b * u * u)
        u = w[n - 1]
        new[n - 1] = u + dt * (2.0 * d * (w[n - 2] - u) * inv_h2 + a * u - b * u * u)
        rho += dt * orient * adv
        for j in range(n):
            w[j] = new[j]
    return rho, True


def _advance_generic(state: Front1DState, n_steps: int, dt: float, reaction: Reaction) -> None:
    w, h, prm = state.values, state.h, state.params
    for _ in range(n_steps):
        q = (-3.0 * w[0] + 4.0 * w[1] - w[2]) / (2.0 * h)
        if dt * prm.mu * abs(q) / h > ADVECTION_LIMIT:
            raise CFLViolation(f"advection number {dt * prm.mu * abs(q) / h:.3g} > {ADVECTION_LIMIT}")
        ext = np.concatenate([w, w[-2:-1]])
        lap = np.empty_like(w)
        grad = np.zeros_like(w)
        lap[1:] = (ext[2:] - 2.0 * ext[1:-1] + ext[:-2]) / (h * h)
        grad[1:-1] = (w[2:] - w[:-2]) / (2.0 * h)
        g = reaction(state.physical_positions(), w)
        new = w + dt * (prm.d * lap - prm.mu * q * grad + g)
        new[0] = 0.0
        w[:] = new
        state.rho += dt * state.orientation * prm.mu * q


def _check_dt(state: Front1DState, dt: float) -> None:
    h, d = state.h, state.params.d
    if dt <= 0 or dt > 0.5 * h * h / d * (1 + 1e-12):
        raise CFLViolation(f"dt={dt} violates dt <= h^2/(2d) = {0.5 * h * h / d}")
    adv = dt * abs(state.front_speed()) / h
    if adv > ADVECTION_LIMIT:
        raise CFLViolation(f"advection number {adv:.3g} > {ADVECTION_LIMIT}")


def _advance(state: Front1DState, n_steps: int, dt: float) -> None:
    reaction = state.reaction or logistic_reaction(state.params)
    if reaction.logistic is not None:
        a, b = reaction.logistic
        prm = state.params
        rho, ok = _advance_logistic(state.values, n_steps, dt, state.h, prm.d, prm.mu,
                                    float(a), float(b), float(state.orientation), state.rho)
        state.rho = rho
        if not ok:
            raise CFLViolation("front advection number exceeded 0.5 during the run")
    else:
        _advance_generic(state, n_steps, dt, reaction)
    state.t += n_steps * dt


def step_front1d(state: Front1DState, dt: Optional[float] = None) -> Front1DState:
    """One explicit step; returns a new state and leaves ``state`` untouched."""
    dt = stable_dt(state.params, state.h) if dt is None else float(dt)
    _check_dt(state, dt)
    new = state.copy()
    _advance(new, 1, dt)
    return new


def advance_to(state: Front1DState, t_end: float, dt_max: Optional[float] = None) -> Front1DState:
    """Advance ``state`` in place to exactly ``t_end`` with equal sub-steps."""
    dt_max = stable_dt(state.params, state.h) if dt_max is None else dt_max
    span = t_end - state.t
    if span <= 0:
        return state
    n = int(math.ceil(span / dt_max - 1e-9))
    dt = span / n
    _check_dt(state, dt)
    _advance(state, n, dt)
    state.t = t_end
    return state


@dataclass
class Front1DConfig:
    params: ModelParams = field(default_factory=ModelParams)
    w0: Optional[Callable] = None
    orientation: object = -1
    L: Optional[float] = None
    h: Optional[float] = None
    T: float = 100.0
    output_dt: float = 0.5
    snapshot_times: Sequence[float] = ()
    rho0: Optional[float] = None
    reaction: Optional[Reaction] = None
    dt: Optional[float] = None


def default_initial_profile(params: ModelParams, sigma0: float = 0.5) -> Callable:
    """``sigma0 * (1 - exp(-xi / sqrt(d/a)))``: zero at the front, increasing."""
    ell = params.length_scale
    return lambda xi: sigma0 * (1.0 - np.exp(-np.asarray(xi) / ell))


def run_front1d(config: Front1DConfig) -> FrontTrajectory:
    prm = config.params
    w0 = config.w0 or default_initial_profile(prm)
    state = init_front1d(prm, w0, config.orientation, config.L, config.h, config.rho0,
                         config.reaction)
    n_out = int(round(config.T / config.output_dt))
    out_times = np.linspace(0.0, config.T, n_out + 1)
    marks = sorted(set(np.round(out_times, 12)) | {round(float(s), 12) for s in config.snapshot_times})
    snap_keys = {round(float(s), 12) for s in config.snapshot_times}
    times, rhos, snaps = [], [], {}
    for t_mark in marks:
        advance_to(state, t_mark, config.dt)
        if any(abs(t_mark - o) < 1e-9 for o in out_times):
            times.append(state.t)
            rhos.append(state.rho)
        if t_mark in snap_keys:
            snaps[t_mark] = state.values.copy()
    traj = FrontTrajectory(np.array(times), np.array(rhos), state.xi, snaps, state.orientation)
    traj.final_state = state
    return traj


def estimate_speed(trajectory: FrontTrajectory, window: tuple[float, float]) -> tuple[float, float, float]:
    """Least-squares fit ``rho ~ slope*t + intercept`` over ``window``."""
    t = np.asarray(trajectory.times)
    r = np.asarray(trajectory.rho_values)
    sel = (t >= window[0] - 1e-12) & (t <= window[1] + 1e-12)
    if sel.sum() < 10:
        raise WindowTooShort(f"window {window} holds {int(sel.sum())} samples, need >= 10")
    A = np.vstack([t[sel], np.ones(sel.sum())]).T
    (slope, intercept), *_ = np.linalg.lstsq(A, r[sel], rcond=None)
    rms = float(np.sqrt(np.mean((A @ np.array([slope, intercept]) - r[sel]) ** 2)))
    return float(slope), float(intercept), rms


def write_snapshot_csv(path, xi: np.ndarray, w: np.ndarray, t: float, rho: float) -> Path:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        fh.write(f"# t={t!r} rho={rho!r}\n")
        fh.write("xi,w\n")
        for x, v in zip(xi, w):
            fh.write(f"{x:.17g},{v:.17g}\n")
    return path


def read_trajectory_csv(path) -> FrontTrajectory:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return FrontTrajectory(data[:, 0], data[:, 1], np.empty(0))
