"""Enthalpy solver for the Stefan problem with logistic growth in 1D and 2D.

The unknown is the enthalpy ``e = α(u)``, where ``α(w) = w`` for ``w > 0``
and ``α(w) = w - d/μ`` for ``w <= 0``. Every cell updates as

    e <- e + dt * (d Δ_h u + g(x, u)),    u <- β(e),

on a cell-centred grid with a 3-point (1D) or 5-point (2D) Laplacian and
reflecting (Neumann) box faces. The free boundary is never tracked: a cell
joins the positive set once it has absorbed the latent heat ``d/μ``. With
``m > 0`` the jump of α is replaced by a linear ramp of width ``1/m``.

Grids are stored row-major as ``u[iy, ix]``; cell ``(iy, ix)`` is centred at
``(x_lo + (ix + 1/2) h, y_lo + (iy + 1/2) h)``.
"""
from __future__ import annotations

import ast
import math
import operator
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
from numba import njit
from skimage.measure import find_contours

from .errors import (CFLViolation, ConfigError, MarginViolated, NoInterface,
                     SpecInvariantViolated)
from .geometry import ConeSpec, signed_distance_cone
from .model import ModelParams, Reaction, logistic_reaction, validate

CFL_FACTOR = 0.25
FACES = ("x_lo", "x_hi", "y_lo", "y_hi")


# --------------------------------------------------------------------------
# α and β
# --------------------------------------------------------------------------

def alpha(w, m: float = 0, params: ModelParams = ModelParams(), latent: Optional[float] = None):
    """Enthalpy of the value ``w``; ``m > 0`` selects the ramp-smoothed α_m."""
    L = params.latent_heat if latent is None else latent
    w = np.asarray(w, dtype=float)
    if m == 0:
        out = np.where(w > 0, w, w - L)
    else:
        chi = np.clip(1.0 - m * w, 0.0, 1.0)
        out = w - L * chi
    return out[()] if out.ndim == 0 else out


def beta(e, params: ModelParams = ModelParams(), m: float = 0, latent: Optional[float] = None):
    """Inverse of α (α_m when ``m > 0``). The closed mushy interval maps to 0."""
    L = params.latent_heat if latent is None else latent
    e = np.asarray(e, dtype=float)
    if m == 0:
        out = np.where(e > 0, e, np.where(e >= -L, 0.0, e + L))
    else:
        out = np.where(e >= 1.0 / m, e, np.where(e > -L, (e + L) / (1.0 + L * m), e + L))
    return out[()] if out.ndim == 0 else out


@njit(cache=True, inline="always")
def _beta(e, L, m):
    if m == 0.0:
        if e > 0.0:
            return e
        if e >= -L:
            return 0.0
        return e + L
    if e >= 1.0 / m:
        return e
    if e > -L:
        return (e + L) / (1.0 + L * m)
    return e + L


# --------------------------------------------------------------------------
# compiled steppers (logistic reaction)
# --------------------------------------------------------------------------

@njit(cache=True)
def _run1d(e, u, n_steps, dt, h, d, a, b, L, m):
    n = e.shape[0]
    c = dt * d / (h * h)
    src = u
    dst = np.empty_like(u)
    refrozen = 0
    for _ in range(n_steps):
        for i in range(n):
            im = i - 1 if i > 0 else 0
            ip = i + 1 if i < n - 1 else n - 1
            uc = src[i]
            en = e[i] + c * (src[im] + src[ip] - 2.0 * uc) + dt * (a * uc - b * uc * uc)
            e[i] = en
            un = _beta(en, L, m)
            if uc > 0.0 and un <= 0.0:
                refrozen += 1
            dst[i] = un
        src, dst = dst, src
    if n_steps % 2 == 1:
        u[:] = src
    return refrozen


@njit(cache=True)
def _run2d(e, u, n_steps, dt, h, d, a, b, L, m):
    ny, nx = e.shape
    c = dt * d / (h * h)
    src = u
    dst = np.empty_like(u)
    refrozen = 0
    for _ in range(n_steps):
        for i in range(ny):
            im = i - 1 if i > 0 else 0
            ip = i + 1 if i < ny - 1 else ny - 1
            for j in range(nx):
                jm = j - 1 if j > 0 else 0
                jp = j + 1 if j < nx - 1 else nx - 1
                uc = src[i, j]
                lap = src[im, j] + src[ip, j] + src[i, jm] + src[i, jp] - 4.0 * uc
                en = e[i, j] + c * lap + dt * (a * uc - b * uc * uc)
                e[i, j] = en
                un = _beta(en, L, m)
                if uc > 0.0 and un <= 0.0:
                    refrozen += 1
                dst[i, j] = un
        src, dst = dst, src
    if n_steps % 2 == 1:
        u[:, :] = src
    return refrozen


def _laplacian_neumann(u: np.ndarray, h: float) -> np.ndarray:
    p = np.pad(u, 1, mode="edge")
    if u.ndim == 1:
        return (p[2:] + p[:-2] - 2.0 * u) / (h * h)
    return (p[2:, 1:-1] + p[:-2, 1:-1] + p[1:-1, 2:] + p[1:-1, :-2] - 4.0 * u) / (h * h)


# --------------------------------------------------------------------------
# field
# --------------------------------------------------------------------------

@dataclass
class EnthalpyField:
    e: np.ndarray
    x_lo: tuple
    h: float
    t: float
    params: ModelParams
    m: float = 0
    latent: Optional[float] = None  # None -> d/mu; 0 for the Cauchy problem
    u: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.e = np.ascontiguousarray(self.e, dtype=float)
        self.x_lo = tuple(float(v) for v in np.atleast_1d(self.x_lo))
        if len(self.x_lo) != self.dim:
            raise ConfigError(f"x_lo has {len(self.x_lo)} entries for a {self.dim}D grid")
        if self.u is None:
            self.u = np.ascontiguousarray(beta(self.e, self.params, self.m, self.L))

    @property
    def L(self) -> float:
        return self.params.latent_heat if self.latent is None else self.latent

    @property
    def dim(self) -> int:
        return self.e.ndim

    @property
    def shape(self) -> tuple:
        return self.e.shape

    @property
    def extent(self) -> tuple:
        """``(x_lo, x_hi)`` for 1D, ``(x_lo, x_hi, y_lo, y_hi)`` for 2D."""
        if self.dim == 1:
            return (self.x_lo[0], self.x_lo[0] + self.shape[0] * self.h)
        ny, nx = self.shape
        return (self.x_lo[0], self.x_lo[0] + nx * self.h, self.x_lo[1], self.x_lo[1] + ny * self.h)

    def axes(self) -> list:
        if self.dim == 1:
            return [self.x_lo[0] + (np.arange(self.shape[0]) + 0.5) * self.h]
        ny, nx = self.shape
        return [self.x_lo[0] + (np.arange(nx) + 0.5) * self.h,
                self.x_lo[1] + (np.arange(ny) + 0.5) * self.h]

    def centers(self) -> np.ndarray:
        """Cell centres, shape ``grid + (dim,)`` with components ``(x[, y])``."""
        ax = self.axes()
        if self.dim == 1:
            return ax[0][:, None]
        X, Y = np.meshgrid(ax[0], ax[1])
        return np.stack([X, Y], axis=-1)

    def copy(self) -> "EnthalpyField":
        return replace(self, e=self.e.copy(), u=self.u.copy())

    def total_enthalpy(self) -> float:
        return float(self.e.sum() * self.h ** self.dim)

    def cell_index(self, point) -> tuple:
        point = np.atleast_1d(np.asarray(point, dtype=float))
        idx = [int(np.floor((point[k] - self.x_lo[k]) / self.h)) for k in range(self.dim)]
        return tuple(idx) if self.dim == 1 else (idx[1], idx[0])

    def value_at(self, point) -> float:
        return float(self.u[self.cell_index(point)])


def stable_dt(params: ModelParams, h: float, dim: int) -> float:
    return CFL_FACTOR * h * h / (2.0 * params.d * dim)


def _check_dt(field_: EnthalpyField, dt: float) -> None:
    limit = field_.h ** 2 / (2.0 * field_.params.d * field_.dim)
    if not (0 < dt <= limit * (1 + 1e-12)):
        raise CFLViolation(f"dt={dt} outside (0, h^2/(2 d dim)] = (0, {limit}]")


def _advance(field_: EnthalpyField, n_steps: int, dt: float, reaction: Reaction,
             check_monotone: bool = True) -> None:
    prm = field_.params
    if reaction.logistic is not None:
        a, b = (float(v) for v in reaction.logistic)
        kernel = _run1d if field_.dim == 1 else _run2d
        refrozen = kernel(field_.e, field_.u, n_steps, dt, field_.h, prm.d, a, b,
                          float(field_.L), float(field_.m))
    else:
        x = field_.centers()
        refrozen = 0
        for _ in range(n_steps):
            u = field_.u
            field_.e += dt * (prm.d * _laplacian_neumann(u, field_.h) + reaction(x, u))
            new = beta(field_.e, prm, field_.m, field_.L)
            refrozen += int(np.count_nonzero((u > 0) & (new <= 0)))
            field_.u = np.ascontiguousarray(new)
    field_.t += n_steps * dt
    if check_monotone and refrozen and field_.m == 0 and field_.L > 0:
        raise SpecInvariantViolated(f"{refrozen} cells left the positivity set before t={field_.t}")


def step_enthalpy(field_: EnthalpyField, reaction: Optional[Reaction] = None,
                  dt: Optional[float] = None) -> EnthalpyField:
    """One explicit step; returns a new field."""
    reaction = reaction or logistic_reaction(field_.params)
    dt = stable_dt(field_.params, field_.h, field_.dim) if dt is None else float(dt)
    _check_dt(field_, dt)
    new = field_.copy()
    _advance(new, 1, dt, reaction, check_monotone=reaction.logistic is not None)
    return new


def advance_to(field_: EnthalpyField, t_end: float, reaction: Reaction,
               dt_max: Optional[float] = None, check_monotone: bool = True) -> EnthalpyField:
    dt_max = stable_dt(field_.params, field_.h, field_.dim) if dt_max is None else dt_max
    span = t_end - field_.t
    if span <= 1e-14:
        return field_
    n = int(math.ceil(span / dt_max - 1e-9))
    dt = span / n
    _check_dt(field_, dt)
    _advance(field_, n, dt, reaction, check_monotone)
    field_.t = t_end
    return field_


# --------------------------------------------------------------------------
# front extraction
# --------------------------------------------------------------------------

def extract_front(field_: EnthalpyField, refine: str = "linear") -> np.ndarray:
    """Points of the free boundary, shape ``(n, dim)``.

    ``refine="linear"`` interpolates u linearly between a positive cell and a
    zero cell, which lands on the zero cell. In 1D, ``refine="latent"`` puts
    the point at the face shifted by the fraction of latent heat absorbed by
    the zero cell (sharp scheme only).
    """
    u = field_.u
    pos = u > 0
    if pos.all() or not pos.any():
        raise NoInterface("field has no free boundary (u > 0 everywhere or nowhere)")
    h = field_.h
    if field_.dim == 1:
        x = field_.axes()[0]
        pts = []
        for i in np.flatnonzero(pos[:-1] != pos[1:]):
            zero, live = (i + 1, i) if pos[i] else (i, i + 1)
            if refine == "latent" and field_.m == 0 and field_.L > 0:
                frac = min(max((field_.e[zero] + field_.L) / field_.L, 0.0), 1.0)
                face = 0.5 * (x[zero] + x[live])
                pts.append(face + np.sign(x[zero] - x[live]) * frac * h)
            else:
                # linear interpolation between (x_live, u_live) and (x_zero, 0)
                pts.append(x[zero])
        return np.asarray(pts, dtype=float)[:, None]
    # marching squares on the level just above zero
    level = 1e-12 * max(float(u.max()), 1e-300)
    contours = find_contours(u, level)
    if not contours:
        raise NoInterface("no zero-level contour found")
    contours.sort(key=lambda c: (c[0][0], c[0][1], len(c)))
    rc = np.vstack(contours)
    x0, y0 = field_.x_lo
    return np.column_stack([x0 + (rc[:, 1] + 0.5) * h, y0 + (rc[:, 0] + 0.5) * h])


def front_along_ray(field_: EnthalpyField, origin, direction: str) -> float:
    """Free-boundary coordinate on the grid line through ``origin``.

    ``direction`` is one of ``"-y", "+y", "-x", "+x"``: walk from ``origin``
    (inside the positive set) that way and return the coordinate of the first
    zero cell, refined by its absorbed latent-heat fraction.
    """
    sign = -1 if direction[0] == "-" else 1
    axis = direction[1]
    if field_.dim == 1:
        line_u, line_e, coords = field_.u, field_.e, field_.axes()[0]
        start = field_.cell_index(origin)[0]
    else:
        iy, ix = field_.cell_index(origin)
        ax_x, ax_y = field_.axes()
        if axis == "y":
            line_u, line_e, coords, start = field_.u[:, ix], field_.e[:, ix], ax_y, iy
        else:
            line_u, line_e, coords, start = field_.u[iy, :], field_.e[iy, :], ax_x, ix
    if line_u[start] <= 0:
        raise NoInterface("ray origin is not in the positive set")
    i = start
    while 0 <= i + sign < line_u.shape[0] and line_u[i + sign] > 0:
        i += sign
    if not (0 <= i + sign < line_u.shape[0]):
        raise NoInterface("positive set reaches the box face along the ray")
    zero = i + sign
    face = 0.5 * (coords[i] + coords[zero])
    frac = 0.0
    if field_.m == 0 and field_.L > 0:
        frac = min(max((line_e[zero] + field_.L) / field_.L, 0.0), 1.0)
    return float(face + sign * frac * field_.h)


# --------------------------------------------------------------------------
# scenarios
# --------------------------------------------------------------------------

@dataclass
class Scenario:
    """Initial range, initial data, box and schedule of one run.

    ``shape`` is ``"cone"`` (uses ``cone``), ``"ball"`` (``center``,
    ``radius``), ``"halfspace"`` (``{x : x·normal > offset}``) or ``"mask"``
    (a boolean array ``mask`` on the grid). ``box`` is ``(x_lo, x_hi)`` or
    ``(x_lo, x_hi, y_lo, y_hi)``.
    """

    params: ModelParams = field(default_factory=ModelParams)
    shape: str = "cone"
    cone: Optional[ConeSpec] = None
    center: Sequence[float] = (0.0, 0.0)
    radius: float = 1.0
    normal: Sequence[float] = (1.0,)
    offset: float = 0.0
    mask: Optional[np.ndarray] = None
    profile: object = "plateau"   # "plateau" or callable(x, signed_dist) -> u0
    kappa: Optional[float] = None
    box: Sequence[float] = (-10.0, 10.0)
    h: float = 0.1
    T: float = 1.0
    snap_every: float = 1.0
    m: float = 0
    reaction: Optional[Reaction] = None
    dt: Optional[float] = None
    margin_cells: int = 10
    margin_faces: Optional[Sequence[str]] = None  # None: faces the initial front avoids
    ray_origin: Optional[Sequence[float]] = None
    ray_direction: str = "-y"
    track_dt: Optional[float] = None
    probes: Sequence[Sequence[float]] = ()
    keep_snapshots: bool = True
    xi_inner: Optional[float] = None
    xi_outer: Optional[float] = None

    @property
    def dim(self) -> int:
        return len(self.box) // 2


def _signed_distance_to_range(sc: Scenario, x: np.ndarray) -> np.ndarray:
    """Positive inside the initial range, measured to its boundary."""
    if sc.shape == "cone":
        if sc.cone is None:
            raise ConfigError("cone scenario without a ConeSpec")
        return -signed_distance_cone(sc.cone, x)
    if sc.shape == "ball":
        c = np.asarray(sc.center, dtype=float)[: x.shape[-1]]
        return sc.radius - np.linalg.norm(x - c, axis=-1)
    if sc.shape == "halfspace":
        n = np.asarray(sc.normal, dtype=float)
        n = n / np.linalg.norm(n)
        return x @ n - sc.offset
    raise ConfigError(f"unknown shape {sc.shape!r}")


def _grid(sc: Scenario):
    box = np.asarray(sc.box, dtype=float)
    if box.size not in (2, 4):
        raise ConfigError("box must be (x_lo, x_hi) or (x_lo, x_hi, y_lo, y_hi)")
    lo = box[0::2]
    counts = np.rint((box[1::2] - lo) / sc.h).astype(int)
    if np.any(counts < 3):
        raise ConfigError("box smaller than three cells")
    if np.any(np.abs(lo + counts * sc.h - box[1::2]) > 1e-9 * max(1.0, float(np.abs(box).max()))):
        raise ConfigError(f"h={sc.h} does not divide the box {tuple(box)}")
    return tuple(lo), tuple(counts)


def initial_field(sc: Scenario) -> EnthalpyField:
    prm = validate(sc.params)
    lo, counts = _grid(sc)
    shape = (counts[0],) if sc.dim == 1 else (counts[1], counts[0])
    probe = EnthalpyField(np.zeros(shape), lo, sc.h, 0.0, prm, sc.m)
    x = probe.centers()
    if sc.shape == "mask":
        if sc.mask is None or sc.mask.shape != shape:
            raise ConfigError("mask scenario needs a boolean mask of the grid shape")
        inside = sc.mask.astype(bool)
        sd = np.where(inside, np.inf, -np.inf)
    else:
        sd = _signed_distance_to_range(sc, x)
        inside = sd > 0
    if callable(sc.profile):
        u0 = np.asarray(sc.profile(x, sd), dtype=float)
    elif sc.profile == "plateau":
        kappa = math.sqrt(prm.a / prm.d) if sc.kappa is None else sc.kappa
        u0 = np.minimum(prm.capacity, kappa * np.where(inside, sd, 0.0))
    else:
        raise ConfigError(f"unknown profile {sc.profile!r}")
    u0 = np.where(inside, u0, 0.0)
    if np.any(u0 < 0) or not np.all(np.isfinite(u0)):
        raise ConfigError("initial data must be finite and nonnegative")
    e0 = alpha(u0, sc.m, prm)
    return EnthalpyField(e0, lo, sc.h, 0.0, prm, sc.m)


def _face_distances(field_: EnthalpyField, pts: np.ndarray) -> dict:
    ext = field_.extent
    out = {"x_lo": float(np.min(pts[:, 0] - ext[0])), "x_hi": float(np.min(ext[1] - pts[:, 0]))}
    if field_.dim == 2:
        out["y_lo"] = float(np.min(pts[:, 1] - ext[2]))
        out["y_hi"] = float(np.min(ext[3] - pts[:, 1]))
    return out


@dataclass
class ScenarioResult:
    times: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    fronts: list = field(default_factory=list)
    ray_times: list = field(default_factory=list)
    ray_positions: list = field(default_factory=list)
    probe_values: list = field(default_factory=list)
    monitored_faces: tuple = ()
    final: Optional[EnthalpyField] = None

    def ray_trajectory(self):
        from .fb1d import FrontTrajectory
        return FrontTrajectory(np.asarray(self.ray_times), np.asarray(self.ray_positions),
                               np.empty(0))


def _schedule(T: float, every: float) -> np.ndarray:
    n = max(1, int(round(T / every)))
    return np.linspace(0.0, T, n + 1)


def run_scenario(sc: Scenario, cauchy: bool = False) -> ScenarioResult:
    """Run a scenario; snapshots (and fronts unless ``cauchy``) at every ``snap_every``."""
    fld = initial_field(sc)
    if cauchy:
        fld = EnthalpyField(np.maximum(fld.u, 0.0), fld.x_lo, fld.h, 0.0, fld.params, 0, latent=0.0)
    reaction = sc.reaction or logistic_reaction(sc.params)
    snaps = _schedule(sc.T, sc.snap_every)
    track = _schedule(sc.T, sc.track_dt) if sc.track_dt else np.empty(0)
    marks = np.unique(np.round(np.concatenate([snaps, track]), 12))
    snap_set = set(np.round(snaps, 12))
    track_set = set(np.round(track, 12))
    res = ScenarioResult(final=fld)
    margin = sc.margin_cells * sc.h
    monitored = sc.margin_faces
    for t_mark in marks:
        advance_to(fld, float(t_mark), reaction, sc.dt,
                   check_monotone=not cauchy and reaction.logistic is not None)
        if t_mark in track_set and sc.ray_origin is not None and not cauchy:
            try:
                res.ray_positions.append(front_along_ray(fld, sc.ray_origin, sc.ray_direction))
                res.ray_times.append(fld.t)
            except NoInterface:
                pass
        if t_mark not in snap_set:
            continue
        res.times.append(fld.t)
        if sc.keep_snapshots:
            res.snapshots.append(fld.u.copy())
        res.probe_values.append([fld.value_at(p) for p in sc.probes])
        if cauchy:
            continue
        try:
            pts = extract_front(fld)
        except NoInterface:
            pts = np.empty((0, fld.dim))
        res.fronts.append(pts)
        if pts.shape[0] == 0:
            continue
        dists = _face_distances(fld, pts)
        if monitored is None:
            monitored = tuple(f for f, v in dists.items() if v >= margin)
            res.monitored_faces = monitored
        close = [f for f in monitored if dists[f] < margin]
        if close:
            res.final = fld
            raise MarginViolated(f"front within {sc.margin_cells} cells of {close} at t={fld.t}",
                                 partial=res)
    res.monitored_faces = tuple(monitored or ())
    res.final = fld
    return res


def run_cauchy(sc: Scenario) -> ScenarioResult:
    """Same stepping with zero latent heat (``e == u``): the reaction-diffusion Cauchy problem."""
    return run_scenario(sc, cauchy=True)


# --------------------------------------------------------------------------
# files
# --------------------------------------------------------------------------

def write_snapshot(path, field_: EnthalpyField) -> Path:
    path = Path(path)
    head = [f"t={field_.t!r}", f"dim={field_.dim}"]
    if field_.dim == 1:
        head += [f"nx={field_.shape[0]}", f"hx={field_.h!r}", f"x_lo={field_.x_lo[0]!r}"]
        rows = [field_.u]
    else:
        ny, nx = field_.shape
        head += [f"nx={nx}", f"ny={ny}", f"hx={field_.h!r}", f"hy={field_.h!r}",
                 f"x_lo={field_.x_lo[0]!r}", f"y_lo={field_.x_lo[1]!r}"]
        rows = field_.u
    with path.open("w", encoding="utf-8") as fh:
        fh.write("# " + " ".join(head) + "\n")
        for row in rows:
            fh.write(" ".join(repr(float(v)) for v in row) + "\n")
    return path


def read_snapshot(path) -> tuple[dict, np.ndarray]:
    with open(path, encoding="utf-8") as fh:
        meta = dict(tok.split("=", 1) for tok in fh.readline().lstrip("#").split())
        data = np.loadtxt(fh, ndmin=2)
    if meta.get("dim") == "1":
        data = data.ravel()
    return meta, data


def write_front(path, t: float, points: np.ndarray) -> Path:
    path = Path(path)
    pts = np.asarray(points, dtype=float)
    with path.open("w", encoding="utf-8") as fh:
        fh.write(f"# t={t!r}\n")
        fh.write("x\n" if pts.shape[1] == 1 else "x,y\n")
        for p in pts:
            fh.write(",".join(repr(float(v)) for v in p) + "\n")
    return path


# --------------------------------------------------------------------------
# flat key=value configuration
# --------------------------------------------------------------------------

_OPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
        ast.Div: operator.truediv, ast.Pow: operator.pow, ast.USub: operator.neg,
        ast.UAdd: operator.pos}


def parse_number(text: str) -> float:
    """Float literal or simple arithmetic in ``pi``, e.g. ``3*pi/4``."""
    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id == "pi":
            return math.pi
        if isinstance(node, ast.BinOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.operand))
        raise ConfigError(f"cannot evaluate {text!r}")
    try:
        return ev(ast.parse(text.strip(), mode="eval"))
    except SyntaxError as exc:
        raise ConfigError(f"bad number {text!r}") from exc


_NUMERIC = {"phi", "xi1", "xi2", "a", "b", "d", "mu", "T", "hx", "m", "snap_every",
            "radius", "kappa", "track_dt", "offset", "margin_cells"}
_VECTOR = {"box", "center", "normal", "ray_origin"}
_TEXT = {"shape", "ray_direction"}


def parse_config(text: str, numeric=_NUMERIC, vector=_VECTOR, textual=_TEXT) -> dict:
    """Flat ``key=value`` lines, ``#`` comments; unknown keys are errors."""
    cfg: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in numeric:
            cfg[key] = parse_number(value)
        elif key in vector:
            cfg[key] = tuple(parse_number(v) for v in value.split(","))
        elif key in textual:
            cfg[key] = value
        else:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
    return cfg


def scenario_from_config(cfg: dict) -> Scenario:
    prm = ModelParams(**{k: cfg[k] for k in ("d", "a", "b", "mu") if k in cfg})
    validate(prm)
    box = cfg.get("box", (-10.0, 10.0, -10.0, 10.0))
    shape = cfg.get("shape", "cone")
    kw = dict(params=prm, shape=shape, box=box, h=cfg.get("hx", 0.1), T=cfg.get("T", 1.0),
              snap_every=cfg.get("snap_every", 1.0), m=cfg.get("m", 0.0))
    if shape == "cone":
        xi1 = cfg.get("xi1", 0.0)
        xi2 = cfg.get("xi2", xi1)
        if xi1 < xi2:
            raise ConfigError("need xi1 >= xi2 (the inner cone has the higher vertex)")
        dim = len(box) // 2
        kw["cone"] = ConeSpec(cfg.get("phi", 3 * math.pi / 4), xi2, dim)
        kw["xi_inner"], kw["xi_outer"] = xi1, xi2
        kw["ray_origin"] = cfg.get("ray_origin", (0.0,) * (dim - 1) + (xi2 + 2.0 * prm.length_scale,))
        kw["track_dt"] = kw["T"] / 200
    for key in ("radius", "kappa", "track_dt", "offset", "center", "normal", "ray_origin",
                "ray_direction"):
        if key in cfg:
            kw[key] = cfg[key]
    if "margin_cells" in cfg:
        kw["margin_cells"] = int(cfg["margin_cells"])
    return Scenario(**kw)


def load_scenario(path) -> Scenario:
    return scenario_from_config(parse_config(Path(path).read_text(encoding="utf-8")))


# --------------------------------------------------------------------------
# desk-scale cone protocol
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ConeProtocol:
    scenario: Scenario
    window: float
    c_star: float

    def in_window(self, pts: np.ndarray) -> np.ndarray:
        """Front points far enough from the reflecting faces to be trusted.

        Where a cone arm meets a box face at an oblique angle the mirror image
        turns the front into a convex corner, which advances at ``c*`` rather
        than with the arm; the disturbance stays within about ``c* t`` of the
        face. The box is sized so this window is clear of it.
        """
        pts = np.asarray(pts)
        if self.scenario.cone.phi > math.pi / 2:
            return np.abs(pts[:, 0]) <= self.window
        return pts[:, 1] <= self.window


def cone_protocol(params: ModelParams, phi: float, c_star: float, T: float, h: float = 0.1,
                  window: float = 10.0, pad: float = 3.0, snap_every: Optional[float] = None,
                  track_every: Optional[float] = None, **kw) -> ConeProtocol:
    """Box, data and probes for a 2D cone run with vertex at the origin."""
    ell = params.length_scale
    R = c_star * T
    pad *= ell
    margin = (Scenario.margin_cells + 5) * h
    cot = math.cos(phi) / math.sin(phi)
    if phi > math.pi / 2:
        W = window + R + pad
        z_side = W * cot
        y_lo = min(0.0, z_side) - 1.3 * (c_star / math.sin(phi)) * T - margin
        y_hi = 5.0 * ell
    else:
        y_hi = window + R + pad
        W = y_hi / cot + 1.3 * R / math.cos(phi) + margin
        y_lo = -1.3 * R - margin
    nx_half = int(math.ceil(W / h))
    x_lo = -(nx_half + 0.5) * h
    ny = int(math.ceil((y_hi - y_lo) / h))
    y_lo = y_hi - ny * h
    sc = Scenario(params=params, shape="cone", cone=ConeSpec(phi, 0.0, 2),
                  box=(x_lo, -x_lo, y_lo, y_hi), h=h, T=T,
                  snap_every=snap_every or T / 8, ray_origin=(0.0, 2.0 * ell),
                  ray_direction="-y", track_dt=track_every or T / 200,
                  probes=[(0.0, 0.0)], **kw)
    return ConeProtocol(sc, window, c_star)
