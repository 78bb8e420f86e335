"""Cones ``Λ^φ + ξ e_N``, their R-neighbourhoods, and front/set comparisons.

Everything is evaluated exactly in the axial half-plane ``(ρ, z)`` with
``ρ = |x'|`` (the components orthogonal to e_N) and ``z = x_N - ξ``. The
boundary of the cone there is the ray with direction ``(sin φ, cos φ)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Protocol

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class ConeSpec:
    phi: float
    xi: float = 0.0
    N: int = 2

    def __post_init__(self):
        if not (0.0 < self.phi < math.pi):
            raise ConfigError(f"phi must lie in (0, pi), got {self.phi!r}")
        if self.N < 1:
            raise ConfigError(f"dimension must be >= 1, got {self.N!r}")

    @property
    def theta(self) -> float:
        return math.pi - self.phi

    def shifted(self, dz: float) -> "ConeSpec":
        return ConeSpec(self.phi, self.xi + dz, self.N)


def _axial(spec: ConeSpec, x) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != spec.N:
        raise ConfigError(f"points have dimension {x.shape[-1]}, cone has N={spec.N}")
    rho = np.sqrt(np.sum(x[..., :-1] ** 2, axis=-1)) if spec.N > 1 else np.zeros(x.shape[:-1])
    return rho, x[..., -1] - spec.xi


def cone_contains(spec: ConeSpec, x):
    """Open cone membership; the vertex itself is excluded."""
    rho, z = _axial(spec, x)
    return z > np.hypot(rho, z) * math.cos(spec.phi)


def _boundary_distance(spec: ConeSpec, rho, z):
    s, c = math.sin(spec.phi), math.cos(spec.phi)
    along = rho * s + z * c
    perp = np.abs(rho * c - z * s)
    return np.where(along <= 0.0, np.hypot(rho, z), perp)


def dist_to_cone(spec: ConeSpec, x):
    """Euclidean distance from ``x`` to the closed cone (0 inside)."""
    rho, z = _axial(spec, x)
    inside = z >= np.hypot(rho, z) * math.cos(spec.phi)
    return np.where(inside, 0.0, _boundary_distance(spec, rho, z))


def signed_distance_cone(spec: ConeSpec, x):
    """Negative inside the open cone, positive outside; |value| = distance to the surface."""
    rho, z = _axial(spec, x)
    d = _boundary_distance(spec, rho, z)
    return np.where(z > np.hypot(rho, z) * math.cos(spec.phi), -d, d)


def neighborhood_contains(spec: ConeSpec, R: float, x):
    """Membership in ``N[Λ, R] = {x : d(x, Λ) < R}``.

    ``R = 0`` gives the empty set by the literal definition; we return the
    open cone instead so that the family is continuous from the right.
    """
    if R < 0:
        raise ConfigError(f"R must be >= 0, got {R!r}")
    if R == 0:
        return cone_contains(spec, x)
    return dist_to_cone(spec, x) < R


# --------------------------------------------------------------------------
# set descriptors
# --------------------------------------------------------------------------

class SetDescriptor(Protocol):
    def contains(self, x): ...
    def signed_distance(self, x): ...


@dataclass(frozen=True)
class ConeSet:
    spec: ConeSpec

    def contains(self, x):
        return cone_contains(self.spec, x)

    def signed_distance(self, x):
        return signed_distance_cone(self.spec, x)

    def describe(self) -> str:
        return f"cone(phi={self.spec.phi!r}, xi={self.spec.xi!r})"


@dataclass(frozen=True)
class NeighborhoodSet:
    """``N[Λ, R]``. For φ ≥ π/2 this is the cone shifted by ``-R/sin φ`` along e_N."""

    spec: ConeSpec
    R: float

    def _as_cone(self):
        if self.spec.phi >= math.pi / 2:
            return ConeSet(self.spec.shifted(-self.R / math.sin(self.spec.phi)))
        return None

    def contains(self, x):
        cone = self._as_cone()
        if cone is not None and self.R > 0:
            return cone.contains(x)
        return neighborhood_contains(self.spec, self.R, x)

    def signed_distance(self, x):
        cone = self._as_cone()
        if cone is not None:
            return cone.signed_distance(x)
        # Λ is convex for φ < π/2, so offsetting shifts the signed distance by R
        return signed_distance_cone(self.spec, x) - self.R

    def describe(self) -> str:
        return f"N[cone(phi={self.spec.phi!r}, xi={self.spec.xi!r}), R={self.R!r}]"


@dataclass(frozen=True)
class PredictedSandwich:
    inner: object
    outer: object
    t: float
    epsilon: float


def cone_sandwich(spec: ConeSpec, c_star: float, t: float, epsilon: float,
                  xi_inner: float | None = None, xi_outer: float | None = None) -> PredictedSandwich:
    """Predicted bounds for the front at time ``t``.

    φ > π/2: cones shifted by ``-(c*/sin φ ∓ ε) t``.
    φ ≤ π/2: neighbourhoods ``N[Λ, (c* ∓ ε) t]``.
    Optional ``xi_inner``/``xi_outer`` place the vertices of the two bounding
    cones (the initial range is only known to lie between two shifts).
    """
    base_in = spec if xi_inner is None else ConeSpec(spec.phi, xi_inner, spec.N)
    base_out = spec if xi_outer is None else ConeSpec(spec.phi, xi_outer, spec.N)
    if spec.phi > math.pi / 2:
        s = math.sin(spec.phi)
        inner = ConeSet(base_in.shifted(-(c_star / s - epsilon) * t))
        outer = ConeSet(base_out.shifted(-(c_star / s + epsilon) * t))
    else:
        inner = NeighborhoodSet(base_in, max(c_star - epsilon, 0.0) * t)
        outer = NeighborhoodSet(base_out, (c_star + epsilon) * t)
    return PredictedSandwich(inner, outer, t, epsilon)


@dataclass(frozen=True)
class SandwichReport:
    violations_in: int
    violations_out: int
    max_violation_dist: float
    n_points: int

    @property
    def ok(self) -> bool:
        return self.violations_in == 0 and self.violations_out == 0

    def to_text(self) -> str:
        return (f"n_points={self.n_points}\nviolations_in={self.violations_in}\n"
                f"violations_out={self.violations_out}\n"
                f"max_violation_dist={self.max_violation_dist!r}\nok={str(self.ok).lower()}\n")


def sandwich_check(points, inner, outer, tol: float = 1e-12) -> SandwichReport:
    """Front points must avoid the open ``inner`` set and lie in the closed ``outer`` set."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] == 0:
        raise ConfigError("sandwich_check needs a nonempty (n, N) array of points")
    sd_in = np.asarray(inner.signed_distance(pts))
    sd_out = np.asarray(outer.signed_distance(pts))
    bad_in = sd_in < -tol
    bad_out = sd_out > tol
    worst = 0.0
    if bad_in.any():
        worst = max(worst, float(-sd_in[bad_in].min()))
    if bad_out.any():
        worst = max(worst, float(sd_out[bad_out].max()))
    return SandwichReport(int(bad_in.sum()), int(bad_out.sum()), worst, int(pts.shape[0]))
