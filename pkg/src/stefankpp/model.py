"""Model constants and reaction terms shared by every solver."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .errors import NonPositiveParameter


@dataclass(frozen=True)
class ModelParams:
    """Constants of ``u_t - d Δu = a u - b u^2`` with Stefan coefficient ``mu``."""

    d: float = 1.0
    a: float = 1.0
    b: float = 1.0
    mu: float = 1.0

    @property
    def latent_heat(self) -> float:
        """Enthalpy jump ``d/mu`` carried by the free boundary."""
        return self.d / self.mu

    @property
    def c_max(self) -> float:
        """KPP speed ``2 sqrt(a d)``; every semi-wave speed lies below it."""
        return 2.0 * math.sqrt(self.a * self.d)

    @property
    def capacity(self) -> float:
        return self.a / self.b

    @property
    def K(self) -> float:
        # lipschitz-type bound g(u) <= K u of the logistic term
        return self.a

    @property
    def length_scale(self) -> float:
        return math.sqrt(self.d / self.a)

    def with_(self, **changes) -> "ModelParams":
        return replace(self, **changes)


def validate(params: ModelParams) -> ModelParams:
    """Return ``params`` unchanged, or raise naming the first non-positive field."""
    for name in ("d", "a", "b", "mu"):
        value = getattr(params, name)
        if not (isinstance(value, (int, float, np.floating)) and math.isfinite(value) and value > 0):
            raise NonPositiveParameter(name, value)
    return params


@dataclass(frozen=True)
class Reaction:
    """Reaction term ``g(x, u)`` together with its growth bound ``K``.

    ``evaluate`` must accept numpy arrays (positions of shape ``(..., dim)``
    or ``None``, values of matching leading shape). When ``logistic`` is set to
    ``(a, b)`` the solvers use their compiled fast path instead of calling
    ``evaluate``.
    """

    evaluate: Callable
    lipschitz_bound: float
    logistic: Optional[tuple[float, float]] = None

    def __call__(self, x, u):
        return self.evaluate(x, u)


def logistic_reaction(params: ModelParams) -> Reaction:
    a, b = float(params.a), float(params.b)

    cap = a / b

    def g(x, u):
        u = np.asarray(u, dtype=float)
        # a*cap - b*cap**2 rounds to ~1e-16; pin the equilibrium to an exact zero
        return np.where(u == cap, 0.0, a * u - b * u * u)

    return Reaction(evaluate=g, lipschitz_bound=a, logistic=(a, b))


def zero_reaction() -> Reaction:
    """``g ≡ 0``: the pure Stefan problem (used for conservation checks)."""
    return Reaction(evaluate=lambda x, u: np.zeros_like(np.asarray(u, dtype=float)),
                    lipschitz_bound=0.0, logistic=(0.0, 0.0))
