"""Spreading of a logistic population with a Stefan-type free boundary.

Submodules: ``model`` (parameters, reactions), ``semiwave`` (semi-wave
profiles and the spreading speed c*), ``fb1d`` and ``fbradial``
(front-fixing solvers), ``enthalpy`` (fixed-grid 1D/2D solver),
``geometry`` (cones and their neighbourhoods), ``verify`` (sub/super
solution certificates, comparison batteries) and ``cli``.
"""
from .errors import StefanKPPError
from .model import ModelParams, Reaction, logistic_reaction, zero_reaction
from .semiwave import SpeedResult, compute_cstar, solve_profile

__version__ = "0.1.0"

__all__ = ["ModelParams", "Reaction", "SpeedResult", "StefanKPPError", "compute_cstar",
           "logistic_reaction", "solve_profile", "zero_reaction", "__version__"]
