"""Spectral solver for Sturm-Liouville operators with singular coefficients and the associated wave equation."""

from __future__ import annotations

from .coefficients import CoefficientSet, Grid, MollifierSpec, PiecewiseSmoothFn, SingularDescriptor, mollify
from .config import RunConfig, load_config
from .eigensolver import SpectralBasis, build_basis
from .errors import SturmWaveError
from .estimates import evaluate_estimate
from .evolution import ForcingTerm, InitialData, solve_forced, solve_homogeneous
from .veryweak import VWProblem, build_net, consistency_experiment, fit_moderateness, uniqueness_experiment

__all__ = [
    "CoefficientSet", "ForcingTerm", "Grid", "InitialData", "MollifierSpec", "PiecewiseSmoothFn", "RunConfig",
    "SingularDescriptor", "SpectralBasis", "SturmWaveError", "VWProblem", "build_basis", "build_net",
    "consistency_experiment", "evaluate_estimate", "fit_moderateness", "load_config", "mollify", "solve_forced",
    "solve_homogeneous", "uniqueness_experiment",
]
