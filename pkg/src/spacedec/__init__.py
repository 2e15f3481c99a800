"""Riemannian optimization over bounded-rank matrices with orthogonally invariant
constraints, through the space-decoupling manifold ``M_h``."""

__version__ = "0.1.0"

from .constraints import ConstraintManifold
from .errors import (CayleySingular, DegenerateGraphs, EmptyManifold, InfeasiblePoint,
                     InvalidConfig, InvalidInput, InvalidTangent, ObjectiveError,
                     ProjectionUndefined, RankDeficient, SpacedecError)
from .manifold import MhPoint, MhTangent
from .problems import Objective
from .solvers import SolveReport, SolverConfig, Termination, solve_rgd, solve_rtr
from .variational import (project_tangent_cone_intersection, project_tangent_cone_lowrank,
                          stationarity_measure, stationarity_report)

__all__ = [
    "ConstraintManifold", "MhPoint", "MhTangent", "Objective", "SolverConfig", "SolveReport",
    "Termination", "solve_rgd", "solve_rtr", "project_tangent_cone_lowrank",
    "project_tangent_cone_intersection", "stationarity_measure", "stationarity_report",
    "SpacedecError", "InvalidInput", "RankDeficient", "ProjectionUndefined", "EmptyManifold",
    "InvalidTangent", "CayleySingular", "InfeasiblePoint", "ObjectiveError", "InvalidConfig",
    "DegenerateGraphs",
]
