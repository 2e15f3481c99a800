"""Tangent cones of bounded-rank sets intersected with an invariant constraint.

These certify stationarity for the original, nonsmooth problem
``min f(X)  s.t.  rank(X) <= r, h(X) = 0`` at points mapped back from the
space-decoupling manifold.
"""
from dataclasses import dataclass

import numpy as np

from .constraints import ConstraintManifold
from .errors import InfeasiblePoint, InvalidInput
from .linalg import SvdFactors, as_matrix, numerical_rank, thin_svd, truncate_rank

FEASIBILITY_TOL = 1e-8


@dataclass(frozen=True)
class RankInfo:
    s: int
    r: int
    svd: SvdFactors

    def factors(self, k=None):
        """Leading ``k`` (default: detected rank) left/right singular vectors and values."""
        k = self.s if k is None else k
        return self.svd.U[:, :k], self.svd.S[:k], self.svd.V[:, :k]


def rank_info(X, r, rank=None):
    X = as_matrix(X, "X")
    if not 0 <= r <= min(X.shape):
        raise InvalidInput(f"rank bound {r} out of range for shape {X.shape}")
    svd = thin_svd(X)
    s = numerical_rank(svd=svd) if rank is None else int(rank)
    if s > r:
        raise InvalidInput(f"detected rank {s} exceeds the bound {r}")
    return RankInfo(s, r, svd)


def _constraint(kind, m):
    if isinstance(kind, ConstraintManifold):
        return kind
    return ConstraintManifold.from_key(kind, m)


def _cone_terms(E, U, V, r, s):
    """The two terms shared by both cone projections.

    Returns ``P_U E P_{V_perp}`` and the best rank-``(r - s)`` part of
    ``P_{U_perp} E P_{V_perp}``.
    """
    EV = E @ V
    E_vperp = E - EV @ V.T
    UtE_vperp = U.T @ E_vperp
    mixed = U @ UtE_vperp
    normal = E_vperp - mixed
    return EV, mixed, truncate_rank(normal, r - s)


def project_tangent_cone_lowrank(X, E, r, rank=None):
    """Projection onto the tangent cone of ``{rank <= r}`` at ``X``."""
    E = as_matrix(E, "E")
    info = rank_info(X, r, rank)
    if E.shape != info.svd.U.shape[:1] + info.svd.V.shape[:1]:
        raise InvalidInput("E and X differ in shape")
    U, _, V = info.factors()
    EV, mixed, low = _cone_terms(E, U, V, r, info.s)
    return EV @ V.T + mixed + low


def cone_components(X, E, r, kind, rank=None):
    """The three mutually orthogonal summands of the intersection-cone projection."""
    X = as_matrix(X, "X")
    E = as_matrix(E, "E")
    if E.shape != X.shape:
        raise InvalidInput("E and X differ in shape")
    c = _constraint(kind, X.shape[0])
    res = c.infeasibility(X)
    if res > FEASIBILITY_TOL:
        raise InfeasiblePoint(f"X violates the constraint (residual {res:.3e})", res)
    info = rank_info(X, r, rank)
    U, S, V = info.factors()
    EV, mixed, low = _cone_terms(E, U, V, r, info.s)
    if info.s:
        first = c.project_tangent(U * S, EV) @ V.T
    else:
        first = np.zeros_like(E)
    return first, mixed, low


def project_tangent_cone_intersection(X, E, r, kind, rank=None):
    """Projection onto the tangent cone of ``{rank <= r} ∩ {h = 0}`` at ``X``."""
    first, mixed, low = cone_components(X, E, r, kind, rank)
    return first + mixed + low


def stationarity_measure(X, egrad, r, kind, rank=None):
    """Norm of the projected negative gradient; zero exactly at stationary points."""
    proj = project_tangent_cone_intersection(X, -np.asarray(egrad, dtype=float), r, kind, rank)
    return float(np.linalg.norm(proj))


def stationarity_report(X, egrad, r, kind):
    """Measure at the detected numerical rank and with the rank forced to ``r``.

    The cone projection jumps when the rank changes, so near a rank boundary the
    two values can differ by a lot; both are reported.
    """
    info = rank_info(X, r)
    detected = stationarity_measure(X, egrad, r, kind, rank=info.s)
    forced = stationarity_measure(X, egrad, r, kind, rank=r)
    return {"detected_rank": info.s, "measure_detected": detected,
            "measure_forced": forced}


def check_rank_deficient_stationarity(X, egrad, kind, tol=1e-8):
    """Necessary condition at rank-deficient points: ``-egrad`` is normal to the constraint."""
    X = as_matrix(X, "X")
    c = _constraint(kind, X.shape[0])
    res = c.infeasibility(X)
    if res > FEASIBILITY_TOL:
        raise InfeasiblePoint(f"X violates the constraint (residual {res:.3e})", res)
    tangent = c.project_tangent(X, -np.asarray(egrad, dtype=float))
    return bool(np.linalg.norm(tangent) <= tol)
