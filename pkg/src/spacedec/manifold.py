"""The space-decoupling manifold of bounded-rank matrices under an invariant constraint.

Points are pairs ``(X, G)`` with ``X G = 0``, ``h(X) = 0`` and ``G`` an orthogonal
projector of rank ``n - r``. They are never stored densely: a point is held through
a representation ``(H, V)`` with ``X = H V^T`` and ``G = I - V V^T``, where ``H`` is
feasible for the induced constraint on ``m x r`` matrices and ``V`` has orthonormal
columns. A tangent vector is held through ``(K, V_p)`` with ``K`` tangent to the
induced constraint at ``H`` and ``V^T V_p = 0``; it embeds as

    eta  = K V^T + H V_p^T
    zeta = -V_p V^T - V V_p^T.

The ambient metric is ``<eta1, eta2> + omega <zeta1, zeta2>``. Every operation costs
``O((m + n) r^2)`` plus whatever the objective derivatives cost.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .constraints import ConstraintManifold
from .errors import CayleySingular, InvalidInput, RankDeficient
from .linalg import polar_factor, qr_orthonormalize, spd_power

TANGENT_CLEAN_TOL = 1e-10
DEFAULT_OMEGA = 0.5


@dataclass(frozen=True, eq=False)
class MhPoint:
    constraint: ConstraintManifold
    H: np.ndarray
    V: np.ndarray
    omega: float = DEFAULT_OMEGA
    check: bool = field(default=True, repr=False)
    _chol: tuple = field(init=False, repr=False)

    def __post_init__(self):
        H = np.asarray(self.H, dtype=float)
        V = np.asarray(self.V, dtype=float)
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "V", V)
        if not self.omega > 0:
            raise InvalidInput(f"metric weight must be positive, got {self.omega}")
        if H.ndim != 2 or V.ndim != 2 or H.shape[1] != V.shape[1]:
            raise InvalidInput(f"incompatible representation shapes {H.shape}, {V.shape}")
        if H.shape[0] != self.constraint.m:
            raise InvalidInput(f"H must have {self.constraint.m} rows")
        if V.shape[1] > V.shape[0]:
            raise InvalidInput("rank bound exceeds the column count")
        if self.check:
            dev = np.linalg.norm(V.T @ V - np.eye(V.shape[1]), 2) if V.size else 0.0
            if dev > 1e-10:
                raise InvalidInput(f"V is not orthonormal (deviation {dev:.2e})")
            self.constraint.check_nonempty(H.shape[1])
            if not self.constraint.is_feasible(H):
                raise InvalidInput(
                    f"H is infeasible (residual {self.constraint.infeasibility(H):.2e})")
        M = 2.0 * self.omega * np.eye(H.shape[1]) + H.T @ H
        object.__setattr__(self, "_chol", cho_factor(M))

    @property
    def m(self):
        return self.H.shape[0]

    @property
    def n(self):
        return self.V.shape[0]

    @property
    def r(self):
        return self.V.shape[1]

    @property
    def X(self):
        return self.H @ self.V.T

    @property
    def M(self):
        return 2.0 * self.omega * np.eye(self.r) + self.H.T @ self.H

    def solve_M_right(self, Y):
        """``Y M^{-1}`` for the cached Gram matrix ``M = 2 omega I + H^T H``."""
        return cho_solve(self._chol, Y.T).T

    def solve_M_left(self, Y):
        """``M^{-1} Y``."""
        return cho_solve(self._chol, Y)

    def proj_G(self, Y):
        """``(I - V V^T) Y``."""
        return Y - self.V @ (self.V.T @ Y)

    def with_representation(self, Q):
        """The same point represented by ``(H Q, V Q)`` for orthogonal ``Q``."""
        return MhPoint(self.constraint, self.H @ Q, self.V @ Q, self.omega, check=False)


@dataclass(frozen=True, eq=False)
class MhTangent:
    K: np.ndarray
    V_p: np.ndarray

    def __add__(self, other):
        return MhTangent(self.K + other.K, self.V_p + other.V_p)

    def __sub__(self, other):
        return MhTangent(self.K - other.K, self.V_p - other.V_p)

    def __neg__(self):
        return MhTangent(-self.K, -self.V_p)

    def __mul__(self, a):
        return MhTangent(a * self.K, a * self.V_p)

    __rmul__ = __mul__

    def __truediv__(self, a):
        return MhTangent(self.K / a, self.V_p / a)

    def rotate(self, Q):
        return MhTangent(self.K @ Q, self.V_p @ Q)


def zero_tangent(p):
    return MhTangent(np.zeros_like(p.H), np.zeros_like(p.V))


def embed(p):
    """Dense pair ``(X, G) = (H V^T, I - V V^T)``."""
    return p.X, np.eye(p.n) - p.V @ p.V.T


def embed_tangent(p, t):
    """Dense pair ``(eta, zeta)`` of a tangent representation."""
    eta = t.K @ p.V.T + p.H @ t.V_p.T
    zeta = -t.V_p @ p.V.T - p.V @ t.V_p.T
    return eta, zeta


def ambient_inner(omega, a, b):
    return float(np.vdot(a[0], b[0]) + omega * np.vdot(a[1], b[1]))


def inner(p, t1, t2):
    return float(np.vdot(t1.K, t2.K) + np.vdot(t1.V_p, t2.V_p @ p.M))


def norm(p, t):
    return float(np.sqrt(max(inner(p, t, t), 0.0)))


def tangent_violation(p, t):
    dK = p.constraint.tangent_violation(p.H, t.K)
    dV = float(np.linalg.norm(p.V.T @ t.V_p))
    return max(dK, dV)


def clean_tangent(p, t, tol=TANGENT_CLEAN_TOL):
    """Re-project a representation that drifted away from the tangent space."""
    if tangent_violation(p, t) <= tol:
        return t
    return MhTangent(p.constraint.project_tangent(p.H, t.K), p.proj_G(t.V_p))


def project_to_tangent(p, E, Z):
    """Orthogonal projection (in the weighted ambient metric) of ``(E, Z)``."""
    E = np.asarray(E, dtype=float)
    Z = np.asarray(Z, dtype=float)
    K = p.constraint.project_tangent(p.H, E @ p.V)
    V_p = p.proj_G(p.solve_M_right(E.T @ p.H - 2.0 * p.omega * (Z @ p.V)))
    return MhTangent(K, V_p)


def riemannian_gradient(p, egrad):
    egrad = np.asarray(egrad, dtype=float)
    K = p.constraint.project_tangent(p.H, egrad @ p.V)
    V_p = p.proj_G(p.solve_M_right(egrad.T @ p.H))
    return MhTangent(K, V_p)


def riemannian_hessian(p, egrad, ehess_eta, t):
    """Riemannian Hessian applied to ``t``.

    ``ehess_eta`` is the Euclidean Hessian of ``f`` at ``X`` applied to the embedded
    direction ``eta = K V^T + H V_p^T``.
    """
    c = p.constraint
    H, V = p.H, p.V
    egrad = np.asarray(egrad, dtype=float)
    ehess_eta = np.asarray(ehess_eta, dtype=float)
    gV = egrad @ V
    # Hessian on the full constraint set, restricted through V (only K = eta V enters)
    hess_h = c.ehess_to_rhess(H, gV, ehess_eta @ V, t.K)
    gVp = egrad @ t.V_p
    W_gVp = gVp - H @ p.solve_M_left(H.T @ gVp)
    W_K = t.K - H @ p.solve_M_left(H.T @ t.K)
    K_bar = hess_h + c.project_tangent(H, W_gVp)
    normal = c.project_normal(H, gV)
    core = -t.V_p @ (normal.T @ H) + ehess_eta.T @ H + egrad.T @ W_K
    V_bar = p.proj_G(p.solve_M_right(core))
    return MhTangent(K_bar, V_bar)


def _with_point(p, H, V):
    return MhPoint(p.constraint, H, V, p.omega, check=False)


def cayley_apply(V, Z, Y):
    """``Pi(V, Z) Y`` where ``Pi`` is the Cayley transform of the skew generator of ``Z``.

    The generator ``W = P Z V^T - V Z^T P`` with ``P = I - V V^T / 2`` has rank at most
    ``2r``, so the inverse is applied through a ``2r x 2r`` solve.
    """
    PZ = Z - 0.5 * V @ (V.T @ Z)
    A = np.hstack([PZ, V])
    B = np.hstack([V, -PZ])
    small = np.eye(A.shape[1]) - 0.5 * (B.T @ A)
    Y1 = Y + 0.5 * A @ (B.T @ Y)
    try:
        if np.linalg.cond(small) > 1e14:
            raise np.linalg.LinAlgError
        corr = np.linalg.solve(small, B.T @ Y1)
    except np.linalg.LinAlgError as exc:
        raise CayleySingular("I - W/2 is numerically singular") from exc
    return Y1 + 0.5 * A @ corr


def stiefel_retract(V, V_p, rule="polar"):
    if rule == "polar":
        return polar_factor(V + V_p)
    if rule == "cayley":
        return cayley_apply(V, V_p, V)
    raise InvalidInput(f"unknown Stiefel retraction {rule!r}")


def retract_first_order(p, t, stiefel_rule="polar"):
    """Assemble the constraint retraction on ``H`` with a Stiefel retraction on ``V``."""
    t = clean_tangent(p, t)
    H_new = p.constraint.retract(p.H, t.K)
    V_new = stiefel_retract(p.V, t.V_p, stiefel_rule)
    return _with_point(p, H_new, V_new)


def retract_second_order(p, t):
    """Second-order retraction: polar step on ``V`` and metric projection on ``H``."""
    t = clean_tangent(p, t)
    H, V, K, V_p = p.H, p.V, t.K, t.V_p
    L = V + V_p - V_p @ p.solve_M_right(K.T @ H)
    W = polar_factor(L)
    VtW = V.T @ W
    Y = (H + K) @ VtW + H @ (V_p.T @ W)
    return _with_point(p, p.constraint.project_point(Y), W)


RETRACTIONS = {
    "first_order": retract_first_order,
    "second_order": retract_second_order,
}


def retract(p, t, kind="second_order", stiefel_rule="polar"):
    if kind == "first_order":
        return retract_first_order(p, t, stiefel_rule)
    if kind == "second_order":
        return retract_second_order(p, t)
    raise InvalidInput(f"unknown retraction {kind!r}")


def transport_projection(p, t_dir, t, retraction="second_order", target=None):
    """Projection of the embedded ``t`` onto the tangent space at the retracted point."""
    if target is None:
        target = retract(p, t_dir, retraction)
    H, V, K, V_p = p.H, p.V, t.K, t.V_p
    Ht, Vt = target.H, target.V
    VtVt = V.T @ Vt
    VptVt = V_p.T @ Vt
    K_bar = target.constraint.project_tangent(Ht, K @ VtVt + H @ VptVt)
    core = (V @ (K.T @ Ht) + V_p @ (H.T @ Ht)
            + 2.0 * p.omega * (V @ VptVt + V_p @ VtVt))
    V_bar = target.proj_G(target.solve_M_right(core))
    return MhTangent(K_bar, V_bar)


def transport_decoupled(p, t_dir, t, stiefel_rule="polar", target=None):
    """Componentwise projection transports on the constraint factor and on ``V``."""
    if target is None:
        target = retract_first_order(p, t_dir, stiefel_rule)
    K_bar = target.constraint.project_tangent(target.H, t.K)
    return MhTangent(K_bar, target.proj_G(t.V_p))


def isometry_guaranteed(constraint):
    return constraint.kind == "euclidean"


def transport_isometric(p, t_dir, t, target=None):
    """Cayley-based transport preserving the weighted metric.

    Isometric exactly when the constraint factor transport is isometric, which is
    only guaranteed for the ``euclidean`` kind; other kinds fall back to the
    projection transport on ``H`` (see ``isometry_guaranteed``).
    """
    if target is None:
        target = retract_first_order(p, t_dir, "cayley")
    if p.constraint.kind == "euclidean":
        K_bar = t.K.copy()
    else:
        K_bar = target.constraint.project_tangent(target.H, t.K)
    moved = cayley_apply(p.V, t_dir.V_p, t.V_p @ spd_power(p.M, 0.5))
    V_bar = moved @ spd_power(target.M, -0.5)
    return MhTangent(K_bar, V_bar)


def random_point(kind, m, n, r, omega=DEFAULT_OMEGA, seed=None):
    constraint = kind if isinstance(kind, ConstraintManifold) else ConstraintManifold.from_key(kind, m)
    if constraint.m != m:
        raise InvalidInput("constraint row count does not match m")
    if not 1 <= r <= min(m, n):
        raise InvalidInput(f"rank bound {r} out of range for {m}x{n}")
    rng = np.random.default_rng(seed)
    H = constraint.random_point(r, rng)
    V = qr_orthonormalize(rng.standard_normal((n, r)))
    return MhPoint(constraint, H, V, omega)


def random_tangent(p, rng):
    K = p.constraint.project_tangent(p.H, rng.standard_normal(p.H.shape))
    V_p = p.proj_G(rng.standard_normal(p.V.shape))
    return MhTangent(K, V_p)


def check_first_order_stationary(p, egrad, tol):
    residual = norm(p, riemannian_gradient(p, egrad))
    return residual <= tol, residual


def manifold_dim(constraint, n, r):
    return (constraint.m + n - r) * r - constraint.q


__all__ = [
    "MhPoint", "MhTangent", "embed", "embed_tangent", "inner", "norm",
    "project_to_tangent", "riemannian_gradient", "riemannian_hessian",
    "retract_first_order", "retract_second_order", "retract", "transport_projection",
    "transport_decoupled", "transport_isometric", "random_point", "random_tangent",
    "check_first_order_stationary", "zero_tangent", "manifold_dim",
]
