"""Orthogonally invariant constraint sets and the manifolds they induce.

A constraint ``h(X) = 0`` with ``h(XQ) = h(X)`` for every orthogonal ``Q`` restricts
to any column count ``s``: the level set ``H^s = {H in R^{m x s} : h^s(H) = 0}`` is
again a manifold and every operation below works for arbitrary ``s``. The full
constraint set on ``R^{m x n}`` is simply the case ``s = n``.

Four instances ship: ``euclidean`` (no constraint), ``oblique`` (unit rows),
``fsphere`` (unit Frobenius norm) and ``stiefel:<k>x<p>`` (``k`` row blocks of
``p`` rows, each with orthonormal rows).
"""
from dataclasses import dataclass
import re

import numpy as np

from .errors import (EmptyManifold, InvalidInput, InvalidTangent,
                     ProjectionUndefined, RankDeficient)
from .linalg import polar_factor

KINDS = ("euclidean", "oblique", "fsphere", "stiefel")

FEASIBILITY_TOL = 1e-10
TANGENT_TOL = 1e-8


@dataclass(frozen=True)
class ConstraintManifold:
    kind: str
    m: int
    p: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidInput(f"unknown constraint kind {self.kind!r}")
        if self.m < 1:
            raise InvalidInput("ambient row count must be positive")
        if self.kind == "stiefel" and (self.p < 1 or self.m % self.p):
            raise InvalidInput(f"{self.m} rows cannot be split into blocks of {self.p}")

    @classmethod
    def from_key(cls, key, m):
        """Parse a config key: ``euclidean``, ``oblique``, ``fsphere`` or ``stiefel:<k>x<p>``."""
        key = key.strip().lower()
        if key in ("euclidean", "oblique", "fsphere"):
            return cls(key, m)
        match = re.fullmatch(r"stiefel:(\d+)x(\d+)", key)
        if match is None:
            raise InvalidInput(f"unknown constraint key {key!r}")
        k, p = int(match.group(1)), int(match.group(2))
        if k * p != m:
            raise InvalidInput(f"stiefel:{k}x{p} needs {k * p} rows, got {m}")
        return cls("stiefel", m, p)

    @property
    def key(self):
        if self.kind == "stiefel":
            return f"stiefel:{self.blocks}x{self.p}"
        return self.kind

    @property
    def blocks(self):
        return self.m // self.p if self.kind == "stiefel" else 0

    @property
    def q(self):
        """Dimension of the codomain of ``h``."""
        if self.kind == "euclidean":
            return 0
        if self.kind == "oblique":
            return self.m
        if self.kind == "fsphere":
            return 1
        return self.blocks * self.p * (self.p + 1) // 2

    def is_nonempty(self, s):
        if self.kind == "euclidean":
            return True
        if self.kind == "stiefel":
            return s >= self.p
        return s >= 1

    def check_nonempty(self, s):
        if not self.is_nonempty(s):
            raise EmptyManifold(f"{self.key} admits no {self.m}x{s} feasible matrix")

    def dim(self, s):
        self.check_nonempty(s)
        return self.m * s - self.q

    def _check_shape(self, Y, name="H"):
        Y = np.asarray(Y, dtype=float)
        if Y.ndim != 2 or Y.shape[0] != self.m:
            raise InvalidInput(f"{name} must have {self.m} rows, got shape {Y.shape}")
        return Y

    def _blocks(self, Y):
        return Y.reshape(self.blocks, self.p, Y.shape[1])

    # -- level set -----------------------------------------------------------------

    def residual(self, H):
        H = self._check_shape(H)
        if self.kind == "euclidean":
            return np.zeros(0)
        if self.kind == "oblique":
            return np.einsum("ij,ij->i", H, H) - 1.0
        if self.kind == "fsphere":
            return np.array([np.vdot(H, H) - 1.0])
        B = self._blocks(H)
        gram = B @ B.transpose(0, 2, 1) - np.eye(self.p)
        iu = np.triu_indices(self.p)
        return gram[:, iu[0], iu[1]].ravel()

    def infeasibility(self, H):
        r = self.residual(H)
        return float(np.linalg.norm(r)) if r.size else 0.0

    def is_feasible(self, H, tol=FEASIBILITY_TOL):
        return self.infeasibility(H) <= tol

    def project_point(self, Y):
        """Nearest feasible matrix in the Frobenius distance."""
        Y = self._check_shape(Y, "Y")
        if self.kind == "euclidean":
            return Y.copy()
        if self.kind == "oblique":
            norms = np.linalg.norm(Y, axis=1)
            if np.any(norms == 0.0) or not np.all(np.isfinite(norms)):
                raise ProjectionUndefined("row normalization of a zero row")
            return Y / norms[:, None]
        if self.kind == "fsphere":
            nrm = np.linalg.norm(Y)
            if nrm == 0.0 or not np.isfinite(nrm):
                raise ProjectionUndefined("normalization of the zero matrix")
            return Y / nrm
        out = np.empty_like(Y)
        ob = self._blocks(out)
        for i, B in enumerate(self._blocks(Y)):
            try:
                ob[i] = polar_factor(B.T).T
            except RankDeficient as exc:
                raise ProjectionUndefined(f"row block {i} is rank deficient") from exc
        return out

    # -- first-order geometry ------------------------------------------------------

    def project_tangent(self, H, Y):
        """Orthogonal projection of ``Y`` onto the tangent space at feasible ``H``."""
        H = self._check_shape(H)
        Y = self._check_shape(Y, "Y")
        if Y.shape != H.shape:
            raise InvalidInput(f"shape mismatch {Y.shape} vs {H.shape}")
        if self.kind == "euclidean":
            return Y.copy()
        if self.kind == "oblique":
            return Y - np.einsum("ij,ij->i", H, Y)[:, None] * H
        if self.kind == "fsphere":
            return Y - np.vdot(H, Y) * H
        HB, YB = self._blocks(H), self._blocks(Y)
        S = YB @ HB.transpose(0, 2, 1)
        S = 0.5 * (S + S.transpose(0, 2, 1))
        return (YB - S @ HB).reshape(Y.shape)

    def project_normal(self, H, Y):
        return np.asarray(Y, dtype=float) - self.project_tangent(H, Y)

    def tangent_violation(self, H, Y):
        Y = np.asarray(Y, dtype=float)
        return float(np.linalg.norm(Y - self.project_tangent(H, Y)))

    def retract(self, H, K):
        """Projection-like retraction ``H + K`` followed by the metric projection."""
        return self.project_point(np.asarray(H, dtype=float) + K)

    def transport(self, H, K_dir, K):
        """Projection-based transport of ``K`` to the point ``retract(H, K_dir)``."""
        return self.project_tangent(self.retract(H, K_dir), K)

    # -- second-order geometry -----------------------------------------------------

    def weingarten(self, H, eta, egrad):
        """Curvature term contributed by the normal part of ``egrad`` along ``eta``.

        Only depends on ``egrad`` through its normal component; the caller projects
        the result back onto the tangent space.
        """
        if self.kind == "euclidean":
            return np.zeros_like(eta)
        if self.kind == "oblique":
            return -np.einsum("ij,ij->i", H, egrad)[:, None] * eta
        if self.kind == "fsphere":
            return -np.vdot(H, egrad) * eta
        HB, GB = self._blocks(H), self._blocks(egrad)
        S = HB @ GB.transpose(0, 2, 1)
        S = 0.5 * (S + S.transpose(0, 2, 1))
        return -(S @ self._blocks(eta)).reshape(eta.shape)

    def ehess_to_rhess(self, H, egrad, ehess_eta, eta):
        """Riemannian Hessian of ``f`` restricted to the level set, applied to ``eta``."""
        H = self._check_shape(H)
        eta = self._check_shape(eta, "eta")
        scale = 1.0 + float(np.linalg.norm(eta))
        if self.tangent_violation(H, eta) > TANGENT_TOL * scale:
            raise InvalidTangent("direction is not tangent to the constraint manifold")
        if self.kind == "euclidean":
            return np.array(ehess_eta, dtype=float)
        return self.project_tangent(H, ehess_eta + self.weingarten(H, eta, egrad))

    def random_point(self, s, rng):
        self.check_nonempty(s)
        return self.project_point(rng.standard_normal((self.m, s)))
