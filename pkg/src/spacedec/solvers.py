"""Riemannian gradient descent and trust-region solvers on the space-decoupling manifold."""
from dataclasses import dataclass, field
from enum import Enum
import logging
import math
import time
from typing import Callable, Optional

import numpy as np

from . import manifold as mh
from .errors import (CayleySingular, InvalidConfig, ObjectiveError,
                     ProjectionUndefined, RankDeficient)
from .variational import stationarity_report

log = logging.getLogger(__name__)

_STEP_FAILURES = (ProjectionUndefined, RankDeficient, CayleySingular)


class Termination(str, Enum):
    GRAD_TOL = "GradTol"
    MAX_ITERS = "MaxIters"
    TIME_BUDGET = "TimeBudget"
    STEP_COLLAPSE = "StepCollapse"


@dataclass
class ArmijoConfig:
    initial_step: float = 1.0
    backtrack_factor: float = 0.5
    sufficient_decrease: float = 1e-4
    max_backtracks: int = 50


@dataclass
class TrustRegionConfig:
    initial_radius: Optional[float] = None   # default: max_radius / 8
    max_radius: Optional[float] = None       # default: sqrt(manifold dimension)
    eta_accept: float = 0.1
    tcg_max_iters: Optional[int] = None      # default: manifold dimension
    tcg_kappa: float = 0.1
    tcg_theta: float = 1.0
    min_radius: float = 1e-14


@dataclass
class SolverConfig:
    max_iters: int = 500
    grad_tol: float = 1e-10
    time_budget: float = math.inf
    armijo: ArmijoConfig = field(default_factory=ArmijoConfig)
    tr: TrustRegionConfig = field(default_factory=TrustRegionConfig)
    retraction: Optional[str] = None         # default: first_order (RGD), second_order (RTR)
    stiefel_rule: str = "polar"
    transport: str = "projection"

    def validate(self):
        a, t = self.armijo, self.tr
        checks = [
            (self.max_iters >= 0, "max_iters must be nonnegative"),
            (self.grad_tol > 0, "grad_tol must be positive"),
            (self.time_budget > 0, "time_budget must be positive"),
            (a.initial_step > 0, "armijo.initial_step must be positive"),
            (0 < a.backtrack_factor < 1, "armijo.backtrack_factor must lie in (0, 1)"),
            (0 < a.sufficient_decrease < 1, "armijo.sufficient_decrease must lie in (0, 1)"),
            (a.max_backtracks >= 1, "armijo.max_backtracks must be positive"),
            (0 <= t.eta_accept < 0.25, "tr.eta_accept must lie in [0, 1/4)"),
            (0 < t.tcg_kappa < 1, "tr.tcg_kappa must lie in (0, 1)"),
            (t.tcg_theta > 0, "tr.tcg_theta must be positive"),
            (t.max_radius is None or t.max_radius > 0, "tr.max_radius must be positive"),
            (t.initial_radius is None or t.initial_radius > 0, "tr.initial_radius must be positive"),
            (self.retraction in (None, "first_order", "second_order"), "unknown retraction"),
            (self.stiefel_rule in ("polar", "cayley"), "unknown Stiefel retraction"),
            (self.transport in ("projection", "decoupled", "isometric"), "unknown transport"),
        ]
        for ok, msg in checks:
            if not ok:
                raise InvalidConfig(msg)
        return self


@dataclass
class IterRecord:
    iteration: int
    f: float
    grad_norm: float
    step: float
    wall_time: float
    accepted: bool = True
    constraint_residual: float = 0.0


@dataclass
class SolveReport:
    final_point: mh.MhPoint
    records: list
    termination: Termination
    final_stationarity: Optional[dict] = None

    @property
    def f(self):
        return self.records[-1].f

    @property
    def grad_norm(self):
        return self.records[-1].grad_norm

    @property
    def iterations(self):
        return self.records[-1].iteration


class _Evaluator:
    """Objective calls wrapped with iterate context and cached per point."""

    def __init__(self, problem):
        self.problem = problem
        self.iteration = 0

    def _call(self, fn, *args):
        try:
            out = fn(*args)
        except Exception as exc:
            raise ObjectiveError(f"objective failed at iteration {self.iteration}: {exc}",
                                 self.iteration) from exc
        return out

    def value(self, X):
        return float(self._call(self.problem.value, X))

    def egrad(self, X):
        return np.asarray(self._call(self.problem.egrad, X), dtype=float)

    def ehess(self, X, eta):
        if self.problem.ehess is None:
            raise InvalidConfig("the trust-region solver needs a Euclidean Hessian")
        return np.asarray(self._call(self.problem.ehess, X, eta), dtype=float)


def _residual(p):
    return p.constraint.infeasibility(p.H)


def _finish(point, records, reason, evaluator, certify):
    stat = None
    if certify:
        X = point.X
        stat = stationarity_report(X, evaluator.egrad(X), point.r, point.constraint)
    log.info("terminated: %s after %d iterations (f=%.6e, |grad|=%.3e)", reason.value,
             records[-1].iteration, records[-1].f, records[-1].grad_norm)
    return SolveReport(point, records, reason, stat)


def solve_rgd(problem, start, cfg=None, callback: Optional[Callable] = None, certify=True):
    """Gradient descent with Armijo backtracking and the first-order retraction."""
    cfg = (cfg or SolverConfig()).validate()
    arm = cfg.armijo
    retraction = cfg.retraction or "first_order"
    ev = _Evaluator(problem)
    t0 = time.perf_counter()

    x = start
    X = x.X
    f = ev.value(X)
    if not np.isfinite(f):
        raise ObjectiveError("objective is not finite at the starting point", 0)
    grad = mh.riemannian_gradient(x, ev.egrad(X))
    gnorm = mh.norm(x, grad)
    records = [IterRecord(0, f, gnorm, 0.0, 0.0, True, _residual(x))]
    if callback:
        callback(0, f, gnorm)

    alpha_prev = arm.initial_step / 2.0
    k = 0
    while True:
        if gnorm <= cfg.grad_tol:
            reason = Termination.GRAD_TOL
            break
        if k >= cfg.max_iters:
            reason = Termination.MAX_ITERS
            break
        if time.perf_counter() - t0 > cfg.time_budget:
            reason = Termination.TIME_BUDGET
            break
        k += 1
        ev.iteration = k
        alpha = min(2.0 * alpha_prev, arm.initial_step)
        target = f - arm.sufficient_decrease * gnorm ** 2 * alpha
        accepted = None
        for _ in range(arm.max_backtracks):
            try:
                trial = mh.retract(x, -alpha * grad, retraction, cfg.stiefel_rule)
                f_trial = ev.value(trial.X)
            except _STEP_FAILURES:
                f_trial = math.inf
            if np.isfinite(f_trial) and f_trial <= target and f_trial < f:
                accepted = trial
                break
            alpha *= arm.backtrack_factor
            target = f - arm.sufficient_decrease * gnorm ** 2 * alpha
        if accepted is None:
            reason = Termination.STEP_COLLAPSE
            break
        x, f, alpha_prev = accepted, f_trial, alpha
        X = x.X
        grad = mh.riemannian_gradient(x, ev.egrad(X))
        gnorm = mh.norm(x, grad)
        records.append(IterRecord(k, f, gnorm, alpha, time.perf_counter() - t0, True,
                                  _residual(x)))
        if callback:
            callback(k, f, gnorm)
    return _finish(x, records, reason, ev, certify)


def rounding_guard(f):
    """Tolerance below which two objective values are treated as equal by RTR."""
    return max(1.0, abs(f)) * np.finfo(float).eps * 1e3


def truncated_cg(p, grad, hess, radius, kappa, theta, max_iters):
    """Steihaug-Toint truncated conjugate gradients for the trust-region model.

    Returns the step, its Hessian image and whether the step reached the boundary.
    Works in the manifold metric; no preconditioner.
    """
    inner = lambda a, b: mh.inner(p, a, b)
    eta = mh.zero_tangent(p)
    Heta = mh.zero_tangent(p)
    r = grad
    r_r = inner(r, r)
    norm_r0 = math.sqrt(r_r)
    d = -r
    e_Pe, e_Pd, d_Pd = 0.0, 0.0, r_r
    model = 0.0
    for _ in range(max_iters):
        Hd = hess(d)
        d_Hd = inner(d, Hd)
        alpha = r_r / d_Hd if d_Hd != 0 else math.inf
        e_Pe_new = e_Pe + 2.0 * alpha * e_Pd + alpha ** 2 * d_Pd
        if d_Hd <= 0 or e_Pe_new >= radius ** 2:
            tau = (-e_Pd + math.sqrt(max(e_Pd ** 2 + d_Pd * (radius ** 2 - e_Pe), 0.0))) / d_Pd
            return eta + tau * d, Heta + tau * Hd, True
        new_eta = eta + alpha * d
        new_Heta = Heta + alpha * Hd
        new_model = inner(new_eta, grad) + 0.5 * inner(new_eta, new_Heta)
        if new_model >= model:
            break
        eta, Heta, model, e_Pe = new_eta, new_Heta, new_model, e_Pe_new
        r = r + alpha * Hd
        r_r_old, r_r = r_r, inner(r, r)
        if math.sqrt(r_r) <= norm_r0 * min(norm_r0 ** theta, kappa):
            break
        beta = r_r / r_r_old
        d = -r + beta * d
        e_Pd = beta * (e_Pd + alpha * d_Pd)
        d_Pd = r_r + beta ** 2 * d_Pd
    return eta, Heta, False


def solve_rtr(problem, start, cfg=None, callback: Optional[Callable] = None, certify=True):
    """Riemannian trust-region method with the second-order retraction."""
    cfg = (cfg or SolverConfig()).validate()
    trc = cfg.tr
    retraction = cfg.retraction or "second_order"
    ev = _Evaluator(problem)
    t0 = time.perf_counter()

    dim = mh.manifold_dim(start.constraint, start.n, start.r)
    max_radius = trc.max_radius or math.sqrt(dim)
    radius = trc.initial_radius or max_radius / 8.0
    max_inner = trc.tcg_max_iters or dim

    x = start
    X = x.X
    f = ev.value(X)
    if not np.isfinite(f):
        raise ObjectiveError("objective is not finite at the starting point", 0)
    egrad = ev.egrad(X)
    grad = mh.riemannian_gradient(x, egrad)
    gnorm = mh.norm(x, grad)
    records = [IterRecord(0, f, gnorm, radius, 0.0, True, _residual(x))]
    if callback:
        callback(0, f, gnorm)

    k = 0
    while True:
        if gnorm <= cfg.grad_tol:
            reason = Termination.GRAD_TOL
            break
        if k >= cfg.max_iters:
            reason = Termination.MAX_ITERS
            break
        if time.perf_counter() - t0 > cfg.time_budget:
            reason = Termination.TIME_BUDGET
            break
        if radius < trc.min_radius:
            reason = Termination.STEP_COLLAPSE
            break
        k += 1
        ev.iteration = k

        def hess(t, x=x, X=X, egrad=egrad):
            # CG recurrences accumulate rounding off the tangent space; re-project.
            t = mh.clean_tangent(x, t)
            eta, _ = mh.embed_tangent(x, t)
            return mh.riemannian_hessian(x, egrad, ev.ehess(X, eta), t)

        eta, Heta, at_boundary = truncated_cg(x, grad, hess, radius, trc.tcg_kappa,
                                              trc.tcg_theta, max_inner)
        eta = mh.clean_tangent(x, eta)
        model_decrease = -(mh.inner(x, grad, eta) + 0.5 * mh.inner(x, eta, Heta))
        try:
            trial = mh.retract(x, eta, retraction, cfg.stiefel_rule)
            f_trial = ev.value(trial.X)
        except _STEP_FAILURES:
            trial, f_trial = None, math.inf
        # Differences of f below this guard are rounding noise, both in rho and in
        # the monotonicity test.
        reg = rounding_guard(f)
        if np.isfinite(f_trial):
            rho = (f - f_trial + reg) / (model_decrease + reg)
        else:
            rho = -math.inf

        accepted = model_decrease > 0 and rho > trc.eta_accept and f_trial <= f + reg
        # A rejected step always shrinks the region; otherwise the rounding guard in
        # rho can keep the radius fixed while the same step is rejected forever.
        if rho < 0.25 or not accepted:
            radius /= 4.0
        elif rho > 0.75 and at_boundary:
            radius = min(2.0 * radius, max_radius)

        if accepted:
            x, f = trial, f_trial
            X = x.X
            egrad = ev.egrad(X)
            grad = mh.riemannian_gradient(x, egrad)
            gnorm = mh.norm(x, grad)
        records.append(IterRecord(k, f, gnorm, radius, time.perf_counter() - t0, accepted,
                                  _residual(x)))
        if callback:
            callback(k, f, gnorm)
    return _finish(x, records, reason, ev, certify)


SOLVERS = {"rgd": solve_rgd, "rtr": solve_rtr}
