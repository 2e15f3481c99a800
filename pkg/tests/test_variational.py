import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spacedec import manifold as mh
from spacedec import variational as va
from spacedec.constraints import ConstraintManifold
from spacedec.errors import InfeasiblePoint, InvalidInput
from spacedec.linalg import qr_orthonormalize, truncate_rank

from conftest import KINDS

M, N = 6, 7


def feasible(kind, s, rng, m=M, n=N):
    """Feasible ``X`` of exact rank ``s``."""
    c = ConstraintManifold.from_key(kind, m)
    H = c.random_point(s, rng)
    V = qr_orthonormalize(rng.standard_normal((n, s)))
    return c, H @ V.T


def min_rank(kind):
    return 2 if kind.startswith("stiefel") else 1


def bases(X, s):
    U, _, Vt = np.linalg.svd(X)
    return U[:, :s], U[:, s:], Vt[:s].T, Vt[s:].T


def residual_derivative(c, X, T, h=1e-6):
    d = (c.residual(X + h * T) - c.residual(X - h * T)) / (2 * h)
    return float(np.linalg.norm(d))


# -- low-rank cone --------------------------------------------------------------------------------

def test_full_rank_has_no_truncation_term(rng):
    X = rng.standard_normal((M, 3)) @ rng.standard_normal((3, N))
    E = rng.standard_normal((M, N))
    U, _, V, _ = bases(X, 3)
    PV, PU = V @ V.T, U @ U.T
    expected = E @ PV + PU @ E @ (np.eye(N) - PV)
    assert np.allclose(va.project_tangent_cone_lowrank(X, E, 3), expected, atol=1e-12)


def test_origin_gives_truncation(rng):
    E = rng.standard_normal((M, N))
    out = va.project_tangent_cone_lowrank(np.zeros((M, N)), E, 2)
    assert np.allclose(out, truncate_rank(E, 2), atol=1e-13)


def test_lowrank_beats_sampled_cone_elements(rng):
    X = rng.standard_normal((M, 2)) @ rng.standard_normal((2, N))
    E = rng.standard_normal((M, N))
    r, s = 4, 2
    out = va.project_tangent_cone_lowrank(X, E, r)
    U, Up, V, Vp = bases(X, s)
    best = 0.0
    for _ in range(1000):
        T = (rng.standard_normal((M, s)) @ V.T + U @ rng.standard_normal((s, N - s)) @ Vp.T
             + Up @ rng.standard_normal((M - s, r - s)) @ rng.standard_normal((r - s, N - s)) @ Vp.T)
        best = max(best, max(0.0, float(np.vdot(E, T))) / np.linalg.norm(T))
    assert np.linalg.norm(out) >= best
    res = E - out
    assert abs(np.vdot(res, E @ V @ V.T)) <= 1e-10
    assert abs(np.vdot(res, U @ U.T @ E @ Vp @ Vp.T)) <= 1e-10


def test_rank_bound_errors(rng):
    X = rng.standard_normal((M, 3)) @ rng.standard_normal((3, N))
    with pytest.raises(InvalidInput):
        va.project_tangent_cone_lowrank(X, np.zeros((M, N)), 2)
    with pytest.raises(InvalidInput):
        va.project_tangent_cone_lowrank(X, np.zeros((M, N)), 10)
    with pytest.raises(InvalidInput):
        va.project_tangent_cone_lowrank(X, np.zeros((M, N + 1)), 3)


# -- intersection cone ----------------------------------------------------------------------------

def test_euclidean_matches_lowrank(rng):
    for s in (0, 1, 2, 3):
        X = rng.standard_normal((M, s)) @ rng.standard_normal((s, N))
        E = rng.standard_normal((M, N))
        a = va.project_tangent_cone_intersection(X, E, 3, "euclidean")
        b = va.project_tangent_cone_lowrank(X, E, 3)
        assert np.linalg.norm(a - b) <= 1e-12


def test_oblique_normal_direction_has_no_first_term(rng):
    _, X = feasible("oblique", 3, rng)
    E = np.diag(rng.standard_normal(M)) @ X
    first, mixed, low = va.cone_components(X, E, 3, "oblique")
    assert np.linalg.norm(first) <= 1e-12
    assert np.linalg.norm(first + mixed + low) <= 1e-12


@pytest.mark.parametrize("r_extra", [0, 1, 2])
def test_intersection_membership(kind, r_extra, rng):
    s = min_rank(kind) + 1 - (1 if r_extra == 2 else 0)
    r = s + r_extra
    c, X = feasible(kind, s, rng)
    E = rng.standard_normal((M, N))
    out = va.project_tangent_cone_intersection(X, E, r, kind)
    U, Up, V, Vp = bases(X, s)
    assert np.linalg.matrix_rank(Up.T @ out @ Vp, tol=1e-10) <= r - s
    assert residual_derivative(c, X, out) <= 1e-6 * max(1.0, np.linalg.norm(out))


def test_components_are_orthogonal(kind, rng):
    for s, r in ((min_rank(kind), 3), (3, 3)):
        _, X = feasible(kind, s, rng)
        parts = va.cone_components(X, rng.standard_normal((M, N)), r, kind)
        for i in range(3):
            for j in range(i + 1, 3):
                assert abs(np.vdot(parts[i], parts[j])) <= 1e-12


def test_projection_is_idempotent(kind, rng):
    _, X = feasible(kind, min_rank(kind), rng)
    P = va.project_tangent_cone_intersection(X, rng.standard_normal((M, N)), 3, kind)
    again = va.project_tangent_cone_intersection(X, P, 3, kind)
    assert np.linalg.norm(again - P) <= 1e-10 * max(1.0, np.linalg.norm(P))


def test_infeasible_point_rejected(rng):
    X = rng.standard_normal((M, 2)) @ rng.standard_normal((2, N))
    with pytest.raises(InfeasiblePoint) as info:
        va.project_tangent_cone_intersection(X, X, 3, "oblique")
    assert info.value.residual > 1e-8


# -- stationarity -------------------------------------------------------------------------------------

def test_zero_gradient_is_stationary(kind, rng):
    _, X = feasible(kind, 3, rng)
    assert va.stationarity_measure(X, np.zeros((M, N)), 3, kind) == 0.0


def test_feasible_unconstrained_minimizer(rng):
    _, X = feasible("oblique", 2, rng)
    # f = 1/2 ||X - X0||^2 with X0 = X is minimized at X itself.
    assert va.stationarity_measure(X, X - X, 3, "oblique") <= 1e-10


def test_full_rank_consistency_with_manifold_gradient(kind, rng):
    for seed in range(10):
        p = mh.random_point(kind, M, N, 3, 0.5, seed)
        E = rng.standard_normal((M, N))
        E = E - va.project_tangent_cone_intersection(p.X, E, 3, kind, rank=3)
        assert mh.norm(p, mh.riemannian_gradient(p, E)) <= 1e-10
        assert va.stationarity_measure(p.X, E, 3, kind) <= 1e-8


def test_report_exposes_both_ranks(rng):
    _, X = feasible("oblique", 2, rng)
    E = rng.standard_normal((M, N))
    rep = va.stationarity_report(X, E, 3, "oblique")
    assert rep["detected_rank"] == 2
    assert rep["measure_detected"] == va.stationarity_measure(X, E, 3, "oblique", rank=2)
    assert rep["measure_forced"] == va.stationarity_measure(X, E, 3, "oblique", rank=3)


def test_rank_deficient_check(kind, rng):
    c, X = feasible(kind, min_rank(kind), rng)
    assert va.check_rank_deficient_stationarity(X, np.zeros((M, N)), kind)
    tangent = c.project_tangent(X, rng.standard_normal((M, N)))
    assert not va.check_rank_deficient_stationarity(X, tangent, kind)


def test_rank_deficient_check_implies_small_measure(kind, rng):
    if kind == "euclidean":
        pytest.skip("the normal space of the whole space is trivial")
    for _ in range(10):
        c, X = feasible(kind, min_rank(kind), rng)
        Z = rng.standard_normal((M, N))
        egrad = Z - c.project_tangent(X, Z)
        tol = 1e-8
        assert va.check_rank_deficient_stationarity(X, egrad, kind, tol)
        assert va.stationarity_measure(X, egrad, 3, kind) <= tol * (1 + np.linalg.norm(egrad))


def test_rank_deficient_check_rejects_infeasible(rng):
    with pytest.raises(InfeasiblePoint):
        va.check_rank_deficient_stationarity(np.ones((M, N)), np.zeros((M, N)), "fsphere")


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(KINDS), st.integers(0, 2), st.integers(0, 2 ** 32 - 1))
def test_measure_is_norm_of_projection(kind, extra, seed):
    rng = np.random.default_rng(seed)
    s = min_rank(kind)
    _, X = feasible(kind, s, rng)
    egrad = rng.standard_normal((M, N))
    r = s + extra
    val = va.stationarity_measure(X, egrad, r, kind)
    proj = va.project_tangent_cone_intersection(X, -egrad, r, kind)
    assert val == pytest.approx(np.linalg.norm(proj), rel=1e-14)
    assert val <= np.linalg.norm(egrad) * (1 + 1e-12)
