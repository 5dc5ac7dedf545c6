import json
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import grid_argmin, lp_l1, nuclear_sdp
from softrec.dictionary import gauge_atomic_norm, random_dictionary
from softrec.exceptions import NumericError, ParameterError, ValidationError
from softrec.solvers import (EqualityConstrainedProblem, GroupL12, L1, Nuclear, SolveResult, dense_svd,
                             prox_group_l12, prox_l1, prox_nuclear, solve_equality_constrained)

seeds = st.integers(0, 2 ** 32 - 1)
thetas = st.floats(1e-3, 3)


# -- prox operators -------------------------------------------------------------

def test_prox_l1_examples():
    np.testing.assert_allclose(prox_l1(np.array([5.0]), 2), [3])
    np.testing.assert_array_equal(prox_l1(np.array([0.5, -1.0, 0.2]), 1), 0)
    np.testing.assert_allclose(prox_l1(np.array([-1.5]), 1), [-0.5])


def test_prox_l1_keeps_phase():
    out = prox_l1(np.array([3 + 4j]), 1)
    np.testing.assert_allclose(out, [(3 + 4j) * 4 / 5])


@pytest.mark.parametrize("prox", [prox_l1, prox_group_l12, prox_nuclear])
def test_prox_rejects_nonpositive_theta(prox):
    with pytest.raises(ParameterError):
        prox(np.ones((2, 2)), 0)


def test_prox_group_against_grid():
    out = prox_group_l12(np.array([[3.0], [4.0]]), 1)
    np.testing.assert_allclose(out[:, 0], [2.4, 3.2])
    # ray search along the minimizer direction plus a coarse 2-D grid
    xs = np.linspace(0, 5, 501)
    X, Y = np.meshgrid(xs, xs)
    f = 0.5 * ((X - 3) ** 2 + (Y - 4) ** 2) + np.hypot(X, Y)
    k = np.unravel_index(np.argmin(f), f.shape)
    assert abs(X[k] - 2.4) <= 0.01 and abs(Y[k] - 3.2) <= 0.01


def test_prox_group_small_and_identity():
    np.testing.assert_array_equal(prox_group_l12(np.array([[0.3], [0.4]]), 0.5), 0)
    X = np.random.default_rng(0).standard_normal((3, 4))
    np.testing.assert_allclose(prox_group_l12(X, 1e-14), X, atol=1e-13)
    np.testing.assert_array_equal(prox_group_l12(np.zeros((2, 2)), 1), 0)


def test_prox_nuclear_examples():
    np.testing.assert_allclose(prox_nuclear(np.diag([3.0, 1.0]), 2), np.diag([1.0, 0.0]), atol=1e-14)
    # the prox objective over diagonal candidates diag(a, b)
    a, _ = grid_argmin(lambda a: 0.5 * (a - 3) ** 2 + 2 * a, 0, 3, 301)
    b, _ = grid_argmin(lambda b: 0.5 * (b - 1) ** 2 + 2 * b, 0, 3, 301)
    assert (a, b) == (pytest.approx(1), 0)
    X = np.random.default_rng(1).standard_normal((3, 2))
    np.testing.assert_array_equal(prox_nuclear(X, 10.0), 0)
    np.testing.assert_array_equal(prox_nuclear(np.zeros((2, 3)), 1), 0)


def test_prox_nuclear_nonfinite():
    with pytest.raises(NumericError):
        prox_nuclear(np.array([[np.nan, 0], [0, 1]]), 1)


def _vi(prox, reg, X, theta, Y):
    P = prox(X, theta)
    f = lambda Z: 0.5 * np.linalg.norm(Z - X) ** 2 + theta * reg(Z)
    return f(P) <= f(Y) + 1e-12


@given(seeds, thetas)
def test_prox_l1_variational(seed, theta):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal(6) + 1j * rng.standard_normal(6)
    Y = prox_l1(X, theta) + rng.standard_normal(6) * rng.uniform(1e-4, 1)
    assert _vi(prox_l1, lambda z: np.abs(z).sum(), X, theta, Y)


@given(seeds, thetas)
def test_prox_group_variational(seed, theta):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((3, 5))
    Y = prox_group_l12(X, theta) + rng.standard_normal((3, 5)) * rng.uniform(1e-4, 1)
    assert _vi(prox_group_l12, lambda z: np.linalg.norm(z, axis=0).sum(), X, theta, Y)


@given(seeds, thetas)
def test_prox_nuclear_variational(seed, theta):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((4, 3))
    Y = prox_nuclear(X, theta) + rng.standard_normal((4, 3)) * rng.uniform(1e-4, 1)
    assert _vi(prox_nuclear, lambda z: np.linalg.svd(z, compute_uv=False).sum(), X, theta, Y)


# -- SVD ----------------------------------------------------------------------------

def test_svd_examples():
    assert np.allclose(dense_svd(np.eye(3))[1], 1)
    assert np.all(dense_svd(np.zeros((2, 2)))[1] == 0)
    np.testing.assert_allclose(dense_svd(np.array([[0.0, 2.0], [1.0, 0.0]]))[1], [2, 1])


def test_svd_nonfinite():
    with pytest.raises(NumericError):
        dense_svd(np.array([[np.inf]]))


@given(seeds, st.integers(1, 8), st.integers(1, 8), st.booleans())
def test_svd_reconstruction(seed, k, n, cplx):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((k, n)) + (1j * rng.standard_normal((k, n)) if cplx else 0)
    U, S, V = dense_svd(X)
    assert np.linalg.norm((U * S) @ V.conj().T - X) <= 1e-9 * max(np.linalg.norm(X), 1e-300)
    assert np.all(np.diff(S) <= 0) and np.all(S >= 0)
    r = len(S)
    assert np.linalg.norm(U.conj().T @ U - np.eye(r)) <= 1e-9
    assert np.linalg.norm(V.conj().T @ V - np.eye(r)) <= 1e-9


def test_svd_rank_deficient_tall():
    # rank-deficient input on which the divide-and-conquer driver can fail
    rng = np.random.default_rng(0)
    X = rng.standard_normal((60, 5)) @ rng.standard_normal((5, 40))
    U, S, V = dense_svd(X)
    assert np.linalg.norm((U * S) @ V.T - X) <= 1e-9 * np.linalg.norm(X)


# -- solver ---------------------------------------------------------------------------

def test_solve_identity():
    b = np.array([1.0, -2.0, 0.5])
    res = solve_equality_constrained(EqualityConstrainedProblem(np.eye(3), b))
    np.testing.assert_allclose(res.coefficients, b, atol=1e-8)
    assert res.objective == pytest.approx(3.5, abs=1e-8)


def test_solve_one_row():
    res = solve_equality_constrained(EqualityConstrainedProblem(np.array([[1.0, 2.0]]), np.array([2.0])))
    np.testing.assert_allclose(res.coefficients, [0, 1], atol=1e-8)
    assert res.objective == pytest.approx(lp_l1(np.array([[1.0, 2.0]]), [2.0])[0], abs=1e-8)


def test_solve_nuclear_full_observation():
    X = np.outer([1.0, 2.0], [3.0, -1.0])
    res = solve_equality_constrained(EqualityConstrainedProblem(np.eye(4), X.ravel(), Nuclear((2, 2))))
    np.testing.assert_allclose(res.coefficients, X, atol=1e-7)
    assert res.objective == pytest.approx(np.linalg.norm(X, 2), abs=1e-7)


def test_solve_bad_tol():
    with pytest.raises(ParameterError):
        solve_equality_constrained(EqualityConstrainedProblem(np.eye(2), np.ones(2)), tol=0)


def test_problem_validation():
    with pytest.raises(ValidationError):
        EqualityConstrainedProblem(np.eye(2), np.ones(3))
    with pytest.raises(ValidationError):
        EqualityConstrainedProblem(np.eye(4), np.ones(4), Nuclear((3, 3)))
    with pytest.raises(NumericError):
        EqualityConstrainedProblem(np.array([[np.nan]]), np.ones(1))


def test_solve_infeasible_flag():
    A = np.array([[1.0, 1.0], [1.0, 1.0]])
    res = solve_equality_constrained(EqualityConstrainedProblem(A, np.array([1.0, 0.0])))
    assert res.infeasible


def test_solve_max_iter_flag():
    rng = np.random.default_rng(3)
    A = rng.standard_normal((10, 40))
    res = solve_equality_constrained(EqualityConstrainedProblem(A, A @ rng.standard_normal(40)),
                                     tol=1e-14, max_iter=20, polish=False)
    assert not res.converged and res.iterations == 20


@given(seeds, st.booleans())
def test_solver_matches_gauge(seed, cplx):
    rng = np.random.default_rng(seed)
    dic = random_dictionary(rng, 3, int(rng.integers(3, 8)), cplx)
    v = rng.standard_normal(3) + (1j * rng.standard_normal(3) if cplx else 0)
    res = solve_equality_constrained(EqualityConstrainedProblem(dic.matrix, v), tol=1e-10)
    g = gauge_atomic_norm(v, dic)[0]
    assert res.converged and abs(res.objective - g) <= 1e-6 * max(1, g)


@given(seeds)
def test_solver_matches_lp(seed):
    rng = np.random.default_rng(seed)
    m, n = int(rng.integers(2, 8)), int(rng.integers(8, 20))
    A = rng.standard_normal((m, n))
    b = rng.standard_normal(m)
    res = solve_equality_constrained(EqualityConstrainedProblem(A, b), tol=1e-10)
    ref = lp_l1(A, b)[0]
    assert abs(res.objective - ref) <= 1e-6 * max(1, ref)


@given(seeds, st.booleans())
def test_group_singletons_equal_l1(seed, cplx):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((4, 9)) + (1j * rng.standard_normal((4, 9)) if cplx else 0)
    b = A @ (rng.standard_normal(9) * (rng.random(9) < 0.3))
    r1 = solve_equality_constrained(EqualityConstrainedProblem(A, b, L1()), tol=1e-10)
    r2 = solve_equality_constrained(EqualityConstrainedProblem(A, b, GroupL12(np.arange(9))), tol=1e-10)
    assert abs(r1.objective - r2.objective) <= 1e-8 * max(1, r1.objective)
    np.testing.assert_allclose(r1.coefficients, r2.coefficients, atol=1e-8)


def _certified_dual(A, b, lam, reg):
    nu = A.conj().T @ lam
    s = max(1.0, reg.dual_norm(nu))
    return float(np.real(np.vdot(lam, b))) / s, s


@given(seeds, st.sampled_from(["L1", "GroupL12", "Nuclear"]), st.integers(1, 300))
def test_gap_is_a_true_bound(seed, kind, iters):
    rng = np.random.default_rng(seed)
    if kind == "Nuclear":
        reg, n = Nuclear((3, 3)), 9
    elif kind == "GroupL12":
        reg, n = GroupL12(np.repeat(np.arange(4), 3)), 12
    else:
        reg, n = L1(), 12
    A = rng.standard_normal((5, n))
    b = rng.standard_normal(5)
    res = solve_equality_constrained(EqualityConstrainedProblem(A, b, reg), max_iter=iters)
    assert res.duality_gap >= -1e-12
    if res.multiplier is not None:
        dual, s = _certified_dual(A, b, res.multiplier, reg)
        # weak duality at the rhs A x the returned point satisfies exactly
        slack = abs(np.vdot(res.multiplier, b - A @ np.ravel(res.coefficients))) / s
        assert res.objective - dual >= -slack - 1e-12 * max(1, res.objective)
        assert res.duality_gap >= res.objective - dual - slack - 1e-12


def test_nuclear_completion_vs_sdp():
    rng = np.random.default_rng(4)
    X0 = np.outer(rng.standard_normal(4), rng.standard_normal(4))
    mask = rng.random(16) < 0.75
    A = np.eye(16)[mask]
    b = A @ X0.ravel()
    res = solve_equality_constrained(EqualityConstrainedProblem(A, b, Nuclear((4, 4))), tol=1e-9)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        ref, _ = nuclear_sdp(A, b, (4, 4))
    assert res.converged
    assert res.objective == pytest.approx(ref, abs=1e-5)


def test_json_roundtrip_and_trace(tmp_path):
    A = np.array([[1.0, 2.0, 0.5j], [0.0, 1.0, 1.0]])
    prob = EqualityConstrainedProblem(A, np.array([1.0, 1j]), GroupL12([0, 0, 1]))
    prob2 = EqualityConstrainedProblem.from_json(json.loads(json.dumps(prob.to_json())))
    np.testing.assert_array_equal(prob2.operator, prob.operator)
    assert prob2.regularizer.to_json() == prob.regularizer.to_json()
    res = solve_equality_constrained(prob, trace=True)
    res2 = SolveResult.from_json(json.loads(json.dumps(res.to_json())))
    np.testing.assert_array_equal(res2.coefficients, res.coefficients)
    assert res2.objective == res.objective and res2.converged == res.converged
    text = res.trace_csv(tmp_path / "trace.csv")
    lines = [l for l in text.splitlines() if not l.startswith("#")]
    assert lines[0] == "iteration,objective,residual,gap" and len(lines) > 1
