import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from gyrohaptics.sdanalysis import (
    ConvergenceError,
    DegenerateColumnError,
    align_factors,
    choose_n_factors,
    condition_factor_means,
    congruence,
    correlation_matrix,
    eigen_scree,
    extract_loadings,
    factor_scores,
    factor_summary,
    fit_factor_model,
    varimax,
)
from gyrohaptics.sdanalysis.ratings import observations_from_array


# correlation ------------------------------------------------------------------

def test_column_with_itself_and_affine():
    rng = np.random.default_rng(0)
    x = rng.normal(size=50)
    R = correlation_matrix(np.column_stack([x, x, 2 * x + 1]))
    np.testing.assert_allclose(R, np.ones((3, 3)), atol=1e-12)


def test_independent_columns_nearly_uncorrelated():
    rng = np.random.default_rng(1)
    R = correlation_matrix(rng.normal(size=(10_000, 2)))
    assert abs(R[0, 1]) < 0.05


def test_constant_column_named():
    X = np.column_stack([np.arange(5.0), np.full(5, 4.0)])
    with pytest.raises(DegenerateColumnError, match="Heavy-Light") as info:
        correlation_matrix(X, ["Long-Short", "Heavy-Light"])
    assert info.value.label == "Heavy-Light"


def test_missing_requires_pairwise():
    X = np.array([[1.0, 2.0], [2.0, np.nan], [3.0, 5.0], [4.0, 4.0]])
    with pytest.raises(ValueError, match="missing"):
        correlation_matrix(X)
    R = correlation_matrix(X, pairwise=True)
    ok = [0, 2, 3]
    assert R[0, 1] == pytest.approx(np.corrcoef(X[ok, 0], X[ok, 1])[0, 1])


@given(arrays(np.float64, (20, 4), elements=st.floats(-5, 5, allow_nan=False)))
def test_correlation_properties(X):
    if np.any(X.std(axis=0) < 1e-3):
        return
    R = correlation_matrix(X)
    np.testing.assert_array_equal(np.diag(R), 1.0)
    assert np.max(np.abs(R - R.T)) <= 1e-12
    assert np.all(np.abs(R) <= 1.0)


# scree ------------------------------------------------------------------------

def test_scree_examples():
    np.testing.assert_allclose(eigen_scree(np.eye(7)), np.ones(7))
    np.testing.assert_allclose(eigen_scree([[1, 0.5], [0.5, 1]]), [1.5, 0.5])
    np.testing.assert_allclose(eigen_scree(np.ones((3, 3))), [3, 0, 0], atol=1e-12)


def test_scree_rejects_bad_input():
    with pytest.raises(ValueError, match="symmetric"):
        eigen_scree([[1, 0.2], [0.5, 1]])
    with pytest.raises(ValueError, match="semi-definite"):
        eigen_scree([[1, 2], [2, 1]])


@given(arrays(np.float64, (30, 6), elements=st.floats(-3, 3, allow_nan=False)))
def test_scree_trace_identity(X):
    if np.any(X.std(axis=0) < 1e-2):
        return
    ev = eigen_scree(correlation_matrix(X))
    assert ev.sum() == pytest.approx(6.0, abs=1e-8)
    assert ev.min() >= -1e-10
    assert np.all(np.diff(ev) <= 1e-12)


# factor count -----------------------------------------------------------------

def test_elbow_second_largest_drop():
    assert choose_n_factors([4, 1.5, 1.4, 0.3, 0.2], "paper-elbow") == 3


def test_kaiser_and_fixed():
    assert choose_n_factors([2.1, 1.2, 0.4], "kaiser") == 2
    assert choose_n_factors([5, 1, 1, 0.5], "fixed-k", 4) == 4


def test_rule_errors():
    with pytest.raises(ValueError):
        choose_n_factors([2, 1], "kaiser")
    with pytest.raises(ValueError):
        choose_n_factors([3, 2, 1], "bogus")
    with pytest.raises(ValueError):
        choose_n_factors([3, 2, 1], "fixed-k")


# extraction -------------------------------------------------------------------

def _implied_R(L):
    R = L @ L.T
    np.fill_diagonal(R, 1.0)
    return R


def test_paf_recovers_known_two_factor_structure():
    L = np.array([[0.8, 0], [0.7, 0], [0.6, 0], [0, 0.8], [0, 0.7], [0, 0.6]])
    ext = extract_loadings(_implied_R(L), 2)
    assert ext.method == "paf" and ext.iterations <= 100
    rotated, _ = varimax(ext.loadings)
    _, phis = align_factors(rotated, L)
    assert phis.min() >= 0.999
    np.testing.assert_allclose(ext.communalities, np.sum(L**2, 1), atol=1e-5)
    assert ext.residual < 1e-5


def test_paf_with_cross_loadings_reproduces_correlations():
    L = np.array([[0.8, 0.1], [0.7, 0.2], [0.6, -0.1], [0.1, 0.8], [0.2, 0.7], [0.0, 0.6]])
    ext = extract_loadings(_implied_R(L), 2, initial="smc")
    assert ext.residual < 1e-5
    rotated, _ = varimax(ext.loadings)
    assert align_factors(rotated, L)[1].min() >= 0.999


def test_identity_full_rank():
    ext = extract_loadings(np.eye(5), 5)
    P = np.abs(ext.loadings)
    np.testing.assert_allclose(np.sort(P, axis=1)[:, -1], 1.0, atol=1e-12)
    np.testing.assert_allclose(P.sum(axis=0), 1.0, atol=1e-12)


def test_rank_one():
    v = np.array([0.9, 0.6, 0.3, 0.5])
    R = np.outer(v, v)
    np.fill_diagonal(R, 1.0)  # not exactly rank one, so use the eigen identity on LL^T
    w, V = np.linalg.eigh(np.outer(v, v))
    expected = math.sqrt(w[-1]) * V[:, -1]
    ext = extract_loadings(np.outer(v, v), 1, method="pc")
    np.testing.assert_allclose(np.abs(ext.loadings[:, 0]), np.abs(expected), atol=1e-12)
    ext = extract_loadings(R, 1)
    np.testing.assert_allclose(np.abs(ext.loadings[:, 0]), v, atol=1e-4)


def test_paf_non_convergence_carries_residual():
    L = np.array([[0.8, 0], [0.7, 0], [0.6, 0], [0, 0.8], [0, 0.7], [0, 0.6]])
    with pytest.raises(ConvergenceError, match="did not converge in 3") as info:
        extract_loadings(_implied_R(L), 2, max_iter=3)
    assert info.value.last_residual > 0


def test_extraction_argument_errors():
    with pytest.raises(ValueError):
        extract_loadings(np.eye(3), 4)
    with pytest.raises(ValueError):
        extract_loadings(np.eye(3), 1, method="ml")
    with pytest.raises(ValueError):
        extract_loadings(np.eye(3), 1, initial="random")


def test_pc_reproduces_eigenvalues():
    rng = np.random.default_rng(9)
    R = correlation_matrix(rng.normal(size=(100, 5)))
    ext = extract_loadings(R, 5, method="pc")
    np.testing.assert_allclose(np.sort(np.sum(ext.loadings**2, 0))[::-1], eigen_scree(R), atol=1e-12)


# summary ----------------------------------------------------------------------

def test_summary_arithmetic():
    L = np.zeros((7, 2))
    L[:, 0] = math.sqrt(2.8 / 7)
    L[:, 1] = math.sqrt(1.2 / 7)
    s = factor_summary(L)
    np.testing.assert_allclose(s.ss_loadings, [2.8, 1.2])
    np.testing.assert_allclose(s.pct_variance, [0.4, 1.2 / 7])
    np.testing.assert_allclose(s.cumulative, [0.4, 4.0 / 7])
    assert round(s.pct_variance[1], 4) == 0.1714 and round(s.cumulative[1], 4) == 0.5714


def test_summary_orders_by_size():
    L = np.array([[0.1, 0.9], [0.2, 0.8]])
    s = factor_summary(L)
    assert list(s.order) == [1, 0]
    assert s.ss_loadings[0] > s.ss_loadings[1]


@given(arrays(np.float64, st.tuples(st.integers(2, 10), st.integers(1, 5)),
              elements=st.floats(-1, 1, allow_nan=False)))
def test_summary_invariants(L):
    s = factor_summary(L)
    assert np.array_equal(s.cumulative, np.cumsum(s.pct_variance))
    assert s.cumulative[-1] == pytest.approx(s.pct_variance.sum())
    np.testing.assert_allclose(s.ss_loadings, np.sum(L**2, axis=0)[s.order])
    assert np.all(np.diff(s.ss_loadings) <= 0)


# scores -----------------------------------------------------------------------

def test_scores_projection_case():
    rng = np.random.default_rng(11)
    X = rng.normal(size=(40, 3))
    L = np.array([[1.0], [0.0], [0.0]])
    S = factor_scores(X, L, np.eye(3))
    z = (X[:, 0] - X[:, 0].mean()) / X[:, 0].std(ddof=1)
    np.testing.assert_allclose(S[:, 0], z, atol=1e-12)


def test_scores_of_mean_row_are_zero():
    X = np.array([[1.0, 2.0], [3.0, 6.0], [2.0, 4.0]])  # last row is the mean
    S = factor_scores(X, np.array([[0.7], [0.7]]), np.array([[1.0, 0.5], [0.5, 1.0]]))
    assert S[2, 0] == pytest.approx(0.0, abs=1e-12)


def test_scores_track_true_factors():
    # four indicators at 0.9 per factor: score determinacy ~0.97
    rng = np.random.default_rng(12)
    L = np.kron(np.eye(2), np.full((4, 1), 0.9))
    F = rng.normal(size=(200, 2))
    X = F @ L.T + rng.normal(size=(200, 8)) * np.sqrt(1 - np.sum(L**2, 1))
    model = fit_factor_model(observations_from_array(X), n_factors=2)
    C = np.abs(np.corrcoef(model.scores.T, F.T)[:2, 2:])
    assert C.max(axis=0).min() >= 0.95
    assert np.abs(model.scores.mean(axis=0)).max() < 1e-10


def test_condition_means():
    S = np.array([[1.0, -2.0], [-1.0, 2.0], [3.0, 1.0], [-3.0, -1.0]])
    names, M = condition_factor_means(S, ["a", "b", "a", "b"])
    assert names == ["a", "b"]
    np.testing.assert_allclose(M[0], -M[1])
    names, M = condition_factor_means(S, ["all"] * 4)
    np.testing.assert_allclose(M, [[0.0, 0.0]])
    with pytest.raises(ValueError):
        condition_factor_means(S, ["a"])


# alignment --------------------------------------------------------------------

def test_align_handles_permutation_and_sign():
    rng = np.random.default_rng(13)
    T = rng.normal(size=(7, 3))
    E = -T[:, [2, 0, 1]]
    aligned, phis = align_factors(E, T)
    np.testing.assert_allclose(aligned, T)
    np.testing.assert_allclose(phis, 1.0)
    assert congruence(T[:, 0], -T[:, 0]) == pytest.approx(-1.0)


# pipeline ---------------------------------------------------------------------

def _two_factor_obs(n=200, seed=0):
    rng = np.random.default_rng(seed)
    L = np.array([[0.8, 0], [0.7, 0], [0.75, 0], [0, 0.8], [0, 0.7], [0, 0.6]])
    F = rng.normal(size=(n, 2))
    X = F @ L.T + rng.normal(size=(n, 6)) * np.sqrt(1 - np.sum(L**2, 1))
    conds = [f"c{i % 5}" for i in range(n)]
    return observations_from_array(X, conditions=conds), L


def test_model_invariants():
    obs, L = _two_factor_obs()
    m = fit_factor_model(obs, n_factors=2)
    assert m.n_factors == 2 and m.rule == "fixed-k"
    np.testing.assert_allclose(m.rotation.T @ m.rotation, np.eye(2), atol=1e-10)
    assert np.array_equal(m.cumulative, np.cumsum(m.pct_variance))
    np.testing.assert_allclose(m.ss_loadings, np.sum(m.loadings**2, 0))
    np.testing.assert_allclose(m.loadings @ m.loadings.T, m.unrotated @ m.unrotated.T, atol=1e-10)
    assert m.condition_means.shape == (5, 2)
    np.testing.assert_allclose(m.condition_means.mean(axis=0), 0.0, atol=1e-10)
    assert align_factors(m.loadings, L)[1].min() > 0.95


def test_model_rules():
    obs, _ = _two_factor_obs()
    assert fit_factor_model(obs, rule="kaiser").n_factors == 2
    m = fit_factor_model(obs)
    assert m.rule == "paper-elbow"
    drops = -np.diff(m.eigenvalues)
    assert m.n_factors == int(np.argsort(-drops)[1]) + 1


def test_model_paf_switch():
    obs, L = _two_factor_obs()
    m = fit_factor_model(obs, n_factors=2, method="paf", max_iter=1000)
    assert m.method == "paf"
    assert align_factors(m.loadings, L)[1].min() > 0.95


def test_model_is_deterministic():
    obs, _ = _two_factor_obs()
    a = fit_factor_model(obs, n_factors=2)
    b = fit_factor_model(obs, n_factors=2)
    assert a.loadings.tobytes() == b.loadings.tobytes()
    assert a.scores.tobytes() == b.scores.tobytes()


def test_unrotated_single_factor():
    obs, _ = _two_factor_obs()
    m = fit_factor_model(obs, n_factors=1)
    np.testing.assert_array_equal(m.rotation, np.eye(1))
