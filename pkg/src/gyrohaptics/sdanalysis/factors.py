"""
Exploratory factor analysis on averaged ratings.

correlation -> scree -> factor count -> extraction (principal components
or iterated principal-axis factoring) -> varimax -> summary table,
regression factor scores, per-condition means.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .ratings import Observations
from .varimax import varimax

RULES = ("paper-elbow", "kaiser", "fixed-k")
METHODS = ("paf", "pc")


class DegenerateColumnError(ValueError):
    """A variable has zero variance, so its correlations are undefined."""

    def __init__(self, label: str):
        super().__init__(f"adjective pair {label!r} has zero variance (constant column)")
        self.label = label


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, last_residual: float):
        super().__init__(message)
        self.last_residual = last_residual


def _labels(n: int, labels: Optional[Sequence[str]]) -> List[str]:
    return list(labels) if labels is not None else [f"v{i + 1}" for i in range(n)]


def correlation_matrix(X, labels: Sequence[str] | None = None, pairwise: bool = False) -> np.ndarray:
    """Pearson correlation of the columns of ``X``.

    With ``pairwise=True`` NaN cells are allowed and each coefficient uses
    the rows where both columns are present; otherwise NaN is an error.
    """
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    labels = _labels(p, labels)
    missing = np.isnan(X)
    if missing.any() and not pairwise:
        raise ValueError("observations contain missing values; enable pairwise-complete correlation")

    if not missing.any():
        sd = X.std(axis=0)
        for j in range(p):
            if not sd[j] > 0:
                raise DegenerateColumnError(labels[j])
        Z = (X - X.mean(axis=0)) / sd
        R = Z.T @ Z / n
    else:
        R = np.eye(p)
        for j in range(p):
            col = X[~missing[:, j], j]
            if col.size < 2 or not col.std() > 0:
                raise DegenerateColumnError(labels[j])
        for i in range(p):
            for j in range(i + 1, p):
                ok = ~(missing[:, i] | missing[:, j])
                a, b = X[ok, i], X[ok, j]
                if a.size < 2 or not (a.std() > 0 and b.std() > 0):
                    raise DegenerateColumnError(labels[i] if not a.std() > 0 else labels[j])
                R[i, j] = R[j, i] = np.corrcoef(a, b)[0, 1]
    R = 0.5 * (R + R.T)
    np.fill_diagonal(R, 1.0)
    return np.clip(R, -1.0, 1.0)


def eigen_scree(R, tol: float = 1e-8) -> np.ndarray:
    """Eigenvalues of a correlation matrix in descending order."""
    R = np.asarray(R, dtype=float)
    if R.ndim != 2 or R.shape[0] != R.shape[1]:
        raise ValueError("R must be square")
    if not np.allclose(R, R.T, atol=tol, rtol=0):
        raise ValueError("R is not symmetric")
    w = np.linalg.eigvalsh(0.5 * (R + R.T))[::-1]
    if w[-1] < -tol:
        raise ValueError(f"R is not positive semi-definite (smallest eigenvalue {w[-1]:.3g})")
    return np.where(np.abs(w) < 1e-12, 0.0, w)


def choose_n_factors(eigenvalues, rule: str = "paper-elbow", k: int | None = None) -> int:
    """Number of factors to retain.

    ``paper-elbow`` locates the second-largest drop between consecutive
    eigenvalues and keeps the components before it; ``kaiser`` counts
    eigenvalues above 1; ``fixed-k`` returns ``k``.
    """
    ev = np.asarray(eigenvalues, dtype=float)
    if rule == "fixed-k":
        if k is None or k < 1:
            raise ValueError("fixed-k rule needs k >= 1")
        return int(k)
    if ev.size < 3:
        raise ValueError("need at least 3 eigenvalues")
    if rule == "kaiser":
        return int(np.sum(ev > 1.0))
    if rule == "paper-elbow":
        drops = ev[:-1] - ev[1:]
        order = np.argsort(-drops, kind="stable")
        return int(order[1]) + 1
    raise ValueError(f"unknown rule {rule!r}; expected one of {RULES}")


def _smc(R: np.ndarray) -> np.ndarray:
    try:
        inv = np.linalg.inv(R)
        if np.linalg.cond(R) > 1e12:
            raise np.linalg.LinAlgError
        return 1.0 - 1.0 / np.diag(inv)
    except np.linalg.LinAlgError:
        off = np.abs(R - np.diag(np.diag(R)))
        return off.max(axis=1)


def _top_loadings(M: np.ndarray, k: int) -> np.ndarray:
    w, V = np.linalg.eigh(M)
    idx = np.argsort(w, kind="stable")[::-1][:k]
    return V[:, idx] * np.sqrt(np.clip(w[idx], 0.0, None))


def _orient(L: np.ndarray) -> np.ndarray:
    L = L.copy()
    for j in range(L.shape[1]):
        if L[np.argmax(np.abs(L[:, j])), j] < 0:
            L[:, j] = -L[:, j]
    return L


@dataclass
class Extraction:
    loadings: np.ndarray
    communalities: np.ndarray
    iterations: int
    residual: float  # max |R - L L^T| off the diagonal
    method: str


def _offdiag_residual(R: np.ndarray, L: np.ndarray) -> float:
    E = R - L @ L.T
    np.fill_diagonal(E, 0.0)
    return float(np.max(np.abs(E))) if E.size else 0.0


def extract_loadings(
    R,
    k: int,
    method: str = "paf",
    max_iter: int = 100,
    tol: float = 1e-6,
    initial: str = "ones",
) -> Extraction:
    """Unrotated loadings (variables x k).

    ``paf`` iterates principal-axis factoring: the diagonal of ``R`` is
    replaced by the current communalities, the top ``k`` eigenpairs give the
    loadings, and their row sums of squares become the next communalities
    (capped at 1). ``initial`` selects the starting communalities: ``ones``
    (start from the principal-component solution) or ``smc`` (squared
    multiple correlations). ``pc`` is plain principal components.
    """
    R = np.asarray(R, dtype=float)
    p = R.shape[0]
    if not 1 <= k <= p:
        raise ValueError(f"k must be in [1, {p}], got {k}")
    if method == "pc":
        L = _orient(_top_loadings(R, k))
        return Extraction(L, np.sum(L**2, axis=1), 0, _offdiag_residual(R, L), "pc")
    if method != "paf":
        raise ValueError(f"unknown method {method!r}; expected 'paf' or 'pc'")

    if initial == "ones":
        h = np.ones(p)
    elif initial == "smc":
        h = np.clip(_smc(R), 0.0, 1.0)
    else:
        raise ValueError(f"unknown initial communalities {initial!r}")
    Rr = R.copy()
    change = np.inf
    for it in range(1, max_iter + 1):
        np.fill_diagonal(Rr, h)
        L = _top_loadings(Rr, k)
        h_new = np.minimum(np.sum(L**2, axis=1), 1.0)
        change = float(np.max(np.abs(h_new - h)))
        h = h_new
        if change < tol:
            L = _orient(L)
            return Extraction(L, h, it, _offdiag_residual(R, L), "paf")
    raise ConvergenceError(
        f"principal-axis factoring did not converge in {max_iter} iterations "
        f"(last communality change {change:.3g}, off-diagonal residual "
        f"{_offdiag_residual(R, L):.3g})",
        _offdiag_residual(R, L),
    )


@dataclass
class FactorSummary:
    ss_loadings: np.ndarray
    pct_variance: np.ndarray
    cumulative: np.ndarray
    order: np.ndarray  # original column index of each summarized factor

    def rows(self):
        yield "Sum of Squared Loadings", self.ss_loadings
        yield "% of Variance", self.pct_variance
        yield "Cumulative %", self.cumulative


def factor_summary(L) -> FactorSummary:
    """Sum of squared loadings, share of variance and cumulative share.

    Factors are reported by descending sum of squares; shares are relative to
    the number of variables.
    """
    L = np.asarray(L, dtype=float)
    ss = np.sum(L**2, axis=0)
    order = np.argsort(-ss, kind="stable")
    ss = ss[order]
    pct = ss / L.shape[0]
    return FactorSummary(ss, pct, np.cumsum(pct), order)


def standardize(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    mu = np.nanmean(X, axis=0)
    sd = np.nanstd(X, axis=0, ddof=1)
    Z = (X - mu) / np.where(sd > 0, sd, 1.0)
    return np.where(np.isnan(Z), 0.0, Z)


def factor_scores(X, L, R) -> np.ndarray:
    """Regression (Thurstone) scores ``Z R^-1 L``; missing cells score as the mean.

    A (near-)singular ``R``, e.g. from noiseless data, is inverted with a
    truncated pseudo-inverse.
    """
    Z = standardize(X)
    R = np.asarray(R, float)
    L = np.asarray(L, float)
    if np.linalg.cond(R) < 1e10:
        W = np.linalg.solve(R, L)
    else:
        W = np.linalg.pinv(R, rcond=1e-10, hermitian=True) @ L
    S = Z @ W
    return S - S.mean(axis=0)


def condition_factor_means(scores, conditions: Sequence[str]) -> Tuple[List[str], np.ndarray]:
    """Mean factor score per condition (conditions in order of first appearance)."""
    scores = np.asarray(scores, dtype=float)
    if len(conditions) != scores.shape[0]:
        raise ValueError("one condition label per observation row is required")
    names = list(dict.fromkeys(conditions))
    labels = np.asarray(conditions, dtype=object)
    means = np.array([scores[labels == c].mean(axis=0) for c in names])
    return names, means.reshape(len(names), scores.shape[1])


# ---------------------------------------------------------------------------
# Comparison helpers
# ---------------------------------------------------------------------------

def congruence(a, b) -> float:
    """Tucker's congruence coefficient between two loading columns."""
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    return float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))


def align_factors(estimated, reference) -> Tuple[np.ndarray, np.ndarray]:
    """Permute and sign-flip ``estimated`` columns to best match ``reference``.

    Returns the aligned loadings and the per-factor congruences. The search
    is exhaustive over permutations, so keep ``k`` small.
    """
    E = np.asarray(estimated, float)
    T = np.asarray(reference, float)
    k = T.shape[1]
    if E.shape != T.shape:
        raise ValueError(f"shape mismatch {E.shape} vs {T.shape}")
    C = np.array([[congruence(E[:, i], T[:, j]) for j in range(k)] for i in range(k)])
    best, best_perm = -np.inf, None
    for perm in itertools.permutations(range(k)):
        total = sum(abs(C[perm[j], j]) for j in range(k))
        if total > best:
            best, best_perm = total, perm
    aligned = np.column_stack([E[:, best_perm[j]] * np.sign(C[best_perm[j], j] or 1.0) for j in range(k)])
    phis = np.array([abs(C[best_perm[j], j]) for j in range(k)])
    return aligned, phis


# ---------------------------------------------------------------------------
# Pipeline
# ---------------------------------------------------------------------------

@dataclass
class FactorModel:
    labels: List[str]
    eigenvalues: np.ndarray
    n_factors: int
    loadings: np.ndarray
    rotation: np.ndarray
    unrotated: np.ndarray
    communalities: np.ndarray
    ss_loadings: np.ndarray
    pct_variance: np.ndarray
    cumulative: np.ndarray
    scores: np.ndarray
    conditions: List[str]
    condition_names: List[str]
    condition_means: np.ndarray
    residual: float
    method: str
    rule: str
    correlation: np.ndarray = field(repr=False, default=None)


def fit_factor_model(
    obs: Observations,
    n_factors: int | None = None,
    rule: str = "paper-elbow",
    method: str = "pc",
    rotate: bool = True,
    pairwise: bool = False,
    max_iter: int = 100,
    tol: float = 1e-6,
    rotation_tol: float = 1e-8,
    rotation_max_iter: int = 1000,
) -> FactorModel:
    """Run the whole analysis on averaged observations."""
    R = correlation_matrix(obs.values, obs.labels, pairwise=pairwise)
    ev = eigen_scree(R)
    if n_factors is not None:
        rule = "fixed-k"
    k = choose_n_factors(ev, rule, n_factors)
    k = max(1, min(k, len(obs.labels)))
    ext = extract_loadings(R, k, method=method, max_iter=max_iter, tol=tol)
    if rotate and k >= 2:
        L, T = varimax(ext.loadings, tol=rotation_tol, max_iter=rotation_max_iter)
    else:
        L, T = ext.loadings.copy(), np.eye(k)
    summary = factor_summary(L)
    L = L[:, summary.order]
    T = T[:, summary.order]
    scores = factor_scores(obs.values, L, R)
    names, means = condition_factor_means(scores, obs.conditions)
    return FactorModel(
        labels=list(obs.labels),
        eigenvalues=ev,
        n_factors=k,
        loadings=L,
        rotation=T,
        unrotated=ext.loadings,
        communalities=np.sum(L**2, axis=1),
        ss_loadings=summary.ss_loadings,
        pct_variance=summary.pct_variance,
        cumulative=summary.cumulative,
        scores=scores,
        conditions=list(obs.conditions),
        condition_names=names,
        condition_means=means,
        residual=ext.residual,
        method=method,
        rule=rule,
        correlation=R,
    )
