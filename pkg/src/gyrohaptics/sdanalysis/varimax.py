"""
Varimax rotation by successive planar rotations (Kaiser's pairwise scheme).

Each sweep visits every factor pair and applies the closed-form angle that
maximizes the criterion in that plane, so the criterion never decreases.
Rows are Kaiser-normalized before rotating and de-normalized afterwards.
"""

from __future__ import annotations

import math
from typing import Tuple

import numpy as np


class RotationError(RuntimeError):
    def __init__(self, message: str, last_value: float):
        super().__init__(message)
        self.last_value = last_value


def varimax_criterion(L: np.ndarray, normalize: bool = True) -> float:
    """Sum over factors of the variance of squared (row-normalized) loadings."""
    L = np.asarray(L, float)
    if normalize:
        L = _row_normalize(L)[0]
    sq = L**2
    return float(np.sum(np.mean(sq**2, axis=0) - np.mean(sq, axis=0) ** 2))


def _row_normalize(L: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    h = np.sqrt(np.sum(L**2, axis=1))
    h_safe = np.where(h > 0, h, 1.0)
    return L / h_safe[:, None], h_safe


def _pair_angle(x: np.ndarray, y: np.ndarray) -> float:
    p = len(x)
    u = x * x - y * y
    v = 2.0 * x * y
    A, B = u.sum(), v.sum()
    C = np.sum(u * u - v * v)
    D = 2.0 * np.sum(u * v)
    num = D - 2.0 * A * B / p
    den = C - (A * A - B * B) / p
    return 0.25 * math.atan2(num, den)


def varimax(
    L,
    tol: float = 1e-8,
    max_iter: int = 1000,
    normalize: bool = True,
    return_history: bool = False,
):
    """Rotate loadings ``L`` (variables x factors) to varimax simple structure.

    Returns
    -------
    rotated : ndarray
        ``L @ rotation``, with each column flipped so that its largest
        absolute loading is positive.
    rotation : ndarray
        Orthogonal ``k x k`` matrix.
    history : list of float, optional
        Criterion after each sweep (only with ``return_history``).

    Raises
    ------
    RotationError
        If the criterion still changes by more than ``tol`` after
        ``max_iter`` sweeps.
    """
    L = np.asarray(L, dtype=float)
    p, k = L.shape
    if k < 2:
        raise ValueError("varimax needs at least 2 factors")
    B, h = _row_normalize(L) if normalize else (L.copy(), np.ones(p))
    T = np.eye(k)
    history = [varimax_criterion(B, normalize=False)]
    for _ in range(max_iter):
        for i in range(k - 1):
            for j in range(i + 1, k):
                phi = _pair_angle(B[:, i], B[:, j])
                if phi == 0.0:
                    continue
                c, s = math.cos(phi), math.sin(phi)
                bi, bj = B[:, i].copy(), B[:, j]
                B[:, i] = c * bi + s * bj
                B[:, j] = -s * bi + c * bj
                ti, tj = T[:, i].copy(), T[:, j]
                T[:, i] = c * ti + s * tj
                T[:, j] = -s * ti + c * tj
        history.append(varimax_criterion(B, normalize=False))
        if abs(history[-1] - history[-2]) < tol:
            break
    else:
        raise RotationError(
            f"varimax did not converge in {max_iter} sweeps (criterion {history[-1]:.12g})",
            history[-1],
        )

    rotated = L @ T
    for j in range(k):
        col = rotated[:, j]
        if col[np.argmax(np.abs(col))] < 0:
            rotated[:, j] = -col
            T[:, j] = -T[:, j]
    if return_history:
        return rotated, T, history
    return rotated, T
