"""
Factor-structured synthetic ratings.

Each (participant, condition) gets latent scores ``f ~ N(0, I_k)``, whitened
across observations so their sample covariance is exactly the identity (the
declared loadings are then the exact correlation structure of noiseless
data); every repetition rates ``x = L f + noise * e`` with ``e ~ N(0, I)``, mapped to the
Likert scale as ``round(center + spread * x)`` and clipped to the range.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import List, Tuple

import numpy as np

from .ratings import DEFAULT_PAIRS, RatingMatrix

# Simple structure: each pair loads on exactly one factor.
DEFAULT_LOADINGS = (
    (0.80, 0.00, 0.00, 0.00),
    (0.70, 0.00, 0.00, 0.00),
    (0.00, 0.75, 0.00, 0.00),
    (0.00, 0.00, 0.80, 0.00),
    (0.00, 0.80, 0.00, 0.00),
    (0.00, 0.00, 0.70, 0.00),
    (0.00, 0.00, 0.00, 0.85),
)

DEFAULT_CONDITIONS = (
    "increased-inertia",
    "decreased-inertia",
    "damping-increase",
    "damping-decrease",
    "elasticity-increase",
)


@dataclass
class SynthSpec:
    loadings: List[List[float]] = field(default_factory=lambda: [list(r) for r in DEFAULT_LOADINGS])
    labels: List[str] = field(default_factory=lambda: list(DEFAULT_PAIRS))
    noise: float = 0.3
    participants: int = 16
    conditions: List[str] = field(default_factory=lambda: list(DEFAULT_CONDITIONS))
    repetitions: int = 1
    spread: float = 1.0
    likert_range: Tuple[int, int] = (1, 7)
    seed: int = 0

    def __post_init__(self):
        L = np.asarray(self.loadings, float)
        if L.ndim != 2 or L.shape[0] != len(self.labels):
            raise ValueError(
                f"loadings must be (variables x factors) with one row per label; "
                f"got {L.shape} for {len(self.labels)} labels"
            )
        if self.noise < 0:
            raise ValueError("noise must be >= 0")
        if self.participants < 1 or self.repetitions < 1 or not self.conditions:
            raise ValueError("need at least one participant, condition and repetition")
        lo, hi = self.likert_range
        if not lo < hi:
            raise ValueError("likert_range must be increasing")

    @property
    def n_observations(self) -> int:
        return self.participants * len(self.conditions)

    def to_json(self) -> str:
        d = asdict(self)
        d["likert_range"] = list(self.likert_range)
        return json.dumps(d, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "SynthSpec":
        d = json.loads(text)
        d["likert_range"] = tuple(d.get("likert_range", (1, 7)))
        return cls(**d)


def _whiten(F: np.ndarray) -> np.ndarray:
    n, k = F.shape
    if n <= k:
        return F
    F = F - F.mean(axis=0)
    chol = np.linalg.cholesky(F.T @ F / n)
    return np.linalg.solve(chol, F.T).T


def synthesize(spec: SynthSpec) -> RatingMatrix:
    L = np.asarray(spec.loadings, float)
    V, k = L.shape
    P, C, R = spec.participants, len(spec.conditions), spec.repetitions
    rng = np.random.default_rng(spec.seed)
    f = _whiten(rng.standard_normal((P * C, k))).reshape(P, C, k)
    e = rng.standard_normal((P, C, R, V))
    x = np.einsum("pck,vk->pcv", f, L)[:, :, None, :] + spec.noise * e
    lo, hi = spec.likert_range
    center = 0.5 * (lo + hi)
    ratings = np.clip(np.floor(center + spec.spread * x + 0.5), lo, hi)
    return RatingMatrix(
        ratings,
        participants=[f"P{i + 1:03d}" for i in range(P)],
        conditions=list(spec.conditions),
        repetitions=list(range(1, R + 1)),
        labels=list(spec.labels),
        likert_range=tuple(spec.likert_range),
    )


def model_path_for(ratings_path) -> Path:
    p = Path(ratings_path)
    return p.with_name(p.stem + ".model.json")


def write_model(spec: SynthSpec, path) -> Path:
    path = Path(path)
    path.write_text(spec.to_json(), encoding="utf-8")
    return path


def read_model(path) -> SynthSpec:
    return SynthSpec.from_json(Path(path).read_text(encoding="utf-8"))


def read_loadings_csv(path) -> Tuple[List[str], List[List[float]]]:
    """Loadings file: header ``pair,F1,...,Fk`` then one row per pair."""
    import csv

    with open(path, encoding="utf-8", newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if len(rows) < 2:
        raise ValueError(f"{path}: no loadings rows")
    labels, L = [], []
    for i, r in enumerate(rows[1:], start=2):
        labels.append(r[0])
        try:
            vals = [float(v) for v in r[1:]]
        except ValueError:
            raise ValueError(f"{path}:{i}: non-numeric loading") from None
        if not all(math.isfinite(v) for v in vals):
            raise ValueError(f"{path}:{i}: non-finite loading")
        L.append(vals)
    if len({len(r) for r in L}) != 1:
        raise ValueError(f"{path}: ragged loadings rows")
    return labels, L


def implied_loadings(spec: SynthSpec) -> np.ndarray:
    """Correlation-scale loadings implied by the generating model.

    Row ``v`` is ``L[v] / sqrt(|L[v]|^2 + noise^2 / repetitions)``: the
    loadings of the standardized, repetition-averaged variables (Likert
    rounding ignored).
    """
    L = np.asarray(spec.loadings, float)
    sd = np.sqrt(np.sum(L**2, axis=1) + spec.noise**2 / spec.repetitions)
    return L / sd[:, None]
