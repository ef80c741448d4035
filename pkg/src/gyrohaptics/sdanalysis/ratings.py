"""Semantic-differential rating files and repetition averaging."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import List, Sequence, Tuple

import numpy as np

KEY_COLUMNS = ("participant", "condition", "repetition")

DEFAULT_PAIRS = (
    "Long-Short",
    "Wide-Narrow",
    "Thick-Thin",
    "Hard-Soft",
    "Heavy-Light",
    "Stiff-Flexible",
    "Sticky-Smooth",
)


class RatingsError(ValueError):
    """Malformed or out-of-range rating data."""


@dataclass
class RatingMatrix:
    """Ratings indexed ``[participant, condition, repetition, pair]``.

    Missing cells are NaN.
    """

    values: np.ndarray
    participants: List[str]
    conditions: List[str]
    repetitions: List[int]
    labels: List[str]
    likert_range: Tuple[int, int] = (1, 7)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        shape = (len(self.participants), len(self.conditions), len(self.repetitions), len(self.labels))
        if self.values.shape != shape:
            raise RatingsError(f"values shape {self.values.shape} does not match labels {shape}")
        lo, hi = self.likert_range
        present = self.values[~np.isnan(self.values)]
        if present.size and (present.min() < lo or present.max() > hi):
            raise RatingsError(f"ratings outside the Likert range {lo}-{hi}")

    @property
    def shape(self) -> Tuple[int, int, int, int]:
        return self.values.shape

    @property
    def n_missing(self) -> int:
        return int(np.isnan(self.values).sum())

    @property
    def complete(self) -> bool:
        return self.n_missing == 0


@dataclass
class Observations:
    """Averaged ratings: one row per (participant, condition)."""

    values: np.ndarray
    participants: List[str]
    conditions: List[str]
    labels: List[str]

    def __len__(self) -> int:
        return self.values.shape[0]


def load_ratings(path, likert_range: Tuple[int, int] = (1, 7)) -> RatingMatrix:
    """Read a ratings CSV.

    Header: ``participant,condition,repetition,<pair-1>,...,<pair-n>``.
    Empty rating fields and absent (participant, condition, repetition)
    combinations become missing cells.
    """
    path = Path(path)
    lo, hi = likert_range
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise RatingsError(f"{path}: empty file") from None
        if tuple(header[:3]) != KEY_COLUMNS or len(header) < 4:
            raise RatingsError(
                f"{path}: header must start with {','.join(KEY_COLUMNS)} followed by adjective pairs"
            )
        labels = header[3:]
        if len(set(labels)) != len(labels):
            raise RatingsError(f"{path}: duplicated adjective-pair column")

        participants: List[str] = []
        conditions: List[str] = []
        reps: set = set()
        records = {}
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise RatingsError(f"{path}:{line_no}: expected {len(header)} fields, got {len(row)}")
            p, c, r = (v.strip() for v in row[:3])
            try:
                rep = int(r)
            except ValueError:
                raise RatingsError(f"{path}:{line_no}: repetition {r!r} is not an integer") from None
            key = (p, c, rep)
            if key in records:
                raise RatingsError(
                    f"{path}:{line_no}: duplicated key participant={p} condition={c} repetition={rep}"
                )
            vals = []
            for label, cell in zip(labels, row[3:]):
                cell = cell.strip()
                if cell == "":
                    vals.append(math.nan)
                    continue
                try:
                    v = float(cell)
                except ValueError:
                    raise RatingsError(f"{path}:{line_no}, column {label!r}: {cell!r} is not a number") from None
                if not v.is_integer():
                    raise RatingsError(
                        f"{path}:{line_no}, column {label!r}: value {cell} is not an integer rating"
                    )
                if not lo <= v <= hi:
                    raise RatingsError(
                        f"{path}:{line_no}, column {label!r}: value {cell} outside Likert range {lo}-{hi}"
                    )
                vals.append(v)
            records[key] = vals
            if p not in participants:
                participants.append(p)
            if c not in conditions:
                conditions.append(c)
            reps.add(rep)

    repetitions = sorted(reps)
    values = np.full((len(participants), len(conditions), len(repetitions), len(labels)), np.nan)
    pi = {p: i for i, p in enumerate(participants)}
    ci = {c: i for i, c in enumerate(conditions)}
    ri = {r: i for i, r in enumerate(repetitions)}
    for (p, c, r), vals in records.items():
        values[pi[p], ci[c], ri[r]] = vals
    return RatingMatrix(values, participants, conditions, repetitions, labels, likert_range)


def write_ratings(m: RatingMatrix, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(KEY_COLUMNS) + list(m.labels))
        for i, p in enumerate(m.participants):
            for j, c in enumerate(m.conditions):
                for k, r in enumerate(m.repetitions):
                    cells = m.values[i, j, k]
                    w.writerow([p, c, r] + ["" if np.isnan(v) else str(int(v)) for v in cells])
    return path


def average_repetitions(m: RatingMatrix, allow_missing: bool = False) -> Observations:
    """Mean over the repetition axis -> (participants x conditions) rows.

    Rows are participant-major. With ``allow_missing`` the mean skips missing
    repetitions; cells missing in every repetition stay NaN.
    """
    if not m.complete and not allow_missing:
        bad = np.argwhere(np.isnan(m.values))[0]
        raise RatingsError(
            f"{m.n_missing} missing rating cell(s), e.g. participant={m.participants[bad[0]]} "
            f"condition={m.conditions[bad[1]]} repetition={m.repetitions[bad[2]]} "
            f"pair={m.labels[bad[3]]}; pass allow_missing to use pairwise-complete analysis"
        )
    P, C, R, V = m.shape
    if m.complete:
        means = m.values.mean(axis=2)
    else:
        counts = (~np.isnan(m.values)).sum(axis=2)
        sums = np.nansum(m.values, axis=2)
        with np.errstate(invalid="ignore", divide="ignore"):
            means = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
    rows = means.reshape(P * C, V)
    participants = [p for p in m.participants for _ in m.conditions]
    conditions = [c for _ in m.participants for c in m.conditions]
    return Observations(rows, participants, conditions, list(m.labels))


def observations_from_array(X, labels: Sequence[str] | None = None,
                            conditions: Sequence[str] | None = None) -> Observations:
    X = np.asarray(X, float)
    n, v = X.shape
    labels = list(labels) if labels is not None else [f"v{i + 1}" for i in range(v)]
    conditions = list(conditions) if conditions is not None else ["all"] * n
    return Observations(X, [str(i) for i in range(n)], conditions, labels)
