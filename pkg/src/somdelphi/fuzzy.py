"""Fuzzy numbers and fuzzy Delphi screening of survey variables.

Experts score each candidate variable; every variable's scores collapse into
a triangular fuzzy number (min, geometric mean, max) and the variable is kept
when the geometric mean exceeds a threshold.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

DEFAULT_THRESHOLD = 4.0


class FuzzyInputError(ValueError):
    """Malformed fuzzy number, empty score list or non-positive score."""


@dataclass(frozen=True)
class TriangularFuzzyNumber:
    l: float
    m: float
    u: float

    def __post_init__(self):
        if not (self.l <= self.m <= self.u):
            raise FuzzyInputError(
                f"triangular fuzzy number needs l <= m <= u, got {(self.l, self.m, self.u)}"
            )


@dataclass(frozen=True)
class TrapezoidalFuzzyNumber:
    l: float
    m: float
    n: float
    u: float

    def __post_init__(self):
        if not (self.l <= self.m <= self.n <= self.u):
            raise FuzzyInputError(
                "trapezoidal fuzzy number needs l <= m <= n <= u, "
                f"got {(self.l, self.m, self.n, self.u)}"
            )


def _ramp_up(x, lo, hi):
    width = np.where(hi > lo, hi - lo, 1.0)
    return (x - lo) / width


def tri_membership(x, tfn: TriangularFuzzyNumber):
    """Membership degree of ``x`` in a triangular fuzzy number.

    Works on scalars and arrays. A degenerate edge (``l == m`` or ``m == u``)
    is treated as a vertical jump, so the peak value 1 is still reached at ``m``.
    """
    if not isinstance(tfn, TriangularFuzzyNumber):
        raise FuzzyInputError(f"expected TriangularFuzzyNumber, got {type(tfn).__name__}")
    xs = np.asarray(x, dtype=float)
    l, m, u = tfn.l, tfn.m, tfn.u
    out = np.zeros_like(xs)
    with np.errstate(all="ignore"):  # off-branch values are discarded by the masks
        out = np.where((xs > l) & (xs < m), _ramp_up(xs, l, m), out)
        out = np.where((xs > m) & (xs < u), (u - xs) / np.where(u > m, u - m, 1.0), out)
    out = np.where(xs == m, 1.0, out)
    return float(out) if out.ndim == 0 else out


def trap_membership(x, tzfn: TrapezoidalFuzzyNumber):
    """Membership degree of ``x`` in a trapezoidal fuzzy number (scalar or array)."""
    if not isinstance(tzfn, TrapezoidalFuzzyNumber):
        raise FuzzyInputError(f"expected TrapezoidalFuzzyNumber, got {type(tzfn).__name__}")
    xs = np.asarray(x, dtype=float)
    l, m, n, u = tzfn.l, tzfn.m, tzfn.n, tzfn.u
    out = np.zeros_like(xs)
    with np.errstate(all="ignore"):
        out = np.where((xs > l) & (xs < m), _ramp_up(xs, l, m), out)
        out = np.where((xs > n) & (xs < u), (u - xs) / np.where(u > n, u - n, 1.0), out)
    out = np.where((xs >= m) & (xs <= n), 1.0, out)
    return float(out) if out.ndim == 0 else out


def _check_scores(values: Sequence[float]) -> np.ndarray:
    arr = np.asarray(values, dtype=float).ravel()
    if arr.size == 0:
        raise FuzzyInputError("need at least one score")
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise FuzzyInputError(f"scores must be finite and strictly positive, got {arr.tolist()}")
    return arr


def geometric_mean(values: Sequence[float]) -> float:
    """n-th root of the product, evaluated as exp(mean(log)) to avoid overflow."""
    arr = _check_scores(values)
    lo, hi = arr.min(), arr.max()
    if lo == hi:
        return float(lo)
    g = math.exp(math.fsum(np.log(arr)) / arr.size)
    # rounding in exp/log must not push the mean outside [min, max]
    return float(min(max(g, lo), hi))


def aggregate_variable(scores: Sequence[float]) -> TriangularFuzzyNumber:
    """Collapse one variable's expert scores to (min, geometric mean, max)."""
    arr = _check_scores(scores)
    return TriangularFuzzyNumber(float(arr.min()), geometric_mean(arr), float(arr.max()))


def defuzzify_trapezoid(tzfn: TrapezoidalFuzzyNumber) -> float:
    """Centroid (center of gravity) of the trapezoid's membership region."""
    if not isinstance(tzfn, TrapezoidalFuzzyNumber):
        raise FuzzyInputError(f"expected TrapezoidalFuzzyNumber, got {type(tzfn).__name__}")
    l, m, n, u = tzfn.l, tzfn.m, tzfn.n, tzfn.u
    denom = 3.0 * (u + n - l - m)
    if denom == 0.0:
        return float(l)
    return ((u * u + n * n + u * n) - (l * l + m * m + l * m)) / denom


@dataclass(frozen=True)
class ExpertPanel:
    """Expert-by-variable score matrix."""

    variable_names: tuple
    scores: np.ndarray

    def __post_init__(self):
        scores = np.array(self.scores, dtype=float)
        if scores.ndim != 2:
            raise FuzzyInputError("panel scores must be a 2-D matrix (experts x variables)")
        n_experts, n_vars = scores.shape
        if n_experts < 1 or n_vars < 1:
            raise FuzzyInputError("panel needs at least one expert and one variable")
        if len(self.variable_names) != n_vars:
            raise FuzzyInputError(
                f"{len(self.variable_names)} variable names for {n_vars} score columns"
            )
        if not np.all(np.isfinite(scores)) or np.any(scores <= 0):
            bad = np.argwhere(~(scores > 0) | ~np.isfinite(scores))[0]
            raise FuzzyInputError(
                f"score of expert {bad[0] + 1} for {self.variable_names[bad[1]]!r} "
                f"is not strictly positive: {scores[bad[0], bad[1]]}"
            )
        scores.setflags(write=False)
        object.__setattr__(self, "variable_names", tuple(self.variable_names))
        object.__setattr__(self, "scores", scores)

    @classmethod
    def from_trapezoids(cls, variable_names, answers) -> "ExpertPanel":
        """Build a panel from trapezoidal answers, defuzzified by centroid."""
        crisp = [[defuzzify_trapezoid(t) for t in row] for row in answers]
        return cls(tuple(variable_names), np.array(crisp, dtype=float))


@dataclass(frozen=True)
class ScreeningResult:
    variable_names: tuple
    fuzzy_numbers: tuple
    selected: tuple
    threshold: float

    @property
    def selected_variables(self) -> list:
        return [name for name, keep in zip(self.variable_names, self.selected) if keep]


def screen_variables(panel: ExpertPanel, threshold: float = DEFAULT_THRESHOLD) -> ScreeningResult:
    """Aggregate every variable and keep those whose geometric mean is above ``threshold``.

    The comparison is strict (``m > threshold``).
    """
    if not threshold > 0:
        raise FuzzyInputError(f"threshold must be positive, got {threshold}")
    tfns = tuple(aggregate_variable(panel.scores[:, j]) for j in range(panel.scores.shape[1]))
    selected = tuple(bool(t.m > threshold) for t in tfns)
    return ScreeningResult(panel.variable_names, tfns, selected, float(threshold))


def load_panel(path) -> ExpertPanel:
    """Read a panel CSV: header of variable names, one row of scores per expert."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"expert panel file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if any(cell.strip() for cell in r)]
    if not rows:
        raise FuzzyInputError(f"{path}: empty panel file")
    names = [h.strip() for h in rows[0]]
    if len(rows) < 2:
        raise FuzzyInputError(f"{path}: panel has a header but no expert rows")
    scores = []
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != len(names):
            raise FuzzyInputError(f"{path}: line {i} has {len(row)} cells, expected {len(names)}")
        try:
            scores.append([float(c) for c in row])
        except ValueError as exc:
            raise FuzzyInputError(f"{path}: line {i}: {exc}") from None
    return ExpertPanel(tuple(names), np.array(scores))


def write_screening(result: ScreeningResult, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["variable", "l", "m", "u", "selected"])
        for name, t, keep in zip(result.variable_names, result.fuzzy_numbers, result.selected):
            w.writerow([name, f"{t.l:.17g}", f"{t.m:.17g}", f"{t.u:.17g}", str(keep).lower()])
