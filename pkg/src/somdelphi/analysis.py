"""Factor importance from weight planes, plane correlations and rank comparison."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np


class AnalysisError(ValueError):
    pass


@dataclass(frozen=True)
class FactorRanking:
    """Importance scores and 1-based ranks; ``entries`` is sorted by rank.

    ``variables`` keeps the original input order of the variable names.
    """

    entries: tuple  # ((name, score, rank), ...)
    variables: tuple

    def __post_init__(self):
        ranks = sorted(r for _, _, r in self.entries)
        if ranks != list(range(1, len(self.entries) + 1)):
            raise AnalysisError(f"ranks must be a permutation of 1..{len(self.entries)}, got {ranks}")
        if sorted(n for n, _, _ in self.entries) != sorted(self.variables):
            raise AnalysisError("ranking entries and variable list disagree")

    @classmethod
    def from_ranks(cls, names: Sequence[str], ranks: Sequence[int]) -> "FactorRanking":
        """Wrap an externally supplied ranking (e.g. experts'); score is the negated rank."""
        if len(names) != len(ranks):
            raise AnalysisError(f"{len(names)} names for {len(ranks)} ranks")
        if len(set(names)) != len(names):
            raise AnalysisError("duplicate variable names in ranking")
        entries = sorted(((str(n), -float(r), int(r)) for n, r in zip(names, ranks)), key=lambda e: e[2])
        return cls(tuple(entries), tuple(str(n) for n in names))

    def rank_of(self, name: str) -> int:
        for n, _, r in self.entries:
            if n == name:
                return r
        raise KeyError(name)

    def restricted(self, names) -> "FactorRanking":
        """Sub-ranking over ``names``, re-ranked 1..k in the original order."""
        keep = set(names)
        missing = keep - set(self.variables)
        if missing:
            raise AnalysisError(f"variables not in ranking: {sorted(missing)}")
        kept = [(n, s) for n, s, _ in self.entries if n in keep]
        entries = tuple((n, s, k + 1) for k, (n, s) in enumerate(kept))
        return FactorRanking(entries, tuple(v for v in self.variables if v in keep))

    def ranks(self) -> list:
        """Ranks in input variable order."""
        lookup = {n: r for n, _, r in self.entries}
        return [lookup[v] for v in self.variables]


def plane_values(planes) -> np.ndarray:
    shapes = {p.values.shape for p in planes}
    if len(shapes) != 1:
        raise AnalysisError(f"weight planes have inconsistent shapes: {sorted(shapes)}")
    return np.stack([p.values.ravel() for p in planes])


def rank_factors(planes, names: Sequence[str], absolute: bool = False) -> FactorRanking:
    """Rank variables by the mean of their weight plane (highest first).

    ``absolute=True`` ranks by mean absolute weight instead, which suits
    mean-centred data. Ties keep the input order.
    """
    if not planes:
        raise AnalysisError("need at least one weight plane")
    if len(names) != len(planes):
        raise AnalysisError(f"{len(names)} names for {len(planes)} planes")
    vals = plane_values(planes)
    scores = np.abs(vals).mean(axis=1) if absolute else vals.mean(axis=1)
    order = sorted(range(len(names)), key=lambda j: (-scores[j], j))
    entries = tuple((str(names[j]), float(scores[j]), k + 1) for k, j in enumerate(order))
    return FactorRanking(entries, tuple(str(n) for n in names))


def plane_correlation(planes) -> np.ndarray:
    """Pearson correlation between every pair of flattened weight planes."""
    if len(planes) < 2:
        raise AnalysisError("need at least two planes to correlate")
    vals = plane_values(planes)
    centered = vals - vals.mean(axis=1, keepdims=True)
    norms = np.sqrt((centered**2).sum(axis=1))
    flat = np.flatnonzero(norms == 0)
    if flat.size:
        labels = ", ".join(repr(planes[j].label or f"plane {j}") for j in flat)
        raise AnalysisError(f"correlation undefined for zero-variance plane(s): {labels}")
    unit = centered / norms[:, None]
    corr = np.clip(unit @ unit.T, -1.0, 1.0)
    corr = (corr + corr.T) / 2
    np.fill_diagonal(corr, 1.0)
    return corr


def spearman(ranks_a: Sequence[int], ranks_b: Sequence[int]) -> float:
    """Spearman's rho from paired ranks, 1 - 6 sum(d^2) / (n (n^2 - 1)); no tie correction."""
    a = np.asarray(ranks_a, dtype=float)
    b = np.asarray(ranks_b, dtype=float)
    n = a.size
    if n != b.size:
        raise AnalysisError("rank vectors differ in length")
    if n < 2:
        raise AnalysisError("Spearman correlation needs at least two variables")
    d2 = float(((a - b) ** 2).sum())
    return 1.0 - 6.0 * d2 / (n * (n * n - 1))


@dataclass(frozen=True)
class RankComparison:
    variables: tuple
    ranks_a: tuple
    ranks_b: tuple
    spearman: float
    labels: tuple = ("expert rank", "study rank")

    @property
    def differences(self) -> tuple:
        return tuple(b - a for a, b in zip(self.ranks_a, self.ranks_b))


def compare_rankings(a: FactorRanking, b: FactorRanking, labels=("expert rank", "study rank")) -> RankComparison:
    """Pair the two rankings by variable name (in ``a``'s input order)."""
    if set(a.variables) != set(b.variables):
        only_a = sorted(set(a.variables) - set(b.variables))
        only_b = sorted(set(b.variables) - set(a.variables))
        raise AnalysisError(f"rankings cover different variables: only first {only_a}, only second {only_b}")
    ra = tuple(a.rank_of(v) for v in a.variables)
    rb = tuple(b.rank_of(v) for v in a.variables)
    return RankComparison(a.variables, ra, rb, spearman(ra, rb), tuple(labels))


def load_ranking(path) -> FactorRanking:
    """Read a CSV with ``variable`` and ``rank`` columns."""
    with Path(path).open(newline="", encoding="utf-8-sig") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"variable", "rank"} <= set(reader.fieldnames):
            raise AnalysisError(f"{path}: ranking CSV needs 'variable' and 'rank' columns")
        rows = list(reader)
    try:
        return FactorRanking.from_ranks([r["variable"].strip() for r in rows], [int(r["rank"]) for r in rows])
    except ValueError as exc:
        raise AnalysisError(f"{path}: {exc}") from None


def write_ranking(ranking: FactorRanking, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["variable", "score", "rank"])
        for name, score, rank in ranking.entries:
            w.writerow([name, f"{score:.17g}", rank])


def write_comparison(cmp: RankComparison, path) -> None:
    """Variables as columns; one row per ranking plus the rank difference."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["variable", *cmp.variables])
        w.writerow([cmp.labels[0], *cmp.ranks_a])
        w.writerow([cmp.labels[1], *cmp.ranks_b])
        w.writerow(["difference", *cmp.differences])
