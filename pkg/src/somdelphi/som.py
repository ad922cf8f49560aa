"""Kohonen self-organizing map: lattice, codebook, training and quality metrics.

Neurons are indexed row-major. On a hexagonal lattice odd rows are shifted by
half a cell and rows are sqrt(3)/2 apart, so every interior neuron has six
neighbours at lattice distance 1. On a rectangular lattice it has four.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Optional

import numpy as np

from .preprocess import Dataset

PRNG_NAME = "numpy.PCG64"
MODEL_FORMAT_VERSION = 1
NEIGHBOR_TOL = 1e-9
KINDS = ("rectangular", "hexagonal")
MODES = ("sequential", "batch")


class SomError(ValueError):
    pass


class DimensionMismatchError(SomError):
    pass


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """PCG64 generator for ``seed``; ``stream`` separates init from shuffling."""
    if not 0 <= int(seed) < 2**64:
        raise SomError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(stream,))))


@lru_cache(maxsize=32)
def _lattice(kind: str, rows: int, cols: int):
    r, c = np.divmod(np.arange(rows * cols), cols)
    if kind == "hexagonal":
        pos = np.column_stack([c + 0.5 * (r % 2), r * (math.sqrt(3) / 2)])
    else:
        pos = np.column_stack([c, r]).astype(float)
    diff = pos[:, None, :] - pos[None, :, :]
    dist = np.sqrt((diff**2).sum(axis=-1))
    for a in (pos, dist):
        a.setflags(write=False)
    return pos, dist


@dataclass(frozen=True)
class Topology:
    kind: str = "hexagonal"
    rows: int = 10
    cols: int = 10

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SomError(f"topology kind must be one of {KINDS}, got {self.kind!r}")
        if int(self.rows) < 1 or int(self.cols) < 1:
            raise SomError(f"topology needs rows >= 1 and cols >= 1, got {self.rows}x{self.cols}")

    @property
    def n_neurons(self) -> int:
        return self.rows * self.cols

    def positions(self) -> np.ndarray:
        """Plane coordinates (x, y) of every neuron centre."""
        return _lattice(self.kind, self.rows, self.cols)[0]

    def distances(self) -> np.ndarray:
        """Full matrix of lattice distances between neurons."""
        return _lattice(self.kind, self.rows, self.cols)[1]

    def neighbor_pairs(self) -> list:
        d = self.distances()
        i, j = np.nonzero(np.triu(d <= 1 + NEIGHBOR_TOL, k=1))
        return list(zip(i.tolist(), j.tolist()))


@dataclass
class SomGrid:
    topology: Topology
    weights: np.ndarray

    def __post_init__(self):
        self.weights = np.array(self.weights, dtype=float)
        if self.weights.ndim != 2 or self.weights.shape[0] != self.topology.n_neurons:
            raise SomError(
                f"weights must have shape ({self.topology.n_neurons}, dim), got {self.weights.shape}"
            )
        if self.weights.shape[1] < 1:
            raise SomError("weight vectors need at least one component")

    @property
    def dim(self) -> int:
        return self.weights.shape[1]

    @property
    def n_neurons(self) -> int:
        return self.topology.n_neurons

    def copy(self) -> "SomGrid":
        return SomGrid(self.topology, self.weights.copy())


def init_grid(topology: Topology, dim: int, seed: int, data_range=None) -> SomGrid:
    """Random codebook, uniform per dimension over ``data_range`` (default [0, 1))."""
    if dim < 1:
        raise SomError(f"dim must be >= 1, got {dim}")
    if data_range is None:
        lo, hi = np.zeros(dim), np.ones(dim)
    else:
        bounds = np.asarray(data_range, dtype=float).reshape(-1, 2)
        if bounds.shape[0] != dim:
            raise DimensionMismatchError(f"data_range has {bounds.shape[0]} entries for dim {dim}")
        lo, hi = bounds[:, 0], bounds[:, 1]
        if np.any(hi < lo):
            raise SomError("data_range entries must be (min, max) with min <= max")
    rng = make_rng(seed, stream=0)
    u = rng.random((topology.n_neurons, dim))
    return SomGrid(topology, lo + (hi - lo) * u)


def data_range(ds) -> np.ndarray:
    x = _samples(ds)
    return np.column_stack([x.min(axis=0), x.max(axis=0)])


def grid_distance(a: int, b: int, topology: Topology) -> float:
    n = topology.n_neurons
    for idx in (a, b):
        if not 0 <= idx < n:
            raise IndexError(f"neuron index {idx} out of range for {n} neurons")
    return float(topology.distances()[a, b])


def _samples(ds) -> np.ndarray:
    return ds.samples if isinstance(ds, Dataset) else np.atleast_2d(np.asarray(ds, dtype=float))


def _check_dim(grid: SomGrid, x: np.ndarray):
    if x.shape[-1] != grid.dim:
        raise DimensionMismatchError(f"input has {x.shape[-1]} components, grid dim is {grid.dim}")


def _sq_dists(weights: np.ndarray, x: np.ndarray) -> np.ndarray:
    diff = weights - x
    return np.einsum("ij,ij->i", diff, diff)


def find_bmu(grid: SomGrid, x) -> tuple:
    """Best matching unit for ``x``: (neuron index, Euclidean distance).

    Ties go to the lowest index.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise DimensionMismatchError("find_bmu expects a single input vector")
    _check_dim(grid, x)
    d2 = _sq_dists(grid.weights, x)
    i = int(np.argmin(d2))
    return i, float(math.sqrt(d2[i]))


def _bmus(weights: np.ndarray, x: np.ndarray) -> np.ndarray:
    # squared distances of all samples to all neurons, argmin keeps first on ties
    d2 = ((x[:, None, :] - weights[None, :, :]) ** 2).sum(axis=-1)
    return np.argmin(d2, axis=1), d2


def gaussian_neighborhood(lattice_dist, radius: float):
    """exp(-d^2 / (2 radius^2)); scalar or array ``lattice_dist``."""
    if not radius > 0:
        raise SomError(f"neighborhood radius must be positive, got {radius}")
    d = np.asarray(lattice_dist, dtype=float)
    h = np.exp(-(d * d) / (2.0 * radius * radius))
    return float(h) if h.ndim == 0 else h


def _sequential_step(weights, lattice_dist, x, lr, radius) -> int:
    """In-place online update; returns the BMU index."""
    diff = x - weights
    bmu = int(np.argmin(np.einsum("ij,ij->i", diff, diff)))
    d = lattice_dist[bmu]
    h = lr * np.exp(-(d * d) / (2.0 * radius * radius))
    weights += h[:, None] * diff
    return bmu


def sequential_update(grid: SomGrid, x, lr: float, radius: float) -> SomGrid:
    """One online step: every neuron moves toward ``x`` by lr * h(lattice distance to BMU)."""
    x = np.asarray(x, dtype=float)
    _check_dim(grid, x)
    if not 0 < lr <= 1:
        raise SomError(f"learning rate must lie in (0, 1], got {lr}")
    if not radius > 0:
        raise SomError(f"neighborhood radius must be positive, got {radius}")
    out = grid.copy()
    _sequential_step(out.weights, grid.topology.distances(), x, lr, radius)
    return out


def _batch_step(weights, lattice_dist, x, radius) -> None:
    n = weights.shape[0]
    bmus, _ = _bmus(weights, x)
    counts = np.bincount(bmus, minlength=n).astype(float)
    # per-neuron mean of assigned samples, shifted by the first assigned sample so
    # identical samples reproduce themselves exactly
    hit, first = np.unique(bmus, return_index=True)
    ref = np.zeros_like(weights)
    ref[hit] = x[first]
    sums = np.zeros_like(weights)
    np.add.at(sums, bmus, x - ref[bmus])
    means = ref.copy()
    means[hit] += sums[hit] / counts[hit, None]

    h = np.exp(-(lattice_dist[:, hit] ** 2) / (2.0 * radius * radius)) * counts[hit]
    total = h.sum(axis=1)
    live = total > 0
    w = h[live] / total[live, None]
    weights[live] = w @ means[hit]


def batch_epoch(grid: SomGrid, ds, radius: float) -> SomGrid:
    """One batch pass: each neuron becomes the neighborhood-weighted mean of the samples."""
    x = _samples(ds)
    if x.shape[0] == 0:
        raise SomError("batch_epoch needs a non-empty dataset")
    _check_dim(grid, x)
    if not radius > 0:
        raise SomError(f"neighborhood radius must be positive, got {radius}")
    out = grid.copy()
    _batch_step(out.weights, grid.topology.distances(), x, radius)
    return out


@dataclass(frozen=True)
class Phase:
    epochs: int
    lr_start: float
    lr_end: float
    radius_start: float
    radius_end: float

    def validate(self, name: str) -> list:
        errs = []
        if self.epochs < 0:
            errs.append(f"{name}: epochs must be >= 0")
        for label, v in (("lr_start", self.lr_start), ("lr_end", self.lr_end)):
            if not 0 < v <= 1:
                errs.append(f"{name}: {label} must lie in (0, 1], got {v}")
        if self.radius_start < 0 or self.radius_end < 0:
            errs.append(f"{name}: radii must be >= 0")
        if self.radius_end > self.radius_start:
            errs.append(f"{name}: radius must not increase within a phase")
        return errs

    def ramp(self, steps: int):
        """Learning rate and radius for each of ``steps`` steps, linear start->end."""
        return np.linspace(self.lr_start, self.lr_end, steps), np.linspace(
            self.radius_start, self.radius_end, steps
        )


@dataclass(frozen=True)
class TrainingSchedule:
    rough: Phase
    fine: Phase
    mode: str = "sequential"
    seed: int = 42
    shuffle: bool = True
    radius_floor: float = 0.01

    def __post_init__(self):
        errs = self.rough.validate("rough") + self.fine.validate("fine")
        if self.mode not in MODES:
            errs.append(f"mode must be one of {MODES}, got {self.mode!r}")
        if not self.radius_floor > 0:
            errs.append("radius_floor must be positive")
        if errs:
            raise SomError("; ".join(errs))

    @classmethod
    def default(cls, rows: int, cols: int, **kw) -> "TrainingSchedule":
        """Two phases of 100 epochs: coarse ordering, then fine tuning."""
        rough = Phase(100, 0.5, 0.05, max(rows, cols) / 2.0, 1.0)
        fine = Phase(100, 0.05, 0.01, 1.0, 0.3)
        if rough.radius_start < rough.radius_end:
            rough = Phase(100, 0.5, 0.05, 1.0, 1.0)
        return cls(rough, fine, **kw)

    @property
    def total_epochs(self) -> int:
        return self.rough.epochs + self.fine.epochs

    def summary(self) -> dict:
        return asdict(self)


@dataclass
class TrainingReport:
    mse_history: list = field(default_factory=list)
    initial_mse: float = float("nan")
    final_mse: float = float("nan")
    epochs_per_phase: dict = field(default_factory=dict)
    seed: int = 0
    prng: str = PRNG_NAME


def train(grid: SomGrid, ds, schedule: TrainingSchedule):
    """Run the rough then the fine phase; returns (trained grid, report).

    Sequential mode decays learning rate and radius per presented sample and
    reshuffles the samples every epoch (unless ``schedule.shuffle`` is off).
    Batch mode decays the radius per epoch and ignores the learning rate.
    """
    x = _samples(ds)
    if x.shape[0] == 0:
        raise SomError("cannot train on an empty dataset")
    _check_dim(grid, x)
    out = grid.copy()
    weights = out.weights
    dist = grid.topology.distances()
    rng = make_rng(schedule.seed, stream=1)
    n = x.shape[0]
    report = TrainingReport(initial_mse=mse(grid, x), seed=schedule.seed)

    for name, phase in (("rough", schedule.rough), ("fine", schedule.fine)):
        if phase.epochs == 0:
            report.epochs_per_phase[name] = 0
            continue
        if schedule.mode == "sequential":
            lrs, radii = phase.ramp(phase.epochs * n)
        else:
            lrs, radii = phase.ramp(phase.epochs)
        radii = np.maximum(radii, schedule.radius_floor)
        for epoch in range(phase.epochs):
            if schedule.mode == "sequential":
                order = rng.permutation(n) if schedule.shuffle else np.arange(n)
                base = epoch * n
                for k, idx in enumerate(order):
                    _sequential_step(weights, dist, x[idx], lrs[base + k], radii[base + k])
            else:
                _batch_step(weights, dist, x, radii[epoch])
            report.mse_history.append(mse(out, x))
        report.epochs_per_phase[name] = phase.epochs

    report.final_mse = report.mse_history[-1] if report.mse_history else report.initial_mse
    return out, report


def mse(grid: SomGrid, ds) -> float:
    """Mean squared Euclidean distance from each sample to its BMU weight."""
    x = _samples(ds)
    if x.shape[0] == 0:
        raise SomError("mse needs a non-empty dataset")
    _check_dim(grid, x)
    bmus, d2 = _bmus(grid.weights, x)
    return float(d2[np.arange(x.shape[0]), bmus].mean())


def bmu_indices(grid: SomGrid, ds) -> np.ndarray:
    x = _samples(ds)
    _check_dim(grid, x)
    return _bmus(grid.weights, x)[0]


def topographic_error(grid: SomGrid, ds) -> float:
    """Fraction of samples whose first and second BMUs are not lattice neighbours."""
    x = _samples(ds)
    _check_dim(grid, x)
    if grid.n_neurons < 2:
        raise SomError("topographic error needs at least 2 neurons")
    _, d2 = _bmus(grid.weights, x)
    order = np.argsort(d2, axis=1, kind="stable")[:, :2]
    lat = grid.topology.distances()[order[:, 0], order[:, 1]]
    return float(np.mean(lat > 1 + NEIGHBOR_TOL))


def save_model(grid: SomGrid, path, seed: Optional[int] = None, schedule: Optional[TrainingSchedule] = None,
               variable_names=None) -> None:
    """Write the codebook as versioned plain text with 17 significant digits."""
    t = grid.topology
    lines = [
        "# somdelphi SOM codebook",
        f"format_version {MODEL_FORMAT_VERSION}",
        f"topology {t.kind}",
        f"rows {t.rows}",
        f"cols {t.cols}",
        f"dim {grid.dim}",
        f"seed {'none' if seed is None else int(seed)}",
        f"prng {PRNG_NAME}",
        f"schedule {json.dumps(schedule.summary() if schedule else None, sort_keys=True)}",
        f"variables {json.dumps(list(variable_names) if variable_names else None)}",
        "weights",
    ]
    lines += [" ".join(f"{v:.16e}" for v in row) for row in grid.weights]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_model(path):
    """Read a codebook written by :func:`save_model`; returns (grid, header dict)."""
    text = Path(path).read_text(encoding="utf-8").splitlines()
    header = {}
    it = iter(text)
    for line in it:
        if not line or line.startswith("#"):
            continue
        if line == "weights":
            break
        key, _, value = line.partition(" ")
        header[key] = value
    else:
        raise SomError(f"{path}: no 'weights' section")
    if int(header.get("format_version", -1)) != MODEL_FORMAT_VERSION:
        raise SomError(f"{path}: unsupported model format {header.get('format_version')!r}")
    topo = Topology(header["topology"], int(header["rows"]), int(header["cols"]))
    dim = int(header["dim"])
    rows = [list(map(float, line.split())) for line in it if line.strip()]
    weights = np.array(rows, dtype=float)
    if weights.shape != (topo.n_neurons, dim):
        raise SomError(f"{path}: expected {topo.n_neurons}x{dim} weights, found {weights.shape}")
    meta = {
        "seed": None if header["seed"] == "none" else int(header["seed"]),
        "prng": header.get("prng"),
        "schedule": json.loads(header.get("schedule", "null")),
        "variables": json.loads(header.get("variables", "null")),
    }
    return SomGrid(topo, weights), meta
