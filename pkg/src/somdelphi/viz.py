"""SOM diagnostic maps (U-matrix, hits, weight planes, weight positions) and
their rendering to binary PPM images, CSV sidecars and SVG scatter plots."""
from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .som import NEIGHBOR_TOL, SomGrid, _samples, bmu_indices


@dataclass
class HeatmapMatrix:
    values: np.ndarray
    label: str = ""
    hexagonal: bool = False
    value_range: tuple = field(default=None)

    def __post_init__(self):
        self.values = np.array(self.values, dtype=float)
        if self.values.ndim != 2:
            raise ValueError(f"heatmap values must be 2-D, got shape {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError(f"heatmap {self.label!r} has non-finite values")
        if self.value_range is None:
            self.value_range = (float(self.values.min()), float(self.values.max()))

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class Colormap:
    name: str
    stops: tuple  # ((position, (r, g, b)), ...)

    def __post_init__(self):
        pos = [p for p, _ in self.stops]
        if pos[0] != 0.0 or pos[-1] != 1.0 or any(b <= a for a, b in zip(pos, pos[1:])):
            raise ValueError("colormap positions must increase strictly from 0 to 1")

    def __call__(self, t) -> np.ndarray:
        """RGB uint8 colours for normalised values ``t`` in [0, 1]."""
        t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
        pos = np.array([p for p, _ in self.stops])
        rgb = np.array([c for _, c in self.stops], dtype=float)
        chans = [np.interp(t, pos, rgb[:, k]) for k in range(3)]
        return np.rint(np.stack(chans, axis=-1)).astype(np.uint8)


COLORMAPS = {
    # dark blue (low) to dark red (high) through white
    "bluered": Colormap(
        "bluered",
        (
            (0.0, (0, 0, 139)),
            (0.25, (0, 0, 255)),
            (0.5, (255, 255, 255)),
            (0.75, (255, 0, 0)),
            (1.0, (139, 0, 0)),
        ),
    ),
    # light (low) to dark red (high)
    "lightred": Colormap(
        "lightred",
        ((0.0, (255, 245, 235)), (0.5, (239, 59, 44)), (1.0, (103, 0, 13))),
    ),
}
DEFAULT_COLORMAP = "bluered"


def get_colormap(name: str) -> Colormap:
    try:
        return COLORMAPS[name]
    except KeyError:
        raise ValueError(f"unknown colormap {name!r}; choose from {sorted(COLORMAPS)}") from None


def _hex(grid: SomGrid) -> bool:
    return grid.topology.kind == "hexagonal"


def umatrix(grid: SomGrid) -> HeatmapMatrix:
    """Mean weight-space distance from each neuron to its lattice neighbours."""
    t = grid.topology
    nbr = (t.distances() <= 1 + NEIGHBOR_TOL) & ~np.eye(t.n_neurons, dtype=bool)
    w = grid.weights
    wd = np.sqrt(((w[:, None, :] - w[None, :, :]) ** 2).sum(axis=-1))
    counts = nbr.sum(axis=1)
    vals = np.where(counts > 0, (wd * nbr).sum(axis=1) / np.maximum(counts, 1), 0.0)
    return HeatmapMatrix(vals.reshape(t.rows, t.cols), "U-matrix", _hex(grid))


def hit_histogram(grid: SomGrid, ds) -> HeatmapMatrix:
    """Number of samples won by each neuron."""
    t = grid.topology
    counts = np.bincount(bmu_indices(grid, ds), minlength=t.n_neurons)
    return HeatmapMatrix(counts.reshape(t.rows, t.cols).astype(float), "hits", _hex(grid))


def weight_planes(grid: SomGrid, names: Optional[Sequence[str]] = None) -> list:
    t = grid.topology
    if names is None:
        names = [f"input {j + 1}" for j in range(grid.dim)]
    if len(names) != grid.dim:
        raise ValueError(f"{len(names)} names for {grid.dim} weight planes")
    return [
        HeatmapMatrix(grid.weights[:, j].reshape(t.rows, t.cols), str(names[j]), _hex(grid))
        for j in range(grid.dim)
    ]


def boundary_contrast(hm: HeatmapMatrix, fraction: float = 0.1) -> float:
    """Ratio of the mean of the top ``fraction`` of cells to the mean of the bottom fraction."""
    v = np.sort(hm.values.ravel())
    k = max(1, int(np.ceil(fraction * v.size)))
    low, high = v[:k].mean(), v[-k:].mean()
    if low == 0:
        return float("inf") if high > 0 else 1.0
    return float(high / low)


@dataclass
class ScatterDocument:
    """Codebook projected on two input dimensions, with lattice links and data points."""

    neurons: np.ndarray
    samples: np.ndarray
    segments: list
    x_label: str
    y_label: str

    def to_svg(self, size: int = 600, margin: int = 50) -> str:
        pts = np.vstack([self.neurons, self.samples]) if len(self.samples) else self.neurons
        lo, hi = pts.min(axis=0), pts.max(axis=0)
        span = np.where(hi > lo, hi - lo, 1.0)
        inner = size - 2 * margin

        def px(p):
            q = (np.asarray(p) - lo) / span
            return margin + q[0] * inner, size - margin - q[1] * inner

        out = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
            f'viewBox="0 0 {size} {size}">',
            f'<rect width="{size}" height="{size}" fill="white"/>',
            f'<g id="samples" fill="#2ca02c">',
        ]
        for s in self.samples:
            x, y = px(s)
            out.append(f'<circle cx="{x:.3f}" cy="{y:.3f}" r="2"/>')
        out.append("</g>")
        out.append('<g id="segments" stroke="#d62728" stroke-width="1">')
        for i, j in self.segments:
            (x1, y1), (x2, y2) = px(self.neurons[i]), px(self.neurons[j])
            out.append(f'<line x1="{x1:.3f}" y1="{y1:.3f}" x2="{x2:.3f}" y2="{y2:.3f}"/>')
        out.append("</g>")
        out.append('<g id="neurons" fill="#1f77b4">')
        for nrn in self.neurons:
            x, y = px(nrn)
            out.append(f'<circle cx="{x:.3f}" cy="{y:.3f}" r="4"/>')
        out.append("</g>")
        out.append(
            f'<text x="{size / 2:.1f}" y="{size - 10}" text-anchor="middle">{_esc(self.x_label)}</text>'
        )
        out.append(
            f'<text x="15" y="{size / 2:.1f}" text-anchor="middle" '
            f'transform="rotate(-90 15 {size / 2:.1f})">{_esc(self.y_label)}</text>'
        )
        out.append("</svg>")
        return "\n".join(out) + "\n"

    def write(self, path) -> None:
        Path(path).write_text(self.to_svg(), encoding="utf-8")


def _esc(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def weight_positions(grid: SomGrid, ds, dims=(0, 1), names: Optional[Sequence[str]] = None) -> ScatterDocument:
    a, b = dims
    for d in (a, b):
        if not 0 <= d < grid.dim:
            raise IndexError(f"dimension {d} out of range for dim {grid.dim}")
    x = _samples(ds)
    if names is None:
        names = [f"input {j + 1}" for j in range(grid.dim)]
    return ScatterDocument(
        neurons=grid.weights[:, [a, b]].copy(),
        samples=x[:, [a, b]].copy() if x.size else np.empty((0, 2)),
        segments=grid.topology.neighbor_pairs(),
        x_label=str(names[a]),
        y_label=str(names[b]),
    )


def heatmap_rgb(hm: HeatmapMatrix, cm: Colormap, cell_px: int) -> np.ndarray:
    """Rasterise to an (rows*cell_px, cols*cell_px, 3) image.

    Hexagonal maps shift odd rows right by half a cell; the part pushed past the
    right edge is clipped and the uncovered left strip stays white.
    """
    if cell_px < 1:
        raise ValueError(f"cell_px must be >= 1, got {cell_px}")
    lo, hi = float(hm.values.min()), float(hm.values.max())
    norm = np.zeros_like(hm.values) if hi == lo else (hm.values - lo) / (hi - lo)
    colors = cm(norm)
    img = np.repeat(np.repeat(colors, cell_px, axis=0), cell_px, axis=1)
    if hm.hexagonal:
        shift = cell_px // 2
        if shift:
            for r in range(1, hm.rows, 2):
                band = img[r * cell_px:(r + 1) * cell_px]
                band[:, shift:] = band[:, :-shift].copy()
                band[:, :shift] = 255
    return img


def write_ppm(img: np.ndarray, path) -> None:
    h, w, _ = img.shape
    with Path(path).open("wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(img, dtype=np.uint8).tobytes())


def read_ppm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    m = re.match(rb"P6\s+(\d+)\s+(\d+)\s+255\s", data)
    if m is None:
        raise ValueError(f"{path}: not an 8-bit binary PPM")
    w, h = int(m.group(1)), int(m.group(2))
    return np.frombuffer(data, dtype=np.uint8, count=w * h * 3, offset=m.end()).reshape(h, w, 3)


def write_matrix_csv(values: np.ndarray, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for row in np.atleast_2d(values):
            w.writerow([f"{v:.17g}" for v in row])


def read_matrix_csv(path) -> np.ndarray:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        return np.array([[float(c) for c in row] for row in csv.reader(fh) if row])


def render_heatmap(hm: HeatmapMatrix, cm: Colormap, path, cell_px: int = 20) -> Path:
    """Write ``path`` as a P6 pixmap and a same-named ``.csv`` with the raw values.

    Values are min-max normalised; a constant matrix maps to position 0.
    Returns the sidecar path.
    """
    path = Path(path)
    img = heatmap_rgb(hm, cm, cell_px)
    write_ppm(img, path)
    sidecar = path.with_suffix(".csv")
    write_matrix_csv(hm.values, sidecar)
    return sidecar
