import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cluster_runs import cluster_runs
from somdelphi.som import SomGrid, Topology, init_grid
from somdelphi.viz import (
    COLORMAPS,
    Colormap,
    HeatmapMatrix,
    get_colormap,
    heatmap_rgb,
    hit_histogram,
    read_matrix_csv,
    read_ppm,
    render_heatmap,
    umatrix,
    weight_planes,
    weight_positions,
)

CM = COLORMAPS["bluered"]


def test_umatrix_examples():
    g = SomGrid(Topology("rectangular", 3, 3), np.full((9, 2), 0.7))
    assert np.all(umatrix(g).values == 0)
    g = SomGrid(Topology("rectangular", 1, 2), [[0.0], [3.0]])
    assert umatrix(g).values.tolist() == [[3.0, 3.0]]


def test_umatrix_hand_computed_corner():
    # 2x2 rectangular: neuron 0 neighbours 1 and 2
    g = SomGrid(Topology("rectangular", 2, 2), [[0.0], [1.0], [3.0], [10.0]])
    assert umatrix(g).values[0, 0] == pytest.approx(2.0)
    assert umatrix(g).values.shape == (2, 2)


@given(st.integers(0, 2**32 - 1))
def test_umatrix_nonnegative_and_permutation_invariant(seed):
    rng = np.random.default_rng(seed)
    t = Topology("hexagonal", int(rng.integers(1, 6)), int(rng.integers(1, 6)))
    w = rng.normal(size=(t.n_neurons, 4))
    u = umatrix(SomGrid(t, w)).values
    assert np.all(u >= 0)
    perm = rng.permutation(4)
    np.testing.assert_allclose(umatrix(SomGrid(t, w[:, perm])).values, u, rtol=1e-12, atol=1e-12)


def test_hit_histogram_examples():
    g = init_grid(Topology("hexagonal", 4, 4), 2, 0)
    h = hit_histogram(g, [[0.5, 0.5]])
    assert h.values.sum() == 1 and np.count_nonzero(h.values) == 1
    one = SomGrid(Topology("rectangular", 1, 1), [[0.0, 0.0]])
    assert hit_histogram(one, np.ones((13, 2))).values.tolist() == [[13.0]]


@given(st.integers(0, 2**32 - 1))
def test_hit_histogram_counts(seed):
    rng = np.random.default_rng(seed)
    t = Topology("rectangular", int(rng.integers(1, 6)), int(rng.integers(1, 6)))
    n = int(rng.integers(1, 120))
    h = hit_histogram(SomGrid(t, rng.normal(size=(t.n_neurons, 3))), rng.normal(size=(n, 3)))
    assert np.all(h.values >= 0) and np.all(h.values == np.round(h.values))
    assert h.values.sum() == n


def test_weight_planes():
    g = init_grid(Topology("hexagonal", 10, 10), 10, 1)
    planes = weight_planes(g, [f"v{j}" for j in range(10)])
    assert len(planes) == 10 and planes[3].label == "v3"
    rebuilt = np.stack([p.values.ravel() for p in planes], axis=1)
    assert rebuilt.tobytes() == g.weights.tobytes()
    const = init_grid(Topology("rectangular", 2, 3), 2, 1, [(5, 5), (5, 5)])
    assert all(np.all(p.values == 5) for p in weight_planes(const))
    with pytest.raises(ValueError):
        weight_planes(g, ["a"])


@pytest.mark.parametrize("kind", ["rectangular", "hexagonal"])
def test_weight_positions(kind, tmp_path):
    t = Topology(kind, 3, 4)
    g = init_grid(t, 2, 5)
    x = np.random.default_rng(0).random((7, 2))
    doc = weight_positions(g, x, (0, 1))
    assert doc.neurons.tolist() == g.weights.tolist()
    assert doc.samples.tolist() == x.tolist()
    expected_segments = 3 * 3 + 4 * 2 if kind == "rectangular" else 3 * 3 + 2 * 7
    assert len(doc.segments) == expected_segments
    doc.write(tmp_path / "p.svg")
    svg = (tmp_path / "p.svg").read_text()
    assert svg.count("<line ") == expected_segments
    assert svg.count('r="4"') == 12 and svg.count('r="2"') == 7
    with pytest.raises(IndexError):
        weight_positions(g, x, (0, 2))


def test_colormap_endpoints_and_validation():
    assert CM(0.0).tolist() == [0, 0, 139]
    assert CM(1.0).tolist() == [139, 0, 0]
    assert CM(0.5).tolist() == [255, 255, 255]
    with pytest.raises(ValueError):
        Colormap("bad", ((0.0, (0, 0, 0)), (0.0, (1, 1, 1)), (1.0, (2, 2, 2))))
    with pytest.raises(ValueError):
        get_colormap("jet")


def test_render_constant_matrix(tmp_path):
    hm = HeatmapMatrix(np.full((2, 3), 7.0))
    render_heatmap(hm, CM, tmp_path / "c.ppm", 4)
    img = read_ppm(tmp_path / "c.ppm")
    assert img.shape == (8, 12, 3)
    assert np.all(img == CM(0.0))


def test_render_endpoints(tmp_path):
    hm = HeatmapMatrix([[0.0, 1.0]])
    sidecar = render_heatmap(hm, CM, tmp_path / "e.ppm", 3)
    img = read_ppm(tmp_path / "e.ppm")
    assert np.all(img[:, :3] == CM(0.0)) and np.all(img[:, 3:] == CM(1.0))
    assert sidecar == tmp_path / "e.csv"
    assert (tmp_path / "e.ppm").read_bytes().startswith(b"P6\n6 3\n255\n")


@given(st.integers(0, 2**32 - 1), st.integers(1, 9), st.booleans())
def test_render_dimensions_and_sidecar(tmp_path_factory, seed, cell, hexagonal):
    rng = np.random.default_rng(seed)
    vals = rng.normal(size=(int(rng.integers(1, 8)), int(rng.integers(1, 8)))) * 10.0 ** rng.integers(-5, 5)
    hm = HeatmapMatrix(vals, hexagonal=hexagonal)
    out = tmp_path_factory.mktemp("r") / "h.ppm"
    sidecar = render_heatmap(hm, CM, out, cell)
    assert read_ppm(out).shape == (vals.shape[0] * cell, vals.shape[1] * cell, 3)
    assert read_matrix_csv(sidecar).tobytes() == vals.tobytes()


def test_hex_rows_are_offset():
    hm = HeatmapMatrix([[0.0, 1.0], [0.0, 1.0]], hexagonal=True)
    img = heatmap_rgb(hm, CM, 4)
    assert np.all(img[4:, :2] == 255)
    assert np.all(img[4:, 2:6] == CM(0.0))
    assert np.all(img[:4, :4] == CM(0.0))


def test_render_bad_cell_size(tmp_path):
    with pytest.raises(ValueError):
        render_heatmap(HeatmapMatrix([[1.0]]), CM, tmp_path / "x.ppm", 0)


@pytest.mark.slow
def test_cluster_boundaries_visible_in_umatrix():
    runs = cluster_runs()
    assert sum(r["contrast"] >= 2 for r in runs) >= 90
