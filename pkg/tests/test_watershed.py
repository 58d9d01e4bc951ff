import numpy as np
import pytest

import oracles
from octshed import watershed as ws
from octshed.morph import EmptyMarker, label_components, regional_minima
from octshed.imgcore import DimensionMismatch


def test_quantize_round_half_up():
    assert ws.quantize(np.array([[0.49, 0.5, 1.5, 2.5, -3, 300]])).tolist() == [[0, 1, 2, 3, 0, 255]]


def test_gradient_examples():
    assert not ws.gradient_magnitude(np.full((4, 5), 17.0)).any()
    assert ws.gradient_magnitude(np.array([[9.0]])).tolist() == [[0.0]]
    h = 10.0
    step = np.zeros((5, 6))
    step[:, 3:] = h
    g = ws.gradient_magnitude(step)
    assert g[2, 2] == 4 * h and g[2, 3] == 4 * h
    assert g[2, 0] == 0 and g[2, 5] == 0


def test_level_sets_nested():
    img = np.random.default_rng(0).integers(0, 6, (5, 5))
    sets = ws.flood_level_sets(img)
    prev = np.zeros(img.shape, dtype=bool)
    for level in sets.levels:
        cur = sets.threshold_set(level)
        assert np.all(cur[prev])
        prev = cur
    assert prev.all()


@pytest.mark.parametrize("fn", [ws.watershed_vs, ws.flooding_oracle])
def test_constant_image(fn):
    res = fn(np.full((4, 6), 3.0))
    assert res.n_basins == 1 and res.watershed_pixels == 0 and (res.labels == 1).all()


@pytest.mark.parametrize("fn", [ws.watershed_vs, ws.flooding_oracle])
def test_row_examples(fn):
    res = fn(np.array([[0, 1, 2, 1, 0]], dtype=float))
    assert res.labels.tolist() == [[1, 1, 0, 2, 2]] and res.n_basins == 2
    res = fn(np.array([[0, 2, 1, 2, 0]], dtype=float))
    assert res.labels.tolist() == [[1, 0, 2, 0, 3]] and res.n_basins == 3


@pytest.mark.parametrize("fn", [ws.watershed_vs, ws.flooding_oracle])
def test_two_minima_vertical_line(fn):
    img = np.full((5, 5), 9.0)
    img[2, 1] = img[2, 3] = 0  # (x=1, y=2) and (x=3, y=2)
    res = fn(img)
    assert res.n_basins == 2
    assert (res.labels[:, 2] == 0).all()
    assert (res.labels[:, :2] == 1).all() and (res.labels[:, 3:] == 2).all()


def test_oracle_size_limit():
    with pytest.raises(ws.ImageTooLarge):
        ws.flooding_oracle(np.zeros((65, 3)))


@pytest.mark.parametrize("conn", ["four", "eight"])
def test_matches_oracle_on_random_images(conn):
    rng = np.random.default_rng(2024)
    for _ in range(150):
        h, w = rng.integers(1, 9, size=2)
        img = rng.integers(0, rng.integers(2, 9), (h, w)).astype(float)
        a, b = ws.watershed_vs(img, conn), ws.flooding_oracle(img, conn)
        assert np.array_equal(a.labels, b.labels), img


def test_matches_oracle_on_plateaus():
    rng = np.random.default_rng(5)
    for _ in range(30):
        img = rng.integers(0, 3, (4, 5)).repeat(3, axis=0).repeat(3, axis=1).astype(float)
        np.testing.assert_array_equal(ws.watershed_vs(img).labels, ws.flooding_oracle(img).labels)


@pytest.mark.parametrize("conn", ["four", "eight"])
def test_partition_properties(conn):
    rng = np.random.default_rng(77)
    for _ in range(30):
        img = rng.integers(0, 12, (10, 9)).astype(float)
        res = ws.watershed_vs(img, conn)
        labels = res.labels
        assert set(np.unique(labels[labels > 0])) == set(range(1, res.n_basins + 1))
        assert res.watershed_pixels == int((labels == 0).sum())
        minima = oracles.components(regional_minima(ws.quantize(img).astype(float), conn), conn)
        assert res.n_basins == len(minima)
        for k in range(1, res.n_basins + 1):
            assert len(oracles.components(labels == k, conn)) == 1
            assert sum(1 for c in minima if all(labels[p] == k for p in c)) == 1


def test_monotone_transform_invariance():
    rng = np.random.default_rng(31)
    for _ in range(20):
        img = rng.integers(128, 256, (8, 8)).astype(float)
        np.testing.assert_array_equal(ws.watershed_vs(img).labels, ws.watershed_vs(img ** 2 / 255).labels)


def test_determinism():
    img = np.random.default_rng(1).normal(100, 30, (40, 50))
    a, b = ws.watershed_vs(img), ws.watershed_vs(img.copy())
    assert a.labels.tobytes() == b.labels.tobytes()


def test_marker_watershed_examples():
    row = np.zeros((1, 7))
    markers = np.zeros((1, 7), dtype=bool)
    markers[0, [0, 6]] = True
    assert ws.marker_watershed(row, markers).labels.tolist() == [[1, 1, 1, 0, 2, 2, 2]]
    whole = ws.marker_watershed(np.random.default_rng(0).random((4, 4)) * 255, np.ones((4, 4), dtype=bool))
    assert whole.n_basins == 1 and whole.watershed_pixels == 0
    one = np.zeros((1, 5), dtype=bool)
    one[0, 0] = True
    res = ws.marker_watershed(np.array([[0, 1, 2, 1, 0]], dtype=float), one)
    assert res.n_basins == 1 and (res.labels == 1).all()
    with pytest.raises(EmptyMarker):
        ws.marker_watershed(row, np.zeros_like(markers))
    with pytest.raises(DimensionMismatch):
        ws.marker_watershed(row, np.ones((2, 2), dtype=bool))


def test_marker_watershed_basins_equal_marker_components():
    rng = np.random.default_rng(12)
    for conn in ("four", "eight"):
        for _ in range(40):
            img = rng.integers(0, 256, (12, 12)).astype(float)
            markers = rng.random((12, 12)) < 0.08
            if not markers.any():
                continue
            res = ws.marker_watershed(img, markers, conn)
            _, n = label_components(markers, conn)
            assert res.n_basins == n
            lbl, _ = label_components(markers, conn)
            # basin k holds marker component k
            np.testing.assert_array_equal(res.labels[markers], lbl[markers])
