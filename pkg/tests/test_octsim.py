import numpy as np
import pytest

import oracles
from octshed import octsim
from octshed.morph import label_components


def test_hann1d_examples():
    np.testing.assert_allclose(octsim.hann1d(3), [0, 1, 0], atol=1e-15)
    np.testing.assert_allclose(octsim.hann1d(4), [0, 0.75, 0.75, 0], atol=1e-15)
    w = octsim.hann1d(1024)
    assert w[0] == 0 and w[-1] == 0
    np.testing.assert_allclose(w, w[::-1], atol=1e-15)
    with pytest.raises(octsim.DimensionTooSmall):
        octsim.hann1d(1)


def test_hann2d_examples():
    w = octsim.hann2d(5, 5)
    assert w[2, 2] == pytest.approx(1.0, abs=1e-15)
    assert w[1, 1] == pytest.approx(0.25, abs=1e-15)
    assert not w[0].any() and not w[:, 0].any() and not w[-1].any() and not w[:, -1].any()
    assert octsim.hann2d(7, 3).shape == (3, 7)
    with pytest.raises(octsim.DimensionTooSmall):
        octsim.hann2d(1, 5)


def test_hann2d_separable_exactly():
    for p, q in [(2, 2), (5, 9), (64, 33)]:
        w = octsim.hann2d(p, q)
        a, b = octsim.hann1d(p), octsim.hann1d(q)
        for j in range(q):
            for i in range(p):
                assert w[j, i] == a[i] * b[j]


def test_constant_scan_is_dc_only():
    prof = octsim.reconstruct_ascan(np.full(64, 3.0), "none")
    assert prof.shape == (32,)
    assert prof[0] == pytest.approx(192.0)
    assert np.all(prof[1:] == 0)


def test_profile_length_odd_n():
    assert octsim.reconstruct_ascan(np.ones(7)).shape == (3,)
    assert octsim.reconstruct_ascan(np.ones(2)).shape == (1,)


@pytest.mark.parametrize("n", [7, 12, 31, 64])
def test_fft_matches_direct_dft(n):
    x = np.random.default_rng(n).normal(size=n)
    for window in ("none", "hann"):
        w = x * octsim.hann1d(n) if window == "hann" else x
        np.testing.assert_allclose(octsim.spectrum(x, window), oracles.direct_dft(w), atol=1e-9)


def test_parseval():
    rng = np.random.default_rng(256)
    for _ in range(10):
        x = rng.normal(size=256)
        for window in ("none", "hann"):
            w = x * octsim.hann1d(256) if window == "hann" else x
            lhs = np.sum(np.abs(octsim.spectrum(x, window)) ** 2)
            assert lhs == pytest.approx(256 * np.sum(w ** 2), rel=1e-6)


@pytest.mark.parametrize("f", [1, 2, 10, 100, 255, 511])
def test_pure_cosine_peak(f):
    n = 1024
    scan = np.cos(2 * np.pi * f * np.arange(n) / n)
    for window in ("none", "hann"):
        prof = octsim.reconstruct_ascan(scan, window)
        assert np.argmax(prof[1:]) + 1 == f


def test_window_suppresses_leakage():
    # non-integer frequency: rectangular window leaks, Hann does not
    n = 1024
    scan = np.cos(2 * np.pi * 100.5 * np.arange(n) / n)
    far = np.abs(np.arange(n // 2) - 100.5) > 3
    rect = octsim.reconstruct_ascan(scan, "none")
    hann = octsim.reconstruct_ascan(scan, "hann")
    assert rect[far].max() / rect.max() > 0.05
    assert hann[far].max() / hann.max() < 0.01


def test_dc_removal():
    scan = octsim.synth_interferogram([(3, 1.0)], 256)
    kept = octsim.reconstruct_ascan(scan, "hann")
    removed = octsim.reconstruct_ascan(scan, "hann", remove_dc=True)
    assert kept[0] > kept[3]
    assert removed[0] < 0.01 * removed.max()
    assert np.argmax(removed[1:]) + 1 == 3
    assert kept[1] > removed[1]


def test_nonfinite_sample():
    with pytest.raises(octsim.NonFiniteSample):
        octsim.reconstruct_ascan([1.0, np.inf, 2.0])
    with pytest.raises(ValueError):
        octsim.reconstruct_ascan([1.0, 2.0], "kaiser")


def test_synth_interferogram():
    scan = octsim.synth_interferogram([(10, 1.0)], 1024)
    assert np.argmax(octsim.reconstruct_ascan(scan, "none")[1:]) + 1 == 10
    np.testing.assert_array_equal(octsim.synth_interferogram([], 16), np.ones(16))
    a = octsim.synth_interferogram([(5, 2.0)], 64, 0.3, seed=7)
    b = octsim.synth_interferogram([(5, 2.0)], 64, 0.3, seed=7)
    assert a.tobytes() == b.tobytes()
    for bad in ([(0, 1.0)], [(32, 1.0)], [(4, 1.0), (4, 2.0)], [(2.5, 1.0)]):
        with pytest.raises(octsim.DepthOutOfRange):
            octsim.synth_interferogram(bad, 64)


def test_phantom_single_sac():
    ph = octsim.synth_phantom(64, 64, 1, seed=3)
    assert ph.truth.max() == 1 and ph.n_sacs == 1
    assert set(np.unique(ph.image)) == {40.0, 220.0}
    np.testing.assert_array_equal(ph.image == 40.0, ph.truth > 0)
    # framed: the rind keeps the sac away from the border
    assert not (ph.truth[0].any() or ph.truth[-1].any() or ph.truth[:, 0].any() or ph.truth[:, -1].any())


@pytest.mark.parametrize("seed", [0, 42, 1234])
def test_phantom_invariants(seed):
    ph = octsim.synth_phantom(256, 200, 9, speckle_sigma=0.3, seed=seed)
    assert ph.image.shape == ph.truth.shape == (200, 256)
    assert ph.image.min() >= 0 and ph.image.max() <= 255
    for k in range(1, 10):
        assert label_components(ph.truth == k)[1] == 1
    assert ph.truth.max() == 9
    # walls separate sacs: no two different sacs are 4-adjacent
    t = ph.truth
    for a, b in ((t[1:], t[:-1]), (t[:, 1:], t[:, :-1])):
        assert not np.any((a > 0) & (b > 0) & (a != b))


def test_phantom_determinism():
    a = octsim.synth_phantom(128, 128, 5, speckle_sigma=0.25, seed=99)
    b = octsim.synth_phantom(128, 128, 5, speckle_sigma=0.25, seed=99)
    assert a.image.tobytes() == b.image.tobytes() and a.truth.tobytes() == b.truth.tobytes()
    c = octsim.synth_phantom(128, 128, 5, speckle_sigma=0.0, seed=99)
    np.testing.assert_array_equal(a.truth, c.truth)


def test_too_many_sacs():
    with pytest.raises(octsim.TooManySacs):
        octsim.synth_phantom(24, 24, 50)
    with pytest.raises(octsim.TooManySacs):
        octsim.synth_phantom(10, 10, 1)
