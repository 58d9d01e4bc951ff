"""Hann windows, A-scan reconstruction and synthetic OCT data (interferograms, sac phantoms)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage as ndi

from .imgcore import Connectivity
from .morph import label_components, skiz


class DimensionTooSmall(ValueError):
    pass


class NonFiniteSample(ValueError):
    pass


class DepthOutOfRange(ValueError):
    pass


class TooManySacs(ValueError):
    pass


# --------------------------------------------------------------------------- windows


def hann1d(n: int) -> np.ndarray:
    """Symmetric Hann window ``0.5 * (1 - cos(2 pi k / (n - 1)))``; both endpoints are 0."""
    if n < 2:
        raise DimensionTooSmall(f"Hann window needs at least 2 samples, got {n}")
    k = np.arange(n, dtype=np.float64)
    return 0.5 * (1.0 - np.cos(2.0 * np.pi * k / (n - 1)))


def hann2d(width: int, height: int) -> np.ndarray:
    """2D Hann taper of shape ``(height, width)``: ``W[j, i] = hann1d(width)[i] * hann1d(height)[j]``."""
    if width < 2 or height < 2:
        raise DimensionTooSmall(f"2D Hann window needs both sides >= 2, got {width}x{height}")
    return np.outer(hann1d(height), hann1d(width))


# --------------------------------------------------------------------------- A-scans


def spectrum(samples, window: str = "none", remove_dc: bool = False) -> np.ndarray:
    """Full complex DFT of a (optionally mean-removed and windowed) spectral scan."""
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size < 2:
        raise DimensionTooSmall("a spectral scan needs at least 2 samples")
    if not np.all(np.isfinite(x)):
        raise NonFiniteSample("spectral scan contains NaN or Inf")
    if window not in ("none", "hann"):
        raise ValueError(f"unknown window {window!r}")
    if remove_dc:
        x = x - x.mean()
    if window == "hann":
        x = x * hann1d(x.size)
    return np.fft.fft(x)


def reconstruct_ascan(samples, window: str = "none", remove_dc: bool = False) -> np.ndarray:
    """Depth profile: DFT magnitudes of bins ``0 .. N//2 - 1``.

    ``remove_dc`` subtracts the sample mean before windowing.  Without it the
    constant term of a real interferogram, once tapered, leaks into the first
    depth bins and can dominate shallow reflectors.
    """
    mag = np.abs(spectrum(samples, window, remove_dc))
    return mag[: mag.size // 2]


def synth_interferogram(reflectors=(), n: int = 1024, noise_sigma: float = 0.0, seed: int = 0) -> np.ndarray:
    """``1 + sum(a * cos(2 pi f k / n)) + noise`` for reflectors given as ``(f, a)`` pairs."""
    if n < 2:
        raise DimensionTooSmall("interferogram length must be >= 2")
    if noise_sigma < 0:
        raise ValueError("noise_sigma must be non-negative")
    k = np.arange(n, dtype=np.float64)
    out = np.ones(n)
    seen = set()
    for f, a in reflectors:
        if int(f) != f or not 1 <= f <= n // 2 - 1:
            raise DepthOutOfRange(f"depth bin {f} outside 1..{n // 2 - 1}")
        if f in seen:
            raise DepthOutOfRange(f"depth bin {f} given twice")
        if a <= 0:
            raise ValueError("reflector amplitude must be positive")
        seen.add(f)
        out += a * np.cos(2.0 * np.pi * f * k / n)
    if noise_sigma > 0:
        out += np.random.default_rng(seed).normal(0.0, noise_sigma, n)
    return out


# --------------------------------------------------------------------------- phantoms


@dataclass
class Phantom:
    image: np.ndarray
    truth: np.ndarray
    n_sacs: int
    seed: int


MIN_SEED_SPACING = 8


def rind_width(width: int, height: int) -> int:
    """Thickness of the bright outer rind framing the phantom."""
    return max(4, int(round(0.03 * min(width, height))))


def _place_centers(rng, n, x0, x1, y0, y1, spacing, attempts):
    centers = []
    tries = 0
    while len(centers) < n and tries < attempts:
        tries += 1
        c = (rng.uniform(x0, x1), rng.uniform(y0, y1))
        if all(math.hypot(c[0] - p[0], c[1] - p[1]) >= spacing for p in centers):
            centers.append(c)
    return centers if len(centers) == n else None


def _sac_seeds(rng, width, height, n_sacs, margin):
    x0, x1 = margin, width - 1 - margin
    y0, y1 = margin, height - 1 - margin
    if x1 < x0 or y1 < y0:
        raise TooManySacs(f"{width}x{height} leaves no room for sac seeds")
    # prefer roughly even sacs, fall back to the minimum spacing before giving up
    even = 0.6 * math.sqrt((x1 - x0 + 1) * (y1 - y0 + 1) / n_sacs)
    for spacing in (max(even, MIN_SEED_SPACING), MIN_SEED_SPACING):
        centers = _place_centers(rng, n_sacs, x0, x1, y0, y1, spacing, 500 * n_sacs)
        if centers is not None:
            return centers
    raise TooManySacs(f"cannot place {n_sacs} sac seeds {MIN_SEED_SPACING} px apart in {width}x{height}")


def synth_phantom(width: int = 512, height: int = 512, n_sacs: int = 12, wall_intensity: float = 220.0,
                  sac_intensity: float = 40.0, speckle_sigma: float = 0.0, seed: int = 0) -> Phantom:
    """Lemon-like phantom: dark sacs separated by bright walls, plus multiplicative speckle.

    Sac seeds are small random ellipses.  The sacs are their influence zones,
    the walls are the 2-px-thick boundaries between zones, and a bright rind
    frames the whole section.  ``truth`` labels each sac 1..n_sacs with 0 on walls.
    """
    if n_sacs < 1:
        raise ValueError("n_sacs must be >= 1")
    if speckle_sigma < 0:
        raise ValueError("speckle_sigma must be non-negative")
    rng = np.random.default_rng(seed)
    rind = rind_width(width, height)
    centers = _sac_seeds(rng, width, height, n_sacs, rind + 4)

    yy, xx = np.mgrid[:height, :width]
    seeds = np.zeros((height, width), dtype=bool)
    for cx, cy in centers:
        a, b = rng.uniform(1.5, 3.5, size=2)
        t = rng.uniform(0, np.pi)
        u = (xx - cx) * np.cos(t) + (yy - cy) * np.sin(t)
        v = -(xx - cx) * np.sin(t) + (yy - cy) * np.cos(t)
        seeds |= (u / a) ** 2 + (v / b) ** 2 <= 1.0
        seeds[int(round(cy)), int(round(cx))] = True

    cells, _ = skiz(seeds, Connectivity.FOUR)
    # equidistant pixels join their largest-labelled neighbour so every pixel has a cell
    while np.any(cells == 0):
        grown = ndi.grey_dilation(cells, size=3, mode="nearest")
        cells = np.where(cells == 0, grown, cells)

    padded = np.pad(cells, 1, mode="edge")
    walls = np.zeros_like(seeds)
    for dx, dy in Connectivity.FOUR.offsets:
        walls |= padded[1 + dy:1 + dy + height, 1 + dx:1 + dx + width] != cells
    walls[:rind] = walls[-rind:] = True
    walls[:, :rind] = walls[:, -rind:] = True

    truth = np.zeros((height, width), dtype=np.int64)
    for k in range(1, n_sacs + 1):
        comp, n = label_components((cells == k) & ~walls)
        if n == 0:
            raise TooManySacs(f"sac {k} vanished under the walls; use fewer sacs or a larger image")
        sizes = np.bincount(comp.ravel())
        sizes[0] = 0
        truth[comp == int(np.argmax(sizes))] = k

    image = np.where(truth > 0, float(sac_intensity), float(wall_intensity))
    if speckle_sigma > 0:
        image = np.clip(image * (1.0 + rng.normal(0.0, speckle_sigma, image.shape)), 0.0, 255.0)
    return Phantom(image=image, truth=truth, n_sacs=n_sacs, seed=seed)
