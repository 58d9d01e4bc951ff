"""Two-phase Chan-Vese active contour (piecewise-constant region model)."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage as ndi

from .imgcore import DimensionMismatch, as_mask


HOLD_LEVEL = 1e-3


class DegenerateInit(ValueError):
    pass


class NonFiniteImage(ValueError):
    pass


@dataclass(frozen=True)
class ChanVeseParams:
    mu: float = 0.25
    lambda1: float = 1.0
    lambda2: float = 1.0
    dt: float = 0.5
    max_iters: int = 200
    tol: float = 1e-3
    reinit_every: int = 20
    eps: float = 1.0
    # |phi| is clipped to this band so pixels far from the contour still react
    band: float = 1.0
    # consecutive quiet iterations required to stop
    patience: int = 1

    def __post_init__(self):
        if self.mu < 0 or self.lambda1 <= 0 or self.lambda2 <= 0:
            raise ValueError("mu must be >= 0 and lambda1, lambda2 > 0")
        if self.dt <= 0 or self.tol <= 0 or self.max_iters < 1:
            raise ValueError("dt, tol must be > 0 and max_iters >= 1")


@dataclass
class ChanVeseResult:
    mask: np.ndarray
    c1: float
    c2: float
    iterations: int
    converged: bool
    energies: list[float] = field(default_factory=list)


def normalize(img) -> np.ndarray:
    """Affine map of ``img`` onto [0, 1]; a constant image maps to zeros."""
    img = np.asarray(img, dtype=np.float64)
    if not np.all(np.isfinite(img)):
        raise NonFiniteImage("image contains NaN or Inf")
    lo, hi = img.min(), img.max()
    if hi <= lo:
        return np.zeros_like(img)
    return (img - lo) / (hi - lo)


def signed_distance(mask, band: float = np.inf) -> np.ndarray:
    """Positive inside ``mask``, negative outside, +-0.5 on the pixels next to the contour."""
    mask = np.asarray(mask, dtype=bool)
    phi = np.where(mask, ndi.distance_transform_edt(mask) - 0.5,
                   -(ndi.distance_transform_edt(~mask) - 0.5))
    return np.clip(phi, -band, band)


def region_means(img, mask) -> tuple[float, float]:
    inside = img[mask]
    outside = img[~mask]
    c1 = float(inside.mean()) if inside.size else 0.0
    c2 = float(outside.mean()) if outside.size else 0.0
    return c1, c2


def perimeter(mask) -> int:
    """Number of 4-adjacent pixel pairs whose mask values differ."""
    mask = np.asarray(mask, dtype=bool)
    return int(np.count_nonzero(mask[1:] != mask[:-1]) + np.count_nonzero(mask[:, 1:] != mask[:, :-1]))


def energy(img, mask, params: ChanVeseParams) -> float:
    """Piecewise-constant energy of a binary partition with optimal region constants."""
    c1, c2 = region_means(img, mask)
    fit_in = np.sum((img[mask] - c1) ** 2)
    fit_out = np.sum((img[~mask] - c2) ** 2)
    return float(params.mu * perimeter(mask) + params.lambda1 * fit_in + params.lambda2 * fit_out)


def curvature(phi) -> np.ndarray:
    """div(grad phi / |grad phi|) by central differences, replicated borders.

    Bounded to [-1, 1], the largest curvature a one-pixel contour can resolve;
    near-flat patches of phi would otherwise produce arbitrarily large values.
    """
    p = np.pad(phi, 1, mode="edge")
    c = p[1:-1, 1:-1]
    px = (p[1:-1, 2:] - p[1:-1, :-2]) / 2
    py = (p[2:, 1:-1] - p[:-2, 1:-1]) / 2
    pxx = p[1:-1, 2:] - 2 * c + p[1:-1, :-2]
    pyy = p[2:, 1:-1] - 2 * c + p[:-2, 1:-1]
    pxy = (p[2:, 2:] - p[2:, :-2] - p[:-2, 2:] + p[:-2, :-2]) / 4
    den = (px ** 2 + py ** 2) ** 1.5 + 1e-10
    return np.clip((pxx * py ** 2 - 2 * px * py * pxy + pyy * px ** 2) / den, -1.0, 1.0)


def dirac(phi, eps: float) -> np.ndarray:
    return eps / (np.pi * (eps ** 2 + phi ** 2))


def chan_vese_evolve(img, init, params: ChanVeseParams | None = None) -> ChanVeseResult:
    params = params or ChanVeseParams()
    img = np.asarray(img, dtype=np.float64)
    init = as_mask(init)
    if img.shape != init.shape:
        raise DimensionMismatch(f"image {img.shape} vs init {init.shape}")
    u = normalize(img)
    if init.all() or not init.any():
        raise DegenerateInit("initial mask must contain both true and false pixels")

    n = u.size
    slack = 1e-6 * n
    phi = signed_distance(init, params.band)
    mask = phi > 0
    e = energy(u, mask, params)
    energies = [e]
    quiet = 0
    converged = False
    it = 0
    while it < params.max_iters:
        it += 1
        c1, c2 = region_means(u, mask)
        force = params.lambda2 * (u - c2) ** 2 - params.lambda1 * (u - c1) ** 2
        fmax = np.abs(force).max()
        if fmax > 0:
            force /= fmax
        drive = params.mu * curvature(phi) + force
        dphi = dirac(phi, params.eps) * drive
        dmax = np.abs(dphi).max()
        if dmax == 0:
            converged = True
            break
        # step so that the fastest pixel moves by dt; halve while the energy would rise
        step = params.dt / dmax
        for _ in range(8):
            trial = phi + step * dphi
            trial_mask = trial > 0
            trial_e = energy(u, trial_mask, params)
            if trial_e <= e + slack:
                break
            step /= 2
        else:
            # every step that flips pixels raises the energy: advance phi but hold
            # all signs, so pixels about to cross gather at the contour and can
            # flip together once the joint move pays off
            trial = phi + params.dt / dmax * dphi
            hold = (trial > 0) != mask
            trial[hold] = np.where(mask[hold], HOLD_LEVEL, -HOLD_LEVEL)
            trial_mask, trial_e = mask, e
        changed = np.count_nonzero(trial_mask != mask)
        # pixels still driven across zero will flip later however slowly they move
        pending = np.count_nonzero(np.where(trial_mask, drive < 0, drive > 0))
        phi, mask, e = trial, trial_mask, trial_e
        energies.append(e)
        if params.reinit_every and it % params.reinit_every == 0:
            if mask.any() and not mask.all():
                phi = signed_distance(mask, params.band)
        quiet = quiet + 1 if changed / n < params.tol and pending == 0 else 0
        if quiet >= params.patience:
            converged = True
            break
    c1, c2 = region_means(u, mask)
    return ChanVeseResult(mask, c1, c2, it, converged, energies)


def chan_vese(img, init, params: ChanVeseParams | None = None) -> np.ndarray:
    """Evolve the contour from ``init`` and return the final inside region."""
    return chan_vese_evolve(img, init, params).mask
