"""Grayscale and binary morphology used to build watershed markers.

Border convention: positions outside the image are ignored by every window
operation (erosion behaves as if padded with +inf, dilation with -inf), which
keeps erosion and dilation exact duals under ``v -> 255 - v``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np
from scipy import ndimage as ndi

from .imgcore import Connectivity, DimensionMismatch, as_gray, as_mask, check_same_shape


class MarkerExceedsMask(ValueError):
    pass


class EmptyMask(ValueError):
    pass


class EmptyMarker(ValueError):
    pass


@dataclass(frozen=True)
class StructuringElement:
    shape: str = "disk"
    radius: int = 1

    def __post_init__(self):
        if self.shape not in ("square", "cross", "disk"):
            raise ValueError(f"unknown structuring element shape {self.shape!r}")
        if self.radius < 0:
            raise ValueError("structuring element radius must be non-negative")

    @property
    def footprint(self) -> np.ndarray:
        r = self.radius
        dy, dx = np.mgrid[-r:r + 1, -r:r + 1]
        if self.shape == "square":
            return np.ones((2 * r + 1, 2 * r + 1), dtype=bool)
        if self.shape == "cross":
            return (dx == 0) | (dy == 0)
        return dx * dx + dy * dy <= r * r


def default_se_radius(shape: tuple[int, int]) -> int:
    """Disk radius 5 at the 900-pixel scale, scaled with the smaller image side."""
    return max(1, int(math.floor(5 * min(shape) / 900 + 0.5)))


def _offsets(conn: Connectivity) -> np.ndarray:
    return np.array(conn.offsets, dtype=np.int64)


# --------------------------------------------------------------------------- erosion / dilation


def erode(img, se: StructuringElement) -> np.ndarray:
    img = as_gray(img)
    if se.radius == 0:
        return img.copy()
    return ndi.grey_erosion(img, footprint=se.footprint, mode="constant", cval=np.inf)


def dilate(img, se: StructuringElement) -> np.ndarray:
    img = as_gray(img)
    if se.radius == 0:
        return img.copy()
    return ndi.grey_dilation(img, footprint=se.footprint, mode="constant", cval=-np.inf)


# --------------------------------------------------------------------------- reconstruction


@numba.njit(cache=True)
def _reconstruct_dilate(J, I, offs):
    # Hybrid raster / anti-raster / FIFO reconstruction (Vincent 1993).
    h, w = J.shape
    k = offs.shape[0]
    for y in range(h):
        for x in range(w):
            v = J[y, x]
            for t in range(k):
                dx, dy = offs[t, 0], offs[t, 1]
                if dy < 0 or (dy == 0 and dx < 0):
                    nx, ny = x + dx, y + dy
                    if 0 <= nx < w and 0 <= ny < h and J[ny, nx] > v:
                        v = J[ny, nx]
            J[y, x] = min(v, I[y, x])
    n = h * w
    qx = np.empty(n, dtype=np.int64)
    qy = np.empty(n, dtype=np.int64)
    inq = np.zeros((h, w), dtype=np.bool_)
    head = 0
    tail = 0
    for y in range(h - 1, -1, -1):
        for x in range(w - 1, -1, -1):
            v = J[y, x]
            for t in range(k):
                dx, dy = offs[t, 0], offs[t, 1]
                if dy > 0 or (dy == 0 and dx > 0):
                    nx, ny = x + dx, y + dy
                    if 0 <= nx < w and 0 <= ny < h and J[ny, nx] > v:
                        v = J[ny, nx]
            v = min(v, I[y, x])
            J[y, x] = v
            for t in range(k):
                dx, dy = offs[t, 0], offs[t, 1]
                if dy > 0 or (dy == 0 and dx > 0):
                    nx, ny = x + dx, y + dy
                    if 0 <= nx < w and 0 <= ny < h and J[ny, nx] < v and J[ny, nx] < I[ny, nx]:
                        qx[tail] = x
                        qy[tail] = y
                        inq[y, x] = True
                        tail += 1
                        break
    # FIFO ring buffer; a pixel is queued at most once at a time
    size = tail
    tail = tail % n
    while size > 0:
        x = qx[head]
        y = qy[head]
        inq[y, x] = False
        head = (head + 1) % n
        size -= 1
        v = J[y, x]
        for t in range(k):
            nx, ny = x + offs[t, 0], y + offs[t, 1]
            if 0 <= nx < w and 0 <= ny < h:
                if J[ny, nx] < v and I[ny, nx] != J[ny, nx]:
                    J[ny, nx] = min(v, I[ny, nx])
                    if not inq[ny, nx]:
                        inq[ny, nx] = True
                        qx[tail] = nx
                        qy[tail] = ny
                        tail = (tail + 1) % n
                        size += 1
    return J


def reconstruct_by_dilation(marker, mask, conn=Connectivity.FOUR) -> np.ndarray:
    """Geodesic reconstruction of ``marker`` under ``mask`` (fixed point of min(dilate(g), mask))."""
    marker, mask = as_gray(marker), as_gray(mask)
    if marker.shape != mask.shape:
        raise DimensionMismatch(f"marker {marker.shape} vs mask {mask.shape}")
    if np.any(marker > mask):
        raise MarkerExceedsMask("marker must be <= mask everywhere")
    return _reconstruct_dilate(marker.copy(), mask, _offsets(Connectivity.parse(conn)))


def reconstruct_by_erosion(marker, mask, conn=Connectivity.FOUR) -> np.ndarray:
    """Dual reconstruction: fixed point of max(erode(g), mask) starting from ``marker >= mask``."""
    marker, mask = as_gray(marker), as_gray(mask)
    if marker.shape != mask.shape:
        raise DimensionMismatch(f"marker {marker.shape} vs mask {mask.shape}")
    if np.any(marker < mask):
        raise MarkerExceedsMask("marker must be >= mask everywhere for erosion reconstruction")
    return -_reconstruct_dilate(-marker, -mask, _offsets(Connectivity.parse(conn)))


def open_by_reconstruction(img, se: StructuringElement, conn=Connectivity.FOUR) -> np.ndarray:
    img = as_gray(img)
    return reconstruct_by_dilation(erode(img, se), img, conn)


def close_by_reconstruction(img, se: StructuringElement, conn=Connectivity.FOUR) -> np.ndarray:
    img = as_gray(img)
    return 255.0 - open_by_reconstruction(255.0 - img, se, conn)


# --------------------------------------------------------------------------- binary helpers


def label_components(mask, conn=Connectivity.FOUR) -> tuple[np.ndarray, int]:
    """Connected components numbered 1..n in raster order of their first pixel."""
    lbl, n = ndi.label(as_mask(mask), structure=Connectivity.parse(conn).structure)
    return lbl.astype(np.int64), int(n)


def fill_holes(mask, conn=Connectivity.FOUR) -> np.ndarray:
    """Set every background component that does not touch the image border to true."""
    mask = as_mask(mask)
    bg, n = label_components(~mask, conn)
    if n == 0:
        return mask.copy()
    border = np.concatenate([bg[0], bg[-1], bg[:, 0], bg[:, -1]])
    keep = np.zeros(n + 1, dtype=bool)
    keep[border] = True
    keep[0] = False
    return mask | ~keep[bg] & (bg > 0)


# --------------------------------------------------------------------------- minima


@numba.njit(cache=True)
def _regional_minima(img, offs):
    h, w = img.shape
    out = np.zeros((h, w), dtype=np.bool_)
    seen = np.zeros((h, w), dtype=np.bool_)
    qx = np.empty(h * w, dtype=np.int64)
    qy = np.empty(h * w, dtype=np.int64)
    k = offs.shape[0]
    for y0 in range(h):
        for x0 in range(w):
            if seen[y0, x0]:
                continue
            v = img[y0, x0]
            seen[y0, x0] = True
            qx[0] = x0
            qy[0] = y0
            head = 0
            tail = 1
            is_min = True
            while head < tail:
                x = qx[head]
                y = qy[head]
                head += 1
                for t in range(k):
                    nx, ny = x + offs[t, 0], y + offs[t, 1]
                    if 0 <= nx < w and 0 <= ny < h:
                        u = img[ny, nx]
                        if u < v:
                            is_min = False
                        elif u == v and not seen[ny, nx]:
                            seen[ny, nx] = True
                            qx[tail] = nx
                            qy[tail] = ny
                            tail += 1
            if is_min:
                for i in range(tail):
                    out[qy[i], qx[i]] = True
    return out


def regional_minima(img, conn=Connectivity.FOUR) -> np.ndarray:
    """True on constant-valued connected plateaus with no strictly lower neighbour."""
    return _regional_minima(as_gray(img), _offsets(Connectivity.parse(conn)))


def regional_maxima(img, conn=Connectivity.FOUR) -> np.ndarray:
    return regional_minima(-as_gray(img), conn)


def impose_minima(img, markers, conn=Connectivity.FOUR) -> np.ndarray:
    """Modify ``img`` so that its regional minima are exactly the components of ``markers``."""
    img, markers = as_gray(img), as_mask(markers)
    check_same_shape(img, markers)
    if not markers.any():
        raise EmptyMarker("no marker pixels: cannot impose minima")
    fm = np.where(markers, 0.0, 255.0)
    constrained = np.minimum(np.minimum(img + 1.0, 255.0), fm)
    return reconstruct_by_erosion(fm, constrained, conn)


# --------------------------------------------------------------------------- distances / SKIZ


def distance_transform(mask) -> np.ndarray:
    """Exact Euclidean distance from every pixel to the nearest true pixel."""
    mask = as_mask(mask)
    if not mask.any():
        raise EmptyMask("distance transform of an empty mask")
    return ndi.distance_transform_edt(~mask)


def label_boundaries(labels, conn=Connectivity.FOUR) -> np.ndarray:
    """Label-0 pixels plus pixels that touch a different positive label."""
    labels = np.asarray(labels)
    h, w = labels.shape
    padded = np.pad(labels, 1)
    out = labels == 0
    for dx, dy in Connectivity.parse(conn).offsets:
        nb = padded[1 + dy:1 + dy + h, 1 + dx:1 + dx + w]
        out |= (labels > 0) & (nb > 0) & (nb != labels)
    return out


def skiz(markers, conn=Connectivity.FOUR) -> tuple[np.ndarray, np.ndarray]:
    """Skeleton by influence zones of the marker components.

    Returns the influence-zone label map (marker components numbered in raster
    order; equidistant pixels get 0) and the SKIZ mask: label-0 pixels plus the
    pixels where two zones meet directly, so the skeleton has no gaps where the
    midline falls between pixels.
    """
    from .watershed import marker_watershed

    markers = as_mask(markers)
    if not markers.any():
        raise EmptyMask("SKIZ of an empty marker set")
    conn = Connectivity.parse(conn)
    res = marker_watershed(distance_transform(markers), markers, conn)
    return res.labels, label_boundaries(res.labels, conn)
