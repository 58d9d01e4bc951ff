"""Immersion watershed (sorted pixels, level-by-level flooding) and a literal flooding oracle.

Both implementations follow the same recursion over the grey levels present
in the image.  At level ``h`` every pixel of the threshold set ``T_h`` that is
not yet in a basin (the new pixels and all current watershed pixels) is
assigned to the basin it is geodesically closest to inside ``T_h``.  Pixels
equidistant from two or more basins are watershed pixels (label 0) and stay
candidates at the next level.  Components of ``T_h`` that no basin can reach
become new basins.  Basins are finally numbered in raster order of their
minimum's first pixel.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numba
import numpy as np
from scipy import ndimage as ndi

from .imgcore import Connectivity, as_gray, as_mask, check_same_shape
from .morph import EmptyMarker, impose_minima


class ImageTooLarge(ValueError):
    pass


ORACLE_MAX_SIDE = 64


@dataclass
class WatershedResult:
    labels: np.ndarray
    n_basins: int
    watershed_pixels: int


def quantize(img) -> np.ndarray:
    """Clamp to [0, 255] and round half-up to integer flooding levels."""
    return np.floor(np.clip(as_gray(img), 0.0, 255.0) + 0.5).astype(np.int64)


def gradient_magnitude(img) -> np.ndarray:
    """Sobel gradient magnitude with edge-replicated borders (not renormalised)."""
    img = as_gray(img)
    gx = ndi.sobel(img, axis=1, mode="nearest")
    gy = ndi.sobel(img, axis=0, mode="nearest")
    return np.hypot(gx, gy)


@dataclass
class FloodLevelSets:
    levels: np.ndarray
    image: np.ndarray

    def threshold_set(self, level) -> np.ndarray:
        return self.image <= level


def flood_level_sets(img) -> FloodLevelSets:
    q = quantize(img)
    return FloodLevelSets(levels=np.unique(q), image=q)


# --------------------------------------------------------------------------- main algorithm


@numba.njit(cache=True)
def _immerse(q, width, offs):
    n = q.size
    height = n // width
    k = offs.shape[0]

    # counting sort, stable so each level is listed in raster order
    counts = np.zeros(257, dtype=np.int64)
    for p in range(n):
        counts[q[p] + 1] += 1
    start = np.cumsum(counts)
    fill = start[:256].copy()
    order = np.empty(n, dtype=np.int64)
    for p in range(n):
        order[fill[q[p]]] = p
        fill[q[p]] += 1

    NOT_FLOODED = -1
    CANDIDATE = -2
    lab = np.full(n, NOT_FLOODED, dtype=np.int64)
    tent = np.zeros(n, dtype=np.int64)
    dist = np.zeros(n, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    cand = np.empty(n, dtype=np.int64)
    dirty = np.zeros(n, dtype=np.bool_)
    dirty_list = np.empty(n, dtype=np.int64)
    n_dirty = 0
    first = np.empty(n + 1, dtype=np.int64)
    n_labels = 0

    for level in range(256):
        lo = start[level]
        hi = start[level + 1]
        if lo == hi:
            continue

        # Candidates: the new level plus every watershed component that touches
        # it or touched a pixel labelled in the previous round.  Other watershed
        # components would be re-evaluated to the same result, so they are skipped.
        n_cand = 0
        for i in range(lo, hi):
            p = order[i]
            lab[p] = CANDIDATE
            cand[n_cand] = p
            n_cand += 1
        for i in range(n_dirty):
            p = dirty_list[i]
            dirty[p] = False
            if lab[p] == 0:
                lab[p] = CANDIDATE
                cand[n_cand] = p
                n_cand += 1
        grow = 0
        while grow < n_cand:
            p = cand[grow]
            grow += 1
            x = p % width
            y = p // width
            for t in range(k):
                nx = x + offs[t, 0]
                ny = y + offs[t, 1]
                if 0 <= nx < width and 0 <= ny < height:
                    r = ny * width + nx
                    if lab[r] == 0:
                        lab[r] = CANDIDATE
                        cand[n_cand] = r
                        n_cand += 1
        for i in range(n_cand):
            dist[cand[i]] = 0

        # seeds: candidates touching an existing basin
        tail = 0
        for i in range(n_cand):
            p = cand[i]
            x = p % width
            y = p // width
            best = -1
            for t in range(k):
                nx = x + offs[t, 0]
                ny = y + offs[t, 1]
                if 0 <= nx < width and 0 <= ny < height:
                    l = lab[ny * width + nx]
                    if l > 0:
                        if best == -1:
                            best = l
                        elif best != l:
                            best = 0
            if best != -1:
                tent[p] = best
                dist[p] = 1
                queue[tail] = p
                tail += 1

        # layered BFS inside the candidates; disagreeing predecessors make a tie
        head = 0
        while head < tail:
            p = queue[head]
            head += 1
            x = p % width
            y = p // width
            d = dist[p] + 1
            for t in range(k):
                nx = x + offs[t, 0]
                ny = y + offs[t, 1]
                if 0 <= nx < width and 0 <= ny < height:
                    r = ny * width + nx
                    if lab[r] == CANDIDATE:
                        if dist[r] == 0:
                            dist[r] = d
                            tent[r] = tent[p]
                            queue[tail] = r
                            tail += 1
                        elif dist[r] == d and tent[r] != tent[p]:
                            tent[r] = 0

        for i in range(n_cand):
            p = cand[i]
            if dist[p] > 0:
                lab[p] = tent[p]

        # unreached plateaus at this level are new minima
        for i in range(lo, hi):
            p0 = order[i]
            if lab[p0] != CANDIDATE:
                continue
            n_labels += 1
            first[n_labels] = p0
            lab[p0] = n_labels
            queue[0] = p0
            head = 0
            tail = 1
            while head < tail:
                p = queue[head]
                head += 1
                x = p % width
                y = p // width
                for t in range(k):
                    nx = x + offs[t, 0]
                    ny = y + offs[t, 1]
                    if 0 <= nx < width and 0 <= ny < height:
                        r = ny * width + nx
                        if lab[r] == CANDIDATE:
                            lab[r] = n_labels
                            queue[tail] = r
                            tail += 1

        # watershed components next to a freshly labelled pixel must be revisited
        n_dirty = 0
        for i in range(n_cand):
            p = cand[i]
            if lab[p] <= 0:
                continue
            x = p % width
            y = p // width
            for t in range(k):
                nx = x + offs[t, 0]
                ny = y + offs[t, 1]
                if 0 <= nx < width and 0 <= ny < height:
                    r = ny * width + nx
                    if lab[r] == 0 and not dirty[r]:
                        dirty[r] = True
                        dirty_list[n_dirty] = r
                        n_dirty += 1
        grow = 0
        while grow < n_dirty:
            p = dirty_list[grow]
            grow += 1
            x = p % width
            y = p // width
            for t in range(k):
                nx = x + offs[t, 0]
                ny = y + offs[t, 1]
                if 0 <= nx < width and 0 <= ny < height:
                    r = ny * width + nx
                    if lab[r] == 0 and not dirty[r]:
                        dirty[r] = True
                        dirty_list[n_dirty] = r
                        n_dirty += 1

    n_wshed = 0
    for p in range(n):
        if lab[p] == 0:
            n_wshed += 1

    # renumber basins by raster position of their minimum's first pixel
    rank = np.argsort(first[1:n_labels + 1], kind="mergesort")
    remap = np.zeros(n_labels + 1, dtype=np.int64)
    for new in range(n_labels):
        remap[rank[new] + 1] = new + 1
    out = np.empty(n, dtype=np.int64)
    for p in range(n):
        out[p] = remap[lab[p]]
    return out, n_labels, n_wshed


def watershed_vs(img, conn=Connectivity.FOUR) -> WatershedResult:
    """Immersion watershed of ``img`` itself (pass a gradient image to flood edges)."""
    q = quantize(img)
    conn = Connectivity.parse(conn)
    offs = np.array(conn.offsets, dtype=np.int64)
    flat, n_basins, n_wshed = _immerse(q.ravel(), q.shape[1], offs)
    return WatershedResult(flat.reshape(q.shape), int(n_basins), int(n_wshed))


def marker_watershed(img, markers, conn=Connectivity.FOUR) -> WatershedResult:
    """Flood ``img`` from the marker components only; basin k holds marker component k."""
    img, markers = as_gray(img), as_mask(markers)
    check_same_shape(img, markers)
    if not markers.any():
        raise EmptyMarker("marker-controlled watershed needs at least one marker pixel")
    return watershed_vs(impose_minima(img, markers, conn), conn)


# --------------------------------------------------------------------------- oracle


def flooding_oracle(img, conn=Connectivity.FOUR) -> WatershedResult:
    """Slow, literal evaluation of the threshold-set recursion for small images.

    For each level: geodesic distances (BFS inside ``T_h``) from every basin,
    strict nearest basin wins, ties stay unassigned, unreachable components of
    ``T_h`` become new basins.
    """
    q = quantize(img)
    h, w = q.shape
    if h > ORACLE_MAX_SIDE or w > ORACLE_MAX_SIDE:
        raise ImageTooLarge(f"flooding oracle limited to {ORACLE_MAX_SIDE}x{ORACLE_MAX_SIDE}")
    conn = Connectivity.parse(conn)
    offsets = conn.offsets
    pixels = [(y, x) for y in range(h) for x in range(w)]

    def adjacent(p, inside):
        y, x = p
        for dx, dy in offsets:
            r = (y + dy, x + dx)
            if r in inside:
                yield r

    basins: dict[int, set] = {}
    first: dict[int, tuple[int, int]] = {}
    for level in sorted(set(q.ravel().tolist())):
        T = {p for p in pixels if q[p] <= level}
        geo = {}
        for b, members in basins.items():
            d = {p: 0 for p in members}
            todo = deque(members)
            while todo:
                p = todo.popleft()
                for r in adjacent(p, T):
                    if r not in d:
                        d[r] = d[p] + 1
                        todo.append(r)
            geo[b] = d
        new_basins = {b: set() for b in basins}
        unreached = set()
        for p in T:
            ds = {b: geo[b][p] for b in basins if p in geo[b]}
            if not ds:
                unreached.add(p)
                continue
            best = min(ds.values())
            winners = [b for b, v in ds.items() if v == best]
            if len(winners) == 1:
                new_basins[winners[0]].add(p)
        for p in sorted(unreached):
            if any(p in m for m in new_basins.values()):
                continue
            b = len(new_basins) + 1
            comp = {p}
            todo = deque([p])
            while todo:
                s = todo.popleft()
                for r in adjacent(s, unreached):
                    if r not in comp:
                        comp.add(r)
                        todo.append(r)
            new_basins[b] = comp
            first[b] = p
        basins = new_basins

    order = sorted(basins, key=lambda b: first[b])
    labels = np.zeros((h, w), dtype=np.int64)
    for new, b in enumerate(order, start=1):
        for p in basins[b]:
            labels[p] = new
    return WatershedResult(labels, len(order), int(np.sum(labels == 0)))
