"""Modified (marker-controlled) watershed pipeline, the plain baseline and segmentation metrics."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage as ndi

from .contour import ChanVeseParams, chan_vese, normalize
from .imgcore import Connectivity, DimensionMismatch, as_gray, as_mask, check_same_shape
from .morph import (EmptyMask, StructuringElement, close_by_reconstruction, default_se_radius, fill_holes,
                    label_boundaries, label_components, open_by_reconstruction, regional_minima, skiz)
from .octsim import hann2d
from .watershed import gradient_magnitude, marker_watershed, watershed_vs


@dataclass
class PipelineConfig:
    threshold: float = 245.0
    fg_se_radius: int | None = None  # None: scale with the image (see morph.default_se_radius)
    conn: Connectivity = Connectivity.FOUR
    hann_taper: bool = False
    hann_block: int | str = "full"
    chan_vese: ChanVeseParams = field(default_factory=ChanVeseParams)
    flood_on: str = "gradient"
    objects: str = "dark"

    def __post_init__(self):
        self.conn = Connectivity.parse(self.conn)
        if not 0 <= self.threshold <= 255:
            raise ValueError(f"threshold must be in [0, 255], got {self.threshold}")
        if self.fg_se_radius is not None and self.fg_se_radius < 1:
            raise ValueError("fg_se_radius must be a positive integer")
        if self.flood_on not in ("gradient", "raw"):
            raise ValueError(f"flood_on must be 'gradient' or 'raw', got {self.flood_on!r}")
        if self.objects not in ("dark", "bright"):
            raise ValueError(f"objects must be 'dark' or 'bright', got {self.objects!r}")
        if self.hann_block != "full" and (not isinstance(self.hann_block, int) or self.hann_block < 2):
            raise ValueError("hann_block must be 'full' or an integer >= 2")

    def se(self, shape) -> StructuringElement:
        r = self.fg_se_radius if self.fg_se_radius is not None else default_se_radius(shape)
        return StructuringElement("disk", r)


@dataclass
class RegionStat:
    label: int
    area_px: int
    cx: float
    cy: float
    x0: int
    y0: int
    x1: int
    y1: int


@dataclass
class SegmentationReport:
    labels: np.ndarray
    n_regions: int
    region_stats: list[RegionStat]
    elapsed_ms: float
    watershed_pixels: int
    intermediates: dict[str, np.ndarray] = field(default_factory=dict)


# --------------------------------------------------------------------------- stages


def hann_taper(img, block: int | str = "full") -> np.ndarray:
    """Multiply ``img`` by a 2D Hann window, either whole-image or tiled in ``block``-sized tiles."""
    img = as_gray(img)
    h, w = img.shape
    if block == "full":
        return img * hann2d(w, h)
    out = img.copy()
    for y in range(0, h, block):
        for x in range(0, w, block):
            tile = out[y:y + block, x:x + block]
            th, tw = tile.shape
            if th >= 2 and tw >= 2:
                tile *= hann2d(tw, th)
            else:
                tile[...] = 0.0  # a 1-px sliver is all border
    return out


def preprocess_binary(img, cfg: PipelineConfig | None = None) -> np.ndarray:
    """Threshold at ``cfg.threshold`` (keep darker pixels), fill holes, refine with Chan-Vese.

    When hole filling swallows the whole image the contour is started from the
    pixels below the mean instead; a constant image is returned as a single object.
    """
    cfg = cfg or PipelineConfig()
    img = as_gray(img)
    init = fill_holes(img <= cfg.threshold, cfg.conn)
    if init.all():
        init = img <= img.mean()
        if init.all():
            return init
    return chan_vese(normalize(img), init, cfg.chan_vese)


def object_mask(binary, img, objects: str = "dark") -> np.ndarray:
    """Orient a two-phase mask so that true marks the objects (the darker phase for dark objects)."""
    binary = as_mask(binary)
    if binary.all() or not binary.any():
        return binary.copy()
    inside, outside = img[binary].mean(), img[~binary].mean()
    darker_inside = inside <= outside
    return binary if darker_inside == (objects == "dark") else ~binary


def drop_specks(objects, min_area: int, conn=Connectivity.FOUR) -> np.ndarray:
    """Remove object components with fewer than ``min_area`` pixels."""
    lbl, n = label_components(objects, conn)
    if n == 0:
        return as_mask(objects).copy()
    sizes = np.bincount(lbl.ravel())
    keep = sizes >= min_area
    keep[0] = False
    if not keep.any():
        keep[int(np.argmax(sizes[1:])) + 1] = True  # never drop every object
    return keep[lbl]


def marker_relief(objects) -> np.ndarray:
    """Dark-valley relief from the objects' distance map: deepest at object centres, 255 off objects.

    The image border counts as background so objects touching it keep their shape.
    """
    dist = ndi.distance_transform_edt(np.pad(as_mask(objects), 1))[1:-1, 1:-1]
    return 255.0 - np.minimum(dist, 255.0)


def foreground_markers(img, cfg: PipelineConfig | None = None) -> np.ndarray:
    """Regional minima of the reconstruction-smoothed image, shrunk so they stay off object edges."""
    cfg = cfg or PipelineConfig()
    img = as_gray(img)
    if cfg.objects == "bright":
        img = 255.0 - img
    se = cfg.se(img.shape)
    smooth = close_by_reconstruction(open_by_reconstruction(img, se, cfg.conn), se, cfg.conn)
    minima = regional_minima(smooth, cfg.conn)
    shrunk = ndi.binary_erosion(minima, structure=StructuringElement("disk", 1).footprint, border_value=1)
    lbl, n = label_components(minima, cfg.conn)
    if n == 0:
        return shrunk
    # one marker per minimum: erosion can cut a thin plateau in pieces, keep the
    # largest piece; a minimum erased entirely keeps its raster-first pixel
    pieces, n_pieces = label_components(shrunk, cfg.conn)
    out = np.zeros_like(shrunk)
    if n_pieces:
        sizes = np.bincount(pieces.ravel())
        owner = np.zeros(n_pieces + 1, dtype=np.int64)
        owner[pieces[shrunk]] = lbl[shrunk]
        best = np.zeros(n + 1, dtype=np.int64)
        for p in range(1, n_pieces + 1):  # pieces come in raster order, so ties keep the first
            k = owner[p]
            if best[k] == 0 or sizes[p] > sizes[best[k]]:
                best[k] = p
        keep = np.zeros(n_pieces + 1, dtype=bool)
        keep[best[best > 0]] = True
        out = keep[pieces]
    _, first = np.unique(lbl.ravel(), return_index=True)  # first[k] is where label k starts
    for k in np.flatnonzero(np.bincount(lbl[out], minlength=n + 1)[1:] == 0) + 1:
        out.flat[first[k]] = True
    return out


def background_markers(binary, cfg: PipelineConfig | None = None) -> np.ndarray:
    """SKIZ ridges of the binary objects: background pixels furthest from every object."""
    cfg = cfg or PipelineConfig()
    binary = as_mask(binary)
    if not binary.any():
        raise EmptyMask("background markers need at least one object pixel")
    zones, ridges = skiz(binary, cfg.conn)
    # pixels touching another zone diagonally close the gaps a 4-connected
    # flood would see where the ridge runs at an angle
    ridges |= label_boundaries(zones, Connectivity.EIGHT)
    return ridges & ~binary


def bridge_diagonals(mask) -> np.ndarray:
    """Add one corner pixel wherever two pixels touch only diagonally, making 8-connected parts 4-connected."""
    m = as_mask(mask).copy()
    while True:
        a, b, c, d = m[:-1, :-1], m[:-1, 1:], m[1:, :-1], m[1:, 1:]
        main = a & d & ~b & ~c
        anti = b & c & ~a & ~d
        if not (main.any() or anti.any()):
            return m
        m[:-1, 1:] |= main
        m[:-1, :-1] |= anti


def region_stats(labels) -> list[RegionStat]:
    labels = np.asarray(labels)
    n = int(labels.max(initial=0))
    if n == 0:
        return []
    idx = np.arange(1, n + 1)
    area = ndi.sum_labels(np.ones(labels.shape), labels, idx)
    centers = ndi.center_of_mass(np.ones(labels.shape), labels, idx)
    boxes = ndi.find_objects(labels, max_label=n)
    out = []
    for k in range(n):
        if boxes[k] is None:
            out.append(RegionStat(k + 1, 0, float("nan"), float("nan"), -1, -1, -1, -1))
            continue
        ys, xs = boxes[k]
        cy, cx = centers[k]
        out.append(RegionStat(k + 1, int(area[k]), float(cx), float(cy), xs.start, ys.start, xs.stop - 1, ys.stop - 1))
    return out


def _fg_first(labels, fg) -> np.ndarray:
    n = int(labels.max(initial=0))
    has_fg = np.zeros(n + 1, dtype=bool)
    has_fg[labels[fg]] = True
    has_fg[0] = False
    order = np.concatenate([np.flatnonzero(has_fg), np.flatnonzero(~has_fg[1:]) + 1])
    remap = np.zeros(n + 1, dtype=np.int64)
    remap[order] = np.arange(1, n + 1)
    return remap[labels]


def run_modified(img, cfg: PipelineConfig | None = None) -> SegmentationReport:
    """Threshold + Chan-Vese binary, marker construction, minima imposition and immersion watershed."""
    cfg = cfg or PipelineConfig()
    img = as_gray(img)
    t0 = time.perf_counter()
    if cfg.hann_taper:
        img = hann_taper(img, cfg.hann_block)
    binary = preprocess_binary(img, cfg)
    objects = object_mask(binary, img, cfg.objects)
    # speckle leaves isolated object pixels that would each seed a SKIZ ridge
    objects = drop_specks(objects, int(cfg.se(img.shape).footprint.sum()), cfg.conn)
    grad = gradient_magnitude(img)
    # markers are taken from the binary's distance relief: minima of the raw
    # speckled intensities would give one marker per noise blob
    fg = foreground_markers(marker_relief(objects), PipelineConfig(
        threshold=cfg.threshold, fg_se_radius=cfg.fg_se_radius, conn=cfg.conn, objects="dark"))
    bg = background_markers(objects, cfg) if objects.any() else np.zeros_like(objects)
    if cfg.conn is Connectivity.FOUR:
        # a ridge broken only at diagonal steps should seed one region, not several
        bg = bridge_diagonals(bg)
    bg &= ~fg
    relief = grad if cfg.flood_on == "gradient" else img
    res = marker_watershed(relief, fg | bg, cfg.conn)
    labels = _fg_first(res.labels, fg)
    elapsed = (time.perf_counter() - t0) * 1000.0
    inter = {"binary": binary, "gradient": grad, "fg_markers": fg, "bg_markers": bg,
             "watershed_lines": label_boundaries(labels, cfg.conn)}
    return SegmentationReport(labels, int(labels.max(initial=0)), region_stats(labels), elapsed,
                              res.watershed_pixels, inter)


def run_baseline(img, cfg: PipelineConfig | None = None) -> SegmentationReport:
    """Unmodified immersion watershed of the gradient (or the raw image), no markers."""
    cfg = cfg or PipelineConfig()
    img = as_gray(img)
    t0 = time.perf_counter()
    grad = gradient_magnitude(img)
    res = watershed_vs(grad if cfg.flood_on == "gradient" else img, cfg.conn)
    elapsed = (time.perf_counter() - t0) * 1000.0
    inter = {"gradient": grad, "watershed_lines": label_boundaries(res.labels, cfg.conn)}
    return SegmentationReport(res.labels, res.n_basins, region_stats(res.labels), elapsed,
                              res.watershed_pixels, inter)


# --------------------------------------------------------------------------- metrics


def truth_boundaries(truth) -> np.ndarray:
    """Unlabelled truth pixels that touch a labelled region (4-adjacency)."""
    truth = np.asarray(truth)
    near = ndi.binary_dilation(truth > 0, structure=Connectivity.FOUR.structure)
    return (truth == 0) & near


def boundary_f1(labels, truth, tol: float = 2.0) -> float:
    """F1 of predicted region boundaries against truth boundaries, matching within ``tol`` pixels."""
    labels, truth = np.asarray(labels), np.asarray(truth)
    if labels.shape != truth.shape:
        raise DimensionMismatch(f"labels {labels.shape} vs truth {truth.shape}")
    pred = label_boundaries(labels)
    gt = truth_boundaries(truth)
    if not pred.any() and not gt.any():
        return 1.0
    if not pred.any() or not gt.any():
        return 0.0
    precision = np.mean(ndi.distance_transform_edt(~gt)[pred] <= tol)
    recall = np.mean(ndi.distance_transform_edt(~pred)[gt] <= tol)
    if precision + recall == 0:
        return 0.0
    return float(2 * precision * recall / (precision + recall))


def overseg_ratio(report: SegmentationReport, truth) -> float:
    """Output region count divided by the number of truth regions."""
    truth = np.asarray(truth)
    check_same_shape(report.labels, truth)
    n_truth = len(np.unique(truth[truth > 0]))
    if n_truth == 0:
        raise ValueError("truth has no labelled region")
    return report.n_regions / n_truth


def dominant_matches(labels, truth) -> bool:
    """True when every truth region is mostly covered by its own, distinct output region."""
    labels, truth = np.asarray(labels), np.asarray(truth)
    check_same_shape(labels, truth)
    owners = []
    for k in np.unique(truth[truth > 0]):
        hit = labels[truth == k]
        counts = np.bincount(hit[hit > 0])
        if counts.size == 0 or counts.max() * 2 <= hit.size:
            return False
        owners.append(int(np.argmax(counts)))
    return len(set(owners)) == len(owners)


def metrics(report: SegmentationReport, truth=None) -> dict:
    out = {"n_regions": report.n_regions, "watershed_pixels": report.watershed_pixels,
           "elapsed_ms": round(report.elapsed_ms, 3)}
    if truth is not None:
        out["overseg_ratio"] = round(overseg_ratio(report, truth), 6)
        out["boundary_f1"] = round(boundary_f1(report.labels, truth), 6)
    return out
