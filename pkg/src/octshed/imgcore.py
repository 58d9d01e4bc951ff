"""Image carriers, connectivity conventions and file I/O.

Images are plain numpy arrays indexed ``[y, x]`` (row-major, origin top-left):

* gray images: ``float64`` arrays with values in [0, 255]
* binary masks: ``bool`` arrays
* label maps: integer arrays, 0 = watershed line / unassigned, 1..K = basins
"""

from __future__ import annotations

import enum
from pathlib import Path

import numpy as np
from PIL import Image


class UnsupportedFormat(ValueError):
    pass


class ZeroDimension(ValueError):
    pass


class DimensionMismatch(ValueError):
    pass


class RangeError(ValueError):
    pass


class Connectivity(str, enum.Enum):
    FOUR = "four"
    EIGHT = "eight"

    @classmethod
    def parse(cls, value) -> "Connectivity":
        if isinstance(value, Connectivity):
            return value
        if value in (4, "4"):
            return cls.FOUR
        if value in (8, "8"):
            return cls.EIGHT
        return cls(value)

    @property
    def offsets(self) -> tuple[tuple[int, int], ...]:
        """(dx, dy) offsets in the fixed order N, S, W, E, NW, NE, SW, SE."""
        if self is Connectivity.FOUR:
            return _OFFSETS[:4]
        return _OFFSETS

    @property
    def structure(self) -> np.ndarray:
        """3x3 structuring array as used by ``scipy.ndimage.label``."""
        if self is Connectivity.FOUR:
            return np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)
        return np.ones((3, 3), dtype=bool)


_OFFSETS = ((0, -1), (0, 1), (-1, 0), (1, 0), (-1, -1), (1, -1), (-1, 1), (1, 1))


def neighbors(x: int, y: int, width: int, height: int,
              conn: Connectivity | str = Connectivity.FOUR) -> list[tuple[int, int]]:
    """In-bounds neighbours of ``(x, y)`` as ``(x, y)`` tuples, in N, S, W, E, NW, NE, SW, SE order."""
    conn = Connectivity.parse(conn)
    out = []
    for dx, dy in conn.offsets:
        nx, ny = x + dx, y + dy
        if 0 <= nx < width and 0 <= ny < height:
            out.append((nx, ny))
    return out


def as_gray(img) -> np.ndarray:
    """Validate and copy ``img`` into a float64 gray image."""
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 2:
        raise UnsupportedFormat(f"expected a 2D image, got shape {arr.shape}")
    if arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ZeroDimension(f"image has a zero dimension: {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("image contains non-finite values")
    return arr


def as_mask(mask) -> np.ndarray:
    arr = np.asarray(mask)
    if arr.ndim != 2:
        raise UnsupportedFormat(f"expected a 2D mask, got shape {arr.shape}")
    return arr.astype(bool, copy=False)


def check_same_shape(*arrays) -> None:
    shapes = {np.shape(a) for a in arrays}
    if len(shapes) != 1:
        raise DimensionMismatch(f"shape mismatch: {sorted(shapes)}")


# --------------------------------------------------------------------------- reading


def read_gray(path) -> np.ndarray:
    """Read an 8/16-bit grayscale PGM (P2/P5) or PNG as a float image in [0, 255].

    16-bit data is rescaled by 255/65535 without rounding.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    raw = path.read_bytes()
    if raw[:2] in (b"P2", b"P5"):
        data, maxval = _parse_pgm(raw)
    elif raw[:2] in (b"P1", b"P3", b"P4", b"P6"):
        raise UnsupportedFormat(f"{path}: only grayscale PGM (P2/P5) is supported")
    else:
        data, maxval = _read_png(path)
    if data.shape[0] == 0 or data.shape[1] == 0:
        raise ZeroDimension(f"{path}: zero-sized image")
    data = data.astype(np.float64)
    if maxval > 255:
        data *= 255.0 / 65535.0
    elif maxval != 255:
        data *= 255.0 / maxval
    return data


def _pgm_tokens(raw: bytes, count: int, pos: int) -> tuple[list[int], int]:
    """Read ``count`` whitespace separated integers starting at ``pos``, skipping comments."""
    tokens = []
    n = len(raw)
    while len(tokens) < count:
        while pos < n and raw[pos:pos + 1].isspace():
            pos += 1
        if pos < n and raw[pos:pos + 1] == b"#":
            while pos < n and raw[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not raw[pos:pos + 1].isspace() and raw[pos:pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise UnsupportedFormat("truncated PGM")
        try:
            tokens.append(int(raw[start:pos]))
        except ValueError:
            raise UnsupportedFormat(f"malformed PGM token {raw[start:pos]!r}") from None
    return tokens, pos


def _parse_pgm(raw: bytes) -> tuple[np.ndarray, int]:
    magic = raw[:2]
    (width, height, maxval), pos = _pgm_tokens(raw, 3, 2)
    if width <= 0 or height <= 0:
        raise ZeroDimension(f"PGM header declares {width}x{height}")
    if not 0 < maxval <= 65535:
        raise UnsupportedFormat(f"PGM maxval {maxval} out of range")
    count = width * height
    if magic == b"P2":
        values, _ = _pgm_tokens(raw, count, pos)
        data = np.array(values, dtype=np.int64)
    else:
        pos += 1  # single whitespace byte after maxval
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        payload = raw[pos:pos + count * dtype.itemsize]
        if len(payload) != count * dtype.itemsize:
            raise UnsupportedFormat("truncated PGM payload")
        data = np.frombuffer(payload, dtype=dtype).astype(np.int64)
    if data.max(initial=0) > maxval:
        raise UnsupportedFormat("PGM sample exceeds maxval")
    return data.reshape(height, width), maxval


def _read_png(path: Path) -> tuple[np.ndarray, int]:
    try:
        im = Image.open(path)
        im.load()
    except Exception as exc:  # PIL raises a zoo of exception types
        raise UnsupportedFormat(f"{path}: cannot decode image ({exc})") from None
    if im.mode == "L":
        return np.asarray(im), 255
    if im.mode in ("I;16", "I;16B", "I;16L", "I"):
        return np.asarray(im).astype(np.int64), 65535
    raise UnsupportedFormat(f"{path}: not a grayscale image (mode {im.mode})")


# --------------------------------------------------------------------------- writing


def write_gray_pgm(img, path) -> None:
    """Write an 8-bit binary PGM; values are rounded half-up and clamped to [0, 255]."""
    arr = np.floor(np.clip(np.asarray(img, dtype=np.float64), 0, 255) + 0.5).astype(np.uint8)
    h, w = arr.shape
    Path(path).write_bytes(b"P5\n%d %d\n255\n" % (w, h) + arr.tobytes())


def write_label_pgm(labels, path) -> None:
    """Write a label map as a 16-bit binary PGM."""
    arr = np.asarray(labels)
    if arr.size and (arr.min() < 0 or arr.max() > 65535):
        raise RangeError("labels must lie in 0..65535 for 16-bit PGM output")
    h, w = arr.shape
    Path(path).write_bytes(b"P5\n%d %d\n65535\n" % (w, h) + arr.astype(">u2").tobytes())


def read_label_pgm(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if raw[:2] not in (b"P2", b"P5"):
        raise UnsupportedFormat(f"{path}: not a PGM file")
    data, _ = _parse_pgm(raw)
    return data


def write_gray_png(img, path) -> None:
    arr = np.floor(np.clip(np.asarray(img, dtype=np.float64), 0, 255) + 0.5).astype(np.uint8)
    Image.fromarray(arr, mode="L").save(path, format="PNG")


def _make_palette(size: int = 64) -> np.ndarray:
    # golden-ratio hue walk; saturation/value bounded away from white
    hues = (np.arange(size) * 0.618033988749895) % 1.0
    sat = np.where(np.arange(size) % 2 == 0, 0.85, 0.6)
    val = np.where(np.arange(size) % 3 == 0, 0.95, 0.75)
    i = np.floor(hues * 6).astype(int)
    f = hues * 6 - i
    p, q, t = val * (1 - sat), val * (1 - f * sat), val * (1 - (1 - f) * sat)
    sectors = [(val, t, p), (q, val, p), (p, val, t), (p, q, val), (t, p, val), (val, p, q)]
    rgb = np.array([[c[k] for c in sectors[i[k] % 6]] for k in range(size)])
    return np.round(rgb * 255).astype(np.uint8)


PALETTE = _make_palette()


def colorize_labels(labels) -> np.ndarray:
    """RGB rendering: label 0 is white, label k is ``PALETTE[k % len(PALETTE)]``."""
    labels = np.asarray(labels)
    rgb = PALETTE[labels % len(PALETTE)]
    rgb[labels == 0] = 255
    return rgb


def write_label_png(labels, path) -> None:
    try:
        Image.fromarray(colorize_labels(labels), mode="RGB").save(path, format="PNG")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
