"""Image containers, loading, binarization and the ink-on-black convention.

All downstream stages expect a ``BinaryImage`` whose ``foreground`` mask is
True on ink pixels, regardless of the polarity of the scanned input.
"""
from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError


class ImageReadError(Exception):
    """File missing, truncated or otherwise unreadable."""


class UnsupportedFormatError(Exception):
    """Readable file, but not 8/16-bit gray or RGB PNG, nor binary PGM."""


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class GrayImage:
    """Row-major luminance grid, values in [0, 255]."""

    pixels: np.ndarray  # uint8, shape (height, width)

    def __post_init__(self):
        if self.pixels.ndim != 2 or self.pixels.size == 0:
            raise ValueError("GrayImage requires a non-empty 2-D grid")
        if self.pixels.dtype != np.uint8:
            raise ValueError("GrayImage pixels must be uint8")
        _frozen(self.pixels)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True)
class BinaryImage:
    """Two-level image; ``foreground`` is True on ink."""

    foreground: np.ndarray  # bool, shape (height, width)

    def __post_init__(self):
        if self.foreground.ndim != 2 or self.foreground.size == 0:
            raise ValueError("BinaryImage requires a non-empty 2-D grid")
        if self.foreground.dtype != np.bool_:
            raise ValueError("BinaryImage foreground must be bool")
        _frozen(self.foreground)

    @property
    def width(self) -> int:
        return self.foreground.shape[1]

    @property
    def height(self) -> int:
        return self.foreground.shape[0]

    def foreground_fraction(self) -> float:
        return float(np.count_nonzero(self.foreground)) / self.foreground.size


@dataclass(frozen=True)
class BinarizeReport:
    threshold: int
    foreground_fraction: float
    inverted: bool


# BT.601 luma weights; round-half-up keeps golden files bit-stable.
_LUMA = (0.299, 0.587, 0.114)


def _round_half_up(values: np.ndarray) -> np.ndarray:
    return np.floor(values + 0.5).astype(np.uint8)


def load_image(path) -> GrayImage:
    """Load a PNG (8/16-bit gray or RGB) or binary PGM (P5) as luminance.

    16-bit samples are rescaled to [0, 255]; RGB is converted with BT.601
    weights, rounded half-up.
    """
    p = Path(path)
    if not p.is_file():
        raise ImageReadError(f"no such file: {p}")
    try:
        head = p.open("rb").read(2)
    except OSError as e:
        raise ImageReadError(f"cannot read {p}: {e}") from e
    if head == b"P5":
        return _load_pgm(p)
    try:
        img = Image.open(p)
        img.load()
    except (UnidentifiedImageError, OSError, SyntaxError) as e:
        raise ImageReadError(f"cannot decode {p}: {e}") from e
    if img.format != "PNG":
        raise UnsupportedFormatError(f"{p}: format {img.format}, expected PNG or PGM")
    if img.mode == "L":
        arr = np.asarray(img, dtype=np.uint8)
    elif img.mode in ("I", "I;16", "I;16B"):
        raw = np.asarray(img, dtype=np.uint32)
        arr = _round_half_up(raw * (255.0 / 65535.0))
    elif img.mode == "RGB":
        rgb = np.asarray(img, dtype=np.float64)
        luma = rgb[..., 0] * _LUMA[0] + rgb[..., 1] * _LUMA[1] + rgb[..., 2] * _LUMA[2]
        arr = _round_half_up(luma)
    else:
        raise UnsupportedFormatError(f"{p}: PNG mode {img.mode} not supported")
    return GrayImage(arr)


def _load_pgm(p: Path) -> GrayImage:
    data = p.read_bytes()
    fields: list[bytes] = []
    pos = 0

    def next_token() -> bytes:
        nonlocal pos
        while pos < len(data):
            if data[pos : pos + 1].isspace():
                pos += 1
            elif data[pos : pos + 1] == b"#":
                while pos < len(data) and data[pos] != 0x0A:
                    pos += 1
            else:
                break
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        return data[start:pos]

    magic = next_token()
    if magic != b"P5":
        raise UnsupportedFormatError(f"{p}: not a binary PGM")
    try:
        width, height, maxval = (int(next_token()) for _ in range(3))
    except ValueError as e:
        raise ImageReadError(f"{p}: bad PGM header") from e
    if width < 1 or height < 1 or not 0 < maxval < 65536:
        raise ImageReadError(f"{p}: bad PGM dimensions")
    pos += 1  # single whitespace after maxval
    nbytes = width * height * (2 if maxval > 255 else 1)
    raw = data[pos : pos + nbytes]
    if len(raw) != nbytes:
        raise ImageReadError(f"{p}: truncated PGM payload")
    if maxval > 255:
        samples = np.frombuffer(raw, dtype=">u2").astype(np.float64)
        arr = _round_half_up(samples * (255.0 / maxval)).reshape(height, width)
    else:
        arr = np.frombuffer(raw, dtype=np.uint8).reshape(height, width)
        if maxval != 255:
            arr = _round_half_up(arr.astype(np.float64) * (255.0 / maxval))
    return GrayImage(arr.copy())


def save_pgm(path, img) -> None:
    """Write a GrayImage or BinaryImage as a maxval-255 binary PGM."""
    if isinstance(img, BinaryImage):
        arr = np.where(img.foreground, 255, 0).astype(np.uint8)
    else:
        arr = img.pixels
    header = f"P5\n{arr.shape[1]} {arr.shape[0]}\n255\n".encode("ascii")
    Path(path).write_bytes(header + arr.tobytes())


def binarize_otsu(img: GrayImage) -> tuple[BinaryImage, BinarizeReport]:
    """Threshold by maximizing between-class variance, then fix polarity.

    Pixels strictly above the threshold are taken as foreground first;
    since ink covers under half of a typical page, the mask is inverted
    when that guess exceeds 50% coverage. Ties between equally good
    thresholds break toward the smallest. A constant image yields an
    all-background mask with the constant as threshold.
    """
    pixels = img.pixels
    hist = np.bincount(pixels.ravel(), minlength=256).astype(np.float64)
    total = pixels.size
    if np.count_nonzero(hist) == 1:
        value = int(np.flatnonzero(hist)[0])
        mask = np.zeros(pixels.shape, dtype=bool)
        return BinaryImage(mask), BinarizeReport(value, 0.0, False)

    levels = np.arange(256, dtype=np.float64)
    w0 = np.cumsum(hist)                     # count of pixels <= t
    sum0 = np.cumsum(hist * levels)
    w1 = total - w0
    # between-class variance, zero where either class is empty
    with np.errstate(divide="ignore", invalid="ignore"):
        mu0 = sum0 / w0
        mu1 = (sum0[-1] - sum0) / w1
        var_between = w0 * w1 * (mu0 - mu1) ** 2
    var_between[(w0 == 0) | (w1 == 0)] = 0.0
    threshold = int(np.argmax(var_between))  # argmax returns the smallest maximizer

    mask = pixels > threshold
    inverted = np.count_nonzero(mask) * 2 > total
    if inverted:
        mask = ~mask
    fraction = float(np.count_nonzero(mask)) / total
    return BinaryImage(mask), BinarizeReport(threshold, fraction, inverted)


def negate(img: BinaryImage) -> BinaryImage:
    """Flip every pixel; an involution."""
    return BinaryImage(~img.foreground)


def binary_from_bool(mask: np.ndarray) -> BinaryImage:
    """Wrap a boolean grid (copied) as a BinaryImage."""
    return BinaryImage(np.array(mask, dtype=bool))


# --- PNG output (overlays, served images) ---------------------------------

def save_png(path, array: np.ndarray) -> None:
    """Write an (h, w) gray or (h, w, 3) RGB uint8 array as PNG."""
    Path(path).write_bytes(png_bytes(array))


def png_bytes(array: np.ndarray) -> bytes:
    """Deterministic PNG encoding of a gray or RGB uint8 array."""
    if array.ndim == 2:
        color_type, channels = 0, 1
    else:
        color_type, channels = 2, 3
    h, w = array.shape[:2]
    raw = array.tobytes()
    stride = w * channels
    scanlines = b"".join(
        b"\x00" + raw[y * stride : (y + 1) * stride] for y in range(h)
    )

    def chunk(tag: bytes, payload: bytes) -> bytes:
        body = tag + payload
        return struct.pack(">I", len(payload)) + body + struct.pack(">I", zlib.crc32(body))

    ihdr = struct.pack(">IIBBBBB", w, h, 8, color_type, 0, 0, 0)
    idat = zlib.compress(scanlines, 6)
    return (
        b"\x89PNG\r\n\x1a\n"
        + chunk(b"IHDR", ihdr)
        + chunk(b"IDAT", idat)
        + chunk(b"IEND", b"")
    )
