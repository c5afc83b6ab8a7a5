"""Raster image loading, conversion and resampling.

Images are 8-bit throughout: grayscale arrays of shape (h, w) or RGB arrays
of shape (h, w, 3), both uint8 and row-major. PNG is handled through Pillow,
binary PGM (P5) and PPM (P6) are read and written directly.
"""

from __future__ import annotations

import io
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import FormatError

# Rec. 601 luma weights
_LUMA = np.array([0.299, 0.587, 0.114])


@dataclass(frozen=True)
class RawImage:
    """8-bit raster image; ``pixels`` is (h, w) gray or (h, w, 3) RGB uint8."""

    pixels: np.ndarray

    def __post_init__(self):
        p = self.pixels
        if p.dtype != np.uint8:
            raise FormatError(f"pixels must be uint8, got {p.dtype}")
        if p.ndim == 2:
            pass
        elif p.ndim == 3 and p.shape[2] == 3:
            pass
        else:
            raise FormatError(f"pixels must be (h,w) or (h,w,3), got {p.shape}")
        if p.shape[0] < 1 or p.shape[1] < 1:
            raise FormatError(f"image must be at least 1x1, got {p.shape}")

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return 1 if self.pixels.ndim == 2 else 3

    @property
    def data(self) -> bytes:
        """Row-major sample bytes, length = width * height * channels."""
        return self.pixels.tobytes()


def _rescale_16bit(arr: np.ndarray) -> np.ndarray:
    # 0..65535 -> 0..255, round to nearest
    return np.rint(arr.astype(np.float64) / 257.0).astype(np.uint8)


def _read_pnm(raw: bytes) -> np.ndarray:
    """Decode binary PGM (P5) / PPM (P6) bytes into a uint8 array."""
    magic = raw[:2]
    if magic not in (b"P5", b"P6"):
        raise FormatError(f"unsupported PNM magic {magic!r}")
    # header: magic, width, height, maxval as whitespace-separated tokens,
    # '#' comments allowed up to end of line
    pos = 2
    tokens = []
    while len(tokens) < 3:
        if pos >= len(raw):
            raise FormatError("truncated PNM header")
        m = re.match(rb"(\s+(#[^\n]*\n?)*)*([0-9]+)", raw[pos:])
        if not m:
            raise FormatError("malformed PNM header")
        tokens.append(int(m.group(3)))
        pos += m.end()
    if pos >= len(raw) or raw[pos : pos + 1] not in b" \t\r\n":
        raise FormatError("missing whitespace after PNM maxval")
    pos += 1
    width, height, maxval = tokens
    if width < 1 or height < 1 or not (0 < maxval < 65536):
        raise FormatError(f"bad PNM dimensions {width}x{height} maxval {maxval}")
    channels = 1 if magic == b"P5" else 3
    count = width * height * channels
    if maxval < 256:
        body = np.frombuffer(raw, dtype=np.uint8, count=count, offset=pos)
        arr = body
    else:
        body = np.frombuffer(raw, dtype=">u2", count=count, offset=pos)
        arr = _rescale_16bit(np.asarray(body))
    if body.size != count:
        raise FormatError("truncated PNM pixel data")
    shape = (height, width) if channels == 1 else (height, width, 3)
    return arr.reshape(shape).copy()


def _write_pnm(img: RawImage) -> bytes:
    magic = b"P5" if img.channels == 1 else b"P6"
    header = b"%s\n%d %d\n255\n" % (magic, img.width, img.height)
    return header + img.pixels.tobytes()


def load_image(path) -> RawImage:
    """Load a PNG, binary PGM or binary PPM file.

    16-bit sources are rescaled to 8-bit. Grayscale stays single channel,
    color becomes RGB; palette/alpha PNG variants are flattened to RGB.
    """
    path = Path(path)
    raw = path.read_bytes()  # propagates OSError for missing/unreadable
    if raw[:2] in (b"P5", b"P6"):
        return RawImage(_read_pnm(raw))
    if raw[:8] == b"\x89PNG\r\n\x1a\n":
        try:
            with Image.open(io.BytesIO(raw)) as im:
                im.load()
                if im.mode in ("L", "RGB"):
                    arr = np.asarray(im)
                elif im.mode in ("I", "I;16", "I;16B"):
                    arr = _rescale_16bit(np.asarray(im, dtype=np.uint32))
                elif im.mode == "LA":
                    arr = np.asarray(im.convert("L"))
                else:
                    arr = np.asarray(im.convert("RGB"))
        except (UnidentifiedImageError, SyntaxError, ValueError) as exc:
            raise FormatError(f"corrupt PNG {path}: {exc}") from exc
        return RawImage(np.ascontiguousarray(arr, dtype=np.uint8))
    raise FormatError(f"{path}: not a PNG/PGM/PPM file")


def save_image(img: RawImage, path) -> None:
    """Write ``img`` as PNG, PGM or PPM depending on the file extension."""
    path = Path(path)
    ext = path.suffix.lower()
    if ext in (".pgm", ".ppm"):
        want = ".pgm" if img.channels == 1 else ".ppm"
        if ext != want:
            raise FormatError(f"{ext} cannot hold a {img.channels}-channel image")
        path.write_bytes(_write_pnm(img))
    elif ext == ".png":
        mode = "L" if img.channels == 1 else "RGB"
        Image.fromarray(img.pixels, mode=mode).save(path, format="PNG")
    else:
        raise FormatError(f"unsupported output extension {ext!r}")


def to_grayscale(img: RawImage) -> RawImage:
    """Rec. 601 luma conversion; single-channel input is returned unchanged."""
    if img.channels == 1:
        return img
    gray = np.rint(img.pixels.astype(np.float64) @ _LUMA)
    return RawImage(gray.astype(np.uint8))


def luma(pixels: np.ndarray) -> np.ndarray:
    """Float luma of an RGB or gray uint8 array (no rounding)."""
    if pixels.ndim == 2:
        return pixels.astype(np.float64)
    return pixels.astype(np.float64) @ _LUMA


def resize_bilinear(img: RawImage, w: int, h: int) -> RawImage:
    """Bilinear resample to w x h with half-pixel-center sample alignment."""
    if w < 1 or h < 1:
        raise FormatError(f"target size must be >= 1, got {w}x{h}")
    if w == img.width and h == img.height:
        return RawImage(img.pixels.copy())
    src = img.pixels.astype(np.float64)
    sx = (np.arange(w) + 0.5) * (img.width / w) - 0.5
    sy = (np.arange(h) + 0.5) * (img.height / h) - 0.5
    out = _sample_bilinear(src, sx[None, :].repeat(h, 0), sy[:, None].repeat(w, 1))
    return RawImage(np.rint(out).astype(np.uint8))


def _sample_bilinear(src: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Sample float array ``src`` at real coordinates with border replication.

    ``xs``/``ys`` share a shape; returns that shape (plus channel axis for RGB).
    """
    h, w = src.shape[:2]
    x0 = np.floor(xs).astype(np.int64)
    y0 = np.floor(ys).astype(np.int64)
    fx = xs - x0
    fy = ys - y0
    x0c = np.clip(x0, 0, w - 1)
    x1c = np.clip(x0 + 1, 0, w - 1)
    y0c = np.clip(y0, 0, h - 1)
    y1c = np.clip(y0 + 1, 0, h - 1)
    if src.ndim == 3:
        fx = fx[..., None]
        fy = fy[..., None]
    p00 = src[y0c, x0c]
    p01 = src[y0c, x1c]
    p10 = src[y1c, x0c]
    p11 = src[y1c, x1c]
    top = p00 * (1 - fx) + p01 * fx
    bot = p10 * (1 - fx) + p11 * fx
    return top * (1 - fy) + bot * fy
