"""Geometric and photometric face normalization.

Faces are aligned by the unique similarity transform that maps the two eye
centers onto canonical positions (32, 48) and (96, 48) in a 128x128 frame,
then the grayscale channel is histogram-equalized. An un-equalized RGB copy
is kept for avatar texturing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import DegenerateError, DetectError
from .imaging import RawImage, _sample_bilinear, luma, to_grayscale

FRAME_SIZE = 128
CANONICAL_LEFT_EYE = (32.0, 48.0)
CANONICAL_RIGHT_EYE = (96.0, 48.0)
MIN_INTEROCULAR = 4.0

# Search band for the heuristic eye locator, as fractions of image size.
_BAND_ROWS = (0.25, 0.50)
_BAND_COLS = (0.15, 0.85)
_BLOB_MIN_PIXELS = 3
_DARK_MARGIN = 4.0  # blob mask: luma <= band minimum + this


@dataclass(frozen=True)
class EyeLandmarks:
    left: tuple[float, float]
    right: tuple[float, float]

    def __post_init__(self):
        if not self.left[0] < self.right[0]:
            raise DegenerateError("left eye must have smaller x than right eye")
        if self.interocular <= 0:
            raise DegenerateError("inter-ocular distance must be positive")

    @property
    def interocular(self) -> float:
        return math.dist(self.left, self.right)


@dataclass(frozen=True)
class NormalizedFace:
    """Canonically aligned face: ``image`` gray 128x128, ``color_ref`` RGB
    128x128 (never equalized), eyes at the canonical coordinates."""

    image: RawImage
    color_ref: RawImage
    equalized: bool = False

    def __post_init__(self):
        if self.image.channels != 1 or self.image.pixels.shape != (FRAME_SIZE, FRAME_SIZE):
            raise DegenerateError("image must be grayscale 128x128")
        if self.color_ref.channels != 3 or self.color_ref.pixels.shape[:2] != (FRAME_SIZE, FRAME_SIZE):
            raise DegenerateError("color_ref must be RGB 128x128")

    @property
    def canonical_eyes(self) -> EyeLandmarks:
        return EyeLandmarks(CANONICAL_LEFT_EYE, CANONICAL_RIGHT_EYE)


def locate_eyes(img: RawImage, hint: EyeLandmarks | None = None) -> EyeLandmarks:
    """Return the hint verbatim when present; otherwise find the centroids
    of the two darkest blobs inside the upper-middle band of the image."""
    if hint is not None:
        return hint
    gray = luma(img.pixels)
    h, w = gray.shape
    r0, r1 = int(_BAND_ROWS[0] * h), int(_BAND_ROWS[1] * h)
    c0, c1 = int(_BAND_COLS[0] * w), int(_BAND_COLS[1] * w)
    band = gray[r0:r1, c0:c1]
    if band.size == 0:
        raise DetectError("image too small for the eye search band")
    mask = band <= band.min() + _DARK_MARGIN
    if mask.all():
        raise DetectError("no dark blobs: band is uniform")
    labels, count = ndimage.label(mask, structure=np.ones((3, 3), dtype=int))
    blobs = []
    for lab in range(1, count + 1):
        ys, xs = np.nonzero(labels == lab)
        if ys.size < _BLOB_MIN_PIXELS:
            continue
        mean_luma = float(band[ys, xs].mean())
        cx = float(xs.mean()) + c0
        cy = float(ys.mean()) + r0
        blobs.append((mean_luma, -ys.size, cx, cy))
    if len(blobs) < 2:
        raise DetectError(f"found {len(blobs)} candidate blobs, need 2")
    blobs.sort()
    (_, _, x1, y1), (_, _, x2, y2) = blobs[:2]
    if x1 > x2:
        (x1, y1), (x2, y2) = (x2, y2), (x1, y1)
    if x1 == x2:
        raise DetectError("darkest blobs are vertically stacked, not eyes")
    return EyeLandmarks((x1, y1), (x2, y2))


def eye_alignment_transform(eyes: EyeLandmarks) -> np.ndarray:
    """2x3 similarity transform matrix mapping source eye coordinates onto
    the canonical eye positions (row-vector convention: dst = M @ [x, y, 1])."""
    (lx, ly), (rx, ry) = eyes.left, eyes.right
    (Lx, Ly), (Rx, Ry) = CANONICAL_LEFT_EYE, CANONICAL_RIGHT_EYE
    dx, dy = rx - lx, ry - ly
    d2 = dx * dx + dy * dy
    Dx, Dy = Rx - Lx, Ry - Ly
    # complex ratio (Dx + i Dy) / (dx + i dy) gives scale+rotation
    a = (Dx * dx + Dy * dy) / d2
    b = (Dy * dx - Dx * dy) / d2
    tx = Lx - (a * lx - b * ly)
    ty = Ly - (b * lx + a * ly)
    return np.array([[a, -b, tx], [b, a, ty]])


def _invert_affine(m: np.ndarray) -> np.ndarray:
    A = m[:, :2]
    t = m[:, 2]
    Ainv = np.linalg.inv(A)
    return np.hstack([Ainv, (-Ainv @ t)[:, None]])


def geometric_normalize(img: RawImage, eyes: EyeLandmarks) -> NormalizedFace:
    """Warp ``img`` so the eyes land on the canonical positions. Bilinear
    sampling, border replication for out-of-source samples."""
    if eyes.interocular < MIN_INTEROCULAR:
        raise DegenerateError(
            f"inter-ocular distance {eyes.interocular:.2f} below {MIN_INTEROCULAR}"
        )
    M = eye_alignment_transform(eyes)
    Minv = _invert_affine(M)
    xs, ys = np.meshgrid(np.arange(FRAME_SIZE, dtype=np.float64),
                         np.arange(FRAME_SIZE, dtype=np.float64))
    src_x = Minv[0, 0] * xs + Minv[0, 1] * ys + Minv[0, 2]
    src_y = Minv[1, 0] * xs + Minv[1, 1] * ys + Minv[1, 2]
    if img.channels == 3:
        rgb = _sample_bilinear(img.pixels.astype(np.float64), src_x, src_y)
        color = np.rint(rgb).astype(np.uint8)
        gray = to_grayscale(RawImage(color)).pixels
    else:
        g = _sample_bilinear(img.pixels.astype(np.float64), src_x, src_y)
        gray = np.rint(g).astype(np.uint8)
        color = np.repeat(gray[:, :, None], 3, axis=2)
    return NormalizedFace(RawImage(gray), RawImage(color), equalized=False)


def equalize_histogram(gray: np.ndarray) -> np.ndarray:
    """Map v -> floor(255 * cum(v) / n) over 256 bins.

    This form is exactly idempotent: for any output level x, the largest
    input level mapping to at most x maps to exactly x, so re-deriving the
    map from the equalized histogram reproduces the identity on all
    occupied levels.
    """
    hist = np.bincount(gray.ravel(), minlength=256)
    cum = np.cumsum(hist)
    table = (cum * 255) // cum[-1]
    return table.astype(np.uint8)[gray]


def photometric_normalize(face: NormalizedFace) -> NormalizedFace:
    """Histogram-equalize the grayscale channel; color_ref is untouched."""
    eq = equalize_histogram(face.image.pixels)
    return NormalizedFace(RawImage(eq), face.color_ref, equalized=True)


def normalize_face(img: RawImage, eyes: EyeLandmarks) -> NormalizedFace:
    """Full pipeline: geometric alignment then photometric equalization."""
    return photometric_normalize(geometric_normalize(img, eyes))
