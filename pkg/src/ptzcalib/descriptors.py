"""Descriptor providers: a synthetic appearance oracle and a simple
gradient-orientation-histogram patch descriptor.

The appearance oracle stands in for real interest-point descriptors on
synthetic scenes.  A ray is quantised to 0.05-degree cells and the cell
index seeds a deterministic pseudo-random base vector, so the same world ray
always looks the same; optional Gaussian noise models repeated observations
and an outlier probability models descriptors from unrelated content such
as players.

The patch descriptor is the classic 4x4 spatial grid x 8 orientation bins
layout (128-D), gradient-magnitude weighted and L2-normalised.  Images are
8-bit grayscale, read and written bit-exactly as binary PGM (P5).
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .geometry import Ray

#: Ray quantisation used for canonical appearance (degrees).
APPEARANCE_CELL_DEG = 0.05

_BASE_STREAM = 0x5054ACE1  # distinguishes base-vector draws from noise draws
_NOISE_STREAM = 0x0DD5EED5

_UINT64 = np.uint64(2**64 - 1)


def _cell_key(value_deg: float) -> int:
    return int(np.uint64(np.int64(np.floor(value_deg / APPEARANCE_CELL_DEG))) & _UINT64)


def appearance_oracle(
    ray: Ray,
    noise_sigma: float = 0.0,
    outlier_prob: float = 0.0,
    seed: int = 0,
    dim: int = 128,
) -> np.ndarray:
    """Deterministic synthetic descriptor for a world ray.

    The noise-free descriptor depends only on the quantised ray; ``seed``
    drives the per-observation noise and the outlier replacement draw.
    """
    noise_rng = np.random.Generator(
        np.random.PCG64(np.random.SeedSequence([_NOISE_STREAM, int(seed) & int(_UINT64)]))
    )
    if outlier_prob > 0.0 and noise_rng.random() < outlier_prob:
        return noise_rng.standard_normal(dim)
    base_rng = np.random.Generator(
        np.random.PCG64(
            np.random.SeedSequence(
                [_BASE_STREAM, _cell_key(ray.pan_deg), _cell_key(ray.tilt_deg), dim]
            )
        )
    )
    descriptor = base_rng.standard_normal(dim)
    if noise_sigma > 0.0:
        descriptor = descriptor + noise_sigma * noise_rng.standard_normal(dim)
    return descriptor


class PatchDescriptor(NamedTuple):
    values: np.ndarray
    flat: bool


class PatchBoundsError(ValueError):
    """The requested patch extends outside the image."""


def patch_descriptor(
    image: np.ndarray, center: tuple[float, float], patch_radius: int = 8
) -> PatchDescriptor:
    """128-D gradient-orientation histogram of the patch around ``center``.

    4x4 spatial cells x 8 orientation bins, gradient-magnitude weighted and
    L2-normalised.  A constant-intensity patch has no gradients and is
    returned as all-zeros with ``flat=True``.
    """
    img = np.asarray(image, dtype=float)
    if img.ndim != 2:
        raise ValueError("image must be a 2-D grayscale array")
    cx, cy = int(np.floor(center[0])), int(np.floor(center[1]))
    r = int(patch_radius)
    if r < 2:
        raise ValueError("patch_radius must be at least 2")
    if cy - r < 0 or cx - r < 0 or cy + r > img.shape[0] or cx + r > img.shape[1]:
        raise PatchBoundsError(
            f"patch of radius {r} at ({center[0]}, {center[1]}) exceeds image bounds"
        )
    patch = img[cy - r : cy + r, cx - r : cx + r]
    gy, gx = np.gradient(patch)
    magnitude = np.hypot(gx, gy)
    orientation = np.arctan2(gy, gx)  # [-pi, pi]
    ori_bin = np.floor((orientation + np.pi) / (np.pi / 4.0)).astype(int) % 8

    side = 2 * r
    cell = side / 4.0
    ys, xs = np.mgrid[0:side, 0:side]
    cell_x = np.minimum((xs / cell).astype(int), 3)
    cell_y = np.minimum((ys / cell).astype(int), 3)
    flat_bin = (cell_y * 4 + cell_x) * 8 + ori_bin
    hist = np.bincount(flat_bin.ravel(), weights=magnitude.ravel(), minlength=128)

    norm = float(np.linalg.norm(hist))
    if norm < 1e-12:
        return PatchDescriptor(values=np.zeros(128), flat=True)
    return PatchDescriptor(values=hist / norm, flat=False)


def read_pgm(data: bytes) -> np.ndarray:
    """Parse a binary (P5) 8-bit PGM byte string, bit-exactly."""
    pos = 0

    def next_token() -> bytes:
        nonlocal pos
        while pos < len(data):
            if data[pos : pos + 1].isspace():
                pos += 1
            elif data[pos : pos + 1] == b"#":
                while pos < len(data) and data[pos : pos + 1] not in (b"\n", b"\r"):
                    pos += 1
            else:
                break
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ValueError("truncated PGM header")
        return data[start:pos]

    if next_token() != b"P5":
        raise ValueError("not a binary PGM (P5) stream")
    try:
        width, height, maxval = (int(next_token()) for _ in range(3))
    except (ValueError, TypeError) as exc:
        raise ValueError(f"malformed PGM header: {exc}") from exc
    if width <= 0 or height <= 0:
        raise ValueError("PGM dimensions must be positive")
    if not 0 < maxval <= 255:
        raise ValueError(f"only 8-bit PGM supported (maxval {maxval})")
    pos += 1  # single whitespace byte after maxval
    raster = data[pos : pos + width * height]
    if len(raster) != width * height:
        raise ValueError("truncated PGM raster")
    if pos + width * height != len(data):
        raise ValueError("trailing bytes after PGM raster")
    return np.frombuffer(raster, dtype=np.uint8).reshape(height, width).copy()


def write_pgm(image: np.ndarray) -> bytes:
    img = np.asarray(image)
    if img.ndim != 2 or img.dtype != np.uint8:
        raise ValueError("PGM writer expects a 2-D uint8 array")
    header = f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode("ascii")
    return header + img.tobytes()


def load_pgm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        return read_pgm(fh.read())


def save_pgm(image: np.ndarray, path) -> None:
    with open(path, "wb") as fh:
        fh.write(write_pgm(image))
