"""Image containers and 8-bit PNG I/O.

Images are kept in two flavors: linear radiance (float64) and tone-mapped
8-bit. Masks select foreground pixels for the evaluation metrics. All three
types are thin wrappers around row-major numpy arrays and are treated as
immutable after construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from PIL import Image


class ValidationError(ValueError):
    """Raised when inputs violate a documented precondition."""


@dataclass(frozen=True)
class LinearImage:
    """RGB raster in linear radiometric units, shape (h, w, 3) float64."""

    pixels: np.ndarray = field(repr=False)

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.float64)
        if px.ndim != 3 or px.shape[2] != 3:
            raise ValidationError(f"expected (h, w, 3) array, got {px.shape}")
        if not np.all(np.isfinite(px)):
            raise ValidationError("linear image contains non-finite values")
        if np.any(px < 0):
            raise ValidationError("linear image contains negative radiance")
        object.__setattr__(self, "pixels", np.ascontiguousarray(px))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True)
class TonemappedImage:
    """8-bit RGB raster, shape (h, w, 3) uint8."""

    pixels: np.ndarray = field(repr=False)

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 3 or px.shape[2] != 3:
            raise ValidationError(f"expected (h, w, 3) array, got {px.shape}")
        if px.dtype != np.uint8:
            raise ValidationError(f"expected uint8 pixels, got {px.dtype}")
        object.__setattr__(self, "pixels", np.ascontiguousarray(px))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True)
class Mask:
    """Boolean foreground mask, shape (h, w). True marks valid pixels."""

    bits: np.ndarray = field(repr=False)

    def __post_init__(self):
        b = np.asarray(self.bits)
        if b.ndim != 2:
            raise ValidationError(f"expected (h, w) array, got {b.shape}")
        if b.dtype != np.bool_:
            b = b.astype(bool)
        object.__setattr__(self, "bits", np.ascontiguousarray(b))

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def count(self) -> int:
        return int(self.bits.sum())


def read_png_rgb(path) -> TonemappedImage:
    """Read an 8-bit RGB PNG. Anything else (16-bit, palette, alpha) is rejected."""
    with Image.open(path) as im:
        if im.format != "PNG":
            raise ValidationError(f"{path}: not a PNG file (format={im.format})")
        if im.mode != "RGB":
            if im.mode in ("I", "I;16", "I;16B", "I;16L"):
                raise ValidationError(f"{path}: unsupported bit depth (mode={im.mode})")
            raise ValidationError(f"{path}: unsupported channel layout (mode={im.mode})")
        arr = np.asarray(im, dtype=np.uint8)
    return TonemappedImage(arr)


def write_png_rgb(img: TonemappedImage, path) -> None:
    Image.fromarray(img.pixels, mode="RGB").save(path, format="PNG")


def read_mask_png(path, threshold: int = 127) -> Mask:
    """Read a mask stored as 8-bit PNG; values > threshold are foreground."""
    with Image.open(path) as im:
        if im.format != "PNG":
            raise ValidationError(f"{path}: not a PNG file (format={im.format})")
        arr = np.asarray(im.convert("L"))
    return Mask(arr > threshold)


def write_mask_png(mask: Mask, path) -> None:
    Image.fromarray(np.where(mask.bits, 255, 0).astype(np.uint8), mode="L").save(
        path, format="PNG"
    )


def apply_mask_zero(img, mask: Mask):
    """Zero out background pixels; foreground pixels are untouched.

    Accepts LinearImage or TonemappedImage and returns the same type.
    Idempotent.
    """
    if (img.height, img.width) != (mask.height, mask.width):
        raise ValidationError(
            f"mask {mask.width}x{mask.height} does not match image {img.width}x{img.height}"
        )
    out = img.pixels.copy()
    out[~mask.bits] = 0
    if isinstance(img, LinearImage):
        return LinearImage(out)
    if isinstance(img, TonemappedImage):
        return TonemappedImage(out)
    raise ValidationError(f"unsupported image type {type(img).__name__}")
