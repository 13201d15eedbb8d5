"""Equirectangular environment maps.

Direction convention: +X maps to the image center, -X to the left/right
border, +Y to (u,v) = (0.25, 0.5), -Y to (0.75, 0.5), +Z to the upper
border. This gives

    u = fract(0.5 + atan2(-y, x) / (2 pi))
    v = acos(clamp(z, -1, 1)) / pi

with u defined as 0.5 at the poles. Lookup is bilinear with periodic wrap
in u and clamping in v. Importance sampling draws texels proportional to
luminance times the texel's solid angle, then a direction uniform in solid
angle within the texel, so the returned pdf is exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .image import LinearImage, ValidationError

_LUM = np.array([0.2126, 0.7152, 0.0722])


def dir_to_uv(d) -> tuple[float, float]:
    d = np.asarray(d, dtype=np.float64)
    if not np.all(np.isfinite(d)):
        raise ValidationError("non-finite direction")
    x, y, z = d
    if abs(z) >= 1.0 or (x == 0.0 and y == 0.0):
        return 0.5, 0.0 if z > 0 else 1.0
    u = 0.5 + math.atan2(-y, x) / (2.0 * math.pi)
    u -= math.floor(u)
    if u >= 1.0:  # guard the fract(1.0) edge after rounding
        u = 0.0
    v = math.acos(min(1.0, max(-1.0, z))) / math.pi
    return u, v


def uv_to_dir(u: float, v: float) -> np.ndarray:
    if not (0.0 <= u < 1.0) or not (0.0 <= v <= 1.0):
        raise ValidationError(f"uv out of range: ({u}, {v})")
    psi = 2.0 * math.pi * (u - 0.5)
    theta = math.pi * v
    st = math.sin(theta)
    return np.array([st * math.cos(psi), -st * math.sin(psi), math.cos(theta)])


def dirs_to_uv(d: np.ndarray) -> np.ndarray:
    """Vectorized dir_to_uv for an (n, 3) array; returns (n, 2)."""
    d = np.asarray(d, dtype=np.float64)
    u = 0.5 + np.arctan2(-d[:, 1], d[:, 0]) / (2.0 * np.pi)
    u -= np.floor(u)
    u[u >= 1.0] = 0.0
    v = np.arccos(np.clip(d[:, 2], -1.0, 1.0)) / np.pi
    at_pole = np.abs(d[:, 2]) >= 1.0
    u[at_pole] = 0.5
    return np.stack([u, v], axis=1)


def uvs_to_dir(uv: np.ndarray) -> np.ndarray:
    """Vectorized uv_to_dir for an (n, 2) array; returns (n, 3)."""
    psi = 2.0 * np.pi * (uv[:, 0] - 0.5)
    theta = np.pi * uv[:, 1]
    st = np.sin(theta)
    return np.stack([st * np.cos(psi), -st * np.sin(psi), np.cos(theta)], axis=1)


class _SamplingTable:
    """Texel CDF over luminance * solid angle, plus per-row geometry."""

    def __init__(self, pixels: np.ndarray):
        h, w = pixels.shape[:2]
        lum = pixels @ _LUM
        theta_edges = np.linspace(0.0, np.pi, h + 1)
        cos_edges = np.cos(theta_edges)
        dcos = cos_edges[:-1] - cos_edges[1:]  # positive, sums to 2
        solid = (2.0 * np.pi / w) * dcos  # per-row texel solid angle
        weights = lum * solid[:, None]
        total = weights.sum()
        if total <= 0:
            raise ValidationError("environment map has no positive luminance")
        self.shape = (h, w)
        self.prob = weights / total  # texel probability masses
        self.cdf = np.cumsum(self.prob.ravel())
        self.cdf[-1] = 1.0
        self.cos_edges = cos_edges
        self.solid = solid  # (h,)
        self.pdf_map = self.prob / solid[:, None]  # solid-angle density per texel

    def sample(self, rng: np.random.Generator, n: int):
        """Draw n directions; returns (dirs (n,3), pdf (n,))."""
        h, w = self.shape
        flat = np.searchsorted(self.cdf, rng.random(n), side="right")
        flat = np.minimum(flat, h * w - 1)
        row, col = np.divmod(flat, w)
        u = (col + rng.random(n)) / w
        cos_hi = self.cos_edges[row]
        cos_lo = self.cos_edges[row + 1]
        z = cos_hi + rng.random(n) * (cos_lo - cos_hi)  # uniform in cos(theta)
        st = np.sqrt(np.maximum(0.0, 1.0 - z * z))
        psi = 2.0 * np.pi * (u - 0.5)
        dirs = np.stack([st * np.cos(psi), -st * np.sin(psi), z], axis=1)
        return dirs, self.pdf_map[row, col]

    def pdf(self, dirs: np.ndarray) -> np.ndarray:
        """Density (1/sr) of `sample` at the given unit directions."""
        h, w = self.shape
        uv = dirs_to_uv(dirs)
        col = np.minimum((uv[:, 0] * w).astype(np.int64), w - 1)
        row = np.minimum((uv[:, 1] * h).astype(np.int64), h - 1)
        return self.pdf_map[row, col]


@dataclass(frozen=True)
class EnvironmentMap:
    image: LinearImage
    # Importance-sampling table; defaults to this map's own luminance. A
    # caller may supply the table of another map to share sample locations
    # (any positive density keeps the estimator unbiased).
    sampling: _SamplingTable | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.image.width != 2 * self.image.height:
            raise ValidationError(
                f"equirectangular map must be 2:1, got {self.image.width}x{self.image.height}"
            )

    @property
    def pixels(self) -> np.ndarray:
        return self.image.pixels

    @property
    def width(self) -> int:
        return self.image.width

    @property
    def height(self) -> int:
        return self.image.height

    def sampling_table(self) -> _SamplingTable:
        if self.sampling is not None:
            return self.sampling
        table = _SamplingTable(self.pixels)
        object.__setattr__(self, "sampling", table)
        return table

    def with_sampling_from(self, other: "EnvironmentMap") -> "EnvironmentMap":
        return EnvironmentMap(self.image, sampling=other.sampling_table())


def _bilinear_lookup(pixels: np.ndarray, uv: np.ndarray) -> np.ndarray:
    """Bilinear fetch at (n, 2) uv; u wraps, v clamps at the poles."""
    h, w = pixels.shape[:2]
    fu = uv[:, 0] * w - 0.5
    fv = uv[:, 1] * h - 0.5
    u0 = np.floor(fu)
    v0 = np.floor(fv)
    au = (fu - u0)[:, None]
    av = (fv - v0)[:, None]
    iu0 = (u0.astype(np.int64)) % w
    iu1 = (iu0 + 1) % w
    iv0 = np.clip(v0.astype(np.int64), 0, h - 1)
    iv1 = np.clip(iv0 + 1, 0, h - 1)
    p00 = pixels[iv0, iu0]
    p01 = pixels[iv0, iu1]
    p10 = pixels[iv1, iu0]
    p11 = pixels[iv1, iu1]
    top = p00 * (1.0 - au) + p01 * au
    bot = p10 * (1.0 - au) + p11 * au
    return top * (1.0 - av) + bot * av


def sample_env(env: EnvironmentMap, d) -> np.ndarray:
    """Radiance arriving from direction d (bilinear lookup)."""
    u, v = dir_to_uv(d)
    return _bilinear_lookup(env.pixels, np.array([[u, v]]))[0]


def sample_env_dirs(env: EnvironmentMap, dirs: np.ndarray) -> np.ndarray:
    return _bilinear_lookup(env.pixels, dirs_to_uv(dirs))


def rotate_env(env: EnvironmentMap, R: np.ndarray) -> EnvironmentMap:
    """Rotated map: output(u,v) = input(R^T uv_to_dir(u,v))."""
    R = np.asarray(R, dtype=np.float64)
    if R.shape != (3, 3) or np.abs(R.T @ R - np.eye(3)).max() > 1e-9 or np.linalg.det(R) < 0:
        raise ValidationError("R must be a rotation matrix")
    h, w = env.height, env.width
    us = (np.arange(w) + 0.5) / w
    vs = (np.arange(h) + 0.5) / h
    uu, vv = np.meshgrid(us, vs)
    uv = np.stack([uu.ravel(), vv.ravel()], axis=1)
    dirs = uvs_to_dir(uv) @ R  # rows (d R) == (R^T d)
    out = _bilinear_lookup(env.pixels, dirs_to_uv(dirs)).reshape(h, w, 3)
    return EnvironmentMap(LinearImage(out))


def _box_resample_axis(img: np.ndarray, new_n: int, axis: int) -> np.ndarray:
    """Exact box average along one axis via linear interpolation of cumsums."""
    img = np.moveaxis(img, axis, 0)
    n = img.shape[0]
    cum = np.concatenate([np.zeros((1,) + img.shape[1:]), np.cumsum(img, axis=0)], axis=0)
    edges = np.linspace(0.0, n, new_n + 1)
    lo = np.floor(edges).astype(np.int64)
    lo = np.minimum(lo, n)
    frac = (edges - lo).reshape((-1,) + (1,) * (img.ndim - 1))
    at_edges = cum[lo] + frac * (cum[np.minimum(lo + 1, n)] - cum[lo])
    out = (at_edges[1:] - at_edges[:-1]) * (new_n / n)
    return np.moveaxis(out, 0, axis)


def resize_env(env: EnvironmentMap, new_width: int, new_height: int) -> EnvironmentMap:
    """Area-weighted (box) resampling; supports non-integer scale factors."""
    if new_width != 2 * new_height:
        raise ValidationError("resized map must keep the 2:1 aspect")
    out = _box_resample_axis(env.pixels, new_height, axis=0)
    out = _box_resample_axis(out, new_width, axis=1)
    return EnvironmentMap(LinearImage(np.maximum(out, 0.0)))


def sample_direction(env: EnvironmentMap, rng: np.random.Generator):
    """One luminance-proportional direction and its solid-angle pdf."""
    dirs, pdf = env.sampling_table().sample(rng, 1)
    return dirs[0], float(pdf[0])


def sample_directions(env: EnvironmentMap, rng: np.random.Generator, n: int):
    return env.sampling_table().sample(rng, n)


def env_pdf(env: EnvironmentMap, dirs: np.ndarray) -> np.ndarray:
    return env.sampling_table().pdf(dirs)
