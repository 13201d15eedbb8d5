"""Pinhole camera with a single radial distortion coefficient.

World points project as x = K (R X + t); the camera looks along +z in its
own frame. Pixel coordinates follow the image convention where the center
of the first pixel is (0.5, 0.5). Radial distortion acts on normalized
coordinates: d = n * (1 + k1 * |n|^2).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .image import ValidationError

_UNDISTORT_ITERS = 20


@dataclass(frozen=True)
class Camera:
    K: np.ndarray = field(repr=False)  # 3x3 upper triangular, zero skew
    R: np.ndarray = field(repr=False)  # 3x3 rotation, world -> camera
    t: np.ndarray = field(repr=False)  # 3-vector translation
    k1: float = 0.0

    def __post_init__(self):
        K = np.asarray(self.K, dtype=np.float64)
        R = np.asarray(self.R, dtype=np.float64)
        t = np.asarray(self.t, dtype=np.float64).reshape(3)
        if K.shape != (3, 3) or R.shape != (3, 3):
            raise ValidationError("K and R must be 3x3")
        if K[0, 0] <= 0 or K[1, 1] <= 0:
            raise ValidationError("focal lengths must be positive")
        if any(abs(K[i, j]) > 0 for i, j in ((0, 1), (1, 0), (2, 0), (2, 1))):
            raise ValidationError("K must be upper triangular with zero skew")
        if abs(K[2, 2] - 1.0) > 1e-12:
            raise ValidationError("K[2,2] must be 1")
        err = np.abs(R.T @ R - np.eye(3)).max()
        if err > 1e-6:
            raise ValidationError(f"R is not orthonormal (deviation {err:.2e})")
        if err > 1e-9:
            R = _nearest_rotation(R)
        if np.linalg.det(R) < 0:
            raise ValidationError("R must have determinant +1")
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "k1", float(self.k1))

    @property
    def fx(self) -> float:
        return self.K[0, 0]

    @property
    def fy(self) -> float:
        return self.K[1, 1]

    @property
    def cx(self) -> float:
        return self.K[0, 2]

    @property
    def cy(self) -> float:
        return self.K[1, 2]

    @property
    def center(self) -> np.ndarray:
        """Camera center in world coordinates, C = -R^T t."""
        return -self.R.T @ self.t


def _nearest_rotation(R: np.ndarray) -> np.ndarray:
    U, _, Vt = np.linalg.svd(R)
    return U @ Vt


def project(cam: Camera, X) -> tuple[float, float] | None:
    """Project a world point; returns pixel (x, y) or None if behind the camera."""
    X = np.asarray(X, dtype=np.float64)
    if not np.all(np.isfinite(X)):
        raise ValidationError("non-finite world point")
    Xc = cam.R @ X + cam.t
    if Xc[2] <= 0:
        return None
    n = Xc[:2] / Xc[2]
    d = n * (1.0 + cam.k1 * (n @ n))
    return (cam.fx * d[0] + cam.cx, cam.fy * d[1] + cam.cy)


def project_batch(cam: Camera, X: np.ndarray):
    """Vectorized projection. Returns (pixels (n,2), valid (n,) bool)."""
    X = np.asarray(X, dtype=np.float64)
    Xc = X @ cam.R.T + cam.t
    valid = Xc[:, 2] > 0
    z = np.where(valid, Xc[:, 2], 1.0)
    n = Xc[:, :2] / z[:, None]
    r2 = (n * n).sum(axis=1)
    d = n * (1.0 + cam.k1 * r2)[:, None]
    px = np.empty_like(n)
    px[:, 0] = cam.fx * d[:, 0] + cam.cx
    px[:, 1] = cam.fy * d[:, 1] + cam.cy
    return px, valid


def _undistort(cam: Camera, d: np.ndarray) -> np.ndarray:
    """Invert radial distortion by fixed-point iteration n <- d/(1 + k1 |n|^2)."""
    n = d.copy()
    for _ in range(_UNDISTORT_ITERS):
        r2 = (n * n).sum(axis=-1, keepdims=True)
        n = d / (1.0 + cam.k1 * r2)
    r2 = (n * n).sum(axis=-1)
    if np.any(np.abs(cam.k1) * r2 >= 1.0):
        raise ValidationError("radial undistortion diverges (|k1| r^2 >= 1)")
    return n


def pixel_ray(cam: Camera, x: float, y: float):
    """Primary ray through pixel (x, y): (origin, unit direction) in world space."""
    o, d = pixel_rays(cam, np.array([[x, y]], dtype=np.float64))
    return o, d[0]


def pixel_rays(cam: Camera, pixels: np.ndarray):
    """Vectorized pixel_ray. Returns (origin (3,), directions (n,3))."""
    pixels = np.asarray(pixels, dtype=np.float64)
    d = np.empty_like(pixels)
    d[:, 0] = (pixels[:, 0] - cam.cx) / cam.fx
    d[:, 1] = (pixels[:, 1] - cam.cy) / cam.fy
    n = _undistort(cam, d)
    dirs_cam = np.concatenate([n, np.ones((len(n), 1))], axis=1)
    dirs = dirs_cam @ cam.R  # == (R^T @ dirs_cam^T)^T
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    return cam.center, dirs


def parse_camera(text: str) -> Camera:
    """Parse the 22-float camera text: 9 K + 9 R + 3 t + 1 k1, '#' comments."""
    tokens = []
    for line in text.splitlines():
        body = line.split("#", 1)[0]
        tokens.extend(body.split())
    if len(tokens) != 22:
        raise ValidationError(f"camera text has {len(tokens)} values, expected 22")
    vals = np.array([float(tok) for tok in tokens], dtype=np.float64)
    K = vals[:9].reshape(3, 3)
    R = vals[9:18].reshape(3, 3)
    t = vals[18:21]
    return Camera(K=K, R=R, t=t, k1=vals[21])


def serialize_camera(cam: Camera) -> str:
    """Inverse of parse_camera; 17 significant digits for a lossless roundtrip."""
    lines = ["# intrinsics K (3x3)"]
    for row in cam.K:
        lines.append(" ".join(f"{v:.17g}" for v in row))
    lines.append("# rotation R (3x3)")
    for row in cam.R:
        lines.append(" ".join(f"{v:.17g}" for v in row))
    lines.append("# translation t")
    lines.append(" ".join(f"{v:.17g}" for v in cam.t))
    lines.append("# radial distortion k1")
    lines.append(f"{cam.k1:.17g}")
    return "\n".join(lines) + "\n"


def read_camera(path) -> Camera:
    with open(path, "r", encoding="utf-8") as f:
        return parse_camera(f.read())


def write_camera(cam: Camera, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(serialize_camera(cam))


def look_at(eye, target, up=(0.0, 0.0, 1.0)) -> tuple[np.ndarray, np.ndarray]:
    """R, t for a camera at `eye` looking at `target` (+z forward, y down-ish)."""
    eye = np.asarray(eye, dtype=np.float64)
    fwd = np.asarray(target, dtype=np.float64) - eye
    fwd /= np.linalg.norm(fwd)
    up = np.asarray(up, dtype=np.float64)
    right = np.cross(fwd, up)
    nr = np.linalg.norm(right)
    if nr < 1e-9:  # looking straight along up
        right = np.cross(fwd, np.array([1.0, 0.0, 0.0]))
        nr = np.linalg.norm(right)
    right /= nr
    down = np.cross(fwd, right)
    R = np.stack([right, down, fwd], axis=0)
    t = -R @ eye
    return R, t
