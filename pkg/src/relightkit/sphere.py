"""Direction math on the unit sphere.

Lat-long convention used everywhere in the package::

    theta = pi * v                 polar angle from +y
    phi   = 2 * pi * (u - 0.5)     azimuth about +y, zero at +z
    d     = (sin(theta) sin(phi), cos(theta), sin(theta) cos(phi))

so +y is up, the top row is the +y pole and the image center faces +z.
Pixel (row i, column j) of an H x W map has its center at
u = (j + 0.5) / W, v = (i + 0.5) / H.

Spherical harmonics are the real, second-order basis (9 functions) ordered
(0,0), (1,-1), (1,0), (1,1), (2,-2), (2,-1), (2,0), (2,1), (2,2).
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss

SH_COUNT = 9

# Gauss-Legendre nodes per pixel axis when integrating the basis over a pixel
_PROJECTION_NODES = 3

Y00 = 0.28209479177387814  # 1 / (2 sqrt(pi))
Y1 = 0.4886025119029199  # sqrt(3 / (4 pi))
Y2_XY = 1.0925484305920792  # sqrt(15 / pi) / 2
Y2_ZZ = 0.31539156525252005  # sqrt(5 / pi) / 4
Y2_XX_YY = 0.5462742152960396  # sqrt(15 / pi) / 4

# Clamped-cosine convolution per band: A0 = pi, A1 = 2pi/3, A2 = pi/4.
IRRADIANCE_BANDS = (np.pi, 2.0 * np.pi / 3.0, np.pi / 4.0)
SH_BAND = np.array([0, 1, 1, 1, 2, 2, 2, 2, 2])


def irradiance_scale() -> np.ndarray:
    """Per-coefficient band scaling divided by pi (radiance-normalized)."""
    return np.array([IRRADIANCE_BANDS[l] for l in SH_BAND]) / np.pi


def check_envmap(env: np.ndarray) -> np.ndarray:
    """Return `env` as an (H, W, C) float array, validating the 2:1 layout."""
    env = np.asarray(env)
    if env.ndim == 2:
        env = env[..., None]
    if env.ndim != 3 or env.shape[0] < 1:
        raise ValueError(f"environment map must be (H, W, C), got shape {env.shape}")
    h, w = env.shape[:2]
    if w != 2 * h:
        raise ValueError(f"environment map must have width == 2 * height, got {w}x{h}")
    return env


def pixel_to_direction(u, v) -> np.ndarray:
    """Map lat-long coordinates in [0, 1) to unit directions, shape (..., 3)."""
    theta = np.pi * np.asarray(v, dtype=np.float64)
    phi = 2.0 * np.pi * (np.asarray(u, dtype=np.float64) - 0.5)
    st = np.sin(theta)
    return np.stack(np.broadcast_arrays(st * np.sin(phi), np.cos(theta), st * np.cos(phi)), axis=-1)


def direction_to_pixel(d) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of :func:`pixel_to_direction`; u wraps into [0, 1).

    At the exact poles the azimuth is undefined and u is 0.5.
    """
    d = np.asarray(d, dtype=np.float64)
    d = d / np.linalg.norm(d, axis=-1, keepdims=True)
    x, y, z = d[..., 0], d[..., 1], d[..., 2]
    v = np.arctan2(np.hypot(x, z), y) / np.pi
    u = np.arctan2(x, z) / (2.0 * np.pi) + 0.5
    u = np.where((x == 0.0) & (z == 0.0), 0.5, u)
    u = np.mod(u, 1.0)
    # mod can round 1 - tiny up to exactly 1.0
    u = np.where(u >= 1.0, 0.0, u)
    return u, v


@lru_cache(maxsize=32)
def _grid(width: int, height: int) -> tuple[np.ndarray, np.ndarray]:
    v = (np.arange(height) + 0.5) / height
    u = (np.arange(width) + 0.5) / width
    dirs = pixel_to_direction(u[None, :], v[:, None])
    theta = np.pi * v
    omega = (2.0 * np.pi / width) * (np.pi / height) * np.sin(theta)
    dirs.setflags(write=False)
    omega.setflags(write=False)
    return dirs, omega


def direction_grid(width: int, height: int) -> np.ndarray:
    """Pixel-center directions of a lat-long map, shape (height, width, 3). Read-only."""
    return _grid(int(width), int(height))[0]


def row_solid_angles(width: int, height: int) -> np.ndarray:
    """Solid angle of one pixel in each row, shape (height,). Read-only."""
    return _grid(int(width), int(height))[1]


def solid_angle(env: np.ndarray, row: int) -> float:
    """Steradians covered by one pixel of `env` in row `row`."""
    h, w = np.shape(env)[:2]
    if not 0 <= row < h:
        raise IndexError(f"row {row} out of range for height {h}")
    return float(row_solid_angles(w, h)[row])


def solid_angle_map(width: int, height: int) -> np.ndarray:
    """Per-pixel solid angles, shape (height, width)."""
    return np.broadcast_to(row_solid_angles(width, height)[:, None], (height, width))


def sample_bilinear(env: np.ndarray, d) -> np.ndarray:
    """Bilinearly sample `env` along directions `d` (shape (..., 3)).

    The azimuth wraps around; the polar coordinate clamps at the first and
    last rows. Returns shape (..., C).
    """
    env = np.asarray(env)
    if env.ndim == 2:
        env = env[..., None]
    h, w = env.shape[:2]
    u, v = direction_to_pixel(d)
    fx = u * w - 0.5
    fy = np.clip(v * h - 0.5, 0.0, h - 1)
    x0 = np.floor(fx)
    y0 = np.floor(fy)
    tx = (fx - x0)[..., None]
    ty = (fy - y0)[..., None]
    x0 = x0.astype(np.int64)
    y0 = y0.astype(np.int64)
    x1 = np.mod(x0 + 1, w)
    x0 = np.mod(x0, w)
    y1 = np.minimum(y0 + 1, h - 1)
    top = env[y0, x0] * (1.0 - tx) + env[y0, x1] * tx
    bottom = env[y1, x0] * (1.0 - tx) + env[y1, x1] * tx
    return top * (1.0 - ty) + bottom * ty


def rotate_azimuth(env: np.ndarray, delta_phi: float) -> np.ndarray:
    """Rotate the environment content by `delta_phi` radians about +y.

    A rotation by a whole number of pixels is an exact column roll; other
    angles resample each row with periodic linear interpolation.
    """
    env = check_envmap(env)
    w = env.shape[1]
    shift = delta_phi * w / (2.0 * np.pi)
    k = round(shift)
    if abs(shift - k) < 1e-9:
        return np.roll(env, k % w, axis=1)
    base = np.floor(shift)
    t = shift - base
    a = np.roll(env, int(base) % w, axis=1)
    b = np.roll(env, (int(base) + 1) % w, axis=1)
    return (1.0 - t) * a + t * b


def flip_horizontal(env: np.ndarray) -> np.ndarray:
    """Mirror the azimuth (phi -> -phi)."""
    return check_envmap(env)[:, ::-1].copy()


def sh_basis(d) -> np.ndarray:
    """Evaluate the 9 real SH functions at directions `d`; shape (..., 9)."""
    d = np.asarray(d, dtype=np.float64)
    x, y, z = d[..., 0], d[..., 1], d[..., 2]
    return np.stack(
        [
            np.full_like(x, Y00),
            Y1 * y,
            Y1 * z,
            Y1 * x,
            Y2_XY * x * y,
            Y2_XY * y * z,
            Y2_ZZ * (3.0 * z * z - 1.0),
            Y2_XY * x * z,
            Y2_XX_YY * (x * x - y * y),
        ],
        axis=-1,
    )


@lru_cache(maxsize=16)
def _weighted_basis(width: int, height: int) -> tuple[np.ndarray, np.ndarray]:
    """Pixel-center basis (for reconstruction) and per-pixel basis integrals.

    Projection treats each pixel as a constant patch and integrates every
    basis function over its footprint with 3x3 Gauss-Legendre nodes, so a
    constant map projects onto Y00 alone.
    """
    dirs, _ = _grid(width, height)
    basis = sh_basis(dirs).reshape(-1, SH_COUNT)

    nodes, weights = leggauss(_PROJECTION_NODES)
    nodes = 0.5 * (nodes + 1.0)
    weights = 0.5 * weights
    dth, dph = np.pi / height, 2.0 * np.pi / width
    theta = (np.arange(height)[:, None] + nodes[None, :]) * dth  # (H, a)
    phi = (np.arange(width)[:, None] + nodes[None, :]) * dph - np.pi  # (W, b)
    st = np.sin(theta)[:, :, None, None]
    sub = np.stack(
        np.broadcast_arrays(
            st * np.sin(phi)[None, None], np.cos(theta)[:, :, None, None], st * np.cos(phi)[None, None]
        ),
        axis=-1,
    )  # (H, a, W, b, 3)
    w = (weights[:, None] * weights[None, :])[None, :, None, :] * (np.sin(theta)[:, :, None, None] * dth * dph)
    weighted = np.einsum("hawbk,hawb->khw", sh_basis(sub), np.broadcast_to(w, sub.shape[:-1]))
    weighted = weighted.reshape(SH_COUNT, -1)
    basis.setflags(write=False)
    weighted.setflags(write=False)
    return basis, weighted


def sh_project(env: np.ndarray) -> np.ndarray:
    """Project a lat-long map onto the 9 SH functions; returns (9, C)."""
    env = check_envmap(env)
    h, w, c = env.shape
    _, weighted = _weighted_basis(w, h)
    return weighted @ env.reshape(-1, c).astype(np.float64)


def sh_reconstruct(coeffs, width: int, height: int) -> np.ndarray:
    """Evaluate sum_i c_i Y_i on an H x W lat-long grid; returns (H, W, C)."""
    coeffs = np.asarray(coeffs, dtype=np.float64)
    if coeffs.ndim == 1:
        coeffs = coeffs[:, None]
    if coeffs.shape[0] != SH_COUNT:
        raise ValueError(f"expected {SH_COUNT} SH coefficients, got {coeffs.shape[0]}")
    basis, _ = _weighted_basis(int(width), int(height))
    return (basis @ coeffs).reshape(height, width, -1)
