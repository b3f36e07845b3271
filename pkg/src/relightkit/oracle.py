"""Brute-force reference renders of a shaded sphere and procedural environments.

The renderer sums every environment texel for every pixel. It deliberately
shares no code with the prefilter/light-map path so it can serve as an
independent check of it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .shading import GBuffer, encode_normals
from .sphere import sh_reconstruct

FIXTURE_KINDS = ("gradient-sky", "single-lobe", "band-limited-random")

# single-lobe fixture: E(d) = LOBE_AMBIENT + LOBE_PEAK * max(0, d . axis)
LOBE_AXIS = np.array([0.48, 0.6, 0.64])
LOBE_AMBIENT = 0.5
LOBE_PEAK = 2.0


@dataclass(frozen=True)
class OracleScene:
    radius: float = 1.0
    albedo: tuple = (0.8, 0.6, 0.5)
    ks: tuple = (0.0, 0.0, 0.0)
    phong_exponent: float = 16.0

    def __post_init__(self):
        if not 0 < self.radius <= 1:
            raise ValueError(f"sphere radius must be in (0, 1], got {self.radius}")
        if np.any(np.asarray(self.albedo) < 0) or np.any(np.asarray(self.ks) < 0):
            raise ValueError("albedo and ks must be non-negative")
        if self.phong_exponent < 1:
            raise ValueError(f"Phong exponent must be >= 1, got {self.phong_exponent}")


def sphere_normals(size: int, radius: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Orthographic sphere on a size x size canvas: (normals (H, W, 3), disk mask (H, W))."""
    c = (np.arange(size) + 0.5) / size * 2.0 - 1.0
    x = c[None, :] / radius
    y = -c[:, None] / radius
    r2 = x * x + y * y
    disk = r2 <= 1.0
    z = np.sqrt(np.clip(1.0 - r2, 0.0, None))
    n = np.stack(np.broadcast_arrays(x, y, z), axis=-1)
    n = np.where(disk[..., None], n, np.array([0.0, 0.0, 1.0]))
    return n, disk


def _env_texels(env: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    h, w = env.shape[:2]
    theta = np.pi * (np.arange(h) + 0.5) / h
    phi = 2.0 * np.pi * ((np.arange(w) + 0.5) / w - 0.5)
    st = np.sin(theta)[:, None]
    dirs = np.stack(
        np.broadcast_arrays(st * np.sin(phi)[None, :], np.cos(theta)[:, None], st * np.cos(phi)[None, :]),
        axis=-1,
    )
    omega = (2.0 * np.pi / w) * (np.pi / h) * np.sin(theta)
    return dirs.reshape(-1, 3), (env * omega[:, None, None]).reshape(h * w, -1)


def render_sphere_bruteforce(scene: OracleScene, env, size: int = 64) -> tuple[np.ndarray, GBuffer]:
    """Render Lambert + normalized Phong shading of a sphere by direct summation.

    out = albedo / pi * sum E max(0, n.w) dW + ks * sum E max(0, r.w)^n dW * (n+1) / (2 pi)

    Orthographic view along -z; returns the image and the analytic GBuffer.
    """
    env = np.asarray(env, dtype=np.float64)
    if env.ndim == 2:
        env = env[..., None]
    normals, disk = sphere_normals(size, scene.radius)
    dirs, radiance = _env_texels(env)
    view = np.array([0.0, 0.0, 1.0])
    n = scene.phong_exponent

    image = np.zeros((size, size, env.shape[2]))
    albedo = np.asarray(scene.albedo, dtype=np.float64)
    ks = np.asarray(scene.ks, dtype=np.float64)
    for i, j in zip(*np.nonzero(disk)):
        normal = normals[i, j]
        refl = 2.0 * normal.dot(view) * normal - view
        cos_n = np.maximum(dirs @ normal, 0.0)
        cos_r = np.maximum(dirs @ refl, 0.0)
        diffuse = cos_n @ radiance / np.pi
        specular = (cos_r**n) @ radiance * (n + 1.0) / (2.0 * np.pi)
        image[i, j] = albedo * diffuse + ks * specular

    encoded = np.where(disk[..., None], encode_normals(normals), 0.0)
    gbuffer = GBuffer(
        albedo=np.where(disk[..., None], albedo, 0.0),
        normal=encoded,
        mask=disk[..., None].astype(np.float64),
        lens_normal=encoded.copy(),
    )
    return image, gbuffer


def make_fixture(kind: str, width: int = 64, height: int = 32, seed: int = 0) -> np.ndarray:
    """Procedural RGB environment maps with closed forms.

    gradient-sky:  ground + (zenith - ground) * (1 + y) / 2
    single-lobe:   0.5 + 2 * max(0, d . axis), axis ~ (0.48, 0.6, 0.64)
    band-limited-random: random order-2 SH lighting (seeded), raised by a
        constant so it stays >= 0.1 (see :func:`band_limited_coeffs`)
    """
    if width != 2 * height or height < 1:
        raise ValueError(f"fixture size must be 2H x H, got {width}x{height}")
    theta = np.pi * (np.arange(height) + 0.5) / height
    phi = 2.0 * np.pi * ((np.arange(width) + 0.5) / width - 0.5)
    st = np.sin(theta)[:, None]
    d = np.stack(
        np.broadcast_arrays(st * np.sin(phi)[None, :], np.cos(theta)[:, None], st * np.cos(phi)[None, :]),
        axis=-1,
    )

    if kind == "gradient-sky":
        ground = np.array([0.3, 0.25, 0.2])
        zenith = np.array([0.6, 0.8, 1.2])
        t = 0.5 * (1.0 + d[..., 1:2])
        return ground + (zenith - ground) * t
    if kind == "single-lobe":
        axis = LOBE_AXIS / np.linalg.norm(LOBE_AXIS)
        lobe = LOBE_AMBIENT + LOBE_PEAK * np.maximum(d @ axis, 0.0)
        return np.repeat(lobe[..., None], 3, axis=-1) * np.array([1.0, 0.9, 0.8])
    if kind == "band-limited-random":
        return sh_reconstruct(band_limited_coeffs(seed), width, height)
    raise ValueError(f"unknown fixture {kind!r}, expected one of {FIXTURE_KINDS}")


def band_limited_coeffs(seed: int = 0) -> np.ndarray:
    """Exact (9, 3) SH coefficients of the band-limited-random fixture.

    The constant term is raised until the lighting is at least 0.1 on a
    512x256 grid, so the fixture is the same function at every resolution.
    """
    rng = np.random.default_rng(seed)
    coeffs = rng.normal(size=(9, 3)) * np.array([1.0, 0.5, 0.5, 0.5, 0.3, 0.3, 0.3, 0.3, 0.3])[:, None]
    lowest = sh_reconstruct(coeffs, 512, 256).min(axis=(0, 1))
    coeffs[0] += (0.1 - lowest) * 2.0 * np.sqrt(np.pi)
    return coeffs


def single_lobe_flux() -> float:
    """Closed-form integral of the single-lobe fixture's first channel over the sphere."""
    return 4.0 * np.pi * LOBE_AMBIENT + LOBE_PEAK * np.pi
