"""Light maps from prefiltered environments and the coarse relighting model.

R0 = A * (Cd * Ld + Cs * Ls), with Ls the weighted sum of the Phong light
maps plus the lens glare channel, and R = max(R0 + dR, 0) * mask.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .imgio import as_image
from .prefilter import LENS_EXPONENT, PrefilteredSet, prefilter_set
from .sphere import sample_bilinear

EXPONENTS = (1, 16, 32, 64)


def decode_normals(encoded) -> np.ndarray:
    """rgb in [0, 1] -> unit vectors via 2 * rgb - 1; zero vectors become +z."""
    d = 2.0 * as_image(encoded)[..., :3].astype(np.float64) - 1.0
    norm = np.linalg.norm(d, axis=-1, keepdims=True)
    degenerate = norm[..., 0] < 1e-8
    d = np.divide(d, norm, out=np.zeros_like(d), where=norm > 0)
    d[degenerate] = (0.0, 0.0, 1.0)
    return d


def encode_normals(normals) -> np.ndarray:
    return 0.5 * (np.asarray(normals, dtype=np.float64) + 1.0)


def reflect(view, normal) -> np.ndarray:
    """Mirror `view` about `normal`: r = 2 (n.v) n - v, renormalized."""
    view = np.asarray(view, dtype=np.float64)
    normal = np.asarray(normal, dtype=np.float64)
    r = 2.0 * np.sum(normal * view, axis=-1, keepdims=True) * normal - view
    norm = np.linalg.norm(r, axis=-1, keepdims=True)
    return r / np.where(norm > 0, norm, 1.0)


@dataclass(frozen=True)
class ViewModel:
    """Per-pixel direction towards the camera.

    "ortho" uses (0, 0, 1) everywhere. "pinhole" places the camera on +z
    looking down -z with horizontal field of view `fov` (radians).
    """

    kind: str = "ortho"
    fov: float = 0.0

    @classmethod
    def parse(cls, text: str) -> "ViewModel":
        if text == "ortho":
            return cls()
        if text.startswith("pinhole:"):
            fov = np.deg2rad(float(text.split(":", 1)[1]))
            if not 0 < fov < np.pi:
                raise ValueError(f"pinhole field of view must be in (0, 180) degrees, got {text}")
            return cls("pinhole", fov)
        raise ValueError(f"unknown view model {text!r}, expected 'ortho' or 'pinhole:<deg>'")

    def view_vectors(self, height: int, width: int) -> np.ndarray:
        if self.kind == "ortho":
            return np.broadcast_to(np.array([0.0, 0.0, 1.0]), (height, width, 3))
        if self.kind != "pinhole":
            raise ValueError(f"unknown view model {self.kind!r}")
        t = np.tan(0.5 * self.fov)
        x = ((np.arange(width) + 0.5) / width * 2.0 - 1.0) * t
        y = (1.0 - (np.arange(height) + 0.5) / height * 2.0) * t * height / width
        ray = np.stack(np.broadcast_arrays(x[None, :], y[:, None], -1.0), axis=-1)
        return -ray / np.linalg.norm(ray, axis=-1, keepdims=True)


@dataclass(frozen=True)
class GBuffer:
    """Albedo, encoded normals, encoded lens normals and a [0, 1] mask."""

    albedo: np.ndarray
    normal: np.ndarray
    mask: np.ndarray
    lens_normal: np.ndarray | None = None

    def __post_init__(self):
        shape = np.shape(self.albedo)[:2]
        rasters = {"normal": self.normal, "mask": self.mask}
        if self.lens_normal is not None:
            rasters["lens_normal"] = self.lens_normal
        for name, raster in rasters.items():
            if np.shape(raster)[:2] != shape:
                raise ValueError(f"GBuffer {name} is {np.shape(raster)[:2]}, albedo is {shape}")

    @property
    def shape(self) -> tuple[int, int]:
        return np.shape(self.albedo)[:2]

    def normals(self) -> np.ndarray:
        return decode_normals(self.normal)

    def lens_normals(self) -> np.ndarray:
        return decode_normals(self.normal if self.lens_normal is None else self.lens_normal)

    def inside(self) -> np.ndarray:
        """Boolean (H, W) array of pixels with non-zero mask."""
        return as_image(self.mask)[..., 0] > 0


@dataclass
class LightMaps:
    diffuse: np.ndarray
    specular: dict[int, np.ndarray]
    lens: np.ndarray
    combined: np.ndarray | None = None


@dataclass(frozen=True)
class SpecWeights:
    """Specular weights; each entry a scalar or an (H, W[, 1]) map, clamped to [0, 1]."""

    weights: dict = field(default_factory=lambda: {16: 1.0})
    lens: object = 0.0

    def get(self, exponent: int):
        return _clamp_weight(self.weights.get(exponent, 0.0))

    def get_lens(self):
        return _clamp_weight(self.lens)


def _clamp_weight(w):
    w = np.asarray(w, dtype=np.float64)
    if not np.all(np.isfinite(w)):
        raise ValueError("specular weights must be finite")
    w = np.clip(w, 0.0, 1.0)
    if w.ndim == 2:
        w = w[..., None]
    return w


@dataclass(frozen=True)
class RenderCoeffs:
    cd: tuple = (1.0, 1.0, 1.0)
    cs: tuple = (1.0, 1.0, 1.0)

    def __post_init__(self):
        for name in ("cd", "cs"):
            value = np.asarray(getattr(self, name), dtype=np.float64)
            if value.shape not in ((), (3,)) or not np.all(np.isfinite(value)):
                raise ValueError(f"{name} must be a finite scalar or RGB triple, got {getattr(self, name)}")


def compute_light_maps(prefiltered: PrefilteredSet, gbuffer: GBuffer, view: ViewModel | None = None) -> LightMaps:
    """Index the prefiltered maps by normal (diffuse) or reflection (specular)."""
    view = view or ViewModel()
    h, w = gbuffer.shape
    inside = gbuffer.inside()[..., None]
    v = view.view_vectors(h, w)
    n = gbuffer.normals()
    r = reflect(v, n)
    r_lens = reflect(v, gbuffer.lens_normals())

    def lookup(env, dirs):
        return np.where(inside, sample_bilinear(env, dirs), 0.0)

    return LightMaps(
        diffuse=lookup(prefiltered.diffuse, n),
        specular={e: lookup(prefiltered.specular[e], r) for e in EXPONENTS},
        lens=lookup(prefiltered.specular[LENS_EXPONENT], r_lens),
    )


def combine_specular(light_maps: LightMaps, weights: SpecWeights) -> np.ndarray:
    """Ls = sum_i W_i * Ls_i + W_lens * Ls_lens (pixel-wise)."""
    total = weights.get_lens() * light_maps.lens
    for e in EXPONENTS:
        total = total + weights.get(e) * light_maps.specular[e]
    return total


def compose_coarse(albedo, diffuse, specular, coeffs: RenderCoeffs) -> np.ndarray:
    cd = np.asarray(coeffs.cd, dtype=np.float64)
    cs = np.asarray(coeffs.cs, dtype=np.float64)
    return as_image(albedo) * (cd * as_image(diffuse) + cs * as_image(specular))


def compose_final(coarse, residual, mask) -> tuple[np.ndarray, float]:
    """R = max(R0 + dR, 0) * mask; also returns the residual L1 norm sum|dR|."""
    coarse = as_image(coarse)
    if residual is None:
        residual = np.zeros_like(coarse)
    residual = as_image(residual)
    out = np.maximum(coarse + residual, 0.0) * as_image(mask)
    return out, float(np.abs(residual).sum())


def relight(
    env,
    gbuffer: GBuffer,
    weights: SpecWeights | None = None,
    coeffs: RenderCoeffs | None = None,
    residual=None,
    view: ViewModel | None = None,
    prefiltered: PrefilteredSet | None = None,
    **prefilter_kwargs,
) -> np.ndarray:
    """Full coarse relighting of `gbuffer` under environment `env`.

    Extra keyword arguments go to :func:`prefilter_set` (output sizes).
    """
    weights = weights or SpecWeights()
    coeffs = coeffs or RenderCoeffs()
    if prefiltered is None:
        prefiltered = prefilter_set(env, **prefilter_kwargs)
    maps = compute_light_maps(prefiltered, gbuffer, view)
    maps.combined = combine_specular(maps, weights)
    coarse = compose_coarse(gbuffer.albedo, maps.diffuse, maps.combined, coeffs)
    out, _ = compose_final(coarse, residual, gbuffer.mask)
    return out
