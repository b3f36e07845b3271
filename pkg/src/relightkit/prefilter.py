"""Diffuse and Phong-specular prefiltering of lat-long environment maps.

All filters are normalized so that a constant environment maps to itself:
the diffuse kernel is max(0, n.w) / pi and the Phong kernel of exponent n
is max(0, r.w)^n / (2 pi / (n + 1)).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from math import gcd

import numpy as np
from numpy.polynomial.legendre import leggauss

from .sphere import (
    check_envmap,
    direction_grid,
    irradiance_scale,
    row_solid_angles,
    sh_project,
    sh_reconstruct,
)

SPECULAR_EXPONENTS = (1, 16, 32, 64, 1024)
LENS_EXPONENT = 1024

DEFAULT_SIZE = (64, 32)
DEFAULT_LENS_SIZE = (256, 128)

# Lobe values below this fraction of the peak are dropped.
LOBE_CUTOFF = 1e-6

_CHUNK = 1 << 22


def _check_size(width: int, height: int) -> None:
    if width < 1 or height < 1:
        raise ValueError(f"output size must be positive, got {width}x{height}")


def prefilter_diffuse_bruteforce(env, out_w: int = 64, out_h: int = 32) -> np.ndarray:
    """Irradiance map by direct summation over every environment texel.

    D(n) = (1/pi) sum_p E(p) max(0, n . d(p)) dOmega(p), evaluated at the
    pixel centers of an out_w x out_h lat-long grid.
    """
    env = check_envmap(env)
    _check_size(out_w, out_h)
    h, w, c = env.shape
    src = direction_grid(w, h).reshape(-1, 3)
    radiance = (env.astype(np.float64) * row_solid_angles(w, h)[:, None, None]).reshape(-1, c)
    dst = direction_grid(out_w, out_h).reshape(-1, 3)
    out = np.empty((dst.shape[0], c))
    step = max(1, _CHUNK // src.shape[0])
    for start in range(0, dst.shape[0], step):
        cos = dst[start : start + step] @ src.T
        np.maximum(cos, 0.0, out=cos)
        out[start : start + step] = cos @ radiance
    return (out / np.pi).reshape(out_h, out_w, c)


def prefilter_diffuse_sh(env, out_w: int | None = None, out_h: int | None = None) -> np.ndarray:
    """Irradiance map through the 9-coefficient SH approximation.

    Output defaults to the resolution of `env`.
    """
    env = check_envmap(env)
    out_h = env.shape[0] if out_h is None else out_h
    out_w = env.shape[1] if out_w is None else out_w
    _check_size(out_w, out_h)
    coeffs = sh_project(env) * irradiance_scale()[:, None]
    return sh_reconstruct(coeffs, out_w, out_h)


def quadrature_order(exponent: float, height: int) -> int:
    """Gauss-Legendre nodes per texel axis needed to resolve a Phong lobe.

    Keeps the constant-map error below ~1e-4 for every exponent up to 1024
    on maps as coarse as 64x32.
    """
    pitch = np.pi / height
    return int(np.ceil(2.0 * pitch * np.sqrt(exponent))) + 1


@lru_cache(maxsize=64)
def _phong_tables(in_w: int, in_h: int, out_w: int, out_h: int, exponent: float, order: int):
    """Per output row: (input rows, conj spectrum of the azimuthal kernel)."""
    period = in_w * out_w // gcd(in_w, out_w)
    nodes, weights = leggauss(order)
    nodes = 0.5 * (nodes + 1.0)
    weights = 0.5 * weights

    dth = np.pi / in_h
    dph = 2.0 * np.pi / in_w
    sub_theta = (np.arange(in_h)[:, None] + nodes[None, :]) * dth  # (in_h, s)
    sub_theta_w = weights[None, :] * dth * np.sin(sub_theta)
    sub_phi = (nodes - 0.5) * dph
    sub_phi_w = weights * dph
    offsets = 2.0 * np.pi * np.arange(period) / period + np.pi / in_w - np.pi / out_w
    cos_offsets = np.cos(offsets[:, None] + sub_phi[None, :])  # (L, s)

    cutoff = LOBE_CUTOFF ** (1.0 / exponent)
    reach = np.arccos(cutoff) + 0.5 * dth
    row_centers = (np.arange(in_h) + 0.5) * dth
    norm = (exponent + 1.0) / (2.0 * np.pi)

    tables = []
    for i in range(out_h):
        theta = np.pi * (i + 0.5) / out_h
        rows = np.nonzero(np.abs(row_centers - theta) <= reach)[0]
        a = np.cos(theta) * np.cos(sub_theta[rows])  # (r, s)
        b = np.sin(theta) * np.sin(sub_theta[rows])
        cosg = a[:, :, None, None] + b[:, :, None, None] * cos_offsets[None, None]
        lobe = np.zeros_like(cosg)
        lit = cosg > cutoff
        lobe[lit] = cosg[lit] ** exponent
        kernel = np.einsum("rasb,ra,b->rs", lobe, sub_theta_w[rows], sub_phi_w) * norm
        spectrum = np.conj(np.fft.rfft(kernel, axis=-1))
        spectrum.setflags(write=False)
        tables.append((rows, spectrum))
    return period, tuple(tables)


def prefilter_specular(
    env, exponent: float, out_w: int = 64, out_h: int = 32, order: int | None = None
) -> np.ndarray:
    """Phong-prefiltered map indexed by reflection direction.

    S_n(r) = sum_p E(p) max(0, r . d(p))^n dOmega(p) / (2 pi / (n + 1)).

    Each texel is treated as a constant-radiance patch and the lobe is
    integrated over its footprint with `order` x `order` Gauss-Legendre
    nodes (``order=1`` is the plain per-texel sum). Only texels within the
    cap where the lobe exceeds 1e-6 of its peak contribute.
    """
    env = check_envmap(env)
    _check_size(out_w, out_h)
    if exponent < 1:
        raise ValueError(f"Phong exponent must be >= 1, got {exponent}")
    h, w, c = env.shape
    if order is None:
        order = quadrature_order(exponent, h)
    period, tables = _phong_tables(w, h, out_w, out_h, float(exponent), int(order))

    # zero-stuff each row onto the common azimuth period
    stuffed = np.zeros((h, period, c))
    stuffed[:, :: period // w] = env
    env_spec = np.fft.rfft(stuffed, axis=1)  # (h, F, c)
    stride = period // out_w

    out = np.empty((out_h, out_w, c))
    for i, (rows, spectrum) in enumerate(tables):
        prod = np.einsum("rf,rfc->fc", spectrum, env_spec[rows])
        out[i] = np.fft.irfft(prod, n=period, axis=0)[::stride]
    return out


@dataclass(frozen=True)
class PrefilteredSet:
    """Diffuse irradiance map plus one Phong-prefiltered map per exponent."""

    diffuse: np.ndarray
    specular: dict[int, np.ndarray] = field(default_factory=dict)
    source_size: tuple[int, int] = (0, 0)

    def __post_init__(self):
        if set(self.specular) != set(SPECULAR_EXPONENTS):
            raise ValueError(
                f"specular maps must cover exponents {SPECULAR_EXPONENTS}, got {sorted(self.specular)}"
            )


def prefilter_set(
    env,
    out_w: int | None = None,
    out_h: int | None = None,
    lens_size: tuple[int, int] | None = None,
    diffuse_method: str = "bruteforce",
) -> PrefilteredSet:
    """Compute the diffuse map and all five specular maps.

    With an explicit `out_w`/`out_h` every map (including n=1024) uses that
    size. Otherwise maps are 64x32 and the n=1024 map is 256x128;
    `lens_size` overrides the n=1024 size alone.
    """
    env = check_envmap(env)
    if (out_w is None) != (out_h is None):
        raise ValueError("out_w and out_h must be given together")
    if out_w is None:
        out_w, out_h = DEFAULT_SIZE
        lens_w, lens_h = lens_size or DEFAULT_LENS_SIZE
    else:
        lens_w, lens_h = lens_size or (out_w, out_h)

    if diffuse_method == "bruteforce":
        diffuse = prefilter_diffuse_bruteforce(env, out_w, out_h)
    elif diffuse_method == "sh":
        diffuse = prefilter_diffuse_sh(env, out_w, out_h)
    else:
        raise ValueError(f"unknown diffuse method {diffuse_method!r}")

    specular = {}
    for n in SPECULAR_EXPONENTS:
        if n == LENS_EXPONENT:
            specular[n] = prefilter_specular(env, n, lens_w, lens_h)
        else:
            specular[n] = prefilter_specular(env, n, out_w, out_h)
    return PrefilteredSet(diffuse, specular, (env.shape[1], env.shape[0]))
