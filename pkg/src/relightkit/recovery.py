"""Least-squares recovery of second-order SH lighting from a shaded image."""

from __future__ import annotations

import numpy as np

from .imgio import as_image
from .oracle import sphere_normals
from .shading import decode_normals
from .sphere import SH_COUNT, irradiance_scale, sh_basis

TIKHONOV = 1e-6
MAX_CONDITION = 1e8
REFINE_STEPS = 2


class DegenerateGeometryError(ValueError):
    """Too few pixels, or normals that cannot constrain all 9 coefficients."""


def recover_sh(relit, albedo, normal, skin_mask) -> np.ndarray:
    """Fit per-channel SH lighting so that albedo * irradiance matches `relit`.

    Minimizes sum_skin (relit - albedo * sum_i c_i A_i Y_i(N))^2 per channel,
    with A_i the clamped-cosine band scaling divided by pi. `normal` is the
    encoded (rgb in [0, 1]) normal map. Returns coefficients of shape (9, C).

    The normal equations carry a Tikhonov term of 1e-6 * trace / 9; a couple
    of iterated-Tikhonov refinement steps then remove its bias on well
    determined directions.
    """
    relit = as_image(relit).astype(np.float64)
    albedo = as_image(albedo).astype(np.float64)
    mask = as_image(skin_mask)[..., 0] > 0
    if not (relit.shape[:2] == albedo.shape[:2] == mask.shape == np.shape(normal)[:2]):
        raise ValueError("relit, albedo, normal and mask must share one size")
    if albedo.shape[2] == 1 and relit.shape[2] > 1:
        albedo = np.repeat(albedo, relit.shape[2], axis=2)

    normals = decode_normals(normal)[mask]
    usable = mask.sum()
    if usable < SH_COUNT:
        raise DegenerateGeometryError(f"need at least {SH_COUNT} skin pixels, got {usable}")
    design = sh_basis(normals) * irradiance_scale()  # (P, 9)

    coeffs = np.empty((SH_COUNT, relit.shape[2]))
    for c in range(relit.shape[2]):
        a = design * albedo[mask][:, c : c + 1]
        gram = a.T @ a
        trace = np.trace(gram)
        if trace <= 0:
            raise DegenerateGeometryError(f"channel {c}: albedo is zero on every skin pixel")
        gram += TIKHONOV * trace / SH_COUNT * np.eye(SH_COUNT)
        cond = np.linalg.cond(gram)
        if cond > MAX_CONDITION:
            raise DegenerateGeometryError(f"channel {c}: condition number {cond:.3g} exceeds {MAX_CONDITION:g}")
        rhs = a.T @ relit[mask][:, c]
        x = np.linalg.solve(gram, rhs)
        # iterated Tikhonov: each step removes most of the remaining shrinkage
        for _ in range(REFINE_STEPS):
            x += np.linalg.solve(gram, rhs - a.T @ (a @ x))
        coeffs[:, c] = x
    return coeffs


def render_diffuse_sphere(coeffs, size: int = 64) -> np.ndarray:
    """Orthographic diffuse ball lit by SH `coeffs`; background is 0."""
    coeffs = np.asarray(coeffs, dtype=np.float64)
    if coeffs.ndim == 1:
        coeffs = coeffs[:, None]
    normals, disk = sphere_normals(size)
    shade = sh_basis(normals) * irradiance_scale() @ coeffs
    return np.where(disk[..., None], shade, 0.0)


def _disk(size: int) -> np.ndarray:
    return sphere_normals(size)[1]


def intensity_match(est_sphere, target_sphere) -> float:
    """Global scale s with mean(s * est) == mean(target) over the sphere disk."""
    est = as_image(est_sphere)
    target = as_image(target_sphere)
    if est.shape[:2] != target.shape[:2] or est.shape[0] != est.shape[1]:
        raise ValueError("sphere renderings must be square and the same size")
    disk = _disk(est.shape[0])
    est_mean = float(est[disk].mean())
    if est_mean <= 1e-12:
        raise ValueError(f"estimated sphere is black (mean {est_mean:.3g}); scale undefined")
    return float(target[disk].mean()) / est_mean


def sphere_error(est_sphere, target_sphere) -> float:
    """Mean L1 over the disk after matching the estimate's global intensity."""
    est = as_image(est_sphere).astype(np.float64)
    target = as_image(target_sphere).astype(np.float64)
    scale = intensity_match(est, target)
    disk = _disk(est.shape[0])
    return float(np.abs(scale * est[disk] - target[disk]).mean())


def lighting_error(est_coeffs, target_coeffs, size: int = 64) -> float:
    """Exposure-compensated sphere-rendering L1 between two SH lightings."""
    return sphere_error(render_diffuse_sphere(est_coeffs, size), render_diffuse_sphere(target_coeffs, size))
