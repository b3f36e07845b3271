"""Image-quality and temporal-consistency metrics.

All metrics work on linear values clamped to [0, 1] unless `clamp=False`.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .imgio import as_image

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
SSIM_RANGE = 1.0


def _prepare(a, b, clamp: bool) -> tuple[np.ndarray, np.ndarray]:
    a = as_image(a).astype(np.float64)
    b = as_image(b).astype(np.float64)
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")
    if clamp:
        a = np.clip(a, 0.0, 1.0)
        b = np.clip(b, 0.0, 1.0)
    return a, b


def _select(diff: np.ndarray, mask) -> np.ndarray:
    if mask is None:
        return diff
    inside = as_image(mask)[..., 0] > 0
    if inside.shape != diff.shape[:2]:
        raise ValueError(f"mask is {inside.shape}, images are {diff.shape[:2]}")
    if not inside.any():
        raise ValueError("mask selects no pixels")
    return diff[inside]


def mae(a, b, mask=None, clamp: bool = True) -> float:
    a, b = _prepare(a, b, clamp)
    return float(np.abs(_select(a - b, mask)).mean())


def mse(a, b, mask=None, clamp: bool = True) -> float:
    a, b = _prepare(a, b, clamp)
    return float(np.square(_select(a - b, mask)).mean())


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    x = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(x**2) / (2.0 * sigma**2))
    return g / g.sum()


def _filter_valid(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Separable 'valid' filtering of an (H, W) array."""
    k = kernel.size
    rows = sliding_window_view(img, k, axis=0) @ kernel
    return sliding_window_view(rows, k, axis=1) @ kernel


def ssim(a, b) -> float:
    """Mean SSIM over all fully-contained 11x11 Gaussian windows.

    Multi-channel images average the per-channel scores.
    """
    a, b = _prepare(a, b, clamp=True)
    if min(a.shape[:2]) < SSIM_WINDOW:
        raise ValueError(f"images must be at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {a.shape[1]}x{a.shape[0]}")
    c1 = (SSIM_K1 * SSIM_RANGE) ** 2
    c2 = (SSIM_K2 * SSIM_RANGE) ** 2
    g = gaussian_window()
    scores = []
    for ch in range(a.shape[2]):
        x, y = a[..., ch], b[..., ch]
        mu_x = _filter_valid(x, g)
        mu_y = _filter_valid(y, g)
        var_x = _filter_valid(x * x, g) - mu_x * mu_x
        var_y = _filter_valid(y * y, g) - mu_y * mu_y
        cov = _filter_valid(x * y, g) - mu_x * mu_y
        num = (2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2)
        den = (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
        scores.append((num / den).mean())
    return float(np.mean(scores))


def warp_bilinear(img, flow) -> tuple[np.ndarray, np.ndarray]:
    """Backward warp: out(p) = img(p + flow(p)), bilinearly interpolated.

    Returns the warped image and a boolean (H, W) map of samples that fell
    inside the frame.
    """
    img = as_image(img)
    flow = np.asarray(flow, dtype=np.float64)
    h, w = img.shape[:2]
    if flow.shape != (h, w, 2):
        raise ValueError(f"flow is {flow.shape}, expected {(h, w, 2)}")
    sx = np.arange(w)[None, :] + flow[..., 0]
    sy = np.arange(h)[:, None] + flow[..., 1]
    valid = (sx >= 0) & (sx <= w - 1) & (sy >= 0) & (sy <= h - 1)
    sx = np.clip(sx, 0, w - 1)
    sy = np.clip(sy, 0, h - 1)
    x0 = np.floor(sx).astype(np.int64)
    y0 = np.floor(sy).astype(np.int64)
    tx = (sx - x0)[..., None]
    ty = (sy - y0)[..., None]
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    src = img.astype(np.float64)
    top = src[y0, x0] * (1.0 - tx) + src[y0, x1] * tx
    bottom = src[y1, x0] * (1.0 - tx) + src[y1, x1] * tx
    out = top * (1.0 - ty) + bottom * ty
    return np.where(valid[..., None], out, 0.0), valid


def temporal_warp_error(frames, flows, clamp: bool = True) -> tuple[float, float]:
    """Mean over t of MAE/MSE between warp(frame_t, flow_t) and frame_{t+1}.

    flow_t lives on frame t+1's pixel grid and points into frame t. Pixels
    whose warp sample leaves the frame are excluded.
    """
    frames = list(frames)
    flows = list(flows)
    if len(frames) < 2:
        raise ValueError("need at least two frames")
    if len(flows) != len(frames) - 1:
        raise ValueError(f"expected {len(frames) - 1} flows for {len(frames)} frames, got {len(flows)}")
    maes, mses = [], []
    for t, flow in enumerate(flows):
        warped, valid = warp_bilinear(frames[t], flow)
        if not valid.any():
            raise ValueError(f"flow {t} maps every pixel outside the frame")
        maes.append(mae(warped, frames[t + 1], valid, clamp))
        mses.append(mse(warped, frames[t + 1], valid, clamp))
    return float(np.mean(maes)), float(np.mean(mses))
