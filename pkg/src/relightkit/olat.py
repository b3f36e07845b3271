"""One-light-at-a-time environment maps and lighting-consistency measures."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .imgio import as_image
from .sphere import row_solid_angles

GOLDEN_ANGLE = np.pi * (3.0 - np.sqrt(5.0))

# azimuth sub-samples per pixel when measuring cap coverage
_COVERAGE_SAMPLES = 16


@dataclass(frozen=True)
class OlatSpec:
    count: int = 168
    angular_radius: float = 0.1
    intensity: float = 100.0
    width: int = 256
    height: int = 128

    def __post_init__(self):
        if self.count < 1:
            raise ValueError(f"OLAT count must be >= 1, got {self.count}")
        if not 0 < self.angular_radius < np.pi / 4:
            raise ValueError(f"angular radius must be in (0, pi/4), got {self.angular_radius}")
        if self.width != 2 * self.height:
            raise ValueError(f"OLAT maps must be 2H x H, got {self.width}x{self.height}")


def fibonacci_sphere(count: int) -> np.ndarray:
    """Golden-angle spiral of `count` unit directions, shape (count, 3).

    Heights are spaced at the centers of equal-area bands, so no point sits
    on a pole; a single point is placed at the +y pole.
    """
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    if count == 1:
        return np.array([[0.0, 1.0, 0.0]])
    k = np.arange(count)
    y = 1.0 - (2.0 * k + 1.0) / count
    r = np.sqrt(1.0 - y * y)
    t = GOLDEN_ANGLE * k
    return np.stack([r * np.sin(t), y, r * np.cos(t)], axis=1)


def _meridian_overlap(center, cos_r, phi, theta_lo, theta_hi) -> np.ndarray:
    """Integral of sin(theta) over the part of [theta_lo, theta_hi] inside the cap.

    Along the half-meridian at azimuth phi, d . center = R cos(theta - alpha),
    so the cap is an interval of theta around alpha. Returns (rows, len(phi)).
    """
    a = center[1]
    b = np.sin(phi) * center[0] + np.cos(phi) * center[2]
    amp = np.hypot(a, b)
    alpha = np.arctan2(b, a)
    ratio = np.divide(cos_r, amp, out=np.full_like(amp, np.inf), where=amp > 0)
    if amp.size and cos_r <= -1.0:
        ratio[:] = -1.0
    half = np.arccos(np.clip(ratio, -1.0, 1.0))
    half = np.where(ratio > 1.0, -1.0, half)  # empty interval

    total = np.zeros((theta_lo.size, phi.size))
    for shift in (-2.0 * np.pi, 0.0, 2.0 * np.pi):
        lo = np.maximum(theta_lo[:, None], (alpha - half + shift)[None, :])
        hi = np.minimum(theta_hi[:, None], (alpha + half + shift)[None, :])
        total += np.where(hi > lo, np.cos(lo) - np.cos(hi), 0.0)
    return total


def cap_map(center, radius: float, intensity: float, width: int, height: int) -> np.ndarray:
    """RGB lat-long map lit by a hard-edged spherical cap around `center`.

    A pixel gets `intensity` times the fraction of its solid angle inside
    the cap, so the cap's flux does not depend on where it sits in latitude.
    The fraction is exact in the polar direction and sub-sampled in azimuth.
    """
    center = np.asarray(center, dtype=np.float64)
    center = center / np.linalg.norm(center)
    w, h = width, height
    s = _COVERAGE_SAMPLES

    # only rows whose polar band can touch the cap
    theta_c = np.arccos(np.clip(center[1], -1.0, 1.0))
    lo = max(0, int(np.floor((theta_c - radius) / np.pi * h)) - 1)
    hi = min(h, int(np.ceil((theta_c + radius) / np.pi * h)) + 1)
    edges = np.pi * np.arange(lo, hi + 1) / h

    u = (np.arange(w)[:, None] + (np.arange(s)[None, :] + 0.5) / s).reshape(-1) / w
    phi = 2.0 * np.pi * (u - 0.5)
    inside = _meridian_overlap(center, np.cos(radius), phi, edges[:-1], edges[1:])
    row_area = (np.cos(edges[:-1]) - np.cos(edges[1:]))[:, None]
    fraction = inside.reshape(hi - lo, w, s).mean(axis=2) / row_area

    out = np.zeros((h, w, 1))
    out[lo:hi, :, 0] = intensity * np.clip(fraction, 0.0, 1.0)
    return np.repeat(out, 3, axis=2)


def make_olat_map(center, spec: OlatSpec) -> np.ndarray:
    """One OLAT environment: a cap of `spec.angular_radius` around `center`."""
    cap = 2.0 * np.pi * (1.0 - np.cos(spec.angular_radius))
    if cap < row_solid_angles(spec.width, spec.height).max():
        raise ValueError(
            f"cap of radius {spec.angular_radius} rad is smaller than one pixel at "
            f"{spec.width}x{spec.height}; use a higher resolution"
        )
    return cap_map(center, spec.angular_radius, spec.intensity, spec.width, spec.height)


def generate_olat_set(spec: OlatSpec | None = None) -> list[np.ndarray]:
    spec = spec or OlatSpec()
    return [make_olat_map(c, spec) for c in fibonacci_sphere(spec.count)]


def _masked_mean_abs(diff: np.ndarray, mask) -> float:
    diff = np.abs(as_image(diff))
    if mask is None:
        return float(diff.mean())
    inside = as_image(mask)[..., 0] > 0
    if not inside.any():
        raise ValueError("mask selects no pixels")
    return float(diff[inside].mean())


def olat_consistency(relight_fn, env1, env2, mask=None) -> float:
    """Mean |relight(E1) + relight(E2) - relight(E1 + E2)| over in-mask pixels."""
    env1 = np.asarray(env1, dtype=np.float64)
    env2 = np.asarray(env2, dtype=np.float64)
    diff = relight_fn(env1) + relight_fn(env2) - relight_fn(env1 + env2)
    return _masked_mean_abs(diff, mask)


def relative_consistency(ri, rj, ri_bar, rj_bar, mask=None) -> float:
    """Mean |(Ri - Rj) - (Ri_bar - Rj_bar)| over in-mask pixels."""
    ri, rj, ri_bar, rj_bar = (np.asarray(a, dtype=np.float64) for a in (ri, rj, ri_bar, rj_bar))
    return _masked_mean_abs((ri - rj) - (ri_bar - rj_bar), mask)
