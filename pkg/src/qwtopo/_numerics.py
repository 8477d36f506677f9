"""Small numerical helpers shared by the quantum-walk and SSH band code."""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from .errors import GapClosedError


def bz_grid(points: int) -> np.ndarray:
    """Uniform grid ``-pi + 2 pi j / points`` on the half-open zone [-pi, pi)."""
    return -math.pi + 2.0 * math.pi * np.arange(points) / points


def periodic_mean(values: np.ndarray) -> float:
    """Trapezoid rule for a periodic integrand sampled on :func:`bz_grid`.

    NaN samples (isolated gap closures where the integrand has a jump) are
    replaced by the mean of their two neighbours, which is the trapezoid value
    for a symmetric jump.
    """
    v = np.asarray(values, dtype=np.float64).copy()
    bad = np.isnan(v)
    if bad.any():
        left = np.roll(v, 1)
        right = np.roll(v, -1)
        v[bad] = 0.5 * (left[bad] + right[bad])
        if np.isnan(v).any():
            raise GapClosedError("integrand undefined on consecutive grid points")
    return float(v.mean())


def circle_residue(func: Callable[[np.ndarray], np.ndarray], center: complex,
                   radius: float, points: int = 64) -> complex:
    """Residue of ``func`` at ``center`` from ``(1/2 pi i) * contour integral``.

    The trapezoid rule on a circle converges geometrically when no other pole
    lies close to the contour.
    """
    phase = np.exp(2j * math.pi * np.arange(points) / points)
    z = center + radius * phase
    # dz = i r e^{i theta} dtheta, so (1/2 pi i) * integral = mean(f * r e^{i theta})
    return complex(np.mean(func(z) * radius * phase))


def wrap_angle(x):
    return (np.asarray(x) + math.pi) % (2.0 * math.pi) - math.pi


def planar_winding(xy: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]],
                   grid: int, max_step: float = math.pi / 4,
                   max_depth: int = 60) -> tuple[float, np.ndarray]:
    """Total signed angle swept by the planar curve ``k -> xy(k)`` over [-pi, pi].

    Intervals whose angle increment exceeds ``max_step`` are bisected until it
    does not, so a curve passing close to the origin is still resolved.
    Returns ``(total_angle, angles_on_grid)``.
    """
    ks = np.append(bz_grid(grid), math.pi)
    x, y = xy(ks)
    theta = np.arctan2(y, x)
    inc = wrap_angle(np.diff(theta))
    total = 0.0
    for j in np.flatnonzero(np.abs(inc) > max_step):
        total += _refine(xy, ks[j], ks[j + 1], theta[j], theta[j + 1], max_step, max_depth)
    total += float(np.sum(np.where(np.abs(inc) > max_step, 0.0, inc)))
    return total, theta[:-1]


def _refine(xy, ka, kb, ta, tb, max_step, max_depth) -> float:
    total = 0.0
    stack = [(ka, kb, ta, tb, 0)]
    while stack:
        ka, kb, ta, tb, depth = stack.pop()
        d = float(wrap_angle(tb - ta))
        if abs(d) <= max_step:
            total += d
            continue
        if depth >= max_depth:
            raise GapClosedError("curve passes through the origin; winding undefined")
        km = 0.5 * (ka + kb)
        xm, ym = xy(np.array([km]))
        tm = float(np.arctan2(ym[0], xm[0]))
        stack.append((km, kb, tm, tb, depth + 1))
        stack.append((ka, km, ta, tm, depth + 1))
    return total
