"""Spherical Bessel/Hankel functions of real argument and Legendre polynomials."""
from __future__ import annotations

from dataclasses import dataclass
from math import ceil

import numpy as np

_RESCALE = 1e250


@dataclass(frozen=True, eq=False)
class RadialTable:
    """j_l, y_l and their derivatives at a single argument x for l = 0..l_max."""

    x: float
    j: np.ndarray
    y: np.ndarray
    dj: np.ndarray
    dy: np.ndarray

    @property
    def l_max(self) -> int:
        return len(self.j) - 1

    @property
    def h(self) -> np.ndarray:
        return self.j + 1j * self.y

    @property
    def dh(self) -> np.ndarray:
        return self.dj + 1j * self.dy


def _bessel_j(l_max: int, x: float) -> np.ndarray:
    # Miller's backward recurrence; start well above both l_max and x.
    start = max(l_max, ceil(x)) + max(20, ceil(x))
    vals = np.zeros(start + 2)
    vals[start] = 1e-300
    for l in range(start, 0, -1):
        vals[l - 1] = (2 * l + 1) / x * vals[l] - vals[l + 1]
        if abs(vals[l - 1]) > _RESCALE:
            vals[l - 1 :] /= _RESCALE
    s, c = np.sin(x), np.cos(x)
    j0 = s / x
    j1 = s / x**2 - c / x
    if abs(j0) >= abs(j1):
        scale = j0 / vals[0]
    else:
        scale = j1 / vals[1]
    out = vals[: l_max + 2] * scale
    out[0] = j0
    return out


def _bessel_y(l_max: int, x: float) -> np.ndarray:
    out = np.empty(l_max + 2)
    s, c = np.sin(x), np.cos(x)
    out[0] = -c / x
    out[1] = -c / x**2 - s / x
    for l in range(1, l_max + 1):
        out[l + 1] = (2 * l + 1) / x * out[l] - out[l - 1]
    return out


def radial_table(l_max: int, x: float) -> RadialTable:
    """Tabulate spherical Bessel functions and derivatives for orders 0..l_max.

    j_l comes from a normalized backward recurrence and y_l from the
    (stable) forward one.  Derivatives use f'_l = f_{l-1} - (l+1)/x f_l,
    with f'_0 = -f_1.
    """
    if l_max < 0:
        raise ValueError(f"l_max must be non-negative, got {l_max}")
    x = float(x)
    if not x > 0:
        raise ValueError(f"argument must be positive, got {x}")
    j = _bessel_j(l_max, x)
    y = _bessel_y(l_max, x)
    l = np.arange(1, l_max + 1)
    dj = np.empty(l_max + 1)
    dy = np.empty(l_max + 1)
    dj[0], dy[0] = -j[1], -y[1]
    dj[1:] = j[:l_max] - (l + 1) / x * j[1 : l_max + 1]
    dy[1:] = y[:l_max] - (l + 1) / x * y[1 : l_max + 1]
    return RadialTable(x=x, j=j[: l_max + 1], y=y[: l_max + 1], dj=dj, dy=dy)


def _check_unit_interval(t):
    t = np.asarray(t, dtype=float)
    if np.any(np.abs(t) > 1.0 + 1e-12):
        raise ValueError("Legendre argument outside [-1, 1]")
    return np.clip(t, -1.0, 1.0)


def legendre_values(l_max: int, t) -> np.ndarray:
    """P_0(t)..P_{l_max}(t) by the three-term recurrence; shape (l_max+1, *t.shape)."""
    t = _check_unit_interval(t)
    p = np.empty((l_max + 1,) + t.shape)
    p[0] = 1.0
    if l_max >= 1:
        p[1] = t
    for l in range(1, l_max):
        p[l + 1] = ((2 * l + 1) * t * p[l] - l * p[l - 1]) / (l + 1)
    return p


def legendre_derivatives(l_max: int, t) -> np.ndarray:
    """P'_0(t)..P'_{l_max}(t) via P'_{l+1} = P'_{l-1} + (2l+1) P_l (no endpoint singularity)."""
    t = _check_unit_interval(t)
    p = legendre_values(l_max, t)
    dp = np.zeros_like(p)
    if l_max >= 1:
        dp[1] = 1.0
    for l in range(1, l_max):
        dp[l + 1] = dp[l - 1] + (2 * l + 1) * p[l]
    return dp


def gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    """n-point Gauss-Legendre nodes (ascending) and weights on [-1, 1]."""
    if n < 1:
        raise ValueError("need at least one node")
    return np.polynomial.legendre.leggauss(n)
