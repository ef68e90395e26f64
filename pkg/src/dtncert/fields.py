"""Free-space kernel and incident plane wave."""
from __future__ import annotations

import numpy as np


def unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v, axis=-1, keepdims=True)
    if np.any(n == 0):
        raise ValueError("zero vector has no direction")
    return v / n


def kernel(k: float, x, s) -> np.ndarray:
    """Outgoing fundamental solution e^{ik|x-s|} / (4 pi |x-s|), shape (len(x), len(s))."""
    d = np.linalg.norm(np.asarray(x)[:, None, :] - np.asarray(s)[None, :, :], axis=-1)
    return np.exp(1j * k * d) / (4 * np.pi * d)


def kernel_normal_derivative(k: float, x, normals, s) -> np.ndarray:
    """n(x) . grad_x of the kernel."""
    diff = np.asarray(x)[:, None, :] - np.asarray(s)[None, :, :]
    d = np.linalg.norm(diff, axis=-1)
    g = np.exp(1j * k * d) / (4 * np.pi * d)
    cos = np.einsum("ijk,ik->ij", diff, normals) / d
    return g * (1j * k - 1.0 / d) * cos


def plane_wave(k: float, theta0, points, normals=None):
    """e^{ik x.theta0} on ``points``; with ``normals`` also returns its normal derivative."""
    theta0 = unit(theta0)
    u = np.exp(1j * k * (np.asarray(points) @ theta0))
    if normals is None:
        return u
    return u, 1j * k * (np.asarray(normals) @ theta0) * u
