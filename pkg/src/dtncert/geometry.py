"""Parametric smooth closed surfaces and their quadrature.

Every surface is parametrized by spherical angles (theta, phi), theta in
[0, pi] measured from +z.  Normals point out of the obstacle, into the
exterior domain where the scattered field lives.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from math import factorial, pi, sqrt

import numpy as np
from scipy.special import lpmv

from .special import gauss_legendre

MIN_N_THETA = 4
MIN_N_PHI = 8


@dataclass(frozen=True)
class SurfaceSpec:
    """Description of an obstacle boundary.

    ``coefficients`` holds ``(l, m, c)`` triples of a real spherical-harmonic
    perturbation of ``radius`` (star-shaped only); ``m < 0`` selects the
    ``sin(|m| phi)`` member.
    """

    kind: str = "sphere"
    radius: float = 1.0
    semi_axes: tuple[float, float, float] | None = None
    coefficients: tuple[tuple[int, int, float], ...] = ()

    def to_dict(self) -> dict:
        d: dict = {"kind": self.kind}
        if self.kind == "ellipsoid":
            d["semi_axes"] = list(self.semi_axes)
        else:
            d["radius"] = self.radius
        if self.coefficients:
            d["coefficients"] = [list(c) for c in self.coefficients]
        return d


def real_harmonic(l: int, m: int, theta, phi):
    """Orthonormal real spherical harmonic and its theta/phi derivatives."""
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    am = abs(m)
    if am > l:
        raise ValueError(f"|m| = {am} exceeds degree l = {l}")
    norm = sqrt((2 * l + 1) / (4 * pi) * factorial(l - am) / factorial(l + am))
    if m != 0:
        norm *= sqrt(2.0)
    x = np.cos(theta)
    p = lpmv(am, l, x)
    if am == 0:
        dp = lpmv(1, l, x) if l >= 1 else np.zeros_like(x)
    else:
        lower = lpmv(am - 1, l, x)
        upper = lpmv(am + 1, l, x) if am + 1 <= l else np.zeros_like(x)
        dp = 0.5 * (upper - (l + am) * (l - am + 1) * lower)
    if m > 0:
        ang, dang = np.cos(am * phi), -am * np.sin(am * phi)
    elif m < 0:
        ang, dang = np.sin(am * phi), am * np.cos(am * phi)
    else:
        ang, dang = np.ones_like(phi), np.zeros_like(phi)
    return norm * p * ang, norm * dp * ang, norm * p * dang


class Surface:
    """Base class: subclasses provide ``point`` and ``tangents``."""

    spec: SurfaceSpec

    def point(self, theta, phi) -> np.ndarray:
        raise NotImplementedError

    def tangents(self, theta, phi) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def contains(self, points) -> np.ndarray:
        raise NotImplementedError

    def _cross(self, theta, phi):
        xt, xp = self.tangents(theta, phi)
        return np.cross(xt, xp)

    def normal(self, theta, phi) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        phi = np.asarray(phi, dtype=float)
        c = self._cross(theta, phi)
        mag = np.linalg.norm(c, axis=-1)
        # the parametrization degenerates at the poles; nudge off them
        bad = mag < 1e-10
        if np.any(bad):
            th = np.where(theta < pi / 2, theta + 1e-7, theta - 1e-7)
            c = np.where(bad[..., None], self._cross(th, phi), c)
            mag = np.linalg.norm(c, axis=-1)
        return c / mag[..., None]

    def area_element(self, theta, phi) -> np.ndarray:
        """|X_theta x X_phi|, the area density per d(theta) d(phi)."""
        return np.linalg.norm(self._cross(theta, phi), axis=-1)

    @property
    def is_sphere(self) -> bool:
        return False


class StarShaped(Surface):
    """r(theta, phi) = r0 + sum c_lm Y_lm(theta, phi) along the radial ray."""

    def __init__(self, spec: SurfaceSpec):
        self.spec = spec
        self.r0 = float(spec.radius)
        self.terms = tuple((int(l), int(m), float(c)) for l, m, c in spec.coefficients)

    def radial(self, theta, phi):
        theta = np.asarray(theta, dtype=float)
        phi = np.asarray(phi, dtype=float)
        r = np.full(np.broadcast(theta, phi).shape, self.r0)
        rt = np.zeros_like(r)
        rp = np.zeros_like(r)
        for l, m, c in self.terms:
            y, yt, yp = real_harmonic(l, m, theta, phi)
            r = r + c * y
            rt = rt + c * yt
            rp = rp + c * yp
        return r, rt, rp

    @staticmethod
    def _frame(theta, phi):
        theta, phi = np.broadcast_arrays(theta, phi)
        st, ct = np.sin(theta), np.cos(theta)
        sp, cp = np.sin(phi), np.cos(phi)
        er = np.stack([st * cp, st * sp, ct], axis=-1)
        et = np.stack([ct * cp, ct * sp, -st], axis=-1)
        ep = np.stack([-sp, cp, np.zeros_like(sp)], axis=-1)
        return er, et, ep, st

    def point(self, theta, phi):
        r, _, _ = self.radial(theta, phi)
        er, _, _, _ = self._frame(np.asarray(theta, float), np.asarray(phi, float))
        return r[..., None] * er

    def tangents(self, theta, phi):
        theta = np.asarray(theta, dtype=float)
        phi = np.asarray(phi, dtype=float)
        r, rt, rp = self.radial(theta, phi)
        er, et, ep, st = self._frame(theta, phi)
        xt = rt[..., None] * er + r[..., None] * et
        xp = rp[..., None] * er + (r * st)[..., None] * ep
        return xt, xp

    def contains(self, points):
        p = np.atleast_2d(np.asarray(points, dtype=float))
        rho = np.linalg.norm(p, axis=1)
        theta = np.arccos(np.clip(p[:, 2] / np.where(rho > 0, rho, 1.0), -1, 1))
        phi = np.arctan2(p[:, 1], p[:, 0])
        r, _, _ = self.radial(theta, phi)
        return rho < r

    @property
    def is_sphere(self) -> bool:
        return not any(c != 0.0 for _, _, c in self.terms)

    @property
    def radius(self) -> float:
        return self.r0


class Ellipsoid(Surface):
    def __init__(self, spec: SurfaceSpec):
        self.spec = spec
        self.axes = np.asarray(spec.semi_axes, dtype=float)

    def point(self, theta, phi):
        theta = np.asarray(theta, dtype=float)
        phi = np.asarray(phi, dtype=float)
        a, b, c = self.axes
        st = np.sin(theta)
        return np.stack(
            [a * st * np.cos(phi), b * st * np.sin(phi), c * np.cos(theta) + 0 * phi],
            axis=-1,
        )

    def tangents(self, theta, phi):
        theta = np.asarray(theta, dtype=float)
        phi = np.asarray(phi, dtype=float)
        a, b, c = self.axes
        st, ct = np.sin(theta), np.cos(theta)
        sp, cp = np.sin(phi), np.cos(phi)
        xt = np.stack([a * ct * cp, b * ct * sp, -c * st + 0 * phi], axis=-1)
        xp = np.stack([-a * st * sp, b * st * cp, 0 * st * sp], axis=-1)
        return xt, xp

    def normal(self, theta, phi):
        g = self.point(theta, phi) / self.axes**2
        return g / np.linalg.norm(g, axis=-1)[..., None]

    def contains(self, points):
        p = np.atleast_2d(np.asarray(points, dtype=float))
        return np.sum((p / self.axes) ** 2, axis=1) < 1.0

    @property
    def is_sphere(self) -> bool:
        return bool(np.all(self.axes == self.axes[0]))

    @property
    def radius(self) -> float:
        return float(self.axes[0])


def build_surface(spec: SurfaceSpec) -> Surface:
    """Validate ``spec`` and return the parametric surface it describes."""
    if spec.kind == "ellipsoid":
        if spec.semi_axes is None or len(spec.semi_axes) != 3:
            raise ValueError("ellipsoid needs semi_axes = (a, b, c)")
        for name, v in zip("abc", spec.semi_axes):
            if not v > 0:
                raise ValueError(f"ellipsoid semi-axis {name} must be positive, got {v}")
        return Ellipsoid(spec)
    if spec.kind not in ("sphere", "star_shaped"):
        raise ValueError(f"unknown surface kind {spec.kind!r}")
    if not spec.radius > 0:
        raise ValueError(f"radius must be positive, got {spec.radius}")
    if spec.kind == "sphere" and spec.coefficients:
        raise ValueError("sphere takes no perturbation coefficients; use star_shaped")
    for l, m, _ in spec.coefficients:
        if l < 0 or abs(m) > l:
            raise ValueError(f"invalid harmonic index (l={l}, m={m})")
    surf = StarShaped(spec)
    if spec.coefficients:
        lmax = max(l for l, _, _ in spec.coefficients)
        n = max(64, 8 * lmax)
        th, ph = np.meshgrid(np.linspace(0, pi, n), np.linspace(0, 2 * pi, 2 * n))
        r, _, _ = surf.radial(th, ph)
        if r.min() <= 0.05 * spec.radius:
            raise ValueError(
                f"star_shaped radius drops to {r.min():.3g}; reduce the coefficients"
            )
    return surf


@dataclass(frozen=True, eq=False)
class BoundaryGrid:
    nodes: np.ndarray
    normals: np.ndarray
    weights: np.ndarray
    theta: np.ndarray
    phi: np.ndarray
    resolution: tuple[int, int]
    centroid: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return len(self.weights)

    @property
    def area(self) -> float:
        return float(self.weights.sum())

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "y", "z", "nx", "ny", "nz", "w"])
            for p, n, wt in zip(self.nodes, self.normals, self.weights):
                w.writerow([repr(float(v)) for v in (*p, *n, wt)])


def quadrature_grid(surface: Surface, n_theta: int, n_phi: int) -> BoundaryGrid:
    """Gauss-Legendre in cos(theta) times the trapezoid rule in phi."""
    if n_theta < MIN_N_THETA or n_phi < MIN_N_PHI:
        raise ValueError(
            f"resolution ({n_theta}, {n_phi}) below minimum ({MIN_N_THETA}, {MIN_N_PHI})"
        )
    t, wt = gauss_legendre(n_theta)
    theta1 = np.arccos(t[::-1])
    wt = wt[::-1]
    phi1 = 2 * pi * np.arange(n_phi) / n_phi
    th, ph = np.meshgrid(theta1, phi1, indexing="ij")
    th, ph = th.ravel(), ph.ravel()
    jac = surface.area_element(th, ph) / np.sin(th)
    weights = np.repeat(wt, n_phi) * (2 * pi / n_phi) * jac
    nodes = surface.point(th, ph)
    centroid = weights @ nodes / weights.sum()
    return BoundaryGrid(
        nodes=nodes,
        normals=surface.normal(th, ph),
        weights=weights,
        theta=th,
        phi=ph,
        resolution=(n_theta, n_phi),
        centroid=centroid,
    )


def sphere_directions(n_theta: int = 64, n_phi: int = 128) -> tuple[np.ndarray, np.ndarray]:
    """Unit directions and weights of the product rule on S^2 (weights sum to 4 pi)."""
    g = quadrature_grid(StarShaped(SurfaceSpec("sphere", 1.0)), n_theta, n_phi)
    return g.nodes, g.weights


def l2_norm(grid: BoundaryGrid, values) -> float:
    """sqrt(sum w_i |v_i|^2)."""
    v = np.asarray(values)
    if v.shape != (len(grid),):
        raise ValueError(f"trace has {v.size} samples, grid has {len(grid)} nodes")
    return float(np.sqrt(np.sum(grid.weights * np.abs(v) ** 2)))


@dataclass(frozen=True, eq=False)
class BoundaryTrace:
    """Samples of a field (and optionally its normal derivative) on a grid."""

    grid: BoundaryGrid
    u: np.ndarray
    dnu: np.ndarray | None = None

    def __post_init__(self):
        n = len(self.grid)
        if np.shape(self.u) != (n,):
            raise ValueError(f"trace has {np.size(self.u)} samples, grid has {n} nodes")
        if self.dnu is not None and np.shape(self.dnu) != (n,):
            raise ValueError(f"normal-derivative trace has {np.size(self.dnu)} samples, grid has {n}")

    def norm(self) -> float:
        return l2_norm(self.grid, self.u)

    def dn_norm(self) -> float:
        return l2_norm(self.grid, self.dnu)
