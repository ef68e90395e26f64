"""Exact separated-variable solution for an impedance sphere.

Boundary operator: d/dn + k*gamma with dimensionless constant gamma,
n the outward normal (pointing into the exterior).  The scattered field is

    u(r) = sum_l a_l h_l(k|r|) P_l(r_hat . theta0)

for incidence e^{ik r.theta0}.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from math import ceil

import numpy as np

from .fields import unit
from .geometry import BoundaryGrid, BoundaryTrace
from .special import legendre_derivatives, legendre_values, radial_table

TAIL_TOLERANCE = 1e-12


def default_l_max(k: float, R: float) -> int:
    return ceil(k * R) + 30


@dataclass(frozen=True, eq=False)
class DtnSphereSpectrum:
    """DtN eigenvalues k h_l'(kR) / h_l(kR) on the sphere of radius R."""

    k: float
    R: float
    mu: np.ndarray

    @property
    def l_max(self) -> int:
        return len(self.mu) - 1

    def wronskian_imag(self) -> np.ndarray:
        """1 / (k R^2 |h_l(kR)|^2), the closed form of Im mu_l."""
        t = radial_table(self.l_max, self.k * self.R)
        return 1.0 / (self.k * self.R**2 * np.abs(t.h) ** 2)


def dtn_sphere_spectrum(k: float, R: float, l_max: int = 60) -> DtnSphereSpectrum:
    if not (k > 0 and R > 0):
        raise ValueError(f"k and R must be positive (k={k}, R={R})")
    t = radial_table(l_max, k * R)
    return DtnSphereSpectrum(k=float(k), R=float(R), mu=k * t.dh / t.h)


@dataclass(frozen=True)
class ResolventMargin:
    a: float
    b: float
    margin: float
    worst_l: int

    @property
    def passed(self) -> bool:
        return self.margin >= self.b


def resolvent_check(spectrum: DtnSphereSpectrum, a: float, b: float) -> ResolventMargin:
    """min_l |mu_l + a + ib|, to be compared against b.

    For b > 0 the exterior DtN map satisfies ||(DtN + a + ib) u|| >= b ||u||;
    on the sphere the modes diagonalize it, so the modal minimum is exact.
    """
    if not b > 0:
        raise ValueError("b > 0 required")
    dist = np.abs(spectrum.mu + a + 1j * b)
    i = int(np.argmin(dist))
    return ResolventMargin(a=float(a), b=float(b), margin=float(dist[i]), worst_l=i)


def resolvent_sweep(spectrum, a_values, b_values) -> list[ResolventMargin]:
    return [resolvent_check(spectrum, a, b) for b in b_values for a in a_values]


@dataclass(frozen=True, eq=False)
class MieSolution:
    k: float
    R: float
    gamma: complex
    theta0: np.ndarray
    coeffs: np.ndarray

    @property
    def l_max(self) -> int:
        return len(self.coeffs) - 1

    @property
    def tail_ratio(self) -> float:
        mag = np.abs(self.coeffs)
        top = mag.max()
        return float(mag[-1] / top) if top > 0 else 0.0

    def traces(self, grid: BoundaryGrid) -> BoundaryTrace:
        return mie_boundary_traces(self, grid)

    def far_field(self, directions) -> np.ndarray:
        return mie_far_field(self, directions)

    def cross_section(self) -> float:
        """Modal (Parseval) total cross section."""
        l = np.arange(self.l_max + 1)
        return float(np.sum(4 * np.pi * np.abs(self.coeffs) ** 2 / (2 * l + 1)) / self.k**2)


def mie_solve(k: float, R: float, gamma: complex, theta0=(0.0, 0.0, 1.0), l_max: int | None = None) -> MieSolution:
    """Scattered-field modal coefficients for plane-wave incidence."""
    gamma = complex(gamma)
    if not gamma.imag > 0:
        raise ValueError(f"impedance needs Im(gamma) > 0, got {gamma}")
    if not (k > 0 and R > 0):
        raise ValueError(f"k and R must be positive (k={k}, R={R})")
    if l_max is None:
        l_max = default_l_max(k, R)
    t = radial_table(l_max, k * R)
    l = np.arange(l_max + 1)
    denom = k * t.dh + k * gamma * t.h
    if np.any(np.abs(denom) == 0) or not np.all(np.isfinite(denom)):
        raise ArithmeticError("singular modal denominator")
    coeffs = -(1j**l) * (2 * l + 1) * (k * t.dj + k * gamma * t.j) / denom
    sol = MieSolution(k=float(k), R=float(R), gamma=gamma, theta0=unit(theta0), coeffs=coeffs)
    if sol.tail_ratio > TAIL_TOLERANCE:
        warnings.warn(f"modal tail {sol.tail_ratio:.2e} exceeds {TAIL_TOLERANCE}; raise l_max", stacklevel=2)
    return sol


def _cosines(sol: MieSolution, directions) -> np.ndarray:
    return unit(np.atleast_2d(directions)) @ sol.theta0


def mie_far_field(sol: MieSolution, directions) -> np.ndarray:
    """u_inf(theta) = (1/k) sum (-i)^{l+1} a_l P_l(theta . theta0)."""
    directions = np.asarray(directions, dtype=float)
    p = legendre_values(sol.l_max, _cosines(sol, directions))
    l = np.arange(sol.l_max + 1)
    out = ((-1j) ** (l + 1) * sol.coeffs) @ p / sol.k
    return out[0] if directions.ndim == 1 else out


def mie_far_field_gradient(sol: MieSolution, directions) -> np.ndarray:
    """Tangential gradient of the modal far field, shape (N, 3)."""
    d = unit(np.atleast_2d(directions))
    t = d @ sol.theta0
    dp = legendre_derivatives(sol.l_max, t)
    l = np.arange(sol.l_max + 1)
    radial = ((-1j) ** (l + 1) * sol.coeffs) @ dp / sol.k
    return radial[:, None] * (sol.theta0[None, :] - t[:, None] * d)


def modal_traces(sol: MieSolution, points) -> tuple[np.ndarray, np.ndarray]:
    """Scattered field and its radial derivative at points of the sphere |x| = R."""
    points = np.atleast_2d(points)
    r = np.linalg.norm(points, axis=1)
    if np.max(np.abs(r - sol.R)) > 1e-12 * max(1.0, sol.R):
        raise ValueError("points do not lie on the Mie sphere")
    t = radial_table(sol.l_max, sol.k * sol.R)
    p = legendre_values(sol.l_max, (points / r[:, None]) @ sol.theta0)
    u = (sol.coeffs * t.h) @ p
    dnu = (sol.coeffs * sol.k * t.dh) @ p
    return u, dnu


def mie_boundary_traces(sol: MieSolution, grid: BoundaryGrid) -> BoundaryTrace:
    u, dnu = modal_traces(sol, grid.nodes)
    return BoundaryTrace(grid, u, dnu)
