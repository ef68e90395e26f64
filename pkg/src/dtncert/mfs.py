"""Method of fundamental solutions for exterior impedance problems.

The approximate field is a superposition of outgoing point sources placed
inside the obstacle, so it solves the Helmholtz equation and the radiation
condition exactly; only the boundary condition is met approximately.  The
defect alpha = (d/dn + eta) u - f is what the certificates consume.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from math import ceil

import numpy as np

from .fields import kernel, kernel_normal_derivative, plane_wave, unit
from .geometry import BoundaryGrid, BoundaryTrace, Ellipsoid, Surface, l2_norm, real_harmonic

DEFAULT_SHRINK = 0.7
SVD_RTOL = 1e-12


class RankCollapse(RuntimeError):
    def __init__(self, rank: int, size: int):
        super().__init__(f"least-squares system collapsed to effective rank {rank} of {size}")
        self.rank = rank


def sample(eta, grid: BoundaryGrid) -> np.ndarray:
    """Coefficient samples on ``grid``: eta may be a constant, an array or a callable of the grid."""
    if callable(eta):
        vals = np.asarray(eta(grid), dtype=complex)
    else:
        vals = np.asarray(eta, dtype=complex)
    return np.broadcast_to(vals, (len(grid),)).copy()


def eta_from_gamma(gamma, k: float, convention: str = "dir"):
    """Boundary coefficient for d/dn + eta.

    ``"dir"`` is the plane-wave convention eta = k*gamma; ``"dirA"`` takes
    eta = gamma unchanged.
    """
    if convention == "dirA":
        return gamma
    if convention != "dir":
        raise ValueError(f"unknown impedance convention {convention!r}")
    if callable(gamma):
        return lambda grid: k * sample(gamma, grid)
    return k * np.asarray(gamma, dtype=complex)


def plane_wave_rhs(k: float, eta, theta0):
    """f = -(d/dn + eta) e^{ik x.theta0}, as a function of the grid."""

    def f(grid: BoundaryGrid) -> np.ndarray:
        u, dn = plane_wave(k, theta0, grid.nodes, grid.normals)
        return -(dn + sample(eta, grid) * u)

    return f


@dataclass(frozen=True, eq=False)
class SourceSet:
    points: np.ndarray
    d_min: float
    shrink: float

    def __len__(self) -> int:
        return len(self.points)


def _fibonacci(m: int) -> tuple[np.ndarray, np.ndarray]:
    if m == 1:
        return np.zeros(1), np.zeros(1)
    i = np.arange(m)
    z = 1.0 - 2.0 * i / (m - 1)
    golden = np.pi * (3.0 - np.sqrt(5.0))
    return np.arccos(np.clip(z, -1, 1)), np.mod(golden * i, 2 * np.pi)


def place_sources(surface: Surface, grid: BoundaryGrid, shrink: float = DEFAULT_SHRINK, count: int | None = None) -> SourceSet:
    """Quasi-uniform (Fibonacci) surface points pulled inward by ``shrink``.

    Star-shaped surfaces are scaled toward the grid centroid.  Ellipsoids use
    the confocal ellipsoid whose smallest semi-axis is ``shrink`` times the
    original one; for a sphere both rules coincide.
    """
    if not 0 < shrink < 1:
        raise ValueError(f"shrink must lie in (0, 1), got {shrink}")
    if count is None:
        count = ceil(len(grid) / 2)
    if count < 1:
        raise ValueError("need at least one source")
    theta, phi = _fibonacci(count)
    if isinstance(surface, Ellipsoid):
        # confocal inner ellipsoid: encloses the focal set where the
        # continued exterior field is singular
        axes = surface.axes
        t = axes.min() ** 2 * (1.0 - shrink**2)
        inner = np.sqrt(axes**2 - t)
        st = np.sin(theta)
        pts = np.stack(
            [inner[0] * st * np.cos(phi), inner[1] * st * np.sin(phi), inner[2] * np.cos(theta)],
            axis=1,
        )
    else:
        c = grid.centroid
        pts = c + shrink * (surface.point(theta, phi) - c)
    if not np.all(surface.contains(pts)):
        raise ValueError(f"shrink {shrink} places sources outside the surface")
    d = np.linalg.norm(grid.nodes[:, None, :] - pts[None, :, :], axis=-1).min()
    if not d > 0:
        raise ValueError("a source coincides with a boundary node")
    return SourceSet(points=pts, d_min=float(d), shrink=float(shrink))


@dataclass(frozen=True, eq=False)
class MfsSolution:
    k: float
    sources: np.ndarray
    coeffs: np.ndarray
    rank: int = -1
    condition: float = float("nan")

    def traces(self, grid: BoundaryGrid) -> BoundaryTrace:
        return BoundaryTrace(grid, evaluate(self, grid.nodes), evaluate_normal_derivative(self, grid))

    def far_field(self, directions) -> np.ndarray:
        return mfs_far_field(self, directions)

    def to_json(self) -> str:
        return json.dumps(
            {
                "k": self.k,
                "sources": self.sources.tolist(),
                "coeffs_re": self.coeffs.real.tolist(),
                "coeffs_im": self.coeffs.imag.tolist(),
                "rank": self.rank,
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "MfsSolution":
        d = json.loads(text)
        return cls(
            k=d["k"],
            sources=np.asarray(d["sources"], dtype=float),
            coeffs=np.asarray(d["coeffs_re"]) + 1j * np.asarray(d["coeffs_im"]),
            rank=d.get("rank", -1),
        )


def tsvd_solve(a: np.ndarray, b: np.ndarray, rtol: float = SVD_RTOL):
    """Minimum-norm least squares with singular values below rtol * s_max dropped."""
    u, s, vh = np.linalg.svd(a, full_matrices=False)
    keep = s > rtol * s[0] if s.size and s[0] > 0 else np.zeros(s.shape, bool)
    rank = int(keep.sum())
    if rank == 0:
        raise RankCollapse(0, a.shape[1])
    proj = u[:, keep].conj().T @ b
    proj = proj / (s[keep][:, None] if proj.ndim > 1 else s[keep])
    x = vh[keep].conj().T @ proj
    return x, rank, float(s[0] / s[keep][-1])


def _impedance_matrix(grid, points, k, eta_vals):
    return kernel_normal_derivative(k, grid.nodes, grid.normals, points) + eta_vals[:, None] * kernel(k, grid.nodes, points)


def solve_impedance(grid: BoundaryGrid, sources: SourceSet, k: float, eta, f, rtol: float = SVD_RTOL) -> MfsSolution:
    """Weighted least-squares fit of (d/dn + eta) u = f at the grid nodes."""
    eta_vals = sample(eta, grid)
    if not eta_vals.imag.min() > 0:
        raise ValueError(f"impedance needs inf Im(eta) > 0, got {eta_vals.imag.min():.3g}")
    rhs = sample(f, grid)
    pts = sources.points if isinstance(sources, SourceSet) else np.asarray(sources)
    if not np.any(rhs):
        return MfsSolution(k=float(k), sources=pts, coeffs=np.zeros(len(pts), complex), rank=0)
    sw = np.sqrt(grid.weights)
    a = sw[:, None] * _impedance_matrix(grid, pts, k, eta_vals)
    c, rank, cond = tsvd_solve(a, sw * rhs, rtol)
    return MfsSolution(k=float(k), sources=pts, coeffs=c, rank=rank, condition=cond)


@dataclass(frozen=True, eq=False)
class Residual:
    grid: BoundaryGrid
    alpha: np.ndarray
    eta: np.ndarray

    @property
    def norm(self) -> float:
        return l2_norm(self.grid, self.alpha)

    @property
    def eta0(self) -> float:
        return float(self.eta.imag.min())

    @property
    def eta_sup(self) -> float:
        return float(np.abs(self.eta).max())


def boundary_residual(sol: MfsSolution, grid: BoundaryGrid, eta, f) -> Residual:
    eta_vals = sample(eta, grid)
    tr = sol.traces(grid)
    alpha = tr.dnu + eta_vals * tr.u - sample(f, grid)
    return Residual(grid=grid, alpha=alpha, eta=eta_vals)


def _check_points(sol, points):
    d = np.linalg.norm(points[:, None, :] - sol.sources[None, :, :], axis=-1)
    if np.any(d < 1e-12):
        raise ValueError("evaluation point coincides with a source")


def evaluate(sol: MfsSolution, points) -> np.ndarray:
    points = np.atleast_2d(np.asarray(points, dtype=float))
    _check_points(sol, points)
    out = np.empty(len(points), complex)
    for i in range(0, len(points), 2048):
        out[i : i + 2048] = kernel(sol.k, points[i : i + 2048], sol.sources) @ sol.coeffs
    return out


def evaluate_normal_derivative(sol: MfsSolution, grid: BoundaryGrid) -> np.ndarray:
    _check_points(sol, grid.nodes)
    out = np.empty(len(grid), complex)
    for i in range(0, len(grid), 2048):
        sl = slice(i, i + 2048)
        out[sl] = kernel_normal_derivative(sol.k, grid.nodes[sl], grid.normals[sl], sol.sources) @ sol.coeffs
    return out


def mfs_far_field(sol: MfsSolution, directions) -> np.ndarray:
    """sum_j c_j e^{-ik theta.s_j} / (4 pi)."""
    directions = np.asarray(directions, dtype=float)
    d = unit(np.atleast_2d(directions))
    out = np.exp(-1j * sol.k * d @ sol.sources.T) @ sol.coeffs / (4 * np.pi)
    return out[0] if directions.ndim == 1 else out


def harmonic_basis(grid: BoundaryGrid, degree: int) -> np.ndarray:
    """Real spherical harmonics of the surface parameters, orthonormal in the grid inner product."""
    cols = [
        real_harmonic(l, m, grid.theta, grid.phi)[0]
        for l in range(degree + 1)
        for m in range(-l, l + 1)
    ]
    g = np.stack(cols, axis=1)
    sw = np.sqrt(grid.weights)
    q, r = np.linalg.qr(sw[:, None] * g)
    # keep the sign convention of the raw basis
    q = q * np.sign(np.diag(r))[None, :]
    return q / sw[:, None]


@dataclass(frozen=True, eq=False)
class DtnMatrix:
    matrix: np.ndarray
    eigenvalues: np.ndarray
    dirichlet_residual: float
    reliable: bool
    degree: int


def dtn_matrix(surface: Surface, grid: BoundaryGrid, sources: SourceSet, k: float, degree: int = 8, residual_tol: float = 1e-4) -> DtnMatrix:
    """Galerkin matrix <g_p, DtN g_q> on low-degree harmonics g, with DtN applied through MFS.

    Each basis function is used as Dirichlet data, the exterior field is
    fitted by MFS and its normal derivative projected back onto the basis.
    """
    if len(grid) < 4 * len(sources):
        raise ValueError(f"grid has {len(grid)} nodes; need at least 4x the {len(sources)} sources")
    basis = harmonic_basis(grid, degree)
    sw = np.sqrt(grid.weights)
    a = kernel(k, grid.nodes, sources.points)
    c, _, _ = tsvd_solve(sw[:, None] * a, sw[:, None] * basis)
    fit = a @ c
    res = np.linalg.norm(sw[:, None] * (fit - basis)) / np.linalg.norm(sw[:, None] * basis)
    dn = kernel_normal_derivative(k, grid.nodes, grid.normals, sources.points) @ c
    mat = basis.conj().T @ (grid.weights[:, None] * dn)
    return DtnMatrix(
        matrix=mat,
        eigenvalues=np.linalg.eigvals(mat),
        dirichlet_residual=float(res),
        reliable=bool(res <= residual_tol),
        degree=degree,
    )
