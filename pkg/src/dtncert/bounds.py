"""Far-field quantities, cross sections and the constant-free bounds.

Conventions: the impedance operator is d/dn + eta with eta = k*gamma for
plane-wave scattering (dimensionless gamma) or eta supplied directly.  The
a-priori bounds are written in terms of gamma; the a-posteriori
certificates in terms of eta.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
from math import pi, sqrt

import numpy as np

from .fields import unit
from .geometry import BoundaryGrid, l2_norm, sphere_directions

DEFECT_FLOOR = 1e-30
_CHUNK = 256


def _directions(theta) -> tuple[np.ndarray, bool]:
    theta = np.asarray(theta, dtype=float)
    return unit(np.atleast_2d(theta)), theta.ndim == 1


def far_field_from_traces(grid: BoundaryGrid, u, dnu, k: float, theta) -> np.ndarray:
    """u_inf(theta) = -1/(4 pi) sum_i w_i (dnu_i + ik (n_i.theta) u_i) e^{-ik theta.x_i}.

    This is the far field of the exterior Green representation with n
    pointing into the exterior.
    """
    d, single = _directions(theta)
    wu = grid.weights * np.asarray(u)
    wdn = grid.weights * np.asarray(dnu)
    out = np.empty(len(d), complex)
    for i in range(0, len(d), _CHUNK):
        dd = d[i : i + _CHUNK]
        phase = np.exp(-1j * k * dd @ grid.nodes.T)
        ndot = dd @ grid.normals.T
        out[i : i + _CHUNK] = (phase * (wdn + 1j * k * ndot * wu)).sum(axis=1)
    out /= -4 * pi
    return out[0] if single else out


def far_field_gradient(grid: BoundaryGrid, u, dnu, k: float, theta) -> np.ndarray:
    """Tangential gradient of ``far_field_from_traces`` on the unit sphere, shape (N, 3).

    Differentiating the representation under the integral gives
    -(1/4 pi) sum w [ik n_perp u - ik x_perp (dnu + ik (n.theta) u)] e^{-ik theta.x}
    with v_perp = v - (v.theta) theta.
    """
    d, single = _directions(theta)
    u = np.asarray(u)
    w = grid.weights
    x, n = grid.nodes, grid.normals
    out = np.empty((len(d), 3), complex)
    for i in range(0, len(d), _CHUNK):
        dd = d[i : i + _CHUNK]
        phase = np.exp(-1j * k * dd @ x.T) * w
        ndot = dd @ n.T
        dens = (np.asarray(dnu) + 1j * k * ndot * u) * phase
        a = 1j * k * (phase * u) @ n
        b = -1j * k * dens @ x
        g = a + b
        out[i : i + _CHUNK] = g - (np.einsum("ij,ij->i", g, dd))[:, None] * dd
    out /= -4 * pi
    return out[0] if single else out


@dataclass(frozen=True, eq=False)
class FarFieldGrid:
    directions: np.ndarray
    weights: np.ndarray
    values: np.ndarray
    theta0: np.ndarray
    k: float

    @classmethod
    def sample(cls, far_field, k: float, theta0, resolution=(64, 128)) -> "FarFieldGrid":
        """Evaluate ``far_field`` (a callable of directions) on the S^2 product rule."""
        d, w = sphere_directions(*resolution)
        return cls(directions=d, weights=w, values=np.asarray(far_field(d)), theta0=unit(theta0), k=float(k))


def total_cross_section(ff: FarFieldGrid) -> float:
    return float(np.sum(ff.weights * np.abs(ff.values) ** 2))


def transport_cross_section(ff: FarFieldGrid) -> float:
    """Integral of (1 - theta.theta0) |u_inf|^2 over S^2."""
    return float(np.sum(ff.weights * (1.0 - ff.directions @ ff.theta0) * np.abs(ff.values) ** 2))


def greens_identity_check(grid: BoundaryGrid, u, dnu, ff: FarFieldGrid) -> float:
    """Relative defect of Im int (du/dn) conj(u) dS = k sigma."""
    flux = float(np.imag(np.sum(grid.weights * np.asarray(dnu) * np.conj(u))))
    ks = ff.k * total_cross_section(ff)
    return abs(flux - ks) / max(ks, DEFECT_FLOOR)


@dataclass(frozen=True)
class Impedance:
    """Boundary coefficient samples with the constants the bounds need."""

    gamma0: float
    Gamma: float
    Gamma_hat: float

    @classmethod
    def from_samples(cls, values) -> "Impedance":
        v = np.asarray(values, dtype=complex)
        imp = cls(float(v.imag.min()), float(np.abs(v).max()), float(v.imag.max()))
        if not imp.gamma0 > 0:
            raise ValueError(f"impedance needs inf Im > 0, got {imp.gamma0:.3g}")
        return imp


@dataclass(frozen=True)
class CertifiedReport:
    k: float
    alpha_norm: float
    eta0: float
    Gamma: float
    bound_field: float
    bound_dn: float
    bound_sigma_sq: float
    err_field: float | None = None
    err_dn: float | None = None
    err_far_sq: float | None = None

    @property
    def effectivities(self) -> dict[str, float] | None:
        if self.err_field is None:
            return None

        def ratio(b, e):
            return float("inf") if e == 0 else b / e

        return {
            "field": ratio(self.bound_field, self.err_field),
            "dn": ratio(self.bound_dn, self.err_dn),
            "far_sq": ratio(self.bound_sigma_sq, self.err_far_sq),
        }

    def to_dict(self) -> dict:
        d = asdict(self)
        d["effectivities"] = self.effectivities
        return d


def certificate_bounds(alpha_norm: float, eta0: float, Gamma: float, k: float) -> tuple[float, float, float]:
    """(field, normal derivative, squared far-field) error bounds from the residual norm.

    ||u - u1|| <= ||alpha|| / eta0 follows from
    ||(d/dn + eta) e|| ||e|| >= Im <(d/dn + eta) e, e> >= eta0 ||e||^2,
    which only uses Im int (de/dn) conj(e) = k ||e_inf||^2 >= 0.
    """
    if not eta0 > 0:
        raise ValueError(f"certification needs inf Im(eta) > 0, got {eta0}")
    field = alpha_norm / eta0
    dn = (Gamma / eta0 + 1.0) * alpha_norm
    far = (Gamma / eta0 + 1.0) * alpha_norm**2 / (k * eta0)
    return field, dn, far


def certify(residual, k: float, approx=None, exact=None, sphere_resolution=(64, 128)) -> CertifiedReport:
    """Certificates from a ``Residual``; with ``approx`` and ``exact`` fields also true errors.

    ``approx``/``exact`` need ``traces(grid)`` and ``far_field(directions)``.
    """
    a = residual.norm
    eta0, Gamma = residual.eta0, residual.eta_sup
    bf, bd, bs = certificate_bounds(a, eta0, Gamma, k)
    errs = {}
    if approx is not None and exact is not None:
        g = residual.grid
        ta, te = approx.traces(g), exact.traces(g)
        d, w = sphere_directions(*sphere_resolution)
        errs = dict(
            err_field=l2_norm(g, ta.u - te.u),
            err_dn=l2_norm(g, ta.dnu - te.dnu),
            err_far_sq=float(np.sum(w * np.abs(approx.far_field(d) - exact.far_field(d)) ** 2)),
        )
    return CertifiedReport(k=float(k), alpha_norm=a, eta0=eta0, Gamma=Gamma, bound_field=bf, bound_dn=bd, bound_sigma_sq=bs, **errs)


@dataclass(frozen=True)
class AprioriBounds:
    """Plane-wave bounds for d/dn + k gamma, as stated and as reached in the proofs.

    The stated and derived constants disagree for f2/lastlast and f3/alm1;
    both are kept.  ``trcs`` is the stated transport lower bound; the
    proof's own sigma^2 / (8 pi M^2) is ``trcs_derived``.
    """

    k: float
    gamma0: float
    Gamma: float
    S: float

    @property
    def f1(self) -> float:
        return sqrt(self.S) * (1 + self.Gamma) / self.gamma0

    @property
    def f2(self) -> float:
        return self.k * sqrt(self.S) * (1 + self.Gamma) * (self.gamma0 + self.Gamma) / self.gamma0

    @property
    def f3(self) -> float:
        return self.S * (1 + self.Gamma) ** 2 * (self.gamma0 + self.Gamma) / self.gamma0**2

    @property
    def f4(self) -> float:
        k, g0, G = self.k, self.gamma0, self.Gamma
        return sqrt(self.S) * k / (4 * pi) * (1 + G) / g0 * (k * (g0 + G) + k + 1)

    @property
    def ff2(self) -> float:
        return sqrt(self.S) * (1 + self.Gamma) / self.gamma0

    @property
    def lastlast(self) -> float:
        return 2 * self.k * sqrt(self.S) * (1 + self.Gamma)

    @property
    def alm1(self) -> float:
        return 2 * self.S * (1 + self.Gamma) ** 2 / self.gamma0

    @property
    def M(self) -> float:
        g0, G = self.gamma0, self.Gamma
        return self.k * self.S * (1 + G) * (g0 + G + 1) / (4 * pi * g0)

    def trcs(self, sigma: float) -> float:
        g0, G = self.gamma0, self.Gamma
        return (sigma * g0 / (self.k * self.S)) ** 2 / (2 * pi * (1 + G) ** 2 * (1 + G + g0) ** 2)

    def trcs_derived(self, sigma: float) -> float:
        return sigma**2 / (8 * pi * self.M**2)

    def to_dict(self) -> dict:
        d = {"k": self.k, "gamma0": self.gamma0, "Gamma": self.Gamma, "S": self.S}
        d["stated"] = {n: getattr(self, n) for n in ("f1", "f2", "f3", "f4", "M")}
        d["derived"] = {n: getattr(self, n) for n in ("ff2", "lastlast", "alm1")}
        return d


def apriori_bounds(k: float, gamma0: float, Gamma: float, S: float) -> AprioriBounds:
    if not k > 0:
        raise ValueError(f"k must be positive, got {k}")
    if not gamma0 > 0:
        raise ValueError(f"gamma0 must be positive, got {gamma0}")
    if not Gamma >= gamma0:
        raise ValueError(f"Gamma = sup|gamma| must be >= gamma0 (got {Gamma} < {gamma0})")
    if not S > 0:
        raise ValueError(f"surface area must be positive, got {S}")
    return AprioriBounds(float(k), float(gamma0), float(Gamma), float(S))
