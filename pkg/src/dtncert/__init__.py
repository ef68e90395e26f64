"""Certified exterior Helmholtz scattering by impedance obstacles.

Mie oracle for spheres, MFS solver for smooth star-shaped surfaces and
ellipsoids, residual-based error certificates and checks of the a-priori
bounds on fields, far fields and cross sections.
"""
from .bounds import (
    AprioriBounds,
    CertifiedReport,
    apriori_bounds,
    certificate_bounds,
    certify,
    far_field_from_traces,
    far_field_gradient,
    total_cross_section,
    transport_cross_section,
)
from .geometry import SurfaceSpec, build_surface, l2_norm, quadrature_grid, sphere_directions
from .mfs import boundary_residual, place_sources, plane_wave_rhs, solve_impedance
from .mie import dtn_sphere_spectrum, mie_solve, resolvent_check
from .verify import verify_all

__version__ = "0.1.0"
