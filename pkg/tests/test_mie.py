import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import spherical_jn, spherical_yn

from dtncert.bounds import FarFieldGrid, greens_identity_check, total_cross_section
from dtncert.fields import plane_wave
from dtncert.geometry import quadrature_grid
from dtncert.mie import (
    dtn_sphere_spectrum,
    mie_far_field,
    mie_far_field_gradient,
    mie_solve,
    modal_traces,
    resolvent_check,
    resolvent_sweep,
)


def test_spectrum_against_scipy():
    k, R = 2.0, 1.5
    spec = dtn_sphere_spectrum(k, R, 20)
    l = np.arange(21)
    x = k * R
    h = spherical_jn(l, x) + 1j * spherical_yn(l, x)
    dh = spherical_jn(l, x, derivative=True) + 1j * spherical_yn(l, x, derivative=True)
    np.testing.assert_allclose(spec.mu, k * dh / h, rtol=1e-12)


def test_mu0_closed_form():
    # h_0(x) = -i e^{ix}/x gives mu_0 = ik - 1/R
    k, R = 1.7, 0.8
    assert dtn_sphere_spectrum(k, R, 0).mu[0] == pytest.approx(1j * k - 1 / R, rel=1e-14)


@settings(max_examples=40, deadline=None)
@given(k=st.floats(0.1, 10.0), R=st.floats(0.2, 3.0))
def test_im_mu_positive_and_closed_form(k, R):
    spec = dtn_sphere_spectrum(k, R, 40)
    assert np.all(spec.mu.imag > 0)
    np.testing.assert_allclose(spec.mu.imag, spec.wronskian_imag(), rtol=1e-10)


def test_resolvent_margin():
    spec = dtn_sphere_spectrum(1.0, 1.0, 30)
    m = resolvent_check(spec, -1.0, 0.5)
    assert m.margin == pytest.approx(np.abs(spec.mu - 1.0 + 0.5j).min())
    assert m.passed
    assert len(resolvent_sweep(spec, [0.0, 1.0], [0.1, 1.0, 10.0])) == 6
    with pytest.raises(ValueError, match="b > 0 required"):
        resolvent_check(spec, 0.0, 0.0)


@pytest.mark.parametrize("gamma", [1j, 1 + 1j, 0.2 + 3j])
@pytest.mark.parametrize("k", [0.5, 2.0, 6.0])
def test_boundary_condition_residual(k, gamma, rng):
    sol = mie_solve(k, 1.0, gamma, (1.0, 2.0, -0.5))
    pts = rng.normal(size=(50, 3))
    pts /= np.linalg.norm(pts, axis=1)[:, None]
    u, dnu = modal_traces(sol, pts)
    ui, dui = plane_wave(k, sol.theta0, pts, pts)
    bc = dnu + dui + k * gamma * (u + ui)
    assert np.abs(bc).max() < 1e-12 * max(1.0, np.abs(dui).max())


def test_parseval_cross_section():
    sol = mie_solve(2.0, 1.0, 1 + 1j)
    ff = FarFieldGrid.sample(sol.far_field, 2.0, sol.theta0, (48, 96))
    assert total_cross_section(ff) == pytest.approx(sol.cross_section(), rel=1e-12)


def test_green_identity(sphere_grid):
    sol = mie_solve(1.0, 1.0, 1j)
    tr = sol.traces(sphere_grid)
    ff = FarFieldGrid.sample(sol.far_field, 1.0, sol.theta0, (64, 128))
    assert greens_identity_check(sphere_grid, tr.u, tr.dnu, ff) < 1e-10


def test_far_field_rotation_invariance():
    # the pattern depends only on theta . theta0
    a = mie_solve(1.5, 1.0, 1j, (0, 0, 1))
    b = mie_solve(1.5, 1.0, 1j, (1, 0, 0))
    assert mie_far_field(a, np.array([0.0, 0.6, 0.8])) == pytest.approx(mie_far_field(b, np.array([0.8, 0.6, 0.0])))


def test_far_field_gradient_finite_difference(rng):
    sol = mie_solve(3.0, 1.0, 1 + 1j, (0.3, 0.2, 1.0))
    h = 1e-5
    for _ in range(10):
        th = rng.normal(size=3)
        th /= np.linalg.norm(th)
        t = np.cross(th, rng.normal(size=3))
        t /= np.linalg.norm(t)
        g = mie_far_field_gradient(sol, th)[0]
        assert abs(g @ th) < 1e-14
        fd = (mie_far_field(sol, np.cos(h) * th + np.sin(h) * t) - mie_far_field(sol, np.cos(h) * th - np.sin(h) * t)) / (2 * h)
        assert abs(fd - g @ t) < 1e-8


def test_low_frequency_monopole():
    # for kR -> 0 the l = 0 term dominates and a_0 -> -(k gamma)/(k gamma - 1/R) j_0/h_0
    sol = mie_solve(1e-3, 1.0, 1j, l_max=10)
    assert abs(sol.coeffs[0]) > 1e3 * abs(sol.coeffs[1])


def test_rejections_and_tail_warning():
    with pytest.raises(ValueError, match="Im"):
        mie_solve(1.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        mie_solve(-1.0, 1.0, 1j)
    with pytest.warns(UserWarning, match="tail"):
        mie_solve(20.0, 1.0, 1j, l_max=5)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        mie_solve(20.0, 1.0, 1j)


def test_modal_traces_require_sphere_points():
    sol = mie_solve(1.0, 1.0, 1j)
    with pytest.raises(ValueError, match="Mie sphere"):
        modal_traces(sol, np.array([[0.0, 0.0, 1.1]]))


def test_traces_on_grid_match_pointwise(unit_sphere):
    g = quadrature_grid(unit_sphere, 6, 12)
    sol = mie_solve(1.0, 1.0, 1j)
    tr = sol.traces(g)
    u, dnu = modal_traces(sol, g.nodes)
    np.testing.assert_array_equal(tr.u, u)
    np.testing.assert_array_equal(tr.dnu, dnu)


def test_dirichlet_limit():
    k, R = 1.5, 1.0
    sol = mie_solve(k, R, 1e6j)
    l = np.arange(sol.l_max + 1)
    x = k * R
    h = spherical_jn(l, x) + 1j * spherical_yn(l, x)
    ref = -(1j**l) * (2 * l + 1) * spherical_jn(l, x) / h
    np.testing.assert_allclose(sol.coeffs[:10], ref[:10], rtol=1e-4)


def test_mu_k1_r1():
    spec = dtn_sphere_spectrum(1.0, 1.0, 0)
    assert spec.mu[0] == pytest.approx(-1 + 1j, rel=1e-14)
    assert resolvent_check(spec, 0.0, 1.0).margin == pytest.approx(np.sqrt(5))


def test_large_l_behaviour():
    k, R = 2.0, 1.0
    spec = dtn_sphere_spectrum(k, R, 60)
    high = spec.mu[int(2 * k * R):]
    assert np.all(high.real < 0) and np.all(high.imag > 0)
    assert np.all(np.diff(high.imag) < 0)
    l = np.arange(40, 61)
    np.testing.assert_allclose(spec.mu[40:].real, -(l + 1) / R, rtol=0.01)


def test_zero_coefficients_give_zero_traces(sphere_grid):
    from dtncert.mie import MieSolution

    sol = MieSolution(1.0, 1.0, 1j, np.array([0.0, 0.0, 1.0]), np.zeros(10, complex))
    tr = sol.traces(sphere_grid)
    assert not np.any(tr.u) and not np.any(tr.dnu)


def test_bc_residual_l2_k1(sphere_grid):
    sol = mie_solve(1.0, 1.0, 1j)
    tr = sol.traces(sphere_grid)
    ui, dui = plane_wave(1.0, sol.theta0, sphere_grid.nodes, sphere_grid.normals)
    from dtncert.geometry import l2_norm

    assert l2_norm(sphere_grid, tr.dnu + dui + 1j * (tr.u + ui)) <= 1e-9


def test_default_l_max_tail():
    for k in (0.5, 2.0, 10.0):
        assert mie_solve(k, 1.0, 1 + 1j).tail_ratio < 1e-12
