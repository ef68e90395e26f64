"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``criterion N: PASS|FAIL`` line (visible with
``pytest -s`` or in the captured output of a failure) and asserts both the
numerical tolerance and the runtime budget.
"""
import time
from itertools import product

import numpy as np
import pytest

from dtncert.bounds import FarFieldGrid, certify, far_field_from_traces, far_field_gradient, greens_identity_check
from dtncert.cli import run
from dtncert.fields import kernel, kernel_normal_derivative
from dtncert.geometry import SurfaceSpec, build_surface, quadrature_grid, sphere_directions
from dtncert.mfs import boundary_residual, dtn_matrix, eta_from_gamma, place_sources, plane_wave_rhs, solve_impedance
from dtncert.mie import dtn_sphere_spectrum, mie_far_field, mie_far_field_gradient, mie_solve, resolvent_sweep
from dtncert.verify import mie_instance, verify_all

K_SPEC = (0.5, 1.0, 2.0, 5.0)
R_SPEC = (0.5, 1.0, 2.0)


@pytest.fixture
def verdict(capsys):
    def emit(n, ok, detail=""):
        with capsys.disabled():
            print(f"\ncriterion {n}: {'PASS' if ok else 'FAIL'} {detail}".rstrip())

    return emit


def test_criterion_1_sphere_dtn_spectrum(verdict):
    t0 = time.perf_counter()
    worst_rel, min_im = 0.0, np.inf
    for k, R in product(K_SPEC, R_SPEC):
        spec = dtn_sphere_spectrum(k, R, 60)
        im = spec.mu.imag
        min_im = min(min_im, im.min())
        worst_rel = max(worst_rel, float(np.max(np.abs(im - spec.wronskian_imag()) / im)))
    dt = time.perf_counter() - t0
    ok = min_im > 0 and worst_rel <= 1e-10 and dt < 1.0
    verdict(1, ok, f"(max rel {worst_rel:.1e}, {dt:.2f}s)")
    assert min_im > 0
    assert worst_rel <= 1e-10
    assert dt < 1.0


def test_criterion_2_resolvent_bound(verdict):
    t0 = time.perf_counter()
    a = np.linspace(-20, 20, 41)
    worst = np.inf
    for k, R in product(K_SPEC, R_SPEC):
        for m in resolvent_sweep(dtn_sphere_spectrum(k, R, 60), a, (0.1, 1.0, 10.0)):
            worst = min(worst, m.margin / m.b)
    dt = time.perf_counter() - t0
    verdict(2, worst >= 1 and dt < 1.0, f"(min margin/b {worst:.4f}, {dt:.2f}s)")
    assert worst >= 1
    assert dt < 1.0


def test_criterion_3_green_identity(verdict):
    t0 = time.perf_counter()
    grid = quadrature_grid(build_surface(SurfaceSpec("sphere", 1.0)), 32, 64)
    worst = 0.0
    for k, gamma in product((0.5, 1.0, 2.0, 4.0), (1j, 1 + 1j, 0.2 + 3j)):
        sol = mie_solve(k, 1.0, gamma)
        tr = sol.traces(grid)
        ff = FarFieldGrid.sample(sol.far_field, k, sol.theta0, (64, 128))
        worst = max(worst, greens_identity_check(grid, tr.u, tr.dnu, ff))
    # closed-form point source at the centre: Im int = k / (4 pi) = k sigma
    k = 1.0
    o = np.zeros((1, 3))
    u = kernel(k, grid.nodes, o)[:, 0]
    dnu = kernel_normal_derivative(k, grid.nodes, grid.normals, o)[:, 0]
    ff = FarFieldGrid.sample(lambda d: np.full(len(d), 1 / (4 * np.pi), complex), k, (0, 0, 1), (64, 128))
    point = greens_identity_check(grid, u, dnu, ff)
    worst = max(worst, point)
    dt = time.perf_counter() - t0
    verdict(3, worst <= 1e-8 and dt < 5.0, f"(max defect {worst:.1e}, {dt:.2f}s)")
    assert worst <= 1e-8
    assert dt < 5.0


def test_criterion_4_certification_dominance(verdict):
    t0 = time.perf_counter()
    surf = build_surface(SurfaceSpec("sphere", 1.0))
    solve_grid = quadrature_grid(surf, 20, 40)
    check = quadrature_grid(surf, 32, 64)
    theta0 = np.array([0.0, 0.0, 1.0])
    worst = np.inf
    for gamma, k, m in product((1j, 1 + 1j, 0.2 + 3j), (1.0, 2.0), (50, 100, 200)):
        eta = eta_from_gamma(gamma, k)
        f = plane_wave_rhs(k, eta, theta0)
        sol = solve_impedance(solve_grid, place_sources(surf, solve_grid, 0.7, m), k, eta, f)
        rep = certify(boundary_residual(sol, check, eta, f), k, sol, mie_solve(k, 1.0, gamma, theta0))
        worst = min(worst, *rep.effectivities.values())
    dt = time.perf_counter() - t0
    verdict(4, worst >= 1 and dt < 60, f"(min effectivity {worst:.3g}, {dt:.1f}s)")
    assert worst >= 1
    assert dt < 60


@pytest.fixture(scope="module")
def sweep_rows():
    t0 = time.perf_counter()
    rows = []
    for k, gamma in product((0.5, 1.0, 2.0, 4.0), (1j, 1 + 1j)):
        rows += verify_all(mie_instance(k, 1.0, gamma))
    return rows, time.perf_counter() - t0


def test_criterion_5_apriori_bounds(verdict, sweep_rows):
    rows, dt = sweep_rows
    ids = {"f1", "f2", "f3", "f4", "M", "sigma_identity", "resolvent"}
    mine = [r for r in rows if r.id in ids]
    fails = [r for r in mine if r.status == "fail"]
    findings = [r for r in mine if r.status == "finding"]
    ok = not fails and dt < 60
    verdict(5, ok, f"({len(mine)} rows, {len(findings)} findings, {len(fails)} failures, {dt:.1f}s)")
    assert not fails, fails
    assert dt < 60


def test_criterion_6_transport_lower_bound(verdict, sweep_rows):
    rows, _ = sweep_rows
    tr = [r for r in rows if r.id == "trcs"]
    stated = [r for r in tr if r.variant == "stated"]
    norm = [r for r in tr if r.variant == "normalization"]
    ok = all(r.lhs <= r.rhs for r in stated) and all(0 <= r.lhs <= 2 for r in norm)
    ok = ok and not any(r.status == "fail" for r in tr)
    verdict(6, ok, f"(min R - trcs {min(r.margin for r in stated):.3g}, R/sigma in [{min(r.lhs for r in norm):.3f}, {max(r.lhs for r in norm):.3f}])")
    assert all(r.lhs <= r.rhs for r in stated)
    assert all(0 <= r.lhs <= 2 for r in norm)
    assert not any(r.status == "fail" for r in tr)


def _rel(a, b):
    return float(np.max(np.abs(a - b)) / np.max(np.abs(b)))


def test_criterion_7_far_field_triangle(verdict):
    t0 = time.perf_counter()
    surf = build_surface(SurfaceSpec("sphere", 1.0))
    grid = quadrature_grid(surf, 32, 64)
    solve_grid = quadrature_grid(surf, 24, 48)
    d, _ = sphere_directions(64, 128)
    worst = 0.0
    for k, gamma in ((1.0, 1j), (2.0, 1 + 1j)):
        theta0 = np.array([0.3, -0.2, 1.0])
        mie = mie_solve(k, 1.0, gamma, theta0)
        eta = eta_from_gamma(gamma, k)
        mfs = solve_impedance(solve_grid, place_sources(surf, solve_grid, 0.5, 400), k, eta, plane_wave_rhs(k, eta, mie.theta0))
        a = mie_far_field(mie, d)
        tr = mie.traces(grid)
        b = far_field_from_traces(grid, tr.u, tr.dnu, k, d)
        c = mfs.far_field(d)
        tm = mfs.traces(grid)
        e = far_field_from_traces(grid, tm.u, tm.dnu, k, d)
        worst = max(worst, _rel(b, a), _rel(c, a), _rel(c, b), _rel(e, c))
    dt = time.perf_counter() - t0
    verdict(7, worst <= 1e-6 and dt < 10, f"(max rel {worst:.1e}, {dt:.2f}s)")
    assert worst <= 1e-6
    assert dt < 10


def test_criterion_8_gradient(verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(8)
    k, h = 2.0, 1e-5
    sol = mie_solve(k, 1.0, 1 + 1j, (0.2, 0.4, 1.0))
    grid = quadrature_grid(build_surface(SurfaceSpec("sphere", 1.0)), 32, 64)
    tr = sol.traces(grid)
    th = rng.normal(size=(100, 3))
    th /= np.linalg.norm(th, axis=1)[:, None]
    t = np.cross(th, rng.normal(size=(100, 3)))
    t /= np.linalg.norm(t, axis=1)[:, None]
    plus, minus = np.cos(h) * th + np.sin(h) * t, np.cos(h) * th - np.sin(h) * t
    worst = 0.0
    for ff, grad in (
        (lambda d: far_field_from_traces(grid, tr.u, tr.dnu, k, d), far_field_gradient(grid, tr.u, tr.dnu, k, th)),
        (sol.far_field, mie_far_field_gradient(sol, th)),
    ):
        fd = (ff(plus) - ff(minus)) / (2 * h)
        worst = max(worst, float(np.max(np.abs(fd - np.einsum("ij,ij->i", grad, t)))))
    dt = time.perf_counter() - t0
    verdict(8, worst <= 1e-6 and dt < 5, f"(max abs {worst:.1e}, {dt:.2f}s)")
    assert worst <= 1e-6
    assert dt < 5


def _match_modal(eigs, mu, degree):
    """Largest distance when the eigenvalues are assigned to mu_l with multiplicity 2l+1."""
    remaining = list(eigs)
    worst = 0.0
    for l in range(degree + 1):
        remaining.sort(key=lambda z: abs(z - mu[l]))
        take, remaining = remaining[: 2 * l + 1], remaining[2 * l + 1 :]
        worst = max(worst, max(abs(z - mu[l]) for z in take))
    return worst


def test_criterion_9_dtn_matrix(verdict):
    t0 = time.perf_counter()
    worst_err, worst_im = 0.0, np.inf
    for spec in (SurfaceSpec("sphere", 1.0), SurfaceSpec("ellipsoid", semi_axes=(1.5, 1.0, 1.0))):
        surf = build_surface(spec)
        grid = quadrature_grid(surf, 32, 64)
        src = place_sources(surf, grid, 0.4, len(grid) // 4)
        for k in (1.0, 2.0):
            dm = dtn_matrix(surf, grid, src, k, degree=8)
            worst_im = min(worst_im, dm.eigenvalues.imag.min() / k)
            if spec.kind == "sphere":
                worst_err = max(worst_err, _match_modal(dm.eigenvalues, dtn_sphere_spectrum(k, 1.0, 8).mu, 8))
    dt = time.perf_counter() - t0
    ok = worst_err <= 1e-3 and worst_im >= -1e-6 and dt < 120
    verdict(9, ok, f"(sphere err {worst_err:.1e}, min Im/k {worst_im:.1e}, {dt:.1f}s)")
    assert worst_err <= 1e-3
    assert worst_im >= -1e-6
    assert dt < 120


def test_criterion_10_determinism(verdict, tmp_path):
    names = ("verdicts.csv", "report.json")
    outs = []
    for rep in range(2):
        for case, extra in (("mie", []), ("mfs", ["--surface", "ellipsoid:1.5,1,1", "--gamma", "i*(1+0.5*sin(theta))"])):
            out = tmp_path / f"{case}{rep}"
            assert run(["sweep", "--k", "0.5,1", "--seed", "3", "--resolution", "16,32", *extra, "--out", str(out)]) == 0
            outs.append({n: (out / n).read_bytes() for n in names})
    same = outs[0] == outs[2] and outs[1] == outs[3]
    verdict(10, same)
    assert same
