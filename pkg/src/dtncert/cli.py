"""Command-line driver: ``dtncert {spectrum,solve-certify,bounds,sweep,mie}``.

Every subcommand validates the whole configuration before computing and
writes its outputs only once everything has been computed.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import tempfile
from math import ceil

import numpy as np

from .bounds import Impedance, apriori_bounds, certify, far_field_from_traces, far_field_gradient
from .config import ConfigError, ExperimentConfig, build_config, parse_surface_flag
from .fields import plane_wave, unit
from .geometry import build_surface, quadrature_grid
from .mfs import boundary_residual, dtn_matrix, eta_from_gamma, place_sources, plane_wave_rhs, sample, solve_impedance
from .mie import dtn_sphere_spectrum, mie_solve, modal_traces, resolvent_sweep
from .verify import INEQUALITY_IDS, Instance, mfs_instance, mie_instance, verdicts_csv, verify_all

log = logging.getLogger("dtncert")

MATRIX_EPS = 1e-6
WRONSKIAN_RTOL = 1e-10


def _f(x) -> str:
    return repr(float(x))


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _json(obj) -> str:
    def default(o):
        if isinstance(o, complex):
            return [o.real, o.imag]
        if isinstance(o, np.generic):
            return o.item()
        if isinstance(o, np.ndarray):
            return o.tolist()
        raise TypeError(type(o).__name__)

    return json.dumps(obj, indent=2, sort_keys=True, default=default) + "\n"


def write_outputs(out_dir: str, files: dict[str, str]) -> None:
    os.makedirs(out_dir, exist_ok=True)
    for name, text in files.items():
        fd, tmp = tempfile.mkstemp(dir=out_dir, prefix=f".{name}.")
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, os.path.join(out_dir, name))


def _config_summary(cfg: ExperimentConfig) -> dict:
    return {
        "surface": cfg.surface.to_dict(),
        "gamma": cfg.gamma.text,
        "convention": cfg.convention,
        "k": list(cfg.k),
        "incident": list(cfg.incident),
        "seed": cfg.seed,
        "resolution": {"grid": cfg.grid, "solve_grid": cfg.solve_grid, "sphere": cfg.sphere},
    }


def _dimensionless_gamma(cfg: ExperimentConfig, k: float):
    """gamma in the d/dn + k gamma convention."""
    if cfg.convention == "dir":
        return cfg.gamma.constant if cfg.gamma.constant is not None else cfg.gamma
    if cfg.gamma.constant is not None:
        return cfg.gamma.constant / k
    return lambda grid: cfg.gamma(grid) / k


def _eta(cfg: ExperimentConfig, k: float):
    g = cfg.gamma.constant if cfg.gamma.constant is not None else cfg.gamma
    return eta_from_gamma(g, k, cfg.convention)


# --- spectrum ---------------------------------------------------------------

def cmd_spectrum(cfg: ExperimentConfig) -> dict[str, str]:
    surface = build_surface(cfg.surface)
    spec_rows, res_rows, report = [], [], {"config": _config_summary(cfg), "runs": []}
    for k in cfg.k:
        run: dict = {"k": k}
        if surface.is_sphere:
            R = surface.radius
            spec = dtn_sphere_spectrum(k, R, cfg.l_max)
            closed = spec.wronskian_imag()
            ok = (spec.mu.imag > 0) & (np.abs(spec.mu.imag - closed) <= WRONSKIAN_RTOL * spec.mu.imag)
            for l, (mu, c, p) in enumerate(zip(spec.mu, closed, ok)):
                spec_rows.append([_f(k), "modal", l, _f(mu.real), _f(mu.imag), _f(c), str(bool(p)).lower()])
            margins = resolvent_sweep(spec, cfg.a_values, cfg.b_values)
            for m in margins:
                res_rows.append([_f(k), _f(m.a), _f(m.b), _f(m.margin), m.worst_l, str(m.passed).lower()])
            run["modal"] = {
                "radius": R,
                "min_im_mu": float(spec.mu.imag.min()),
                "all_pass": bool(ok.all()),
                "resolvent_min_ratio": min(m.margin / m.b for m in margins),
                "resolvent_pass": all(m.passed for m in margins),
            }
        if cfg.dtn_enabled or not surface.is_sphere:
            grid = quadrature_grid(surface, *cfg.dtn_grid)
            sources = place_sources(surface, grid, cfg.dtn_shrink, len(grid) // 4)
            dm = dtn_matrix(surface, grid, sources, k, cfg.dtn_degree)
            eps = MATRIX_EPS * k
            for i, lam in enumerate(sorted(dm.eigenvalues, key=lambda z: (-z.real, z.imag))):
                spec_rows.append([_f(k), "dtn_matrix", i, _f(lam.real), _f(lam.imag), "", str(bool(lam.imag >= -eps)).lower()])
            mat = {
                "degree": dm.degree,
                "min_im_eigenvalue": float(dm.eigenvalues.imag.min()),
                "eps_disc": eps,
                "pass": bool(dm.eigenvalues.imag.min() >= -eps),
                "dirichlet_residual": dm.dirichlet_residual,
                "reliable": dm.reliable,
            }
            if surface.is_sphere:
                mu = dtn_sphere_spectrum(k, surface.radius, dm.degree).mu
                mat["max_modal_error"] = float(
                    max(np.sort(np.abs(dm.eigenvalues - mu[l]))[: 2 * l + 1].max() for l in range(dm.degree + 1))
                )
            run["dtn_matrix"] = mat
        report["runs"].append(run)
    return {
        "spectrum.csv": _csv(["k", "source", "index", "re", "im", "im_closed_form", "pass"], spec_rows),
        "resolvent.csv": _csv(["k", "a", "b", "margin", "worst_l", "pass"], res_rows),
        "report.json": _json(report),
    }


# --- solve-certify ------------------------------------------------------------

def cmd_solve_certify(cfg: ExperimentConfig) -> dict[str, str]:
    surface = build_surface(cfg.surface)
    theta0 = unit(cfg.incident)
    files, rows, report = {}, [], {"config": _config_summary(cfg), "runs": []}
    for k in cfg.k:
        eta = _eta(cfg, k)
        f = plane_wave_rhs(k, eta, theta0)
        solve_grid = quadrature_grid(surface, *cfg.solve_grid)
        count = cfg.mfs_sources or ceil(len(solve_grid) / 2)
        sources = place_sources(surface, solve_grid, cfg.mfs_shrink, count)
        sol = solve_impedance(solve_grid, sources, k, eta, f)
        check = quadrature_grid(surface, *cfg.grid)
        res = boundary_residual(sol, check, eta, f)
        exact = None
        if cfg.is_sphere_constant:
            exact = mie_solve(k, surface.radius, complex(np.asarray(eta)) / k, theta0)
        rep = certify(res, k, sol, exact, cfg.sphere)
        eff = rep.effectivities or {}
        rows.append([
            _f(k), len(sources), sol.rank, _f(rep.alpha_norm), _f(rep.eta0), _f(rep.Gamma),
            _f(rep.bound_field), _f(rep.bound_dn), _f(rep.bound_sigma_sq),
            *("" if v is None else _f(v) for v in (rep.err_field, rep.err_dn, rep.err_far_sq)),
            *(_f(eff[n]) if eff else "" for n in ("field", "dn", "far_sq")),
        ])
        report["runs"].append({"k": k, "sources": len(sources), "rank": sol.rank, "condition": sol.condition, "certificate": rep.to_dict()})
        files[f"solution_k{k:g}.json"] = sol.to_json() + "\n"
    header = [
        "k", "sources", "rank", "alpha_norm", "eta0", "Gamma", "bound_field", "bound_dn", "bound_far_sq",
        "err_field", "err_dn", "err_far_sq", "eff_field", "eff_dn", "eff_far_sq",
    ]
    files["certificates.csv"] = _csv(header, rows)
    files["report.json"] = _json(report)
    return files


# --- bounds / sweep -----------------------------------------------------------

def make_instance(cfg: ExperimentConfig, k: float) -> Instance:
    surface = build_surface(cfg.surface)
    gamma = _dimensionless_gamma(cfg, k)
    use_mie = cfg.solver == "mie" or (cfg.solver == "auto" and cfg.is_sphere_constant)
    if use_mie:
        return mie_instance(k, surface.radius, gamma, cfg.incident, cfg.grid, cfg.sphere)
    return mfs_instance(
        surface, k, gamma, cfg.incident, cfg.solve_grid, cfg.grid, cfg.sphere,
        shrink=cfg.mfs_shrink, count=cfg.mfs_sources,
    )


def _gradient_spot_check(inst: Instance, rng: np.random.Generator, n: int = 8, h: float = 1e-5) -> float:
    grid = quadrature_grid(inst.surface, *inst.grid_resolution)
    tr = inst.field.traces(grid)
    worst = 0.0
    for _ in range(n):
        th = unit(rng.normal(size=3))
        t = unit(np.cross(th, rng.normal(size=3)))
        g = far_field_gradient(grid, tr.u, tr.dnu, inst.k, th)
        fp = far_field_from_traces(grid, tr.u, tr.dnu, inst.k, np.cos(h) * th + np.sin(h) * t)
        fm = far_field_from_traces(grid, tr.u, tr.dnu, inst.k, np.cos(h) * th - np.sin(h) * t)
        worst = max(worst, abs((fp - fm) / (2 * h) - g @ t))
    return float(worst)


def _verify_runs(cfg: ExperimentConfig):
    rng = np.random.default_rng(cfg.seed)
    rows, runs = [], []
    for k in cfg.k:
        inst = make_instance(cfg, k)
        vrows = verify_all(inst, cfg.a_values, cfg.b_values)
        rows += vrows
        grid = quadrature_grid(inst.surface, *inst.grid_resolution)
        imp = Impedance.from_samples(sample(inst.gamma, grid))
        run = {
            "k": k,
            "solver": type(inst.field).__name__,
            "apriori": apriori_bounds(k, imp.gamma0, imp.Gamma, grid.area).to_dict(),
            "gradient_fd_max_abs_error": _gradient_spot_check(inst, rng),
            "failures": [f"{r.id}/{r.variant}" for r in vrows if r.status == "fail"],
            "findings": [f"{r.id}/{r.variant}" for r in vrows if r.status == "finding"],
        }
        if "residual" in inst.extra:
            run["certificate"] = certify(inst.extra["residual"], k).to_dict()
        runs.append(run)
    return rows, runs


def cmd_bounds(cfg: ExperimentConfig) -> dict[str, str]:
    rows, runs = _verify_runs(cfg)
    report = {"config": _config_summary(cfg), "inequalities": list(INEQUALITY_IDS), "runs": runs,
              "all_pass": all(r.passed for r in rows)}
    return {"verdicts.csv": verdicts_csv(rows), "report.json": _json(report)}


cmd_sweep = cmd_bounds


# --- mie ----------------------------------------------------------------------

def cmd_mie(cfg: ExperimentConfig) -> dict[str, str]:
    rng = np.random.default_rng(cfg.seed)
    R = build_surface(cfg.surface).radius
    theta0 = unit(cfg.incident)
    coef_rows, spec_rows, runs = [], [], []
    for k in cfg.k:
        gamma = complex(_dimensionless_gamma(cfg, k))
        sol = mie_solve(k, R, gamma, theta0)
        for l, a in enumerate(sol.coeffs):
            coef_rows.append([_f(k), l, _f(a.real), _f(a.imag), _f(abs(a))])
        spec = dtn_sphere_spectrum(k, R, sol.l_max)
        for l, (mu, c) in enumerate(zip(spec.mu, spec.wronskian_imag())):
            spec_rows.append([_f(k), "modal", l, _f(mu.real), _f(mu.imag), _f(c), str(bool(mu.imag > 0)).lower()])
        pts = R * unit(rng.normal(size=(64, 3)))
        u, dnu = modal_traces(sol, pts)
        ui, dui = plane_wave(k, theta0, pts, pts / R)
        bc = float(np.max(np.abs(dnu + k * gamma * u + dui + k * gamma * ui)))
        runs.append({"k": k, "gamma": gamma, "l_max": sol.l_max, "tail_ratio": sol.tail_ratio,
                     "sigma_modal": sol.cross_section(), "bc_residual_max": bc})
    return {
        "mie_coefficients.csv": _csv(["k", "l", "re_a", "im_a", "abs_a"], coef_rows),
        "spectrum.csv": _csv(["k", "source", "index", "re", "im", "im_closed_form", "pass"], spec_rows),
        "report.json": _json({"config": _config_summary(cfg), "runs": runs}),
    }


COMMANDS = {
    "spectrum": cmd_spectrum,
    "solve-certify": cmd_solve_certify,
    "bounds": cmd_bounds,
    "sweep": cmd_sweep,
    "mie": cmd_mie,
}


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dtncert", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="TOML experiment file")
        s.add_argument("--out", help="output directory")
        s.add_argument("--k", help="comma-separated wavenumbers")
        s.add_argument("--gamma", help="impedance expression, e.g. '1+i' or 'i*(1+0.5*sin(theta))'")
        s.add_argument("--surface", help="sphere:R | ellipsoid:a,b,c | star_shaped:R")
        s.add_argument("--resolution", help="boundary grid n_theta,n_phi")
        s.add_argument("--seed", type=int)
        s.add_argument("--b", help="comma-separated resolvent shifts b (> 0)")
        if name == "spectrum":
            s.add_argument("--dtn-matrix", action="store_true", help="also assemble the discrete DtN matrix")
    return p


def overrides_from_args(args) -> dict:
    o: dict = {}
    if args.out:
        o["out"] = args.out
    if args.k is not None:
        o["k"] = _floats(args.k)
    if args.gamma:
        o["impedance"] = {"gamma": args.gamma}
    if args.surface:
        o["surface"] = parse_surface_flag(args.surface)
    if args.resolution:
        o["resolution"] = {"grid": [int(v) for v in args.resolution.split(",")]}
    if args.seed is not None:
        o["seed"] = args.seed
    if args.b is not None:
        o["resolvent"] = {"b": _floats(args.b)}
    if getattr(args, "dtn_matrix", False):
        o["dtn"] = {"enabled": True}
    return o


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        overrides = overrides_from_args(args)
        cfg = build_config(overrides, args.config)
        if args.command == "bounds" and len(cfg.k) != 1:
            raise ConfigError([f"k: bounds takes exactly one wavenumber (got {len(cfg.k)}); use sweep"])
        if args.command == "mie" and not cfg.is_sphere_constant:
            raise ConfigError(["surface/impedance: mie needs a sphere with constant gamma"])
    except (ConfigError, ValueError, OSError) as exc:
        print(f"dtncert: {exc}", file=sys.stderr)
        return 2
    log.info("running %s for k = %s", args.command, cfg.k)
    files = COMMANDS[args.command](cfg)
    write_outputs(cfg.out, files)
    for name in sorted(files):
        log.info("wrote %s", os.path.join(cfg.out, name))
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
