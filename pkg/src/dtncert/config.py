"""Experiment configuration: TOML file plus flag overrides, validated up front."""
from __future__ import annotations

import ast
import copy
import sys
from dataclasses import dataclass

import numpy as np

from .geometry import MIN_N_PHI, MIN_N_THETA, SurfaceSpec, build_surface

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class ConfigError(ValueError):
    def __init__(self, problems: list[str]):
        super().__init__("invalid configuration:\n  " + "\n  ".join(problems))
        self.problems = problems


DEFAULTS: dict = {
    "k": [1.0],
    "seed": 0,
    "out": "results",
    "incident": [0.0, 0.0, 1.0],
    "solver": "auto",
    "surface": {"kind": "sphere", "radius": 1.0},
    "impedance": {"gamma": "i", "convention": "dir"},
    "resolution": {"grid": [32, 64], "solve_grid": [24, 48], "sphere": [64, 128], "l_max": 60},
    "mfs": {"shrink": 0.7, "sources": 0},
    "resolvent": {"a": [-20.0, 20.0, 41], "b": [0.1, 1.0, 10.0]},
    "dtn": {"enabled": False, "degree": 8, "grid": [32, 64], "shrink": 0.4},
}


class ImpedanceExpr:
    """gamma(theta, phi) from a tiny grammar: numbers, i/j, pi, theta, phi, sin, cos, +, -, *.

    theta/phi are the surface parameters of each node.
    """

    _NAMES = {"theta": "theta", "θ": "theta", "phi": "phi", "φ": "phi"}
    _CONST = {"i": 1j, "j": 1j, "pi": np.pi}

    def __init__(self, text):
        self.text = str(text)
        try:
            tree = ast.parse(self.text.strip(), mode="eval")
        except SyntaxError as exc:
            raise ValueError(f"cannot parse impedance {self.text!r}: {exc.msg}") from None
        self._tree = tree.body
        self._vars: set[str] = set()
        self._check(self._tree)

    def _check(self, node):
        if isinstance(node, ast.BinOp):
            if not isinstance(node.op, (ast.Add, ast.Sub, ast.Mult)):
                raise ValueError(f"operator {type(node.op).__name__} not allowed in impedance")
            self._check(node.left)
            self._check(node.right)
        elif isinstance(node, ast.UnaryOp):
            if not isinstance(node.op, (ast.USub, ast.UAdd)):
                raise ValueError("only unary +/- allowed in impedance")
            self._check(node.operand)
        elif isinstance(node, ast.Constant):
            if isinstance(node.value, bool) or not isinstance(node.value, (int, float, complex)):
                raise ValueError(f"constant {node.value!r} not allowed in impedance")
        elif isinstance(node, ast.Name):
            if node.id in self._NAMES:
                self._vars.add(self._NAMES[node.id])
            elif node.id not in self._CONST:
                raise ValueError(f"unknown name {node.id!r} in impedance")
        elif isinstance(node, ast.Call):
            if not (isinstance(node.func, ast.Name) and node.func.id in ("sin", "cos")) or len(node.args) != 1 or node.keywords:
                raise ValueError("only sin(x) and cos(x) calls allowed in impedance")
            self._check(node.args[0])
        else:
            raise ValueError(f"{type(node).__name__} not allowed in impedance")

    def _eval(self, node, env):
        if isinstance(node, ast.BinOp):
            a, b = self._eval(node.left, env), self._eval(node.right, env)
            if isinstance(node.op, ast.Add):
                return a + b
            if isinstance(node.op, ast.Sub):
                return a - b
            return a * b
        if isinstance(node, ast.UnaryOp):
            v = self._eval(node.operand, env)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.Constant):
            return node.value
        if isinstance(node, ast.Name):
            if node.id in self._NAMES:
                return env[self._NAMES[node.id]]
            return self._CONST[node.id]
        fn = np.sin if node.func.id == "sin" else np.cos
        return fn(self._eval(node.args[0], env))

    def evaluate(self, theta, phi) -> np.ndarray:
        theta, phi = np.broadcast_arrays(np.asarray(theta, float), np.asarray(phi, float))
        v = self._eval(self._tree, {"theta": theta, "phi": phi})
        return np.broadcast_to(np.asarray(v, dtype=complex), theta.shape).copy()

    def __call__(self, grid) -> np.ndarray:
        return self.evaluate(grid.theta, grid.phi)

    @property
    def constant(self) -> complex | None:
        if self._vars:
            return None
        return complex(self._eval(self._tree, {}))

    def _dense(self) -> np.ndarray:
        if self.constant is not None:
            return np.array([self.constant])
        th, ph = np.meshgrid(np.linspace(0, np.pi, 181), np.linspace(0, 2 * np.pi, 361))
        return self.evaluate(th, ph)

    def inf_imag(self) -> float:
        return float(self._dense().imag.min())

    def inf_real(self) -> float:
        return float(self._dense().real.min())


@dataclass(frozen=True)
class ExperimentConfig:
    surface: SurfaceSpec
    gamma: ImpedanceExpr
    convention: str
    k: tuple[float, ...]
    incident: tuple[float, float, float]
    solver: str
    grid: tuple[int, int]
    solve_grid: tuple[int, int]
    sphere: tuple[int, int]
    l_max: int
    mfs_shrink: float
    mfs_sources: int | None
    a_values: tuple[float, ...]
    b_values: tuple[float, ...]
    dtn_enabled: bool
    dtn_degree: int
    dtn_grid: tuple[int, int]
    dtn_shrink: float
    out: str
    seed: int
    raw: dict

    @property
    def is_sphere_constant(self) -> bool:
        return self.surface.kind == "sphere" and self.gamma.constant is not None


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for key, val in over.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = val
    return out


def _unknown_keys(d: dict, ref: dict, prefix="") -> list[str]:
    probs = []
    for key, val in d.items():
        if key not in ref:
            probs.append(f"{prefix}{key}: unknown key")
        elif isinstance(ref[key], dict) and isinstance(val, dict):
            optional = {"radius", "semi_axes", "coefficients"} if key == "surface" else set()
            probs += [p for p in _unknown_keys(val, {**ref[key], **{o: None for o in optional}}, f"{key}.")]
    return probs


def load_toml(path) -> dict:
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def parse_surface_flag(text: str) -> dict:
    """'sphere:1', 'ellipsoid:1.5,1,1' or 'star_shaped:1'."""
    kind, _, rest = text.partition(":")
    vals = [float(v) for v in rest.split(",")] if rest else []
    if kind == "ellipsoid":
        return {"kind": kind, "semi_axes": vals}
    return {"kind": kind, "radius": vals[0] if vals else 1.0}


def _pair(value, name, probs, minimum=None):
    try:
        a, b = (int(v) for v in value)
    except (TypeError, ValueError):
        probs.append(f"{name}: expected two integers, got {value!r}")
        return (0, 0)
    if minimum and (a < minimum[0] or b < minimum[1]):
        probs.append(f"{name}: {a, b} below minimum {minimum}")
    return (a, b)


def build_config(overrides: dict | None = None, path=None) -> ExperimentConfig:
    """Merge defaults, file and overrides; collect every problem before failing."""
    data = DEFAULTS
    probs: list[str] = []
    if path is not None:
        file_data = load_toml(path)
        probs += _unknown_keys(file_data, DEFAULTS)
        data = _merge(data, file_data)
    if overrides:
        data = _merge(data, overrides)
        if "surface" in overrides:
            # a surface given on the command line replaces the whole table
            data["surface"] = dict(overrides["surface"])

    surf = data["surface"]
    spec = None
    try:
        spec = SurfaceSpec(
            kind=surf.get("kind", "sphere"),
            radius=float(surf.get("radius", 1.0)),
            semi_axes=tuple(float(v) for v in surf["semi_axes"]) if "semi_axes" in surf else None,
            coefficients=tuple((int(l), int(m), float(c)) for l, m, c in surf.get("coefficients", ())),
        )
        build_surface(spec)
    except (ValueError, TypeError) as exc:
        probs.append(f"surface: {exc}")

    gamma = None
    try:
        gamma = ImpedanceExpr(data["impedance"]["gamma"])
        if not gamma.inf_imag() > 0:
            probs.append(f"impedance.gamma: Im(gamma) must be >= gamma0 > 0 (min {gamma.inf_imag():.3g})")
        if gamma.inf_real() < 0:
            probs.append(f"impedance.gamma: Re(gamma) must be >= 0 (min {gamma.inf_real():.3g})")
    except ValueError as exc:
        probs.append(f"impedance.gamma: {exc}")
    conv = data["impedance"].get("convention", "dir")
    if conv not in ("dir", "dirA"):
        probs.append(f"impedance.convention: expected 'dir' or 'dirA', got {conv!r}")

    ks = data["k"]
    ks = [ks] if isinstance(ks, (int, float)) else list(ks)
    if not ks:
        probs.append("k: empty wavenumber list")
    elif any(not (isinstance(k, (int, float)) and k > 0) for k in ks):
        probs.append(f"k: all wavenumbers must be positive, got {ks}")

    inc = data["incident"]
    if len(inc) != 3 or not np.linalg.norm(np.asarray(inc, float)) > 0:
        probs.append(f"incident: expected a nonzero 3-vector, got {inc!r}")

    solver = data["solver"]
    if solver not in ("auto", "mie", "mfs"):
        probs.append(f"solver: expected auto, mie or mfs, got {solver!r}")

    res = data["resolution"]
    mins = (MIN_N_THETA, MIN_N_PHI)
    grid = _pair(res["grid"], "resolution.grid", probs, mins)
    solve_grid = _pair(res["solve_grid"], "resolution.solve_grid", probs, mins)
    sphere = _pair(res["sphere"], "resolution.sphere", probs, mins)
    l_max = int(res["l_max"])
    if l_max < 0:
        probs.append("resolution.l_max: must be non-negative")

    shrink = float(data["mfs"]["shrink"])
    if not 0 < shrink < 1:
        probs.append(f"mfs.shrink: must lie in (0, 1), got {shrink}")
    n_src = int(data["mfs"]["sources"])
    if n_src < 0:
        probs.append("mfs.sources: must be >= 0 (0 selects the default)")

    a_lo, a_hi, a_n = data["resolvent"]["a"]
    bs = [float(b) for b in data["resolvent"]["b"]]
    if not bs or any(b <= 0 for b in bs):
        probs.append("resolvent.b: b > 0 required")
    if int(a_n) < 1:
        probs.append("resolvent.a: need at least one sample")

    dtn = data["dtn"]
    dtn_grid = _pair(dtn["grid"], "dtn.grid", probs, mins)
    dtn_shrink = float(dtn["shrink"])
    if not 0 < dtn_shrink < 1:
        probs.append(f"dtn.shrink: must lie in (0, 1), got {dtn_shrink}")

    if solver == "mie" and spec is not None and gamma is not None:
        if spec.kind != "sphere" or gamma.constant is None:
            probs.append("solver: 'mie' needs a sphere with constant gamma")

    if probs:
        raise ConfigError(probs)
    return ExperimentConfig(
        surface=spec,
        gamma=gamma,
        convention=conv,
        k=tuple(float(k) for k in ks),
        incident=tuple(float(v) for v in inc),
        solver=solver,
        grid=grid,
        solve_grid=solve_grid,
        sphere=sphere,
        l_max=l_max,
        mfs_shrink=shrink,
        mfs_sources=n_src or None,
        a_values=tuple(np.linspace(float(a_lo), float(a_hi), int(a_n))),
        b_values=tuple(bs),
        dtn_enabled=bool(dtn["enabled"]),
        dtn_degree=int(dtn["degree"]),
        dtn_grid=dtn_grid,
        dtn_shrink=dtn_shrink,
        out=str(data["out"]),
        seed=int(data["seed"]),
        raw=data,
    )
