"""Run configuration: key schema, defaults, arithmetic values and presets.

A configuration is a YAML mapping with five sections::

    grid:     {dim, sizes | n, lengths}
    model:    {name, epsilon, dt, alpha, m, beta, gamma, mobility_scale, dealias}
    init:     {kind, mu0, ...shape keys}
    schedule: {steps | time, diag_every, snapshot_every}
    output:   {dir, formats, slice_axes}

Numeric model values may be arithmetic strings such as ``"4*eps^2"``. They
are evaluated in the order epsilon, dt, alpha, m, beta, gamma, with the names
``eps``, ``h`` (largest grid spacing), ``N`` (largest grid size), ``L``
(largest box length) and ``pi`` in scope.
"""

from __future__ import annotations

import ast
import copy
import math
import operator
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .init import Ball, BallUnion, Blob, Noise, Plate, Shape, Tube
from .models import MU0_POLICIES, ConfigError, Model, ModelParams
from .spectral import GridSpec

FORMATS = ("csv", "raw", "pgm")

# -- arithmetic values -----------------------------------------------------

_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}
_UNOPS = {ast.UAdd: operator.pos, ast.USub: operator.neg}
_FUNCS = {"sqrt": math.sqrt, "exp": math.exp, "log": math.log}


def evaluate(expr, names: dict[str, float], path: str = "value") -> float:
    """Evaluate a number or an arithmetic string; ``^`` means power."""
    if isinstance(expr, bool):
        raise ConfigError(f"{path}: expected a number, got {expr!r}")
    if isinstance(expr, (int, float)):
        return float(expr)
    if not isinstance(expr, str):
        raise ConfigError(f"{path}: expected a number or expression, got {expr!r}")
    try:
        tree = ast.parse(expr.replace("^", "**"), mode="eval")
    except SyntaxError:
        raise ConfigError(f"{path}: cannot parse expression {expr!r}") from None

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) \
                and not isinstance(node.value, bool):
            return float(node.value)
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _UNOPS:
            return _UNOPS[type(node.op)](ev(node.operand))
        if isinstance(node, ast.Name):
            if node.id not in names:
                raise ConfigError(f"{path}: unknown name {node.id!r} in {expr!r}")
            return float(names[node.id])
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) \
                and node.func.id in _FUNCS and len(node.args) == 1 and not node.keywords:
            return _FUNCS[node.func.id](ev(node.args[0]))
        raise ConfigError(f"{path}: unsupported syntax in {expr!r}")

    try:
        val = ev(tree)
    except (ZeroDivisionError, OverflowError, ValueError) as exc:
        raise ConfigError(f"{path}: {expr!r} does not evaluate ({exc})") from None
    if not math.isfinite(val):
        raise ConfigError(f"{path}: {expr!r} is not finite")
    return val


# -- schema ----------------------------------------------------------------

_SECTIONS = {
    "grid": {"dim", "sizes", "n", "lengths"},
    "model": {"name", "epsilon", "dt", "alpha", "m", "beta", "gamma", "mobility_scale", "dealias"},
    "init": None,  # depends on kind
    "schedule": {"steps", "time", "diag_every", "snapshot_every"},
    "output": {"dir", "formats", "slice_axes"},
}

_INIT_KEYS = {
    "ball": {"center", "radius"},
    "balls": {"balls"},
    "blob": {"balls", "smoothing"},
    "tube": {"start", "end", "radius"},
    "plate": {"center", "half_thickness", "normal_axis", "half_extents"},
    "noise": {"amplitude", "seed"},
    "snapshot": {"path"},
}


def _reject_unknown(d: dict, allowed, path: str) -> None:
    for k in d:
        if k not in allowed:
            raise ConfigError(f"{path}.{k}: unknown key" if path else f"{k}: unknown key")


def _mapping(d, path: str) -> dict:
    if d is None:
        return {}
    if not isinstance(d, dict):
        raise ConfigError(f"{path}: expected a mapping, got {type(d).__name__}")
    return d


def _require(d: dict, key: str, path: str):
    if key not in d:
        raise ConfigError(f"{path}.{key}: missing required key")
    return d[key]


def _int(v, path: str, minimum: int | None = None) -> int:
    if isinstance(v, bool) or not isinstance(v, (int, float)) or float(v) != int(v):
        raise ConfigError(f"{path}: expected an integer, got {v!r}")
    v = int(v)
    if minimum is not None and v < minimum:
        raise ConfigError(f"{path}: must be >= {minimum}, got {v}")
    return v


def _vector(v, dim: int, path: str, names=None) -> tuple[float, ...]:
    if not isinstance(v, (list, tuple)) or len(v) != dim:
        raise ConfigError(f"{path}: expected a list of {dim} numbers, got {v!r}")
    return tuple(evaluate(x, names or {}, f"{path}[{i}]") for i, x in enumerate(v))


def _positive(v, path: str, names=None) -> float:
    x = evaluate(v, names or {}, path)
    if x <= 0:
        raise ConfigError(f"{path}: must be positive, got {x}")
    return x


@dataclass(frozen=True)
class InitSpec:
    kind: str
    shape: Shape | None
    mu0: str
    snapshot: Path | None = None


@dataclass(frozen=True)
class Schedule:
    steps: int | None
    time: float | None
    diag_every: int = 1
    snapshot_every: int | None = None

    def final_step(self, dt: float) -> int:
        if self.steps is not None:
            return self.steps
        return int(round(self.time / dt))


@dataclass(frozen=True)
class Output:
    dir: Path
    formats: tuple[str, ...] = ("csv", "raw", "pgm")
    slice_axes: tuple[int, ...] = (2,)  # 3D only


@dataclass(frozen=True)
class RunConfig:
    grid: GridSpec
    params: ModelParams
    dealias: bool
    init: InitSpec
    schedule: Schedule
    output: Output
    source: dict = field(default_factory=dict, compare=False, repr=False)


def _parse_grid(d: dict) -> GridSpec:
    _reject_unknown(d, _SECTIONS["grid"], "grid")
    dim = _int(d.get("dim", 2), "grid.dim")
    if dim not in (2, 3):
        raise ConfigError(f"grid.dim: must be 2 or 3, got {dim}")
    if "sizes" in d and "n" in d:
        raise ConfigError("grid: give either sizes or n, not both")
    if "sizes" in d:
        sz = d["sizes"]
        if not isinstance(sz, (list, tuple)) or len(sz) != dim:
            raise ConfigError(f"grid.sizes: expected a list of {dim} integers, got {sz!r}")
        sizes = tuple(_int(n, f"grid.sizes[{i}]") for i, n in enumerate(sz))
    else:
        sizes = (_int(_require(d, "n", "grid"), "grid.n"),) * dim
    lengths = _vector(d["lengths"], dim, "grid.lengths") if "lengths" in d else (1.0,) * dim
    try:
        return GridSpec(sizes, lengths)
    except ValueError as exc:
        raise ConfigError(f"grid: {exc}") from None


def _parse_model(d: dict, grid: GridSpec) -> tuple[ModelParams, bool]:
    _reject_unknown(d, _SECTIONS["model"], "model")
    model = Model.parse(_require(d, "name", "model"))
    names = {"h": max(grid.spacing), "N": float(max(grid.sizes)), "L": max(grid.lengths), "pi": math.pi}
    eps = _positive(d.get("epsilon", "2*h"), "model.epsilon", names)
    names["eps"] = eps
    kw: dict[str, Any] = {"model": model, "epsilon": eps}
    kw["dt"] = _positive(d.get("dt", "eps^4"), "model.dt", names)
    for key in ("alpha", "m", "beta", "gamma", "mobility_scale"):
        if key in d and d[key] is not None:
            kw[key] = evaluate(d[key], names, f"model.{key}")
    dealias = d.get("dealias", False)
    if not isinstance(dealias, bool):
        raise ConfigError(f"model.dealias: expected true or false, got {dealias!r}")
    try:
        return ModelParams(**kw), dealias
    except ConfigError as exc:
        raise ConfigError(f"model: {exc}") from None


def _ball(d, dim: int, path: str) -> Ball:
    d = _mapping(d, path)
    _reject_unknown(d, {"center", "radius"}, path)
    return Ball(_vector(_require(d, "center", path), dim, f"{path}.center"),
                _positive(_require(d, "radius", path), f"{path}.radius"))


def _check_fits(extent: tuple[float, ...], grid: GridSpec, eps: float, path: str) -> None:
    # a shape wider than L - 6 eps along an axis touches its own periodic image
    for i, (e, L) in enumerate(zip(extent, grid.lengths)):
        if e + 6.0 * eps > L:
            raise ConfigError(
                f"{path}: extent {e:.4g} along axis {i} leaves less than 3 eps clearance "
                f"to its periodic image in a box of length {L:.4g}"
            )


def _parse_init(d: dict, grid: GridSpec, eps: float, base: Path) -> InitSpec:
    kind = _require(d, "kind", "init")
    if kind not in _INIT_KEYS:
        raise ConfigError(f"init.kind: unknown kind {kind!r}; expected one of {', '.join(_INIT_KEYS)}")
    _reject_unknown(d, _INIT_KEYS[kind] | {"kind", "mu0"}, "init")
    mu0 = d.get("mu0", "zero" if kind == "noise" else "consistent")
    if mu0 not in MU0_POLICIES:
        raise ConfigError(f"init.mu0: expected one of {', '.join(MU0_POLICIES)}, got {mu0!r}")
    dim = grid.dim
    shape: Shape | None
    if kind == "ball":
        shape = _ball({k: d[k] for k in ("center", "radius") if k in d}, dim, "init")
        _check_fits((2 * shape.radius,) * dim, grid, eps, "init")
    elif kind in ("balls", "blob"):
        raw = _require(d, "balls", "init")
        if not isinstance(raw, list) or not raw:
            raise ConfigError("init.balls: expected a non-empty list of {center, radius}")
        balls = tuple(_ball(b, dim, f"init.balls[{i}]") for i, b in enumerate(raw))
        for i, b in enumerate(balls):
            _check_fits((2 * b.radius,) * dim, grid, eps, f"init.balls[{i}]")
        if kind == "balls":
            shape = BallUnion(balls)
            gap = shape.min_gap(grid.lengths)
            if gap < 6.0 * eps:
                raise ConfigError(f"init.balls: closest gap {gap:.4g} is below 6 eps = {6 * eps:.4g}")
        else:
            shape = Blob(balls, _positive(d.get("smoothing", 0.05), "init.smoothing"))
    elif kind == "tube":
        shape = Tube(_vector(_require(d, "start", "init"), dim, "init.start"),
                     _vector(_require(d, "end", "init"), dim, "init.end"),
                     _positive(_require(d, "radius", "init"), "init.radius"))
        ext = tuple(abs(a - b) + 2 * shape.radius for a, b in zip(shape.start, shape.end))
        _check_fits(ext, grid, eps, "init")
    elif kind == "plate":
        axis = _int(d.get("normal_axis", 0), "init.normal_axis", 0)
        if axis >= dim:
            raise ConfigError(f"init.normal_axis: must be < {dim}, got {axis}")
        ext = d.get("half_extents")
        if ext is not None:
            if not isinstance(ext, list) or len(ext) != dim - 1:
                raise ConfigError(f"init.half_extents: expected a list of {dim - 1} numbers or nulls")
            ext = tuple(None if e is None else _positive(e, f"init.half_extents[{i}]")
                        for i, e in enumerate(ext))
        shape = Plate(_vector(_require(d, "center", "init"), dim, "init.center"),
                      _positive(_require(d, "half_thickness", "init"), "init.half_thickness"),
                      axis, ext)
        full = list(ext) if ext is not None else [None] * (dim - 1)
        full.insert(axis, shape.half_thickness)
        _check_fits(tuple(2 * e if e is not None else 0.0 for e in full), grid, eps, "init")
    elif kind == "noise":
        amp = evaluate(d.get("amplitude", 1.0), {}, "init.amplitude")
        if not 0 <= amp <= 1:
            raise ConfigError(f"init.amplitude: must lie in [0, 1], got {amp}")
        shape = Noise(amp, _int(d.get("seed", 0), "init.seed", 0))
    else:
        p = Path(str(_require(d, "path", "init")))
        return InitSpec(kind, None, mu0, p if p.is_absolute() else base / p)
    return InitSpec(kind, shape, mu0)


def _parse_schedule(d: dict) -> Schedule:
    _reject_unknown(d, _SECTIONS["schedule"], "schedule")
    if ("steps" in d) == ("time" in d):
        raise ConfigError("schedule: give exactly one of steps or time")
    steps = _int(d["steps"], "schedule.steps", 0) if "steps" in d else None
    time = None
    if "time" in d:
        time = evaluate(d["time"], {}, "schedule.time")
        if time < 0:
            raise ConfigError(f"schedule.time: must be >= 0, got {time}")
    diag = _int(d.get("diag_every", 1), "schedule.diag_every", 1)
    snap = d.get("snapshot_every")
    snap = None if snap is None else _int(snap, "schedule.snapshot_every", 1)
    return Schedule(steps, time, diag, snap)


def _parse_output(d: dict, base: Path) -> Output:
    _reject_unknown(d, _SECTIONS["output"], "output")
    out = Path(str(d.get("dir", "out")))
    fmts = d.get("formats", list(FORMATS))
    if not isinstance(fmts, list) or any(f not in FORMATS for f in fmts):
        raise ConfigError(f"output.formats: expected a list drawn from {', '.join(FORMATS)}, got {fmts!r}")
    axes = d.get("slice_axes", [2])
    if not isinstance(axes, list) or not axes:
        raise ConfigError(f"output.slice_axes: expected a non-empty list of axes, got {axes!r}")
    axes = tuple(_int(a, f"output.slice_axes[{i}]", 0) for i, a in enumerate(axes))
    return Output(out if out.is_absolute() else base / out, tuple(fmts), axes)


def config_from_dict(doc: dict, base: Path | str = ".") -> RunConfig:
    """Validate a configuration mapping; relative paths resolve against ``base``."""
    base = Path(base)
    doc = _mapping(doc, "config")
    _reject_unknown(doc, _SECTIONS, "")
    grid = _parse_grid(_mapping(_require(doc, "grid", "config"), "grid"))
    params, dealias = _parse_model(_mapping(_require(doc, "model", "config"), "model"), grid)
    init = _parse_init(_mapping(_require(doc, "init", "config"), "init"), grid, params.epsilon, base)
    schedule = _parse_schedule(_mapping(doc.get("schedule", {"steps": 0}), "schedule"))
    output = _parse_output(_mapping(doc.get("output"), "output"), base)
    if grid.dim == 3 and any(a >= 3 for a in output.slice_axes):
        raise ConfigError("output.slice_axes: axes must be 0, 1 or 2")
    return RunConfig(grid, params, dealias, init, schedule, output, copy.deepcopy(doc))


def parse_config(text: str, base: Path | str = ".") -> RunConfig:
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}") from None
    return config_from_dict(doc, base)


def apply_override(doc: dict, item: str) -> None:
    """Set ``a.b.c=value`` in a nested mapping; the value is read as YAML."""
    if "=" not in item:
        raise ConfigError(f"override {item!r}: expected key=value")
    key, raw = item.split("=", 1)
    parts = key.strip().split(".")
    if not all(parts):
        raise ConfigError(f"override {item!r}: empty key component")
    try:
        value = yaml.safe_load(raw)
    except yaml.YAMLError:
        raise ConfigError(f"override {item!r}: value is not valid YAML") from None
    node = doc
    for p in parts[:-1]:
        node = node.setdefault(p, {})
        if not isinstance(node, dict):
            raise ConfigError(f"override {item!r}: {p} is not a section")
    node[parts[-1]] = value


# -- presets ---------------------------------------------------------------

@dataclass(frozen=True)
class Preset:
    name: str
    description: str
    config: dict

    def document(self) -> dict:
        return copy.deepcopy(self.config)


FIVE_BALLS = (
    ((0.30, 0.30), 0.12),
    ((0.73, 0.27), 0.08),
    ((0.72, 0.72), 0.10),
    ((0.27, 0.73), 0.06),
    ((0.52, 0.52), 0.05),
)

BLOB_BALLS = (((0.40, 0.45), 0.15), ((0.60, 0.55), 0.12), ((0.50, 0.70), 0.08))


def _balls(spec):
    return [{"center": list(c), "radius": r} for c, r in spec]


_BASES = {
    "noise2d": (
        "spinodal decomposition from uniform noise, 512^2, dt = 4 eps^2",
        {
            "grid": {"dim": 2, "n": 512},
            "model": {"epsilon": "2/N", "dt": "4*eps^2"},
            "init": {"kind": "noise", "amplitude": 1.0, "seed": 0},
            "schedule": {"steps": 2000, "diag_every": 10, "snapshot_every": 500},
        },
    ),
    "blob2d": (
        "connected set of three fused disks, 256^2, dt = eps^4, T = 1e-4",
        {
            "grid": {"dim": 2, "n": 256},
            "model": {"epsilon": "2*h", "dt": "eps^4"},
            "init": {"kind": "blob", "balls": _balls(BLOB_BALLS), "smoothing": 0.05},
            "schedule": {"time": 1e-4, "diag_every": 100, "snapshot_every": 5000},
        },
    ),
    "fiveballs2d": (
        "five disjoint disks of different radii, 256^2, 10^4 steps",
        {
            "grid": {"dim": 2, "n": 256},
            "model": {"epsilon": "2*h", "dt": "eps^4"},
            "init": {"kind": "balls", "balls": _balls(FIVE_BALLS)},
            "schedule": {"steps": 10000, "diag_every": 100, "snapshot_every": 2500},
        },
    ),
    "tube3d": (
        "thin capsule of radius 0.05, 128^3 desk scale, 600 steps",
        {
            "grid": {"dim": 3, "n": 128},
            "model": {"epsilon": "2*h", "dt": "eps^4"},
            "init": {"kind": "tube", "start": [0.2, 0.5, 0.5], "end": [0.8, 0.5, 0.5], "radius": 0.05},
            "schedule": {"steps": 600, "diag_every": 20, "snapshot_every": 200},
            "output": {"slice_axes": [1, 2]},
        },
    ),
    "plate3d": (
        "thin square plate, half thickness 0.04, 128^3 desk scale, 600 steps",
        {
            "grid": {"dim": 3, "n": 128},
            "model": {"epsilon": "2*h", "dt": "eps^4"},
            "init": {"kind": "plate", "center": [0.5, 0.5, 0.5], "half_thickness": 0.04,
                     "normal_axis": 2, "half_extents": [0.3, 0.3]},
            "schedule": {"steps": 600, "diag_every": 20, "snapshot_every": 200},
            "output": {"slice_axes": [0, 2]},
        },
    ),
    "disk2d": (
        "single disk of radius 0.2, 256^2, 2000 steps",
        {
            "grid": {"dim": 2, "n": 256},
            "model": {"epsilon": "2*h", "dt": "eps^4"},
            "init": {"kind": "ball", "center": [0.5, 0.5], "radius": 0.2},
            "schedule": {"steps": 2000, "diag_every": 50, "snapshot_every": 1000},
        },
    ),
}


def _build_presets() -> dict[str, Preset]:
    out = {}
    for base, (desc, cfg) in _BASES.items():
        for model in Model:
            doc = copy.deepcopy(cfg)
            doc["model"] = {"name": model.value, **doc["model"]}
            name = f"{base}-{model.value}"
            out[name] = Preset(name, f"{desc} ({model.value})", doc)
    return out


PRESETS = _build_presets()


def list_presets() -> list[Preset]:
    return list(PRESETS.values())


def get_preset(name: str) -> Preset:
    try:
        return PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; run the presets verb for the catalog") from None
