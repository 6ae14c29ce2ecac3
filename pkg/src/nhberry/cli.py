"""Command-line entry point: ``nhberry --config run.yaml``.

A run configuration is a YAML mapping.  Only ``command`` is required; every
other key has a default that depends on the model.  Unknown keys are
rejected.  Example::

    command: chern
    model: qwz
    model_params: {m: 1.0}
    kind: LR
    bands: [0]
    grid: {axes: [kx, ky], min: [0, 0], max: [6.283185307179586, 6.283185307179586],
           sizes: [64, 64], periodic: [true, true]}

Exit codes: 0 success, 1 a verification check failed, 2 configuration or
input-file error, 3 numerical error.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .adiabatic import eta_norm, evolve, geometric_phase, linear_schedule, smooth_schedule
from .berry import KINDS, ConnectionProvider
from .biortho import FrameField, normalization_rescaling, random_gl
from .errors import ConfigError, NHBerryError, ParseError, ValidationError
from .io import ResultRecord, config_hash, load_external_model, parse_nhgrid, to_csv, to_json
from .metric import metric_from_left
from .models import MODEL_NAMES, make_model, model_defaults
from .numeric import DEFAULT_TOL
from .topology import ParamGrid, ParamPath, berry_phase, chern_number, curvature_at
from .verify import CHECKS, format_table, run_checks

__all__ = [
    "COMMANDS",
    "GridSpec",
    "PathSpec",
    "TransformSpec",
    "AdiabaticSpec",
    "RunConfig",
    "parse_config",
    "serialize_config",
    "build_model",
    "run",
    "main",
]

log = logging.getLogger("nhberry")

COMMANDS = ("connection", "curvature", "chern", "holonomy", "adiabatic", "verify")
TRANSFORMS = ("none", "diagonal-rescale", "random-gl")
FORMATS = ("json", "csv")
CHERN_METHODS = ("link_plaquette", "curvature_sum")
SCHEDULES = ("linear", "smooth")
TWO_PI = 2 * np.pi


@dataclass(frozen=True)
class GridSpec:
    axes: tuple
    min: tuple
    max: tuple
    sizes: tuple
    periodic: tuple

    def to_grid(self) -> ParamGrid:
        return ParamGrid(self.axes, self.min, self.max, self.sizes, self.periodic)


@dataclass(frozen=True)
class PathSpec:
    start: tuple
    stop: tuple
    points: int = 401
    closed: bool = True


@dataclass(frozen=True)
class TransformSpec:
    type: str = "none"
    seed: int = 0
    log_scale: float = 1.0


@dataclass(frozen=True)
class AdiabaticSpec:
    total_time: float = 500.0
    dt: float | None = None
    schedule: str = "linear"


@dataclass(frozen=True)
class RunConfig:
    command: str
    model: str = "pseudo_hermitian_hyperbolic"
    model_params: dict = field(default_factory=dict)
    model_file: str | None = None
    kind: str = "CBC"
    bands: tuple = (0,)
    grid: GridSpec | None = None
    path: PathSpec | None = None
    transform: TransformSpec = TransformSpec()
    tolerances: dict = field(default_factory=dict)
    step: float = DEFAULT_TOL.step
    curvature_step: float = 1e-4
    chern_method: str = "link_plaquette"
    adiabatic: AdiabaticSpec = AdiabaticSpec()
    checks: tuple | None = None
    output: str | None = None
    format: str = "json"
    workers: int | None = None
    seed: int = 0

    def to_dict(self) -> dict:
        return _plain(asdict(self))

    def hashable(self) -> dict:
        """Fields that influence results (output location and worker count do not)."""
        d = self.to_dict()
        for k in ("output", "workers", "format"):
            d.pop(k)
        return d


def _plain(v):
    if isinstance(v, dict):
        return {k: _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    return v


# model metadata used for defaults and validation

def _model_meta(name, params, model_file):
    """``(param_names, dim, default_grid, default_path)`` without building the model."""
    if model_file is not None:
        try:
            text = Path(model_file).read_text()
        except OSError as exc:
            raise ValidationError("model_file", f"cannot read {model_file}: {exc}") from exc
        head, _ = parse_nhgrid(text)
        grid = GridSpec(head.axes, head.mins, head.maxs, head.sizes, (False, False))
        return head.axes, head.dim, grid, None
    if name not in MODEL_NAMES:
        raise ValidationError("model", f"unknown model {name!r}; choose from {list(MODEL_NAMES)}")
    unknown = set(params) - set(model_defaults(name))
    if unknown:
        raise ValidationError("model_params", f"unknown parameter(s) {sorted(unknown)} for {name}")
    if name == "pseudo_hermitian_hyperbolic":
        return (("lambda", "xi"), 2,
                GridSpec(("lambda", "xi"), (0.0, 0.1), (TWO_PI, 2.0), (51, 51), (True, False)),
                PathSpec((0.0, 1.0), (TWO_PI, 1.0), 401, True))
    if name == "qwz":
        return (("kx", "ky"), 2,
                GridSpec(("kx", "ky"), (0.0, 0.0), (TWO_PI, TWO_PI), (64, 64), (True, True)), None)
    return ("t", "x", "y"), 2, None, None


_TOP_KEYS = {f.name for f in fields(RunConfig)}


def _tuple(v, name, conv, length=None):
    if not isinstance(v, (list, tuple)):
        raise ValidationError(name, "expected a list")
    try:
        out = tuple(conv(x) for x in v)
    except (TypeError, ValueError) as exc:
        raise ValidationError(name, str(exc)) from exc
    if length is not None and len(out) != length:
        raise ValidationError(name, f"expected {length} entries, got {len(out)}")
    return out


def _scalar(v, name, conv):
    if isinstance(v, (dict, list)):
        raise ValidationError(name, "expected a scalar")
    try:
        return conv(v)
    except (TypeError, ValueError) as exc:
        raise ValidationError(name, str(exc)) from exc


def _int(v):
    if isinstance(v, bool) or (isinstance(v, float) and not v.is_integer()):
        raise ValueError(f"{v!r} is not an integer")
    return int(v)


def _bool(v):
    if not isinstance(v, bool):
        raise ValueError(f"{v!r} is not a boolean")
    return v


def _sub(raw, name, cls, convs):
    if not isinstance(raw, dict):
        raise ValidationError(name, "expected a mapping")
    unknown = set(raw) - set(convs)
    if unknown:
        raise ValidationError(f"{name}.{sorted(unknown)[0]}", "unknown key")
    kw = {}
    for k, v in raw.items():
        kw[k] = None if v is None else convs[k](v, f"{name}.{k}")
    try:
        return cls(**kw)
    except TypeError as exc:
        raise ValidationError(name, str(exc)) from exc


def _grid_from(raw, axes_expected):
    if not isinstance(raw, dict):
        raise ValidationError("grid", "expected a mapping")
    need = {"axes", "min", "max", "sizes"}
    if need - set(raw):
        raise ValidationError(f"grid.{sorted(need - set(raw))[0]}", "missing")
    unknown = set(raw) - need - {"periodic"}
    if unknown:
        raise ValidationError(f"grid.{sorted(unknown)[0]}", "unknown key")
    axes = _tuple(raw["axes"], "grid.axes", str)
    n = len(axes)
    if set(axes) != set(axes_expected) or len(axes) != len(axes_expected):
        raise ValidationError("grid.axes", f"{list(axes)} does not match model parameters {list(axes_expected)}")
    periodic = _tuple(raw.get("periodic", [False] * n), "grid.periodic", _bool, n)
    sizes = _tuple(raw["sizes"], "grid.sizes", _int, n)
    if any(s < 2 for s in sizes):
        raise ValidationError("grid.sizes", "every axis needs at least 2 points")
    lo = _tuple(raw["min"], "grid.min", float, n)
    hi = _tuple(raw["max"], "grid.max", float, n)
    if any(not b > a for a, b in zip(lo, hi)):
        raise ValidationError("grid.max", "each max must exceed its min")
    return GridSpec(axes, lo, hi, sizes, periodic)


def parse_config(text: str) -> RunConfig:
    """Parse and validate a YAML run configuration, filling model-dependent defaults."""
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ParseError(f"invalid YAML: {getattr(exc, 'problem', exc)}",
                         line=None if mark is None else mark.line + 1) from exc
    if not isinstance(raw, dict):
        raise ParseError("configuration must be a mapping", line=1)
    unknown = set(raw) - _TOP_KEYS
    if unknown:
        raise ValidationError(sorted(unknown)[0], "unknown key")
    if "command" not in raw:
        raise ValidationError("command", "missing")
    command = _scalar(raw["command"], "command", str)
    if command not in COMMANDS:
        raise ValidationError("command", f"must be one of {list(COMMANDS)}")

    model = _scalar(raw.get("model", RunConfig.model), "model", str)
    model_file = raw.get("model_file")
    model_file = None if model_file is None else _scalar(model_file, "model_file", str)
    mp = raw.get("model_params") or {}
    if not isinstance(mp, dict):
        raise ValidationError("model_params", "expected a mapping")
    mp = {str(k): _scalar(v, f"model_params.{k}", float) for k, v in mp.items()}
    if model_file is not None and mp:
        raise ValidationError("model_params", "not allowed with model_file")
    axes, dim, grid_default, path_default = _model_meta(model, mp, model_file)

    kind = _scalar(raw.get("kind", "CBC"), "kind", str)
    if kind not in KINDS:
        raise ValidationError("kind", f"must be one of {list(KINDS)}")
    bands = _tuple(raw.get("bands", [0]), "band", _int)
    if not bands or any(b < 0 or b >= dim for b in bands) or len(set(bands)) != len(bands):
        raise ValidationError("band", f"band indices must be distinct and in [0, {dim})")

    grid = _grid_from(raw["grid"], axes) if raw.get("grid") is not None else grid_default
    if raw.get("path") is not None:
        path = _sub(raw["path"], "path", PathSpec, {
            "start": lambda v, n: _tuple(v, n, float, len(axes)),
            "stop": lambda v, n: _tuple(v, n, float, len(axes)),
            "points": lambda v, n: _scalar(v, n, _int),
            "closed": lambda v, n: _scalar(v, n, _bool)})
        if not {"start", "stop"} <= set(raw["path"]):
            raise ValidationError("path", "needs start and stop")
    else:
        path = path_default

    transform = _sub(raw.get("transform") or {}, "transform", TransformSpec, {
        "type": lambda v, n: _scalar(v, n, str),
        "seed": lambda v, n: _scalar(v, n, _int),
        "log_scale": lambda v, n: _scalar(v, n, float)})
    if transform.type not in TRANSFORMS:
        raise ValidationError("transform.type", f"must be one of {list(TRANSFORMS)}")
    if transform.log_scale < 0:
        raise ValidationError("transform.log_scale", "must be non-negative")

    tol = raw.get("tolerances") or {}
    if not isinstance(tol, dict):
        raise ValidationError("tolerances", "expected a mapping")
    for k in tol:
        if k not in DEFAULT_TOL.__dataclass_fields__:
            raise ValidationError(f"tolerances.{k}", "unknown tolerance")
    tol = {str(k): _scalar(v, f"tolerances.{k}", float) for k, v in tol.items()}

    adiabatic = _sub(raw.get("adiabatic") or {}, "adiabatic", AdiabaticSpec, {
        "total_time": lambda v, n: _scalar(v, n, float),
        "dt": lambda v, n: _scalar(v, n, float),
        "schedule": lambda v, n: _scalar(v, n, str)})
    if adiabatic.schedule not in SCHEDULES:
        raise ValidationError("adiabatic.schedule", f"must be one of {list(SCHEDULES)}")
    if adiabatic.total_time <= 0 or (adiabatic.dt is not None and adiabatic.dt <= 0):
        raise ValidationError("adiabatic", "times must be positive")

    checks = raw.get("checks")
    if checks is not None:
        checks = _tuple(checks, "checks", _int)
        if any(c not in CHECKS for c in checks):
            raise ValidationError("checks", f"check numbers run from 1 to {len(CHECKS)}")

    fmt = _scalar(raw.get("format", "json"), "format", str)
    if fmt not in FORMATS:
        raise ValidationError("format", f"must be one of {list(FORMATS)}")
    chern_method = _scalar(raw.get("chern_method", "link_plaquette"), "chern_method", str)
    if chern_method not in CHERN_METHODS:
        raise ValidationError("chern_method", f"must be one of {list(CHERN_METHODS)}")
    workers = raw.get("workers")
    workers = None if workers is None else _scalar(workers, "workers", _int)
    if workers is not None and workers < 1:
        raise ValidationError("workers", "must be at least 1")
    step = _scalar(raw.get("step", DEFAULT_TOL.step), "step", float)
    curvature_step = _scalar(raw.get("curvature_step", 1e-4), "curvature_step", float)
    if step <= 0 or curvature_step <= 0:
        raise ValidationError("step", "must be positive")
    output = raw.get("output")

    cfg = RunConfig(command=command, model=model, model_params=mp, model_file=model_file, kind=kind,
                    bands=bands, grid=grid, path=path, transform=transform, tolerances=tol, step=step,
                    curvature_step=curvature_step, chern_method=chern_method, adiabatic=adiabatic,
                    checks=checks, output=None if output is None else _scalar(output, "output", str),
                    format=fmt, workers=workers, seed=_scalar(raw.get("seed", 0), "seed", _int))
    if command in ("connection", "curvature", "chern") and cfg.grid is None:
        raise ValidationError("grid", f"{command} needs a grid for this model")
    if command in ("holonomy", "adiabatic") and cfg.path is None:
        raise ValidationError("path", f"{command} needs a path for this model")
    if command == "chern" and (len(cfg.grid.axes) != 2 or not all(cfg.grid.periodic)):
        raise ValidationError("grid.periodic", "chern needs a 2D grid periodic in both axes")
    if command == "curvature" and len(cfg.grid.axes) != 2:
        raise ValidationError("grid.axes", "curvature scans need a 2D grid")
    return cfg


def serialize_config(cfg: RunConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)


# execution

def build_model(cfg: RunConfig):
    if cfg.model_file is not None:
        return load_external_model(cfg.model_file)
    return make_model(cfg.model, **cfg.model_params)


def _tolerances(cfg):
    return DEFAULT_TOL.replace(**cfg.tolerances) if cfg.tolerances else DEFAULT_TOL


def _step(cfg, model):
    # sampled models are differentiated across whole grid cells
    if model.preferred_step:
        return max(cfg.step, min(model.preferred_step.values()))
    return cfg.step


def build_frames(cfg: RunConfig, model=None) -> FrameField:
    model = model if model is not None else build_model(cfg)
    frames = FrameField(model, tol=_tolerances(cfg))
    t = cfg.transform
    if t.type == "diagonal-rescale":
        base = frames
        return frames.transformed(lambda p: normalization_rescaling(base.base(p)))
    if t.type == "random-gl":
        T = random_gl(model.spec.dim, seed=t.seed + cfg.seed, log_scale=t.log_scale)
        return frames.transformed(lambda p: T)
    return frames


def build_provider(cfg: RunConfig) -> ConnectionProvider:
    model = build_model(cfg)
    frames = build_frames(cfg, model)
    return ConnectionProvider(cfg.kind, frames, bands=list(cfg.bands), step=_step(cfg, model),
                              tol=_tolerances(cfg))


_WORKER = {}


def _init_worker(cfg_dict):
    cfg = _from_dict(cfg_dict)
    _WORKER["cfg"] = cfg
    _WORKER["provider"] = build_provider(cfg)


def _from_dict(d):
    return parse_config(yaml.safe_dump(d, sort_keys=False))


def _point_task(args):
    index, point = args
    cfg, prov = _WORKER["cfg"], _WORKER["provider"]
    names = prov.param_names
    p = np.asarray(point, float)
    coords = {n: float(x) for n, x in zip(names, p)}
    if cfg.command == "connection":
        A = prov(p)
        return ResultRecord(index, coords, {"connection": dict(A.components)},
                            {"hermiticity": A.diagnostics.get("hermiticity", A.hermiticity_residual())})
    a1, a2 = cfg.grid.axes
    F = curvature_at(prov, p, a1, a2, cfg.curvature_step)
    return ResultRecord(index, coords, {"curvature": {f"{a1}_{a2}": F}},
                        {"hermiticity": float(np.linalg.norm(F - F.conj().T))})


def _workers(cfg, cli_workers):
    if cli_workers is not None:
        return cli_workers
    if cfg.workers is not None:
        return cfg.workers
    env = os.environ.get("NHBERRY_WORKERS")
    if env:
        try:
            n = int(env)
        except ValueError as exc:
            raise ValidationError("NHBERRY_WORKERS", f"not an integer: {env!r}") from exc
        if n < 1:
            raise ValidationError("NHBERRY_WORKERS", "must be at least 1")
        return n
    return 1


def _scan(cfg, workers):
    grid = cfg.grid.to_grid()
    model_names = build_provider(cfg).param_names
    pts = grid.ordered_points(model_names)
    idx = list(np.ndindex(*grid.shape))
    tasks = [(i, pts[i]) for i in idx]
    if workers <= 1:
        _init_worker(cfg.to_dict())
        return [_point_task(t) for t in tasks]
    chunk = max(1, len(tasks) // (8 * workers))
    with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker,
                             initargs=(cfg.to_dict(),)) as pool:
        return list(pool.map(_point_task, tasks, chunksize=chunk))


def _path(cfg, names):
    spec = cfg.path
    periods = ()
    if cfg.grid is not None:
        g, axes = cfg.grid, list(cfg.grid.axes)
        periods = tuple((g.max[axes.index(n)] - g.min[axes.index(n)]) if g.periodic[axes.index(n)] else None
                        for n in names)
    return ParamPath.segment(spec.start, spec.stop, spec.points, spec.closed, periods)


def _run_chern(cfg):
    prov = build_provider(cfg)
    res = chern_number(prov, cfg.grid.to_grid(), method=cfg.chern_method, step=cfg.curvature_step,
                       tol=_tolerances(cfg))
    return [ResultRecord((0,), {}, {"chern": {"integer": res.integer, "raw": res.raw}},
                         {"quality": res.quality, "method": res.method})]


def _run_holonomy(cfg):
    prov = build_provider(cfg)
    gamma = berry_phase(prov, _path(cfg, prov.param_names))
    return [ResultRecord((0,), {}, {"holonomy": {"phase": gamma}}, {"points": cfg.path.points})]


def _run_adiabatic(cfg):
    model = build_model(cfg)
    frames = build_frames(cfg, model)
    spec = cfg.adiabatic
    make = linear_schedule if spec.schedule == "linear" else smooth_schedule
    schedule = make(cfg.path.start, cfg.path.stop, spec.total_time)
    band = cfg.bands[0]
    psi0 = frames(schedule(0.0)).R[:, band]
    traj = evolve(model, schedule, psi0, spec.total_time, spec.dt)
    norms = np.array([eta_norm(s, metric_from_left(frames(schedule(t)).L)) for t, s in zip(traj.times, traj.states)])
    res = geometric_phase(traj, model, band, frames)
    return [ResultRecord((0,), {}, {"adiabatic": {"geometric_phase": res.phase, "total_phase": res.total,
                                                  "dynamical_phase": res.dynamical, "plain_phase": res.plain,
                                                  "euclidean_phase": res.euclidean}},
                         {"fidelity": res.fidelity, "eta_norm_drift": float(np.max(np.abs(norms - norms[0]))),
                          "dt": traj.dt})]


def _run_verify(cfg):
    results = run_checks(cfg.checks)
    print(format_table(results))
    recs = [ResultRecord((r.number,), {}, {"check": {"passed": r.passed, "value": r.value, "tol": r.tol}},
                         {"runtime": r.runtime, **{label: float(v) for label, _, v in r.parts}})
            for r in results]
    return recs, all(r.passed for r in results)


def run(cfg: RunConfig, workers: int | None = None, timestamp: bool = True):
    """Execute ``cfg``; returns ``(exit_code, serialized_output)``."""
    workers = _workers(cfg, workers)
    ok = True
    if cfg.command in ("connection", "curvature"):
        records = _scan(cfg, workers)
    elif cfg.command == "chern":
        records = _run_chern(cfg)
    elif cfg.command == "holonomy":
        records = _run_holonomy(cfg)
    elif cfg.command == "adiabatic":
        records = _run_adiabatic(cfg)
    else:
        records, ok = _run_verify(cfg)
    h = config_hash(cfg.hashable())
    if cfg.format == "csv":
        text = to_csv(records, h)
    else:
        stamp = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds") if timestamp else None
        text = to_json(records, h, __version__, stamp)
    return (0 if ok else 1), text


def _parser():
    ap = argparse.ArgumentParser(prog="nhberry", description=__doc__.split("\n")[0])
    ap.add_argument("--config", required=True, help="YAML run configuration")
    ap.add_argument("--output", help="output file (default: stdout)")
    ap.add_argument("--format", choices=FORMATS, help="output format (overrides the config)")
    ap.add_argument("--workers", type=int, help="worker processes for grid scans")
    ap.add_argument("--seed", type=int, help="seed for random transforms (overrides the config)")
    ap.add_argument("--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        cfg = parse_config(text)
        over = {}
        if args.output is not None:
            over["output"] = args.output
        if args.format is not None:
            over["format"] = args.format
        if args.seed is not None:
            over["seed"] = args.seed
        if args.workers is not None and args.workers < 1:
            raise ValidationError("workers", "must be at least 1")
        cfg = replace(cfg, **over)
        log.info("running %s on %s", cfg.command, cfg.model_file or cfg.model)
        code, out = run(cfg, args.workers)
        if cfg.output:
            Path(cfg.output).write_text(out)
        elif cfg.command != "verify":
            sys.stdout.write(out)
        return code
    except NHBerryError as exc:
        record = {"error": type(exc).__name__, "message": str(exc), "exit_code": exc.exit_code}
        for attr in ("field", "line"):
            if getattr(exc, attr, None) is not None:
                record[attr] = getattr(exc, attr)
        sys.stderr.write(json.dumps(record) + "\n")
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
