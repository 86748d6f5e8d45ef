"""Run configurations: schema, name resolution and task execution.

A configuration is a JSON object::

    {"space": {...} | {"file": "space.json"},
     "measures": {"name": {...}}, "omegas": {"name": {...}},
     "energies": {"name": {...}}, "seed": 0, "tol": null,
     "tasks": [{"op": "check_cd", "mu0": "a", "mu1": "b", "K": 0}, ...]}

Exit status of a run: 0 all tasks passed, 1 some check failed, 2 some check
was vacuous (and none failed), 3 a task raised or a constraint was violated,
4 the configuration itself is invalid (nothing is written).
"""

from __future__ import annotations

import hashlib
import logging
import os
import platform
import traceback
from concurrent.futures import ThreadPoolExecutor

import jsonschema
import numpy as np
import scipy

from . import __version__
from ._accel import backend_name
from .barycenter import (barycenter_fixed_support, barycenter_multimarginal, barycenter_sinkhorn,
                         gaussian_barycenter)
from .checks import (QuadraticFunction, check_blaschke_santalo, check_cd, check_evi_integral,
                     check_evi_jensen_bound, check_jensen_bcd, check_logbm, Box)
from .flows import FlowSpec, closed_form_curve, jko_trajectory
from .functionals import EnergySpec, evaluate
from .interpolation import WassersteinCurve, geodesic_curve, t_grid, write_curve_csv
from .io import energy_from_dict, load_json, measure_from_dict, measure_to_dict, omega_from_dict, space_from_dict
from .measures import GaussianMeasure
from .ot import InfeasibleTransport, oracle_ot_bruteforce, solve_ot_entropic, solve_ot_exact
from .report import emit_report, render_json, write_atomic
from .spaces import validate_space

log = logging.getLogger(__name__)

EXIT_PASS, EXIT_FAIL, EXIT_VACUOUS, EXIT_ERROR, EXIT_SCHEMA = 0, 1, 2, 3, 4

CHECK_OPS = ("check_cd", "check_bcd", "check_evi", "check_evi_jensen", "check_logbm", "check_bs")
OPS = ("validate", "ot", "barycenter", "interpolate", "flow") + CHECK_OPS

_file_or_object = {"type": "object"}

SCHEMA = {
    "type": "object",
    "required": ["space"],
    "properties": {
        "space": _file_or_object,
        "measures": {"type": "object", "additionalProperties": _file_or_object},
        "omegas": {"type": "object", "additionalProperties": _file_or_object},
        "energies": {"type": "object", "additionalProperties": {"type": "object"}},
        "seed": {"type": "integer", "minimum": 0},
        "tol": {"type": ["number", "null"], "minimum": 0},
        "out": {"type": "string"},
        "tasks": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["op"],
                "properties": {
                    "op": {"enum": list(OPS)},
                    "name": {"type": "string", "pattern": "^[A-Za-z0-9_.-]+$"},
                    "K": {"type": "number"},
                    "tol": {"type": ["number", "null"], "minimum": 0},
                    "epsilon": {"type": "number", "minimum": 0},
                    "tau": {"type": "number", "exclusiveMinimum": 0},
                    "steps": {"type": "integer", "minimum": 1},
                    "t_grid": {"oneOf": [{"type": "integer", "minimum": 2},
                                         {"type": "array", "items": {"type": "number", "minimum": 0, "maximum": 1}}]},
                },
            },
        },
    },
}


class ConfigError(ValueError):
    """Schema violation or unresolved name (exit status 4)."""


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


class Context:
    """Resolved objects of a configuration."""

    def __init__(self, cfg, base_dir, seed, tol):
        self.base_dir = base_dir
        self.inputs = {}
        self.seed = seed
        self.tol = tol
        self.space = space_from_dict(self._inline(cfg["space"]))
        self.measures = {k: measure_from_dict(self._inline(v), self.space)
                         for k, v in sorted(cfg.get("measures", {}).items())}
        self.omegas = {k: omega_from_dict(self._inline(v), self.space, self.measures)
                       for k, v in sorted(cfg.get("omegas", {}).items())}
        self.energies = {k: energy_from_dict(v) for k, v in sorted(cfg.get("energies", {}).items())}

    def _inline(self, d):
        if isinstance(d, dict) and set(d) == {"file"}:
            path = os.path.join(self.base_dir, d["file"])
            self.inputs[d["file"]] = _sha256(path)
            return load_json(path)
        return d

    def measure(self, name):
        if name not in self.measures:
            raise ConfigError(f"undefined measure {name!r}")
        return self.measures[name]

    def omega(self, name):
        if name not in self.omegas:
            raise ConfigError(f"undefined omega {name!r}")
        return self.omegas[name]

    def energy(self, name):
        if name is None:
            return EnergySpec.boltzmann()
        if name not in self.energies:
            raise ConfigError(f"undefined energy {name!r}")
        return self.energies[name]


_MEASURE_KEYS = ("mu", "nu", "mu0", "mu1", "z", "start")


def resolve_names(task, ctx):
    """Raise :class:`ConfigError` for any name the task references but the
    configuration does not define."""
    for key in _MEASURE_KEYS:
        v = task.get(key)
        if isinstance(v, str) and v != "barycenter":
            ctx.measure(v)
    curve = task.get("curve")
    if isinstance(curve, dict):
        for key in ("start", "constant"):
            v = curve.get(key)
            if isinstance(v, str) and v != "barycenter":
                ctx.measure(v)
        if "energy" in curve:
            ctx.energy(curve["energy"])
    if "omega" in task:
        ctx.omega(task["omega"])
    if "energy" in task:
        ctx.energy(task["energy"])


def _t_values(task):
    tg = task.get("t_grid", 17)
    return t_grid(tg) if isinstance(tg, int) else np.asarray(tg, dtype=float)


def _tol(task, ctx):
    tol = task.get("tol")
    return ctx.tol if tol is None else tol


def _barycenter(ctx, omega, spec):
    spec = spec or {}
    solver = spec.get("solver", "gaussian" if omega.gaussian else "fixed_support")
    if solver == "gaussian":
        return gaussian_barycenter(omega)
    support = spec.get("support", "all")
    support = np.arange(ctx.space.n) if support == "all" else np.asarray(support)
    if solver == "fixed_support":
        return barycenter_fixed_support(omega, support)
    if solver == "sinkhorn":
        return barycenter_sinkhorn(omega, support, float(spec.get("epsilon", 1e-2)),
                                   certify=bool(spec.get("certify", False)))
    if solver == "multimarginal":
        return barycenter_multimarginal(omega)
    raise ConfigError(f"unknown barycenter solver {solver!r}")


def _curve(ctx, spec, omega=None, bary=None):
    """Curve from ``{"start" | "constant": name, "scheme", "times" | "tau"/"steps"}``."""
    if "constant" in spec:
        m = bary.measure if spec["constant"] == "barycenter" else ctx.measure(spec["constant"])
        times = np.asarray(spec.get("times", t_grid(10)), dtype=float)
        return WassersteinCurve(times, [m] * times.size, "user-supplied", {"constant": True})
    start = spec.get("start", "barycenter")
    m0 = bary.measure if start == "barycenter" else ctx.measure(start)
    scheme = spec.get("scheme", "closed_form_ou")
    if scheme in ("closed_form_heat", "closed_form_ou"):
        if not isinstance(m0, GaussianMeasure):
            raise ConfigError("closed-form flows need a Gaussian start")
        return closed_form_curve(m0, scheme, spec.get("times", t_grid(10)))
    fs = FlowSpec(ctx.energy(spec.get("energy")), float(spec.get("K", 0.0)), "jko",
                  float(spec.get("tau", 1e-2)), int(spec.get("steps", 1)))
    return jko_trajectory(ctx.space, m0, fs)


def run_task(index, task, ctx, out_dir):
    """Execute one task; returns ``(status, files)``."""
    op = task["op"]
    stem = f"{index:02d}_{task.get('name', op)}"
    files = []

    def put(suffix, text):
        path = os.path.join(out_dir, stem + suffix)
        write_atomic(path, text)
        files.append(os.path.basename(path))

    if op == "validate":
        rep = validate_space(ctx.space, check_triangle=task.get("check_triangle"))
        put(".json", render_json(rep.to_dict()) + "\n")
        return ("pass" if rep.valid else "fail"), files
    if op == "ot":
        mu, nu = ctx.measure(task["mu"]), ctx.measure(task["nu"])
        solver = task.get("solver", "exact")
        try:
            if solver == "exact":
                plan = solve_ot_exact(mu, nu)
            elif solver == "entropic":
                plan = solve_ot_entropic(mu, nu, float(task["epsilon"]))
            elif solver == "bruteforce":
                plan = oracle_ot_bruteforce(mu, nu)
            else:
                raise ConfigError(f"unknown OT solver {solver!r}")
            info = {k: v for k, v in plan.info.items() if not isinstance(v, np.ndarray)}
            out = {"solver": solver, "cost": plan.cost, "w2": float(np.sqrt(plan.cost)), "info": info,
                   "source_support": mu.support, "target_support": nu.support, "plan": plan.matrix}
        except InfeasibleTransport as exc:
            out = {"solver": solver, "cost": float("inf"), "w2": float("inf"), "info": {"infeasible": str(exc)}}
        put(".json", render_json(out) + "\n")
        return "pass", files
    if op == "barycenter":
        omega = ctx.omega(task["omega"])
        res = _barycenter(ctx, omega, task)
        info = {k: v for k, v in res.info.items() if k not in ("space", "omega")}
        out = {"measure": measure_to_dict(res.measure), "objective": res.objective,
               "epsilon": res.epsilon, "certified": res.certified, "info": info}
        put(".json", render_json(out) + "\n")
        return "pass", files
    if op == "interpolate":
        curve = geodesic_curve(ctx.measure(task["mu0"]), ctx.measure(task["mu1"]), _t_values(task))
        path = os.path.join(out_dir, stem + ".csv")
        write_curve_csv(curve, path)
        files.append(os.path.basename(path))
        return "pass", files
    if op == "flow":
        curve = _curve(ctx, task)
        path = os.path.join(out_dir, stem + ".csv")
        write_curve_csv(curve, path)
        files.append(os.path.basename(path))
        energy = ctx.energy(task.get("energy"))
        summary = {"times": curve.times, "energies": [evaluate(energy, m, ctx.space) for m in curve.measures],
                   "provenance": curve.provenance,
                   "info": {k: v for k, v in curve.info.items() if k != "energies"}}
        put(".json", render_json(summary) + "\n")
        return "pass", files

    tol = _tol(task, ctx)
    if op == "check_cd":
        rep = check_cd(ctx.space, ctx.measure(task["mu0"]), ctx.measure(task["mu1"]), float(task.get("K", 0.0)),
                       _t_values(task), tol, ctx.energy(task.get("energy")))
    elif op == "check_bcd":
        omega = ctx.omega(task["omega"])
        rep = check_jensen_bcd(ctx.space, omega, float(task.get("K", 0.0)),
                               _barycenter(ctx, omega, task.get("barycenter")), tol, ctx.energy(task.get("energy")))
    elif op == "check_evi":
        curve = _curve(ctx, task["curve"])
        rep = check_evi_integral(curve, ctx.measure(task["z"]), ctx.energy(task.get("energy")),
                                 float(task.get("K", 0.0)), ctx.space, tol)
    elif op == "check_evi_jensen":
        omega = ctx.omega(task["omega"])
        bary = _barycenter(ctx, omega, task.get("barycenter"))
        curve = _curve(ctx, task.get("curve", {}), omega, bary)
        var_est = task.get("var_est", bary.objective)
        rep = check_evi_jensen_bound(curve, omega, ctx.energy(task.get("energy")), float(task.get("K", 0.0)),
                                     float(task.get("epsilon", 0.0)), var_est, ctx.space, tol)
    elif op == "check_logbm":
        sets = [Box(tuple(s["lo"]), tuple(s["hi"])) if isinstance(s, dict) else s for s in task["sets"]]
        rep = check_logbm(ctx.space, sets, task["lambdas"], tol)
    elif op == "check_bs":
        fns = []
        for f in task["functions"]:
            if "quadratic" in f:
                q = f["quadratic"]
                fns.append(QuadraticFunction(float(q.get("c", 0.0)), tuple(np.atleast_1d(q.get("b", 0.0)).tolist()),
                                             float(q.get("q", 0.0))))
            else:
                fns.append(np.asarray(f["values"], dtype=float))
        rep = check_blaschke_santalo(ctx.space, fns, tol, int(task.get("samples", 2000)),
                                     int(task.get("seed", ctx.seed)), bool(task.get("assume_bcd1", False)))
    else:  # pragma: no cover - schema guards op names
        raise ConfigError(f"unknown op {op!r}")
    emit_report(rep, os.path.join(out_dir, stem + ".json"), "json")
    emit_report(rep, os.path.join(out_dir, stem + ".csv"), "csv")
    files += [stem + ".json", stem + ".csv"]
    return rep.status, files


def _exit_code(statuses):
    if any(s in ("error", "constraint_failed") for s in statuses):
        return EXIT_ERROR
    if "fail" in statuses:
        return EXIT_FAIL
    if "vacuous" in statuses:
        return EXIT_VACUOUS
    return EXIT_PASS


def prepare(cfg, base_dir=".", seed=None, tol=None):
    """Validate the schema and resolve every name; raises :class:`ConfigError`."""
    try:
        jsonschema.validate(cfg, SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"schema violation: {exc.message}") from exc
    seed = cfg.get("seed", 0) if seed is None else seed
    tol = cfg.get("tol") if tol is None else tol
    try:
        ctx = Context(cfg, base_dir, seed, tol)
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError, OSError) as exc:
        raise ConfigError(f"invalid configuration: {exc}") from exc
    for task in cfg.get("tasks", []):
        resolve_names(task, ctx)
    return ctx


def run_config(path_or_cfg, out_dir=None, seed=None, parallel=False, tol=None):
    """Run every task of a configuration.  Returns the exit status."""
    if isinstance(path_or_cfg, (str, os.PathLike)):
        cfg_path = os.fspath(path_or_cfg)
        try:
            cfg = load_json(cfg_path)
        except (OSError, ValueError) as exc:
            log.error("cannot read config: %s", exc)
            return EXIT_SCHEMA
        base_dir = os.path.dirname(os.path.abspath(cfg_path))
        config_entry = {os.path.basename(cfg_path): _sha256(cfg_path)}
    else:
        cfg = path_or_cfg
        base_dir = os.getcwd()
        config_entry = {"<inline>": hashlib.sha256(render_json(cfg).encode()).hexdigest()}
    try:
        ctx = prepare(cfg, base_dir, seed, tol)
    except ConfigError as exc:
        log.error("%s", exc)
        return EXIT_SCHEMA
    out_dir = out_dir or cfg.get("out") or "otcl-out"
    os.makedirs(out_dir, exist_ok=True)
    tasks = cfg.get("tasks", [])

    def one(item):
        i, task = item
        try:
            return run_task(i, task, ctx, out_dir)
        except Exception as exc:  # reported per task, never aborts the run
            log.error("task %d (%s) failed: %s", i, task["op"], exc)
            log.debug("%s", traceback.format_exc())
            stem = f"{i:02d}_{task.get('name', task['op'])}"
            write_atomic(os.path.join(out_dir, stem + ".error.json"),
                         render_json({"op": task["op"], "error": type(exc).__name__, "message": str(exc)}) + "\n")
            return "error", [stem + ".error.json"]

    if parallel and len(tasks) > 1:
        with ThreadPoolExecutor() as pool:
            results = list(pool.map(one, enumerate(tasks)))
    else:
        results = [one(item) for item in enumerate(tasks)]
    statuses = [r[0] for r in results]
    code = _exit_code(statuses)
    manifest = {
        "config": config_entry,
        "inputs": dict(sorted(ctx.inputs.items())),
        "seed": ctx.seed,
        "tolerance_override": ctx.tol,
        "versions": {"otcl": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                     "python": platform.python_version()},
        "backend": backend_name(),
        "tasks": [{"index": i, "op": t["op"], "name": t.get("name", t["op"]), "status": s, "files": f}
                  for i, (t, (s, f)) in enumerate(zip(tasks, results))],
        "exit_status": code,
    }
    write_atomic(os.path.join(out_dir, "manifest.json"), render_json(manifest) + "\n")
    return code


