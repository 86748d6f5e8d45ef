"""Command line entry point ``otcl``.

``otcl run --config cfg.json`` executes a configuration.  The other
subcommands build a one-task configuration from flags and run it the same
way, so every invocation leaves reports plus ``manifest.json`` in ``--out``.
Set ``OTCL_LOG`` (``DEBUG``, ``INFO``, ``WARNING``...) for log verbosity.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from .config import EXIT_SCHEMA, run_config

CHECKS = {"cd": "check_cd", "bcd": "check_bcd", "evi": "check_evi",
          "evi-jensen": "check_evi_jensen", "logbm": "check_logbm", "bs": "check_bs"}


def _common(p):
    p.add_argument("--out", help="output directory (default: config 'out' or ./otcl-out)")
    p.add_argument("--seed", type=int, help="seed for sampled verifications")
    p.add_argument("--parallel", action="store_true", help="run independent tasks concurrently")
    p.add_argument("--tol", type=float, help="override the default check tolerance")


def _json_arg(text):
    """Inline JSON, or ``@file.json``."""
    if text.startswith("@"):
        with open(text[1:]) as fh:
            return json.load(fh)
    return json.loads(text)


def _space_args(p):
    p.add_argument("--space", required=True, type=_json_arg, help="space as JSON or @file")


def build_parser():
    parser = argparse.ArgumentParser(prog="otcl", description="Curvature-dimension checks on Wasserstein space")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a configuration file")
    p.add_argument("--config", required=True)
    _common(p)

    p = sub.add_parser("validate", help="validate a space")
    _space_args(p)
    _common(p)

    p = sub.add_parser("ot", help="optimal transport between two measures")
    _space_args(p)
    p.add_argument("--mu", required=True, type=_json_arg)
    p.add_argument("--nu", required=True, type=_json_arg)
    p.add_argument("--solver", default="exact", choices=["exact", "entropic", "bruteforce"])
    p.add_argument("--epsilon", type=float, default=1e-2)
    _common(p)

    p = sub.add_parser("barycenter", help="Wasserstein barycenter of a mixture")
    _space_args(p)
    p.add_argument("--omega", required=True, type=_json_arg)
    p.add_argument("--solver", choices=["fixed_support", "multimarginal", "gaussian", "sinkhorn"])
    p.add_argument("--epsilon", type=float, default=1e-2)
    _common(p)

    p = sub.add_parser("interpolate", help="displacement interpolation")
    _space_args(p)
    p.add_argument("--mu0", required=True, type=_json_arg)
    p.add_argument("--mu1", required=True, type=_json_arg)
    p.add_argument("--t-grid", type=int, default=17)
    _common(p)

    p = sub.add_parser("flow", help="gradient flow trajectory")
    _space_args(p)
    p.add_argument("--start", required=True, type=_json_arg)
    p.add_argument("--scheme", default="jko", choices=["jko", "closed_form_heat", "closed_form_ou"])
    p.add_argument("--energy", type=_json_arg)
    p.add_argument("--tau", type=float, default=1e-2)
    p.add_argument("--steps", type=int, default=10)
    p.add_argument("--times", type=_json_arg)
    _common(p)

    p = sub.add_parser("check", help="run one inequality check")
    p.add_argument("which", choices=sorted(CHECKS))
    _space_args(p)
    p.add_argument("--task", required=True, type=_json_arg,
                   help="task fields as JSON; measures may be inline objects")
    _common(p)
    return parser


def _inline_config(args):
    """One-task configuration from subcommand flags.  Inline measure objects
    are registered under generated names."""
    cfg = {"space": args.space, "measures": {}, "omegas": {}, "energies": {}, "tasks": []}

    def measure(obj, name):
        if isinstance(obj, str):
            return obj
        cfg["measures"][name] = obj
        return name

    def energy(obj, name="energy"):
        if obj is None or isinstance(obj, str):
            return obj
        cfg["energies"][name] = obj
        return name

    cmd = args.command
    if cmd == "validate":
        task = {"op": "validate"}
    elif cmd == "ot":
        task = {"op": "ot", "mu": measure(args.mu, "mu"), "nu": measure(args.nu, "nu"),
                "solver": args.solver, "epsilon": args.epsilon}
    elif cmd == "barycenter":
        cfg["omegas"]["omega"] = args.omega
        task = {"op": "barycenter", "omega": "omega", "epsilon": args.epsilon}
        if args.solver:
            task["solver"] = args.solver
    elif cmd == "interpolate":
        task = {"op": "interpolate", "mu0": measure(args.mu0, "mu0"), "mu1": measure(args.mu1, "mu1"),
                "t_grid": args.t_grid}
    elif cmd == "flow":
        task = {"op": "flow", "start": measure(args.start, "start"), "scheme": args.scheme,
                "tau": args.tau, "steps": args.steps}
        if args.energy is not None:
            task["energy"] = energy(args.energy)
        if args.times is not None:
            task["times"] = args.times
    else:
        task = dict(args.task)
        task["op"] = CHECKS[args.which]
        for key in ("mu0", "mu1", "z"):
            if key in task:
                task[key] = measure(task[key], key)
        if isinstance(task.get("omega"), dict):
            cfg["omegas"]["omega"] = task["omega"]
            task["omega"] = "omega"
        if "energy" in task:
            task["energy"] = energy(task["energy"])
        curve = task.get("curve")
        if isinstance(curve, dict):
            curve = dict(curve)
            for key in ("start", "constant"):
                if isinstance(curve.get(key), dict):
                    curve[key] = measure(curve[key], "curve_" + key)
            task["curve"] = curve
    cfg["tasks"].append(task)
    return cfg


def main(argv=None):
    logging.basicConfig(level=os.environ.get("OTCL_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_SCHEMA if exc.code else 0
    opts = {"out_dir": args.out, "seed": args.seed, "parallel": args.parallel, "tol": args.tol}
    if args.command == "run":
        return run_config(args.config, **opts)
    return run_config(_inline_config(args), **opts)


if __name__ == "__main__":
    sys.exit(main())
