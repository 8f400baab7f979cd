"""Command-line runner for the verification studies.

::

    emelim run config.json        # run one study, write results.csv + summary.json
    emelim list-presets           # show the named configurations
    emelim report results.csv     # convergence orders of every metric in a results file

A config is a JSON object::

    {
      "experiment": "scalar-elim",
      "preset": "smoke",
      "levels": [64, 128, 256],
      "params": {"horizon": 1.0},
      "tolerances": {"density_order": [1.8, 2.2]},
      "output": "results/scalar",
      "seed": 0
    }

``preset`` supplies defaults for every other key; ``experiment`` is needed
only without a preset. ``params`` are keyword arguments of the study
function in :mod:`emelim.pipelines`, ``tolerances`` override acceptance
bounds by check name. The environment variable ``EMELIM_OUTPUT`` overrides
the output directory. The exit status of ``run`` is 0 when every check
passes, 1 when a check fails, 2 for an invalid config and 3 when the study
itself fails.
"""

from __future__ import annotations

import argparse
import csv
import inspect
import json
import math
import os
import sys
from collections import defaultdict
from pathlib import Path

from .convergence import convergence_report
from .errors import ConfigError, EmelimError, PipelineError
from .pipelines import PIPELINES

CONFIG_KEYS = ("experiment", "preset", "levels", "params", "tolerances", "output", "seed")
CSV_COLUMNS = ("experiment", "level", "h", "dt", "metric", "value", "wall_time")
LEVEL_PARAM = {"carleman": "n_max_levels"}
OUTPUT_ENV = "EMELIM_OUTPUT"

PRESETS = {
    "smoke": {"experiment": "scalar-elim", "levels": [64, 128, 256],
              "doc": "1D scalar elimination, N = 64/128/256, horizon 1"},
    "dirac-identity": {"experiment": "dirac-elim",
                       "doc": "identity chain on 5 seeds, elimination on solutions, two-route check"},
    "dirac-quick": {"experiment": "dirac-elim", "levels": [8, 16], "params": {"seeds": 2},
                    "doc": "two-level, two-seed version of dirac-identity"},
    "spinor-reconstruct": {"experiment": "spinor-reconstruct", "levels": [8, 12, 16],
                           "doc": "third-derivative reconstruction on Dirac-Maxwell solutions"},
    "linear-rotor": {"experiment": "carleman", "params": {"field": "linear-rotor"},
                     "doc": "Carleman embedding of a two-mode rotation"},
    "quadratic-rotor": {"experiment": "carleman", "params": {"field": "quadratic-rotor"},
                        "doc": "Carleman embedding of F = -i xi - 0.1 i xi^2"},
    "chain": {"experiment": "carleman", "params": {"field": "chain", "n_max_levels": [4, 6, 8]},
              "doc": "three modes on a ring with discrete-Laplacian hopping"},
    "stencils": {"experiment": "convergence", "doc": "orders of the spatial difference operators"},
}


def load_config(source):
    """Parse and validate a config from a path, JSON text or dict.

    Returns ``(experiment, kwargs, output_dir)`` where ``kwargs`` are ready
    for the study function.
    """
    if isinstance(source, dict):
        raw = dict(source)
    else:
        path = Path(source)
        try:
            raw = json.loads(path.read_text())
        except FileNotFoundError as err:
            raise ConfigError(f"config file not found: {path}") from err
        except json.JSONDecodeError as err:
            raise ConfigError(f"config is not valid JSON: {err}") from err
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    for key in raw:
        if key not in CONFIG_KEYS:
            raise ConfigError(f"unknown config key '{key}'; allowed: {', '.join(CONFIG_KEYS)}")

    cfg = {}
    if "preset" in raw:
        name = raw["preset"]
        if name not in PRESETS:
            raise ConfigError(f"unknown preset '{name}'; see list-presets")
        cfg = {k: v for k, v in PRESETS[name].items() if k != "doc"}
    params = dict(cfg.get("params", {}))
    params.update(raw.get("params", {}))
    cfg.update({k: v for k, v in raw.items() if k not in ("preset", "params")})
    cfg["params"] = params

    experiment = cfg.get("experiment")
    if experiment not in PIPELINES:
        raise ConfigError(f"unknown experiment '{experiment}'; known: {', '.join(PIPELINES)}")
    func = PIPELINES[experiment]
    accepted = set(inspect.signature(func).parameters) - {"tolerances", "seed"}
    for key in params:
        if key not in accepted:
            raise ConfigError(f"unknown parameter '{key}' for {experiment}; "
                              f"allowed: {', '.join(sorted(accepted))}")
    kwargs = dict(params)
    if "levels" in cfg:
        kwargs[LEVEL_PARAM.get(experiment, "levels")] = cfg["levels"]
    _validate(experiment, kwargs)
    kwargs["tolerances"] = cfg.get("tolerances") or None
    seed = cfg.get("seed", 0)
    if not isinstance(seed, int) or seed < 0:
        raise ConfigError("seed must be a non-negative integer")
    kwargs["seed"] = seed
    out = os.environ.get(OUTPUT_ENV) or cfg.get("output") or f"results/{experiment}"
    return experiment, kwargs, Path(out)


def _validate(experiment, kwargs):
    lattice = experiment != "carleman"
    for key in ("levels", "n_max_levels", "elimination_levels", "dual_levels"):
        if key not in kwargs:
            continue
        lv = kwargs[key]
        if not isinstance(lv, (list, tuple)) or not all(isinstance(v, int) for v in lv):
            raise ConfigError(f"'{key}' must be a list of integers")
        if len(lv) < 2:
            raise ConfigError(f"'{key}' needs at least two refinement levels")
        if lattice and min(lv) < 8:
            raise ConfigError(f"'{key}': lattices need at least 8 points per axis")
        if list(lv) != sorted(lv) or len(set(lv)) != len(lv):
            raise ConfigError(f"'{key}' must be strictly increasing")
    for key in ("cfl",):
        if key in kwargs and not 0.0 < kwargs[key] <= 1.0:
            raise ConfigError(f"'{key}' must lie in (0, 1]")
    for key in ("horizon", "t_final", "dt"):
        if key in kwargs and not (isinstance(kwargs[key], (int, float)) and kwargs[key] > 0):
            raise ConfigError(f"'{key}' must be positive")
    if "seeds" in kwargs and not (isinstance(kwargs["seeds"], int) and kwargs["seeds"] >= 1):
        raise ConfigError("'seeds' must be a positive integer")


def run_config(source):
    """Run a study from a config; returns ``(result, output_dir)``."""
    experiment, kwargs, out = load_config(source)
    try:
        result = PIPELINES[experiment](**kwargs)
    except (PipelineError, ConfigError):
        raise
    except (EmelimError, ValueError) as err:
        raise PipelineError(f"{experiment}: {type(err).__name__}: {err}") from err
    write_results(result, out)
    return result, out


def write_results(result, out):
    """``results.csv`` (one row per metric), ``summary.json`` and optional per-step diagnostics."""
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "results.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for r in result.records:
            w.writerow([r.experiment, _fmt(r.level), repr(r.h), repr(r.dt), r.metric, repr(r.value),
                        f"{r.wall_time:.3f}"])
    summary = {"experiment": result.experiment, "pass": result.passed, "checks": result.summary()}
    (out / "summary.json").write_text(json.dumps(summary, indent=2, default=_json_default) + "\n")
    steps = result.diagnostics.get("steps")
    if steps:
        with open(out / "steps.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(("time", "gauss_residual", "density_gap", "field_energy"))
            for row in steps:
                w.writerow([repr(float(v)) for v in row])


def _fmt(level):
    return str(int(level)) if float(level).is_integer() else repr(float(level))


def _json_default(obj):
    if hasattr(obj, "item"):
        return obj.item()
    if isinstance(obj, tuple):
        return list(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def read_results(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    missing = [c for c in CSV_COLUMNS[:-1] if rows and c not in rows[0]]
    if missing:
        raise ConfigError(f"{path} lacks columns {missing}")
    return rows


def report(path):
    """Convergence order of every (experiment, metric) series with at least two lattice levels."""
    groups = defaultdict(list)
    for row in read_results(path):
        groups[(row["experiment"], row["metric"])].append(row)
    lines = []
    for (exp, metric), rows in groups.items():
        hs = [float(r["h"]) for r in rows]
        vals = [float(r["value"]) for r in rows]
        levels = " ".join(r["level"] for r in rows)
        values = " ".join(f"{v:.3e}" for v in vals)
        order = ""
        if len(rows) >= 2 and all(h > 0 for h in hs) and all(v > 0 and math.isfinite(v) for v in vals) \
                and len(set(hs)) == len(hs):
            rep = convergence_report(vals, hs)
            order = f"order {rep.order:.3f}" + (" NonMonotone" if rep.non_monotone else "")
        lines.append(f"{exp:20s} {metric:28s} levels [{levels}] values [{values}] {order}".rstrip())
    return "\n".join(lines)


def main(argv=None):
    parser = argparse.ArgumentParser(prog="emelim", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run the study described by a JSON config")
    p_run.add_argument("config")
    sub.add_parser("list-presets", help="list named configurations")
    p_rep = sub.add_parser("report", help="convergence orders from a results CSV")
    p_rep.add_argument("results")
    args = parser.parse_args(argv)

    if args.command == "list-presets":
        for name, p in PRESETS.items():
            print(f"{name:20s} {p['experiment']:20s} {p['doc']}")
        return 0
    if args.command == "report":
        try:
            print(report(args.results))
        except (OSError, ConfigError) as err:
            print(f"error: {err}", file=sys.stderr)
            return 2
        return 0
    try:
        result, out = run_config(args.config)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except PipelineError as err:
        print(f"pipeline error: {err}", file=sys.stderr)
        return 3
    for c in result.checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name}: measured {c.measured} bound {c.bound}")
    print(f"results written to {out}")
    return 0 if result.passed else 1


__all__ = ["PRESETS", "load_config", "run_config", "write_results", "report", "main"]
