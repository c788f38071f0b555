"""Command-line entry point.

Each subcommand writes its CSV output and a ``manifest.json`` into
``--out-dir``. Parameters may come from a JSON config file (``--config``);
flags given on the command line take precedence and both values are
recorded in the manifest. Exit status: 0 on success, 2 on invalid
arguments, 1 on runtime failure.

Config schema::

    {"experiment": "<subcommand>",
     "params": {"<flag name>": value, ...},
     "seeds": [<int>, ...],
     "outputs": {"dir": "<path>"}}
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .contact_engine import run_contact, run_starred, sample_excursions
from .distributions import LAMBDA_MAX, DistributionError, load_distribution, size_biased
from .experiments import (ExperimentConfig, path_of_stars, percolation_grid, scaling_sweep,
                          star_suite, tail_estimate)
from .graph_gen import (RootedGraph, configuration_model, gen_egw, gen_gw_tree, gen_gwc,
                        read_graph, star_graph, star_of_stars)
from .manifest import RunManifest, replica_rng, write_csv
from .recursions import evaluate


class ConfigError(ValueError):
    """Invalid configuration; ``problems`` lists every violation found."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class UsageError(ValueError):
    pass


def _dist(text):
    """``poisson:2``, ``geometric:0.3``, ``point:3`` or a JSON object."""
    if isinstance(text, dict):
        return text
    text = str(text)
    if text.startswith("{"):
        return json.loads(text)
    fam, _, val = text.partition(":")
    key = {"poisson": "mean", "geometric": "p", "point": "k"}.get(fam)
    if key is None or not val:
        raise ValueError(f"bad distribution {text!r}")
    return {"family": fam, key: int(val) if fam == "point" else float(val)}


def _int_list(text):
    if isinstance(text, list):
        return [int(x) for x in text]
    return [int(float(x)) for x in str(text).split(",") if x]


# name -> (type, default, help); None default means required
PARAMS = {
    "gen": {
        "shape": (str, None, "config | gw | gwc1 | gwc2 | egw | star | pathstars"),
        "n": (int, 1000, "vertices (config)"),
        "dist": (_dist, "poisson:2", "degree / offspring law, e.g. poisson:2"),
        "depth": (int, 3, "tree depth (gw)"),
        "m": (int, 3, "cycle length (gwc, egw)"),
        "l": (int, 2, "tree depth below the cycle (gwc)"),
        "h": (int, 1, "grafting depth (egw)"),
        "k": (int, 10, "leaves per star"),
        "L": (int, 4, "spine length (pathstars, egw total depth)"),
    },
    "simulate": {
        "graph": (str, None, "graph file"),
        "lambda": (float, None, "infection rate"),
        "process": (str, "contact", "contact | starred | root-added"),
        "initial": (str, "all", "all | root | comma-separated vertex ids"),
        "reps": (int, 1, "replicas"),
        "horizon": (float, math.inf, "time horizon"),
        "l": (int, -1, "leaf level counted in root-added runs (-1: none)"),
    },
    "recursion": {
        "tree": (str, None, "rooted graph file"),
        "lambda": (float, None, "infection rate"),
        "mode": (str, "S", "S | M"),
        "l": (int, 0, "leaf level for mode M"),
    },
    "star": {
        "k": (int, None, "leaves"),
        "lambda": (float, None, "infection rate"),
        "reps": (int, 500, "replicas"),
        "M": (int, -1, "persistent leaf count (-1: ceil(32/lambda))"),
        "C": (float, 1.0, "constant in the C log k threshold"),
    },
    "percolation": {
        "L": (int, None, "grid width"),
        "p": (float, None, "edge open probability"),
        "horizon": (int, None, "number of layers"),
        "reps": (int, 100, "replicas"),
    },
    "pathstars": {
        "L": (int, None, "number of stars"),
        "k": (int, None, "leaves per star"),
        "lambda": (float, None, "infection rate"),
        "reps": (int, 200, "replicas"),
        "horizon": (float, 100.0, "censoring time"),
        "epoch": (float, 1.0, "epoch length for the coupling indicators"),
    },
    "scaling": {
        "dist": (_dist, None, "degree law, e.g. poisson:4"),
        "lambda": (float, None, "infection rate"),
        "n": (_int_list, None, "comma-separated graph sizes"),
        "reps": (int, 20, "replicas per size"),
        "horizon": (float, 1e4, "censoring time"),
    },
    "tail": {
        "dist": (_dist, "poisson:2", "offspring law of the root"),
        "lambda": (float, 0.05, "infection rate"),
        "depth": (int, 3, "tree depth"),
        "reps": (int, 10000, "samples"),
        "kind": (str, "S", "S | M | product"),
    },
}
GUARDED = {"star", "pathstars", "scaling", "tail"}


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="contactlab", description="Contact-process experiments.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", metavar="COMMAND")
    for cmd, spec in PARAMS.items():
        sp = sub.add_parser(cmd, help=f"run {cmd}")
        for name, (_, default, help_) in spec.items():
            sp.add_argument(f"--{name}", dest=name, default=None, help=help_ +
                            ("" if default is None else f" (default {default})"))
        sp.add_argument("--config", default=None, help="JSON config file")
        sp.add_argument("--seed", type=int, default=None, help="master seed (default 0)")
        sp.add_argument("--out-dir", default=None, help="output directory (default ./out)")
        sp.add_argument("--out", default=None, help="output file name inside --out-dir (gen only)")
        sp.add_argument("--workers", type=int, default=0,
                        help="worker processes (default 0: all available cores)")
    return p


def _convert(cmd: str, name: str, value, problems: list):
    typ = PARAMS[cmd][name][0]
    try:
        return typ(value)
    except (TypeError, ValueError, json.JSONDecodeError) as exc:
        problems.append(f"{name}: cannot parse {value!r} ({exc})")
        return None


def _check_values(cmd: str, params: dict, problems: list) -> None:
    if "reps" in params and params["reps"] is not None and params["reps"] < 1:
        problems.append("reps: must be at least 1")
    lam = params.get("lambda")
    if lam is not None:
        if lam < 0:
            problems.append("lambda: must be nonnegative")
        elif cmd in GUARDED and lam > LAMBDA_MAX:
            problems.append(f"lambda: {lam} exceeds the guard lambda <= {LAMBDA_MAX}")
    if cmd == "percolation" and params.get("p") is not None and not 0 <= params["p"] <= 1:
        problems.append("p: must lie in [0, 1]")
    for name in ("dist",):
        if params.get(name) is not None:
            try:
                load_distribution(params[name])
            except (DistributionError, KeyError, TypeError, ValueError) as exc:
                problems.append(f"{name}: {exc}")


def validate_config(data) -> ExperimentConfig:
    """Validate a parsed config, collecting every problem before raising."""
    problems = []
    if not isinstance(data, dict):
        raise ConfigError(["config must be a JSON object"])
    known = {"experiment", "params", "seeds", "outputs"}
    problems += [f"unknown top-level key {k!r}" for k in data if k not in known]
    cmd = data.get("experiment")
    if cmd not in PARAMS:
        problems.append(f"experiment: {cmd!r} is not one of {sorted(PARAMS)}")
    raw = data.get("params", {})
    if not isinstance(raw, dict):
        problems.append("params: must be an object")
        raw = {}
    seeds = data.get("seeds", [0])
    if not isinstance(seeds, list) or not seeds or not all(isinstance(s, int) and s >= 0 for s in seeds):
        problems.append("seeds: must be a nonempty list of nonnegative integers")
    outputs = data.get("outputs", {})
    if not isinstance(outputs, dict):
        problems.append("outputs: must be an object")
        outputs = {}
    params = {}
    if cmd in PARAMS:
        for name, value in raw.items():
            if name not in PARAMS[cmd]:
                problems.append(f"params: unknown parameter {name!r} for {cmd}")
                continue
            params[name] = _convert(cmd, name, value, problems)
        _check_values(cmd, params, problems)
    if problems:
        raise ConfigError(problems)
    return ExperimentConfig(cmd, params, seeds, outputs)


def load_config(path) -> ExperimentConfig:
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError([f"cannot read {path}: {exc}"]) from exc
    except json.JSONDecodeError as exc:
        raise ConfigError([f"{path} is not valid JSON: {exc}"]) from exc
    return validate_config(data)


def effective_config(cmd: str, args: argparse.Namespace):
    """Merge defaults, config file and flags (flags win); returns (config, overrides)."""
    file_cfg = load_config(args.config) if args.config else ExperimentConfig(cmd)
    if file_cfg.experiment != cmd:
        raise ConfigError([f"config is for {file_cfg.experiment!r}, not {cmd!r}"])
    problems = []
    flags = {}
    for name in PARAMS[cmd]:
        v = getattr(args, name)
        if v is not None:
            flags[name] = _convert(cmd, name, v, problems)
    _check_values(cmd, flags, problems)
    params, overrides = {}, {}
    for name, (typ, default, _) in PARAMS[cmd].items():
        if name in flags:
            params[name] = flags[name]
            if name in file_cfg.params:
                overrides[name] = {"file": file_cfg.params[name], "flag": flags[name]}
        elif name in file_cfg.params:
            params[name] = file_cfg.params[name]
        elif default is None:
            problems.append(f"missing required parameter --{name}")
        else:
            params[name] = typ(default) if not isinstance(default, float) else default
    if problems:
        raise ConfigError(problems)
    seeds = [args.seed] if args.seed is not None else file_cfg.seeds
    out_dir = args.out_dir or file_cfg.outputs.get("dir") or "out"
    cfg = ExperimentConfig(cmd, params, seeds, {"dir": str(out_dir)})
    return cfg, overrides


def _prepare_dir(path) -> Path:
    path = Path(path)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise UsageError(f"cannot create output directory {path}: {exc}") from exc
    if not os.access(path, os.W_OK):
        raise UsageError(f"output directory {path} is not writable")
    return path


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def _cmd_gen(cfg, args, man):
    p = cfg.params
    rng = replica_rng(cfg.seeds[0], 0)
    shape = p["shape"]
    law = load_distribution(p["dist"])
    if shape == "config":
        g = configuration_model(p["n"], law, rng)
    elif shape == "gw":
        g = gen_gw_tree(law, law, p["depth"], rng)
    elif shape in ("gwc1", "gwc2"):
        g = gen_gwc(int(shape[-1]), law, p["m"], p["l"], rng)
    elif shape == "egw":
        g = gen_egw(law, size_biased(law), p["h"], p["m"], p["L"], rng)
    elif shape == "star":
        g = star_graph(p["k"])
    elif shape == "pathstars":
        g = star_of_stars(p["L"], p["k"])
    else:
        raise UsageError(f"unknown shape {shape!r}")
    name = args.out or "graph.txt"
    if Path(name).name != name:
        raise UsageError("--out is a file name inside --out-dir")
    target = Path(cfg.outputs["dir"]) / name
    g.write(target)
    man.add_output(target)
    return {"vertices": g.n}


def _initial(spec: str, g) -> list:
    if spec == "all":
        base = g.graph if isinstance(g, RootedGraph) else g
        return list(range(base.n))
    if spec == "root":
        if not isinstance(g, RootedGraph):
            raise UsageError("--initial root needs a rooted graph file")
        return [g.root]
    return [int(x) for x in spec.split(",") if x]


def _cmd_simulate(cfg, args, man):
    p = cfg.params
    g = read_graph(p["graph"])
    out = Path(cfg.outputs["dir"])
    rows = []
    proc = p["process"]
    if proc == "root-added":
        if not isinstance(g, RootedGraph):
            raise UsageError("root-added runs need a rooted graph file")
        s = sample_excursions(g, p["lambda"], p["reps"], replica_rng(cfg.seeds[0], 0),
                              l=None if p["l"] < 0 else p["l"], horizon=p["horizon"])
        rows = [{"replica": i, "time": float(t), "leaf_count": int(c), "censored": bool(x)}
                for i, (t, c, x) in enumerate(zip(s.times, s.counts, s.censored))]
    elif proc in ("contact", "starred"):
        plain = g.graph if isinstance(g, RootedGraph) else g
        init = _initial(p["initial"], g)
        fn = run_contact if proc == "contact" else run_starred
        for i in range(p["reps"]):
            run = fn(plain, p["lambda"], init, horizon=p["horizon"],
                     rng=replica_rng(cfg.seeds[0], i), record=i == 0)
            if i == 0:
                path = out / "trajectory.csv"
                run.trajectory.to_csv(path)
                man.add_output(path)
            rows.append({"replica": i, "time": run.report.survival_time,
                         "censored": run.report.censored})
    else:
        raise UsageError(f"unknown process {proc!r}")
    path = out / "runs.csv"
    write_csv(path, rows)
    man.add_output(path)
    return {"mean_time": float(np.mean([r["time"] for r in rows]))}


def _cmd_recursion(cfg, args, man):
    p = cfg.params
    g = read_graph(p["tree"])
    if not isinstance(g, RootedGraph):
        raise UsageError("recursion needs a rooted graph file")
    mode = p["mode"].upper()
    if mode not in ("S", "M"):
        raise UsageError("--mode must be S or M")
    res = evaluate(g, p["lambda"], p["l"] if mode == "M" else None)
    value = res.root_S if mode == "S" else res.root_M
    print(repr(value))
    path = Path(cfg.outputs["dir"]) / "recursion.json"
    path.write_text(json.dumps({"mode": mode, "value": value, **res.to_json()}, indent=2) + "\n")
    man.add_output(path)
    return {"value": value}


def _cmd_star(cfg, args, man):
    p = cfg.params
    rep = star_suite(p["k"], p["lambda"], p["reps"], replica_rng(cfg.seeds[0], 0),
                     M=None if p["M"] < 0 else p["M"], C=p["C"])
    path = Path(cfg.outputs["dir"]) / "star.csv"
    write_csv(path, rep.rows(), ["quantity", "value", "hits", "trials", "lo", "hi"])
    man.add_output(path)
    return {"median_survival": rep.median_survival}


def _cmd_percolation(cfg, args, man):
    p = cfg.params
    freq = percolation_grid(p["L"], p["p"], p["horizon"], p["reps"], cfg.seeds[0])
    path = Path(cfg.outputs["dir"]) / "percolation.csv"
    write_csv(path, [{"L": p["L"], "p_open": p["p"], "horizon": p["horizon"],
                      "reps": p["reps"], "frequency": freq}])
    man.add_output(path)
    return {"frequency": freq}


def _cmd_pathstars(cfg, args, man):
    p = cfg.params
    rep = path_of_stars(p["L"], p["k"], p["lambda"], p["reps"], p["horizon"],
                        replica_rng(cfg.seeds[0], 0), epoch=p["epoch"])
    path = Path(cfg.outputs["dir"]) / "pathstars.csv"
    write_csv(path, [rep.row()])
    man.add_output(path)
    return rep.row()


def _cmd_scaling(cfg, args, man):
    p = cfg.params
    res = scaling_sweep(load_distribution(p["dist"]), p["lambda"], p["n"], p["reps"],
                        cfg.seeds[0], p["horizon"], args.workers)
    path = Path(cfg.outputs["dir"]) / "scaling.csv"
    write_csv(path, res["rows"])
    man.add_output(path)
    return {"slope_loglog": res["slope_loglog"], "slope_log": res["slope_log"]}


def _cmd_tail(cfg, args, man):
    p = dict(cfg.params)
    p["xi"] = p.pop("dist")
    table = tail_estimate(ExperimentConfig("tail", p, cfg.seeds))
    path = Path(cfg.outputs["dir"]) / "tail.csv"
    write_csv(path, table.rows())
    man.add_output(path)
    return {"rows": len(table.grid)}


COMMANDS = {"gen": _cmd_gen, "simulate": _cmd_simulate, "recursion": _cmd_recursion,
            "star": _cmd_star, "percolation": _cmd_percolation, "pathstars": _cmd_pathstars,
            "scaling": _cmd_scaling, "tail": _cmd_tail}


def execute(argv=None) -> int:
    """Run one subcommand; returns the exit status."""
    parser = _parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv:
        parser.print_usage(sys.stderr)
        return 2
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    if args.workers < 0:
        print(f"contactlab {args.command}: error: --workers must be nonnegative", file=sys.stderr)
        return 2
    if args.workers == 0:
        args.workers = os.cpu_count() or 1
    try:
        cfg, overrides = effective_config(args.command, args)
        out = _prepare_dir(cfg.outputs["dir"])
    except (ConfigError, UsageError) as exc:
        print(f"contactlab {args.command}: error: {exc}", file=sys.stderr)
        return 2
    man = RunManifest(args.command, cfg.params, cfg.seeds, overrides=overrides)
    man.extra["workers"] = args.workers
    try:
        man.extra["summary"] = COMMANDS[args.command](cfg, args, man)
    except UsageError as exc:
        print(f"contactlab {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure
        print(f"contactlab {args.command}: failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    man.write(out / "manifest.json")
    return 0


def main() -> None:
    sys.exit(execute())


if __name__ == "__main__":
    main()
