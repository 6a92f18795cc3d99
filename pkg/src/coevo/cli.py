"""Command-line front end.

Every subcommand resolves its settings from built-in defaults, then an
optional JSON config (``--config``), then explicit flags, and embeds the
resolved settings in what it writes so a run can be repeated from its own
output.  Exit status: 0 success, 1 negative verdict, 2 usage or input error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .dynamics import ActivationSchedule, ControlSets, simulate
from .equilibrium import run_algorithm1
from .network import (LayeredNetwork, ModelParams, NetworkError, load_edge_list,
                      load_network_dump, make_complete, make_family, validate_network)
from .search import (AdmissibilityOracle, SearchConfig, brute_force_minimum,
                     greedy_centrality_baseline, merge_results, minimize_control_set)
from .thresholds import SCENARIOS, sweep_complete, sweep_csv

SCHEMA_VERSION = 1

DEFAULTS = {
    "network": None,
    "opinion_network": None,
    "generator": None,
    "layer_mode": "shared",
    "weight_mode": "raw",
    "directed": False,
    "largest_component": False,
    "lambda": 0.5,
    "beta": 0.5,
    "cx": "none",
    "cy": "none",
    "vx": "all",
    "vy": "all",
    "schedule": "synchronous",
    "horizon": None,
    "stride": 1,
    "epsilon": 0.1,
    "decay": None,
    "iters": 10000,
    "chains": 1,
    "seed": 0,
    "out": ".",
    "jobs": 1,
    "oracle": False,
    "grid": "0.1:0.9:9",
    "n": 21,
    "layer": "A",
    "alpha": None,
}


class ConfigError(Exception):
    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


# ---------------------------------------------------------------- resolution

def _load_config_file(path):
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise ConfigError("config", f"file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config", "top level must be an object")
    version = data.pop("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError("schema_version", f"unsupported version {version!r}")
    data.pop("command", None)
    unknown = sorted(set(data) - set(DEFAULTS))
    if unknown:
        raise ConfigError(unknown[0], "unknown setting")
    return data


def resolve(args) -> dict:
    cfg = dict(DEFAULTS)
    if args.config:
        cfg.update(_load_config_file(args.config))
    for key in DEFAULTS:
        v = getattr(args, key, None)
        if v is not None:
            cfg[key] = v
    if cfg["network"] is None and cfg["generator"] is None and args.command != "sweep":
        raise ConfigError("network", "give --network FILE or --generator SPEC")
    if cfg["network"] is not None and cfg["generator"] is not None:
        raise ConfigError("network", "--network and --generator are mutually exclusive")
    return cfg


def _int(field, s):
    try:
        return int(s)
    except (TypeError, ValueError):
        raise ConfigError(field, f"expected an integer, got {s!r}") from None


def _float(field, s):
    try:
        return float(s)
    except (TypeError, ValueError):
        raise ConfigError(field, f"expected a number, got {s!r}") from None


def parse_generator(spec: str) -> LayeredNetwork:
    """``complete:n``, ``ring:n``, ``star:n``, ``random_regularized:n:seed[:density]``,
    ``contact:n:edges:seed``."""
    parts = str(spec).split(":")
    kind, rest = parts[0], parts[1:]
    try:
        if kind == "complete" and len(rest) == 1:
            return make_complete(_int("generator", rest[0]))
        if kind in ("ring", "star") and len(rest) == 1:
            return make_family(kind, _int("generator", rest[0]))
        if kind == "random_regularized" and len(rest) in (2, 3):
            density = _float("generator", rest[2]) if len(rest) == 3 else 0.3
            return make_family(kind, _int("generator", rest[0]), _int("generator", rest[1]), density=density)
        if kind == "contact" and len(rest) == 3:
            return make_family(kind, _int("generator", rest[0]), _int("generator", rest[2]),
                               edges=_int("generator", rest[1]))
    except ValueError as exc:
        raise ConfigError("generator", str(exc)) from None
    raise ConfigError("generator", f"cannot parse {spec!r}")


def _is_dump(path):
    with open(path, encoding="utf-8") as fh:
        return fh.readline().startswith("# coevo layered network")


def build_network(cfg) -> LayeredNetwork:
    if cfg["generator"] is not None:
        return parse_generator(cfg["generator"])
    path = cfg["network"]
    if not os.path.exists(path):
        raise ConfigError("network", f"file not found: {path}")
    if cfg["opinion_network"] is not None and not os.path.exists(cfg["opinion_network"]):
        raise ConfigError("opinion_network", f"file not found: {cfg['opinion_network']}")
    try:
        if _is_dump(path):
            return load_network_dump(path)
        return load_edge_list(path, cfg["layer_mode"], cfg["weight_mode"],
                              opinion_source=cfg["opinion_network"],
                              undirected=not cfg["directed"],
                              largest_component=cfg["largest_component"])
    except (NetworkError, ValueError) as exc:
        raise ConfigError("network", str(exc)) from None


def _per_node(field, value, n):
    if isinstance(value, (int, float)):
        return np.full(n, float(value))
    if isinstance(value, list):
        arr = np.array([_float(field, v) for v in value])
    else:
        try:
            return np.full(n, float(value))
        except ValueError:
            pass
        if not os.path.exists(value):
            raise ConfigError(field, f"neither a number nor an existing file: {value!r}")
        with open(value, encoding="utf-8") as fh:
            tokens = fh.read().replace(",", " ").split()
        arr = np.array([_float(field, t) for t in tokens])
    if arr.shape != (n,):
        raise ConfigError(field, f"expected {n} per-node values, got {arr.size}")
    return arr


def build_params(cfg, net) -> ModelParams:
    try:
        return ModelParams(_per_node("lambda", cfg["lambda"], net.n), _per_node("beta", cfg["beta"], net.n))
    except ValueError as exc:
        raise ConfigError("lambda/beta", str(exc)) from None


def node_set(field, value, net) -> frozenset:
    """``all``, ``none``, a comma-separated label list, or a JSON list of labels."""
    if value is None or value == "none" or value == "":
        return frozenset()
    if value == "all":
        return frozenset(range(net.n))
    items = value if isinstance(value, list) else str(value).split(",")
    out = set()
    for item in items:
        try:
            out.add(net.index_of(str(item).strip()))
        except KeyError:
            raise ConfigError(field, f"unknown node label {item!r}") from None
    return frozenset(out)


def parse_schedule(spec: str) -> ActivationSchedule:
    """``synchronous``, ``round_robin``, ``uniform_random_single[:window]``,
    ``uniform_random_subset:k[:window]``."""
    parts = str(spec).split(":")
    kind = parts[0]
    try:
        if kind in ("synchronous", "round_robin") and len(parts) == 1:
            return ActivationSchedule(kind)
        if kind == "uniform_random_single" and len(parts) <= 2:
            return ActivationSchedule(kind, window=_int("schedule", parts[1]) if len(parts) == 2 else None)
        if kind == "uniform_random_subset" and len(parts) in (2, 3):
            return ActivationSchedule(kind, k=_int("schedule", parts[1]),
                                      window=_int("schedule", parts[2]) if len(parts) == 3 else None)
    except ValueError as exc:
        raise ConfigError("schedule", str(exc)) from None
    raise ConfigError("schedule", f"cannot parse {spec!r}")


def parse_grid(spec: str) -> np.ndarray:
    try:
        lo, hi, k = spec.split(":")
        lo, hi, k = float(lo), float(hi), int(k)
    except ValueError:
        raise ConfigError("grid", f"expected LO:HI:STEPS, got {spec!r}") from None
    if k < 1 or not (0 < lo <= hi <= 1):
        raise ConfigError("grid", "need 0 < LO <= HI <= 1 and STEPS >= 1")
    if k == 1:
        return np.array([lo])
    return np.round(np.linspace(lo, hi, k), 12)


# ---------------------------------------------------------------- output

def _outdir(cfg):
    path = cfg["out"]
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as exc:
        raise ConfigError("out", str(exc)) from None
    return path


def _write(cfg, name, text):
    with open(os.path.join(_outdir(cfg), name), "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _write_json(cfg, name, payload, command):
    payload = dict(payload)
    payload["config"] = {"schema_version": SCHEMA_VERSION, "command": command, **cfg}
    _write(cfg, name, json.dumps(payload, indent=2, sort_keys=True, default=_jsonable) + "\n")


def _jsonable(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, (frozenset, set, np.ndarray)):
        return sorted(v) if not isinstance(v, np.ndarray) else v.tolist()
    raise TypeError(f"cannot serialize {type(v).__name__}")


def _labels(net, nodes):
    return [net.labels[i] for i in sorted(nodes)]


# ---------------------------------------------------------------- commands

def cmd_validate(cfg) -> int:
    net = build_network(cfg)
    rep = validate_network(net)
    _write_json(cfg, "validation.json", {"n": net.n, **rep.to_dict()}, "validate")
    print("ok" if rep.ok else "failed")
    return 0 if rep.ok else 1


def cmd_simulate(cfg) -> int:
    net = build_network(cfg)
    params = build_params(cfg, net)
    control = ControlSets(node_set("cx", cfg["cx"], net), node_set("cy", cfg["cy"], net))
    schedule = parse_schedule(cfg["schedule"])
    T = schedule.window_for(net.n)
    horizon = _int("horizon", cfg["horizon"]) if cfg["horizon"] is not None else 5000 * T
    if horizon < 1 or _int("stride", cfg["stride"]) < 1:
        raise ConfigError("horizon", "horizon and stride must be positive")
    traj = simulate(net, params, control, schedule, horizon, _int("seed", cfg["seed"]),
                    stride=int(cfg["stride"]))
    _write(cfg, "trajectory.csv", traj.to_csv())
    meta = traj.metadata()
    meta.pop("backend")
    meta["final_x"] = traj.final.x.tolist()
    meta["consensus"] = bool(np.all(traj.final.x == 1))
    _write_json(cfg, "trajectory.json", meta, "simulate")
    print(f"steps={traj.steps} stop={traj.stop_reason} consensus={int(meta['consensus'])}")
    return 0


def cmd_check(cfg) -> int:
    net = build_network(cfg)
    params = build_params(cfg, net)
    CX, CY = node_set("cx", cfg["cx"], net), node_set("cy", cfg["cy"], net)
    try:
        rep = run_algorithm1(net, params, CX, CY)
    except NetworkError as exc:
        raise ConfigError("network", str(exc)) from None
    _write_json(cfg, "equilibrium.json", rep.to_dict(), "check")
    print(f"phi={rep.phi}")
    return 0


def _chain(args):
    net, params, VX, VY, config, chain = args
    return minimize_control_set(net, params, VX, VY, config, chain=chain)


def cmd_minimize(cfg) -> int:
    net = build_network(cfg)
    params = build_params(cfg, net)
    VX, VY = node_set("vx", cfg["vx"], net), node_set("vy", cfg["vy"], net)
    try:
        config = SearchConfig(_float("epsilon", cfg["epsilon"]), _int("iters", cfg["iters"]),
                              _int("seed", cfg["seed"]),
                              None if cfg["decay"] is None else _float("decay", cfg["decay"]))
    except ValueError as exc:
        raise ConfigError("epsilon/iters", str(exc)) from None
    chains, jobs = _int("chains", cfg["chains"]), _int("jobs", cfg["jobs"])
    if chains < 1 or jobs < 1:
        raise ConfigError("chains", "chains and jobs must be positive")
    try:
        AdmissibilityOracle(net, params, VX, VY)
    except NetworkError as exc:
        raise ConfigError("network", str(exc)) from None
    work = [(net, params, VX, VY, config, c) for c in range(chains)]
    if jobs > 1 and chains > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, chains)) as pool:
            results = list(pool.map(_chain, work))
    else:
        results = [_chain(w) for w in work]
    best = merge_results(results)
    payload = best.to_dict(net.labels)
    payload["chains"] = [{"chain": r.chain, "size": r.size, "wall_time": r.wall_time} for r in results]
    if best.feasible:
        payload["CX_labels"] = _labels(net, best.CX)
        payload["CY_labels"] = _labels(net, best.CY)
        _write(cfg, "trace.csv", best.trace.to_csv())
    if cfg["oracle"]:
        opt = brute_force_minimum(net, params, VX, VY)
        payload["oracle"] = {"minimum_size": len(opt[0]) if opt else None,
                             "minimizers": [sorted(s) for s in opt]}
    _write_json(cfg, "result.json", payload, "minimize")
    if not best.feasible:
        print("infeasible")
        return 1
    print(f"size={best.size} fraction={best.size / net.n:.4f} wall_time={best.wall_time:.2f}s")
    return 0


def _sweep_one(args):
    grid, n, scenario = args
    return scenario, sweep_csv(sweep_complete(grid, grid, n, scenario))


def cmd_sweep(cfg) -> int:
    grid = parse_grid(cfg["grid"])
    n = _int("n", cfg["n"])
    if n < 2:
        raise ConfigError("n", "complete graph needs n >= 2")
    work = [(grid, n, s) for s in SCENARIOS]
    jobs = _int("jobs", cfg["jobs"])
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(work))) as pool:
            out = list(pool.map(_sweep_one, work))
    else:
        out = [_sweep_one(w) for w in work]
    for scenario, text in out:
        _write(cfg, f"sweep_{scenario}.csv", text)
    _write_json(cfg, "sweep.json", {"files": [f"sweep_{s}.csv" for s in SCENARIOS]}, "sweep")
    print(f"wrote {len(out)} tables of {len(grid) ** 2} cells")
    return 0


def cmd_greedy(cfg) -> int:
    net = build_network(cfg)
    params = build_params(cfg, net)
    VX, VY = node_set("vx", cfg["vx"], net), node_set("vy", cfg["vy"], net)
    alpha = None if cfg["alpha"] is None else _float("alpha", cfg["alpha"])
    try:
        res = greedy_centrality_baseline(net, params, VX, VY, layer=cfg["layer"], alpha=alpha)
    except NetworkError as exc:
        raise ConfigError("network", str(exc)) from None
    except ValueError as exc:
        raise ConfigError("alpha", str(exc)) from None
    payload = res.to_dict(net.labels)
    payload["centrality"] = res.centrality.tolist()
    _write_json(cfg, "greedy.json", payload, "greedy")
    if not res.feasible:
        print("infeasible")
        return 1
    print(f"size={res.size} fraction={res.size / net.n:.4f}")
    return 0


COMMANDS = {
    "validate": cmd_validate,
    "simulate": cmd_simulate,
    "check": cmd_check,
    "minimize": cmd_minimize,
    "sweep": cmd_sweep,
    "greedy": cmd_greedy,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON settings file; flags override it")
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int)
    common.add_argument("--jobs", type=int)
    net = argparse.ArgumentParser(add_help=False)
    net.add_argument("--network", help="edge list (src,dst[,weight]) or network dump")
    net.add_argument("--opinion-network", dest="opinion_network",
                     help="second edge list for the opinion layer (with --layer-mode split)")
    net.add_argument("--generator", help="e.g. complete:5, ring:8, random_regularized:8:1, contact:84:346:0")
    net.add_argument("--layer-mode", dest="layer_mode", choices=("shared", "split"))
    net.add_argument("--weight-mode", dest="weight_mode", choices=("raw", "binary"))
    net.add_argument("--directed", action="store_const", const=True)
    net.add_argument("--largest-component", dest="largest_component", action="store_const", const=True)
    model = argparse.ArgumentParser(add_help=False)
    model.add_argument("--lambda", dest="lambda", help="number or file with one value per node")
    model.add_argument("--beta", help="number or file with one value per node")
    pins = argparse.ArgumentParser(add_help=False)
    pins.add_argument("--cx", help="action-controlled nodes: labels, 'all' or 'none'")
    pins.add_argument("--cy", help="opinion-controlled nodes: labels, 'all' or 'none'")
    allowed = argparse.ArgumentParser(add_help=False)
    allowed.add_argument("--vx", help="nodes whose action may be controlled")
    allowed.add_argument("--vy", help="nodes whose opinion may be controlled")

    p = argparse.ArgumentParser(prog="coevo", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("validate", parents=[common, net], help="check row sums and strong connectivity")
    s = sub.add_parser("simulate", parents=[common, net, model, pins], help="run the controlled dynamics")
    s.add_argument("--schedule")
    s.add_argument("--horizon", type=int)
    s.add_argument("--stride", type=int)
    sub.add_parser("check", parents=[common, net, model, pins], help="decide phi for given control sets")
    m = sub.add_parser("minimize", parents=[common, net, model, allowed], help="search for a small control set")
    m.add_argument("--epsilon", type=float)
    m.add_argument("--decay", type=float)
    m.add_argument("--iters", type=int)
    m.add_argument("--chains", type=int)
    m.add_argument("--oracle", action="store_const", const=True, help="also report the exhaustive optimum")
    w = sub.add_parser("sweep", parents=[common], help="complete-graph thresholds over a (lambda, beta) grid")
    w.add_argument("--grid", help="LO:HI:STEPS for both lambda and beta")
    w.add_argument("--n", type=int)
    g = sub.add_parser("greedy", parents=[common, net, model, allowed], help="centrality-ranked baseline")
    g.add_argument("--layer", choices=("A", "W"))
    g.add_argument("--alpha", type=float)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve(args)
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
