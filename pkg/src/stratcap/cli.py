"""Command-line driver.

``stratcap run`` executes registered checks and writes one JSON report per
check (plus a CSV file for checks that produce a table) and ``summary.json``.
Configuration is an INI file; command-line flags override its keys. Exit
codes: 0 all checks passed, 1 some check failed, 2 bad configuration.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import capacity as cap
from . import embedding as emb
from . import semigroups as sg
from .checks import REGISTRY, CheckContext, check_ids, run_check
from .errors import StratcapError
from .grid import Grid, build_sublaplacian, write_grid_function
from .suites import standard_suite

__all__ = ["main", "load_config", "ConfigError", "DEFAULTS"]


class ConfigError(Exception):
    """Malformed configuration file or flag value."""


def _floats(text: str) -> tuple:
    return tuple(float(x) for x in text.replace(",", " ").split())


def _checks(text: str) -> tuple:
    return tuple(x.strip() for x in text.replace("\n", ",").split(",") if x.strip())


SCHEMA = {
    "run": {"checks": _checks, "output": str, "seed": int, "workers": int},
    "grid": {"group": str, "points": int, "half_width": float, "boundary": str, "h1_points": int},
    "params": {"alphas": _floats, "sigmas": _floats, "s_values": _floats, "p": float, "q": float, "beta": float},
    "suite": {"count": int, "seed": int},
    "files": {"set": str, "measure": str},
}

DEFAULTS = {
    "run": {"checks": None, "output": "stratcap-out", "seed": 0, "workers": 1},
    "grid": {"group": "r1", "points": 128, "half_width": 1.0, "boundary": "dirichlet", "h1_points": 12},
    "params": {"alphas": (0.3, 0.5, 0.8), "sigmas": (0.3, 0.5, 0.8), "s_values": (0.2, 0.4),
               "p": 2.0, "q": 2.0, "beta": 0.3},
    "suite": {"count": 10, "seed": 0},
    "files": {"set": None, "measure": None},
}


def load_config(path=None) -> dict:
    """Defaults overlaid with an INI file; unknown sections or keys are errors."""
    cfg = {sec: dict(vals) for sec, vals in DEFAULTS.items()}
    if path is None:
        return cfg
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    for sec in parser.sections():
        if sec not in SCHEMA:
            raise ConfigError(f"unknown section [{sec}]")
        for key, raw in parser.items(sec):
            if key not in SCHEMA[sec]:
                raise ConfigError(f"unknown key '{key}' in section [{sec}]")
            try:
                cfg[sec][key] = SCHEMA[sec][key](raw)
            except ValueError as exc:
                raise ConfigError(f"bad value for {sec}.{key}: {raw!r}") from exc
    _validate(cfg)
    return cfg


def _validate(cfg):
    g = cfg["grid"]
    if g["group"] not in ("r1", "r2", "h1"):
        raise ConfigError(f"grid.group must be r1, r2 or h1, got {g['group']!r}")
    if g["boundary"] not in ("dirichlet", "periodic"):
        raise ConfigError(f"grid.boundary must be dirichlet or periodic, got {g['boundary']!r}")
    if g["points"] < 2 or g["h1_points"] < 2 or g["half_width"] <= 0:
        raise ConfigError("grid sizes must be at least 2 and half_width positive")
    prm = cfg["params"]
    if any(not 0 < a <= 1 for a in prm["alphas"]) or any(not 0 < s < 1 for s in prm["sigmas"]):
        raise ConfigError("alphas must lie in (0, 1] and sigmas in (0, 1)")
    if prm["p"] <= 1 or prm["q"] <= 0 or prm["beta"] <= 0:
        raise ConfigError("need p > 1, q > 0, beta > 0")
    if cfg["suite"]["count"] < 1 or cfg["run"]["workers"] < 1:
        raise ConfigError("suite.count and run.workers must be positive")
    checks = cfg["run"]["checks"]
    if checks is not None:
        unknown = [c for c in checks if c not in REGISTRY]
        if unknown:
            raise ConfigError(f"unknown check ids: {', '.join(unknown)}")


def _override(cfg, args, mapping):
    for attr, (sec, key) in mapping.items():
        val = getattr(args, attr, None)
        if val is not None:
            cfg[sec][key] = val
    _validate(cfg)


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return float(x)
    if x is None or isinstance(x, str):
        return x
    return str(x)


def dumps(obj) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2) + "\n"


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_table(path: Path, table: dict) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(table["header"])
        for row in table["rows"]:
            w.writerow([_cell(v) for v in row])


def _context(cfg) -> CheckContext:
    g, prm = cfg["grid"], cfg["params"]
    return CheckContext(points=g["points"], half_width=g["half_width"], h1_points=g["h1_points"],
                        alphas=prm["alphas"], sigmas=prm["sigmas"], s_values=prm["s_values"],
                        p=prm["p"], q=prm["q"], beta=prm["beta"], suite_count=cfg["suite"]["count"],
                        seed=cfg["run"]["seed"])


def _safe_run(cid, ctx):
    try:
        return run_check(cid, ctx)
    except (StratcapError, ValueError, ArithmeticError) as exc:
        chk = REGISTRY[cid]
        return {"id": cid, "anchor": chk.anchor, "passed": False, "metrics": {},
                "error": f"{type(exc).__name__}: {exc}"}


def run_checks(cfg, out=None) -> int:
    out = out or sys.stdout
    ids = list(cfg["run"]["checks"]) if cfg["run"]["checks"] is not None else check_ids()
    outdir = Path(cfg["run"]["output"])
    outdir.mkdir(parents=True, exist_ok=True)
    ctx = _context(cfg)
    workers = cfg["run"]["workers"]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda c: _safe_run(c, ctx), ids))
    else:
        results = [_safe_run(c, ctx) for c in ids]
    summary = []
    for res in results:
        table = res.pop("table", None)
        if table is not None:
            write_table(outdir / f"{res['id']}.csv", table)
            res["table_file"] = f"{res['id']}.csv"
        (outdir / f"{res['id']}.json").write_text(dumps(res), encoding="utf-8")
        summary.append({"id": res["id"], "anchor": res["anchor"], "passed": res["passed"]})
        print(f"{'PASS' if res['passed'] else 'FAIL'}  {res['id']}", file=out)
    failed = [s["id"] for s in summary if not s["passed"]]
    (outdir / "summary.json").write_text(
        dumps({"checks": summary, "failed": failed, "passed": not failed}), encoding="utf-8")
    if failed:
        print(f"failed checks: {', '.join(failed)}", file=sys.stderr)
        return 1
    return 0


# ------------------------------------------------------------ subcommands
def _operator(cfg):
    g = cfg["grid"]
    pts = g["h1_points"] if g["group"] == "h1" else g["points"]
    return build_sublaplacian(Grid(g["group"], pts, g["half_width"], g["boundary"]))


def _cmd_kernel(cfg, args) -> int:
    op = _operator(cfg)
    if args.family == "heat":
        apply, params = sg.heat_apply, {"op": op, "t": args.t}
    elif args.family == "frac-heat":
        apply, params = sg.frac_heat_apply, {"op": op, "alpha": args.param, "t": args.t}
    else:
        apply, params = sg.poisson_apply, {"op": op, "sigma": args.param, "t": args.t}
    K = sg.extract_kernel(apply, params)
    if args.output:
        write_grid_function(args.output, K, "kernel")
    report = {"family": args.family, "param": args.param, "t": args.t, "nodes": op.n,
              "mass": float(K.values.sum() * op.grid.cell_volume), "peak": float(K.values.max()),
              "min": float(K.values.min())}
    sys.stdout.write(dumps(report))
    return 0


def _load_set(cfg, args, grid):
    if args.ball is not None:
        return cap.DiscreteSet.ball(grid, np.zeros(grid.dim), args.ball)
    path = cfg["files"]["set"]
    if path is None:
        raise ConfigError("capacity needs --set FILE, files.set in the config, or --ball R")
    return cap.read_set_csv(path, grid)


def _cmd_capacity(cfg, args) -> int:
    op = _operator(cfg)
    E = _load_set(cfg, args, op.grid)
    p = cfg["params"]["p"]
    if args.kind == "riesz":
        res = cap.riesz_capacity(op, args.s, p, E)
    elif args.kind == "sobolev":
        res = cap.sobolev_capacity(op, args.s, p, E)
    else:
        res = cap.besov_capacity(op, args.alpha, cfg["params"]["beta"], p, E)
    d = res.to_dict()
    d.pop("minimizer", None)
    sys.stdout.write(dumps({"kind": args.kind, "set_size": E.size, **d}))
    return 0


def _cmd_embed(cfg, args) -> int:
    op = _operator(cfg)
    g = op.grid
    prm = cfg["params"]
    suite = standard_suite(g, cfg["suite"]["count"], cfg["suite"]["seed"])
    family = emb.build_family(g, cap=args.family_size, seed=cfg["run"]["seed"])
    capf = lambda E: cap.riesz_capacity(op, args.s, prm["p"], E)  # noqa: E731
    path = cfg["files"]["measure"]
    if args.kind == "carleson":
        mu = (emb.read_measure_csv(path, g) if path
              else emb.random_measure(g, args.atoms, cfg["run"]["seed"]))
        rep = emb.carleson_embedding_verify(op, args.sigma, args.s, prm["p"], prm["q"], mu, suite, family, capf)
    else:
        nu = (emb.read_measure_csv(path, g) if path
              else emb.random_measure(g, args.atoms, cfg["run"]["seed"], on_product=False))
        rep = emb.trace_embedding_verify(op, args.s, prm["p"], prm["q"], nu, suite, family, capf)
    sys.stdout.write(dumps({"kind": args.kind, **rep.to_dict()}))
    return 0


def _cmd_list(out=None) -> int:
    out = out or sys.stdout
    width = max(len(c) for c in REGISTRY)
    for cid, chk in REGISTRY.items():
        print(f"{cid:<{width}}  {chk.anchor}", file=out)
    return 0


def _common(p):
    p.add_argument("--config", help="INI configuration file")
    p.add_argument("--group", choices=("r1", "r2", "h1"))
    p.add_argument("--points", type=int)
    p.add_argument("--half-width", type=float, dest="half_width")
    p.add_argument("--boundary", choices=("dirichlet", "periodic"))
    p.add_argument("--p", type=float)
    p.add_argument("--q", type=float)
    p.add_argument("--seed", type=int)


COMMON_MAP = {"group": ("grid", "group"), "points": ("grid", "points"), "half_width": ("grid", "half_width"),
              "boundary": ("grid", "boundary"), "p": ("params", "p"), "q": ("params", "q"), "seed": ("run", "seed")}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="stratcap", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run verification checks and write reports")
    _common(run)
    run.add_argument("--checks", type=_checks, help="comma-separated check ids (default: all)")
    run.add_argument("--output", help="output directory")
    run.add_argument("--workers", type=int, help="checks dispatched concurrently")
    run.add_argument("--suite-count", type=int, dest="suite_count")
    run.add_argument("ids", nargs="*", help="check ids (same as --checks)")

    sub.add_parser("list-checks", help="print every check id with its anchor")

    k = sub.add_parser("kernel", help="extract a semigroup kernel at the identity")
    _common(k)
    k.add_argument("--family", choices=("heat", "frac-heat", "poisson"), default="heat")
    k.add_argument("--param", type=float, default=0.5, help="alpha or sigma")
    k.add_argument("--t", type=float, default=0.5)
    k.add_argument("--output", help="CSV file for the kernel values")

    c = sub.add_parser("capacity", help="capacity of a set")
    _common(c)
    c.add_argument("--kind", choices=("riesz", "sobolev", "besov"), default="riesz")
    c.add_argument("--set", dest="set_file", help="CSV of node coordinates or ball specs")
    c.add_argument("--ball", type=float, help="use the open ball of this radius at the identity")
    c.add_argument("--s", type=float, default=0.25)
    c.add_argument("--alpha", type=float, default=0.5)
    c.add_argument("--beta", type=float)

    e = sub.add_parser("embed", help="constants of the Carleson or trace embedding")
    _common(e)
    e.add_argument("--kind", choices=("carleson", "trace"), default="carleson")
    e.add_argument("--measure", help="CSV of measure atoms")
    e.add_argument("--atoms", type=int, default=5)
    e.add_argument("--s", type=float, default=0.2)
    e.add_argument("--sigma", type=float, default=0.5)
    e.add_argument("--family-size", type=int, default=300, dest="family_size")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.command == "list-checks":
        return _cmd_list()
    try:
        cfg = load_config(args.config)
        mapping = dict(COMMON_MAP)
        if args.command == "run":
            if args.ids:
                args.checks = tuple(args.checks or ()) + tuple(args.ids)
            mapping.update({"checks": ("run", "checks"), "output": ("run", "output"),
                            "workers": ("run", "workers"), "suite_count": ("suite", "count")})
        if args.command == "capacity":
            mapping.update({"set_file": ("files", "set"), "beta": ("params", "beta")})
        if args.command == "embed":
            mapping["measure"] = ("files", "measure")
        _override(cfg, args, mapping)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    if args.command == "run":
        return run_checks(cfg)
    handler = {"kernel": _cmd_kernel, "capacity": _cmd_capacity, "embed": _cmd_embed}[args.command]
    try:
        return handler(cfg, args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (StratcapError, ValueError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
