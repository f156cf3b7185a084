"""Command-line entry point.

One INI-style config file per run (flat key = value sections), a mandatory
seed stamped into every report, and deterministic emission: float fields are
serialized with 17 significant digits and dictionary keys are sorted, so two
runs with the same config and seed produce byte-identical reports apart from
the timestamp line -- serial or parallel.

Exit codes: 0 success, 2 validation/precondition failure, 3 numerical
failure (diagnostics are still written).
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import elliptic as el
from . import fixed_points as fp
from . import multiplicity as mp
from . import thresholds as th
from .engine import MultiStartConfig
from .errors import (
    CapabilityError,
    InfeasibleError,
    PreconditionError,
    SublevelKitError,
    UsageError,
)
from .functionals import builtin_descriptions, builtin_pair, builtin_potential, random_convex_quadratic_pair
from .kernels import BACKEND
from .sublevel import SublevelProblem

SCHEMA_VERSION = "1"

COMMANDS = (
    "sweep", "thresholds", "minimize", "constructive", "multiplicity",
    "fixed-points", "elliptic", "identity-check", "dichotomy",
)

USAGE_ERRORS = (UsageError, PreconditionError, InfeasibleError,
                CapabilityError, configparser.Error, KeyError, ValueError)


# ---------------------------------------------------------------------------
# deterministic serialization
# ---------------------------------------------------------------------------

def _fmt_float(x: float) -> str:
    if math.isnan(x):
        return "null"
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    return format(x, ".17g")


def dumps_canonical(obj, indent: int = 0) -> str:
    """JSON text with sorted keys and 17-significant-digit floats."""
    pad = "  " * indent
    pad_in = "  " * (indent + 1)
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, str):
        out = obj.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n")
        return f'"{out}"'
    if isinstance(obj, (list, tuple, np.ndarray)):
        items = [dumps_canonical(v, indent + 1) for v in list(obj)]
        if not items:
            return "[]"
        return "[\n" + ",\n".join(pad_in + it for it in items) + "\n" + pad + "]"
    if isinstance(obj, dict):
        keys = sorted(str(k) for k in obj)
        if not keys:
            return "{}"
        rows = [
            f'{pad_in}"{k}": ' + dumps_canonical(obj[str(k) if str(k) in obj else k], indent + 1)
            for k in keys
        ]
        return "{\n" + ",\n".join(rows) + "\n" + pad + "}"
    raise UsageError(f"cannot serialize {type(obj)!r}")


def _flatten(obj, prefix=""):
    rows = []
    if isinstance(obj, dict):
        for k in sorted(obj):
            rows.extend(_flatten(obj[k], f"{prefix}{k}." if prefix else f"{k}."))
    elif isinstance(obj, (list, tuple)):
        for i, v in enumerate(obj):
            rows.extend(_flatten(v, f"{prefix}{i}."))
    else:
        key = prefix[:-1]
        if isinstance(obj, float):
            rows.append((key, _fmt_float(obj).strip('"')))
        elif obj is None:
            rows.append((key, ""))
        else:
            rows.append((key, str(obj)))
    return rows


def write_report(report: dict, prefix: Path, fmt: str) -> Path:
    prefix.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "json":
        path = prefix.with_suffix(".json")
        path.write_text(dumps_canonical(report) + "\n")
    else:
        path = prefix.with_suffix(".csv")
        lines = ["key,value"]
        lines += [f"{k},{v}" for k, v in _flatten(report)]
        path.write_text("\n".join(lines) + "\n")
    return path


def write_plot_data(columns, header: str, prefix: Path) -> Path:
    path = prefix.parent / (prefix.name + ".plot.csv")
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [header]
    for row in zip(*columns):
        lines.append(",".join(_fmt_float(float(v)).strip('"') for v in row))
    path.write_text("\n".join(lines) + "\n")
    return path


# ---------------------------------------------------------------------------
# config handling
# ---------------------------------------------------------------------------

def _load_config(path: str) -> configparser.ConfigParser:
    cp = configparser.ConfigParser()
    read = cp.read(path)
    if not read:
        raise UsageError(f"config file {path!r} not found")
    if "run" not in cp or "command" not in cp["run"]:
        raise UsageError("config needs a [run] section with a 'command' key")
    cmd = cp["run"]["command"]
    if cmd not in COMMANDS:
        raise UsageError(f"unknown command {cmd!r}; one of {COMMANDS}")
    return cp


def _digest(path: str) -> str:
    text = Path(path).read_bytes()
    return hashlib.sha256(text).hexdigest()[:16]


def _problem_pair(cp, seed: int):
    sec = cp["problem"] if "problem" in cp else {}
    if "builtin" in sec:
        return builtin_pair(sec["builtin"])
    if sec.get("kind") == "random_quad":
        dim = int(sec.get("dim", "2"))
        pair, _ = random_convex_quadratic_pair(dim, int(sec.get("seed", seed)))
        return pair
    raise UsageError(
        "[problem] needs builtin = NAME or kind = random_quad; "
        f"builtins: {', '.join(l.split(':')[0] for l in builtin_descriptions())}"
    )


def _potential(cp):
    sec = cp["problem"] if "problem" in cp else {}
    name = sec.get("builtin", "P_osc")
    k = float(sec.get("k", "0.25"))
    dim = int(sec.get("dim", "1"))
    return builtin_potential(name, k=k, dim=dim)


def _grid(cp, section: str, default_kind: str, psi_hint: float = 1.0) -> th.GridSpec:
    sec = cp[section] if section in cp else {}
    return th.GridSpec(
        kind=sec.get("kind", default_kind),
        rho0=float(sec.get("rho0", str(psi_hint))),
        count=int(sec.get("count", "13")),
        factor=float(sec.get("factor", "2.0")),
    )


def _elliptic_config(cp) -> el.EllipticConfig:
    sec = cp["elliptic"] if "elliptic" in cp else {}
    return el.EllipticConfig(
        N=int(sec.get("n", sec.get("N", "64"))),
        a=float(sec.get("a", "0.0")),
        b=float(sec.get("b", "1.0")),
        c=float(sec.get("c", "1.0")),
        s=float(sec.get("s", "0.5")),
        q=float(sec.get("q", "2.0")),
        p=float(sec.get("p", "3.0")),
        alpha_fn=float(sec.get("alpha", "1.0")),
        beta_fn=float(sec.get("beta", "1.0")),
    )


# ---------------------------------------------------------------------------
# command handlers (each returns result dict + optional plot columns)
# ---------------------------------------------------------------------------

def _run_sweep(cp, cfg):
    pair = _problem_pair(cp, cfg.seed)
    grid = _grid(cp, "grid", "geometric_up")
    curve = th.sweep(pair.phi, pair.psi, pair.domain, grid, cfg)
    plot = ([float(r) for r in curve.rho_grid],
            [float(v) for v in curve.phi_values])
    return {"curve": curve.to_dict()}, (plot, "rho,phi_of_rho")


def _run_thresholds(cp, cfg, digest):
    pair = _problem_pair(cp, cfg.seed)
    up = _grid(cp, "grid", "geometric_up")
    down = _grid(cp, "grid_down", "geometric_down_to_infimum")
    rep = th.estimate_thresholds(pair.phi, pair.psi, pair.domain, up, down,
                                 cfg, config_digest=digest)
    plot = ([float(r) for r in rep.curve_up.rho_grid],
            [float(v) for v in rep.curve_up.phi_values])
    return {"thresholds": rep.to_dict()}, (plot, "rho,phi_of_rho")


def _run_minimize(cp, cfg):
    pair = _problem_pair(cp, cfg.seed)
    rho = float(cp["run"].get("rho", "1.0"))
    prob = SublevelProblem(pair.phi, pair.psi, rho, pair.domain, cfg)
    res = prob.alpha_result()
    return {
        "alpha": float(res.value),
        "x": [float(v) for v in res.x],
        "rho": rho,
        "starts_used": int(res.starts_used),
        "best_start_index": int(res.best_start_index),
        "constraint_active": bool(res.constraint_active),
    }, None


def _run_constructive(cp, cfg):
    pair = _problem_pair(cp, cfg.seed)
    rho = float(cp["run"].get("rho", "1.0"))
    lam = float(cp["run"]["lambda"])
    prob = SublevelProblem(pair.phi, pair.psi, rho, pair.domain, cfg)
    r0 = prob.solve_r0(lam)
    rec = prob.constructive_minimizer(lam)
    return {
        "rho": rho,
        "lambda": lam,
        "r0": float(r0),
        "phi_of_rho": float(prob.phi_of_rho()),
        "alpha": float(prob.alpha()),
        "record": rec.to_dict(),
    }, None


def _run_multiplicity(cp, cfg):
    pair = _problem_pair(cp, cfg.seed)
    run = cp["run"]
    lam = float(run["lambda"])
    direction = run.get("direction", "descending")
    rho0 = float(run.get("rho0", "1.0"))
    count = int(run.get("count", "10"))
    factor = float(run.get("factor", "4.0"))
    if direction == "descending":
        psi_inf, _ = th.estimate_psi_inf(pair.psi, pair.domain, cfg)
        sched = mp.default_descending_schedule(rho0, psi_inf, count, factor)
        seq = mp.descending_sequence(pair.phi, pair.psi, lam, sched,
                                     pair.domain, cfg)
    elif direction == "ascending":
        sched = mp.default_ascending_schedule(rho0, count, factor)
        seq = mp.ascending_alternative(pair.phi, pair.psi, lam, sched,
                                       pair.domain, cfg)
    else:
        raise UsageError("direction must be descending or ascending")
    return {"sequence": seq.to_dict()}, None


def _run_fixed_points(cp, cfg):
    pot = _potential(cp)
    problem = fp.PotentialProblem(pot.potential)
    run = cp["run"]
    mode = run.get("mode", "hunt")
    out = {"potential": pot.name, "mode": mode}
    plot = None
    if mode in ("profile", "hunt"):
        r_min = float(run.get("r_min", "1.0"))
        r_max = float(run.get("r_max", "1e4"))
        n_r = int(run.get("r_points", "48"))
        grid = fp.default_radius_grid(r_min, r_max, n_r)
        if mode == "profile":
            prof = fp.growth_profile(problem, grid, cfg)
            out["profile"] = prof.to_dict()
            plot = (([float(r) for r in prof.radii],
                     [float(v) for v in prof.ratios]), "r,sup_ratio")
        else:
            count = int(run.get("count", "3"))
            hunt = fp.unbounded_fixed_point_hunt(problem, count, grid, cfg)
            out["hunt"] = hunt.to_dict()
    elif mode == "ball":
        rho = float(run.get("rho", "1.0"))
        rec = fp.fixed_point_in_ball(problem, rho, cfg)
        out["phi_rho"] = float(fp.phi_rho_hilbert(problem, rho, cfg))
        out["record"] = rec.to_dict()
    else:
        raise UsageError("fixed-points mode must be profile, hunt, or ball")
    return out, plot


def _run_elliptic(cp, cfg, prefix: Path):
    config = _elliptic_config(cp)
    run = cp["run"]
    grid = None
    if "grid" in cp:
        grid = _grid(cp, "grid", "geometric_up", psi_hint=0.125)
    thr = el.threshold_lambda_star(config, grid, cfg)
    lam = run.get("lambda")
    lam = (thr.lambda_star / 2.0 if lam is None else float(lam))
    sol = el.solve(config, lam, threshold=thr, cfg=cfg)
    probe = el.unbounded_below_probe(config, lam, el.hat_direction(config))
    # solution as CSV (x_i, u_i)
    path = prefix.parent / (prefix.name + ".solution.csv")
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = ["x,u"] + [
        f"{_fmt_float(float(x)).strip(chr(34))},{_fmt_float(float(u)).strip(chr(34))}"
        for x, u in zip(config.x_nodes, sol.u.values)
    ]
    path.write_text("\n".join(rows) + "\n")
    return {
        "threshold": thr.to_dict(),
        "solution": sol.to_dict(),
        "probe": probe.to_dict(),
        "solution_csv": path.name,
    }, None


def _run_identity(cp, cfg):
    pair = _problem_pair(cp, cfg.seed)
    rho = float(cp["run"].get("rho", "1.0"))
    prob = SublevelProblem(pair.phi, pair.psi, rho, pair.domain, cfg)
    rep = th.proof_identity_check(prob)
    return {"identity": rep.to_dict(), "rho": rho}, None


def _run_dichotomy(cp, cfg):
    pair = _problem_pair(cp, cfg.seed)
    run = cp["run"]
    mu_below = float(run["mu_below"])
    lambda_above = float(run["lambda_above"])
    grid = _grid(cp, "grid", "geometric_up")
    curve = th.sweep(pair.phi, pair.psi, pair.domain, grid, cfg)
    rep = th.convex_dichotomy_check(pair.phi, pair.psi, pair.domain, curve,
                                    mu_below, lambda_above, cfg)
    return {
        "dichotomy": rep.to_dict(),
        "lambda_star": th.lambda_star(curve).to_dict(),
    }, None


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="sublevelkit",
        description="sublevel-set minimization, thresholds, multiplicity, "
                    "fixed points, and the 1D elliptic pipeline",
    )
    ap.add_argument("--config", help="path to the INI run config")
    ap.add_argument("--seed", type=int, default=None,
                    help="override the config seed")
    ap.add_argument("--output", default=None, help="output path prefix")
    ap.add_argument("--format", choices=("json", "csv"), default=None)
    ap.add_argument("--serial", action="store_true",
                    help="force single-threaded execution (results identical)")
    ap.add_argument("--list-builtins", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.list_builtins:
        for line in builtin_descriptions():
            print(line)
        return 0
    if not args.config:
        print("error: --config is required (or use --list-builtins)",
              file=sys.stderr)
        return 2

    try:
        cp = _load_config(args.config)
        run = cp["run"]
        command = run["command"]
        seed = args.seed if args.seed is not None else int(run.get("seed", "0"))
        out_prefix = Path(args.output or run.get("output", "sublevelkit_run"))
        fmt = args.format or run.get("format", "json")
        if fmt not in ("json", "csv"):
            raise UsageError(f"unknown format {fmt!r}")
        cfg = MultiStartConfig(seed=seed, serial=args.serial)
        digest = _digest(args.config)
    except USAGE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    report = {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "seed": seed,
        "config_digest": digest,
        "kernel_backend": BACKEND,
    }
    status = 0
    plot = None
    try:
        if command == "sweep":
            result, plot = _run_sweep(cp, cfg)
        elif command == "thresholds":
            result, plot = _run_thresholds(cp, cfg, digest)
        elif command == "minimize":
            result, plot = _run_minimize(cp, cfg)
        elif command == "constructive":
            result, plot = _run_constructive(cp, cfg)
        elif command == "multiplicity":
            result, plot = _run_multiplicity(cp, cfg)
        elif command == "fixed-points":
            result, plot = _run_fixed_points(cp, cfg)
        elif command == "elliptic":
            result, plot = _run_elliptic(cp, cfg, out_prefix)
        elif command == "identity-check":
            result, plot = _run_identity(cp, cfg)
        else:
            result, plot = _run_dichotomy(cp, cfg)
        report["result"] = result
    except USAGE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SublevelKitError as exc:
        report["error"] = {"type": type(exc).__name__, "message": str(exc)}
        status = 3

    report["timestamp"] = time.strftime("%Y-%m-%dT%H:%M:%S")
    path = write_report(report, out_prefix, fmt)
    if plot is not None:
        columns, header = plot
        write_plot_data(columns, header, out_prefix)
    print(f"wrote {path}")
    return status


if __name__ == "__main__":
    sys.exit(main())
