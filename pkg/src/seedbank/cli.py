"""Command-line entry point.

Exit status: 0 on success, 1 when a statistical check fails, 2 on usage or
configuration errors.  Output files never contain timestamps, so identical
configuration and seed give byte-identical files.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .config import ConfigError, RunConfig, parse_config
from .dual import DualState, MarkedPartition, dual_moment_exact, simulate_coalescent, simulate_dual
from .duality import MomentEstimate, dual_side, duality_gap, forward_side
from .exceptions import SeedbankError
from .forward import DiffusionState, PathConfig, moment_ode, simulate_ensemble, simulate_path, simulate_sve_path
from .forward import EnsembleSummary, n_steps
from .rng import Purpose, Stream
from .wright_fisher import WFState, build_model, embed, rescaled_ensemble

COMMANDS = ("forward", "sve", "wf", "dual", "coalescent", "duality-check", "scaling-check")


def fmt(v) -> str:
    return format(float(v), ".17g")


def write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, str) else fmt(v) for v in row])


def write_json(path: Path, obj):
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _initial_state(cfg: RunConfig, mu_n) -> DiffusionState:
    init = cfg.section("init")
    y = init["y"]
    y = np.full(len(mu_n), float(y)) if not isinstance(y, list) else np.array(y, dtype=float)
    return DiffusionState(init["x"], y)


def _dual_initial(cfg: RunConfig) -> DualState:
    init = cfg.section("dual")["initial"]
    return DualState(init["n"], [(float(r), k) for r, k in init["m"]])


def _summary_rows(s: EnsembleSummary):
    return zip(s.t, s.mean_x, s.var_x, s.se_x)


def cmd_forward(cfg: RunConfig, out: Path) -> tuple[int, list[str]]:
    sim = cfg.section("sim")
    mu_n = cfg.discretized()
    z0 = _initial_state(cfg, mu_n)
    if sim["reps"] == 1:
        path = simulate_path(z0, mu_n, PathConfig(sim["dt"], sim["t_max"], sim["seed"], sim["record_stride"]))
        header = ["t", "x"] + [f"y_{i + 1}" for i in range(len(mu_n))]
        rows = ([t, x, *y] for t, x, y in zip(path.t, path.x, path.y))
    else:
        steps = n_steps(sim["t_max"], sim["dt"])
        rec = sorted(set(range(0, steps + 1, sim["record_stride"])) | {steps})
        times, states = simulate_ensemble(z0, mu_n, sim["dt"], sim["t_max"], sim["reps"], sim["seed"],
                                          [k * sim["dt"] for k in rec], sim["workers"])
        summary = EnsembleSummary.from_samples(times, states[:, :, 0])
        header = ["t", "mean_x", "var_x", "se_x"]
        rows = _summary_rows(summary)
    write_csv(out / "forward.csv", header, rows)
    return 0, ["forward.csv"]


def cmd_sve(cfg: RunConfig, out: Path) -> tuple[int, list[str]]:
    sim = cfg.section("sim")
    init = cfg.section("init")
    path = simulate_sve_path(init["x"], init["y"], cfg.measure,
                             PathConfig(sim["dt"], sim["t_max"], sim["seed"], sim["record_stride"]))
    write_csv(out / "sve.csv", ["t", "x"], zip(path.t, path.x))
    return 0, ["sve.csv"]


def _wf_setup(cfg: RunConfig):
    m = cfg.section("measure")
    wf = cfg.section("wf")
    params = build_model(cfg.measure, wf["N"], m.get("bins"), m.get("cutoff"))
    init = cfg.section("init")
    return params, WFState.from_frequencies(init["x"], init["y"], params)


def cmd_wf(cfg: RunConfig, out: Path) -> tuple[int, list[str]]:
    wf = cfg.section("wf")
    sim = cfg.section("sim")
    params, z0 = _wf_setup(cfg)
    times = np.linspace(0.0, wf["t_max"], wf["records"] + 1)
    summary = rescaled_ensemble(params, z0, wf["t_max"], wf["reps"], sim["seed"], times, sim["workers"])
    write_csv(out / "wf.csv", ["t", "mean_x", "var_x", "se_x"], _summary_rows(summary))
    return 0, ["wf.csv"]


def _write_events(path: Path, events):
    write_csv(path, ["time", "event_kind", "detail"], ([e.time, e.kind, e.detail()] for e in events))


def cmd_dual(cfg: RunConfig, out: Path) -> tuple[int, list[str]]:
    sim = cfg.section("sim")
    s0 = _dual_initial(cfg)
    run = simulate_dual(s0, cfg.measure, sim["t_max"], Stream(sim["seed"], Purpose.DUAL, 0), log=True)
    _write_events(out / "dual_events.csv", run.events)
    write_json(out / "dual_state.json", {"n": run.state.n, "m": [[r, k] for r, k in run.state.m]})
    return 0, ["dual_events.csv", "dual_state.json"]


def _initial_partition(s0: DualState) -> MarkedPartition:
    flags = [0.0] * s0.n + [r for r, k in s0.m for _ in range(k)]
    return MarkedPartition(tuple((i + 1,) for i in range(len(flags))), tuple(flags))


def cmd_coalescent(cfg: RunConfig, out: Path) -> tuple[int, list[str]]:
    sim = cfg.section("sim")
    pi0 = _initial_partition(_dual_initial(cfg))
    pi, events = simulate_coalescent(pi0, cfg.measure, sim["t_max"], Stream(sim["seed"], Purpose.COALESCENT, 0),
                                     log=True)
    _write_events(out / "coalescent_events.csv", events)
    write_json(out / "partition.json", pi.to_json())
    return 0, ["coalescent_events.csv", "partition.json"]


def cmd_duality_check(cfg: RunConfig, out: Path) -> tuple[int, list[str]]:
    sim = cfg.section("sim")
    dcfg = cfg.section("duality")
    mu_n = cfg.discretized()
    z0 = _initial_state(cfg, mu_n)
    s0 = _dual_initial(cfg)
    t = sim["t_max"]
    fwd = forward_side(z0, s0, mu_n, t, sim["reps"], sim["dt"], sim["seed"], sim["workers"])
    if dcfg["target"] == "exact":
        dual = MomentEstimate(dual_moment_exact(s0, z0.x, z0.y, mu_n, t), 0.0, 2)
    else:
        dual = dual_side(z0, s0, mu_n, t, sim["reps"], sim["seed"])
    z, passed = duality_gap(fwd, dual, dcfg["threshold"])
    report = {
        "forward": {"value": fwd.value, "se": fwd.se},
        "dual": {"value": dual.value, "se": dual.se},
        "z": z,
        "pass": bool(passed),
        "seed": cfg.seed,
        "config_hash": cfg.hash(),
        "config": cfg.to_dict(),
    }
    write_json(out / "duality_report.json", report)
    return (0 if passed else 1), ["duality_report.json"]


def cmd_scaling_check(cfg: RunConfig, out: Path) -> tuple[int, list[str]]:
    wf = cfg.section("wf")
    sim = cfg.section("sim")
    params, z0 = _wf_setup(cfg)
    summary = rescaled_ensemble(params, z0, wf["t_max"], wf["reps"], sim["seed"], None, sim["workers"])
    t_eff = float(summary.t[-1])
    ode = float(moment_ode(embed(z0, params), params.measure(), t_eff)[0])
    diff = abs(float(summary.mean_x[-1]) - ode)
    tol = cfg.section("scaling")["tol"]
    report = {
        "wf": {"value": float(summary.mean_x[-1]), "se": float(summary.se_x[-1]), "reps": summary.reps},
        "ode": ode,
        "t": t_eff,
        "diff": diff,
        "tol": tol,
        "pass": diff <= tol,
        "seed": cfg.seed,
        "config_hash": cfg.hash(),
        "config": cfg.to_dict(),
    }
    write_json(out / "scaling_report.json", report)
    return (0 if report["pass"] else 1), ["scaling_report.json"]


HANDLERS = {
    "forward": cmd_forward,
    "sve": cmd_sve,
    "wf": cmd_wf,
    "dual": cmd_dual,
    "coalescent": cmd_coalescent,
    "duality-check": cmd_duality_check,
    "scaling-check": cmd_scaling_check,
}


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 1 << 64:
        raise argparse.ArgumentTypeError(f"seed must be in [0, 2^64), got {text}")
    return v


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="seedbank", description="Seed-bank diffusion and dual simulators.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, type=Path, help="TOML or JSON configuration")
        p.add_argument("--out", type=Path, default=Path("."), help="output directory")
        p.add_argument("--seed", type=_u64, help="overrides sim.seed")
        p.add_argument("--reps", type=_positive_int, help="overrides sim.reps and wf.reps")
    return parser


def run(command: str, cfg: RunConfig, out: Path) -> int:
    out.mkdir(parents=True, exist_ok=True)
    code, files = HANDLERS[command](cfg, out)
    write_json(out / "manifest.json", {
        "command": command,
        "version": __version__,
        "backend": kernels.BACKEND,
        "seed": cfg.seed,
        "config_hash": cfg.hash(),
        "config": cfg.to_dict(),
        "outputs": files,
        "exit_code": code,
    })
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    overrides = {}
    if args.seed is not None:
        overrides["sim.seed"] = args.seed
    if args.reps is not None:
        overrides["sim.reps"] = args.reps
        overrides["wf.reps"] = args.reps
    try:
        cfg = parse_config(args.config.read_text(), overrides)
        return run(args.command, cfg, args.out)
    except OSError as e:
        print(f"seedbank: {e}", file=sys.stderr)
        return 2
    except ConfigError as e:
        for msg in e.errors:
            print(f"seedbank: config: {msg}", file=sys.stderr)
        return 2
    except SeedbankError as e:
        print(f"seedbank: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
