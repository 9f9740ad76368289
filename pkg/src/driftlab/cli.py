"""Command-line entry point.

Subcommands: ``run`` (execute a scenario file), ``classify``, ``simulate``,
``com llt|escape|recur|stable`` and ``lattice verify``.  Global flags
``--seed``, ``--out-dir`` and ``--threads`` apply to every subcommand.  Exit
codes: 0 on success, 2 on schema errors, 3 on numerical or domain errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import DomainError, SchemaError
from . import scenarios


def _load_json(path: str) -> dict:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise SchemaError(f"file {path} does not exist") from None
    except json.JSONDecodeError as exc:
        raise SchemaError(f"file {path} is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise SchemaError(f"file {path} must hold a JSON object")
    return raw


def _model_config(path: str) -> dict:
    raw = _load_json(path)
    return raw["model"] if "task" in raw else raw


def _law_config(path: str) -> dict:
    raw = _load_json(path)
    return raw["law"] if "task" in raw else raw


def _parse_matrix(text: str) -> list[list[float]]:
    return [[float(v) for v in row.split(",")] for row in text.split(";")]


def _parse_vector(text: str) -> list[float]:
    return [float(v) for v in text.split(",")]


def _finish(record: scenarios.RunRecord, out: str | None) -> None:
    print(json.dumps(record.summary, indent=2))
    if out:
        # mirror the first CSV artifact at the requested path
        csvs = [p for p in record.outputs if p.endswith(".csv")]
        if csvs:
            content = Path(csvs[0]).read_text()
            scenarios._atomic_write_text(Path(out), content)
            print(f"wrote {out}", file=sys.stderr)
    for path in record.outputs:
        print(f"artifact: {path}", file=sys.stderr)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="driftlab", description=__doc__)
    parser.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    parser.add_argument("--out-dir", default=None, help="directory for artifacts")
    parser.add_argument("--threads", type=int, default=1, help="worker threads for simulation")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a scenario file")
    p_run.add_argument("scenario")

    p_cls = sub.add_parser("classify", help="classify a model's recurrence behaviour")
    p_cls.add_argument("--model", required=True, help="model or scenario JSON file")
    p_cls.add_argument("--probe-xs", type=float, nargs="+", default=None)
    p_cls.add_argument("--regime", default=None)
    p_cls.add_argument("--deadband", type=float, default=None)
    p_cls.add_argument("--p", type=float, default=None, help="moment order for the theta cap")

    p_sim = sub.add_parser("simulate", help="run a seeded trajectory ensemble")
    p_sim.add_argument("--model", required=True)
    p_sim.add_argument("--paths", type=int, default=1000)
    p_sim.add_argument("--steps", type=int, default=10000)
    p_sim.add_argument("--tau-level", type=float, default=0.0)
    p_sim.add_argument("--start-x", type=float, default=1.0)
    p_sim.add_argument("--absorb", action="store_true", help="freeze paths at the passage time")
    p_sim.add_argument("--checkpoints", type=int, nargs="*", default=[])
    p_sim.add_argument("--out", default=None, help="also write the ensemble CSV here")

    p_com = sub.add_parser("com", help="centre-of-mass experiments")
    com_sub = p_com.add_subparsers(dest="com_task", required=True)
    p_llt = com_sub.add_parser("llt")
    p_llt.add_argument("--law", required=True)
    p_llt.add_argument("--n", type=int, default=100)
    p_llt.add_argument("--samples", type=int, default=200_000)
    p_llt.add_argument("--target", choices=["walk", "com"], default="com")
    p_llt.add_argument("--bins", type=int, default=24)
    p_llt.add_argument("--out", default=None)
    p_esc = com_sub.add_parser("escape")
    p_esc.add_argument("--law", required=True)
    p_esc.add_argument("--n-max", type=int, default=100_000)
    p_esc.add_argument("--paths", type=int, default=100)
    p_esc.add_argument("--checkpoints", type=int, default=9)
    p_esc.add_argument("--out", default=None)
    p_rec = com_sub.add_parser("recur")
    p_rec.add_argument("--law", required=True)
    p_rec.add_argument("--n-max", type=int, default=100_000)
    p_rec.add_argument("--x", type=float, default=0.0)
    p_rec.add_argument("--out", default=None)
    p_stb = com_sub.add_parser("stable")
    p_stb.add_argument("--alpha", type=float, default=0.5)
    p_stb.add_argument("--c", type=float, default=1.0)
    p_stb.add_argument("--xs", type=float, nargs="*", default=None)
    p_stb.add_argument("--out", default=None)

    p_lat = sub.add_parser("lattice", help="lattice verification")
    lat_sub = p_lat.add_subparsers(dest="lattice_task", required=True)
    p_ver = lat_sub.add_parser("verify")
    p_ver.add_argument("--law", required=True)
    p_ver.add_argument("--H", default=None, help="matrix rows 'a,b;c,d'")
    p_ver.add_argument("--b", default=None, help="vector 'a,b'")
    p_ver.add_argument("--rho", type=float, default=None)
    p_ver.add_argument("--grid", type=int, default=None)

    return parser


def _scenario_from_args(args: argparse.Namespace) -> scenarios.Scenario:
    if args.command == "run":
        scenario = scenarios.load_scenario(args.scenario)
        if args.seed is not None:
            scenario = scenarios.Scenario(
                task=scenario.task,
                seed=args.seed,
                model=scenario.model,
                law=scenario.law,
                params=scenario.params,
                out_dir=scenario.out_dir,
            )
        return scenario

    seed = args.seed
    if args.command == "classify":
        params = {}
        if args.probe_xs is not None:
            params["probe_xs"] = args.probe_xs
        if args.regime is not None:
            params["regime"] = args.regime
        if args.deadband is not None:
            params["deadband"] = args.deadband
        if args.p is not None:
            params["p"] = args.p
        return scenarios.parse_scenario(
            {"task": "classify", "model": _model_config(args.model), "params": params}
        )
    if args.command == "simulate":
        if seed is None:
            raise SchemaError("simulate needs --seed")
        params = {
            "paths": args.paths,
            "steps": args.steps,
            "tau_level": args.tau_level,
            "start_x": args.start_x,
            "absorb_at_tau": bool(args.absorb),
            "checkpoints": args.checkpoints,
        }
        return scenarios.parse_scenario(
            {
                "task": "simulate",
                "seed": seed,
                "model": _model_config(args.model),
                "params": params,
            }
        )
    if args.command == "com":
        if args.com_task == "stable":
            params = {"alpha": args.alpha, "c": args.c}
            if args.xs:
                params["xs"] = args.xs
            return scenarios.parse_scenario({"task": "stable", "params": params})
        if seed is None:
            raise SchemaError(f"com {args.com_task} needs --seed")
        law = _law_config(args.law)
        if args.com_task == "llt":
            params = {
                "n": args.n,
                "samples": args.samples,
                "target": args.target,
                "bins": args.bins,
            }
            return scenarios.parse_scenario(
                {"task": "llt", "seed": seed, "law": law, "params": params}
            )
        if args.com_task == "escape":
            params = {
                "n_max": args.n_max,
                "paths": args.paths,
                "checkpoints": args.checkpoints,
            }
            return scenarios.parse_scenario(
                {"task": "escape", "seed": seed, "law": law, "params": params}
            )
        params = {"n_max": args.n_max, "x": args.x}
        return scenarios.parse_scenario(
            {"task": "recur", "seed": seed, "law": law, "params": params}
        )
    if args.command == "lattice":
        params: dict = {}
        if args.H is not None:
            params["H"] = _parse_matrix(args.H)
        if args.b is not None:
            params["b"] = _parse_vector(args.b)
        if args.rho is not None:
            params["rho"] = args.rho
        if args.grid is not None:
            params["grid"] = args.grid
        return scenarios.parse_scenario(
            {"task": "lattice", "law": _law_config(args.law), "params": params}
        )
    raise SchemaError(f"unknown command {args.command!r}")


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        scenario = _scenario_from_args(args)
        record = scenarios.run(scenario, out_dir=args.out_dir, threads=args.threads)
        _finish(record, getattr(args, "out", None))
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return 2
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
