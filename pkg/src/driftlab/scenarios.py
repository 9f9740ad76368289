"""Scenario ingestion, validation, and reproducible run orchestration.

A scenario is a JSON object selecting a task, a model or law, task parameters
and a seed.  Unknown keys are rejected.  ``run`` executes the task, writes all
artifacts atomically (temp file + rename) into the output directory, embeds
the seed and scenario hash in a header comment of every stochastic CSV, and
returns a RunRecord whose manifest lists the outputs.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

import jsonschema

from . import __version__
from .errors import DomainError, SchemaError
from . import classifier, comwalk, halfstrip, lattice as lattice_mod, mc

STOCHASTIC_TASKS = ("simulate", "llt", "escape", "recur")

_MODEL_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["family"],
    "properties": {
        "family": {"enum": ["correlated_rw", "tabular"]},
        "q": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "c_plus": {"type": "number"},
        "c_minus": {"type": "number"},
        "n_steps_memory": {"enum": [1, 2]},
        "lines": {"type": "array", "minItems": 1},
        "states": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["x", "line", "jumps"],
                "properties": {
                    "x": {"type": "number", "minimum": 0},
                    "line": {},
                    "jumps": {
                        "type": "array",
                        "items": {
                            "type": "array",
                            "minItems": 3,
                            "maxItems": 3,
                        },
                    },
                },
            },
        },
    },
}

_LAW_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["family"],
    "properties": {
        "family": {"enum": ["ssrw", "lazy_ssrw", "table", "heavy_tail"]},
        "d": {"type": "integer", "minimum": 1},
        "alpha": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "points": {"type": "array"},
        "probs": {"type": "array"},
    },
}

_SCENARIO_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["task"],
    "properties": {
        "task": {
            "enum": ["classify", "simulate", "llt", "escape", "recur", "lattice", "stable"]
        },
        "seed": {"type": "integer", "minimum": 0},
        "model": _MODEL_SCHEMA,
        "law": _LAW_SCHEMA,
        "params": {"type": "object"},
        "out_dir": {"type": "string"},
    },
}

_PARAMS_SCHEMAS = {
    "classify": {
        "probe_xs": {"type": "array", "items": {"type": "number"}, "minItems": 3},
        "regime": {"enum": list(halfstrip.REGIMES)},
        "p": {"type": ["number", "null"]},
        "deadband": {"type": "number", "exclusiveMinimum": 0},
    },
    "simulate": {
        "paths": {"type": "integer", "minimum": 1},
        "steps": {"type": "integer", "minimum": 1},
        "start_x": {"type": "number", "minimum": 0},
        "start_line": {},
        "tau_level": {"type": "number", "minimum": 0},
        "absorb_at_tau": {"type": "boolean"},
        "checkpoints": {"type": "array", "items": {"type": "integer", "minimum": 1}},
    },
    "llt": {
        "n": {"type": "integer", "minimum": 2},
        "samples": {"type": "integer", "minimum": 1},
        "target": {"enum": ["walk", "com"]},
        "lattice": {"type": "object"},
        "bins": {"type": "integer", "minimum": 1},
    },
    "escape": {
        "n_max": {"type": "integer", "minimum": 100},
        "paths": {"type": "integer", "minimum": 2},
        "checkpoints": {"type": "integer", "minimum": 3},
    },
    "recur": {
        "n_max": {"type": "integer", "minimum": 10},
        "x": {"type": "number"},
        "checkpoints": {"type": "integer", "minimum": 2},
    },
    "lattice": {
        "H": {"type": "array"},
        "b": {"type": "array"},
        "rho": {"type": "number", "exclusiveMinimum": 0},
        "grid": {"type": "integer", "minimum": 3},
    },
    "stable": {
        "alpha": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "c": {"type": "number", "exclusiveMinimum": 0},
        "xs": {"type": "array", "items": {"type": "number"}},
    },
}


@dataclass(frozen=True)
class Scenario:
    task: str
    seed: Optional[int] = None
    model: Optional[dict] = None
    law: Optional[dict] = None
    params: dict = field(default_factory=dict)
    out_dir: Optional[str] = None

    def to_dict(self) -> dict:
        out: dict = {"task": self.task, "params": self.params}
        if self.seed is not None:
            out["seed"] = self.seed
        if self.model is not None:
            out["model"] = self.model
        if self.law is not None:
            out["law"] = self.law
        if self.out_dir is not None:
            out["out_dir"] = self.out_dir
        return out

    @property
    def hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(canonical.encode()).hexdigest()[:16]


def parse_scenario(raw: dict) -> Scenario:
    try:
        jsonschema.validate(raw, _SCENARIO_SCHEMA)
    except jsonschema.ValidationError as exc:
        path = ".".join(str(p) for p in exc.absolute_path) or "(top level)"
        raise SchemaError(f"scenario field {path}: {exc.message}") from None
    task = raw["task"]
    params = raw.get("params", {})
    allowed = _PARAMS_SCHEMAS[task]
    for key, value in params.items():
        if key not in allowed:
            raise SchemaError(f"scenario field params.{key}: unknown for task {task!r}")
        try:
            jsonschema.validate(value, allowed[key])
        except jsonschema.ValidationError as exc:
            raise SchemaError(f"scenario field params.{key}: {exc.message}") from None
    if task in STOCHASTIC_TASKS and "seed" not in raw:
        raise SchemaError(f"scenario field seed: mandatory for stochastic task {task!r}")
    if task in ("classify", "simulate") and "model" not in raw:
        raise SchemaError(f"scenario field model: required for task {task!r}")
    if task in ("llt", "escape", "recur", "lattice") and "law" not in raw:
        raise SchemaError(f"scenario field law: required for task {task!r}")
    if raw.get("model", {}).get("family") == "correlated_rw":
        if "q" not in raw["model"]:
            raise SchemaError("scenario field model.q: required for correlated_rw")
    if raw.get("model", {}).get("family") == "tabular":
        for key in ("lines", "states"):
            if key not in raw["model"]:
                raise SchemaError(f"scenario field model.{key}: required for tabular")
    return Scenario(
        task=task,
        seed=raw.get("seed"),
        model=raw.get("model"),
        law=raw.get("law"),
        params=params,
        out_dir=raw.get("out_dir"),
    )


def load_scenario(path: str | Path) -> Scenario:
    """Load and validate a scenario file; schema violations name the field."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise SchemaError(f"scenario file {path} does not exist") from None
    except json.JSONDecodeError as exc:
        raise SchemaError(f"scenario file {path} is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise SchemaError("scenario must be a JSON object")
    return parse_scenario(raw)


def write_scenario(scenario: Scenario, path: str | Path) -> None:
    _atomic_write_text(Path(path), json.dumps(scenario.to_dict(), indent=2) + "\n")


# ---------------------------------------------------------------------------
# Builders


def build_model(cfg: dict) -> halfstrip.HalfStripModel:
    family = cfg["family"]
    if family == "correlated_rw":
        return halfstrip.CorrelatedRWModel(
            q=cfg["q"],
            c_plus=cfg.get("c_plus", 0.0),
            c_minus=cfg.get("c_minus", 0.0),
            memory=cfg.get("n_steps_memory", 1),
        )
    lines = [_freeze(label) for label in cfg["lines"]]
    table = {}
    for state in cfg["states"]:
        jumps = [(float(y), _freeze(j), float(p)) for y, j, p in state["jumps"]]
        table[(float(state["x"]), _freeze(state["line"]))] = jumps
    return halfstrip.tabular_model(lines, table)


def _freeze(label):
    return tuple(label) if isinstance(label, list) else label


def build_law(cfg: dict) -> comwalk.IncrementLaw:
    family = cfg["family"]
    if family == "ssrw":
        return comwalk.ssrw_law(cfg.get("d", 1))
    if family == "lazy_ssrw":
        return comwalk.lazy_ssrw_law(cfg.get("d", 1))
    if family == "heavy_tail":
        if "alpha" not in cfg:
            raise SchemaError("scenario field law.alpha: required for heavy_tail")
        return comwalk.heavy_tail_law(cfg["alpha"])
    if "points" not in cfg or "probs" not in cfg:
        raise SchemaError("scenario field law.points/probs: required for table")
    return comwalk.table_law(cfg["points"], cfg["probs"])


def build_lattice(law_cfg: dict, params: dict) -> lattice_mod.LatticeSpec:
    spec_cfg = params.get("lattice")
    if spec_cfg is not None and "H" in spec_cfg:
        return lattice_mod.LatticeSpec(
            H=np.asarray(spec_cfg["H"], dtype=float),
            b=np.asarray(spec_cfg.get("b", np.zeros(len(spec_cfg["H"]))), dtype=float),
        )
    family = law_cfg["family"]
    d = law_cfg.get("d", 1)
    if family in ("ssrw", "lazy_ssrw"):
        return lattice_mod.builtin_lattice(family, d)
    if family == "heavy_tail":
        return lattice_mod.LatticeSpec(H=np.eye(1), b=np.zeros(1))
    law = build_law(law_cfg)
    if d == 1:
        return lattice_mod.minimal_lattice_1d(law)
    raise SchemaError(
        "scenario field params.lattice: explicit H required for table laws in d >= 2"
    )


# ---------------------------------------------------------------------------
# Run orchestration


@dataclass
class RunRecord:
    scenario_hash: str
    version: str
    started: float
    finished: float
    outputs: list[str]
    summary: dict

    def to_dict(self) -> dict:
        return {
            "scenario_hash": self.scenario_hash,
            "version": self.version,
            "started": self.started,
            "finished": self.finished,
            "outputs": self.outputs,
            "summary": self.summary,
        }


def run(scenario: Scenario, out_dir: Optional[str] = None, threads: int = 1) -> RunRecord:
    started = time.time()
    target = Path(out_dir or scenario.out_dir or f"runs/{scenario.task}-{scenario.hash[:8]}")
    target.mkdir(parents=True, exist_ok=True)
    handler = _TASKS[scenario.task]
    summary, artifacts = handler(scenario, target, threads)
    outputs = []
    for name, content in artifacts.items():
        path = target / name
        _atomic_write_text(path, content)
        outputs.append(str(path))
    record = RunRecord(
        scenario_hash=scenario.hash,
        version=__version__,
        started=started,
        finished=time.time(),
        outputs=outputs,
        summary=summary,
    )
    _atomic_write_text(target / "run_record.json", json.dumps(record.to_dict(), indent=2) + "\n")
    return record


def _atomic_write_text(path: Path, content: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(content)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(header_meta: dict, columns: list[str], rows) -> str:
    buf = io.StringIO()
    meta = " ".join(f"{k}={v}" for k, v in header_meta.items())
    buf.write(f"# {meta}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow(row)
    return buf.getvalue()


def _meta(scenario: Scenario) -> dict:
    return {
        "driftlab": __version__,
        "scenario": scenario.hash,
        "seed": scenario.seed if scenario.seed is not None else "none",
    }


# -- task handlers ----------------------------------------------------------


def _task_classify(scenario: Scenario, out_dir: Path, threads: int):
    params = scenario.params
    model = build_model(scenario.model)
    probe_xs = params.get("probe_xs", [1e3, 1e4, 1e5])
    regime = params.get("regime", halfstrip.REGIME_GENERALIZED)
    profile = halfstrip.fit_drift_profile(model, regime, probe_xs)
    report = classifier.classify(
        profile,
        p=params.get("p"),
        deadband=params.get("deadband", classifier.DEFAULT_DEADBAND),
    )
    summary = report.to_dict()
    summary["fit_residuals"] = profile.residuals
    artifacts = {
        "report.json": json.dumps(summary, indent=2) + "\n",
        "report.txt": _classify_table(scenario, report),
    }
    return summary, artifacts


def _classify_table(scenario: Scenario, report: classifier.ClassifierReport) -> str:
    lines = [
        f"driftlab classification (scenario {scenario.hash})",
        f"  verdict     : {report.verdict}"
        + ("  [boundary: needs sharpened error rates]" if report.boundary_caveat else ""),
        f"  U           : {report.U:.12g}",
        f"  V           : {report.V:.12g}",
        f"  theta*      : {report.theta_star}"
        + (f" (cap p/2 = {report.theta_cap})" if report.theta_cap else ""),
        f"  pi          : {np.array2string(report.pi, precision=6)}",
        f"  shifts a    : {np.array2string(report.a, precision=6)}",
        f"  c (shifted) : {np.array2string(report.transformed_c, precision=6)}",
        f"  s^2 (shifted): {np.array2string(report.transformed_s2, precision=6)}",
    ]
    return "\n".join(lines) + "\n"


def _task_simulate(scenario: Scenario, out_dir: Path, threads: int):
    params = scenario.params
    model = build_model(scenario.model)
    start_line = params.get("start_line")
    plan = mc.SimulationPlan(
        seed=scenario.seed,
        n_paths=params.get("paths", 1000),
        n_steps=params.get("steps", 10_000),
        start=(params.get("start_x", 1.0), _freeze(start_line) if start_line is not None else None),
        tau_level=params.get("tau_level", 0.0),
        absorb_at_tau=params.get("absorb_at_tau", False),
        checkpoint_ns=tuple(params.get("checkpoints", [])),
    )
    result = mc.simulate(model, plan, threads=threads)
    occ_cols = [f"occupation_{k}" for k in range(len(result.lines))]
    rows = (
        [
            pid,
            result.final_x[pid],
            result.final_line[pid],
            int(result.tau[pid]),
            *result.occupation[pid].tolist(),
        ]
        for pid in range(plan.n_paths)
    )
    csv_text = _csv_text(
        _meta(scenario), ["path_id", "final_x", "final_line", "tau", *occ_cols], rows
    )
    uncensored = ~result.censored
    summary = {
        "n_paths": plan.n_paths,
        "uncensored_fraction": float(np.mean(uncensored)),
        "mean_tau_uncensored": float(np.mean(result.tau[uncensored])) if uncensored.any() else None,
        "occupation_mean": mc.occupation_fractions(result).tolist(),
        "checkpoint_mean_x": {str(n): float(np.mean(x)) for n, x in result.checkpoint_x.items()},
        "max_x_mean": float(np.mean(result.max_x)),
    }
    return summary, {"results.csv": csv_text}


def _task_llt(scenario: Scenario, out_dir: Path, threads: int):
    params = scenario.params
    law = build_law(scenario.law)
    spec = build_lattice(scenario.law, params)
    report = comwalk.llt_check(
        law,
        spec,
        n=params.get("n", 100),
        n_samples=params.get("samples", 200_000),
        seed=scenario.seed,
        target=params.get("target", "com"),
        n_bins=params.get("bins", 24),
    )
    d = law.dimension
    k_cols = [f"k{j}" for j in range(d)]
    x_cols = [f"x{j}" for j in range(d)]
    rows = (
        [
            *report.points_k[i].tolist(),
            *report.points_x[i].tolist(),
            report.empirical[i],
            report.predicted[i],
            report.scaled_discrepancy[i],
            report.point_stderr[i],
            int(report.bulk_mask[i]),
        ]
        for i in range(report.points_k.shape[0])
    )
    pmf_csv = _csv_text(
        _meta(scenario),
        [*k_cols, *x_cols, "empirical_pmf", "predicted_density", "scaled_discrepancy", "stderr", "bulk"],
        rows,
    )
    artifacts = {"pmf_vs_density.csv": pmf_csv}
    if report.bins is not None:
        bin_rows = (
            [b.lo, b.hi, b.empirical, b.predicted, b.stderr, b.z] for b in report.bins
        )
        artifacts["bins.csv"] = _csv_text(
            _meta(scenario), ["lo", "hi", "empirical", "predicted", "stderr", "z"], bin_rows
        )
    summary = {
        "target": report.target,
        "n": report.n,
        "n_samples": report.n_samples,
        "h": report.lattice_h,
        "sup_discrepancy_bulk": report.sup_discrepancy_bulk,
        "max_bin_z": report.max_bin_z,
        "n_lattice_points": int(report.points_k.shape[0]),
    }
    return summary, artifacts


def _task_escape(scenario: Scenario, out_dir: Path, threads: int):
    params = scenario.params
    law = build_law(scenario.law)
    est = comwalk.escape_exponent(
        law,
        n_max=params.get("n_max", 100_000),
        n_checkpoints=params.get("checkpoints", 9),
        n_paths=params.get("paths", 100),
        seed=scenario.seed,
    )
    rows = ([i, s] for i, s in enumerate(est.per_path_slopes))
    summary = {
        "slope": est.slope,
        "ci_half_width": est.ci_half_width,
        "checkpoints": est.checkpoint_ns.tolist(),
    }
    return summary, {
        "slopes.csv": _csv_text(_meta(scenario), ["path_id", "slope"], rows)
    }


def _task_recur(scenario: Scenario, out_dir: Path, threads: int):
    params = scenario.params
    law = build_law(scenario.law)
    probe = comwalk.recurrence_probe_1d(
        law,
        n_max=params.get("n_max", 100_000),
        seed=scenario.seed,
        x=params.get("x", 0.0),
        n_checkpoints=params.get("checkpoints", 25),
    )
    rows = (
        [int(n), float(v)] for n, v in zip(probe.checkpoint_ns, probe.running_min)
    )
    summary = {
        "final_running_min": float(probe.running_min[-1]),
        "window_edges": probe.window_edges.tolist(),
        "window_min": [None if not np.isfinite(v) else float(v) for v in probe.window_min],
    }
    return summary, {
        "running_min.csv": _csv_text(_meta(scenario), ["n", "running_min"], rows)
    }


def _task_lattice(scenario: Scenario, out_dir: Path, threads: int):
    params = scenario.params
    law = build_law(scenario.law)
    spec = build_lattice(scenario.law, {"lattice": params} if "H" in params else params)
    member = lattice_mod.support_membership(law, spec)
    summary = {"h": spec.h, "support_membership": member}
    if member:
        report = lattice_mod.minimality_check(
            law,
            spec,
            grid_resolution=params.get("grid"),
            rho=params.get("rho", lattice_mod.DEFAULT_RHO),
        )
        summary.update(
            {
                "minimal": report.passed,
                "margin": report.margin,
                "witness": None if report.witness is None else report.witness.tolist(),
                "lattice_phi_deviation": report.lattice_phi_deviation,
            }
        )
    else:
        summary["minimal"] = False
    return summary, {"verdict.json": json.dumps(summary, indent=2) + "\n"}


def _task_stable(scenario: Scenario, out_dir: Path, threads: int):
    params = scenario.params
    alpha = params.get("alpha", 0.5)
    c_scale = params.get("c", 1.0)
    xs = params.get("xs")
    if xs is None:
        xs = np.linspace(0.0, 10.0, 101).tolist()
    rows = []
    for x in xs:
        rows.append(
            [
                x,
                comwalk.stable_density(float(x), alpha, c_scale),
                comwalk.stable_density_com(float(x), alpha, c_scale),
            ]
        )
    summary = {
        "alpha": alpha,
        "c": c_scale,
        "g0": comwalk.stable_density(0.0, alpha, c_scale),
    }
    return summary, {
        "stable_density.csv": _csv_text(
            _meta(scenario), ["x", "g", "g_com"], rows
        )
    }


_TASKS = {
    "classify": _task_classify,
    "simulate": _task_simulate,
    "llt": _task_llt,
    "escape": _task_escape,
    "recur": _task_recur,
    "lattice": _task_lattice,
    "stable": _task_stable,
}
