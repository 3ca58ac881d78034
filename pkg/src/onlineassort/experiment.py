"""Replicated experiments: config parsing, execution, aggregation, output files.

Config file (YAML; JSON is valid YAML too)::

    schema_version: 1
    master_seed: 7
    classes:                       # preset names or explicit tuples
      - gamma1
      - {name: small, family: {kind: cardinality, B: 2}, N: 4, K: 1, R: 2}
    horizons: [250, 500, 1000]
    models_per_cell: 5
    runs_per_model: 200
    policy: {type: online_tau, tau_rule: "T^{2/3}", delta: 0.1}
    generator: {c_low: 0.25, c_high: 0.75, consumption_prob: 0.5}   # optional
    outputs: {runs_csv: runs.csv, report_json: report.json,         # optional
              ratio_csv: ratio_vs_T.csv, regret_csv: regret_vs_T.csv}

``policy.type`` is one of ``online_tau``, ``ucb``, ``static_oracle``;
``ucb`` additionally accepts ``psi_scale`` and ``stride``.

Seeding: model ``m`` of class ``c`` is generated from
``SeedSequence(master_seed, spawn_key=(c, m))`` and run ``j`` at horizon
``T`` uses ``SeedSequence(master_seed, spawn_key=(c, m, T, j))``, so adding
classes, models, horizons or runs never changes existing runs.  The same
model (up to capacity rounding) is reused across horizons.
"""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .policies import OnlineTau, StaticOracle, UCBPolicy, tau_for_horizon
from .simulator import (
    PRESET_CLASSES,
    ClassTuple,
    GeneratorSettings,
    compute_benchmark,
    generate_instance,
    run_episode,
    support_match,
)

SCHEMA_VERSION = 1

RUN_COLUMNS = [
    "class", "T", "model", "seed", "revenue", "benchmark", "regret", "ratio",
    "t_stop", "support_match", "cg_iter_max", "lp_status",
]

DEFAULT_OUTPUTS = {
    "runs_csv": "runs.csv",
    "report_json": "report.json",
    "ratio_csv": "ratio_vs_T.csv",
    "regret_csv": "regret_vs_T.csv",
}

POLICY_TYPES = ("online_tau", "ucb", "static_oracle")


class ConfigError(ValueError):
    def __init__(self, errors: list[str]):
        super().__init__("; ".join(errors))
        self.errors = errors


@dataclass
class PolicyConfig:
    type: str = "online_tau"
    tau_rule: object = "T^{2/3}"
    delta: float = 0.1
    psi_scale: float = 1.0
    stride: int = 1


@dataclass
class ExperimentConfig:
    classes: list
    horizons: list
    models_per_cell: int
    runs_per_model: int
    policy: PolicyConfig = field(default_factory=PolicyConfig)
    master_seed: int = 0
    generator: GeneratorSettings = field(default_factory=GeneratorSettings)
    outputs: dict = field(default_factory=lambda: dict(DEFAULT_OUTPUTS))
    schema_version: int = SCHEMA_VERSION


def _parse_class(item, where, errors):
    if isinstance(item, str):
        if item not in PRESET_CLASSES:
            errors.append(f"{where}: unknown class preset {item!r}")
            return None
        return PRESET_CLASSES[item]
    if not isinstance(item, dict):
        errors.append(f"{where}: expected a preset name or a mapping")
        return None
    missing = [k for k in ("family", "N", "K", "R") if k not in item]
    if missing:
        errors.append(f"{where}: missing {', '.join(missing)}")
        return None
    try:
        cls = ClassTuple(dict(item["family"]), int(item["N"]), int(item["K"]), float(item["R"]), str(item.get("name", "")))
        cls.make_family()
    except (ValueError, KeyError, TypeError) as exc:
        errors.append(f"{where}: {exc}")
        return None
    if cls.R < 1 or cls.K < 0:
        errors.append(f"{where}: need R >= 1 and K >= 0")
        return None
    return cls


def parse_config(data: dict) -> ExperimentConfig:
    errors: list[str] = []
    if not isinstance(data, dict):
        raise ConfigError(["config root must be a mapping"])
    known = {"schema_version", "master_seed", "classes", "horizons", "models_per_cell",
             "runs_per_model", "policy", "generator", "outputs"}
    for key in sorted(set(data) - known):
        errors.append(f"{key}: unknown field")
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        errors.append(f"schema_version: expected {SCHEMA_VERSION}, got {version!r}")
    classes = []
    raw_classes = data.get("classes")
    if not isinstance(raw_classes, list) or not raw_classes:
        errors.append("classes: must be a non-empty list")
    else:
        for j, item in enumerate(raw_classes):
            cls = _parse_class(item, f"classes[{j}]", errors)
            if cls is not None:
                classes.append(cls)
    horizons = data.get("horizons")
    if not isinstance(horizons, list) or not horizons or not all(isinstance(h, int) and h >= 1 for h in horizons):
        errors.append("horizons: must be a non-empty list of positive integers")
        horizons = []
    counts = {}
    for key in ("models_per_cell", "runs_per_model"):
        val = data.get(key)
        if not isinstance(val, int) or val < 1:
            errors.append(f"{key}: must be a positive integer")
        counts[key] = val
    seed = data.get("master_seed", 0)
    if not isinstance(seed, int) or seed < 0:
        errors.append("master_seed: must be a nonnegative integer")
    pol = data.get("policy", {})
    policy = PolicyConfig()
    if not isinstance(pol, dict):
        errors.append("policy: must be a mapping")
    else:
        for key in sorted(set(pol) - {"type", "tau_rule", "delta", "psi_scale", "stride"}):
            errors.append(f"policy.{key}: unknown field")
        policy = PolicyConfig(
            type=pol.get("type", "online_tau"),
            tau_rule=pol.get("tau_rule", "T^{2/3}"),
            delta=pol.get("delta", 0.1),
            psi_scale=pol.get("psi_scale", 1.0),
            stride=pol.get("stride", 1),
        )
        if policy.type not in POLICY_TYPES:
            errors.append(f"policy.type: must be one of {', '.join(POLICY_TYPES)}")
        if not isinstance(policy.delta, (int, float)) or not 0 < policy.delta < 1:
            errors.append("policy.delta: must lie in (0, 1)")
        try:
            tau_for_horizon(1000, policy.tau_rule)
        except ValueError:
            errors.append(f"policy.tau_rule: expected 'T^{{2/3}}' or an integer, got {policy.tau_rule!r}")
        if not isinstance(policy.psi_scale, (int, float)) or policy.psi_scale <= 0:
            errors.append("policy.psi_scale: must be positive")
        if not isinstance(policy.stride, int) or policy.stride < 1:
            errors.append("policy.stride: must be a positive integer")
    gen = data.get("generator", {})
    generator = GeneratorSettings()
    if not isinstance(gen, dict):
        errors.append("generator: must be a mapping")
    else:
        try:
            generator = GeneratorSettings(**gen)
        except TypeError as exc:
            errors.append(f"generator: {exc}")
        else:
            if not 0 < generator.c_low <= generator.c_high <= 1:
                errors.append("generator: need 0 < c_low <= c_high <= 1")
            if not 0 <= generator.consumption_prob <= 1:
                errors.append("generator.consumption_prob: must lie in [0, 1]")
    outputs = dict(DEFAULT_OUTPUTS)
    out = data.get("outputs", {})
    if not isinstance(out, dict):
        errors.append("outputs: must be a mapping")
    else:
        for key, val in out.items():
            if key not in DEFAULT_OUTPUTS:
                errors.append(f"outputs.{key}: unknown field")
            elif not isinstance(val, str) or not val:
                errors.append(f"outputs.{key}: must be a file name")
            else:
                outputs[key] = val
    if errors:
        raise ConfigError(errors)
    return ExperimentConfig(
        classes=classes,
        horizons=list(horizons),
        models_per_cell=counts["models_per_cell"],
        runs_per_model=counts["runs_per_model"],
        policy=policy,
        master_seed=seed,
        generator=generator,
        outputs=outputs,
    )


def load_config(path) -> ExperimentConfig:
    try:
        data = yaml.safe_load(Path(path).read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError([f"{path}: {exc}"]) from exc
    return parse_config(data)


def _seed(master: int, *key: int) -> int:
    ss = np.random.SeedSequence(master, spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def model_seed(master: int, class_idx: int, model_idx: int) -> int:
    return _seed(master, class_idx, model_idx)


def run_seed(master: int, class_idx: int, model_idx: int, T: int, run_idx: int) -> int:
    return _seed(master, class_idx, model_idx, T, run_idx)


def make_policy(cfg: PolicyConfig, instance, bench_lp=None):
    view = instance.public_view()
    if cfg.type == "online_tau":
        return OnlineTau(view, min(instance.T, tau_for_horizon(instance.T, cfg.tau_rule)), cfg.delta)
    if cfg.type == "ucb":
        return UCBPolicy(view, cfg.delta, psi_scale=cfg.psi_scale, stride=cfg.stride)
    if cfg.type == "static_oracle":
        return StaticOracle(instance, lp_result=bench_lp)
    raise ValueError(f"unknown policy type {cfg.type!r}")


def run_model(cls: ClassTuple, class_idx: int, T: int, model_idx: int, runs: int,
              policy: PolicyConfig, master_seed: int, generator: GeneratorSettings | None = None):
    """All runs of one (class, horizon, model) cell.

    Returns ``(rows, model_info, run_logs)``; ``run_logs`` are kept so callers
    can audit them.
    """
    inst = generate_instance(cls, T, model_seed(master_seed, class_idx, model_idx), generator)
    bench, bench_lp = compute_benchmark(inst)
    rows, logs = [], []
    for j in range(runs):
        seed = run_seed(master_seed, class_idx, model_idx, T, j)
        pol = make_policy(policy, inst, bench_lp)
        log = run_episode(inst, pol, seed)
        logs.append(log)
        match = None
        if isinstance(pol, OnlineTau):
            if pol.y_hat is None and pol.tau < T and not _aborted_in_learning(pol):
                pol._fit()
            match = support_match(pol.y_hat, bench_lp.distribution) if pol.y_hat is not None else False
        cg = pol.cg_iterations
        statuses = {res.status for res in pol.lp_results}
        rows.append({
            "class": cls.label(),
            "T": T,
            "model": model_idx,
            "seed": seed,
            "revenue": log.total_revenue,
            "benchmark": bench,
            "regret": bench - log.total_revenue,
            "ratio": log.total_revenue / bench if bench > 0 else float("nan"),
            "t_stop": log.t_stop,
            "support_match": match,
            "cg_iter_max": max(cg) if cg else 0,
            # worst status over this run's LP solves ("" when none was solved)
            "lp_status": "" if not statuses else ("Optimal" if statuses == {"Optimal"} else ",".join(sorted(statuses - {"Optimal"}))),
        })
    info = {
        "class": cls.label(),
        "T": T,
        "model": model_idx,
        "benchmark": bench,
        "opt_lp": bench_lp.objective,
        "lp_status": bench_lp.status,
        "lp_cg_iterations": bench_lp.cg_iterations,
        "lp_support_size": len(bench_lp.distribution),
        "lp_degenerate": bench_lp.degenerate,
    }
    return rows, info, logs


def _aborted_in_learning(pol: OnlineTau) -> bool:
    return pol.abort_period is not None and pol.abort_period <= pol.tau


def _model_task(args):
    rows, info, _ = run_model(*args)
    return rows, info


@dataclass
class ExperimentReport:
    runs: list
    cells: list
    slopes: dict
    models: list = field(default_factory=list)
    failures: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "cells": self.cells,
            "slopes": self.slopes,
            "models": self.models,
            "failures": self.failures,
            "n_runs": len(self.runs),
        }


def run_experiment(classes, horizons, models_per_cell, runs_per_model, policy: PolicyConfig,
                   master_seed: int = 0, generator: GeneratorSettings | None = None,
                   threads: int = 1) -> ExperimentReport:
    """Execute the full (class x horizon x model x run) grid and aggregate it."""
    tasks = []
    for ci, cls in enumerate(classes):
        for T in horizons:
            for m in range(models_per_cell):
                tasks.append((cls, ci, T, m, runs_per_model, policy, master_seed, generator))
    results = {}
    failures = []

    def record(task, outcome):
        key = (task[1], task[2], task[3])
        if isinstance(outcome, BaseException):
            failures.append({"class": task[0].label(), "T": task[2], "model": task[3],
                             "error": f"{type(outcome).__name__}: {outcome}"})
        else:
            results[key] = outcome

    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            futures = [(t, pool.submit(_model_task, t)) for t in tasks]
            for task, fut in futures:
                try:
                    record(task, fut.result())
                except Exception as exc:  # recorded, not fatal
                    record(task, exc)
    else:
        for task in tasks:
            try:
                record(task, _model_task(task))
            except Exception as exc:  # recorded, not fatal
                record(task, exc)

    runs, models = [], []
    for key in sorted(results):
        rows, info = results[key]
        runs.extend(rows)
        models.append(info)
    cells, slopes = aggregate(runs)
    return ExperimentReport(runs=runs, cells=cells, slopes=slopes, models=models, failures=failures)


def aggregate(runs: list[dict]):
    """Per-cell aggregates (runs averaged per model, then over models) and
    the log-log regret slope per class."""
    by_model: dict = {}
    for row in runs:
        by_model.setdefault((row["class"], int(row["T"]), int(row["model"])), []).append(row)
    per_cell: dict = {}
    for (cls, T, m), rows in sorted(by_model.items()):
        rev = np.array([float(r["revenue"]) for r in rows])
        bench = float(rows[0]["benchmark"])
        mean_rev = float(rev.mean())
        matches = [r["support_match"] for r in rows if r["support_match"] not in (None, "")]
        per_cell.setdefault((cls, T), []).append({
            "model": m,
            "benchmark": bench,
            "mean_revenue": mean_rev,
            "revenue_std": float(rev.std(ddof=1)) if rev.size > 1 else 0.0,
            "ratio": mean_rev / bench if bench > 0 else float("nan"),
            "regret": bench - mean_rev,
            "runs": int(rev.size),
            "support_matches": [bool(_as_bool(x)) for x in matches],
            "cg": [int(r["cg_iter_max"]) for r in rows],
            "non_optimal": sum(1 for r in rows if r.get("lp_status") not in ("", "Optimal", None)),
        })
    cells = []
    for (cls, T), models in sorted(per_cell.items()):
        ratios = np.array([m["ratio"] for m in models])
        regrets = np.array([m["regret"] for m in models])
        matches = [x for m in models for x in m["support_matches"]]
        cg = [x for m in models for x in m["cg"]]
        cells.append({
            "class": cls,
            "T": T,
            "models": len(models),
            "runs": int(sum(m["runs"] for m in models)),
            "mean_benchmark": float(np.mean([m["benchmark"] for m in models])),
            "mean_revenue": float(np.mean([m["mean_revenue"] for m in models])),
            "mean_ratio": float(ratios.mean()),
            "mean_regret": float(regrets.mean()),
            "ratio_std_across_models": float(ratios.std(ddof=1)) if ratios.size > 1 else 0.0,
            "regret_std_across_models": float(regrets.std(ddof=1)) if regrets.size > 1 else 0.0,
            "revenue_std_within_models": float(np.mean([m["revenue_std"] for m in models])),
            "support_match_fraction": float(np.mean(matches)) if matches else None,
            "cg_iter_max": int(max(cg)) if cg else 0,
            "cg_iter_mean": float(np.mean(cg)) if cg else 0.0,
            "non_optimal_lp_runs": int(sum(m["non_optimal"] for m in models)),
        })
    slopes = {}
    for cls in sorted({c["class"] for c in cells}):
        pts = [(c["T"], c["mean_regret"]) for c in cells if c["class"] == cls]
        slopes[cls] = loglog_slope([p[0] for p in pts], [p[1] for p in pts])
    return cells, slopes


def loglog_slope(T, regret):
    """Least-squares slope of log(regret) against log(T); ``None`` if fewer
    than two positive points."""
    pts = [(t, g) for t, g in zip(T, regret) if g > 0]
    if len(pts) < 2 or len({t for t, _ in pts}) < 2:
        return None
    x = np.log([p[0] for p in pts])
    y = np.log([p[1] for p in pts])
    slope, _ = np.polyfit(x, y, 1)
    return float(slope)


def _as_bool(x) -> bool:
    if isinstance(x, str):
        return x.strip().lower() in ("true", "1")
    return bool(x)


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return repr(x)
    return str(x)


def runs_csv(runs: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RUN_COLUMNS)
    for row in runs:
        w.writerow([_fmt(row[c]) for c in RUN_COLUMNS])
    return buf.getvalue()


def read_runs_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != RUN_COLUMNS:
            raise ValueError(f"{path}: unexpected columns {reader.fieldnames}")
        rows = []
        for r in reader:
            rows.append({
                "class": r["class"],
                "T": int(r["T"]),
                "model": int(r["model"]),
                "seed": int(r["seed"]),
                "revenue": float(r["revenue"]),
                "benchmark": float(r["benchmark"]),
                "regret": float(r["regret"]),
                "ratio": float(r["ratio"]),
                "t_stop": int(r["t_stop"]),
                "support_match": None if r["support_match"] == "" else _as_bool(r["support_match"]),
                "cg_iter_max": int(r["cg_iter_max"]),
                "lp_status": r["lp_status"],
            })
    return rows


def plot_csvs(cells: list[dict]) -> tuple[str, str]:
    """Plot-ready tables: ratio vs T, and regret vs T with log columns."""
    ratio = io.StringIO()
    w = csv.writer(ratio, lineterminator="\n")
    w.writerow(["class", "T", "mean_ratio", "ratio_std_across_models"])
    for c in cells:
        w.writerow([c["class"], c["T"], repr(c["mean_ratio"]), repr(c["ratio_std_across_models"])])
    regret = io.StringIO()
    w = csv.writer(regret, lineterminator="\n")
    w.writerow(["class", "T", "mean_regret", "regret_std_across_models", "log_T", "log_regret"])
    for c in cells:
        g = c["mean_regret"]
        w.writerow([c["class"], c["T"], repr(g), repr(c["regret_std_across_models"]),
                    repr(math.log(c["T"])), repr(math.log(g)) if g > 0 else ""])
    return ratio.getvalue(), regret.getvalue()


def write_outputs(report: ExperimentReport, out_dir, outputs: dict | None = None, config: ExperimentConfig | None = None):
    """Write the per-run CSV, aggregate JSON and plot CSVs; returns the paths."""
    outputs = {**DEFAULT_OUTPUTS, **(outputs or {})}
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    doc = report.to_dict()
    if config is not None:
        doc["config"] = _config_dict(config)
    ratio_csv, regret_csv = plot_csvs(report.cells)
    files = {
        "runs_csv": runs_csv(report.runs),
        "report_json": json.dumps(doc, indent=2, sort_keys=True) + "\n",
        "ratio_csv": ratio_csv,
        "regret_csv": regret_csv,
    }
    paths = {}
    for key, text in files.items():
        p = out / outputs[key]
        p.write_text(text)
        paths[key] = p
    return paths


def _config_dict(cfg: ExperimentConfig) -> dict:
    return {
        "schema_version": cfg.schema_version,
        "master_seed": cfg.master_seed,
        "classes": [asdict(c) for c in cfg.classes],
        "horizons": cfg.horizons,
        "models_per_cell": cfg.models_per_cell,
        "runs_per_model": cfg.runs_per_model,
        "policy": asdict(cfg.policy),
        "generator": asdict(cfg.generator),
    }
