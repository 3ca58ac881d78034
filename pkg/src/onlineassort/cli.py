"""Command-line interface.

Exit codes: 0 success, 2 configuration/input error, 3 numeric or solver
failure, 4 verification failure.  Errors are printed to stdout as a single
JSON object (``{"error": ..., "details": [...]}``).
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .estimation import ConvergenceError
from .experiment import (
    ConfigError,
    aggregate,
    load_config,
    plot_csvs,
    read_runs_csv,
    run_experiment,
    write_outputs,
)
from .instance import Instance
from .lp import DegeneratePivotError, SolverOptions, lp_text, solve_lp
from .mnl import UtilityVector
from .simulator import PRESET_CLASSES, ClassTuple, generate_instance
from .verify import SUITES, run_suite

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_VERIFY = 0, 2, 3, 4


def _error(kind: str, details) -> None:
    print(json.dumps({"error": kind, "details": list(details)}, sort_keys=True))


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    report = run_experiment(
        cfg.classes, cfg.horizons, cfg.models_per_cell, cfg.runs_per_model, cfg.policy,
        master_seed=cfg.master_seed if args.seed is None else args.seed,
        generator=cfg.generator, threads=args.threads,
    )
    paths = write_outputs(report, args.out, cfg.outputs, cfg)
    for key in ("runs_csv", "report_json", "ratio_csv", "regret_csv"):
        print(f"wrote {key} {paths[key]}")
    for cell in report.cells:
        print(f"cell class={cell['class']} T={cell['T']} mean_ratio={cell['mean_ratio']:.6f} "
              f"mean_regret={cell['mean_regret']:.6f} cg_iter_max={cell['cg_iter_max']}")
    for cls, slope in report.slopes.items():
        print(f"slope class={cls} loglog_regret_slope={'' if slope is None else f'{slope:.6f}'}")
    for fail in report.failures:
        print(f"failure {json.dumps(fail, sort_keys=True)}")
    return EXIT_OK


def _parse_class(spec: str) -> ClassTuple:
    if spec in PRESET_CLASSES:
        return PRESET_CLASSES[spec]
    try:
        d = json.loads(spec)
        return ClassTuple(dict(d["family"]), int(d["N"]), int(d["K"]), float(d["R"]), str(d.get("name", "")))
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError([f"--class: expected a preset ({', '.join(PRESET_CLASSES)}) or JSON tuple: {exc}"])


def cmd_gen_instance(args) -> int:
    cls = _parse_class(args.class_spec)
    inst = generate_instance(cls, args.T, args.seed if args.seed is not None else 0)
    inst.save(args.out)
    print(f"wrote instance {args.out} N={inst.N} K={inst.K} T={inst.T}")
    return EXIT_OK


def cmd_solve_lp(args) -> int:
    try:
        inst = Instance.load(args.instance)
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError([f"--instance: {exc}"])
    v = inst.v_star
    if args.utility:
        try:
            vals = json.loads(Path(args.utility).read_text())
            v = UtilityVector(vals.get("v", vals) if isinstance(vals, dict) else vals, inst.R)
        except (OSError, ValueError) as exc:
            raise ConfigError([f"--utility: {exc}"])
    opts = SolverOptions(enum_cap=args.cap_family_size) if args.cap_family_size else SolverOptions()
    res = solve_lp(inst, v, opts)
    doc = {
        "objective": res.objective,
        "benchmark": inst.T * res.objective,
        "status": res.status,
        "cg_iterations": res.cg_iterations,
        "duals": [float(x) for x in res.duals],
        "support": [{"assortment": list(S), "weight": w} for S, w in res.distribution.support],
        "degenerate": res.degenerate,
    }
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote solution {args.out}")
    else:
        sys.stdout.write(text)
    if args.lp_dump:
        Path(args.lp_dump).write_text(lp_text(res))
        print(f"wrote lp {args.lp_dump}")
    print(f"objective={res.objective!r} status={res.status} cg_iterations={res.cg_iterations}")
    return EXIT_OK


def cmd_verify(args) -> int:
    names = list(SUITES) if args.suite == "all" else [args.suite]
    ok = True
    for name in names:
        res = run_suite(name, args.seed if args.seed is not None else 0, args.cap_n, args.cap_family_size)
        print(res.line())
        ok &= res.ok
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_report(args) -> int:
    runs = []
    for path in args.input:
        try:
            runs.extend(read_runs_csv(path))
        except (OSError, ValueError) as exc:
            raise ConfigError([f"--input {path}: {exc}"])
    cells, slopes = aggregate(runs)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    doc = {"cells": cells, "slopes": slopes, "n_runs": len(runs)}
    (out / "report.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    ratio, regret = plot_csvs(cells)
    (out / "ratio_vs_T.csv").write_text(ratio)
    (out / "regret_vs_T.csv").write_text(regret)
    for cls, slope in slopes.items():
        print(f"slope class={cls} loglog_regret_slope={'' if slope is None else f'{slope:.6f}'}")
    print(f"wrote report {out / 'report.json'}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="onlineassort", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment from a config file")
    run.add_argument("--config", required=True)
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--seed", type=int, help="override the config's master_seed")
    run.add_argument("--threads", type=int, default=1, help="worker processes")
    run.set_defaults(func=cmd_run)

    gen = sub.add_parser("gen-instance", help="generate a random instance as JSON")
    gen.add_argument("--class", dest="class_spec", required=True,
                     help=f"preset ({', '.join(PRESET_CLASSES)}) or JSON class tuple")
    gen.add_argument("--T", type=int, required=True)
    gen.add_argument("--seed", type=int)
    gen.add_argument("--out", required=True)
    gen.set_defaults(func=cmd_gen_instance)

    lp = sub.add_parser("solve-lp", help="solve the fluid LP of an instance")
    lp.add_argument("--instance", required=True)
    lp.add_argument("--utility", help="JSON list (or {\"v\": [...]}) replacing v_star")
    lp.add_argument("--out", help="write the solution JSON here instead of stdout")
    lp.add_argument("--lp-dump", help="write the final restricted master in LP format")
    lp.add_argument("--cap-family-size", type=int)
    lp.set_defaults(func=cmd_solve_lp)

    ver = sub.add_parser("verify", help="run a verification suite")
    ver.add_argument("--suite", required=True, choices=[*SUITES, "all"])
    ver.add_argument("--seed", type=int)
    ver.add_argument("--cap-n", type=int)
    ver.add_argument("--cap-family-size", type=int)
    ver.set_defaults(func=cmd_verify)

    rep = sub.add_parser("report", help="re-aggregate per-run CSV files")
    rep.add_argument("--input", nargs="+", required=True)
    rep.add_argument("--out", required=True)
    rep.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        _error("config", exc.errors)
        return EXIT_CONFIG
    except (DegeneratePivotError, ConvergenceError, np.linalg.LinAlgError, ArithmeticError) as exc:
        _error("numeric", [f"{type(exc).__name__}: {exc}"])
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
