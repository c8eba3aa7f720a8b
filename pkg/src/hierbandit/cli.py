"""Command line entry point: ``hierbandit simulate|bounds|experiment``."""

from __future__ import annotations

import argparse
import json
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import bounds
from .arms import ArmKind
from .engine import run
from .experiments import ExperimentConfig, ExperimentKind, run_experiment
from .io import (
    ConfigError,
    RunRecord,
    config_hash,
    emit_csv,
    emit_plot,
    parse_config,
    write_jsonl,
)
from .policies import PolicyKind
from .seeding import stream

EXIT_OK, EXIT_CONFIG, EXIT_IO = 0, 2, 3
OUT_ENV = "HIERBANDIT_OUT"

_EXPERIMENTS = {
    "param-inflation": ExperimentKind.PARAM_INFLATION,
    "selection-ranges": ExperimentKind.SELECTION_RANGES,
    "expert-count": ExperimentKind.EXPERT_COUNT,
}


def _read(path) -> str:
    return Path(path).read_text(encoding="utf-8")


def _out_dir(arg) -> Path:
    out = Path(arg or os.environ.get(OUT_ENV) or "out")
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_simulate(args) -> int:
    cfg = parse_config(_read(args.config))
    if cfg.arms is None or cfg.hierarchy is None:
        raise ConfigError("<root>: simulate needs both 'arms' and 'hierarchy'")
    horizon = args.horizon or cfg.horizon
    if not horizon:
        raise ConfigError("horizon: missing (set it in the config or pass --horizon)")
    seed = args.seed if args.seed is not None else (cfg.seed or 0)
    trace = run(cfg.hierarchy, cfg.arms, horizon, stream(seed, 0))
    out = _out_dir(args.out)
    emit_csv(trace, out)
    rec = RunRecord.from_trace(trace, seed, config_hash(cfg.to_dict()))
    write_jsonl(out / "runs.jsonl", [rec.to_json()])
    emit_plot(
        {"pseudo_regret": np.concatenate([[0.0], trace.cumulative_pseudo_regret])},
        out / "regret.svg",
        title="cumulative pseudo-regret",
    )
    print(f"final pseudo-regret {trace.final_regret:.4f} after {horizon} rounds -> {out}")
    return EXIT_OK


def _bound_reports(cfg, n):
    arms, spec = cfg.arms, cfg.hierarchy
    eps = cfg.epsilon or 0.0
    reports = []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        if spec is not None and spec.R == 0 and spec.top.kind is PolicyKind.ALPHA_UCB and spec.top.alpha > 2:
            reports.append(bounds.ucb_regret_bound(arms, spec.top.alpha, n))
        if spec is not None and spec.R >= 1:
            all_ucb = all(p.kind is PolicyKind.ALPHA_UCB for layer in spec.layers for p in layer)
            if all(p.kind is PolicyKind.ALPHA_UCB for p in spec.layers[-1]):
                reports.append(bounds.bottom_layer_bound(arms, [p.alpha for p in spec.layers[-1]], n))
            if all_ucb and spec.top.kind is PolicyKind.ALPHA_UCB:
                alpha1 = [min(p.alpha for p in layer) for layer in spec.layers]
                reports.append(
                    bounds.good_expert_bound(spec.top.alpha, alpha1, spec.layer_sizes, arms, n, eps)
                )
    if arms.kind is ArmKind.BERNOULLI:
        try:
            lr = bounds.lai_robbins_coefficient(arms.means)
            reports.append(bounds.BoundReport(name="lai_robbins_lower", coefficient=lr, n=n))
        except bounds.BoundError:
            pass
    return reports, [str(w.message) for w in caught]


def _table(reports) -> str:
    rows = [("bound", "coef(ln n)", "constant", "value")]
    for r in reports:
        rows.append(
            (
                r.name,
                f"{r.coefficient:.6g}",
                "-" if r.constant is None else f"{r.constant:.6g}",
                "-" if r.value is None else f"{r.value:.6g}",
            )
        )
    widths = [max(len(row[c]) for row in rows) for c in range(4)]
    return "\n".join("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in rows)


def cmd_bounds(args) -> int:
    cfg = parse_config(_read(args.config))
    if cfg.arms is None:
        raise ConfigError("<root>: bounds needs 'arms'")
    n = args.n or cfg.horizon or 10_000
    reports, notes = _bound_reports(cfg, n)
    print(json.dumps({"n": n, "bounds": [r.to_dict() for r in reports], "warnings": notes}, indent=2))
    print(_table(reports))
    return EXIT_OK


def _experiment_config(args) -> ExperimentConfig:
    kind = _EXPERIMENTS[args.name]
    doc = ExperimentConfig.preset(kind, args.scale).to_dict()
    if args.config:
        user = parse_config(_read(args.config))  # validates the whole document first
        if user.experiment is not None:
            raw = json.loads(_read(args.config))["experiment"]
            if ExperimentKind(raw["kind"]) is not kind:
                raise ConfigError(f"experiment.kind: {raw['kind']} does not match subcommand {args.name}")
            doc.update(raw)
        if user.arms is not None:
            doc["arms"] = user.arms.to_dict()
        if user.hierarchy is not None:
            doc["hierarchy"] = user.hierarchy.to_dict()
    if args.seed is not None:
        doc["seed"] = args.seed
    cfg = parse_config(json.dumps({"experiment": doc})).experiment
    cfg.workers = args.workers
    return cfg


def cmd_experiment(args) -> int:
    cfg = _experiment_config(args)
    result = run_experiment(cfg)
    out = _out_dir(args.out)
    cfg_doc = cfg.to_dict()
    summary = {"config": cfg_doc, "config_hash": config_hash(cfg_doc), **result.summary}
    (out / "summary.json").write_text(json.dumps(summary, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    write_jsonl(out / "records.jsonl", result.records)
    emit_csv(result, out)
    for stem in list(result.curves)[: args.plots]:
        x_name, x = result.curve_x[stem]
        emit_plot(result.curves[stem], out / f"{stem}.svg", x=x, title=stem, xlabel=x_name)
    print(json.dumps(result.summary, sort_keys=True))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hierbandit", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run one hierarchy and write its trace tables")
    s.add_argument("--config", required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--horizon", type=int)
    s.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./out)")
    s.set_defaults(func=cmd_simulate)

    b = sub.add_parser("bounds", help="evaluate the closed-form regret bounds")
    b.add_argument("--config", required=True)
    b.add_argument("--n", type=int, help="horizon at which to evaluate (default: config horizon)")
    b.set_defaults(func=cmd_bounds)

    e = sub.add_parser("experiment", help="reproduce one of the three experiments")
    e.add_argument("name", choices=sorted(_EXPERIMENTS))
    e.add_argument("--config")
    e.add_argument("--seed", type=int)
    e.add_argument("--scale", choices=["desk", "paper"], default="desk")
    e.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./out)")
    e.add_argument("--workers", type=int, default=1)
    e.add_argument("--plots", type=int, default=6, help="number of curve files also rendered as SVG")
    e.set_defaults(func=cmd_experiment)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
