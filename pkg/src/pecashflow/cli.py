"""Command-line interface: one subcommand per pipeline stage.

Every invocation writes its artifacts into ``--out-dir`` plus a
``manifest.json`` listing the resolved options and the SHA-256 of every input
and output file. No clock or host data is recorded, so re-running a stage with
the same inputs and seed reproduces the directory byte for byte.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import sys
import zlib
from pathlib import Path

import numpy as np

from . import __version__, macro as macro_mod, metrics, pipelines, synthetic
from .dataio import atomic_write_text, dumps_json, read_funds_csv, reports_to_jsonl, write_funds_csv
from .nn import load_checkpoint, save_checkpoint
from .windowing import (FEATURE_SETS, SplitConfig, expected_window_count, load_windows,
                        save_windows, split_by_fund)

COMMANDS = ("synth", "prepare", "calibrate", "train-direct", "train-indirect", "predict", "evaluate", "stress")


class CliError(Exception):
    """Data or input problem reported as a one-line diagnostic with exit 1."""


def stage_seed(root: int, stage: str) -> int:
    """Independent 32-bit seed for one stage, derived from the root seed."""
    ss = np.random.SeedSequence([int(root), zlib.crc32(stage.encode("utf-8"))])
    return int(ss.generate_state(1)[0])


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class Run:
    """Bookkeeping for one invocation: tracks inputs and outputs for the manifest."""

    def __init__(self, args):
        self.args = args
        self.out_dir = Path(args.out_dir)
        self.inputs = {}
        self.outputs = {}

    def input(self, path) -> Path:
        p = Path(path)
        if not p.exists():
            raise CliError(f"input not found: {p}")
        if p.is_file():
            self.inputs[str(path)] = sha256_file(p)
        else:
            for f in sorted(p.rglob("*")):
                if f.is_file():
                    self.inputs[str(f)] = sha256_file(f)
        return p

    def path(self, name: str) -> Path:
        return self.out_dir / name

    def wrote(self, *paths) -> None:
        for p in paths:
            p = Path(p)
            self.outputs[p.relative_to(self.out_dir).as_posix()] = sha256_file(p)

    def write_json(self, name: str, obj) -> Path:
        p = self.path(name)
        atomic_write_text(p, dumps_json(obj))
        self.wrote(p)
        return p

    def write_text(self, name: str, text: str) -> Path:
        p = self.path(name)
        atomic_write_text(p, text)
        self.wrote(p)
        return p

    def manifest(self) -> dict:
        opts = {k: v for k, v in vars(self.args).items() if k not in ("func", "config")}
        return {
            "command": self.args.command,
            "version": __version__,
            "seed": self.args.seed,
            "options": opts,
            "inputs": dict(sorted(self.inputs.items())),
            "outputs": dict(sorted(self.outputs.items())),
        }


# ---------------------------------------------------------------- helpers

def parse_vintages(text: str) -> list:
    """``2000:2013`` (inclusive range) or ``2010,2012``."""
    try:
        if ":" in text:
            lo, hi = (int(v) for v in text.split(":"))
            if hi < lo:
                raise ValueError
            return list(range(lo, hi + 1))
        return sorted({int(v) for v in text.split(",")})
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad vintage range {text!r}; expected e.g. 2000:2013") from None


def parse_hidden(text: str) -> tuple:
    try:
        sizes = tuple(int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad hidden sizes {text!r}; expected e.g. 8,6,4") from None
    if len(sizes) != 3 or min(sizes) < 1:
        raise argparse.ArgumentTypeError("hidden sizes need three positive integers")
    return sizes


def read_funds(run: Run, path) -> list:
    return read_funds_csv(run.input(path))


def read_macro(run: Run, path) -> dict:
    return macro_mod.load_macro_dir(run.input(path))


def load_model(run: Run, path):
    net, d = load_checkpoint(run.input(path))
    if "pipeline" not in d:
        raise CliError(f"{path}: checkpoint lacks its pipeline config")
    return net, pipelines.PipelineConfig.from_dict(d["pipeline"])


def read_windows(run: Run, path):
    return load_windows(run.input(path))


def check_feature_space(ws, config: pipelines.PipelineConfig) -> None:
    arch = config.arch
    want = FEATURE_SETS[arch.features] + (macro_mod.MACRO_NAMES if arch.macro else ())
    if tuple(ws.features) != want:
        raise CliError(f"windows carry features {list(ws.features)} but {config.architecture} expects {list(want)}")
    if ws.target_space != arch.targets:
        raise CliError(f"windows target {ws.target_space!r} but {config.architecture} predicts {arch.targets!r}")
    if (ws.w_in, ws.w_out) != (config.w_in, config.w_out):
        raise CliError(f"windows are {ws.w_in}->{ws.w_out} quarters, model expects {config.w_in}->{config.w_out}")


def forecast_document(net, ws, config) -> dict:
    """Forecasts keyed and sorted by (fund_id, window_index)."""
    pred = pipelines.forecast_windows(net, ws, config)
    rows = sorted(
        ({"fund_id": w.fund_id, "window_index": w.window_index, "predicted": p.tolist()}
         for w, p in zip(ws.windows, pred)),
        key=lambda r: (r["fund_id"], r["window_index"]),
    )
    return {"architecture": config.architecture, "w_in": config.w_in, "w_out": config.w_out,
            "targets": list(FEATURE_SETS["flows"]), "forecasts": rows}


# ---------------------------------------------------------------- commands

def cmd_synth(run: Run) -> None:
    a = run.args
    seed = stage_seed(a.seed, "synth")
    cfg = synthetic.GeneratorConfig({v: a.per_vintage for v in a.vintages}, noise_sigma=a.noise_sigma,
                                    seed=seed, length_jitter=a.length_jitter)
    if a.generator == "yale":
        records, truth = synthetic.generate_yale_dataset(cfg)
        run.write_json("truth.json", {fid: {"rc": p.rc, "g": p.g, "b": p.b} for fid, p in truth.items()})
    else:
        records = synthetic.generate_buchner_dataset(cfg)
    masks = None
    if a.missing_rate > 0:
        records, masks = synthetic.inject_missing(records, a.missing_rate, stage_seed(a.seed, "missing"))
    write_funds_csv(run.path("funds.csv"), records)
    run.wrote(run.path("funds.csv"))
    run.write_json("generator.json", {"generator": a.generator, "config": cfg.to_dict(),
                                      "missing_rate": a.missing_rate,
                                      "removed_cells": 0 if masks is None else int(sum(m.sum() for m in masks.values()))})
    if a.macro:
        series = synthetic.gen_macro(min(a.vintages) - 2, max(cfg.cutoff[0], max(a.vintages)) + 1,
                                     stage_seed(a.seed, "macro"))
        for name, s in series.items():
            run.write_text(f"macro/{name}.csv", macro_mod.macro_to_csv(s))


def _pipeline_config(a) -> pipelines.PipelineConfig:
    return pipelines.PipelineConfig(a.architecture, a.w_in, a.w_out, a.threshold, a.train_fraction,
                                    stage_seed(a.seed, "split"))


def _prepared_series(run: Run, config, funds_path, macro_dir, threshold, scenario=None):
    records = read_funds(run, funds_path)
    table = None
    if config.arch.macro:
        if macro_dir is None:
            raise CliError(f"{config.architecture} needs --macro-dir")
        macro = read_macro(run, macro_dir)
        if scenario is not None:
            macro = macro_mod.apply_stress(macro, scenario)
        table = macro_mod.macro_feature_table(macro)
    return pipelines.prepare_dataset(records, threshold, table)


def cmd_prepare(run: Run) -> None:
    a = run.args
    config = _pipeline_config(a)
    series, reports = _prepared_series(run, config, a.funds, a.macro_dir, a.threshold)
    if not series:
        raise CliError("every fund was removed by the missing-data filter")
    train_funds, test_funds = split_by_fund(series, SplitConfig(a.train_fraction, config.seed))
    arch = config.arch
    counts = {}
    for name, funds in (("train", train_funds), ("test", test_funds)):
        ws = pipelines.cut_windows(funds, config)
        save_windows(ws, run.path(f"{name}_windows.bin"))
        run.wrote(run.path(f"{name}_windows.bin"))
        counts[name] = len(ws)
    run.write_text("imputation.jsonl", reports_to_jsonl(reports))
    run.write_json("split.json", {"train": sorted(f.fund_id for f in train_funds),
                                  "test": sorted(f.fund_id for f in test_funds)})
    run.write_json("prepare.json", {
        "pipeline": config.to_dict(),
        "n_funds": len(series),
        "n_removed": sum(r.removed for r in reports),
        "n_windows": counts,
        "expected_windows": (expected_window_count(series, config.w_in + config.w_out)
                             if arch.rolling else sum(len(f) >= config.w_in + config.w_out for f in series)),
    })


def labels_csv(ws) -> str:
    lines = ["fund_id,window_index,rc,g,b,objective"]
    for w in ws.windows:
        lines.append(",".join([w.fund_id, str(w.window_index)] + [repr(float(v)) for v in w.label]
                              + [repr(float(w.label_objective))]))
    return "\n".join(lines) + "\n"


def cmd_calibrate(run: Run) -> None:
    ws = pipelines.make_indirect_labels(read_windows(run, run.args.windows))
    stem = Path(run.args.windows).stem
    run.write_text(f"{stem}_labels.csv", labels_csv(ws))
    save_windows(ws, run.path(f"{stem}_labelled.bin"))
    run.wrote(run.path(f"{stem}_labelled.bin"))


def _train(run: Run, mode: str) -> None:
    a = run.args
    arch = pipelines.ARCHITECTURES.get(a.architecture)
    if arch is None or arch.mode != mode:
        names = [n for n, v in pipelines.ARCHITECTURES.items() if v.mode == mode]
        raise CliError(f"{a.architecture!r} is not a {mode} architecture; choose from {', '.join(names)}")
    ws = read_windows(run, a.windows)
    config = pipelines.PipelineConfig(a.architecture, ws.w_in, ws.w_out, seed=stage_seed(a.seed, "train"),
                                      epochs=a.epochs, batch_size=a.batch_size, learning_rate=a.learning_rate,
                                      hidden=a.hidden)
    check_feature_space(ws, config)
    val = read_windows(run, a.validation) if a.validation else None
    if mode == "indirect":
        if any(w.label is None for w in ws.windows):
            ws = pipelines.make_indirect_labels(ws)
        if val is not None and any(w.label is None for w in val.windows):
            val = pipelines.make_indirect_labels(val)
    net, history = pipelines.fit(ws, config, val)
    save_checkpoint(net, run.path("checkpoint.json"), {"pipeline": config.to_dict()})
    run.wrote(run.path("checkpoint.json"))
    run.write_json("history.json", history)


def cmd_train_direct(run: Run) -> None:
    _train(run, "direct")


def cmd_train_indirect(run: Run) -> None:
    _train(run, "indirect")


def cmd_predict(run: Run) -> None:
    net, config = load_model(run, run.args.checkpoint)
    ws = read_windows(run, run.args.windows)
    check_feature_space(ws, config)
    run.write_json("forecasts.json", forecast_document(net, ws, config))


def cmd_evaluate(run: Run) -> None:
    a = run.args
    net, config = load_model(run, a.checkpoint)
    ws = read_windows(run, a.windows)
    check_feature_space(ws, config)
    train_mse = None
    if a.train_windows:
        tw = read_windows(run, a.train_windows)
        check_feature_space(tw, config)
        train_mse = pipelines.evaluate(net, tw, config, with_benchmark=False)["metrics"]["mse"]
    ev = pipelines.evaluate(net, ws, config)
    report = metrics.metrics_report(ev, ws.windows, train_mse)
    run.write_json("metrics.json", {"config": config.to_dict(), **report.to_dict()})
    full = {"config": config.to_dict(), "metrics": report.to_dict(),
            "forecasts": pipelines.forecast_records(ws, ev)}
    run.write_json("report.json", full)
    if a.curves:
        run.wrote(*metrics.emit_curves(full, run.path("curves")))


def cmd_stress(run: Run) -> None:
    a = run.args
    net, config = load_model(run, a.checkpoint)
    if not config.arch.macro:
        raise CliError(f"{config.architecture} takes no macro inputs; stress needs a macro model such as direct_m5")
    scenario = macro_mod.load_scenario(run.input(a.scenario))
    keep = None
    if a.split:
        keep = json.loads(run.input(a.split).read_text(encoding="utf-8"))["test"]
    docs = {}
    for label, sc in (("baseline", None), ("stressed", scenario)):
        series, _ = _prepared_series(run, config, a.funds, a.macro_dir, a.threshold, sc)
        ws = pipelines.cut_windows(series, config)
        if keep is not None:
            ws = ws.subset_funds(keep)
        docs[label] = forecast_document(net, ws, config)
        run.write_json(f"{label}_forecasts.json", docs[label])
    base = np.array([r["predicted"] for r in docs["baseline"]["forecasts"]])
    stressed = np.array([r["predicted"] for r in docs["stressed"]["forecasts"]])
    diff = stressed - base
    run.write_json("stress_report.json", {
        "scenario": scenario.to_dict(),
        "n_windows": int(len(base)),
        "mean_baseline": base.mean(axis=(0, 1)).tolist() if len(base) else [],
        "mean_stressed": stressed.mean(axis=(0, 1)).tolist() if len(base) else [],
        "mean_change": diff.mean(axis=(0, 1)).tolist() if len(base) else [],
        "max_abs_change": float(np.abs(diff).max()) if len(base) else 0.0,
        "identical": bool(np.array_equal(base, stressed)),
    })


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="root seed (default 0)")
    common.add_argument("--out-dir", default=argparse.SUPPRESS, help="output directory (default .)")
    common.add_argument("--config", default=argparse.SUPPRESS, help="JSON file of option defaults")

    parser = argparse.ArgumentParser(prog="pecashflow", parents=[common],
                                     description="Private-equity cash-flow forecasting pipeline.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic fund dataset")
    p.add_argument("--vintages", type=parse_vintages, default=parse_vintages("2010:2013"))
    p.add_argument("--per-vintage", type=int, default=50)
    p.add_argument("--generator", choices=("yale", "buchner"), default="yale")
    p.add_argument("--noise-sigma", type=float, default=0.1)
    p.add_argument("--missing-rate", type=float, default=0.0)
    p.add_argument("--length-jitter", type=int, default=0)
    p.add_argument("--macro", action="store_true", help="also write synthetic macro series")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("prepare", parents=[common], help="filter, impute, pad, split and window")
    p.add_argument("--funds", required=True)
    p.add_argument("--architecture", default="direct_m3", choices=sorted(pipelines.ARCHITECTURES))
    p.add_argument("--w-in", type=int, default=None)
    p.add_argument("--w-out", type=int, default=None)
    p.add_argument("--threshold", type=float, default=0.30)
    p.add_argument("--train-fraction", type=float, default=0.8)
    p.add_argument("--macro-dir", default=None)
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("calibrate", parents=[common], help="emit Yale (rc, g, b) labels for windows")
    p.add_argument("--windows", required=True)
    p.set_defaults(func=cmd_calibrate)

    for name, func, default in (("train-direct", cmd_train_direct, "direct_m3"),
                                ("train-indirect", cmd_train_indirect, "indirect_gru")):
        p = sub.add_parser(name, parents=[common], help=f"train a {name.split('-')[1]} model")
        p.add_argument("--windows", required=True)
        p.add_argument("--validation", default=None)
        p.add_argument("--architecture", default=default)
        p.add_argument("--epochs", type=int, default=50)
        p.add_argument("--batch-size", type=int, default=32)
        p.add_argument("--learning-rate", type=float, default=1e-3)
        p.add_argument("--hidden", type=parse_hidden, default=None, help="override hidden widths, e.g. 8,6,4")
        p.set_defaults(func=func)

    p = sub.add_parser("predict", parents=[common], help="forecast windows with a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--windows", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", parents=[common], help="score a checkpoint against the Yale benchmark")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--windows", required=True)
    p.add_argument("--train-windows", default=None)
    p.add_argument("--curves", action="store_true", help="write per-window curve CSVs")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("stress", parents=[common], help="compare forecasts under a macro stress scenario")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--funds", required=True)
    p.add_argument("--macro-dir", required=True)
    p.add_argument("--scenario", required=True)
    p.add_argument("--split", default=None, help="split.json; restricts to its test funds")
    p.add_argument("--threshold", type=float, default=0.30)
    p.set_defaults(func=cmd_stress)
    return parser


def _apply_config(parser, argv) -> argparse.Namespace:
    """Parse twice: the second pass uses the JSON config as option defaults,
    so explicit flags still win."""
    args = parser.parse_args(argv)
    path = getattr(args, "config", None)
    if path is None:
        return args
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise CliError(f"config {path} must hold a JSON object")
    # flat keys apply to every command, a {"<command>": {...}} section to one
    flat = {k.replace("-", "_"): v for k, v in cfg.items() if not isinstance(v, dict)}
    flat.update({k.replace("-", "_"): v for k, v in cfg.get(args.command, {}).items()})
    sub = parser._subparsers._group_actions[0].choices[args.command]
    actions = {a.dest: a for a in sub._actions}
    unknown = sorted(set(flat) - set(actions))
    if unknown:
        raise CliError(f"config {path}: unknown option(s) for {args.command}: {', '.join(unknown)}")
    for k, v in flat.items():
        t = actions[k].type
        if isinstance(v, str) and t is not None:
            flat[k] = t(v)
        elif isinstance(v, list):
            flat[k] = tuple(v) if k == "hidden" else [int(x) for x in v]
    sub.set_defaults(**{k: v for k, v in flat.items() if k not in ("seed", "out_dir", "config")})
    args = parser.parse_args(argv)
    for k in ("seed", "out_dir"):
        if not hasattr(args, k) and k in flat:
            setattr(args, k, flat[k])
    return args


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    except (CliError, argparse.ArgumentTypeError) as exc:
        print(f"pecashflow: error: {exc}", file=sys.stderr)
        return 1
    args.seed = getattr(args, "seed", 0)
    args.out_dir = getattr(args, "out_dir", ".")
    run = Run(args)
    try:
        args.func(run)
        atomic_write_text(run.path("manifest.json"), dumps_json(run.manifest()))
    except (CliError, ValueError, KeyError, OSError, RuntimeError) as exc:
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        print(f"pecashflow {args.command}: error: {msg}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
