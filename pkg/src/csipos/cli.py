"""Command-line entry point.

Subcommands: simulate, ingest, train, eval, exp1, exp2, plot. Commands read
JSON config documents (--config), write all artefacts under --out (default
root taken from CSIPOS_OUT_ROOT), and record a replayable run manifest before
producing any output. Exit codes: 0 ok, 2 config error, 3 data error,
4 training divergence, 1 unexpected failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, configs, metrics
from .data import (
    ingest_external,
    load_dataset,
    split_indices,
    store_dataset,
    to_dataset,
)
from .errors import ConfigError, CsiposError, DataFormatError, DivergenceError
from .experiments import run_cross_environment, run_nomadic, standard_scenarios
from .simulate import generate_grid_dataset, generate_timeseries
from .training import (
    load_checkpoint,
    read_checkpoint_manifest,
    save_checkpoint,
    train,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_DIVERGENCE = 4


def _out_dir(args) -> Path:
    root = os.environ.get("CSIPOS_OUT_ROOT", ".")
    out = Path(args.out) if args.out else Path(root) / f"csipos-{args.command}-{int(time.time())}"
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_run_manifest(out: Path, args, seed) -> None:
    manifest = {
        "command": args.command,
        "config": str(getattr(args, "config", None)),
        "inputs": {
            k: str(getattr(args, k))
            for k in ("dataset", "checkpoint", "results", "input")
            if getattr(args, k, None) is not None
        },
        "seed": seed,
        "out": str(out),
        "tool_version": __version__,
        "created_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }
    (out / "run_manifest.json").write_text(json.dumps(manifest, indent=2), encoding="utf-8")


def _seed(args, doc: dict, default=0):
    if getattr(args, "seed", None) is not None:
        return int(args.seed)
    return int(doc.get("seed", default))


def _write_table(path_base: Path, header: list, rows: list) -> None:
    """Emit one table as aligned text and as CSV."""
    with open(path_base.with_suffix(".csv"), "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    widths = [max(len(str(h)), *(len(str(r[i])) for r in rows)) if rows else len(str(h)) for i, h in enumerate(header)]
    lines = ["  ".join(str(h).rjust(w) for h, w in zip(header, widths))]
    lines += ["  ".join(str(c).rjust(w) for c, w in zip(row, widths)) for row in rows]
    path_base.with_suffix(".txt").write_text("\n".join(lines) + "\n", encoding="utf-8")


def cmd_simulate(args) -> int:
    doc = configs.load_config(args.config)
    seed = _seed(args, doc)
    out = _out_dir(args)
    _write_run_manifest(out, args, seed)

    radio = configs.radio_from_dict(doc.get("radio", {}))
    geom = configs.geometry_from_dict(doc.get("array", {}))
    env = configs.environment_from_dict(doc.get("environment", {}))
    mode = doc.get("mode", "grid")
    if mode == "grid":
        grid = configs.require(doc, "grid", "simulate config")
        samples = generate_grid_dataset(
            configs.require(grid, "area_mm", "grid"),
            configs.require(grid, "spacing_mm", "grid"),
            grid.get("user_height", 1.0),
            env,
            geom,
            radio,
            seed=seed,
            workers=args.workers,
        )
    elif mode == "timeseries":
        ts = configs.require(doc, "timeseries", "simulate config")
        samples = generate_timeseries(
            configs.require(ts, "users", "timeseries"),
            env,
            ts.get("duration", 120.0),
            ts.get("dt", 0.5),
            geom,
            radio,
            seed=seed,
        )
    else:
        raise ConfigError(f"simulate mode must be 'grid' or 'timeseries', got {mode!r}")

    dataset = to_dataset(samples)
    store_dataset(dataset, out / "dataset")
    print(f"wrote {len(dataset)} records to {out / 'dataset'}")
    return EXIT_OK


def cmd_ingest(args) -> int:
    out = _out_dir(args)
    _write_run_manifest(out, args, None)
    expected = None
    if args.expect_shape:
        try:
            expected = tuple(int(v) for v in args.expect_shape.lower().split("x"))
            assert len(expected) == 2
        except (ValueError, AssertionError):
            raise ConfigError(f"--expect-shape must look like 64x100, got {args.expect_shape!r}")
    dataset = ingest_external(args.input, args.adapter, expected_shape=expected)
    store_dataset(dataset, out / "dataset")
    print(f"ingested {len(dataset)} records via {args.adapter!r} to {out / 'dataset'}")
    return EXIT_OK


def cmd_train(args) -> int:
    doc = configs.load_config(args.config) if args.config else {}
    seed = _seed(args, doc)
    out = _out_dir(args)
    _write_run_manifest(out, args, seed)

    dataset = load_dataset(args.dataset)
    model_doc = dict(doc.get("model", {}))
    model_doc.setdefault("input_shape", [dataset.num_antennas, dataset.num_subcarriers])
    model_config = configs.model_config_from_dict(model_doc)
    train_doc = dict(doc.get("train", {}))
    train_doc.setdefault("seed", seed)
    if args.workers:
        train_doc.setdefault("num_threads", args.workers)
    train_config = configs.train_config_from_dict(train_doc)
    split_doc = dict(doc.get("split", {}))
    split_doc.setdefault("seed", seed)
    split_spec = configs.split_from_dict(split_doc)
    wavelength = float(doc.get("report_wavelength", metrics.DEFAULT_REPORT_WAVELENGTH_MM))

    from .experiments import run_benchmark

    bench = run_benchmark(dataset, model_config, train_config, split_spec, wavelength)
    extra = {
        "norm_scale": bench.norm_stats.scale,
        "split": bench.result.provenance["split"],
        "report_wavelength": wavelength,
        "dataset_fingerprint": dataset.fingerprint(),
        "train_config": configs.train_config_to_dict(train_config),
    }
    save_checkpoint(bench.model, bench.history, out / "checkpoint", extra=extra)
    summary = bench.summary
    _write_table(
        out / "test_summary",
        ["split", "mean_mm", "mean_lambda"],
        [["test", f"{summary.mean_mm:.2f}", f"{summary.mean_lambda:.3f}"]],
    )
    print(f"test mean error: {summary.mean_mm:.2f} mm / {summary.mean_lambda:.3f} lambda")
    print(f"checkpoint written to {out / 'checkpoint'}")
    return EXIT_OK


def _normalised_features(dataset, manifest_extra):
    scale = manifest_extra.get("norm_scale")
    if scale:
        return dataset.features / np.float32(scale)
    return dataset.features


def cmd_eval(args) -> int:
    out = _out_dir(args)
    _write_run_manifest(out, args, None)
    model, _history = load_checkpoint(args.checkpoint)
    extra = read_checkpoint_manifest(args.checkpoint).get("extra", {})
    wavelength = float(extra.get("report_wavelength", metrics.DEFAULT_REPORT_WAVELENGTH_MM))
    dataset = load_dataset(args.dataset)

    if args.split == "all":
        subset = np.arange(len(dataset))
    else:
        split_doc = extra.get("split") or {}
        spec = configs.split_from_dict(split_doc)
        tr, va, te = split_indices(len(dataset), spec)
        subset = {"train": tr, "val": va, "test": te}[args.split]

    from .network import predict_positions

    part = dataset.subset(subset)
    estimates = predict_positions(model, _normalised_features(part, extra))
    summary = metrics.ErrorSummary.from_estimates(estimates, part.labels, wavelength)
    (out / "summary.json").write_text(json.dumps(summary.to_dict(), indent=2), encoding="utf-8")
    _write_table(
        out / "summary",
        ["split", "mean_mm", "mean_lambda"],
        [[args.split, f"{summary.mean_mm:.2f}", f"{summary.mean_lambda:.3f}"]],
    )
    print(f"{summary.mean_mm:.2f} mm / {summary.mean_lambda:.3f} lambda ({args.split}, n={len(part)})")
    return EXIT_OK


def cmd_exp1(args) -> int:
    doc = configs.load_config(args.config)
    seed = _seed(args, doc)
    out = _out_dir(args)
    _write_run_manifest(out, args, seed)

    dataset_a = load_dataset(configs.require(doc, "dataset_a", "exp1 config"))
    dataset_b = load_dataset(configs.require(doc, "dataset_b", "exp1 config"))
    model_doc = dict(doc.get("model", {}))
    model_doc.setdefault("input_shape", [dataset_a.num_antennas, dataset_a.num_subcarriers])
    model_config = configs.model_config_from_dict(model_doc)
    train_doc = dict(doc.get("train", {}))
    train_doc.setdefault("seed", seed)
    train_config = configs.train_config_from_dict(train_doc)
    split_doc = dict(doc.get("split", {}))
    split_doc.setdefault("seed", seed)
    split_spec = configs.split_from_dict(split_doc)
    area = configs.require(doc, "area_mm", "exp1 config")
    wavelength = float(doc.get("report_wavelength", metrics.DEFAULT_REPORT_WAVELENGTH_MM))

    outcome = run_cross_environment(
        dataset_a,
        dataset_b,
        model_config,
        train_config,
        area,
        split_spec,
        wavelength,
        n_mc=int(doc.get("baseline_draws", 1_000_000)),
        baseline_seed=seed,
    )
    rows = [
        ["trained-env test", f"{outcome.summary_in_env.mean_mm:.2f}", f"{outcome.summary_in_env.mean_lambda:.3f}"],
        ["cross-env test", f"{outcome.summary_cross_env.mean_mm:.2f}", f"{outcome.summary_cross_env.mean_lambda:.3f}"],
        ["centroid baseline", f"{outcome.centroid_baseline_mm:.2f}", f"{metrics.to_lambda(outcome.centroid_baseline_mm, wavelength):.3f}"],
        ["random-pair baseline", f"{outcome.random_pair_baseline_mm:.2f}", f"{metrics.to_lambda(outcome.random_pair_baseline_mm, wavelength):.3f}"],
    ]
    _write_table(out / "report", ["quantity", "mean_mm", "mean_lambda"], rows)
    payload = {
        "in_env": outcome.summary_in_env.to_dict(),
        "cross_env": outcome.summary_cross_env.to_dict(),
        "cross_env_mean_vector_mm": [float(v) for v in outcome.summary_cross_env.mean_vector_mm],
        "centroid_baseline_mm": outcome.centroid_baseline_mm,
        "random_pair_baseline_mm": outcome.random_pair_baseline_mm,
        "provenance": outcome.result.provenance,
    }
    (out / "report.json").write_text(json.dumps(payload, indent=2), encoding="utf-8")
    for label, mm, lam in rows:
        print(f"{label:>22}: {mm} mm / {lam} lambda")
    vec = outcome.summary_cross_env.mean_vector_mm
    print(f"cross-env mean error direction: ({vec[0]:.2f}, {vec[1]:.2f}) mm")
    return EXIT_OK


def cmd_exp2(args) -> int:
    doc = configs.load_config(args.config)
    seed = _seed(args, doc)
    out = _out_dir(args)
    _write_run_manifest(out, args, seed)

    model, _history = load_checkpoint(args.checkpoint)
    extra = read_checkpoint_manifest(args.checkpoint).get("extra", {})
    radio = configs.radio_from_dict(doc.get("radio", {}))
    geom = configs.geometry_from_dict(doc.get("array", {}))
    env = configs.environment_from_dict(doc.get("environment", {}))
    gain = configs.complex_from(doc.get("agent_scatter_gain", 0.5))
    scenarios = standard_scenarios(
        configs.require(doc, "area_mm", "exp2 config"),
        user_height=doc.get("user_height", 1.0),
        walker_height=doc.get("walker_height", 1.0),
        margin=doc.get("margin", 0.5),
        duration=doc.get("duration", 120.0),
        dt=doc.get("dt", 0.5),
        agent_speed=doc.get("agent_speed", 1.0),
        agent_body_radius=doc.get("agent_body_radius", 0.3),
        agent_scatter_gain=gain,
    )
    wanted = doc.get("scenarios")
    if wanted:
        missing = [n for n in wanted if n not in {s.name for s in scenarios}]
        if missing:
            raise ConfigError(f"unknown scenario names {missing}")
        scenarios = [s for s in scenarios if s.name in set(wanted) | {"none"}]

    from .data import NormStats

    scale = extra.get("norm_scale")
    stats = NormStats(scale=scale) if scale else None
    outcome = run_nomadic(model, scenarios, env, geom, radio, seed=seed, norm_stats=stats)
    report = outcome.report

    scenario_order = [s.name for s in scenarios if s.name != "none"]
    header = ["user", "ref"] + scenario_order
    rows = []
    for user in report.users():
        row = [user, f"{report.entry(user, 'none').mean_deviation_mm:.2f}"]
        for name in scenario_order:
            entry = report.entry(user, name)
            mark = "*" if entry.ever_blocked else ""
            row.append(f"{entry.mean_deviation_mm:.2f}{mark}")
        rows.append(row)
    _write_table(out / "deviation_table", header, rows)

    for name in ["none"] + scenario_order:
        series_rows = []
        for user in report.users():
            entry = report.entry(user, name)
            for t, dev, blk in zip(entry.times_s, entry.deviations_mm, entry.blocked):
                series_rows.append([repr(float(t)), user, repr(float(dev)), int(blk)])
        with open(out / f"series_{name}.csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t_s", "user", "deviation_mm", "blocked"])
            writer.writerows(series_rows)

    payload = {
        "mean_deviation_mm": {
            name: {str(u): report.entry(u, name).mean_deviation_mm for u in report.users()}
            for name in ["none"] + scenario_order
        },
        "ever_blocked": {
            name: {str(u): report.entry(u, name).ever_blocked for u in report.users()}
            for name in ["none"] + scenario_order
        },
        "provenance": outcome.result.provenance,
    }
    (out / "result.json").write_text(json.dumps(payload, indent=2), encoding="utf-8")
    print(f"deviation tables and series written to {out} ('*' marks a blocked direct path)")
    return EXIT_OK


def cmd_plot(args) -> int:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out = _out_dir(args)
    _write_run_manifest(out, args, None)
    results = Path(args.results)
    series_files = sorted(results.glob("series_*.csv"))
    summary_file = results / "summary.json"
    if not series_files and not summary_file.is_file():
        raise DataFormatError(f"nothing to plot under {results}")

    made = []
    for path in series_files:
        name = path.stem.replace("series_", "")
        per_user: dict = {}
        with open(path, newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                per_user.setdefault(int(row["user"]), []).append(
                    (float(row["t_s"]), float(row["deviation_mm"]))
                )
        fig, ax = plt.subplots(figsize=(8, 4))
        for user, pts in sorted(per_user.items()):
            pts.sort()
            t = [p[0] for p in pts]
            d = [p[1] for p in pts]
            if args.first_minute:
                d = [v for tv, v in zip(t, d) if tv < 60.0]
                t = [tv for tv in t if tv < 60.0]
            ax.plot(t, d, label=f"user {user}")
        ax.set_xlabel("time [s]")
        ax.set_ylabel("deviation [mm]")
        ax.set_title(f"scenario: {name}")
        ax.legend()
        fig.tight_layout()
        target = out / f"deviation_{name}.png"
        fig.savefig(target, dpi=120)
        plt.close(fig)
        made.append(target)

    if summary_file.is_file():
        summary = json.loads(summary_file.read_text(encoding="utf-8"))
        if "cdf" in summary:
            errs = np.asarray(summary["cdf"], dtype=np.float64)
            fig, ax = plt.subplots(figsize=(6, 4))
            ax.plot(errs, np.arange(1, len(errs) + 1) / len(errs))
            ax.set_xlabel("error [mm]")
            ax.set_ylabel("fraction of samples")
            ax.set_title("error CDF")
            fig.tight_layout()
            target = out / "error_cdf.png"
            fig.savefig(target, dpi=120)
            plt.close(fig)
            made.append(target)

    for path in made:
        print(f"wrote {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="csipos", description=__doc__)
    parser.add_argument("--version", action="version", version=f"csipos {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=False):
        p.add_argument("--config", required=config_required, help="JSON config document")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default=None, help="output directory (default under CSIPOS_OUT_ROOT)")
        p.add_argument("--workers", type=int, default=None, help="cap internal parallelism")

    p = sub.add_parser("simulate", help="generate a synthetic dataset from a scenario config")
    common(p, config_required=True)

    p = sub.add_parser("ingest", help="read an external dataset through a named adapter")
    common(p)
    p.add_argument("--input", required=True, help="path of the external dataset")
    p.add_argument("--adapter", required=True, help="registered adapter name")
    p.add_argument("--expect-shape", default=None, help="required MxK, e.g. 64x100")

    p = sub.add_parser("train", help="train a positioning model on a stored dataset")
    common(p)
    p.add_argument("--dataset", required=True, help="dataset directory")

    p = sub.add_parser("eval", help="evaluate a checkpoint on a stored dataset")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--split", choices=["train", "val", "test", "all"], default="all")

    p = sub.add_parser("exp1", help="cross-environment study: train in A, test in A and B")
    common(p, config_required=True)

    p = sub.add_parser("exp2", help="nomadic study: deviation under a moving agent")
    common(p, config_required=True)
    p.add_argument("--checkpoint", required=True)

    p = sub.add_parser("plot", help="render deviation series and error CDFs")
    common(p)
    p.add_argument("--results", required=True, help="directory produced by eval/exp2")
    p.add_argument("--first-minute", action="store_true", help="restrict series plots to t < 60 s")

    return parser


_COMMANDS = {
    "simulate": cmd_simulate,
    "ingest": cmd_ingest,
    "train": cmd_train,
    "eval": cmd_eval,
    "exp1": cmd_exp1,
    "exp2": cmd_exp2,
    "plot": cmd_plot,
}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except (CsiposError, FileNotFoundError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
