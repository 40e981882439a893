"""Command-line entry point: configure, run, and export results.

A run reads a flat INI-style config file and/or flags, executes the full
benchmark, and writes per-trial learning curves (CSV), a summary table
(CSV and aligned text), and a manifest that can itself be fed back in as a
config to reproduce the run. With ``--trace`` it instead exports the
ordered queried points of a single strategy on a 2-D dataset, plus the
per-step candidate score dump that makes the selection auditable.

Exit codes: 0 success, 2 config error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import os
import sys
import tempfile
import time
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from ._backend import backend_name
from .data import DataError, Dataset, SyntheticSpec, bundled_dataset_names
from .experiment import (ComparisonTable, DatasetRef, ExperimentConfig,
                         TrialResult, build_table, resolve_budget,
                         run_experiment, run_trial)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4

EXPERIMENT_KEYS = {"datasets", "strategies", "trials", "budget", "lambda",
                   "seed", "significance", "out", "trace"}
DATASET_FILE_KEYS = {"path", "format"}
DATASET_SYNTH_KEYS = {"synthetic", "per_class", "mean_pos", "mean_neg",
                      "cov", "seed"}


class ConfigError(ValueError):
    """Invalid configuration: unknown keys, bad values, missing files."""


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _parse_floats(text: str, n: int, what: str) -> tuple[float, ...]:
    parts = [p for p in text.replace(",", " ").split() if p]
    try:
        vals = tuple(float(p) for p in parts)
    except ValueError:
        raise ConfigError(f"{what}: expected numbers, got {text!r}") from None
    if len(vals) != n:
        raise ConfigError(f"{what}: expected {n} numbers, got {len(vals)}")
    return vals


def _parse_dataset_section(name: str, section) -> DatasetRef:
    keys = set(section.keys())
    if section.get("synthetic", "").strip().lower() in ("1", "true", "yes"):
        unknown = keys - DATASET_SYNTH_KEYS
        if unknown:
            raise ConfigError(
                f"[dataset {name}]: unknown keys {sorted(unknown)}")
        spec = SyntheticSpec(
            per_class=int(section.get("per_class", "100")),
            mean_pos=_parse_floats(section.get("mean_pos", "2, 0"), 2,
                                   f"[dataset {name}] mean_pos"),
            mean_neg=_parse_floats(section.get("mean_neg", "-2, 0"), 2,
                                   f"[dataset {name}] mean_neg"),
            cov=tuple(  # row-major 2x2
                (c[0], c[1]) for c in np.reshape(
                    _parse_floats(section.get("cov", "1, 0, 0, 1"), 4,
                                  f"[dataset {name}] cov"), (2, 2)).tolist()),
            seed=int(section.get("seed", "0")),
        )
        return DatasetRef(name=name, synthetic=spec)
    unknown = keys - DATASET_FILE_KEYS
    if unknown:
        raise ConfigError(f"[dataset {name}]: unknown keys {sorted(unknown)}")
    if "path" not in section:
        raise ConfigError(f"[dataset {name}]: needs a path or synthetic=true")
    path = Path(section["path"])
    if not path.is_file():
        raise ConfigError(f"[dataset {name}]: no such file {path}")
    fmt = section.get("format") or _infer_format(path)
    if fmt not in ("csv", "libsvm"):
        raise ConfigError(f"[dataset {name}]: unknown format {fmt!r}")
    return DatasetRef(name=name, path=str(path.resolve()), fmt=fmt)


def _infer_format(path: Path) -> str:
    if path.suffix == ".csv":
        return "csv"
    if path.suffix in (".libsvm", ".svm", ".svmlight"):
        return "libsvm"
    raise ConfigError(f"cannot infer format of {path}; specify format=")


def _resolve_dataset(name: str, sections: dict[str, DatasetRef]) -> DatasetRef:
    if name in sections:
        return sections[name]
    if name in bundled_dataset_names():
        return DatasetRef(name=name)
    path = Path(name)
    if path.is_file():
        return DatasetRef(name=path.stem, path=str(path.resolve()),
                          fmt=_infer_format(path))
    raise ConfigError(
        f"unknown dataset {name!r}: not a config section, bundled name "
        f"({', '.join(bundled_dataset_names())}) or existing file")


def _split_list(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def parse_config(config_path: str | None, args: argparse.Namespace
                 ) -> tuple[ExperimentConfig, Path, bool]:
    """Merge config file and flags into (config, out dir, trace mode)."""
    values: dict[str, str] = {}
    sections: dict[str, DatasetRef] = {}
    if config_path is not None:
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str  # keep keys case-sensitive
        if not Path(config_path).is_file():
            raise ConfigError(f"no such config file: {config_path}")
        try:
            cp.read(config_path, encoding="utf-8")
        except configparser.Error as exc:
            raise ConfigError(f"cannot parse {config_path}: {exc}") from None
        for section in cp.sections():
            if section == "experiment":
                unknown = set(cp[section]) - EXPERIMENT_KEYS
                if unknown:
                    raise ConfigError(
                        f"[experiment]: unknown keys {sorted(unknown)}")
                values.update(cp[section])
            elif section.startswith("dataset "):
                name = section[len("dataset "):].strip()
                if not name:
                    raise ConfigError("dataset section needs a name")
                sections[name] = _parse_dataset_section(name, cp[section])
            elif section == "manifest":
                pass  # informational block written by previous runs
            else:
                raise ConfigError(f"unknown config section [{section}]")

    if args.datasets is not None:
        values["datasets"] = args.datasets
    if args.strategies is not None:
        values["strategies"] = args.strategies
    if args.trials is not None:
        values["trials"] = str(args.trials)
    if args.budget is not None:
        values["budget"] = args.budget
    if args.lam is not None:
        values["lambda"] = str(args.lam)
    if args.seed is not None:
        values["seed"] = str(args.seed)
    if args.out is not None:
        values["out"] = args.out
    if args.trace:
        values["trace"] = "true"

    if "datasets" not in values:
        raise ConfigError("no datasets given (flag --datasets or config)")
    if "strategies" not in values:
        raise ConfigError("no strategies given (flag --strategies or config)")
    refs = [_resolve_dataset(n, sections) for n in _split_list(values["datasets"])]
    budget: int | str | None = None
    if "budget" in values:
        if values["budget"].strip().lower() == "full":
            budget = "full"
        else:
            try:
                budget = int(values["budget"])
            except ValueError:
                raise ConfigError(
                    f"budget must be an integer or 'full', got "
                    f"{values['budget']!r}") from None
    try:
        cfg = ExperimentConfig(
            datasets=tuple(refs),
            strategies=tuple(_split_list(values["strategies"])),
            trials=int(values.get("trials", "20")),
            budget=budget,
            lam=float(values.get("lambda", "100")),
            base_seed=int(values.get("seed", "0")),
            significance=float(values.get("significance", "0.05")),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    out = Path(values.get("out", "uncertal-out"))
    trace = values.get("trace", "").strip().lower() in ("1", "true", "yes")
    return cfg, out, trace


def _checksum(ref: DatasetRef, ds: Dataset) -> str:
    h = hashlib.sha256()
    if ref.path is not None:
        h.update(Path(ref.path).read_bytes())
    elif ref.synthetic is not None:
        h.update(ds.features.tobytes())
        h.update(ds.labels.tobytes())
    else:  # bundled
        from importlib import resources
        pkg = resources.files("uncertal.datasets")
        for ext in (".csv", ".libsvm"):
            cand = pkg / f"{ref.name}{ext}"
            if cand.is_file():
                h.update(cand.read_bytes())
                break
    return h.hexdigest()


def write_curves(path: Path, results: list[TrialResult]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("dataset,strategy,trial,step,accuracy\n")
        for r in results:
            for step, acc in enumerate(r.curve.accuracies):
                fh.write(f"{r.dataset},{r.strategy},{r.trial},{step},{_fmt(acc)}\n")


def format_summary_csv(table: ComparisonTable) -> str:
    lines = ["dataset," + ",".join(table.strategies)]
    for i, ds in enumerate(table.datasets):
        lines.append(ds + "," + ",".join(_fmt(v) for v in table.mean_alc[i]))
    lines.append("Mean," + ",".join(_fmt(v) for v in table.mean_row()))
    lines.append("Average Rank," + ",".join(_fmt(v) for v in table.average_rank))
    for (new, base), (w, t, l) in table.win_tie_loss.items():
        lines.append(f"win/tie/loss,{new} vs {base},{w}/{t}/{l}")
    return "\n".join(lines) + "\n"


def format_summary_text(table: ComparisonTable) -> str:
    width = max(12, max((len(d) for d in table.datasets), default=0) + 2)
    cols = [max(8, len(s) + 2) for s in table.strategies]
    out = ["dataset".ljust(width)
           + "".join(s.rjust(c) for s, c in zip(table.strategies, cols))]
    for i, ds in enumerate(table.datasets):
        out.append(ds.ljust(width) + "".join(
            f"{v:.4f}".rjust(c) for v, c in zip(table.mean_alc[i], cols)))
    out.append("Mean".ljust(width) + "".join(
        f"{v:.4f}".rjust(c) for v, c in zip(table.mean_row(), cols)))
    out.append("Average Rank".ljust(width) + "".join(
        f"{v:.3f}".rjust(c) for v, c in zip(table.average_rank, cols)))
    if table.win_tie_loss:
        parts = [f"{new} vs {base} = {w}/{t}/{l}"
                 for (new, base), (w, t, l) in table.win_tie_loss.items()]
        out.append("win/tie/loss: " + "; ".join(parts))
    return "\n".join(out) + "\n"


def write_manifest(path: Path, cfg: ExperimentConfig, out_dir: Path,
                   trace: bool, datasets: dict[str, Dataset],
                   wall_seconds: float) -> None:
    lines = ["[experiment]"]
    lines.append("datasets = " + ", ".join(r.name for r in cfg.datasets))
    lines.append("strategies = " + ", ".join(cfg.strategies))
    lines.append(f"trials = {cfg.trials}")
    if cfg.budget is not None:
        lines.append(f"budget = {cfg.budget}")
    lines.append(f"lambda = {cfg.lam!r}")
    lines.append(f"seed = {cfg.base_seed}")
    lines.append(f"significance = {cfg.significance!r}")
    lines.append(f"out = {out_dir}")
    if trace:
        lines.append("trace = true")
    for ref in cfg.datasets:
        if ref.path is not None:
            lines += ["", f"[dataset {ref.name}]", f"path = {ref.path}",
                      f"format = {ref.fmt}"]
        elif ref.synthetic is not None:
            s = ref.synthetic
            cov = ", ".join(repr(float(v)) for row in s.cov for v in row)
            lines += ["", f"[dataset {ref.name}]", "synthetic = true",
                      f"per_class = {s.per_class}",
                      f"mean_pos = {s.mean_pos[0]!r}, {s.mean_pos[1]!r}",
                      f"mean_neg = {s.mean_neg[0]!r}, {s.mean_neg[1]!r}",
                      f"cov = {cov}", f"seed = {s.seed}"]
    lines += ["", "[manifest]",
              f"tool = uncertal {__version__}",
              f"backend = {backend_name()}",
              f"created_utc = {datetime.now(timezone.utc).isoformat()}",
              f"wall_seconds = {wall_seconds:.3f}"]
    for ref in cfg.datasets:
        ds = datasets[ref.name]
        lines.append(f"checksum_{ref.name} = sha256:{_checksum(ref, ds)}")
        pool0 = (ds.n + 1) // 2 - 2
        lines.append(
            f"budget_{ref.name} = {resolve_budget(cfg.budget, pool0, quiet=True)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _run_mode(cfg: ExperimentConfig, out_dir: Path, tmp: Path,
              datasets: dict[str, Dataset]) -> list[Path]:
    t0 = time.monotonic()
    results = run_experiment(cfg, datasets)
    table = build_table(results, cfg)
    write_curves(tmp / "curves.csv", results)
    (tmp / "summary.csv").write_text(format_summary_csv(table), encoding="utf-8")
    (tmp / "summary.txt").write_text(format_summary_text(table), encoding="utf-8")
    write_manifest(tmp / "manifest.txt", cfg, out_dir, False, datasets,
                   time.monotonic() - t0)
    return [tmp / n for n in ("curves.csv", "summary.csv", "summary.txt",
                              "manifest.txt")]


def _trace_mode(cfg: ExperimentConfig, out_dir: Path, tmp: Path,
                datasets: dict[str, Dataset]) -> list[Path]:
    if len(cfg.datasets) != 1 or len(cfg.strategies) != 1:
        raise ConfigError("--trace needs exactly one dataset and one strategy")
    ds = datasets[cfg.datasets[0].name]
    if ds.dim != 2:
        raise DataError(
            f"{ds.name}: trace export needs a 2-D dataset, have {ds.dim}-D")
    t0 = time.monotonic()
    steps: list[tuple[int, object, int]] = []
    run_trial(ds, cfg.strategies[0], cfg, 0,
              recorder=lambda step, table, chosen:
              steps.append((step, table, chosen)))
    with open(tmp / "trace.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("step,x1,x2,true_label,score\n")
        for step, table, chosen in steps:
            x1, x2 = ds.features[chosen]
            lab = int(ds.labels[chosen])
            score = ""
            if table is not None:
                pos = int(np.searchsorted(table.pool_indices, chosen))
                score = _fmt(table.aggregated[pos])
            fh.write(f"{step},{_fmt(x1)},{_fmt(x2)},{lab},{score}\n")
    with open(tmp / "trace_scores.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("step,index,x1,x2,p_pos,max_posterior,score\n")
        for step, table, _ in steps:
            if table is None:
                continue
            for j, idx in enumerate(table.pool_indices):
                x1, x2 = ds.features[idx]
                p = float(table.p_positive[j])
                fh.write(f"{step},{int(idx)},{_fmt(x1)},{_fmt(x2)},"
                         f"{_fmt(p)},{_fmt(max(p, 1.0 - p))},"
                         f"{_fmt(table.aggregated[j])}\n")
    write_manifest(tmp / "manifest.txt", cfg, out_dir, True, datasets,
                   time.monotonic() - t0)
    return [tmp / n for n in ("trace.csv", "trace_scores.csv", "manifest.txt")]


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="uncertal",
        description="Retraining-based active-learning benchmark runner.")
    parser.add_argument("--config", metavar="PATH", help="INI config file")
    parser.add_argument("--datasets", metavar="LIST",
                        help="comma-separated dataset names or paths")
    parser.add_argument("--strategies", metavar="LIST",
                        help="comma-separated strategy names")
    parser.add_argument("--trials", type=int, metavar="N")
    parser.add_argument("--budget", metavar="N|full")
    parser.add_argument("--lambda", dest="lam", type=float, metavar="X",
                        help="regularization parameter (larger = weaker)")
    parser.add_argument("--seed", type=int, metavar="N")
    parser.add_argument("--out", metavar="DIR", help="output directory")
    parser.add_argument("--trace", action="store_true",
                        help="export the selection trace of one strategy "
                             "on one 2-D dataset")
    args = parser.parse_args(argv)

    try:
        cfg, out_dir, trace = parse_config(args.config, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        datasets = {ref.name: ref.load() for ref in cfg.datasets}
        for ref in cfg.datasets:
            ds = datasets[ref.name]
            if ds.n < 4:
                raise DataError(f"{ds.name}: need at least 4 instances")
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out_dir.parent.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory(prefix=f".{out_dir.name}-",
                                     dir=out_dir.parent) as tmpname:
        tmp = Path(tmpname)
        try:
            if trace:
                files = _trace_mode(cfg, out_dir, tmp, datasets)
            else:
                files = _run_mode(cfg, out_dir, tmp, datasets)
        except ConfigError as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        except DataError as exc:
            print(f"data error: {exc}", file=sys.stderr)
            return EXIT_DATA
        except (FloatingPointError, np.linalg.LinAlgError) as exc:
            print(f"numerical failure: {exc}", file=sys.stderr)
            return EXIT_NUMERICAL
        # all outputs are complete: move them into place
        out_dir.mkdir(parents=True, exist_ok=True)
        for f in files:
            os.replace(f, out_dir / f.name)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
