"""Command-line front end: ``synth``, ``info``, ``run`` and ``export2d``.

Exit codes: 0 on success, 1 on runtime or data errors, 2 on usage errors.

A run config is a JSON object::

    {
      "data": "trials.isd",          # ISD1 file, relative to the config file
      "pipeline": {...},             # PipelineSpec keys
      "folds": 10,
      "seed": 0,                     # master seed for every random stream
      "report": "report.json",
      "export_2d": "projection.csv"  # optional
    }

Unknown keys anywhere in the config are errors.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .dataset import SynthSpec, load_trialset, save_trialset, synth_trialset
from .errors import IsdecodeError, ParameterError
from .evaluate import PipelineSpec, cross_validate, preprocess
from .reduce import export_2d, pca_fit
from .riemann import mean_covariance, tangent_features
from .spatial import trial_covariances

RUN_KEYS = ("data", "pipeline", "folds", "seed", "report", "export_2d")


@dataclass
class RunConfig:
    data: Path
    pipeline: PipelineSpec
    folds: int = 10
    seed: int = 0
    report: Optional[Path] = None
    export_2d: Optional[Path] = None


def load_run_config(path, data=None, report=None) -> RunConfig:
    """Parse a run config; relative paths resolve against the config's folder."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ParameterError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(raw, dict):
        raise ParameterError(f"{path}: config must be a JSON object")
    extra = set(raw) - set(RUN_KEYS)
    if extra:
        raise ParameterError(f"{path}: unknown key(s) {sorted(extra)}")
    base = path.parent

    def resolve(p):
        return None if p is None else (base / p if not Path(p).is_absolute() else Path(p))

    data_path = Path(data) if data is not None else resolve(raw.get("data"))
    if data_path is None:
        raise ParameterError(f"{path}: no data file given")
    seed = int(raw.get("seed", 0))
    spec = replace(PipelineSpec.from_dict(raw.get("pipeline", {})), seed=seed)
    folds = int(raw.get("folds", 10))
    if folds < 2:
        raise ParameterError(f"{path}: folds must be >= 2")
    return RunConfig(data_path, spec, folds, seed,
                     Path(report) if report is not None else resolve(raw.get("report")),
                     resolve(raw.get("export_2d")))


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _positive_float(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {v}")
    return v


def _nonneg_float(text):
    v = float(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {v}")
    return v


def cmd_synth(args):
    spec = SynthSpec(n_classes=args.classes, trials_per_class=args.trials,
                     n_channels=args.channels, n_samples=args.samples, fs=args.fs,
                     noise=args.noise, seed=args.seed, mixing_strength=args.mixing_strength)
    ts = synth_trialset(spec)
    save_trialset(ts, args.output)
    print(f"wrote {args.output}: {ts.n_trials} trials, {ts.n_channels} channels, "
          f"{ts.n_samples} samples, {ts.n_classes} classes, fs {ts.fs:g} Hz")
    return 0


def cmd_info(args):
    ts = load_trialset(args.path)
    print(f"{ts.n_trials} trials, {ts.n_channels} channels, {ts.n_samples} samples")
    print(f"sampling rate: {ts.fs:g} Hz")
    for name, count in zip(ts.class_names, ts.class_counts()):
        print(f"  {name}: {count}")
    return 0


def cmd_run(args):
    cfg = load_run_config(args.config, data=args.data, report=args.report)
    ts = load_trialset(cfg.data)
    threads = args.threads or os.cpu_count() or 1
    report = cross_validate(ts, cfg.pipeline, k=cfg.folds, n_jobs=threads)
    if cfg.report is not None:
        d = report.to_dict(timing=args.timing)
        d["config"] = {"data": str(cfg.data), "folds": cfg.folds, "seed": cfg.seed}
        Path(cfg.report).write_text(json.dumps(d, indent=2) + "\n")
    t1 = report.table1
    print(f"accuracy {report.accuracy_mean:.4f} +/- {report.accuracy_std:.4f} "
          f"over {report.k} folds (chance {report.chance_level:.4f})")
    print(f"mu {t1['mu']}  sigma {t1['sigma']}")
    if report.auc is not None:
        print(f"auc ({report.auc_kind}) {report.auc:.4f}")
    return 0


def cmd_export2d(args):
    cfg = load_run_config(args.config, data=args.data)
    out = Path(args.output) if args.output else cfg.export_2d
    if out is None:
        raise ParameterError("no export path: set export_2d in the config or pass -o")
    ts = preprocess(load_trialset(cfg.data), cfg.pipeline)
    params = cfg.pipeline.features.resolved() if cfg.pipeline.features.kind == "tangent" \
        else {"shrinkage": 0.05, "mean": "geometric", "whitened": False}
    covs = trial_covariances(ts.data, params["shrinkage"])
    F = tangent_features(covs, mean_covariance(covs, mode=params["mean"]),
                         whitened=params["whitened"])
    model = pca_fit(F, 2)
    export_2d(model, F, ts.labels, out)
    print(f"wrote {out}: {ts.n_trials} points, explained variance "
          f"{np.array2string(model.explained_variance, precision=4)}")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="isdecode", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="write a synthetic ISD1 data set")
    s.add_argument("--classes", type=_positive_int, default=2)
    s.add_argument("--trials", type=_positive_int, default=100, help="trials per class")
    s.add_argument("--channels", type=_positive_int, default=8)
    s.add_argument("--samples", type=_positive_int, default=256)
    s.add_argument("--fs", type=_positive_float, default=256.0)
    s.add_argument("--noise", type=_nonneg_float, default=1.0)
    s.add_argument("--mixing-strength", type=_nonneg_float, default=0.5)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_synth)

    i = sub.add_parser("info", help="summarize an ISD1 file")
    i.add_argument("path")
    i.set_defaults(func=cmd_info)

    r = sub.add_parser("run", help="cross-validate the pipeline of a run config")
    r.add_argument("config")
    r.add_argument("--data", help="override the config's data path")
    r.add_argument("--report", help="override the config's report path")
    r.add_argument("--threads", type=_positive_int, default=None,
                   help="fold-level threads (default: CPU count)")
    r.add_argument("--timing", action="store_true",
                   help="include per-fold wall-clock seconds in the report")
    r.set_defaults(func=cmd_run)

    e = sub.add_parser("export2d", help="write a 2-D PCA projection of tangent features")
    e.add_argument("config")
    e.add_argument("--data", help="override the config's data path")
    e.add_argument("-o", "--output", help="override the config's export_2d path")
    e.set_defaults(func=cmd_export2d)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (IsdecodeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
