"""Command-line driver.

Subcommands: ``synth``, ``preprocess``, ``features``, ``sweep``. Data goes
to files under ``--out``; diagnostics go to stderr.

Exit codes: 0 success, 2 input/config validation error, 3 insufficient
trials under ``--strict``, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from .config import CLASSIFIERS, PipelineConfig
from .epoching import WindowSpec, extract_epochs
from .errors import InsufficientDataError, NumericError, TurnIntentError, ValidationError
from .evaluate import Cell, run_sweep
from .features import featurize
from .ingest import SynthSpec, read_markers, read_recording, synthesize, write_markers, write_recording
from .preprocess import preprocess

log = logging.getLogger("turnintent")


def _load_config(args) -> PipelineConfig:
    cfg = PipelineConfig.load(args.config)
    if args.config is not None and cfg.defaulted:
        log.info("config: defaults applied for %s", ", ".join(cfg.defaulted))
    if getattr(args, "seed", None) is not None:
        cfg = dataclasses.replace(cfg, eval=dataclasses.replace(cfg.eval, seed=args.seed))
    return cfg


def _out_dir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_synth(args) -> int:
    try:
        doc = json.loads(Path(args.spec).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ValidationError(f"spec file not found: {args.spec}") from None
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{args.spec}: invalid JSON ({exc})") from None
    if args.seed is not None:
        doc["seed"] = args.seed
    spec = SynthSpec.from_dict(doc)
    rec, markers = synthesize(spec)
    out = _out_dir(args.out)
    write_recording(rec, out / "recording.csv")
    write_markers(markers, out / "markers.json")
    log.info("wrote %d x %d recording and %d markers to %s", rec.n_channels, rec.n_samples, len(markers), out)
    return 0


def cmd_preprocess(args) -> int:
    cfg = _load_config(args)
    rec = read_recording(args.recording, cfg.fs)
    clean, report = preprocess(rec, cfg.preprocess)
    out = _out_dir(args.out)
    write_recording(clean, out / "recording.csv")
    doc = {"rejected_channels": report.flat_channels,
           "interpolated_channels": report.interpolated_channels,
           "burst_windows_repaired": report.burst_windows}
    (out / "preprocess_report.json").write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")
    log.info("rejected %d channel(s), interpolated %d", len(report.flat_channels), len(report.interpolated_channels))
    return 0


def cmd_features(args) -> int:
    cfg = _load_config(args)
    rec = read_recording(args.recording, cfg.fs)
    markers = read_markers(args.markers, rec)
    window = WindowSpec(args.lag, args.size)
    epochs, skipped = extract_epochs(rec, markers, window)
    if skipped:
        log.info("%d marker(s) skipped: window starts before the recording", skipped)
    if not epochs:
        raise ValidationError("no trials survive epoching for this window")
    fm = featurize(epochs, rec.channel_names)
    out = _out_dir(args.out)
    fm.to_csv(out / "features.csv")
    if args.dump_epochs:
        write_epochs(epochs, rec.channel_names, out / "epochs.csv")
    log.info("wrote %d x %d feature matrix", *fm.shape)
    return 0


def write_epochs(epochs, channel_names, path) -> None:
    """Long-format epoch dump: one row per (trial, sample)."""
    frames = []
    for i, e in enumerate(epochs):
        frame = pd.DataFrame(e.data.T, columns=list(channel_names))
        frame.insert(0, "sample", np.arange(e.data.shape[1]))
        frame.insert(0, "onset_sample", e.onset_sample)
        frame.insert(0, "label", e.label.token)
        frame.insert(0, "trial", i)
        frames.append(frame)
    pd.concat(frames).to_csv(path, index=False, float_format="%.9g", lineterminator="\n")


def parse_cell(text: str) -> tuple[Cell, str | None]:
    """Parse ``lag=0,size=1.5[,clf=svm]``."""
    fields = {}
    for part in text.split(","):
        key, sep, value = part.partition("=")
        if not sep:
            raise ValidationError(f"--cell: expected key=value, got {part!r}")
        fields[key.strip()] = value.strip()
    unknown = set(fields) - {"lag", "size", "clf"}
    if unknown or not {"lag", "size"} <= set(fields):
        raise ValidationError("--cell needs lag=<ms>,size=<s>[,clf=svm|gbt]")
    clf = fields.get("clf")
    if clf is not None and clf not in CLASSIFIERS:
        raise ValidationError(f"--cell: unknown classifier {clf!r}")
    try:
        return Cell(float(fields["lag"]), float(fields["size"])), clf
    except ValueError:
        raise ValidationError(f"--cell: non-numeric lag or size in {text!r}") from None


def cmd_sweep(args) -> int:
    cfg = _load_config(args)
    rec = read_recording(args.recording, cfg.fs)
    markers = read_markers(args.markers, rec)
    if args.cell:
        # cells without clf= run every configured classifier
        wanted: dict = {}
        for text in args.cell:
            cell, clf = parse_cell(text)
            wanted.setdefault(cell, [])
            wanted[cell] += [clf] if clf else list(cfg.classifiers)
        groups: dict = {}
        for cell, clfs in wanted.items():
            groups.setdefault(tuple(dict.fromkeys(clfs)), []).append(cell)
    else:
        groups = {tuple(cfg.classifiers): None}
    report = None
    for clfs, cells in groups.items():
        part = run_sweep(rec, markers, cfg, cells=cells, classifiers=list(clfs), n_jobs=args.threads)
        if report is None:
            report = part
        else:
            report.cells.extend(part.cells)
    out = _out_dir(args.out)
    (out / "report.csv").write_text(report.to_csv(), encoding="utf-8")
    (out / "table.txt").write_text(report.to_table(), encoding="utf-8")
    skipped = [c for c in report.cells if c.status != "ok"]
    if skipped and args.strict:
        raise InsufficientDataError(f"{len(skipped)} cell(s) had insufficient trials")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="turnintent", description="EEG turn-intention decoding pipeline")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic recording and markers")
    p.add_argument("spec", help="JSON synth spec")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("preprocess", help="run the cleaning chain")
    p.add_argument("recording")
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("features", help="extract the per-trial feature matrix")
    p.add_argument("recording")
    p.add_argument("markers")
    p.add_argument("--lag", type=float, default=0.0, help="lag in ms (default 0)")
    p.add_argument("--size", type=float, default=1.5, help="window size in s (default 1.5)")
    p.add_argument("--dump-epochs", action="store_true", help="also write epochs.csv for debugging")
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("sweep", help="cross-validate classifiers over the lag x size grid")
    p.add_argument("recording")
    p.add_argument("markers")
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--strict", action="store_true", help="exit 3 if any cell has too few trials")
    p.add_argument("--cell", action="append", help="lag=<ms>,size=<s>[,clf=svm|gbt]; repeatable")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    if getattr(args, "threads", 1) < 1:
        log.error("--threads must be >= 1")
        return 2
    try:
        return args.func(args)
    except TurnIntentError as exc:
        log.error("%s", exc)
        return exc.exit_code
    except (np.linalg.LinAlgError, FloatingPointError, ArithmeticError) as exc:
        log.error("numeric failure: %s", exc)
        return NumericError.exit_code


if __name__ == "__main__":
    sys.exit(main())
