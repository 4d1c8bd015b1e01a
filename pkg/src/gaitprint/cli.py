"""Command-line entry point: ``gaitprint {synth,detect,features,evaluate,report}``.

Settings resolve as command-line flags, then ``--config`` JSON file, then
built-in defaults. Every command writes ``effective_config.json`` into its
output directory.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .detector import DetectorConfig, write_complexes_jsonl
from .errors import GaitprintError, MissingSession
from .evaluation import EvalTable, ProtocolConfig, run_protocol, write_details_csv
from .features import feature_histograms, read_features_csv, write_features_csv, write_histograms_csv
from .ingest import LayoutConfig, filter_incomplete_subjects, load_corpus, preprocess_corpus
from .pipeline import corpus_features, detect_corpus
from .report import format_report
from .signals import AXES
from .synth import TASK_DURATIONS_S, distinct_amplitude_sampler, generate_corpus, identical_sampler

logger = logging.getLogger("gaitprint")

ENV_DATA = "GAITPRINT_DATA"

DEFAULTS = {
    "seed": None,
    "axes": list(AXES),
    "sets": [1, 2, 3],
    "classifiers": ["lda", "svm"],
    "smooth_window": 4,
    "min_samples": 400,
    "sample_rate_hz": 100.0,
    "bins": 30,
    "per_subject_histograms": False,
    "pooled_eer": False,
    "lda_reg": None,
    "svm_c": 1.0,
    "svm_epochs": 200,
    "detector": DetectorConfig().to_dict(),
    "synth": {
        "subjects": 10,
        "mode": "distinct",
        "durations": {str(k): v for k, v in TASK_DURATIONS_S.items()},
        "spread": 0.2,
        "jitter": 0.05,
        "noise": 0.05,
        "session_jitter": 0.03,
    },
}


class CliError(Exception):
    """Raised for bad usage; carries a diagnostic category and exit code."""

    def __init__(self, message: str, category: str = "config", code: int = 2):
        super().__init__(message)
        self.category = category
        self.code = code


def _csv_list(convert):
    def parse(text: str):
        try:
            return [convert(x.strip()) for x in text.split(",") if x.strip()]
        except (ValueError, KeyError) as exc:
            raise argparse.ArgumentTypeError(f"bad list {text!r}: {exc}") from exc
    return parse


def _axis(x: str) -> str:
    x = x.upper()
    if x not in AXES:
        raise ValueError("axis must be one of x,y,z")
    return x


def _set_id(x: str) -> int:
    v = int(x)
    if v not in (1, 2, 3):
        raise ValueError("feature set must be 1, 2 or 3")
    return v


def _classifier(x: str) -> str:
    x = x.lower()
    if x not in ("lda", "svm"):
        raise ValueError("classifier must be lda or svm")
    return x


def _durations(text: str) -> dict:
    out = {}
    for part in text.split(","):
        task, secs = part.split(":")
        out[str(int(task))] = float(secs)
    return out


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--input", help=f"input path (corpus root defaults to ${ENV_DATA})")
    common.add_argument("--output", help="output directory (created; must differ from the input)")
    common.add_argument("--seed", type=int, help="random seed (required by synth and evaluate)")
    common.add_argument("--axes", type=_csv_list(_axis), help="axes to process, e.g. x,y,z")
    common.add_argument("--sets", type=_csv_list(_set_id), help="feature sets, e.g. 1,2,3")
    common.add_argument("--classifiers", type=_csv_list(_classifier), help="classifiers, e.g. lda,svm")
    common.add_argument("--config", help="JSON file with settings; flags override it")
    common.add_argument("-v", "--verbose", action="count", default=0, help="more logging (-vv for debug)")

    det = argparse.ArgumentParser(add_help=False)
    det.add_argument("--cycle-min-ms", type=float, help="shortest gait cycle (default 800)")
    det.add_argument("--cycle-max-ms", type=float, help="longest gait cycle (default 1400)")
    det.add_argument("--backtrack-ms", type=float, help="X/Y P lookback before the Z anchor (default 10)")
    det.add_argument("--qrst-search-ms", type=float, help="Q..T search span after P (default 0.4 * cycle max)")
    det.add_argument("--min-swing", type=float, help="tracing hysteresis in normalized units (default 0.1)")
    det.add_argument("--smooth-window", type=int, help="moving-average length in samples (default 4)")
    det.add_argument("--min-samples", type=int, help="drop subjects with a task shorter than this (default 400)")

    parser = argparse.ArgumentParser(prog="gaitprint", description="PQRST gait complex detection and "
                                     "pairwise accelerometer gait authentication.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="write a synthetic corpus with ground truth")
    p.add_argument("--subjects", type=int, help="number of subjects (default 10)")
    p.add_argument("--mode", choices=("distinct", "identical"),
                   help="distinct: subjects differ in amplitudes; identical: same parameters")
    p.add_argument("--durations", type=_durations, help="task:seconds list (default 1:20,3:60,5:20)")
    p.add_argument("--noise", type=float, help="additive noise sd (default 0.05)")
    p.add_argument("--jitter", type=float, help="relative cycle-to-cycle jitter (default 0.05)")
    p.add_argument("--spread", type=float, help="relative between-subject amplitude spread (default 0.2)")
    p.add_argument("--session-jitter", type=float, help="relative per-session amplitude drift (default 0.03)")

    sub.add_parser("detect", parents=[common, det], help="detect PQRST complexes in a corpus")

    p = sub.add_parser("features", parents=[common, det], help="extract the nine features and histograms")
    p.add_argument("--bins", type=int, help="histogram bins (default 30)")
    p.add_argument("--per-subject-histograms", action="store_true", default=None,
                   help="also emit one histogram group per subject")

    p = sub.add_parser("evaluate", parents=[common, det],
                       help="run the pairwise protocol on features.csv or a corpus")
    p.add_argument("--svm-c", type=float, help="SVM soft-margin cost (default 1.0)")
    p.add_argument("--svm-epochs", type=int, help="SVM passes over the training set (default 200)")
    p.add_argument("--lda-reg", type=float, help="LDA ridge (default 1e-6 * trace/d)")
    p.add_argument("--pooled-eer", action="store_true", default=None,
                   help="also report EER over scores pooled across pairs")

    sub.add_parser("report", parents=[common], help="summarize an evaluate output directory")
    return parser


_FLAG_KEYS = ("seed", "axes", "sets", "classifiers", "smooth_window", "min_samples", "bins",
              "per_subject_histograms", "pooled_eer", "lda_reg", "svm_c", "svm_epochs")
_DETECTOR_FLAGS = ("cycle_min_ms", "cycle_max_ms", "backtrack_ms", "qrst_search_ms", "min_swing")
_SYNTH_FLAGS = {"subjects": "subjects", "mode": "mode", "durations": "durations", "noise": "noise",
                "jitter": "jitter", "spread": "spread", "session_jitter": "session_jitter"}


def _merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def resolve_config(args: argparse.Namespace) -> dict:
    cfg = json.loads(json.dumps(DEFAULTS))
    if args.config:
        try:
            with open(args.config) as fh:
                file_cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise CliError(f"cannot read config file {args.config}: {exc}") from exc
        unknown = set(file_cfg) - set(DEFAULTS)
        if unknown:
            raise CliError(f"unknown config keys {sorted(unknown)}; allowed: {sorted(DEFAULTS)}")
        cfg = _merge(cfg, file_cfg)
    for key in _FLAG_KEYS:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    for key in _DETECTOR_FLAGS:
        val = getattr(args, key, None)
        if val is not None:
            cfg["detector"][key] = val
    for flag, key in _SYNTH_FLAGS.items():
        val = getattr(args, flag, None)
        if val is not None:
            cfg["synth"][key] = val
    return cfg


def _detector_config(cfg: dict) -> DetectorConfig:
    try:
        return DetectorConfig(**cfg["detector"])
    except (TypeError, GaitprintError) as exc:
        raise CliError(f"invalid detector settings: {exc}") from exc


def _require_seed(cfg: dict, command: str) -> int:
    if cfg["seed"] is None:
        raise CliError(f"'{command}' needs a seed: pass --seed N or set \"seed\" in --config")
    return int(cfg["seed"])


def _input_path(args) -> Path:
    raw = args.input or os.environ.get(ENV_DATA)
    if not raw:
        raise CliError(f"no input: pass --input or set ${ENV_DATA}")
    path = Path(raw)
    if not path.exists():
        raise CliError(f"input {path} does not exist", "data", 3)
    return path


def _output_dir(args, input_path: Path | None = None) -> Path:
    if not args.output:
        raise CliError("--output is required")
    out = Path(args.output).resolve()
    # a corpus directory must stay untouched; a single input file only must not be clobbered
    if input_path is not None:
        src = input_path.resolve()
        if src.is_dir() and (out == src or src in out.parents):
            raise CliError(f"output {out} must not be inside the input {src}")
        if src.is_file() and out == src:
            raise CliError(f"output {out} is the input file")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_config(out: Path, cfg: dict, command: str) -> None:
    with open(out / "effective_config.json", "w") as fh:
        json.dump({"command": command, **cfg}, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _load_recordings(root: Path, cfg: dict, out: Path):
    layout = LayoutConfig(sample_rate_hz=cfg["sample_rate_hz"], min_samples=cfg["min_samples"])
    manifest = filter_incomplete_subjects(load_corpus(root, layout), layout)
    with open(out / "manifest.json", "w") as fh:
        fh.write(manifest.to_json() + "\n")
    pre = preprocess_corpus(manifest, cfg["smooth_window"])
    with open(out / "filter_log.txt", "w") as fh:
        for line in manifest.filter_log + [f"excluded recording {x}" for x in pre.excluded]:
            fh.write(line + "\n")
    return pre.recordings


def cmd_synth(args, cfg) -> int:
    seed = _require_seed(cfg, "synth")
    out = _output_dir(args)
    s = cfg["synth"]
    if s["subjects"] < 2:
        raise CliError("synth needs --subjects >= 2")
    if s["mode"] == "distinct":
        sampler = distinct_amplitude_sampler(s["spread"], s["jitter"], s["noise"])
    else:
        sampler = identical_sampler(s["jitter"], s["noise"])
    durations = {int(k): float(v) for k, v in s["durations"].items()}
    generate_corpus(out, s["subjects"], sampler, tasks=tuple(sorted(durations)), durations_s=durations,
                    session_jitter=s["session_jitter"], seed=seed, fs=cfg["sample_rate_hz"])
    _write_config(out, cfg, "synth")
    print(f"wrote {s['subjects']} subjects to {out}")
    return 0


def cmd_detect(args, cfg) -> int:
    src = _input_path(args)
    out = _output_dir(args, src)
    det_cfg = _detector_config(cfg)
    recordings = _load_recordings(src, cfg, out)
    cd = detect_corpus(recordings, det_cfg)
    n = 0
    with open(out / "complexes.jsonl", "w") as fh:
        for origin, _fs, det in cd.detections:
            n += write_complexes_jsonl(fh, det, origin)
    with open(out / "diagnostics.json", "w") as fh:
        json.dump({**cd.diagnostics.to_dict(), "too_short": cd.too_short}, fh, indent=2, sort_keys=True)
    _write_config(out, cfg, "detect")
    print(f"{n} complexes from {len(cd.detections)} recordings -> {out / 'complexes.jsonl'}")
    return 0


def cmd_features(args, cfg) -> int:
    src = _input_path(args)
    out = _output_dir(args, src)
    recordings = _load_recordings(src, cfg, out)
    vectors, cd = corpus_features(recordings, _detector_config(cfg))
    if not vectors:
        raise CliError("no complexes detected; nothing to write", "data", 3)
    with open(out / "features.csv", "w", newline="") as fh:
        write_features_csv(fh, vectors)
    groups = {}
    for axis in AXES:
        sel = [v for v in vectors if v.axis_id == axis]
        if sel:
            groups[f"axis={axis}"] = feature_histograms(sel, cfg["bins"])
    if cfg["per_subject_histograms"]:
        for subject in sorted({v.provenance["subject"] for v in vectors}):
            for axis in AXES:
                sel = [v for v in vectors if v.axis_id == axis and v.provenance["subject"] == subject]
                if sel:
                    groups[f"axis={axis};subject={subject}"] = feature_histograms(sel, cfg["bins"])
    with open(out / "histograms.csv", "w", newline="") as fh:
        write_histograms_csv(fh, groups)
    with open(out / "diagnostics.json", "w") as fh:
        json.dump({**cd.diagnostics.to_dict(), "too_short": cd.too_short}, fh, indent=2, sort_keys=True)
    _write_config(out, cfg, "features")
    print(f"{len(vectors)} feature vectors -> {out / 'features.csv'}")
    return 0


def _load_vectors(src: Path, cfg: dict, out: Path):
    if src.is_file():
        with open(src, newline="") as fh:
            return read_features_csv(fh)
    if (src / "features.csv").is_file():
        with open(src / "features.csv", newline="") as fh:
            return read_features_csv(fh)
    vectors, _ = corpus_features(_load_recordings(src, cfg, out), _detector_config(cfg))
    return vectors


def cmd_evaluate(args, cfg) -> int:
    seed = _require_seed(cfg, "evaluate")
    src = _input_path(args)
    out = _output_dir(args, src)
    vectors = _load_vectors(src, cfg, out)
    n_subjects = len({v.provenance["subject"] for v in vectors})
    if n_subjects < 2:
        raise CliError(f"need >= 2 subjects to evaluate, found {n_subjects}", "data", 4)
    pcfg = ProtocolConfig(seed=seed, axes=tuple(cfg["axes"]), sets=tuple(cfg["sets"]),
                          classifiers=tuple(cfg["classifiers"]), lda_reg=cfg["lda_reg"],
                          svm_c=cfg["svm_c"], svm_epochs=cfg["svm_epochs"], pooled_eer=cfg["pooled_eer"])
    try:
        result = run_protocol(vectors, pcfg)
    except MissingSession as exc:
        raise CliError(f"need >= 2 subjects with both sessions: {exc}", "data", 4) from exc
    with open(out / "eval_table.csv", "w", newline="") as fh:
        result.table.write_csv(fh)
    with open(out / "eval_table.json", "w") as fh:
        fh.write(result.table.to_json() + "\n")
    with open(out / "pairs.csv", "w", newline="") as fh:
        write_details_csv(fh, result.details)
    with open(out / "excluded_subjects.json", "w") as fh:
        json.dump(result.excluded_subjects, fh, indent=2, sort_keys=True)
    _write_config(out, cfg, "evaluate")
    print(result.table.format_text())
    failed = sum(r.n_failed for r in result.table.rows)
    if failed:
        print(f"warning: {failed} pair experiments failed; see pairs.csv status column", file=sys.stderr)
    return 0


def cmd_report(args, cfg) -> int:
    src = _input_path(args)
    table_path = src / "eval_table.json" if src.is_dir() else src
    if not table_path.is_file():
        raise CliError(f"{table_path} not found; run 'evaluate' first", "data", 3)
    table = EvalTable.from_json(table_path.read_text())
    text = format_report(table)
    if args.output:
        out = _output_dir(args, src)
        (out / "report.txt").write_text(text)
        _write_config(out, cfg, "report")
    print(text, end="")
    return 0


COMMANDS = {"synth": cmd_synth, "detect": cmd_detect, "features": cmd_features,
            "evaluate": cmd_evaluate, "report": cmd_report}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=(logging.WARNING, logging.INFO, logging.DEBUG)[min(args.verbose, 2)],
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](args, cfg)
    except CliError as exc:
        print(f"error[{exc.category}]: {exc}", file=sys.stderr)
        return exc.code
    except GaitprintError as exc:
        print(f"error[data]: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
