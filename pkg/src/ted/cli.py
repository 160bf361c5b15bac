"""Command-line entry point: score, sweep, evaluate, summarize, interpret."""

from __future__ import annotations

import argparse
import datetime
import hashlib
import json
import os
import sys
from pathlib import Path

from . import __version__
from .analytics import (
    DEFAULT_WINDOW_SWEEP,
    evaluate_dataset,
    summarize,
    window_ablation,
)
from .engine import SequenceDynamics, score_dataset, write_scores_csv
from .errors import ComputeError, ConfigError, ParseError
from .ingestion import FeatureCsvSchema, load_dataset, load_manifest
from .interpret import (
    AgreementThresholds,
    interpret_dataset,
    build_frame_table,
    read_predictions_csv,
    write_predictions_csv,
)
from .forest import ForestHyperparams
from .model import BUILTIN_PROFILES, FEATURE_SETS, AuProfile, TedConfig, overall_profile

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PARSE = 3
EXIT_COMPUTE = 4


def _add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--manifest", required=True, help="dataset manifest JSON")
    parser.add_argument(
        "--schema", default=None, help="feature CSV schema mapping JSON (default: infer)"
    )
    parser.add_argument(
        "--out",
        default=None,
        help="output directory (default: $TED_OUTPUT_DIR or ./ted-out)",
    )
    parser.add_argument("--w", type=int, default=10, help="dynamics window length")
    parser.add_argument(
        "--orientation",
        choices=["trailing", "forward"],
        default="trailing",
        help="dynamics window orientation",
    )
    parser.add_argument(
        "--profile",
        default="pain",
        help="AU profile: pain, pain_predicted, happy, overall, "
        "or a comma-separated AU list",
    )
    parser.add_argument(
        "--au-source", choices=["manual", "predicted"], default="manual"
    )
    parser.add_argument(
        "--feature-sets",
        default=",".join(FEATURE_SETS),
        help="comma-separated subset of L,Ho,Hr,Gl,Gr,I",
    )
    parser.add_argument("--jobs", type=int, default=1, help="parallel workers")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ted", description="Facial temporal-expressiveness scoring and analysis"
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("score", help="score every frame and write scores.csv")
    _add_common_flags(p)

    p = sub.add_parser("sweep", help="window ablation with per-subject correlations")
    _add_common_flags(p)
    p.add_argument(
        "--windows",
        default=",".join(str(w) for w in DEFAULT_WINDOW_SWEEP),
        help="comma-separated window lengths",
    )

    p = sub.add_parser("evaluate", help="per-subject correlation of scores vs PSPI")
    _add_common_flags(p)

    p = sub.add_parser("summarize", help="label-grouped descriptive statistics")
    _add_common_flags(p)
    p.add_argument("--scale", choices=["VAS", "OPI"], default="VAS")
    p.add_argument(
        "--log",
        dest="transform",
        action="store_const",
        const="log",
        default="log",
        help="summarize natural-log scores (default)",
    )
    p.add_argument(
        "--no-log", dest="transform", action="store_const", const="none",
        help="summarize raw scores",
    )
    p.add_argument(
        "--plot-data",
        default=None,
        help="also write a plotting-friendly CSV to this filename",
    )

    p = sub.add_parser("interpret", help="pain classifier LOSO + agreement analysis")
    _add_common_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trees", type=int, default=100)
    p.add_argument("--max-depth", type=int, default=None)
    p.add_argument("--min-samples-leaf", type=int, default=1)
    p.add_argument("--stratified-bootstrap", action="store_true")
    p.add_argument("--pspi-threshold", type=float, default=0.0)
    p.add_argument("--ted-high", type=float, default=100.0)
    p.add_argument("--conf-low", type=float, default=0.1)
    p.add_argument("--ted-low", type=float, default=10.0)
    p.add_argument("--conf-high", type=float, default=0.9)
    p.add_argument(
        "--predictions",
        default=None,
        help="audit an external predictions CSV instead of training",
    )
    return parser


def _resolve_out_dir(args) -> Path:
    out = args.out or os.environ.get("TED_OUTPUT_DIR") or "ted-out"
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _resolve_profile(name: str, records) -> AuProfile:
    if name in BUILTIN_PROFILES:
        return BUILTIN_PROFILES[name]
    if name == "overall":
        return overall_profile(records)
    try:
        au_ids = tuple(int(tok) for tok in name.split(",") if tok.strip())
    except ValueError:
        raise ConfigError(f"unknown profile {name!r}") from None
    if not au_ids:
        raise ConfigError(f"unknown profile {name!r}")
    return AuProfile("custom", au_ids)


def _profile_for_loading(args):
    # Named profiles are resolvable before the dataset is read; 'overall'
    # and manual merging then need the loaded records.
    if args.profile in BUILTIN_PROFILES:
        return BUILTIN_PROFILES[args.profile]
    if args.profile == "overall":
        return None
    return _resolve_profile(args.profile, [])


def _load(args):
    schema = FeatureCsvSchema.from_json(args.schema) if args.schema else None
    manifest = load_manifest(args.manifest)
    profile = _profile_for_loading(args)
    if args.au_source == "manual" and profile is None:
        raise ConfigError("the overall profile requires --au-source predicted")
    records, findings = load_dataset(
        manifest, schema=schema, au_source=args.au_source, profile=profile
    )
    for finding in findings:
        print(f"warning: {finding}", file=sys.stderr)
    profile = profile or _resolve_profile(args.profile, records)
    cfg = TedConfig(
        window=args.w,
        window_orientation=args.orientation,
        profile=profile,
        au_source=args.au_source,
        feature_sets=frozenset(
            fs.strip() for fs in args.feature_sets.split(",") if fs.strip()
        ),
    )
    return records, cfg


def _file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_metadata(args, cfg: TedConfig, out_dir: Path, extra: dict) -> None:
    manifest_path = Path(args.manifest)
    digests = {manifest_path.name: _file_digest(manifest_path)}
    manifest = load_manifest(manifest_path)
    base = Path(getattr(manifest, "base_dir", "."))
    for entry in manifest.entries:
        for rel in (
            entry.feature_file_path,
            entry.pspi_file_path,
            entry.manual_au_file_path,
        ):
            if rel:
                digests[rel] = _file_digest(base / rel)
    metadata = {
        "artifact_version": __version__,
        "command": args.command,
        "config": {
            "window": cfg.window,
            "window_orientation": cfg.window_orientation,
            "profile": {"name": cfg.profile.name, "au_ids": list(cfg.profile.au_ids)},
            "au_source": cfg.au_source,
            "feature_sets": sorted(cfg.feature_sets),
            **extra,
        },
        "input_digests": digests,
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }
    with open(out_dir / "run_metadata.json", "w", encoding="utf-8") as fh:
        json.dump(metadata, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _dump_json(payload: dict, path: Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _ted_by_key(records, cfg, jobs):
    results, failures = score_dataset(records, cfg, jobs=jobs)
    if failures:
        key, message = failures[0]
        raise ComputeError(f"sequence {key[0]}/{key[1]}: {message}")
    table = {}
    series = {}
    for (subject, sequence), scored in results.items():
        series[(subject, sequence)] = [sf.ted_score for sf in scored]
        for sf in scored:
            table[(subject, sequence, sf.frame_index)] = sf.ted_score
    return results, series, table


def cmd_score(args) -> int:
    records, cfg = _load(args)
    out_dir = _resolve_out_dir(args)
    results, failures = score_dataset(records, cfg, jobs=args.jobs)
    if failures:
        for key, message in failures:
            print(f"error: {key[0]}/{key[1]}: {message}", file=sys.stderr)
        return EXIT_COMPUTE
    write_scores_csv(results, out_dir / "scores.csv")
    _write_metadata(args, cfg, out_dir, {})
    print(f"wrote {out_dir / 'scores.csv'}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    records, cfg = _load(args)
    out_dir = _resolve_out_dir(args)
    windows = [int(tok) for tok in args.windows.split(",") if tok.strip()]
    report = window_ablation(records, cfg, windows)
    _dump_json(report.to_dict(), out_dir / "ablation.json")
    with open(out_dir / "ablation.txt", "w", encoding="utf-8") as fh:
        fh.write(report.to_text() + "\n")
    _write_metadata(args, cfg, out_dir, {"windows": sorted(set(windows))})
    print(report.to_text())
    return EXIT_OK


def cmd_evaluate(args) -> int:
    records, cfg = _load(args)
    out_dir = _resolve_out_dir(args)
    correlations = evaluate_dataset(records, cfg)
    payload = {
        "subjects": [c.to_dict() for c in correlations],
        "mean_pcc": sum(c.pcc for c in correlations) / len(correlations),
    }
    _dump_json(payload, out_dir / "correlations.json")
    _write_metadata(args, cfg, out_dir, {})
    print(f"mean PCC over {len(correlations)} subjects: {payload['mean_pcc']:.4f}")
    return EXIT_OK


def cmd_summarize(args) -> int:
    records, cfg = _load(args)
    out_dir = _resolve_out_dir(args)
    _, series, _ = _ted_by_key(records, cfg, args.jobs)
    report = summarize(records, series, scale=args.scale, transform=args.transform)
    _dump_json(report.to_dict(), out_dir / "summary.json")
    with open(out_dir / "summary.txt", "w", encoding="utf-8") as fh:
        fh.write(report.to_text() + "\n")
    if args.plot_data:
        report.write_plot_data(out_dir / args.plot_data)
    _write_metadata(args, cfg, out_dir, {"scale": args.scale, "transform": args.transform})
    print(report.to_text())
    return EXIT_OK


def cmd_interpret(args) -> int:
    records, cfg = _load(args)
    out_dir = _resolve_out_dir(args)
    _, _, ted_by_key = _ted_by_key(records, cfg, args.jobs)
    table = build_frame_table(records, cfg.profile, pspi_threshold=args.pspi_threshold)
    thresholds = AgreementThresholds(
        ted_high=args.ted_high,
        conf_low=args.conf_low,
        ted_low=args.ted_low,
        conf_high=args.conf_high,
    )
    external = read_predictions_csv(args.predictions) if args.predictions else None
    hyperparams = ForestHyperparams(
        n_trees=args.trees,
        max_depth=args.max_depth,
        min_samples_leaf=args.min_samples_leaf,
        stratified_bootstrap=args.stratified_bootstrap,
    )
    report, predictions = interpret_dataset(
        table,
        ted_by_key,
        hyperparams=hyperparams,
        seed=args.seed,
        thresholds=thresholds,
        external_predictions=external,
    )
    _dump_json(report.to_dict(), out_dir / "interpret.json")
    if external is None:
        write_predictions_csv(predictions, out_dir / "predictions.csv")
    _write_metadata(
        args,
        cfg,
        out_dir,
        {
            "seed": args.seed,
            "trees": args.trees,
            "pspi_threshold": args.pspi_threshold,
            "thresholds": {
                "ted_high": args.ted_high,
                "conf_low": args.conf_low,
                "ted_low": args.ted_low,
                "conf_high": args.conf_high,
            },
        },
    )
    if report.per_subject_f1:
        print(f"mean F1 over {len(report.per_subject_f1)} subjects: {report.mean_f1:.4f}")
    print(f"flagged disagreements: {len(report.flags)}")
    return EXIT_OK


_COMMANDS = {
    "score": cmd_score,
    "sweep": cmd_sweep,
    "evaluate": cmd_evaluate,
    "summarize": cmd_summarize,
    "interpret": cmd_interpret,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ParseError, OSError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ComputeError as exc:
        print(f"compute error: {exc}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
