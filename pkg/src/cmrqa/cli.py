"""Command-line front end.

Every subcommand follows the same contract:

  * one JSON run configuration (``--config``), with single-field flag
    overrides and defaults filling whatever is absent;
  * outputs under ``--out``, next to ``effective_config.json``, the
    defaults-filled configuration that reproduces the run;
  * failures as a one-line JSON record on stderr with one exit code per
    failure class: 2 usage, 3 invalid config or data, 4 missing file,
    5 infeasible split, 1 anything unexpected;
  * no subcommand modifies its inputs, and all randomness flows from the
    configured seed, so equal configs give byte-equal outputs.

``CMRQA_LOG=debug|info|warning|error`` sets stderr log verbosity. The
``--workers`` knob parallelizes per-scan work in ``predict`` without
changing any output byte.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .classifier import REPRESENTATIONS, load_classifier
from .config import CONFIG_ECHO, PipelineConfig, load_config
from .dataprep import ScanRecord, balanced_batches, make_folds
from .decision import LEVEL_NAMES, SliceCounts, classify_subject, subject_patches
from .errors import FormatError, InfeasibleSplitError, PipelineError, ValidationError
from .metrics import confusion_matrix
from .preprocess import gradient_magnitude, normalize_slice
from .synth import SynthConfig, calibrate_roster, dataset_paths, generate_dataset, read_truth
from .volume_io import load_mask, load_volume, write_raw_json

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_USAGE = 2
EXIT_INVALID = 3
EXIT_MISSING = 4
EXIT_SPLIT = 5

MASK_SUFFIXES = (".nii.gz", ".nii", ".json")

log = logging.getLogger("cmrqa")


class _UsageError(Exception):
    """Bad invocation: unknown subcommand, unknown flag, missing argument."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # route argparse failures through the JSON error record machinery
        raise _UsageError(message)


def _setup_logging():
    name = os.environ.get("CMRQA_LOG", "warning").strip().lower()
    level = {"debug": logging.DEBUG, "info": logging.INFO,
             "warning": logging.WARNING, "error": logging.ERROR}.get(name, logging.WARNING)
    logging.basicConfig(stream=sys.stderr, level=level,
                        format="%(levelname)s %(name)s: %(message)s")


def _fail(code: int, error: str, message: str, **extra) -> int:
    record = {"error": error, "message": message, "exit_code": code}
    record.update(extra)
    print(json.dumps(record, sort_keys=True), file=sys.stderr)
    return code


def _dump_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _effective_config(args) -> PipelineConfig:
    """Config file, then flag overrides, then defaults."""
    cfg = load_config(args.config) if args.config else PipelineConfig()
    overrides = {}
    for attr, field in (
        ("seed", "seed"),
        ("workers", "workers"),
        ("folds", "folds"),
        ("batch_size", "batch_size"),
    ):
        value = getattr(args, attr, None)
        if value is not None:
            overrides[field] = value
    if getattr(args, "data", None) is not None:
        overrides["data_root"] = str(args.data)
    if getattr(args, "out", None) is not None:
        overrides["output_dir"] = str(args.out)
    return cfg.with_overrides(**overrides) if overrides else cfg


def _out_dir(cfg: PipelineConfig) -> Path:
    if not cfg.output_dir:
        raise ValidationError("an output directory is required (--out or config output_dir)")
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / CONFIG_ECHO).write_text(cfg.to_json())
    return out


def _write_png16(path: Path, image01: np.ndarray) -> None:
    """One grayscale 16-bit PNG; input values clipped from [0, 1]."""
    from PIL import Image

    a = np.clip(np.asarray(image01, dtype=np.float64), 0.0, 1.0)
    scaled = np.round(a * 65535.0).astype(np.uint16)
    Image.fromarray(scaled).save(path)  # uint16 maps to 16-bit grayscale


def _level_value(text: str) -> int:
    names = {name: int(level) for level, name in LEVEL_NAMES.items()}
    key = str(text).strip().lower()
    if key in names:
        return names[key]
    try:
        value = int(key)
    except ValueError:
        raise ValidationError(f"unknown artefact level {text!r}") from None
    if value not in (1, 2, 3):
        raise ValidationError(f"artefact level must be 1, 2 or 3, got {value}")
    return value


def _read_labels(path: Path) -> list[ScanRecord]:
    """Scan roster CSV: scan_id, subject_id, level; extra columns ignored."""
    if not path.is_file():
        raise FileNotFoundError(f"labels file not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        columns = set(reader.fieldnames or ())
        needed = {"scan_id", "subject_id", "level"}
        if not needed <= columns:
            raise FormatError(
                f"labels CSV must have columns {sorted(needed)}, got {sorted(columns)}"
            )
        return [
            ScanRecord(row["scan_id"], row["subject_id"], _level_value(row["level"]))
            for row in reader
        ]


def _read_scores(path: Path) -> dict[str, int]:
    """Two-column CSV keyed by scan id; accepts numeric or named levels."""
    if not path.is_file():
        raise FileNotFoundError(f"CSV not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        columns = list(reader.fieldnames or ())
        id_col = next((c for c in ("scan_id", "subject_id", "subject") if c in columns), None)
        level_col = next((c for c in ("level", "ensemble_label", "label") if c in columns), None)
        if id_col is None or level_col is None:
            raise FormatError(
                f"{path.name}: need an id column (scan_id) and a level column, got {columns}"
            )
        out: dict[str, int] = {}
        for row in reader:
            scan_id = row[id_col]
            if scan_id in out:
                raise ValidationError(f"{path.name}: duplicate scan_id {scan_id!r}")
            out[scan_id] = _level_value(row[level_col])
    if not out:
        raise ValidationError(f"{path.name}: no rows")
    return out


def _mask_path_for(root: Path, scan_id: str) -> Path:
    for suffix in MASK_SUFFIXES:
        candidate = root / f"{scan_id}{suffix}"
        if candidate.is_file():
            return candidate
    raise FileNotFoundError(f"no mask for {scan_id!r} under {root}")


def _load_scan(vol_path: Path, mask_path: Path | None, args, cfg: PipelineConfig):
    volume = load_volume(vol_path)
    if getattr(args, "no_mask", False):
        return volume, None
    if mask_path is not None:
        return volume, load_mask(mask_path, volume)
    if getattr(args, "mask", None) is not None:
        return volume, load_mask(args.mask, volume)
    if cfg.mask_root:
        path = _mask_path_for(Path(cfg.mask_root), volume.subject_id)
        return volume, load_mask(path, volume)
    log.info("no mask for %s; sampling the centered fallback window", volume.subject_id)
    return volume, None


def _patch_manifest(subject_id: str, patch_size: int, patches: dict) -> dict:
    entries = []
    for rep in (r for r in REPRESENTATIONS if r in patches):
        for s, per_slice in enumerate(patches[rep]):
            for i, p in enumerate(per_slice):
                entries.append(
                    {
                        "subject": subject_id,
                        "slice": s,
                        "index": i,
                        "origin": [int(p.origin[0]), int(p.origin[1])],
                        "fallback": bool(p.fallback),
                        "representation": rep,
                    }
                )
    return {"subject": subject_id, "patch_size": patch_size, "entries": entries}


# --- subcommands -----------------------------------------------------------


def cmd_gradmag(args) -> int:
    cfg = _effective_config(args)
    out = _out_dir(cfg)
    volume = load_volume(args.volume)
    maps = []
    for k in range(volume.n_slices):
        normed = normalize_slice(volume.voxels[:, :, k], cfg.norm)
        maps.append(normalize_slice(gradient_magnitude(normed), cfg.norm))
    stack = np.stack(maps, axis=-1)
    files = []
    if args.format == "json":
        name = f"{volume.subject_id}_gradmag.json"
        write_raw_json(stack, out / name)
        files = [name, name[: -len(".json")] + ".f64"]
    else:
        for k in range(volume.n_slices):
            name = f"{volume.subject_id}_s{k:02d}.png"
            _write_png16(out / name, stack[:, :, k])
            files.append(name)
    print(json.dumps(
        {"command": "gradmag", "subject": volume.subject_id,
         "slices": volume.n_slices, "files": files}, sort_keys=True))
    return EXIT_OK


def cmd_sample(args) -> int:
    cfg = _effective_config(args)
    out = _out_dir(cfg)
    volume, mask = _load_scan(Path(args.volume), None, args, cfg)
    sampler = cfg.sampler
    if args.count is not None:
        sampler = dataclasses.replace(sampler, patches_per_slice_test=args.count)
    patches = subject_patches(volume, mask=mask, sampler_cfg=sampler, norm_cfg=cfg.norm)
    manifest = _patch_manifest(volume.subject_id, sampler.patch_size, patches)
    if args.png:
        for entry in manifest["entries"]:
            rep, s, i = entry["representation"], entry["slice"], entry["index"]
            name = f"{volume.subject_id}_s{s:02d}_p{i:02d}_{rep}.png"
            _write_png16(out / name, patches[rep][s][i].pixels)
            entry["png"] = name
    (out / "manifest.json").write_text(_dump_json(manifest))
    print(json.dumps(
        {"command": "sample", "subject": volume.subject_id,
         "entries": len(manifest["entries"]), "manifest": "manifest.json"},
        sort_keys=True))
    return EXIT_OK


def cmd_split(args) -> int:
    cfg = _effective_config(args)
    out = _out_dir(cfg)
    records = _read_labels(Path(args.labels))
    split = make_folds(
        records, k=cfg.folds, seed=cfg.seed, min_severe=cfg.min_severe_per_fold
    )
    (out / "folds.json").write_text(_dump_json(split.to_dict()))
    print(json.dumps(
        {"command": "split", "folds": split.k,
         "scans": [len(f) for f in split.fold_scans], "file": "folds.json"},
        sort_keys=True))
    return EXIT_OK


def cmd_balance(args) -> int:
    cfg = _effective_config(args)
    out = _out_dir(cfg)
    records = _read_labels(Path(args.labels))
    manifest = balanced_batches(records, batch_size=cfg.batch_size, seed=cfg.seed)
    (out / "batches.json").write_text(manifest.to_json())
    print(json.dumps(
        {"command": "balance", "batches": len(manifest.batches),
         "batch_size": manifest.batch_size, "file": "batches.json"}, sort_keys=True))
    return EXIT_OK


def cmd_predict(args) -> int:
    cfg = _effective_config(args)
    out = _out_dir(cfg)
    if not cfg.classifiers:
        raise ValidationError("predict requires a classifier roster in the config")
    handles = {spec.key: load_classifier(spec) for spec in cfg.classifiers}
    reps = tuple(dict.fromkeys(spec.representation for spec in cfg.classifiers))

    if args.volume and args.data:
        raise ValidationError("pass either --data or --volume, not both")
    scans: list[tuple[Path, Path | None]] = []
    if args.volume:
        if args.mask is not None and len(args.volume) != 1:
            raise ValidationError("--mask applies to a single --volume; use config mask_root")
        scans = [(Path(p), None) for p in args.volume]
    elif cfg.data_root is not None:
        root = Path(cfg.data_root)
        rows = read_truth(root)
        if args.subset != "all":
            rows = [r for r in rows if r.get("split", "eval") == args.subset]
        if not rows:
            raise ValidationError(f"no scans in subset {args.subset!r}")
        for row in rows:
            vol_path, mask_path = dataset_paths(root, row["scan_id"])
            scans.append((vol_path, mask_path))
    else:
        raise ValidationError("predict needs --data (or config data_root) or --volume")

    def run_one(item):
        vol_path, mask_path = item
        volume, mask = _load_scan(vol_path, mask_path, args, cfg)
        patches = subject_patches(
            volume, mask=mask, representations=reps,
            sampler_cfg=cfg.sampler, norm_cfg=cfg.norm,
        )
        pred = classify_subject(
            volume, handles, voting=cfg.voting, patches=patches,
            allow_partial_roster=args.partial_roster,
        )
        manifest = _patch_manifest(volume.subject_id, cfg.sampler.patch_size, patches)
        return pred, manifest

    # threads keep per-scan work independent; results are consumed in input
    # order, so worker count cannot change a single output byte
    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        results = list(pool.map(run_one, scans))

    manifest_dir = out / "manifests"
    manifest_dir.mkdir(exist_ok=True)
    subjects = []
    for pred, manifest in results:
        ref = f"manifests/{pred.subject_id}.json"
        (out / ref).write_text(_dump_json(manifest))
        counts = {}
        for key, decisions in pred.member_slices.items():
            sc = SliceCounts.from_levels(d.level for d in decisions)
            counts[key] = [sc.mild, sc.intermediate, sc.severe]
        subjects.append(
            {
                "subject": pred.subject_id,
                "ensemble": int(pred.level),
                "ensemble_label": LEVEL_NAMES[pred.level],
                "per_classifier": {
                    key: LEVEL_NAMES[level] for key, level in pred.member_levels.items()
                },
                "slice_counts": counts,
                "patches": ref,
            }
        )
    (out / "predictions.json").write_text(_dump_json({"subjects": subjects}))
    with open(out / "predictions.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["scan_id", "level"])
        for record in subjects:
            writer.writerow([record["subject"], record["ensemble"]])
    print(json.dumps(
        {"command": "predict", "subjects": len(subjects),
         "files": ["predictions.json", "predictions.csv"]}, sort_keys=True))
    return EXIT_OK


def cmd_evaluate(args) -> int:
    cfg = _effective_config(args)
    out = _out_dir(cfg)
    truth = _read_scores(Path(args.truth))
    pred = _read_scores(Path(args.pred))
    missing = sorted(set(truth) - set(pred))
    if missing:
        raise ValidationError(
            f"predictions missing for {len(missing)} scans, first: {missing[:5]}"
        )
    extra = len(set(pred) - set(truth))
    if extra:
        log.info("ignoring %d predictions without truth rows", extra)
    ids = sorted(truth)
    cm = confusion_matrix([truth[i] for i in ids], [pred[i] for i in ids])
    mild, inter, severe = cm.per_class_recall
    report = {
        "overall": cm.accuracy,
        "mild": mild,
        "inter": inter,
        "severe": severe,
        "kappa": cm.kappa,
    }
    (out / "report.json").write_text(_dump_json(report))
    print(json.dumps(report, sort_keys=True))
    return EXIT_OK


def cmd_synth(args) -> int:
    cfg = _effective_config(args)
    out = _out_dir(cfg)
    counts = generate_dataset(out, SynthConfig(seed=cfg.seed))
    summary = {"command": "synth", **counts}
    if not args.skip_calibration:
        roster = calibrate_roster(out, cfg.sampler, cfg.norm)
        run_cfg = dataclasses.replace(
            cfg,
            classifiers=tuple(roster[key] for key in sorted(roster)),
            data_root=str(out),
        )
        (out / "pipeline_config.json").write_text(run_cfg.to_json())
        summary["pipeline_config"] = "pipeline_config.json"
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


# --- argument wiring --------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON run configuration")
    common.add_argument("--seed", type=int, help="override the configured seed")
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--workers", type=int,
                        help="parallel workers; never changes output content")

    mask = _Parser(add_help=False)
    group = mask.add_mutually_exclusive_group()
    group.add_argument("--mask", type=Path, help="mask volume path")
    group.add_argument("--no-mask", action="store_true",
                       help="sample the centered fallback window instead")

    parser = _Parser(
        prog="cmrqa",
        description="Patch-based ensemble quality scoring of cardiac MR volumes.",
    )
    sub = parser.add_subparsers(dest="command", metavar="<command>")

    p = sub.add_parser("gradmag", parents=[common],
                       help="write gradient-magnitude maps for one volume")
    p.add_argument("--volume", type=Path, required=True)
    p.add_argument("--format", choices=("json", "png"), default="json")
    p.set_defaults(func=cmd_gradmag)

    p = sub.add_parser("sample", parents=[common, mask],
                       help="sample test patches and write their manifest")
    p.add_argument("--volume", type=Path, required=True)
    p.add_argument("--count", type=int, help="patches per slice")
    p.add_argument("--png", action="store_true", help="dump patch PNGs")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("split", parents=[common],
                       help="subject-atomic cross-validation folds")
    p.add_argument("--labels", type=Path, required=True,
                   help="CSV with scan_id, subject_id, level")
    p.add_argument("--folds", type=int, help="number of folds")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("balance", parents=[common],
                       help="class-balanced training batches")
    p.add_argument("--labels", type=Path, required=True,
                   help="CSV with scan_id, subject_id, level")
    p.add_argument("--batch-size", dest="batch_size", type=int,
                   help="scans per batch, multiple of 3")
    p.set_defaults(func=cmd_balance)

    p = sub.add_parser("predict", parents=[common, mask],
                       help="score volumes with the configured roster")
    p.add_argument("--data", type=Path, help="dataset root with truth.csv")
    p.add_argument("--volume", type=Path, nargs="+", help="volume files to score")
    p.add_argument("--subset", choices=("all", "eval", "calibration"), default="all",
                   help="which split of the dataset to score")
    p.add_argument("--partial-roster", action="store_true",
                   help="allow fewer than the full six classifiers")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", parents=[common],
                       help="accuracy report from truth and prediction CSVs")
    p.add_argument("--truth", type=Path, required=True)
    p.add_argument("--pred", type=Path, required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("synth", parents=[common],
                       help="generate the synthetic benchmark and calibrate a roster")
    p.add_argument("--skip-calibration", action="store_true",
                   help="generate volumes only")
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "command", None) is None:
            raise _UsageError(
                "a subcommand is required: gradmag, sample, split, balance, "
                "predict, evaluate, synth"
            )
        return args.func(args)
    except _UsageError as e:
        return _fail(EXIT_USAGE, "UsageError", str(e))
    except InfeasibleSplitError as e:
        return _fail(EXIT_SPLIT, type(e).__name__, str(e),
                     tallies=[list(t) for t in e.tallies])
    except FileNotFoundError as e:
        return _fail(EXIT_MISSING, type(e).__name__, str(e))
    except (ValidationError, FormatError) as e:
        return _fail(EXIT_INVALID, type(e).__name__, str(e))
    except PipelineError as e:
        return _fail(EXIT_INVALID, type(e).__name__, str(e))
    except Exception as e:  # last resort: keep the record machine-readable
        log.exception("unexpected failure")
        return _fail(EXIT_UNEXPECTED, type(e).__name__, str(e))


if __name__ == "__main__":
    sys.exit(main())
