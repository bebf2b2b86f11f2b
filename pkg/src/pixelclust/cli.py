"""Command-line front end: ``pixelclust <command> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .clustering import ClusteringError, Partition, load_partition, save_partition
from .dataset import DatasetError, load_dataset
from .evaluation import (
    METHODS,
    ExperimentConfig,
    nn1_classify,
    rows_to_csv,
    run_experiment,
    summarize,
    summary_to_csv,
)
from .pgm import PGMError, decode_pgm, encode_pgm
from .pixelspace import devectorize, vectorize
from .projection import (
    ProjectionError,
    fit_pedacos_por_valor,
    load_model,
    project,
    reconstruct,
    region_map_pgm,
    representation_error,
    save_model,
)

log = logging.getLogger("pixelclust")

DATA_ENV = "PIXELCLUST_DATA"

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["experiment", "dataset"],
    "properties": {
        "experiment": {"enum": ["k_sweep", "few_classes", "overcluster"]},
        "dataset": {"type": "string", "minLength": 1},
        "dataset_path": {"type": "string"},
        "methods": {"type": "array", "minItems": 1, "items": {"enum": list(METHODS)}},
        "feature_counts": {"type": "array", "minItems": 1, "items": {"type": "integer", "minimum": 1}},
        "clusters_formed": {"type": "array", "minItems": 1, "items": {"type": "integer", "minimum": 1}},
        "projection_training_classes": {
            "type": "array", "minItems": 1, "items": {"type": "integer", "minimum": 1, "maximum": 3},
        },
        "pv_features": {"type": "integer", "minimum": 1},
        "holdout_repetitions": {"type": "integer", "minimum": 1},
        "base_seed": {"type": "integer", "minimum": 0},
        "train_fraction": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "image_format": {"type": "string"},
        "resize": {
            "type": ["array", "null"], "items": {"type": "integer", "minimum": 1},
            "minItems": 2, "maxItems": 2,
        },
        "max_iterations": {"type": "integer", "minimum": 1},
        "tolerance": {"type": "number", "minimum": 0},
        "restarts": {"type": "integer", "minimum": 1},
    },
}


class CLIError(Exception):
    pass


def parse_config(raw: dict) -> ExperimentConfig:
    """Validate a config dict; every schema violation is reported by field."""
    errors = sorted(jsonschema.Draft7Validator(CONFIG_SCHEMA).iter_errors(raw), key=lambda e: list(e.path))
    if errors:
        lines = []
        for e in errors:
            where = ".".join(str(p) for p in e.path) or "<root>"
            lines.append(f"  {where}: {e.message}")
        raise CLIError("invalid experiment config:\n" + "\n".join(lines))
    d = dict(raw)
    for key in ("methods", "feature_counts", "clusters_formed", "projection_training_classes", "resize"):
        if d.get(key) is not None:
            d[key] = tuple(d[key])
    return ExperimentConfig(**d)


def _dataset_root(name: str | None, explicit: str = "") -> Path:
    if explicit:
        return Path(explicit)
    base = os.environ.get(DATA_ENV)
    if name and (Path(name).is_dir() or base is None or os.sep in name):
        return Path(name)
    if base is None:
        raise CLIError(f"no dataset given and ${DATA_ENV} is unset")
    return Path(base) / name if name else Path(base)


def _parse_size(text: str | None):
    if not text:
        return None
    try:
        w, h = (int(t) for t in text.lower().split("x"))
    except ValueError:
        raise CLIError(f"--size expects WxH, got {text!r}") from None
    return w, h


def _write_manifest(path: Path, command: str, config: dict, started: float, ds=None) -> None:
    manifest = {
        "command": command,
        "config": config,
        "tool_version": __version__,
        "duration_seconds": round(time.perf_counter() - started, 3),
    }
    if ds is not None:
        manifest["dataset"] = {
            "root": ds.root,
            "sha256": ds.checksum,
            "samples": len(ds),
            "classes": list(ds.class_names),
            "width": ds.width,
            "height": ds.height,
        }
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _sidecar(out: Path, suffix: str) -> Path:
    return out.with_name(out.stem + suffix)


def _read_image(path: str) -> tuple[np.ndarray, int]:
    samples, maxval = decode_pgm(Path(path).read_bytes(), path)
    return samples / float(maxval), maxval


# ---------------------------------------------------------------- commands


def cmd_fit(args) -> None:
    started = time.perf_counter()
    root = _dataset_root(args.dataset)
    ds = load_dataset(root, args.format, _parse_size(args.size))
    n = args.n
    model = fit_pedacos_por_valor(
        ds.vectors(), ds.width, ds.height, n, args.clusters_formed,
        seed=args.seed, max_iterations=args.max_iterations,
        tolerance=args.tolerance, restarts=args.restarts, workers=args.workers,
    )
    out = Path(args.out)
    save_model(model.projection, out)
    save_partition(model.partition, _sidecar(out, ".partition.txt"))
    _sidecar(out, ".regions.pgm").write_bytes(region_map_pgm(model.partition))
    config = {
        "n": n, "clusters_formed": args.clusters_formed or n, "seed": args.seed,
        "max_iterations": args.max_iterations, "tolerance": args.tolerance,
        "restarts": args.restarts, "size": args.size, "format": args.format,
        "kmeans_iterations": model.partition.iterations,
        "kmeans_converged": model.partition.converged,
        "wcss": model.partition.wcss_history[-1],
    }
    _write_manifest(_sidecar(out, ".manifest.json"), "fit", config, started, ds)
    print(f"{model.n_features} regions over {model.projection.p} pixels -> {out}")


def cmd_project(args) -> None:
    started = time.perf_counter()
    W = load_model(args.model)
    lines = []
    for path in args.images:
        img, _ = _read_image(path)
        if img.shape != (W.height, W.width):
            raise CLIError(f"{path}: {img.shape[1]}x{img.shape[0]} does not match model {W.width}x{W.height}")
        f = project(W, vectorize(img))
        lines.append(" ".join([path, *(repr(float(v)) for v in f)]))
    text = "\n".join(lines) + "\n"
    if args.out:
        out = Path(args.out)
        out.write_text(text)
        _write_manifest(_sidecar(out, ".manifest.json"), "project",
                        {"model": args.model, "images": args.images}, started)
    else:
        sys.stdout.write(text)


def cmd_reconstruct(args) -> None:
    started = time.perf_counter()
    W = load_model(args.model)
    img, maxval = _read_image(args.image)
    if img.shape != (W.height, W.width):
        raise CLIError(
            f"{args.image}: {img.shape[1]}x{img.shape[0]} does not match model {W.width}x{W.height}"
        )
    x = vectorize(img)
    x_hat = reconstruct(W, project(W, x))
    mse = representation_error(x, x_hat)
    if args.raw_units:
        mse *= maxval**2
    out = Path(args.out)
    rec = devectorize(x_hat, W.width, W.height)
    out.write_bytes(encode_pgm(np.rint(np.clip(rec, 0, 1) * maxval).astype(np.int64), maxval))
    _write_manifest(_sidecar(out, ".manifest.json"), "reconstruct",
                    {"model": args.model, "image": args.image, "mse": mse}, started)
    print(f"mse {mse!r}")


def cmd_classify(args) -> None:
    W = load_model(args.model)
    ds = load_dataset(_dataset_root(args.dataset), args.format, _parse_size(args.size))
    if (ds.width, ds.height) != (W.width, W.height):
        raise CLIError("dataset geometry does not match the model")
    F_train = project(W, ds.vectors())
    for path in args.images:
        img, _ = _read_image(path)
        if img.shape != (W.height, W.width):
            raise CLIError(f"{path}: size does not match model {W.width}x{W.height}")
        label = nn1_classify(F_train, ds.labels, project(W, vectorize(img)))
        print(f"{path} {ds.class_names[label]}")


def cmd_region_map(args) -> None:
    started = time.perf_counter()
    if args.partition:
        part = load_partition(args.partition)
    elif args.model:
        W = load_model(args.model)
        try:
            part = Partition.from_clusters(W.supports, W.width, W.height)
        except ClusteringError:
            raise CLIError("model regions do not cover the image; pass --partition") from None
    else:
        raise CLIError("region-map needs --partition or --model")
    out = Path(args.out)
    out.write_bytes(region_map_pgm(part))
    _write_manifest(_sidecar(out, ".manifest.json"), "region-map",
                    {"partition": args.partition, "model": args.model}, started)


def cmd_experiment(args) -> None:
    started = time.perf_counter()
    try:
        raw = json.loads(Path(args.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise CLIError(f"{args.config}: {exc}") from None
    if args.seed is not None:
        raw["base_seed"] = args.seed
    cfg = parse_config(raw)
    root = _dataset_root(cfg.dataset, cfg.dataset_path)
    ds = load_dataset(root, cfg.image_format, cfg.resize)
    rows = run_experiment(ds, cfg, workers=args.workers)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "results.csv").write_text(rows_to_csv(rows))
    (out / "summary.csv").write_text(summary_to_csv(summarize(rows)))
    _write_manifest(out / "manifest.json", "experiment", cfg.to_dict(), started, ds)
    for r in summarize(rows):
        print(f"{r.experiment} {r.method} formed={r.clusters_formed} kept={r.features_kept} "
              f"mean={r.mean:.4f} std={r.std:.4f}")


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pixelclust", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def dataset_opts(p):
        p.add_argument("--dataset", default=os.environ.get(DATA_ENV),
                       help=f"dataset root (default ${DATA_ENV})")
        p.add_argument("--format", default="pgm", help="image file format (default pgm)")
        p.add_argument("--size", help="resize every image to WxH, e.g. 92x112")

    p = sub.add_parser("fit", help="cluster a dataset into regions and write the model")
    dataset_opts(p)
    p.add_argument("--n", type=int, required=True, help="features (regions) to keep")
    p.add_argument("--clusters-formed", type=int, help="clusters to form before variance selection")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-iterations", type=int, default=300)
    p.add_argument("--tolerance", type=float, default=1e-6)
    p.add_argument("--restarts", type=int, default=1)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("project", help="print region features of images")
    p.add_argument("--model", required=True)
    p.add_argument("images", nargs="+")
    p.add_argument("--out")
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("reconstruct", help="rebuild an image from its region features")
    p.add_argument("--model", required=True)
    p.add_argument("image")
    p.add_argument("--out", required=True)
    p.add_argument("--raw-units", action="store_true",
                   help="report the error in stored sample units instead of [0, 1]")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("classify", help="1-NN label of images against a dataset")
    dataset_opts(p)
    p.add_argument("--model", required=True)
    p.add_argument("images", nargs="+")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("region-map", help="export a region map as PGM")
    p.add_argument("--partition")
    p.add_argument("--model")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_region_map)

    p = sub.add_parser("experiment", help="run a JSON-configured experiment")
    p.add_argument("config")
    p.add_argument("--seed", type=int, help="overrides base_seed")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        args.func(args)
    except (CLIError, DatasetError, PGMError, ProjectionError, ClusteringError, ValueError, OSError) as exc:
        print(f"pixelclust {args.command}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
