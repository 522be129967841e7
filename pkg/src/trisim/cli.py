"""Command-line surface tying the pipeline together.

Verbs:
  train   -- hybrid / siamese / baseline-classifier training, writes a
             checkpoint, a line-delimited run log, and a run manifest
  eval    -- kNN accuracy of a checkpoint in view 1 (unit hypersphere) or
             view 2 (unfolded angles)
  export  -- comma-delimited embeddings (raw / sphere / unfolded spaces)
  plot    -- SVG scatter / histogram / map renderings of an export file

The config file is flat ``key = value`` text mirroring TrainConfig field
names; unknown keys are hard errors so hyperparameter typos cannot pass
silently.
"""

import argparse
import dataclasses
import hashlib
import json
import os
import time

import numpy as np

from . import manifold, model, plotting, trainer
from .arrays import DEGENERATE_NORM
from .data import load_idx
from .evaluation import EmbeddingSet, accuracy, knn_predict_batch
from .trainer import TrainConfig, reduction_context

DEFAULT_K = 5

DATA_FILES = {
    "train_images": "train-images-idx3-ubyte",
    "train_labels": "train-labels-idx1-ubyte",
    "test_images": "t10k-images-idx3-ubyte",
    "test_labels": "t10k-labels-idx1-ubyte",
}


def find_data_file(data_dir, name):
    for cand in (name, name + ".gz"):
        path = os.path.join(data_dir, cand)
        if os.path.exists(path):
            return path
    raise FileNotFoundError(f"{name}[.gz] not found in {data_dir}")


def data_paths(data_dir):
    return {key: find_data_file(data_dir, name)
            for key, name in DATA_FILES.items()}


def load_data_dir(data_dir):
    paths = data_paths(data_dir)
    train = load_idx(paths["train_images"], paths["train_labels"], "train")
    test = load_idx(paths["test_images"], paths["test_labels"], "test")
    return train, test, paths


def file_digest(path):
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


_CONFIG_TYPES = {f.name: f.type for f in dataclasses.fields(TrainConfig)}


def _coerce(key, text):
    typ = _CONFIG_TYPES[key]
    if typ is bool:
        low = text.lower()
        if low in ("true", "1", "yes"):
            return True
        if low in ("false", "0", "no"):
            return False
        raise ValueError(f"config key {key}: cannot parse bool from {text!r}")
    if typ is int:
        return int(text)
    return float(text)


def parse_config_file(path) -> TrainConfig:
    """Flat key = value config; unknown keys are hard errors."""
    values = {}
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key = value")
            key, text = (part.strip() for part in line.split("=", 1))
            if key not in _CONFIG_TYPES:
                raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
            values[key] = _coerce(key, text)
    return TrainConfig(**values).validate()


def embedding_set(net, dataset, space, batch=256):
    """EmbeddingSet for a dataset in one of the three spaces.

    Rows whose raw embedding is numerically zero cannot be normalized; they
    are excluded and counted (second return value).
    """
    emb = model.embed_dataset(net, dataset.images, batch=batch).astype(np.float64)
    if space == "raw":
        return EmbeddingSet(emb, dataset.labels, "raw"), 0
    norms = np.sqrt(np.einsum("ij,ij->i", emb, emb))
    keep = norms >= DEGENERATE_NORM
    dropped = int((~keep).sum())
    unit = emb[keep] / norms[keep, None]
    labels = dataset.labels[keep]
    if space == "sphere":
        return EmbeddingSet(unit, labels, "sphere"), dropped
    if space == "unfolded":
        return EmbeddingSet(manifold.unfold(unit), labels, "unfolded"), dropped
    raise ValueError(f"unknown space {space!r}")


def _view_metrics(net, train_ds, test_ds, view, k, periodic=False):
    """kNN accuracy in view 1 (sphere) or view 2 (unfolded angles)."""
    if view == 2 and net.out_dim < 2:
        raise ValueError("view 2 needs output dimension >= 2")
    space = "sphere" if view == 1 else "unfolded"
    with reduction_context(True):
        t0 = time.perf_counter()
        train_set, dropped_train = embedding_set(net, train_ds, space)
        test_set, dropped_test = embedding_set(net, test_ds, space)
        embed_seconds = time.perf_counter() - t0
        t0 = time.perf_counter()
        preds = knn_predict_batch(train_set, test_set.points, k,
                                  periodic=periodic and view == 2)
        acc = accuracy(preds, test_set.labels)
        knn_seconds = time.perf_counter() - t0
    return {
        "view": view,
        "k": k,
        "accuracy": acc,
        "coordinates": int(train_set.points.shape[1]),
        "dropped_train": dropped_train,
        "dropped_test": dropped_test,
        "embed_seconds": embed_seconds,
        "knn_seconds": knn_seconds,
    }


def cmd_train(mode, config, data_dir, out_dir, dim, k=DEFAULT_K,
              deterministic=None):
    """Train a model, evaluate it, and write checkpoint + run log + manifest.

    Returns the manifest dict.
    """
    if mode not in ("hybrid", "siamese", "baseline-classifier"):
        raise ValueError(f"unknown training mode {mode!r}")
    if deterministic is not None:
        config.deterministic_reduction = bool(deterministic)
    config.validate()
    os.makedirs(out_dir, exist_ok=True)
    train_ds, test_ds, paths = load_data_dir(data_dir)

    if mode == "hybrid":
        net, centers, log = trainer.hybrid_train(train_ds, config, dim)
    elif mode == "siamese":
        net = model.build_network(dim, seed=config.seed, dtype=np.float32)
        t0 = time.perf_counter()
        _, log = trainer.train_siamese_stream(net, train_ds.images,
                                              train_ds.labels, config,
                                              config.large_iters)
        log.stage_seconds["siamese"] = time.perf_counter() - t0
    else:
        if dim != 10:
            raise ValueError("baseline-classifier trains a 10-dimensional "
                             "output (one target per class)")
        net = model.build_network(10, seed=config.seed, dtype=np.float32)
        targets = np.eye(10)[train_ds.labels]
        t0 = time.perf_counter()
        _, log = trainer.train_supervised(net, train_ds.images, targets,
                                          config, iters=config.large_iters,
                                          stage="classifier")
        log.stage_seconds["classifier"] = time.perf_counter() - t0

    # Stage-4 length normalization happens here, at inference time.
    t0 = time.perf_counter()
    view1 = _view_metrics(net, train_ds, test_ds, view=1, k=k)
    log.stage_seconds["normalize"] = view1["embed_seconds"]
    log.metrics["view1_accuracy"] = view1["accuracy"]
    log.metrics["dropped_test"] = view1["dropped_test"]
    if mode == "baseline-classifier":
        with reduction_context(True):
            scores = model.embed_dataset(net, test_ds.images)
        log.metrics["argmax_accuracy"] = accuracy(
            np.argmax(scores, axis=1), test_ds.labels)

    checkpoint = os.path.join(out_dir, "checkpoint.bin")
    model.save_params(net, checkpoint)
    runlog_path = os.path.join(out_dir, "runlog.csv")
    log.save(runlog_path)

    manifest = {
        "mode": mode,
        "dim": dim,
        "k": k,
        "config": config.as_dict(),
        "data_dir": os.path.abspath(data_dir),
        "data_digests": {key: file_digest(p) for key, p in paths.items()},
        "checkpoint": checkpoint,
        "outputs": [runlog_path],
        "stage_seconds": dict(log.stage_seconds),
        "skipped_pairs": log.skipped_pairs,
        "metrics": dict(log.metrics),
    }
    manifest_path = os.path.join(out_dir, "manifest.json")
    with open(manifest_path, "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
    manifest["manifest_path"] = manifest_path
    return manifest


def run_from_manifest(manifest_path, out_dir):
    """Deterministic rerun driven solely by a manifest; the input files must
    still match the recorded digests. Returns the new manifest."""
    with open(manifest_path) as f:
        recorded = json.load(f)
    config = TrainConfig(**recorded["config"])
    paths = data_paths(recorded["data_dir"])
    for key, path in paths.items():
        digest = file_digest(path)
        if digest != recorded["data_digests"][key]:
            raise ValueError(f"{key} digest changed since the recorded run; "
                             "rerun would not reproduce it")
    return cmd_train(recorded["mode"], config, recorded["data_dir"], out_dir,
                     recorded["dim"], k=recorded["k"])


def cmd_eval(checkpoint, data_dir, view=1, k=DEFAULT_K, periodic=False):
    """Evaluate a checkpoint; prints and returns the metrics."""
    net = model.load_params(checkpoint)
    train_ds, test_ds, _ = load_data_dir(data_dir)
    metrics = _view_metrics(net, train_ds, test_ds, view, k, periodic=periodic)
    print(f"view {metrics['view']} ({metrics['coordinates']} coordinates), "
          f"k={k}: accuracy {metrics['accuracy']:.4f} "
          f"(embed {metrics['embed_seconds']:.1f}s, "
          f"knn {metrics['knn_seconds']:.1f}s)")
    return metrics


def cmd_export(checkpoint, data_dir, space, out_path, split="test"):
    """Write one row per sample: label then coordinates, in dataset order."""
    net = model.load_params(checkpoint)
    train_ds, test_ds, _ = load_data_dir(data_dir)
    ds = {"train": train_ds, "test": test_ds}[split]
    with reduction_context(True):
        emb_set, dropped = embedding_set(net, ds, space)
    if dropped:
        print(f"warning: {dropped} degenerate embeddings excluded")
    width = emb_set.points.shape[1]
    prefix = "phi" if space == "unfolded" else "e"
    header = "label," + ",".join(f"{prefix}{i + 1}" for i in range(width))
    lines = [header]
    for label, row in zip(emb_set.labels, emb_set.points):
        coords = ",".join(repr(float(v)) for v in row)
        lines.append(f"{int(label)},{coords}")
    with open(out_path, "w") as f:
        f.write("\n".join(lines) + "\n")
    return out_path


def read_export(path):
    labels = []
    coords = []
    with open(path) as f:
        header = f.readline().strip().split(",")
        if not header or header[0] != "label":
            raise ValueError(f"{path}: not an export file (header {header})")
        for line in f:
            parts = line.strip().split(",")
            if not parts or parts == [""]:
                continue
            labels.append(int(parts[0]))
            coords.append([float(v) for v in parts[1:]])
    return np.asarray(labels), np.asarray(coords)


def cmd_plot(export_path, kind, out_path, bins=100):
    """Render an export file to SVG. scatter: 2 coordinate columns,
    histogram: 1, map: 2 or 3 (3 adds a per-axis projection companion)."""
    labels, coords = read_export(export_path)
    width = coords.shape[1] if coords.ndim == 2 else 1
    if kind == "scatter":
        if width != 2:
            raise ValueError(f"scatter needs 2 coordinate columns, got {width}")
        return plotting.scatter_plot(coords, labels, out_path)
    if kind == "histogram":
        if width != 1:
            raise ValueError(f"histogram needs 1 coordinate column, got {width}")
        return plotting.histogram_plot(coords[:, 0], labels, out_path, bins=bins)
    if kind == "map":
        if width not in (2, 3):
            raise ValueError(f"map needs 2 or 3 coordinate columns, got {width}")
        return plotting.map_plot(coords, labels, out_path)
    raise ValueError(f"unknown plot kind {kind!r}")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="trisim",
        description="siamese metric learning with the triangular loss")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model and write a manifest")
    p.add_argument("--mode", choices=("hybrid", "siamese", "baseline-classifier"),
                   default="hybrid")
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--data-dir", required=False)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--dim", type=int, default=3)
    p.add_argument("--k", type=int, default=DEFAULT_K)
    p.add_argument("--seed", type=int)
    p.add_argument("--deterministic", action="store_true", default=None)
    p.add_argument("--from-manifest", help="rerun a recorded manifest")

    p = sub.add_parser("eval", help="kNN accuracy of a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data-dir", required=True)
    p.add_argument("--view", type=int, choices=(1, 2), default=1)
    p.add_argument("--k", type=int, default=DEFAULT_K)
    p.add_argument("--periodic", action="store_true",
                   help="wrap the azimuthal axis in view 2")

    p = sub.add_parser("export", help="write embeddings as delimited text")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data-dir", required=True)
    p.add_argument("--space", choices=("raw", "sphere", "unfolded"),
                   default="sphere")
    p.add_argument("--split", choices=("train", "test"), default="test")
    p.add_argument("--out", required=True)

    p = sub.add_parser("plot", help="render an export file to SVG")
    p.add_argument("--export", required=True, dest="export_path")
    p.add_argument("--kind", choices=("scatter", "histogram", "map"),
                   required=True)
    p.add_argument("--bins", type=int, default=100)
    p.add_argument("--out", required=True)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "train":
            if args.from_manifest:
                manifest = run_from_manifest(args.from_manifest, args.out)
            else:
                if not args.data_dir:
                    raise ValueError("train needs --data-dir (or --from-manifest)")
                config = (parse_config_file(args.config) if args.config
                          else TrainConfig())
                if args.seed is not None:
                    config.seed = args.seed
                manifest = cmd_train(args.mode, config, args.data_dir, args.out,
                                     args.dim, k=args.k,
                                     deterministic=args.deterministic)
            print(f"manifest: {manifest['manifest_path']}")
            for key, value in sorted(manifest["metrics"].items()):
                print(f"  {key}: {value}")
        elif args.command == "eval":
            cmd_eval(args.checkpoint, args.data_dir, view=args.view, k=args.k,
                     periodic=args.periodic)
        elif args.command == "export":
            path = cmd_export(args.checkpoint, args.data_dir, args.space,
                              args.out, split=args.split)
            print(f"wrote {path}")
        elif args.command == "plot":
            for path in cmd_plot(args.export_path, args.kind, args.out,
                                 bins=args.bins):
                print(f"wrote {path}")
        return 0
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}")
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
