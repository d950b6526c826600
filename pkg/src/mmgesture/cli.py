"""Command-line pipeline driver: simulate / train / eval / report.

Every command is deterministic for fixed seeds.  Per-sample seeds derive
from (master seed, class index, anchor index, sample index) through
SeedSequence, so simulation results do not depend on worker scheduling,
and a manifest entry's seed alone reproduces its scene and noise draws.
"""

from __future__ import annotations

import argparse
import multiprocessing
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import dataset as ds
from . import dsp, frontend, pointcloud, scene
from .errors import InvalidArgumentError, MmGestureError
from .nn import (GestureNet, TrainConfig, evaluate, load_checkpoint,
                 read_history_csv, save_checkpoint, train, write_history_csv)

DEFAULT_PRESETS = "knock,left-swipe,right-swipe,rotate"


def _entry_seed(master: int, class_idx: int, anchor_idx: int, sample_idx: int) -> int:
    ss = np.random.SeedSequence([master, class_idx, anchor_idx, sample_idx])
    return int(ss.generate_state(1)[0])


def _derived_seed(entry_seed: int, tag: int) -> int:
    return int(np.random.SeedSequence([entry_seed, tag]).generate_state(1)[0])


def simulate_sample(task: dict) -> dict:
    """Worker: scene -> 30 frames of IF synthesis -> DSP -> raw points CSV."""
    config: frontend.ChirpConfig = task["config"]
    sc = scene.make_preset_scene(task["preset"], task["anchor"],
                                 _derived_seed(task["seed"], 0),
                                 n_clutter=task["n_clutter"])
    cfar = dsp.CfarConfig()
    frames = []
    rd_rows = []
    n_frames = pointcloud.N_FRAMES
    for j in range(n_frames):
        cube = frontend.synthesize_frame(
            sc, config, t0=j * config.frame_period,
            noise_std=task["noise_std"], rng_seed=_derived_seed(task["seed"], 1 + j))
        if task.get("dump_rd"):
            rd_rows.append(dsp.range_doppler(cube).summed)
        frames.append(pointcloud.FramePoints(j, dsp.extract_points(cube, cfar)))
    out_dir = Path(task["out_dir"])
    csv_path = f"{task['sample_id']}.csv"
    pointcloud.write_frames_csv(out_dir / csv_path, task["sample_id"],
                                sc.label, frames)
    if task.get("dump_rd"):
        dump_dir = Path(task["dump_rd"]) / task["sample_id"]
        dump_dir.mkdir(parents=True, exist_ok=True)
        for j, summed in enumerate(rd_rows):
            np.savetxt(dump_dir / f"frame_{j:02d}.csv", summed, delimiter=",")
    return {"sample_id": task["sample_id"], "label": sc.label,
            "preset": task["preset"], "seed": task["seed"],
            "anchor": tuple(task["anchor"]), "noise_std": task["noise_std"],
            "csv_path": csv_path}


def cmd_simulate(args) -> int:
    config, profile_noise = ((frontend.load_profile(args.config))
                             if args.config else (frontend.DEFAULT_CONFIG, 1.0))
    noise_std = profile_noise if args.noise_std is None else args.noise_std
    presets = [p.strip() for p in args.preset.split(",") if p.strip()]
    for preset in presets:
        if preset not in scene.PRESET_TO_LABEL:
            raise InvalidArgumentError(
                f"unknown preset {preset!r}; expected {sorted(scene.PRESET_TO_LABEL)}")
    anchors = [_parse_anchor(a) for a in (args.anchor or ["0,2.4,0"])]

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    tasks = []
    for ci, preset in enumerate(presets):
        for ai, anchor in enumerate(anchors):
            for i in range(args.count):
                tasks.append({
                    "sample_id": f"{preset}-a{ai}-{i:04d}",
                    "preset": preset,
                    "anchor": anchor,
                    "seed": _entry_seed(args.seed, ci, ai, i),
                    "noise_std": noise_std,
                    "n_clutter": args.clutter,
                    "config": config,
                    "out_dir": str(out_dir),
                    "dump_rd": args.dump_rd,
                })

    t0 = time.time()
    workers = args.workers or min(4, os.cpu_count() or 1)
    if workers > 1 and len(tasks) > 1:
        with multiprocessing.Pool(workers) as pool:
            results = pool.map(simulate_sample, tasks, chunksize=1)
    else:
        results = [simulate_sample(t) for t in tasks]

    manifest = ds.Manifest(
        config_hash=frontend.config_hash(config, noise_std),
        entries=[ds.ManifestEntry(**r) for r in results],
        chirp=config.to_mapping(noise_std))
    ds.save_manifest(out_dir / "manifest.json", manifest)
    print(f"simulate: wrote {len(results)} samples to {out_dir} "
          f"({time.time() - t0:.1f}s, workers={workers})")
    return 0


def _parse_anchor(text: str) -> tuple[float, float, float]:
    parts = text.split(",")
    if len(parts) != 3:
        raise InvalidArgumentError(f"anchor must be 'x,y,z', got {text!r}")
    try:
        return tuple(float(p) for p in parts)
    except ValueError:
        raise InvalidArgumentError(f"non-numeric anchor {text!r}")


def _load_tensors(manifest_path, class_names=None):
    manifest = ds.load_manifest(manifest_path)
    samples = ds.load_samples(manifest, Path(manifest_path).parent)
    if class_names is None:
        class_names = ds.class_names_for([s.label for s in samples])
    tensors, labels = ds.tensors_from_samples(samples, class_names)
    return manifest, tensors, labels, class_names


def cmd_train(args) -> int:
    manifest, tensors, labels, class_names = _load_tensors(args.manifest)
    train_idx, test_idx = ds.stratified_split(labels, args.test_fraction,
                                              args.split_seed)
    cfg = TrainConfig(batch_size=args.batch_size, epochs=args.epochs,
                      lr=args.lr, seed=args.train_seed)
    print(f"train: {train_idx.size} train / {test_idx.size} test samples, "
          f"classes={class_names}")
    print(f"train: split 80/20 stratified, split_seed={args.split_seed}, "
          f"test_fraction={args.test_fraction}")
    model = GestureNet(n_classes=len(class_names), seed=args.train_seed)
    log = (lambda msg: print(f"train: {msg}", flush=True)) if args.verbose else None
    history = train(model, tensors[train_idx], labels[train_idx], cfg, log=log)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    _, train_acc = evaluate(model, tensors[train_idx], labels[train_idx], class_names)
    metadata = {
        "class_names": class_names,
        "config_hash": manifest.config_hash,
        "split_seed": args.split_seed,
        "test_fraction": args.test_fraction,
        "train_seed": args.train_seed,
        "epochs": args.epochs,
        "batch_size": args.batch_size,
        "lr": args.lr,
        "n_train": int(train_idx.size),
        "n_test": int(test_idx.size),
    }
    save_checkpoint(out_dir / "model.ckpt", model, metadata)
    write_history_csv(out_dir / "history.csv", history)
    print(f"train: final loss {history[-1]['loss']:.4f}, "
          f"train accuracy {train_acc * 100:.2f}%")
    if test_idx.size:
        _, test_acc = evaluate(model, tensors[test_idx], labels[test_idx], class_names)
        print(f"train: held-out accuracy {test_acc * 100:.2f}%")
    print(f"train: wrote {out_dir / 'model.ckpt'} and {out_dir / 'history.csv'}")
    return 0


def cmd_eval(args) -> int:
    model, metadata = load_checkpoint(args.checkpoint)
    class_names = metadata["class_names"]
    manifest, tensors, labels, _ = _load_tensors(args.manifest, class_names)
    matrix, accuracy = evaluate(model, tensors, labels, class_names)
    header = (f"eval: manifest={args.manifest} samples={labels.size} "
              f"config_hash={manifest.config_hash}\n"
              f"eval: model split_seed={metadata.get('split_seed')} "
              f"test_fraction={metadata.get('test_fraction')}")
    report = f"{header}\n{matrix.render()}\noverall accuracy: {accuracy * 100:.2f}%"
    print(report)
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "report.txt").write_text(report + "\n")
        rows = ["true,predicted,count"]
        for i, row in enumerate(matrix.counts):
            for j, count in enumerate(row):
                rows.append(f"{class_names[i]},{class_names[j]},{count}")
        (out_dir / "confusion.csv").write_text("\n".join(rows) + "\n")
        print(f"eval: wrote {out_dir / 'report.txt'} and {out_dir / 'confusion.csv'}")
    return 0


def cmd_report(args) -> int:
    history = read_history_csv(args.history)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_history_csv(out_dir / "curves.csv", history)

    import matplotlib
    matplotlib.use("Agg")
    matplotlib.rcParams["svg.hashsalt"] = "mmgesture"
    import matplotlib.pyplot as plt

    epochs = [r["epoch"] for r in history]
    fig, (ax_loss, ax_acc) = plt.subplots(1, 2, figsize=(9, 3.5))
    ax_loss.plot(epochs, [r["loss"] for r in history])
    ax_loss.set_xlabel("epoch"); ax_loss.set_ylabel("loss")
    ax_acc.plot(epochs, [r["accuracy"] for r in history])
    ax_acc.set_xlabel("epoch"); ax_acc.set_ylabel("train accuracy")
    ax_acc.set_ylim(0, 1.02)
    fig.tight_layout()
    fig.savefig(out_dir / "curves.svg", metadata={"Date": None})
    plt.close(fig)
    print(f"report: wrote {out_dir / 'curves.csv'} and {out_dir / 'curves.svg'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mmgesture",
        description="Simulator-backed mmWave gesture recognition pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="synthesize gesture samples into CSVs + manifest")
    p.add_argument("--preset", default=DEFAULT_PRESETS,
                   help=f"comma-separated presets (default: {DEFAULT_PRESETS})")
    p.add_argument("--count", type=int, default=50, help="samples per preset per anchor")
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--config", help="chirp profile file (key=value)")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--anchor", action="append",
                   help="hand rest position 'x,y,z' in meters; repeatable "
                        "(default 0,2.4,0)")
    p.add_argument("--noise-std", type=float, default=None,
                   help="override the profile's receiver noise std")
    p.add_argument("--clutter", type=int, default=0,
                   help="static clutter reflectors per scene")
    p.add_argument("--workers", type=int, default=0,
                   help="simulation worker processes (default: cpu count, max 4)")
    p.add_argument("--dump-rd", default=None,
                   help="also dump summed range-Doppler maps as CSV grids here")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("train", help="train the five-branch classifier on a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="output directory for checkpoint/history")
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--split-seed", type=int, default=0)
    p.add_argument("--train-seed", type=int, default=0)
    p.add_argument("--test-fraction", type=float, default=0.2)
    p.add_argument("--verbose", action="store_true", help="log every epoch")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="confusion matrix report for a checkpoint")
    p.add_argument("--manifest", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", default=None, help="also write report.txt/confusion.csv here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", help="emit loss/accuracy curves from a history CSV")
    p.add_argument("--history", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except MmGestureError as exc:
        print(f"error:{exc.category}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error:io-error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
