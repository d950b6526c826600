#!/usr/bin/env python3
"""Interference study: a gesture-only model vs one retrained with
interference classes (small wrist flicks, people walking/running by).

Stage 1 trains on the four gestures only and shows how interference scenes
get absorbed into gesture classes.  Stage 2 adds the two interference
classes and reports how many interference scenes are correctly rejected.
"""

import argparse
from pathlib import Path

import numpy as np

from mmgesture import dataset as ds
from mmgesture.cli import main as mmg
from mmgesture.nn import GestureNet, TrainConfig, train
from mmgesture.scene import GESTURE_LABELS, INTERFERENCE_LABELS

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def simulate(out, presets, count, seed):
    assert mmg(["simulate", "--preset", ",".join(presets), "--count", str(count),
                "--seed", str(seed), "--config", str(CONFIGS / "fast.cfg"),
                "--out", str(out)]) == 0


def load(out, names):
    manifest = ds.load_manifest(Path(out) / "manifest.json")
    samples = ds.load_samples(manifest, out)
    return ds.tensors_from_samples(samples, names)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="interference_out")
    parser.add_argument("--count", type=int, default=20, help="samples per class")
    parser.add_argument("--epochs", type=int, default=40)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    out = Path(args.out)
    names6 = list(GESTURE_LABELS) + list(INTERFERENCE_LABELS)
    simulate(out / "gestures", ["knock", "left-swipe", "right-swipe", "rotate"],
             args.count, args.seed)
    simulate(out / "interference", ["tiny", "walk-run"], args.count, args.seed + 1)

    Xg, yg = load(out / "gestures", names6)
    Xi, yi = load(out / "interference", names6)

    model4 = GestureNet(n_classes=4, seed=args.seed)
    train(model4, Xg, yg, TrainConfig(epochs=args.epochs, seed=args.seed))
    preds4 = model4.predict(Xi)
    print("\ngesture-only model on interference scenes (predictions forced into gestures):")
    for k, label in enumerate(INTERFERENCE_LABELS):
        mask = yi == 4 + k
        shares = [float(np.mean(preds4[mask] == g)) * 100 for g in range(4)]
        print(f"  {label:24s} " + "  ".join(
            f"{GESTURE_LABELS[g]} {shares[g]:5.1f}%" for g in range(4)))

    model6 = GestureNet(n_classes=6, seed=args.seed)
    train(model6, np.concatenate([Xg, Xi]), np.concatenate([yg, yi]),
          TrainConfig(epochs=args.epochs, seed=args.seed))
    preds6 = model6.predict(Xi)
    print("\nretrained 6-class model on the same interference scenes:")
    for k, label in enumerate(INTERFERENCE_LABELS):
        mask = yi == 4 + k
        rejected = float(np.mean(preds6[mask] >= 4)) * 100
        print(f"  {label:24s} rejected as interference: {rejected:.1f}%")


if __name__ == "__main__":
    main()
