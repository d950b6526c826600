#!/usr/bin/env python3
"""Cross-distance experiment: how anchor distance shifts break the model.

Recreates the floor-brick protocol at desk scale: gestures performed at
2.4 m (brick 5) and 1.8 m (brick 4, one 0.6 m brick closer).  An "origin"
model trained only at 2.4 m is evaluated at both distances, then a "new"
model trained on both distances is evaluated the same way, printing a
side-by-side accuracy table per gesture.
"""

import argparse
import time
from pathlib import Path

import numpy as np

from mmgesture import dataset as ds
from mmgesture.cli import main as mmg
from mmgesture.nn import GestureNet, TrainConfig, evaluate, train
from mmgesture.scene import GESTURE_LABELS

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
BRICKS = {"brick5": "0,2.4,0", "brick4": "0,1.8,0"}


def simulate(out, anchors, count, seed):
    argv = ["simulate", "--count", str(count), "--seed", str(seed),
            "--config", str(CONFIGS / "fast.cfg"), "--out", str(out)]
    for anchor in anchors:
        argv += ["--anchor", anchor]
    assert mmg(argv) == 0


def load_by_anchor(out):
    manifest = ds.load_manifest(Path(out) / "manifest.json")
    samples = ds.load_samples(manifest, out)
    names = ds.class_names_for([s.label for s in samples])
    X, y = ds.tensors_from_samples(samples, names)
    anchor_y = np.array([e.anchor[1] for e in manifest.entries])
    return X, y, names, anchor_y


def per_class_accuracy(model, X, y, names):
    matrix, _ = evaluate(model, X, y, names)
    return np.diag(matrix.percentages())


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="distance_out")
    parser.add_argument("--count", type=int, default=20, help="samples per gesture per anchor")
    parser.add_argument("--epochs", type=int, default=40)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    t0 = time.time()
    out = Path(args.out)
    simulate(out / "both", list(BRICKS.values()), args.count, args.seed)
    X, y, names, anchor_y = load_by_anchor(out / "both")
    at5, at4 = anchor_y == 2.4, anchor_y == 1.8

    origin = GestureNet(n_classes=len(names), seed=args.seed)
    train(origin, X[at5], y[at5], TrainConfig(epochs=args.epochs, seed=args.seed))
    both = GestureNet(n_classes=len(names), seed=args.seed)
    train(both, X, y, TrainConfig(epochs=args.epochs, seed=args.seed))

    rows = [
        ("brick5 (origin model)", per_class_accuracy(origin, X[at5], y[at5], names)),
        ("brick4 (origin model)", per_class_accuracy(origin, X[at4], y[at4], names)),
        ("brick5 (new model)", per_class_accuracy(both, X[at5], y[at5], names)),
        ("brick4 (new model)", per_class_accuracy(both, X[at4], y[at4], names)),
    ]
    width = 24
    print("\nScenes".ljust(width) + "".join(n.rjust(14) for n in GESTURE_LABELS))
    for name, accs in rows:
        print(name.ljust(width) + "".join(f"{a:.2f}%".rjust(14) for a in accs))
    print(f"\n({time.time() - t0:.0f}s; training data is evaluated in-sample here, "
          "the point is the cross-distance contrast)")


if __name__ == "__main__":
    main()
