#!/usr/bin/env python3
"""End-to-end demo at desk scale: simulate, train, evaluate, plot.

Runs the whole pipeline through the CLI on a small dataset (a few minutes
on a laptop).  Outputs land under --out: dataset/, run/, report/, curves/.
"""

import argparse
from pathlib import Path

from mmgesture.cli import main as mmg

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def run(args):
    out = Path(args.out)
    dataset = out / "dataset"
    assert mmg(["simulate", "--count", str(args.count), "--seed", str(args.seed),
                "--config", str(CONFIGS / "fast.cfg"), "--out", str(dataset),
                "--clutter", str(args.clutter)]) == 0
    assert mmg(["train", "--manifest", str(dataset / "manifest.json"),
                "--out", str(out / "run"), "--epochs", str(args.epochs),
                "--split-seed", str(args.seed), "--train-seed", str(args.seed)]) == 0
    assert mmg(["eval", "--manifest", str(dataset / "manifest.json"),
                "--checkpoint", str(out / "run" / "model.ckpt"),
                "--out", str(out / "report")]) == 0
    assert mmg(["report", "--history", str(out / "run" / "history.csv"),
                "--out", str(out / "curves")]) == 0
    print(f"\ndemo done; see {out}/report/report.txt and {out}/curves/curves.svg")


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="demo_out")
    parser.add_argument("--count", type=int, default=12, help="samples per gesture")
    parser.add_argument("--epochs", type=int, default=30)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--clutter", type=int, default=3,
                        help="static reflectors per scene")
    run(parser.parse_args())
