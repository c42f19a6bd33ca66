#!/usr/bin/env python3
"""End-to-end experiment: generate search data, train the pruning net,
benchmark the learned search against the exact one.

Writes everything under results/ (dataset, model, training history, and the
three benchmark CSVs).  Frame counts and epochs are sized so the whole run
finishes in minutes on a laptop; pass --frames/--epochs to scale up.
"""

import argparse
import os
import sys

from mecoffload.cli import main as cli


def run(argv) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--config", default=os.path.join(
        os.path.dirname(__file__), "desk_config.txt"))
    parser.add_argument("--out", default="results")
    parser.add_argument("--frames", type=int, default=100,
                        help="training frames; evaluation uses the same count")
    parser.add_argument("--epochs", type=int, default=600)
    parser.add_argument("--seed", type=int, default=100)
    args = parser.parse_args(argv)

    data_dir = os.path.join(args.out, "data")
    model_dir = os.path.join(args.out, "model")
    bench_dir = os.path.join(args.out, "bench")

    steps = [
        ["gen-data", "--config", args.config, "--frames", str(args.frames),
         "--out", data_dir, "--seed", str(args.seed)],
        ["train", "--dataset", os.path.join(data_dir, "dataset.csv"),
         "--out", model_dir, "--epochs", str(args.epochs),
         "--batch-size", "512", "--learning-rate", "2e-3",
         "--pos-weight", "5.0", "--seed", str(args.seed)],
        ["bench", "--config", args.config, "--model",
         os.path.join(model_dir, "model.txt"), "--frames", str(args.frames),
         "--out", bench_dir, "--seed", str(args.seed)],
    ]
    for step in steps:
        print(f"\n=== mecoffload {' '.join(step)}")
        rc = cli(step)
        if rc != 0:
            return rc
    print(f"\nall outputs under {args.out}/")
    return 0


if __name__ == "__main__":
    sys.exit(run(sys.argv[1:]))
