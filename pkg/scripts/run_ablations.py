#!/usr/bin/env python3
"""Sweep every ablation mode on one synthetic corpus and tabulate mR.

Covers the text-enhancement input variants (ff / bb / fb / avg), the
three component knock-outs (no_dtga / no_ifa / no_iga), and both head
shapes for fusion and guidance.  Each mode trains from scratch under
its own config hash, so runs are directly comparable and reproducible.
"""
from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from dove.batching import split_dataset
from dove.config import TrainConfig, config_hash
from dove.dataio import load_dataset
from dove.evaluation import build_report
from dove.synth import synth_dataset, write_dataset
from dove.train import load_checkpoint, model_from_checkpoint, train

MODES = [
    ("baseline (fb)", {}),
    ("inputs ff", {"dtga_inputs": "ff"}),
    ("inputs bb", {"dtga_inputs": "bb"}),
    ("inputs avg", {"dtga_inputs": "avg"}),
    ("no enhancement", {"no_dtga": True}),
    ("no fusion", {"no_ifa": True}),
    ("no guidance", {"no_iga": True}),
    ("fusion head nonlinear", {"ifa_head": "nonlinear"}),
    ("guidance head linear", {"iga_head": "linear"}),
]


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="runs/ablations")
    ap.add_argument("--data-seed", type=int, default=1)
    ap.add_argument("--train-seed", type=int, default=3)
    ap.add_argument("--images", type=int, default=32)
    ap.add_argument("--clusters", type=int, default=4)
    ap.add_argument("--epochs", type=int, default=40)
    args = ap.parse_args()

    data_dir = os.path.join(args.out, "data")
    os.makedirs(data_dir, exist_ok=True)
    write_dataset(synth_dataset(seed=args.data_seed, n_images=args.images,
                                n_clusters=args.clusters, d_in=64, d_r=32),
                  data_dir)
    ds = load_dataset(data_dir)

    base = TrainConfig(d=64, heads=2, batch_size=8, epochs=args.epochs,
                       seed=args.train_seed, lr0=0.002, decay_factor=0.7,
                       decay_every=20, val_fraction=0.0)
    rows = []
    for label, overrides in MODES:
        cfg = replace(base, **overrides)
        run_dir = os.path.join(args.out, label.replace(" ", "_"))
        result = train(cfg, ds, run_dir)
        model = model_from_checkpoint(load_checkpoint(result.checkpoint_path),
                                      ds)
        split = split_dataset(ds, cfg.val_fraction, cfg.seed)
        report = build_report(model, ds, split.train_images, "train",
                              with_distances=False)
        rows.append((label, config_hash(cfg)[:12], report.full))
        print(f"done: {label} ({config_hash(cfg)[:12]})")

    print(f"\n{'mode':<24} {'config':<12} {'R@1 i2t':>8} {'R@1 t2i':>8} "
          f"{'mR':>8}")
    for label, digest, full in rows:
        print(f"{label:<24} {digest:<12} {full['r1_i2t']:>8.2f} "
              f"{full['r1_t2i']:>8.2f} {full['mr']:>8.2f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
