"""Two-shape toy run: generate, train the full model, report the learning signal.

    python scripts/toy_experiment.py --out runs/toy --epochs 50
"""
import argparse
from pathlib import Path

import numpy as np

from visuotactile.dataset.episodes import list_episodes
from visuotactile.dataset.preprocess import build_pairs
from visuotactile.mvae.checkpoint import load_checkpoint
from visuotactile.mvae.losses import bce_logits, binary_entropy
from visuotactile.mvae.train import TrainConfig
from visuotactile.pipeline import dataset_split, generate, load_frames, read_curve, train_run
from visuotactile.scene.scenario import ScenarioConfig
from visuotactile.scene.sensor import SensorGeometry


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs/toy")
    ap.add_argument("--episodes", type=int, default=200)
    ap.add_argument("--epochs", type=int, default=50)
    ap.add_argument("--hidden", default="128,64")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    out = Path(args.out)
    data = out / "data"
    if not list_episodes(data):
        cfg = ScenarioConfig(kind="freefall", objects=("box", "can"), episodes=args.episodes,
                             seed=args.seed, sensor=SensorGeometry(resolution=32))
        print(generate(cfg, data, args.workers))
    tc = TrainConfig(epochs=args.epochs, hidden=tuple(int(h) for h in args.hidden.split(",")),
                     resolution=16, seed=args.seed)
    run = out / "model"
    train_run(data, tc, run, log=lambda r: print(" ".join(f"{k}={v:.5g}" for k, v in r.items())))

    curve = read_curve(run / "loss.csv")
    first, last = curve[0]["val_bce_visual"], curve[-1]["val_bce_visual"]
    model, _, _ = load_checkpoint(run / "checkpoint")
    tr_ids, va_ids = dataset_split(data, tc)
    tr = build_pairs(load_frames(data, tr_ids, tc), max_pairs=tc.max_pairs)
    va = build_pairs(load_frames(data, va_ids, tc), max_pairs=tc.max_pairs)
    cross = bce_logits(model.predict({"visual": va.inputs["visual"]})["tactile_logits"], va.targets["tactile"])
    mean = np.clip(tr.targets["tactile"].mean(axis=0), 1e-6, 1 - 1e-6)
    base = bce_logits(np.broadcast_to(np.log(mean / (1 - mean)), va.targets["tactile"].shape),
                      va.targets["tactile"])
    print(f"val visual BCE: epoch 1 {first:.4f}, epoch {len(curve)} {last:.4f}, ratio {last / first:.3f}")
    print(f"visual -> tactile BCE {cross:.4f}, mean-image baseline {base:.4f}")
    print(f"entropy floor: visual {binary_entropy(va.targets['visual']):.4f}, "
          f"tactile {binary_entropy(va.targets['tactile']):.4f}")


if __name__ == "__main__":
    main()
