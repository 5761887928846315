"""Drop seeded objects onto the flat gel and audit energy and rest detection.

    python scripts/energy_audit.py --episodes 1000
"""
import argparse
from collections import Counter

import numpy as np

from visuotactile.scene.scenario import ScenarioConfig, simulate, spawn


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--episodes", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--objects", default="box,sphere,can")
    args = ap.parse_args()

    cfg = ScenarioConfig(kind="freefall", objects=tuple(args.objects.split(",")), seed=args.seed,
                         episodes=args.episodes)
    worst, rising, rest_frames = -np.inf, 0, []
    status = Counter()
    for i in range(args.episodes):
        scenario, body, sensor = spawn(cfg, i)
        traj = simulate(scenario, body, sensor, cfg.dt, cfg.max_frames, cfg.frame_every,
                        cfg.lin_thresh, cfg.ang_thresh, cfg.rest_window, track_energy=True)
        e = traj.energies
        growth = (e[1:] - e[:-1]) / np.abs(e[:-1])
        worst = max(worst, growth.max())
        rising += bool(np.any(growth > 1e-9))
        status["rest" if traj.rest.resting else "fell_off" if traj.rest.fell_off_sensor else "unresolved"] += 1
        if traj.rest.resting:
            rest_frames.append(traj.rest.frames_to_rest)
    print(f"episodes={args.episodes} {dict(status)}")
    print(f"episodes_with_energy_growth={rising} max_relative_step={worst:.3e}")
    if rest_frames:
        print(f"frames_to_rest median={np.median(rest_frames):.0f} max={max(rest_frames)}")


if __name__ == "__main__":
    main()
