"""Sweep friction and incline angle and compare outcomes with the Coulomb prediction.

    python scripts/incline_sweep.py --mu 0.05 1.5 20 --theta 0 60 20 --out sweep.csv
"""
import argparse
import csv
import time

import numpy as np

from visuotactile.pipeline import BAND
from visuotactile.scene.physics import incline_outcome
from visuotactile.scene.scenario import ScenarioConfig, outcome, simulate, spawn


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--mu", nargs=3, type=float, default=(0.05, 1.5, 20), metavar=("LO", "HI", "N"))
    ap.add_argument("--theta", nargs=3, type=float, default=(0.0, 60.0, 20), metavar=("LO", "HI", "N"),
                    help="degrees")
    ap.add_argument("--object", default="slab")
    ap.add_argument("--out", help="optional CSV of every cell")
    args = ap.parse_args()

    th = (np.radians(args.theta[0]), np.radians(args.theta[1]), int(args.theta[2]))
    cfg = ScenarioConfig(kind="incline", objects=(args.object,), grid_mu=(*args.mu[:2], int(args.mu[2])),
                         grid_theta=th)
    rows = []
    t0 = time.perf_counter()
    for i, (mu, theta) in enumerate(cfg.grid()):
        scenario, body, sensor = spawn(cfg, i)
        traj = simulate(scenario, body, sensor, cfg.dt, cfg.max_frames, cfg.frame_every,
                        cfg.lin_thresh, cfg.ang_thresh, cfg.rest_window)
        rows.append((mu, theta, outcome(traj, scenario, cfg.stick_tolerance), incline_outcome(mu, theta)))
    clear = [r for r in rows if abs(r[0] - np.tan(r[1])) >= BAND]
    agree = sum(r[2] == r[3] for r in clear)
    print(f"cells={len(rows)} clear={len(clear)} agreement={agree}/{len(clear)} "
          f"time={time.perf_counter() - t0:.1f}s")

    # outcome map, one row per mu, S = stick, . = slide, lower case where the band excludes the cell
    n_theta = int(th[2])
    print("theta(deg): " + " ".join(f"{np.degrees(t):4.0f}" for _, t, _, _ in rows[:n_theta]))
    for r0 in range(0, len(rows), n_theta):
        line = []
        for mu, theta, got, _ in rows[r0:r0 + n_theta]:
            mark = "S" if got == "stick" else "."
            line.append(mark if abs(mu - np.tan(theta)) >= BAND else mark.lower())
        print(f"mu={rows[r0][0]:5.2f}  " + "    ".join(line))
    if args.out:
        with open(args.out, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["mu", "theta", "simulated", "coulomb"])
            w.writerows(rows)


if __name__ == "__main__":
    main()
