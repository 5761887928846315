"""Full comparison table for one scenario through the command line.

    python scripts/table_run.py --scenario incline --config my.ini --out runs/table
"""
import argparse
import sys
from pathlib import Path

from visuotactile.cli import main as cli


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scenario", choices=("freefall", "incline", "perturb"), default="freefall")
    ap.add_argument("--config", help="INI configuration passed to every step")
    ap.add_argument("--out", default="runs/table")
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()

    out = Path(args.out) / args.scenario
    common = ["--config", args.config] if args.config else []
    steps = [
        ["generate", "--scenario", args.scenario, "--workers", str(args.workers), "--out", str(out / "data")],
        ["train", "--suite", "--data", str(out / "data"), "--out", str(out / "runs")],
        ["eval", "--data", str(out / "data"), "--runs", str(out / "runs"), "--out", str(out / "eval")],
    ]
    for argv in steps:
        if (out / "data").is_dir() and argv[0] == "generate":
            continue
        code = cli(argv + common)
        if code:
            sys.exit(code)


if __name__ == "__main__":
    main()
