"""Command-line entry point.

Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.
When ``--out`` is omitted, outputs go under ``$VISUOTACTILE_OUT`` (default
``./runs``) in a sub-directory named after the command.
"""
from __future__ import annotations

import argparse
import dataclasses
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunSettings, load_config, parse_config

ENV_OUT = "VISUOTACTILE_OUT"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _common(p):
    p.add_argument("--config", help="INI run configuration")
    p.add_argument("--seed", type=int, help="override every seed in the configuration")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="visuotactile", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("generate", help="simulate episodes into a dataset directory")
    _common(p)
    p.add_argument("--episodes", type=int, help="override the episode count")
    p.add_argument("--scenario", choices=("freefall", "incline", "perturb"))

    p = sub.add_parser("train", help="train a model on a dataset")
    _common(p)
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--epochs", type=int)
    p.add_argument("--modalities", help="comma separated subset of visual,tactile,pose")
    p.add_argument("--mode", choices=("final_step", "fixed_step"))
    p.add_argument("--resume", help="run directory to continue from")
    p.add_argument("--suite", action="store_true",
                   help="train all four model variants in both pairing modes")

    p = sub.add_parser("eval", help="score trained runs and write the comparison table")
    _common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--runs", nargs="+", required=True,
                   help="run directories or a directory of runs")
    p.add_argument("--samples", type=int, help="number of prediction strips")

    p = sub.add_parser("inspect", help="summarize a dataset, episode or checkpoint")
    _common(p)
    p.add_argument("path")

    p = sub.add_parser("render-demo", help="render a sphere pressed into the gel")
    _common(p)
    p.add_argument("--load", type=float, default=0.98, help="normal load in newtons")

    p = sub.add_parser("gradcheck", help="finite-difference check of the model gradients")
    _common(p)
    p.add_argument("--params", type=int, default=200)
    p.add_argument("--tol", type=float, default=1e-4)
    return parser


def _settings(args) -> RunSettings:
    s = load_config(args.config) if args.config else parse_config("")
    if args.seed is not None:
        s.scenario = dataclasses.replace(s.scenario, seed=args.seed)
        s.train = dataclasses.replace(s.train, seed=args.seed)
        s.text += f"\n# seed override {args.seed}\n"
    if args.workers < 1:
        raise UsageError("--workers must be >= 1")
    return s


def _out(args) -> Path:
    if args.out:
        return Path(args.out)
    return Path(os.environ.get(ENV_OUT, "runs")) / args.command


def cmd_generate(args, s: RunSettings) -> int:
    from .pipeline import generate
    cfg = s.scenario
    if args.scenario:
        cfg = dataclasses.replace(cfg, kind=args.scenario)
    if args.episodes is not None:
        if args.episodes < 0:
            raise UsageError("--episodes must be >= 0")
        cfg = dataclasses.replace(cfg, episodes=args.episodes, grid_mu=None, grid_theta=None)
    summary = generate(cfg, _out(args), args.workers, s.digest)
    for k, v in summary.items():
        print(f"{k}={v}")
    return 0


def cmd_train(args, s: RunSettings) -> int:
    from .pipeline import train_run, train_suite
    tc = s.train
    if args.epochs is not None:
        tc = dataclasses.replace(tc, epochs=args.epochs)
    if args.modalities:
        mods = tuple(m.strip() for m in args.modalities.split(","))
        tc = dataclasses.replace(tc, modalities=mods)
    if args.mode:
        tc = dataclasses.replace(tc, mode=args.mode)
    if not Path(args.data).is_dir():
        raise UsageError(f"dataset {args.data} does not exist")

    def log(row):
        print(" ".join(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}" for k, v in row.items()),
              flush=True)

    if args.suite:
        if args.resume:
            raise UsageError("--resume cannot be combined with --suite")
        train_suite(args.data, tc, _out(args), s.digest, log)
    else:
        train_run(args.data, tc, _out(args), args.resume, s.digest, log)
    return 0


def cmd_eval(args, s: RunSettings) -> int:
    from .pipeline import evaluate_runs, find_runs
    runs = find_runs(args.runs)
    if not runs:
        print(f"no checkpoint found under {' '.join(args.runs)}", file=sys.stderr)
        return 2
    samples = args.samples if args.samples is not None else int(s.eval["strips"])
    res = evaluate_runs(args.data, runs, _out(args), s.train, samples,
                        float(s.eval["contact_tol"]), s.digest)
    print((_out(args) / "table.txt").read_text(), end="")
    print(f"strips={len(res['strips'])}")
    return 0


def cmd_inspect(args, s: RunSettings) -> int:
    from .dataset.episodes import list_episodes, read_episode
    from .mvae.checkpoint import read_manifest
    p = Path(args.path)
    if (p / "checkpoint" / "manifest").is_file():
        p = p / "checkpoint"
    if (p / "params.tns").is_file():
        for k, v in read_manifest(p).items():
            print(f"{k}={v}")
    elif (p / "frames.tns").is_file():
        rec = read_episode(p)
        print(f"frames={rec.n_frames}")
        print(f"contact_frames={int(rec.contact_active.sum())}")
        for k, v in sorted(rec.meta.items()):
            print(f"{k}={v}")
        for k, v in rec.rest.as_meta().items():
            print(f"rest.{k}={v}")
    elif p.is_dir():
        ids = list_episodes(p)
        print(f"episodes={len(ids)}")
        if (p / "summary").is_file():
            print((p / "summary").read_text(), end="")
    else:
        raise UsageError(f"nothing to inspect at {p}")
    return 0


def cmd_render_demo(args, s: RunSettings) -> int:
    from PIL import Image
    from .render import to_uint8
    from .scene.bodies import RigidBody, Shape
    from .scene.sensor import render_tactile_frame, render_visual
    sensor = s.scenario.sensor
    body = RigidBody(Shape.sphere(0.015), 0.1, position=[0.0, 0.0, 0.0145], color=(0.2, 0.4, 0.9))
    out = _out(args)
    out.mkdir(parents=True, exist_ok=True)
    frame = render_tactile_frame(body, args.load, sensor)
    visual, _ = render_visual(body, sensor)
    Image.fromarray(to_uint8(frame.image)).save(out / "tactile.png")
    Image.fromarray(to_uint8(visual)).save(out / "visual.png")
    print(f"max_depth_mm={frame.depth.max() * 1e3:.4f}")
    print(f"contact_pixels={int(frame.contact.sum())}")
    print(f"saturated={int(frame.saturated)}")
    return 0


def cmd_gradcheck(args, s: RunSettings) -> int:
    from .mvae.gradcheck import gradient_check
    from .mvae.model import Batch, ModelSpec, MvaeModel
    seed = s.train.seed
    rng = np.random.default_rng(seed)
    spec = ModelSpec(("visual", "tactile", "pose"), {"visual": 12, "tactile": 12, "pose": 7},
                     latent_dim=4, hidden=(16,), cond_dim=3)
    model = MvaeModel(spec, seed)
    n = 4
    batch = Batch(
        {"visual": rng.random((n, 12)), "tactile": rng.random((n, 12)),
         "pose": rng.normal(0, 0.3, (n, 7))},
        {"visual": np.ones(n, bool), "tactile": np.arange(n) % 2 == 0, "pose": np.ones(n, bool)},
        {"visual": rng.random((n, 12)), "tactile": rng.random((n, 12)),
         "pose": rng.normal(0, 0.3, (n, 7))},
        rng.normal(size=(n, 3)))
    r = gradient_check(model, batch, beta=0.5, n_params=args.params, seed=seed)
    print(f"n_params={r['n_params']} checked={r['checked']} max_rel_error={r['max_rel_error']:.3e}")
    return 0 if r["max_rel_error"] < args.tol else 2


COMMANDS = {
    "generate": cmd_generate, "train": cmd_train, "eval": cmd_eval, "inspect": cmd_inspect,
    "render-demo": cmd_render_demo, "gradcheck": cmd_gradcheck,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        settings = _settings(args)
        return COMMANDS[args.command](args, settings)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - reported as a runtime failure
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
