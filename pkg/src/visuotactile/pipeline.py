"""Generation, training and evaluation runs shared by the CLI and scripts."""
from __future__ import annotations

import csv
import dataclasses
import json
import os
from collections import Counter
from multiprocessing import get_context
from pathlib import Path

import numpy as np

from . import __version__
from .dataset.episodes import format_id, list_episodes, read_episode, write_episode
from .dataset.preprocess import PairSet, build_pairs, model_frames, split
from .mvae.checkpoint import load_checkpoint, read_manifest, save_checkpoint
from .mvae.evaluate import (TABLE_ROWS, evaluate_final_step, flat_tactile, metrics_table, rollout,
                            table_csv, table_text, _score)
from .mvae.model import MvaeModel
from .mvae.train import TrainConfig, input_dims, train
from .scene.physics import incline_outcome
from .scene.scenario import ScenarioConfig, episode_from_config
from .strips import save_strip

BAND = 0.02  # |mu - tan(theta)| below this is too close to call


def write_manifest(path, fields: dict):
    Path(path).write_text("".join(f"{k}={v}\n" for k, v in fields.items()))


def base_manifest(command: str, seed: int, digest: str) -> dict:
    return {"tool": "visuotactile", "version": __version__, "command": command, "seed": seed,
            "config_sha256": digest}


def check_writable(root: Path):
    root.mkdir(parents=True, exist_ok=True)
    probe = root / ".write-probe"
    probe.write_text("")
    probe.unlink()


# generation

def _generate_range(args):
    cfg, root, indices = args
    rows = []
    for i in indices:
        rec = episode_from_config(cfg, int(i))
        write_episode(rec, root, int(i))
        rows.append((int(i), rec.meta["outcome"], rec.meta.get("friction"), rec.meta.get("theta"),
                     int(rec.meta["saturated_frames"]), rec.n_frames))
    return rows


def generate(cfg: ScenarioConfig, root, workers: int = 1, digest: str = "") -> dict:
    """Simulate ``cfg.n_episodes`` episodes into ``root``; each worker owns a contiguous id range."""
    root = Path(root)
    check_writable(root)
    n = cfg.n_episodes
    clash = [format_id(i) for i in range(n) if (root / format_id(i)).exists()]
    if clash:
        raise FileExistsError(f"{root} already holds episode {clash[0]}")
    ranges = [r for r in np.array_split(np.arange(n), max(1, workers)) if len(r)]
    jobs = [(cfg, root, r) for r in ranges]
    if workers > 1 and len(jobs) > 1:
        with get_context("fork").Pool(len(jobs)) as pool:
            parts = pool.map(_generate_range, jobs)
    else:
        parts = [_generate_range(j) for j in jobs]
    rows = sorted(r for part in parts for r in part)
    summary = summarize(cfg, rows)
    write_manifest(root / "summary", summary)
    man = base_manifest("generate", cfg.seed, digest)
    man.update({"scenario": cfg.kind, "episodes": n,
                "config": json.dumps(_plain(dataclasses.asdict(cfg)), sort_keys=True)})
    write_manifest(root / "manifest", man)
    return summary


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def summarize(cfg: ScenarioConfig, rows) -> dict:
    counts = Counter(r[1] for r in rows)
    out = {"scenario": cfg.kind, "episodes": len(rows)}
    for key in ("rest", "fell_off", "unresolved", "stick", "slide"):
        out[key] = counts.get(key, 0)
    out["saturated_frames"] = sum(r[4] for r in rows)
    out["frames"] = sum(r[5] for r in rows)
    if cfg.kind == "incline" and rows:
        clear = [r for r in rows if abs(r[2] - np.tan(r[3])) >= BAND]
        predicted = [incline_outcome(r[2], r[3]) for r in clear]
        out["stick_fraction"] = repr(counts.get("stick", 0) / len(rows))
        if clear:
            out["clear_cases"] = len(clear)
            out["clear_stick_fraction"] = repr(sum(r[1] == "stick" for r in clear) / len(clear))
            out["oracle_stick_fraction"] = repr(sum(p == "stick" for p in predicted) / len(clear))
            out["oracle_agreement"] = repr(sum(p == r[1] for p, r in zip(predicted, clear)) / len(clear))
    return out


# training

def load_frames(root, ids, tc: TrainConfig):
    return [model_frames(read_episode(Path(root) / i), tc.resolution, tc.crop,
                         accel_scale=tc.accel_scale) for i in ids]


def dataset_split(root, tc: TrainConfig):
    ids = list_episodes(root)
    if len(ids) < 2:
        raise ValueError(f"dataset at {root} has fewer than two episodes")
    return split(ids, tc.split_fraction, tc.seed)


def pairs_for(frames, tc: TrainConfig, mode: str | None = None) -> PairSet:
    return build_pairs(frames, mode or tc.mode, tc.k, tc.max_pairs, tc.conditioned)


def _auto_condition(tc: TrainConfig, frames) -> TrainConfig:
    if all(f.condition is not None for f in frames) and not tc.conditioned:
        return dataclasses.replace(tc, conditioned=True)
    return tc


def train_run(data_root, tc: TrainConfig, out, resume=None, digest: str = "", log=None) -> dict:
    """Train one model on ``data_root`` and write checkpoint, loss CSV and manifest to ``out``."""
    out = Path(out)
    check_writable(out)
    train_ids, val_ids = dataset_split(data_root, tc)
    tr_frames = load_frames(data_root, train_ids, tc)
    va_frames = load_frames(data_root, val_ids, tc)
    tc = _auto_condition(tc, tr_frames)
    trp, vap = pairs_for(tr_frames, tc), pairs_for(va_frames, tc)
    start, prev = 0, []
    if resume is not None:
        model, opt, man = load_checkpoint(Path(resume) / "checkpoint")
        start = int(man["epoch"])
        prev = read_curve(Path(resume) / "loss.csv")
    else:
        cond_dim = 3 if tc.conditioned else 0
        model = MvaeModel(tc.model_spec(input_dims(trp), cond_dim), tc.seed)
        opt = None
    result = train(model, trp, tc, vap, opt, start, log)
    curve = prev + result.curve
    write_curve(out / "loss.csv", curve)
    (out / "split").write_text("train=" + ",".join(train_ids) + "\nval=" + ",".join(val_ids) + "\n")
    epoch = start + tc.epochs
    save_checkpoint(out / "checkpoint", model, result.opt, epoch,
                    {"mode": tc.mode, "k": tc.k, "resolution": tc.resolution, "seed": tc.seed})
    man = base_manifest("train", tc.seed, digest)
    man.update({"data": str(data_root), "epochs_total": epoch, "resumed_from": resume or "",
                "train_config": json.dumps(_plain(dataclasses.asdict(tc)), sort_keys=True)})
    write_manifest(out / "manifest", man)
    return {"epochs": epoch, "final": curve[-1], "seconds": result.seconds}


def write_curve(path, curve):
    keys = []
    for row in curve:
        keys += [k for k in row if k not in keys]
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(keys)
        for row in curve:
            w.writerow([repr(row[k]) if isinstance(row.get(k), float) else row.get(k, "") for k in keys])


def read_curve(path) -> list[dict]:
    with open(path, newline="") as f:
        rows = list(csv.DictReader(f))
    out = []
    for r in rows:
        out.append({k: (int(v) if k == "epoch" else float(v)) for k, v in r.items() if v != ""})
    return out


SUITE = [(name, mods, mode) for name, mods in TABLE_ROWS for mode in ("final_step", "fixed_step")]


def suite_slug(mods, mode) -> str:
    return "-".join(mods) + "_" + mode


def train_suite(data_root, tc: TrainConfig, out, digest: str = "", log=None) -> dict:
    """Every model needed for the comparison table: four modality sets times two pairing modes."""
    out = Path(out)
    results = {}
    for name, mods, mode in SUITE:
        cfg = dataclasses.replace(tc, modalities=mods, mode=mode)
        results[suite_slug(mods, mode)] = train_run(data_root, cfg, out / suite_slug(mods, mode),
                                                    digest=digest, log=log)
    return results


# evaluation

def find_runs(paths) -> list[Path]:
    runs = []
    for p in map(Path, paths):
        if (p / "checkpoint" / "manifest").is_file():
            runs.append(p)
        elif p.is_dir():
            runs += sorted(q for q in p.iterdir() if (q / "checkpoint" / "manifest").is_file())
    return runs


def _row_name(mods) -> str | None:
    for name, m in TABLE_ROWS:
        if tuple(m) == tuple(mods):
            return name
    return None


def _val_ids(run: Path):
    for line in (run / "split").read_text().splitlines():
        if line.startswith("val="):
            return [s for s in line[4:].split(",") if s]
    raise ValueError(f"{run}/split lists no validation ids")


def evaluate_runs(data_root, runs, out, tc: TrainConfig, samples: int = 4, contact_tol: float = 0.1,
                  digest: str = "") -> dict:
    """Score every run on its validation split and write the comparison table and strips."""
    runs = [Path(r) for r in runs]
    if not runs:
        raise FileNotFoundError("no checkpoints found")
    out = Path(out)
    check_writable(out)
    results, models, cache = {}, {}, {}
    for run in runs:
        model, _, man = load_checkpoint(run / "checkpoint")
        mode, k = man.get("mode", "final_step"), int(man.get("k", 1))
        val = _val_ids(run)
        res = int(man.get("resolution", tc.resolution))
        key = (tuple(val), res)
        if key not in cache:
            cfg = dataclasses.replace(tc, resolution=res)
            frames = load_frames(data_root, val, cfg)
            cfg = _auto_condition(cfg, frames)
            cache[key] = (frames, pairs_for(frames, cfg, "final_step"))
        frames, pairs = cache[key]
        name = _row_name(model.spec.modalities)
        if name is None:
            continue
        if mode == "final_step":
            scores = evaluate_final_step(model, pairs)
            models[name] = (model, frames, pairs)
            results.setdefault(name, {})["final_step"] = scores
        else:
            flat = flat_tactile(res)
            scores = _score(model, rollout(model, pairs, k, flat, contact_tol), pairs)
            results.setdefault(name, {})["multi_step"] = scores
    rows = metrics_table(results)
    (out / "table.csv").write_text(table_csv(rows))
    (out / "table.txt").write_text(table_text(rows))
    strips = write_strips(models, out / "strips", samples)
    man = base_manifest("eval", tc.seed, digest)
    man.update({"data": str(data_root), "runs": ",".join(str(r) for r in runs), "strips": len(strips)})
    write_manifest(out / "manifest", man)
    return {"results": results, "rows": rows, "strips": strips}


def write_strips(models: dict, folder: Path, samples: int) -> list[Path]:
    """One strip per validation episode (input frame 0) from the richest final-step model."""
    if not models or samples <= 0:
        return []
    name = max(models, key=lambda n: len(dict(TABLE_ROWS)[n]))
    model, frames, pairs = models[name]
    folder.mkdir(parents=True, exist_ok=True)
    firsts = np.flatnonzero(pairs.t == 0)[:samples]
    sub = pairs.subset(firsts)
    mods = model.spec.modalities
    pred = model.predict({m: sub.inputs[m] for m in mods}, sub.condition,
                         available={m: sub.available[m] for m in mods}, allow_prior=True)
    size = int(round(np.sqrt(sub.targets["visual"].shape[1] // 3)))
    paths = []
    for i in range(len(sub)):
        inputs = {m: sub.inputs[m][i] if sub.available[m][i] else None for m in ("visual", "tactile")}
        predicted = {m: pred[m][i] for m in mods}
        truth = {m: sub.targets[m][i] for m in ("visual", "tactile", "pose")}
        paths.append(save_strip(folder / f"strip_{i:03d}.png", size, inputs, predicted, truth))
    return paths
