"""Checkpoints: float64 tns payload plus a key=value manifest."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..dataset import tns
from .model import ModelSpec, MvaeModel
from .optim import AdamState


def save_checkpoint(path, model: MvaeModel, opt: AdamState | None, epoch: int, extra: dict | None = None):
    """Write ``params.tns`` (parameters, then Adam moments) and ``manifest``."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    keys = list(model.params)
    arrays = [model.params[k] for k in keys]
    has_opt = opt is not None and opt.t > 0
    if has_opt:
        arrays += [opt.m[k] for k in keys] + [opt.v[k] for k in keys]
    tns.save(path / "params.tns", [np.asarray(a, dtype=np.float64) for a in arrays])
    spec = model.spec
    lines = {
        "epoch": epoch,
        "modalities": ",".join(spec.modalities),
        "dims": json.dumps(spec.dims, sort_keys=True),
        "latent_dim": spec.latent_dim,
        "hidden": ",".join(str(h) for h in spec.hidden),
        "cond_dim": spec.cond_dim,
        "lambdas": json.dumps(spec.lambdas, sort_keys=True),
        "recon": spec.recon,
        "param_keys": ",".join(keys),
        "adam_t": opt.t if has_opt else 0,
        "clamp_events": model.clamp_events,
    }
    lines.update(extra or {})
    (path / "manifest").write_text("".join(f"{k}={v}\n" for k, v in lines.items()))


def read_manifest(path) -> dict:
    out = {}
    for line in (Path(path) / "manifest").read_text().splitlines():
        if line.strip():
            k, _, v = line.partition("=")
            out[k] = v
    return out


def load_checkpoint(path) -> tuple[MvaeModel, AdamState, dict]:
    path = Path(path)
    if not (path / "manifest").is_file() or not (path / "params.tns").is_file():
        raise FileNotFoundError(f"no checkpoint at {path}")
    man = read_manifest(path)
    spec = ModelSpec(
        tuple(man["modalities"].split(",")),
        json.loads(man["dims"]),
        int(man["latent_dim"]),
        tuple(int(h) for h in man["hidden"].split(",")),
        int(man["cond_dim"]),
        json.loads(man["lambdas"]),
        man["recon"],
    )
    model = MvaeModel(spec, 0)
    keys = man["param_keys"].split(",")
    arrays = tns.load(path / "params.tns")
    k = len(keys)
    for key, a in zip(keys, arrays[:k]):
        if a.shape != model.params[key].shape:
            raise ValueError(f"checkpoint shape mismatch for {key}")
        model.params[key] = a
    opt = AdamState()
    opt.t = int(man.get("adam_t", 0))
    if opt.t:
        opt.m = dict(zip(keys, arrays[k:2 * k]))
        opt.v = dict(zip(keys, arrays[2 * k:3 * k]))
    model.clamp_events = int(man.get("clamp_events", 0))
    return model, opt, man
