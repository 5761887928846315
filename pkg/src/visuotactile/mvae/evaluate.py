"""Validation metrics: final-step prediction, recursive rollout, the 4x4 table."""
from __future__ import annotations

import csv
import io
import math

import numpy as np

from ..dataset.preprocess import PairSet
from ..render import PhongParams, flat_image
from .losses import bce_logits
from .model import IMAGE_MODALITIES, MvaeModel

TABLE_ROWS = (
    ("VAE visual only", ("visual",)),
    ("VAE tactile only", ("tactile",)),
    ("MVAE visual+tactile", ("visual", "tactile")),
    ("MVAE visual+tactile+pose", ("visual", "tactile", "pose")),
)
TABLE_COLUMNS = (
    ("multi_step", "visual"), ("multi_step", "tactile"),
    ("final_step", "visual"), ("final_step", "tactile"),
)
NA = "NA"


def flat_tactile(size: int, phong: PhongParams | None = None) -> np.ndarray:
    """Flattened tactile image of an untouched gel at model resolution."""
    return flat_image((size, size), phong or PhongParams()).reshape(-1)


def predicted_contact(tactile: np.ndarray, flat: np.ndarray, tol: float = 0.1) -> np.ndarray:
    """Rows whose predicted tactile image departs from the flat gel somewhere."""
    dev = np.abs(tactile - flat).reshape(len(tactile), -1, 3).sum(axis=-1)
    return dev.max(axis=1) > tol


def _score(model: MvaeModel, logits: dict, pairs: PairSet) -> dict:
    out = {}
    for m in IMAGE_MODALITIES:
        if m in model.spec.modalities:
            out[m] = bce_logits(logits[m], pairs.targets[m])
    if "pose" in model.spec.modalities and "pose" in logits:
        out["pose_mse"] = float(np.mean((logits["pose"] - pairs.targets["pose"]) ** 2))
    return out


def evaluate_final_step(model: MvaeModel, pairs: PairSet) -> dict:
    """BCE of the predicted target frame from each pair's input frame.

    Inputs a model lacks are ignored; tactile is withheld where the gel saw
    no contact, and a pair with nothing observed is decoded from the prior.
    """
    mods = model.spec.modalities
    pred = model.predict({m: pairs.inputs[m] for m in mods}, pairs.condition,
                         available={m: pairs.available[m] for m in mods}, allow_prior=True)
    logits = {m: pred.get(m + "_logits", pred[m]) for m in mods}
    return _score(model, logits, pairs)


def rollout(model: MvaeModel, pairs: PairSet, k: int = 1, flat: np.ndarray | None = None,
            contact_tol: float = 0.1, max_steps: int | None = None) -> dict:
    """Apply a fixed-step model recursively from frame ``t`` up to the pair's target frame.

    Each pair takes ``max(1, ceil((target - t) / k))`` steps.  Predictions are
    fed back as the next inputs; predicted tactile is fed back only when it
    shows contact.  Returns the final logits (pose values) per modality.
    """
    mods = model.spec.modalities
    n = len(pairs)
    steps = np.maximum(1, np.ceil((pairs.target - pairs.t) / k).astype(int))
    if max_steps is not None:
        steps = np.minimum(steps, max_steps)
    state = {m: pairs.inputs[m].copy() for m in mods}
    avail = {m: pairs.available[m].copy() for m in mods}
    final = {m: np.zeros_like(pairs.targets[m]) for m in mods}
    if "tactile" in mods and flat is None:
        flat = flat_tactile(int(math.isqrt(pairs.targets["tactile"].shape[1] // 3)))
    for s in range(int(steps.max()) if n else 0):
        live = np.flatnonzero(steps > s)
        pred = model.predict({m: state[m][live] for m in mods},
                             None if pairs.condition is None else pairs.condition[live],
                             available={m: avail[m][live] for m in mods}, allow_prior=True)
        done = steps[live] == s + 1
        for m in mods:
            value = pred.get(m + "_logits", pred[m])
            final[m][live[done]] = value[done]
            state[m][live] = pred[m]
        if "tactile" in mods:
            avail["tactile"][live] = predicted_contact(pred["tactile"], flat, contact_tol)
        for m in mods:
            if m != "tactile":
                avail[m][live] = True
    return final


def evaluate(model: MvaeModel, pairs: PairSet, protocol: str = "final_step", k: int = 1,
             **kw) -> dict:
    if protocol == "final_step":
        return evaluate_final_step(model, pairs)
    if protocol == "rollout":
        return _score(model, rollout(model, pairs, k, **kw), pairs)
    raise ValueError(f"unknown protocol {protocol!r}")


def metrics_table(results: dict) -> list[list]:
    """Rows of the comparison table.

    ``results[row_name][protocol][modality]`` holds BCE values; any entry a
    model cannot produce is reported as NA.
    """
    rows = []
    for name, mods in TABLE_ROWS:
        row = [name]
        for protocol, m in TABLE_COLUMNS:
            v = results.get(name, {}).get(protocol, {}).get(m)
            row.append(NA if v is None or m not in mods else float(v))
        rows.append(row)
    return rows


def header() -> list[str]:
    return ["model"] + [f"{p}_{m}" for p, m in TABLE_COLUMNS]


def table_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header())
    for r in rows:
        w.writerow([r[0]] + [v if v == NA else f"{v:.6f}" for v in r[1:]])
    return buf.getvalue()


def table_text(rows, scale: float = 1e4) -> str:
    """Aligned table with BCE values multiplied by ``scale``."""
    cells = [header()] + [[r[0]] + [v if v == NA else f"{v * scale:.1f}" for v in r[1:]] for r in rows]
    widths = [max(len(str(c[i])) for c in cells) for i in range(len(cells[0]))]
    lines = ["  ".join(str(c).ljust(w) if i == 0 else str(c).rjust(w)
                       for i, (c, w) in enumerate(zip(row, widths))) for row in cells]
    return "\n".join(lines) + "\n"
