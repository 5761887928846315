"""Episode directories: ``meta`` text, PNG previews and a ``frames.tns`` payload.

Layout of ``root/<id>/``::

    meta                    flat key=value lines
    frame_<k>_visual.png    8-bit previews for humans
    frame_<k>_tactile.png
    frames.tns              visual, tactile, pose, contact_mask, object_mask,
                            contact_active[, condition]

The tensors in ``frames.tns`` are the source of truth; PNGs are lossy.
"""
from __future__ import annotations

import os
from pathlib import Path

import numpy as np
from PIL import Image

from . import tns
from .records import EpisodeRecord, RestState

ID_WIDTH = 6
TENSORS = ("visual", "tactile", "pose", "contact_mask", "object_mask", "contact_active")


def format_id(index: int) -> str:
    if index < 0:
        raise ValueError("episode ids are non-negative")
    return f"{index:0{ID_WIDTH}d}"


def list_episodes(root) -> list[str]:
    root = Path(root)
    if not root.is_dir():
        return []
    return sorted(p.name for p in root.iterdir() if p.is_dir() and p.name.isdigit())


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    s = str(v)
    if "\n" in s or "=" in s:
        raise ValueError(f"meta value {s!r} cannot be stored on one line")
    return s


def _parse(s: str):
    for cast in (int, float):
        try:
            return cast(s)
        except ValueError:
            pass
    return s


def encode_meta(rec: EpisodeRecord) -> str:
    lines = []
    for key in sorted(rec.meta):
        if key.startswith("rest.") or key == "condition" or "=" in key:
            raise ValueError(f"reserved or invalid meta key {key!r}")
        lines.append(f"{key}={_fmt(rec.meta[key])}")
    if rec.condition is not None:
        lines.append("condition=" + ",".join(repr(float(v)) for v in rec.condition))
    for key, value in rec.rest.as_meta().items():
        lines.append(f"rest.{key}={value}")
    lines.append(f"frames={rec.n_frames}")
    return "\n".join(lines) + "\n"


def decode_meta(text: str) -> tuple[dict, dict]:
    """Split a ``meta`` file into (episode meta, rest summary fields)."""
    meta, rest = {}, {}
    for line in text.splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"malformed meta line {line!r}")
        key = key.strip()
        if key.startswith("rest."):
            rest[key[5:]] = value
        elif key not in ("condition", "frames"):
            meta[key] = _parse(value)
    return meta, rest


def _png(path: Path, img: np.ndarray):
    data = np.clip(np.rint(np.asarray(img, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(data).save(path, format="PNG")


def write_episode(rec: EpisodeRecord, root, episode_id: int | None = None) -> str:
    """Write ``rec`` under ``root`` and return its id.

    Without an explicit id the next free sequence number is used.  An
    existing episode directory is never overwritten.
    """
    rec.validate()
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    if episode_id is None:
        taken = list_episodes(root)
        episode_id = int(taken[-1]) + 1 if taken else 0
    eid = format_id(episode_id)
    target = root / eid
    try:
        target.mkdir()
    except FileExistsError:
        raise FileExistsError(f"episode {eid} already exists under {root}") from None
    (target / "meta").write_text(encode_meta(rec))
    for k in range(rec.n_frames):
        _png(target / f"frame_{k}_visual.png", rec.visual[k])
        _png(target / f"frame_{k}_tactile.png", rec.tactile[k])
    arrays = [getattr(rec, name) for name in TENSORS]
    if rec.condition is not None:
        arrays.append(rec.condition)
    tmp = target / "frames.tns.partial"
    tns.save(tmp, arrays)
    os.replace(tmp, target / "frames.tns")
    return eid


def read_episode(path) -> EpisodeRecord:
    path = Path(path)
    meta, rest = decode_meta((path / "meta").read_text())
    arrays = tns.load(path / "frames.tns")
    if len(arrays) not in (len(TENSORS), len(TENSORS) + 1):
        raise ValueError(f"{path / 'frames.tns'} holds {len(arrays)} tensors")
    fields = dict(zip(TENSORS, arrays))
    condition = arrays[len(TENSORS)] if len(arrays) > len(TENSORS) else None
    state = RestState(
        resting=bool(int(rest["resting"])),
        frames_to_rest=int(rest["frames_to_rest"]),
        final_pose=np.array([float(v) for v in rest["final_pose"].split(",")]),
        fell_off_sensor=bool(int(rest["fell_off_sensor"])),
        unresolved=bool(int(rest["unresolved"])),
    )
    return EpisodeRecord(meta=meta, rest=state, condition=condition, **fields)


def read_dataset(root, ids=None) -> list[EpisodeRecord]:
    root = Path(root)
    ids = list_episodes(root) if ids is None else ids
    return [read_episode(root / i) for i in ids]
