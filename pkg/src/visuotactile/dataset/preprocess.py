"""Splitting, resampling and (input, target) pair extraction."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .records import EpisodeRecord

MODALITIES = ("visual", "tactile", "pose")


def split(ids, fraction: float, seed: int) -> tuple[list, list]:
    """Seeded shuffle; the first ``floor(fraction * n)`` ids train, the rest validate."""
    ids = list(ids)
    if not 0.0 < fraction < 1.0:
        raise ValueError("fraction must lie strictly between 0 and 1")
    if len(ids) < 2:
        raise ValueError("need at least two episodes to split")
    order = np.random.default_rng(seed).permutation(len(ids))
    # tolerance so that e.g. 0.29 * 100 still gives 29
    n_train = math.floor(fraction * len(ids) + 1e-9)
    shuffled = [ids[i] for i in order]
    return shuffled[:n_train], shuffled[n_train:]


def downsample(img, target: int) -> np.ndarray:
    """Box-filter ``(H, W[, C])`` down to ``target x target``."""
    a = np.asarray(img)
    h, w = a.shape[:2]
    if target < 1 or h % target or w % target:
        raise ValueError(f"cannot box-downsample {h}x{w} to {target}x{target}")
    fy, fx = h // target, w // target
    blocks = a.reshape(target, fy, target, fx, *a.shape[2:])
    return blocks.mean(axis=(1, 3))


def resize(img, size: int) -> np.ndarray:
    """Area-weighted resampling of ``(H, W[, C])`` to ``size x size``.

    Each output pixel averages the input over its footprint, with partial
    pixels weighted by overlap, so constant images stay constant and
    values stay inside the input range.
    """
    a = np.asarray(img, dtype=np.float64)

    def weights(n_in):
        edges = np.linspace(0.0, n_in, size + 1)
        lo, hi = edges[:-1, None], edges[1:, None]
        left = np.arange(n_in)[None, :]
        overlap = np.clip(np.minimum(hi, left + 1) - np.maximum(lo, left), 0.0, None)
        return overlap / overlap.sum(axis=1, keepdims=True)

    wy, wx = weights(a.shape[0]), weights(a.shape[1])
    return np.einsum("ij,jk...,lk->il...", wy, a, wx)


def mask_bbox(mask, pad: int = 0) -> tuple[int, int, int, int] | None:
    """``(r0, r1, c0, c1)`` half-open box of true pixels grown by ``pad``; None if empty."""
    m = np.asarray(mask, dtype=bool)
    rows = np.flatnonzero(m.any(axis=1))
    if not len(rows):
        return None
    cols = np.flatnonzero(m.any(axis=0))
    h, w = m.shape
    return (max(rows[0] - pad, 0), min(rows[-1] + 1 + pad, h),
            max(cols[0] - pad, 0), min(cols[-1] + 1 + pad, w))


def crop_to_mask(img, mask, pad: int = 2, size: int | None = None) -> np.ndarray:
    """Crop to the padded bounding box of ``mask`` and rescale to ``size``.

    An empty mask returns the frame unchanged.
    """
    a = np.asarray(img)
    if np.shape(mask) != a.shape[:2]:
        raise ValueError("mask must match the image grid")
    box = mask_bbox(mask, pad)
    if box is None:
        return a
    r0, r1, c0, c1 = box
    out = a[r0:r1, c0:c1]
    return out if size is None else resize(out, size)


@dataclass
class TrainingPair:
    """Inputs at frame ``t`` and the all-modality target at frame ``target``."""
    episode: int
    t: int
    target: int
    inputs: dict
    targets: dict
    condition: np.ndarray | None = None

    @property
    def available(self) -> tuple:
        return tuple(m for m in MODALITIES if self.inputs.get(m) is not None)


def pair_indices(n_frames: int, mode: str = "final_step", k: int = 1) -> list[tuple[int, int]]:
    if n_frames < 1:
        raise ValueError("episode has no frames")
    last = n_frames - 1
    if mode == "final_step":
        return [(t, last) for t in range(n_frames)]
    if mode == "fixed_step":
        if k < 1:
            raise ValueError("step k must be >= 1")
        return [(t, min(t + k, last)) for t in range(n_frames)]
    raise ValueError(f"unknown pairing mode {mode!r}")


def make_pairs(rec: EpisodeRecord, mode: str = "final_step", k: int = 1,
               episode: int = 0) -> list[TrainingPair]:
    """Pairs of raw frames; tactile input is withheld while the gel sees no contact."""
    pairs = []
    for t, tgt in pair_indices(rec.n_frames, mode, k):
        inputs = {
            "visual": rec.visual[t],
            "tactile": rec.tactile[t] if rec.contact_active[t] else None,
            "pose": rec.pose[t],
        }
        targets = {"visual": rec.visual[tgt], "tactile": rec.tactile[tgt], "pose": rec.pose[tgt]}
        pairs.append(TrainingPair(episode, t, tgt, inputs, targets, rec.condition))
    return pairs


@dataclass
class ModelFrames:
    """An episode resampled for the model: flattened images and normalized poses."""
    visual: np.ndarray  # (F, S*S*3)
    tactile: np.ndarray
    pose: np.ndarray  # (F, 7), position divided by the sensor half-width
    contact: np.ndarray  # (F,) bool
    condition: np.ndarray | None
    outcome: str = ""
    meta: dict = field(default_factory=dict)

    @property
    def n_frames(self) -> int:
        return len(self.pose)

    def frame(self, m: str) -> np.ndarray:
        return getattr(self, m)


def normalize_condition(c, accel_scale: float) -> np.ndarray:
    c = np.asarray(c, dtype=np.float64)
    return np.array([c[0] / accel_scale, c[1], c[2]])


def model_frames(rec: EpisodeRecord, size: int, crop: bool = False, pad: int = 2,
                 accel_scale: float = 20.0) -> ModelFrames:
    """Resample every frame to ``size x size``.

    With ``crop`` the visual image is cropped to the object mask and the
    tactile image to the contact mask before resampling.
    """
    f, h = rec.n_frames, rec.visual.shape[1]

    def prep(img, mask):
        if crop:
            img = crop_to_mask(img, mask, pad)
            if img.shape[0] == h and img.shape[1] == h and h % size == 0:
                return downsample(img, size)
            return resize(img, size)
        return downsample(img, size) if h % size == 0 else resize(img, size)

    vis = np.stack([prep(rec.visual[i], rec.object_mask[i]) for i in range(f)])
    tac = np.stack([prep(rec.tactile[i], rec.contact_mask[i]) for i in range(f)])
    half = 0.5 * float(rec.meta.get("sensor_size", 0.12))
    pose = rec.pose.astype(np.float64)
    pose[:, :3] /= half
    cond = None if rec.condition is None else normalize_condition(rec.condition, accel_scale)
    return ModelFrames(vis.reshape(f, -1).astype(np.float64), tac.reshape(f, -1).astype(np.float64),
                       pose, rec.contact_active.copy(), cond, str(rec.meta.get("outcome", "")),
                       dict(rec.meta))


def choose_frames(n_frames: int, limit: int | None) -> np.ndarray:
    """Evenly spread frame indices, always keeping the first and last frame."""
    if limit is None or limit >= n_frames:
        return np.arange(n_frames)
    if limit < 2:
        return np.array([0])
    return np.unique(np.round(np.linspace(0, n_frames - 1, limit)).astype(int))


@dataclass
class PairSet:
    """Stacked pairs ready for batching."""
    inputs: dict  # modality -> (N, D)
    available: dict  # modality -> (N,) bool
    targets: dict  # modality -> (N, D)
    condition: np.ndarray | None  # (N, C)
    episode: np.ndarray
    t: np.ndarray
    target: np.ndarray

    def __len__(self):
        return len(self.episode)

    def subset(self, idx) -> "PairSet":
        idx = np.asarray(idx)
        return PairSet({m: v[idx] for m, v in self.inputs.items()},
                       {m: v[idx] for m, v in self.available.items()},
                       {m: v[idx] for m, v in self.targets.items()},
                       None if self.condition is None else self.condition[idx],
                       self.episode[idx], self.t[idx], self.target[idx])


def build_pairs(episodes: list[ModelFrames], mode: str = "final_step", k: int = 1,
                max_pairs: int | None = None, conditioned: bool = False) -> PairSet:
    rows = []
    for e, ep in enumerate(episodes):
        pairs = pair_indices(ep.n_frames, mode, k)
        for i in choose_frames(len(pairs), max_pairs):
            rows.append((e, *pairs[i]))
    rows = np.array(rows, dtype=np.int64).reshape(-1, 3)
    inputs, avail, targets = {}, {}, {}
    for m in MODALITIES:
        inputs[m] = np.stack([episodes[e].frame(m)[t] for e, t, _ in rows]) if len(rows) else None
        targets[m] = np.stack([episodes[e].frame(m)[s] for e, _, s in rows]) if len(rows) else None
        if m == "tactile":
            avail[m] = np.array([episodes[e].contact[t] for e, t, _ in rows], dtype=bool)
        else:
            avail[m] = np.ones(len(rows), dtype=bool)
    cond = None
    if conditioned:
        missing = [e for e in set(rows[:, 0]) if episodes[e].condition is None]
        if missing:
            raise ValueError("conditioned pairs need a condition vector on every episode")
        cond = np.stack([episodes[e].condition for e, _, _ in rows])
    return PairSet(inputs, avail, targets, cond, rows[:, 0], rows[:, 1], rows[:, 2])
