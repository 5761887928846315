"""Plain data carried from the simulator to disk and into training."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

POSE_DIM = 7


@dataclass
class RestState:
    resting: bool
    frames_to_rest: int
    final_pose: np.ndarray
    fell_off_sensor: bool = False
    unresolved: bool = False

    def as_meta(self) -> dict:
        return {
            "resting": int(self.resting),
            "frames_to_rest": self.frames_to_rest,
            "final_pose": ",".join(repr(float(v)) for v in self.final_pose),
            "fell_off_sensor": int(self.fell_off_sensor),
            "unresolved": int(self.unresolved),
        }


@dataclass
class EpisodeRecord:
    """One trajectory, frames stacked along the first axis.

    ``visual`` and ``tactile`` are ``(F, H, W, 3)`` float32 in [0, 1],
    ``pose`` is ``(F, 7)`` (sensor-frame position, w-first quaternion),
    masks are ``(F, H, W)`` bool and ``contact_active`` is ``(F,)`` bool.
    """
    meta: dict
    visual: np.ndarray
    tactile: np.ndarray
    pose: np.ndarray
    contact_mask: np.ndarray
    object_mask: np.ndarray
    contact_active: np.ndarray
    rest: RestState
    condition: np.ndarray | None = None
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        self.visual = np.asarray(self.visual, dtype=np.float32)
        self.tactile = np.asarray(self.tactile, dtype=np.float32)
        self.pose = np.asarray(self.pose, dtype=np.float32)
        self.contact_mask = np.asarray(self.contact_mask, dtype=bool)
        self.object_mask = np.asarray(self.object_mask, dtype=bool)
        self.contact_active = np.asarray(self.contact_active, dtype=bool)
        if self.condition is not None:
            self.condition = np.asarray(self.condition, dtype=np.float32)
        self.validate()

    @property
    def n_frames(self) -> int:
        return len(self.pose)

    @property
    def scenario(self) -> str:
        return str(self.meta.get("scenario", ""))

    def validate(self):
        f = self.n_frames
        if f < 2:
            raise ValueError(f"an episode needs at least 2 frames, got {f}")
        if self.pose.shape != (f, POSE_DIM):
            raise ValueError(f"pose must be ({f}, {POSE_DIM}), got {self.pose.shape}")
        for name in ("visual", "tactile"):
            a = getattr(self, name)
            if a.ndim != 4 or a.shape[0] != f or a.shape[-1] != 3:
                raise ValueError(f"{name} must be (F, H, W, 3), got {a.shape}")
        for name in ("contact_mask", "object_mask"):
            if getattr(self, name).shape != self.visual.shape[:3]:
                raise ValueError(f"{name} must match the image grid")
        if self.contact_active.shape != (f,):
            raise ValueError("contact_active must have one flag per frame")
        perturb = self.scenario == "perturb"
        if perturb != (self.condition is not None):
            raise ValueError("a condition vector is required exactly for perturb episodes")
