"""Side-by-side PNG strips with a pose-axes overlay.

Panel order: input visual, input tactile, predicted visual, predicted
tactile, ground-truth visual, ground-truth tactile.  On the visual panels
the ground-truth pose is drawn with solid axes and the prediction with
dashed axes (x red, y green, z blue, projected onto the gel plane).
"""
from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from .scene.bodies import quat_to_matrix

AXIS_COLORS = ((255, 60, 60), (60, 255, 60), (80, 120, 255))
GAP = 4


def _to_image(flat, size: int, scale: int) -> Image.Image:
    if flat is None:
        a = np.full((size, size, 3), 0.5)
    else:
        a = np.asarray(flat, dtype=np.float64).reshape(size, size, 3)
    data = np.clip(np.rint(a * 255.0), 0, 255).astype(np.uint8)
    return Image.fromarray(data).resize((size * scale, size * scale), Image.NEAREST)


def _dashed(draw, p0, p1, color, dash=4):
    p0, p1 = np.asarray(p0, dtype=float), np.asarray(p1, dtype=float)
    length = float(np.linalg.norm(p1 - p0))
    if length == 0:
        return
    n = max(int(length // dash), 1)
    for i in range(0, n, 2):
        a = p0 + (p1 - p0) * i / n
        b = p0 + (p1 - p0) * min(i + 1, n) / n
        draw.line([tuple(a), tuple(b)], fill=color, width=2)


def draw_pose(img: Image.Image, pose, dashed: bool = False, axis_len: float = 0.25):
    """Overlay pose axes; ``pose`` has position normalized to [-1, 1] over the gel."""
    pose = np.asarray(pose, dtype=np.float64)
    if not np.all(np.isfinite(pose)):
        return img
    w, h = img.size
    q = pose[3:7]
    norm = np.linalg.norm(q)
    if norm == 0:
        return img
    rot = quat_to_matrix(q / norm)
    center = np.array([(pose[0] + 1) * 0.5 * w, (pose[1] + 1) * 0.5 * h])
    draw = ImageDraw.Draw(img)
    for axis, color in zip(rot.T, AXIS_COLORS):
        tip = center + axis[:2] * axis_len * np.array([w, h]) * 0.5
        if dashed:
            _dashed(draw, center, tip, color)
        else:
            draw.line([tuple(center), tuple(tip)], fill=color, width=2)
    return img


def make_strip(size: int, inputs: dict, predicted: dict, truth: dict, scale: int = 8) -> Image.Image:
    """Assemble one strip; missing images (e.g. unavailable tactile) show as grey."""
    panels = [
        _to_image(inputs.get("visual"), size, scale),
        _to_image(inputs.get("tactile"), size, scale),
        _to_image(predicted.get("visual"), size, scale),
        _to_image(predicted.get("tactile"), size, scale),
        _to_image(truth.get("visual"), size, scale),
        _to_image(truth.get("tactile"), size, scale),
    ]
    for idx in (2, 4):
        if truth.get("pose") is not None:
            draw_pose(panels[idx], truth["pose"])
        if predicted.get("pose") is not None:
            draw_pose(panels[idx], predicted["pose"], dashed=True)
    side = size * scale
    strip = Image.new("RGB", (len(panels) * side + (len(panels) - 1) * GAP, side), (255, 255, 255))
    for i, p in enumerate(panels):
        strip.paste(p, (i * (side + GAP), 0))
    return strip


def save_strip(path, *args, **kw) -> Path:
    path = Path(path)
    make_strip(*args, **kw).save(path, format="PNG")
    return path
