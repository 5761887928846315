"""Gel-surface height maps: depth clipping, gradients and surface normals.

Heights are indentation depths in meters (0 = undeformed gel, positive =
pressed in).  Array layout is ``values[row, col]`` with ``x`` running along
columns and ``y`` along rows, both scaled by ``pitch``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_GEL_THICKNESS = 0.005


@dataclass(frozen=True)
class HeightMap:
    values: np.ndarray
    pitch: float
    gel_thickness: float = DEFAULT_GEL_THICKNESS

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", v)
        if v.ndim != 2 or v.shape[0] < 3 or v.shape[1] < 3:
            raise ValueError(f"height map must be at least 3x3, got shape {v.shape}")
        if not self.pitch > 0:
            raise ValueError("pitch must be positive")
        if not self.gel_thickness > 0:
            raise ValueError("gel_thickness must be positive")
        if v.min() < 0 or v.max() > self.gel_thickness:
            raise ValueError("height values must lie in [0, gel_thickness]")

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class NormalField:
    normals: np.ndarray  # (H, W, 3), unit length, z >= 0
    method: str
    degenerate: int = 0

    @property
    def shape(self) -> tuple[int, int]:
        return self.normals.shape[:2]


@dataclass
class _Tally:
    degenerate: int = 0
    ties: int = 0


def clip_depth(raw_depth, gel_thickness: float = DEFAULT_GEL_THICKNESS,
               pitch: float = 1e-3) -> HeightMap:
    """Clamp a raw depth buffer into ``[0, gel_thickness]``.

    Raises ``ValueError`` naming the first non-finite pixel (row, col).
    """
    raw = np.asarray(raw_depth, dtype=np.float64)
    if not gel_thickness > 0:
        raise ValueError("gel_thickness must be positive")
    bad = ~np.isfinite(raw)
    if bad.any():
        r, c = np.argwhere(bad)[0]
        raise ValueError(f"non-finite depth at pixel (row={r}, col={c})")
    return HeightMap(np.clip(raw, 0.0, gel_thickness), pitch, gel_thickness)


def gradient(h: HeightMap) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(df/dx, df/dy)``: central differences inside, one-sided at borders."""
    dfdy, dfdx = np.gradient(h.values, h.pitch)
    return dfdx, dfdy


def normals_from_gradient(h: HeightMap) -> NormalField:
    dfdx, dfdy = gradient(h)
    n = np.stack([-dfdx, -dfdy, np.ones_like(dfdx)], axis=-1)
    n /= np.linalg.norm(n, axis=-1, keepdims=True)
    return NormalField(n, "gradient")


def _sym3_eigenvalues(cov):
    """Closed-form (trigonometric) eigenvalues of symmetric 3x3 matrices, ascending."""
    a00, a11, a22 = cov[..., 0, 0], cov[..., 1, 1], cov[..., 2, 2]
    a01, a02, a12 = cov[..., 0, 1], cov[..., 0, 2], cov[..., 1, 2]
    q = (a00 + a11 + a22) / 3.0
    p1 = a01 ** 2 + a02 ** 2 + a12 ** 2
    p2 = (a00 - q) ** 2 + (a11 - q) ** 2 + (a22 - q) ** 2 + 2.0 * p1
    p = np.sqrt(p2 / 6.0)
    safe_p = np.where(p > 0, p, 1.0)
    b00, b11, b22 = (a00 - q) / safe_p, (a11 - q) / safe_p, (a22 - q) / safe_p
    b01, b02, b12 = a01 / safe_p, a02 / safe_p, a12 / safe_p
    det_b = (b00 * (b11 * b22 - b12 * b12)
             - b01 * (b01 * b22 - b12 * b02)
             + b02 * (b01 * b12 - b11 * b02))
    r = np.clip(det_b / 2.0, -1.0, 1.0)
    phi = np.arccos(r) / 3.0
    hi = q + 2.0 * p * np.cos(phi)
    lo = q + 2.0 * p * np.cos(phi + 2.0 * np.pi / 3.0)
    mid = 3.0 * q - hi - lo
    isotropic = p == 0
    lo = np.where(isotropic, q, lo)
    mid = np.where(isotropic, q, mid)
    hi = np.where(isotropic, q, hi)
    return np.stack([lo, mid, hi], axis=-1)


def smallest_eigvec(cov, tally: _Tally | None = None):
    """Unit eigenvector of the smallest eigenvalue of each symmetric 3x3 matrix.

    Returns ``(vectors, eigenvalues)``.  Vectors are oriented with z >= 0.  A
    zero matrix yields (0, 0, 1); a two-dimensional smallest eigenspace yields
    the member with largest |z|.
    """
    cov = np.asarray(cov, dtype=np.float64)
    lead = cov.shape[:-2]
    cov = cov.reshape(-1, 3, 3)
    evals = _sym3_eigenvalues(cov)
    m = cov - evals[:, 0, None, None] * np.eye(3)
    cands = np.stack([np.cross(m[:, 0], m[:, 1]), np.cross(m[:, 0], m[:, 2]),
                      np.cross(m[:, 1], m[:, 2])], axis=1)
    norms = np.linalg.norm(cands, axis=-1)
    idx = np.arange(len(cov))
    best = np.argmax(norms, axis=1)
    vec = cands[idx, best]
    best_norm = norms[idx, best]

    scale = np.abs(evals).max(axis=1)
    zero = scale == 0
    # rank(A - lam I) <= 1: the smallest eigenspace is a plane
    tie = ~zero & (best_norm <= 1e-6 * scale ** 2)
    ok = ~zero & ~tie
    out = np.zeros_like(vec)
    out[ok] = vec[ok] / best_norm[ok, None]
    if tie.any():
        r = m[tie]
        rnorm = np.linalg.norm(r, axis=-1)
        row = r[np.arange(len(r)), np.argmax(rnorm, axis=1)]
        # rank 0: every direction is an eigenvector, +z has the largest |z|
        isotropic = rnorm.max(axis=1) <= 1e-6 * scale[tie]
        row[isotropic] = (1.0, 0.0, 0.0)
        row = row / np.linalg.norm(row, axis=-1, keepdims=True)
        v = np.array([0.0, 0.0, 1.0]) - row[:, 2:3] * row
        flat = np.linalg.norm(v, axis=-1) < 1e-12
        v[flat] = np.cross(row[flat], [0.0, 1.0, 0.0])
        v = v / np.linalg.norm(v, axis=-1, keepdims=True)
        v[isotropic] = (0.0, 0.0, 1.0)
        out[tie] = v
    out[zero] = (0.0, 0.0, 1.0)
    out[out[:, 2] < 0] *= -1.0
    if tally is not None:
        tally.degenerate += int(zero.sum())
        tally.ties += int(tie.sum())
    return out.reshape(*lead, 3), evals.reshape(*lead, 3)


def normals_from_covariance(h: HeightMap, neighborhood_radius: int = 2) -> NormalField:
    """Per-pixel normal as the least-variance axis of the surrounding 3D points.

    Windows are ``(2r+1) x (2r+1)`` and are truncated at the map border.
    Coordinates are expressed in pixel units relative to the window center,
    which keeps the covariance well conditioned at fine pitch.
    """
    r = int(neighborhood_radius)
    if r < 1:
        raise ValueError("neighborhood_radius must be >= 1")
    z = h.values / h.pitch
    H, W = z.shape
    zp = np.pad(z, r, mode="edge")
    valid = np.pad(np.ones_like(z), r, mode="constant")
    k = 2 * r + 1
    zw = np.lib.stride_tricks.sliding_window_view(zp, (k, k)) - z[..., None, None]
    ww = np.lib.stride_tricks.sliding_window_view(valid, (k, k))
    dy, dx = np.mgrid[-r:r + 1, -r:r + 1].astype(np.float64)
    count = ww.sum(axis=(-1, -2))

    def wmean(a):
        return (a * ww).sum(axis=(-1, -2)) / count

    mx = wmean(np.broadcast_to(dx, ww.shape))
    my = wmean(np.broadcast_to(dy, ww.shape))
    mz = wmean(zw)
    cx = dx - mx[..., None, None]
    cy = dy - my[..., None, None]
    cz = zw - mz[..., None, None]
    cov = np.empty((H, W, 3, 3))
    comps = (cx, cy, cz)
    for i in range(3):
        for j in range(i, 3):
            cov[..., i, j] = cov[..., j, i] = wmean(comps[i] * comps[j])
    tally = _Tally()
    n, _ = smallest_eigvec(cov, tally)
    return NormalField(n, "covariance", degenerate=tally.degenerate)


def angular_error(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Angle in radians between unit vectors along the last axis."""
    cross = np.linalg.norm(np.cross(a, b), axis=-1)
    dot = np.sum(a * b, axis=-1)
    return np.arctan2(cross, dot)
