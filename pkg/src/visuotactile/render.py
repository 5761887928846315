"""Phong shading of gel height maps into tactile RGB images."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .heightfield import HeightMap, NormalField


def _unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    return v / np.linalg.norm(v)


@dataclass(frozen=True)
class LightSource:
    direction: tuple  # unit vector from the surface toward the light
    diffuse: tuple = (1.0, 1.0, 1.0)
    specular: tuple = (1.0, 1.0, 1.0)

    def __post_init__(self):
        d = np.asarray(self.direction, dtype=np.float64)
        if abs(np.linalg.norm(d) - 1.0) > 1e-6:
            raise ValueError("light direction must be a unit vector")
        for name in ("diffuse", "specular"):
            rgb = np.asarray(getattr(self, name), dtype=np.float64)
            if rgb.shape != (3,) or rgb.min() < 0 or rgb.max() > 1:
                raise ValueError(f"{name} intensity must be an RGB triple in [0, 1]")


def default_lights(elevation: float = np.pi / 4) -> list[LightSource]:
    """Red, green and blue lights at 120 degree azimuth spacing."""
    lights = []
    for k in range(3):
        az = 2.0 * np.pi * k / 3.0
        d = (np.cos(elevation) * np.cos(az), np.cos(elevation) * np.sin(az), np.sin(elevation))
        rgb = tuple(1.0 if c == k else 0.0 for c in range(3))
        lights.append(LightSource(tuple(d), diffuse=rgb, specular=rgb))
    return lights


@dataclass(frozen=True)
class PhongParams:
    k_a: float = 0.8
    k_d: float = 1.0
    k_s: float = 0.5
    alpha: float = 5.0
    ambient: tuple = (1.0, 1.0, 1.0)
    view: tuple = (0.0, 0.0, 1.0)
    lights: list = field(default_factory=default_lights)

    def __post_init__(self):
        if min(self.k_a, self.k_d, self.k_s) < 0:
            raise ValueError("Phong constants must be non-negative")
        if self.alpha < 1:
            raise ValueError("shininess must be >= 1")
        if abs(np.linalg.norm(self.view) - 1.0) > 1e-6:
            raise ValueError("view direction must be a unit vector")


@dataclass(frozen=True)
class DarkeningParams:
    max_attenuation: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.max_attenuation <= 1.0:
            raise ValueError("max_attenuation must lie in [0, 1]")


def reflect(light, normal) -> np.ndarray:
    """Mirror ``light`` about ``normal``: ``2 (L.N) N - L`` (broadcasts)."""
    light = np.asarray(light, dtype=np.float64)
    normal = np.asarray(normal, dtype=np.float64)
    ln = np.sum(light * normal, axis=-1, keepdims=True)
    return 2.0 * ln * normal - light


def shade(normals: np.ndarray, params: PhongParams) -> np.ndarray:
    """Phong intensity for an array of unit normals ``(..., 3)`` -> ``(..., 3)`` in [0, 1]."""
    normals = np.asarray(normals, dtype=np.float64)
    out = np.empty(normals.shape[:-1] + (3,))
    out[...] = params.k_a * np.asarray(params.ambient, dtype=np.float64)
    view = np.asarray(params.view, dtype=np.float64)
    for light in params.lights:
        L = np.asarray(light.direction, dtype=np.float64)
        ln = normals @ L
        rv = reflect(L, normals) @ view
        diff = params.k_d * np.maximum(ln, 0.0)
        spec = params.k_s * np.maximum(rv, 0.0) ** params.alpha
        out += diff[..., None] * np.asarray(light.diffuse) + spec[..., None] * np.asarray(light.specular)
    return np.clip(out, 0.0, 1.0)


def phong_pixel(normal, params: PhongParams) -> np.ndarray:
    return shade(np.asarray(normal, dtype=np.float64)[None], params)[0]


def smoothstep(x):
    x = np.clip(x, 0.0, 1.0)
    return x * x * (3.0 - 2.0 * x)


def darkening_mask(depth: np.ndarray, gel_thickness: float, darkening: DarkeningParams) -> np.ndarray:
    return 1.0 - darkening.max_attenuation * smoothstep(np.asarray(depth) / gel_thickness)


def render_tactile(h: HeightMap, normals: NormalField, params: PhongParams | None = None,
                   darkening: DarkeningParams | None = None) -> np.ndarray:
    """Tactile image ``(H, W, 3)`` in [0, 1] for a height map and its normals."""
    params = params or PhongParams()
    darkening = darkening or DarkeningParams()
    if normals.shape != h.values.shape:
        raise ValueError(f"normal field {normals.shape} does not match height map {h.values.shape}")
    img = shade(normals.normals, params)
    img *= darkening_mask(h.values, h.gel_thickness, darkening)[..., None]
    return img


def flat_image(shape, params: PhongParams | None = None) -> np.ndarray:
    """Tactile image of the undeformed gel."""
    color = phong_pixel((0.0, 0.0, 1.0), params or PhongParams())
    return np.broadcast_to(color, tuple(shape) + (3,)).copy()


def to_uint8(img: np.ndarray) -> np.ndarray:
    return np.round(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)
