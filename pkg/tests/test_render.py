import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from visuotactile.heightfield import HeightMap, NormalField, normals_from_covariance
from visuotactile.render import (DarkeningParams, LightSource, PhongParams, darkening_mask,
                                 default_lights, flat_image, phong_pixel, reflect, render_tactile,
                                 shade)

UP = (0.0, 0.0, 1.0)


def single(direction=UP, **kw):
    return PhongParams(lights=[LightSource(direction)], **kw)


class TestReflect:
    def test_head_on(self):
        assert np.allclose(reflect(UP, UP), UP)

    def test_grazing(self):
        assert np.allclose(reflect((1, 0, 0), UP), (-1, 0, 0))

    def test_oblique(self):
        assert np.allclose(reflect((0, 0.6, 0.8), UP), (0, -0.6, 0.8), atol=1e-15)

    @given(st.floats(0, np.pi), st.floats(0, 2 * np.pi), st.floats(0, np.pi / 2), st.floats(0, 2 * np.pi))
    def test_unit_length(self, t1, p1, t2, p2):
        L = np.array([np.sin(t1) * np.cos(p1), np.sin(t1) * np.sin(p1), np.cos(t1)])
        N = np.array([np.sin(t2) * np.cos(p2), np.sin(t2) * np.sin(p2), np.cos(t2)])
        assert np.linalg.norm(reflect(L, N)) == pytest.approx(1.0, abs=1e-12)


class TestPhongPixel:
    def test_ambient_only(self):
        p = PhongParams(k_a=0.2, ambient=(0.5, 0.5, 0.5), lights=[])
        assert np.allclose(phong_pixel(UP, p), 0.1)

    def test_head_on_clamps_to_one(self):
        raw = 0.8 + 1.0 + 0.5
        assert raw > 1
        assert np.array_equal(phong_pixel(UP, single()), [1.0, 1.0, 1.0])

    def test_oblique_hand_value(self):
        # L.N = 0.8 and R.V = 0.8 with V = N = z
        p = single((0.0, 0.6, 0.8), k_a=0.0, k_d=0.5, k_s=0.5, alpha=5)
        expected = 0.5 * 0.8 + 0.5 * 0.8 ** 5
        assert expected == pytest.approx(0.56384)
        assert np.allclose(phong_pixel(UP, p), expected, atol=1e-12)

    def test_back_lighting_clamped(self):
        p = single((0.0, 0.0, 1.0), k_a=0.0, k_s=0.0)
        assert np.allclose(phong_pixel((0.0, 0.6, -0.8), p), 0.0)

    def test_default_rig(self):
        lights = default_lights()
        assert len(lights) == 3
        for k, light in enumerate(lights):
            assert np.linalg.norm(light.direction) == pytest.approx(1.0)
            assert light.direction[2] == pytest.approx(np.sin(np.pi / 4))
            assert light.diffuse[k] == 1.0 and sum(light.diffuse) == 1.0

    def test_rejects_bad_light(self):
        with pytest.raises(ValueError):
            LightSource((0.0, 0.0, 2.0))

    @given(st.floats(0, 1), st.floats(0, 1))
    def test_monotone_in_incidence(self, c1, c2):
        p = single(k_a=0.1, k_s=0.0, k_d=0.7)
        n1 = np.array([np.sqrt(1 - c1 ** 2), 0, c1])
        n2 = np.array([np.sqrt(1 - c2 ** 2), 0, c2])
        i1, i2 = phong_pixel(n1, p)[0], phong_pixel(n2, p)[0]
        if c1 <= c2:
            assert i1 <= i2 + 1e-15
        else:
            assert i2 <= i1 + 1e-15


def sphere_depth(n=41, pitch=1e-4, radius=0.004, sink=0.0015):
    idx = (np.arange(n) - n // 2) * pitch
    y, x = np.meshgrid(idx, idx, indexing="ij")
    r2 = x ** 2 + y ** 2
    depth = np.where(r2 < radius ** 2, sink - (radius - np.sqrt(np.maximum(radius ** 2 - r2, 0))), 0.0)
    return np.clip(depth, 0, None), x, y, radius


class TestRenderTactile:
    def test_flat_map(self):
        h = HeightMap(np.zeros((5, 5)), 1e-3)
        img = render_tactile(h, normals_from_covariance(h))
        assert np.allclose(img, phong_pixel(UP, PhongParams()))
        assert np.allclose(img, flat_image((5, 5)))

    def test_full_depth_pixel_darkened(self):
        v = np.zeros((5, 5))
        v[2, 2] = 0.005
        h = HeightMap(v, 1e-3)
        normals = NormalField(np.broadcast_to(UP, (5, 5, 3)).copy(), "given")
        p = single(k_a=0.2, k_d=0.3, k_s=0.1)
        img = render_tactile(h, normals, p, DarkeningParams(0.4))
        base = phong_pixel(UP, p)
        assert np.allclose(img[2, 2], base * 0.6)
        assert np.allclose(img[0, 0], base)

    def test_mask_values(self):
        d = DarkeningParams(0.5)
        assert darkening_mask(np.array(0.0), 0.005, d) == 1.0
        assert darkening_mask(np.array(0.0025), 0.005, d) == pytest.approx(0.75)

    def test_shape_mismatch(self):
        h = HeightMap(np.zeros((5, 5)), 1e-3)
        with pytest.raises(ValueError):
            render_tactile(h, NormalField(np.zeros((4, 5, 3)), "given"))

    def test_sphere_radially_symmetric(self):
        depth, x, y, radius = sphere_depth()
        h = HeightMap(depth, 1e-4)
        # analytic normals of the indenting sphere (surface points out of the gel)
        inside = x ** 2 + y ** 2 < radius ** 2
        zc = np.sqrt(np.maximum(radius ** 2 - x ** 2 - y ** 2, 0))
        n = np.where(inside[..., None], np.stack([x, y, zc], -1) / radius, [0, 0, 1])
        img = render_tactile(h, NormalField(n, "analytic"), single(k_s=0.3, k_a=0.1, k_d=0.4))
        r = np.round((x ** 2 + y ** 2) / 1e-8).astype(int)
        for ring in np.unique(r):
            vals = img[r == ring]
            assert np.ptp(vals, axis=0).max() < 1e-6

    def test_sphere_symmetric_pixels_with_estimated_normals(self):
        depth, *_ = sphere_depth()
        h = HeightMap(depth, 1e-4)
        img = render_tactile(h, normals_from_covariance(h), single(k_s=0.3, k_a=0.1, k_d=0.4))
        # a head-on light makes the image symmetric under the grid's own symmetries
        assert np.allclose(img, img[::-1], atol=1e-9)
        assert np.allclose(img, img.transpose(1, 0, 2), atol=1e-9)

    def test_rotation_equivariance(self):
        rng = np.random.default_rng(0)
        v = rng.uniform(0, 0.004, (12, 12))
        p = PhongParams()
        img = render_tactile(HeightMap(v, 1e-3), normals_from_covariance(HeightMap(v, 1e-3)), p)
        # np.rot90 maps (x, y) -> (y, -x) in column/row coordinates
        rot_lights = [LightSource((l.direction[1], -l.direction[0], l.direction[2]), l.diffuse, l.specular)
                      for l in p.lights]
        p2 = PhongParams(lights=rot_lights)
        hv = np.rot90(v)
        img2 = render_tactile(HeightMap(hv, 1e-3), normals_from_covariance(HeightMap(hv, 1e-3)), p2)
        assert np.allclose(img2, np.rot90(img), atol=1e-9)

    def test_no_lights_constant(self):
        rng = np.random.default_rng(1)
        h = HeightMap(rng.uniform(0, 0.003, (6, 6)), 1e-3)
        p = PhongParams(k_a=0.5, ambient=(0.4, 0.6, 1.0), lights=[])
        img = render_tactile(h, normals_from_covariance(h), p, DarkeningParams(0.0))
        assert np.allclose(img, img[0, 0])

    @given(arrays(np.float64, (6, 6), elements=st.floats(0, 0.005)))
    def test_output_range(self, v):
        h = HeightMap(v, 5e-4)
        img = render_tactile(h, normals_from_covariance(h))
        assert np.all(np.isfinite(img))
        assert img.min() >= 0 and img.max() <= 1

    def test_shade_broadcasts(self):
        n = np.tile(np.array(UP), (2, 3, 1))
        assert shade(n, PhongParams()).shape == (2, 3, 3)
