import numpy as np
import pytest

from chartbundle.geometry import (
    PointCloud,
    from_csv,
    klein_point,
    mobius_point,
    render_line_patch,
    sample_klein,
    sample_line_patches,
    sample_mobius,
    sample_sphere,
    to_csv,
)


class TestSphere:
    def test_unit_norm(self):
        cloud = sample_sphere(1000, seed=42)
        assert len(cloud) == 1000 and cloud.ambient_dim == 3
        norms = np.linalg.norm(cloud.points, axis=1)
        assert np.all(np.abs(norms - 1.0) < 1e-12)

    def test_empty_input(self):
        with pytest.raises(ValueError):
            sample_sphere(0, seed=1)

    def test_determinism(self):
        a = sample_sphere(50, seed=7)
        b = sample_sphere(50, seed=7)
        assert np.array_equal(a.points, b.points)
        assert not np.array_equal(a.points, sample_sphere(50, seed=8).points)

    def test_coordinate_means_near_zero(self):
        # Monte-Carlo oracle: the uniform measure on the sphere is symmetric,
        # so each coordinate mean tends to 0.
        cloud = sample_sphere(10000, seed=3)
        assert np.all(np.abs(cloud.points.mean(axis=0)) < 0.05)


class TestMobius:
    def test_parameterization_values(self):
        assert np.allclose(mobius_point(0.0, 0.0), [1.0, 0.0, 0.0], atol=1e-15)
        # cos(pi/2) = 0 kills the radial correction; sin(pi/2) = 1 lifts z
        assert np.allclose(mobius_point(np.pi, 1.0), [-1.0, 0.0, 0.5], atol=1e-15)

    def test_radius_band(self):
        cloud = sample_mobius(1500, seed=42)
        assert len(cloud) == 1500
        r = np.linalg.norm(cloud.points[:, :2], axis=1)
        assert np.all(r >= 0.5 - 1e-12) and np.all(r <= 1.5 + 1e-12)

    def test_intrinsic_matches_points(self):
        cloud = sample_mobius(200, seed=5)
        rebuilt = mobius_point(cloud.intrinsic[:, 0], cloud.intrinsic[:, 1])
        assert np.allclose(rebuilt, cloud.points, atol=1e-15)


def _klein_quotient_dist(p, q):
    """Distance in the parameter quotient: (u, v) ~ (u + 2pi, 2pi - v), with
    u 4pi-periodic and v 2pi-periodic on the double cover."""
    best = np.inf
    for flip in (0, 1):
        u2 = q[0] + 2.0 * np.pi * flip
        v2 = (2.0 * np.pi - q[1]) if flip else q[1]
        du = np.abs(u2 - p[0])
        du = min(du % (4.0 * np.pi), 4.0 * np.pi - du % (4.0 * np.pi))
        dv = np.abs(v2 - p[1]) % (2.0 * np.pi)
        dv = min(dv, 2.0 * np.pi - dv)
        best = min(best, np.hypot(du, dv))
    return best


class TestKlein:
    def test_parameterization_values(self):
        assert np.allclose(klein_point(0.0, 0.0, 4.0), [5, 0, 0, 0], atol=1e-15)
        assert np.allclose(klein_point(0.0, np.pi, 4.0), [3, 0, 0, 0], atol=1e-12)

    def test_sampling(self):
        cloud = sample_klein(1000, m=4.0, seed=42)
        assert len(cloud) == 1000 and cloud.ambient_dim == 4

    def test_m_must_exceed_one(self):
        with pytest.raises(ValueError):
            sample_klein(10, m=1.0, seed=0)
        with pytest.raises(ValueError):
            sample_klein(10, m=0.5, seed=0)

    def test_injectivity_spot_check(self):
        # parameter pairs separated in the quotient metric must not collide
        # in R^4 (spot check on 10^4 random pairs)
        g = np.random.default_rng(0)
        params = np.stack(
            [g.uniform(0, 2 * np.pi, 10000), g.uniform(0, 2 * np.pi, 10000)],
            axis=1,
        )
        a, b = params[:5000], params[5000:]
        pa = klein_point(a[:, 0], a[:, 1], 4.0)
        pb = klein_point(b[:, 0], b[:, 1], 4.0)
        img_dist = np.linalg.norm(pa - pb, axis=1)
        for i in range(5000):
            if _klein_quotient_dist(a[i], b[i]) > 1e-3:
                assert img_dist[i] > 1e-8


class TestLinePatches:
    def test_grid_count_and_norms(self):
        cloud = sample_line_patches(75, 75)
        assert len(cloud) == 5625 and cloud.ambient_dim == 100
        norms = np.linalg.norm(cloud.points, axis=1)
        assert np.all(np.abs(norms - 1.0) < 1e-12)

    def test_angle_flip_identifies_antipodes(self):
        for theta, off in [(0.3, 0.4), (1.2, -0.7), (2.9, 0.0)]:
            a = render_line_patch(theta, off, blur=0.5)
            b = render_line_patch(theta + np.pi, -off, blur=0.5)
            assert np.max(np.abs(a - b)) < 1e-12

    def test_blur_positive(self):
        with pytest.raises(ValueError):
            render_line_patch(0.1, 0.1, blur=0.0)


class TestPointCloud:
    def test_invariants(self):
        with pytest.raises(ValueError):
            PointCloud(points=np.zeros((3, 2)), ambient_dim=3)
        with pytest.raises(ValueError):
            PointCloud(
                points=np.zeros((3, 2)), ambient_dim=2, intrinsic=np.zeros((2, 1))
            )

    def test_csv_round_trip(self, tmp_path):
        cloud = sample_mobius(40, seed=9)
        path = str(tmp_path / "cloud.csv")
        to_csv(cloud, path)
        back = from_csv(path, label="mobius")
        assert back.ambient_dim == 3
        assert np.allclose(back.points, cloud.points, atol=0, rtol=0)
        assert np.allclose(back.intrinsic, cloud.intrinsic, atol=0, rtol=0)
