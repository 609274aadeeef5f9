import math

import numpy as np
import pytest

from radialcr import geometry
from radialcr.boundary import (
    SolverOptions,
    lattice_directions,
    region_2d,
    region_3d,
    resolve_r_scale,
    solve_ray,
)
from radialcr.exceptions import NonFiniteStatistic, SolverError, UnboundedRay
from radialcr.likelihood import Dataset, LikelihoodModel, fit
from radialcr.models import (
    bivariate_normal_model,
    linear_regression_model,
    benchmark_data,
    regression_data,
    standardized_normal_data,
)
from radialcr.radial import Polar, RadialFrame, Spherical, max_radius_in_box, radial_lr_statistic

from .conftest import CHI2_2_010, CHI2_3_010

CIRCLE_R = math.sqrt(CHI2_2_010 / 10)
SPHERE_R = math.sqrt(CHI2_3_010 / 10)


class TestSolveRay:
    def test_isotropic_radius(self, isotropic_fit):
        for phi in np.linspace(0, 2 * math.pi, 9)[:-1]:
            pt = solve_ray(isotropic_fit, RadialFrame(isotropic_fit.theta_hat, Polar(phi)), CHI2_2_010)
            assert pt.r == pytest.approx(CIRCLE_R, abs=1e-8)
            assert not pt.clamped
            assert abs(pt.statistic - CHI2_2_010) <= 1e-6

    def test_clamped_at_face(self):
        data = standardized_normal_data(10, 2, seed=1)
        f = fit(bivariate_normal_model(box=([-0.5, -0.5], [0.5, 0.5])), data)
        pt = solve_ray(f, RadialFrame(f.theta_hat, Polar(0.0)), CHI2_2_010)
        assert pt.clamped
        assert pt.r == pytest.approx(0.5, abs=1e-12)
        assert pt.statistic == pytest.approx(2.5, abs=1e-9)
        assert pt.statistic < CHI2_2_010

    def test_small_threshold_shrinks_to_mle(self, isotropic_fit):
        frame = RadialFrame(isotropic_fit.theta_hat, Polar(1.0))
        radii = [solve_ray(isotropic_fit, frame, t).r for t in (1e-2, 1e-4, 1e-6, 1e-8)]
        assert all(a > b for a, b in zip(radii, radii[1:]))
        assert radii[-1] == pytest.approx(math.sqrt(1e-8 / 10), abs=1e-9)

    def test_bad_threshold(self, isotropic_fit):
        with pytest.raises(ValueError):
            solve_ray(isotropic_fit, RadialFrame(isotropic_fit.theta_hat, Polar(0.0)), 0.0)

    def test_theta_matches_back_transform(self, bench_fit):
        for phi in np.linspace(0, 6, 11):
            frame = RadialFrame(bench_fit.theta_hat, Polar(phi))
            pt = solve_ray(bench_fit, frame, CHI2_2_010)
            np.testing.assert_allclose(pt.theta, frame.origin + pt.r * frame.unit, atol=1e-12)

    def test_minimal_root_on_non_monotone_ray(self):
        # Statistic rises, falls back below the threshold, then rises again:
        # the first crossing must be returned, not a later one.
        def ll(theta, nu, data):
            r = math.hypot(theta[0], theta[1])
            return -0.5 * (10 * r**2 - 9 * r**3 + 2.2 * r**4)

        model = LikelihoodModel("bumpy", 2, 0, ll, analytic_mle=lambda d: ([0.0, 0.0], []))
        f = fit(model, Dataset({"x": [0.0, 1.0]}))
        frame = RadialFrame(f.theta_hat, Polar(0.3))
        ts = [radial_lr_statistic(f, frame, r) for r in np.linspace(0, 3, 301)]
        threshold = 4.0
        first = next(r for r, t in zip(np.linspace(0, 3, 301), ts) if t >= threshold)
        pt = solve_ray(f, frame, threshold, SolverOptions(r_scale=0.1))
        assert pt.r <= first
        assert pt.statistic == pytest.approx(threshold, abs=1e-6)

    def test_unbounded_flat_ray(self):
        model = LikelihoodModel(
            "flat_y", 2, 0, lambda t, n, d: -0.5 * t[0] ** 2, analytic_mle=lambda d: ([0.0, 0.0], [])
        )
        f = fit(model, Dataset({"x": [0.0, 1.0]}))
        with pytest.raises(UnboundedRay):
            solve_ray(f, RadialFrame(f.theta_hat, Polar(math.pi / 2)), 4.6,
                      SolverOptions(scan_cap=50))

    def test_non_finite_statistic(self):
        def ll(theta, nu, data):
            return math.nan if theta[0] > 0.3 else -0.5 * (theta[0] ** 2 + theta[1] ** 2)

        model = LikelihoodModel("holes", 2, 0, ll, analytic_mle=lambda d: ([0.0, 0.0], []))
        f = fit(model, Dataset({"x": [0.0, 1.0]}))
        with pytest.raises(NonFiniteStatistic) as info:
            solve_ray(f, RadialFrame(f.theta_hat, Polar(0.0)), 4.6)
        assert info.value.theta[0] > 0.3

    def test_region_attaches_direction_to_errors(self):
        model = LikelihoodModel(
            "flat_y", 2, 0, lambda t, n, d: -0.5 * t[0] ** 2, analytic_mle=lambda d: ([0.0, 0.0], [])
        )
        f = fit(model, Dataset({"x": [0.0, 1.0]}))
        with pytest.raises(SolverError) as info:
            region_2d(f, 0.1, 4, SolverOptions(scan_cap=30))
        assert info.value.direction == pytest.approx((math.pi / 2,))

    def test_options_validated(self):
        with pytest.raises(ValueError):
            SolverOptions(scan_step=0.0)
        with pytest.raises(ValueError):
            SolverOptions(lattice="hex")
        with pytest.raises(ValueError):
            SolverOptions(workers=0)


class TestRegion2D:
    def test_four_axis_points(self, isotropic_fit):
        region = region_2d(isotropic_fit, 0.10, 4)
        expected = CIRCLE_R * np.array([[1, 0], [0, 1], [-1, 0], [0, -1]])
        np.testing.assert_allclose(region.coordinates(), expected, atol=1e-8)
        assert region.threshold == pytest.approx(CHI2_2_010, abs=1e-12)
        assert region.dof == 2

    def test_default_angle_count(self, bench_fit):
        region = region_2d(bench_fit)
        assert len(region) == 180
        phis = [pt.direction.phi for pt in region.points]
        np.testing.assert_allclose(phis, 2 * np.pi * np.arange(180) / 180)

    @pytest.mark.parametrize("n", [1, 7, 50])
    def test_solver_contract(self, bench_fit, n):
        region = region_2d(bench_fit, 0.10, n)
        for pt in region.points:
            assert not pt.clamped
            assert abs(pt.statistic - region.threshold) <= 1e-6

    def test_minimality(self, rng):
        f = fit(linear_regression_model(), regression_data(seed=3))
        thr = CHI2_2_010
        for phi in rng.uniform(0, 2 * math.pi, 100):
            frame = RadialFrame(f.theta_hat, Polar(phi))
            pt = solve_ray(f, frame, thr)
            for frac in np.arange(1, 100) / 100:
                assert radial_lr_statistic(f, frame, frac * pt.r) < thr

    @pytest.mark.parametrize("c", [0.5, 2.0, 10.0])
    def test_affine_equivariance(self, c):
        data = benchmark_data(seed=4)
        base = region_2d(fit(bivariate_normal_model(), data))
        scaled = region_2d(fit(bivariate_normal_model(), data.transformed(lambda v: c * v)))
        np.testing.assert_allclose(scaled.radii(), c * base.radii(), atol=1e-8 * c)
        assert abs(scaled.n_evaluations / base.n_evaluations - 1) <= 0.2

    def test_contains_mle(self, bench_fit):
        region = region_2d(bench_fit)
        assert not region.any_clamped
        assert region.contains_mle()
        assert geometry.winding_number(region.theta_hat, region.coordinates()) == 1

    def test_reflection_symmetry(self, isotropic_fit):
        region = region_2d(isotropic_fit, 0.1, 180)
        pts = region.coordinates() - isotropic_fit.theta_hat
        np.testing.assert_allclose(pts[:90], -pts[90:], atol=1e-8)

    def test_parallel_matches_serial(self, bench_fit):
        serial = region_2d(bench_fit, 0.1, 90)
        parallel = region_2d(bench_fit, 0.1, 90, SolverOptions(workers=4))
        np.testing.assert_array_equal(serial.coordinates(), parallel.coordinates())
        assert serial.n_evaluations == parallel.n_evaluations

    def test_dimension_checks(self, isotropic_fit, sphere_fit):
        with pytest.raises(ValueError):
            region_2d(sphere_fit)
        with pytest.raises(ValueError):
            region_3d(isotropic_fit)
        with pytest.raises(ValueError):
            region_2d(isotropic_fit, 0.1, 0)
        with pytest.raises(ValueError):
            isotropic_fit.model.with_parameter_box([0, 0], [0, 1])

    def test_clamped_box_rays(self):
        data = standardized_normal_data(10, 2, seed=1)
        free = region_2d(fit(bivariate_normal_model(), data), 0.1, 72)
        boxed = region_2d(fit(bivariate_normal_model(box=([-0.5, -0.5], [0.5, 0.5])), data), 0.1, 72)
        assert boxed.any_clamped
        for a, b in zip(free.points, boxed.points):
            if b.clamped:
                assert b.statistic < boxed.threshold
            else:
                assert b.r == pytest.approx(a.r, abs=1e-12)

    def test_r_scale_resolution(self, bench_fit):
        expected = math.sqrt(math.sqrt(bench_fit.nu_hat[0] * bench_fit.nu_hat[1]) / 10)
        assert resolve_r_scale(bench_fit, SolverOptions()) == pytest.approx(expected)
        assert resolve_r_scale(bench_fit, SolverOptions(r_scale=3.0)) == 3.0
        model = LikelihoodModel("m", 2, 0, lambda t, n, d: 0.0, analytic_mle=lambda d: ([0, 0], []))
        f = fit(model, Dataset({"x": [0.0, 1.0]}))
        assert resolve_r_scale(f, SolverOptions()) == 1.0


class TestRegion3D:
    def test_sphere_radius(self, sphere_fit):
        region = region_3d(sphere_fit, 0.10, 12, 6)
        np.testing.assert_allclose(region.radii(), SPHERE_R, atol=1e-7)
        assert region.dof == 3
        assert region.threshold == pytest.approx(CHI2_3_010, abs=1e-9)

    def test_single_ray(self, sphere_fit):
        region = region_3d(sphere_fit, 0.10, 1, 1)
        assert len(region) == 1
        assert region.points[0].direction == Spherical(0.0, math.pi / 2)

    def test_lattice_order(self):
        dirs = lattice_directions(4, 3)
        taus = [d.tau for d in dirs]
        assert taus == sorted(taus)
        assert [d.phi for d in dirs[:4]] == pytest.approx([0, math.pi / 2, math.pi, 3 * math.pi / 2])
        assert taus[0] == pytest.approx(math.pi / 6)
        assert all(0 < d.tau < math.pi for d in dirs)

    def test_fibonacci_lattice(self, sphere_fit):
        dirs = lattice_directions(10, 10, "fibonacci")
        units = np.array([d.unit_vector() for d in dirs])
        assert len(dirs) == 100
        np.testing.assert_allclose(units.mean(axis=0), 0, atol=0.02)
        region = region_3d(sphere_fit, 0.10, 8, 8, SolverOptions(lattice="fibonacci"))
        np.testing.assert_allclose(region.radii(), SPHERE_R, atol=1e-7)

    def test_solver_contract(self, sphere_fit):
        region = region_3d(sphere_fit, 0.05, 10, 5)
        assert all(abs(pt.statistic - region.threshold) <= 1e-6 for pt in region.points)
