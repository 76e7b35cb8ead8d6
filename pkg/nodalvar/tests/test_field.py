import math
import os
import tempfile

import numpy as np
from django.test import SimpleTestCase

from nodalvar import chaos, field, kernel, mesh
from nodalvar.errors import DomainError, MeshResolutionError


def random_points(count, seed):
    points = np.random.default_rng(seed).standard_normal((count, 3))
    return points / np.linalg.norm(points, axis=1)[:, None]


def points_at_angles(angles, seed):
    """Random unit points x and y with angle(x_k, y_k) = angles[k]."""
    x = random_points(len(angles), seed)
    helper = random_points(len(angles), seed + 1)
    tangent = helper - np.sum(helper * x, axis=1)[:, None] * x
    tangent /= np.linalg.norm(tangent, axis=1)[:, None]
    y = np.cos(angles)[:, None] * x + np.sin(angles)[:, None] * tangent
    return x, y / np.linalg.norm(y, axis=1)[:, None]


def rotation_matrix(z_angle, x_angle):
    cz, sz = math.cos(z_angle), math.sin(z_angle)
    cx, sx = math.cos(x_angle), math.sin(x_angle)
    about_z = np.array([[cz, -sz, 0.0], [sz, cz, 0.0], [0.0, 0.0, 1.0]])
    about_x = np.array([[1.0, 0.0, 0.0], [0.0, cx, -sx], [0.0, sx, cx]])
    return about_z @ about_x


class BasisTests(SimpleTestCase):
    def test_coefficient_index(self):
        win = kernel.make_window(10, 0.2)
        self.assertEqual(field.coefficient_index(win, 8, -8), 0)
        self.assertEqual(field.coefficient_index(win, 9, 0), 17 + 9)
        self.assertEqual(field.coefficient_index(win, 10, 10), win.n_coefficients - 1)
        with self.assertRaises(DomainError):
            field.coefficient_index(win, 7, 0)
        with self.assertRaises(DomainError):
            field.coefficient_index(win, 9, 10)

    def test_addition_theorem(self):
        for n, g in ((10, 0.2), (30, 0.3)):
            win = kernel.make_window(n, g)
            points = random_points(12, seed=n)
            basis = field.basis_matrix(win, points)
            self.assertEqual(basis.shape, (12, win.n_coefficients))
            theta = np.arccos(np.clip(points @ points.T, -1.0, 1.0))
            expected = kernel.gamma_exact(win, theta.ravel()).gamma.reshape(theta.shape)
            np.testing.assert_allclose(win.Csq * basis @ basis.T, expected, atol=1e-10)

    def test_poles(self):
        win = kernel.make_window(10, 0.2)
        poles = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, -1.0]])
        np.testing.assert_allclose(win.Csq * np.sum(field.basis_matrix(win, poles) ** 2, axis=1), 1.0)

    def test_points_must_be_unit_vectors(self):
        win = kernel.make_window(10, 0.2)
        with self.assertRaises(DomainError):
            field.basis_matrix(win, [[0.0, 0.0, 1.001]])
        with self.assertRaises(DomainError):
            field.basis_matrix(win, [[0.0, 1.0]])


class SamplingTests(SimpleTestCase):
    def setUp(self):
        self.win = kernel.make_window(10, 0.2)

    def test_seeded_samples_are_reproducible(self):
        first = field.sample_field(self.win, 42)
        np.testing.assert_array_equal(first.coeffs, field.sample_field(self.win, 42).coeffs)
        self.assertFalse(np.array_equal(first.coeffs, field.sample_field(self.win, 43).coeffs))
        self.assertEqual(first.coeffs.shape, (57,))

    def test_seed_validation(self):
        for seed in (-1, 2**64, 1.5, True, "7", None):
            with self.assertRaises(DomainError):
                field.sample_field(self.win, seed)
        field.sample_field(self.win, 2**64 - 1)

    def test_sample_seeds(self):
        seeds = field.sample_seeds(3, 5)
        self.assertEqual(len(seeds), 5)
        self.assertEqual(len(set(seeds)), 5)
        self.assertEqual(seeds, field.sample_seeds(3, 5))
        self.assertNotEqual(seeds, field.sample_seeds(4, 5))

    def test_field_values(self):
        sample = field.sample_field(self.win, 1)
        points = random_points(4, seed=2)
        values = field.evaluate_field(sample, points)
        np.testing.assert_allclose(values, field.basis_matrix(self.win, points) @ sample.coeffs)

    def test_bootstrap_is_seeded(self):
        values = np.random.default_rng(0).standard_normal(50)
        first = field.bootstrap_var_stderr(values, seed=9)
        self.assertEqual(first, field.bootstrap_var_stderr(values, seed=9))
        self.assertGreater(first, 0.0)

    def test_two_point_covariance_matches_the_kernel(self):
        angles = np.array([0.15, 0.5, 1.2, 2.6])
        x, y = points_at_angles(angles, seed=17)
        coeffs = np.stack([field.sample_field(self.win, s).coeffs for s in field.sample_seeds(606, 10_000)])
        at_x = coeffs @ field.basis_matrix(self.win, x).T
        at_y = coeffs @ field.basis_matrix(self.win, y).T
        products = at_x * at_y
        stderr = np.std(products, axis=0, ddof=1) / math.sqrt(len(coeffs))
        expected = kernel.gamma_exact(self.win, angles).gamma
        np.testing.assert_array_less(np.abs(np.mean(products, axis=0) - expected), 3 * stderr)
        squares = at_x**2
        np.testing.assert_array_less(
            np.abs(np.mean(squares, axis=0) - 1.0), 3.5 * np.std(squares, axis=0, ddof=1) / math.sqrt(len(coeffs))
        )


class NodalStatsTests(SimpleTestCase):
    def setUp(self):
        self.win = kernel.make_window(10, 0.2)

    def test_mean_length(self):
        stats = field.mc_nodal_stats(self.win, 500, level=6, seed=2024)
        expected = self.win.mean_length
        self.assertLessEqual(abs(stats.mean_length - expected), 3 * stats.stderr_mean + 0.01 * expected)
        self.assertEqual((stats.n_samples, stats.level, stats.mesh_resolution), (500, 6, 40962))
        self.assertGreater(stats.var_length, 0.0)
        self.assertGreater(stats.stderr_var, 0.0)
        self.assertIn("level 6", stats.discretization_note)

    def test_independent_of_workers(self):
        one = field.mc_nodal_stats(self.win, 70, seed=5, bootstrap=20)
        four = field.mc_nodal_stats(self.win, 70, seed=5, bootstrap=20, workers=4)
        np.testing.assert_array_equal(one.lengths, four.lengths)
        self.assertEqual(one, four)
        self.assertEqual(one.level, mesh.minimum_level(10))

    def test_raw_dump(self):
        with tempfile.TemporaryDirectory() as directory:
            path = os.path.join(directory, "lengths.csv")
            stats = field.mc_nodal_stats(self.win, 6, seed=8, raw_dump=path, bootstrap=20)
            with open(path) as handle:
                lines = handle.read().splitlines()
        self.assertEqual(len(lines), 6)
        seed, length = lines[0].split(",")
        self.assertEqual(int(seed), stats.seeds[0])
        self.assertEqual(float(length), stats.lengths[0])

    def test_errors(self):
        with self.assertRaises(MeshResolutionError):
            field.mc_nodal_stats(self.win, 10, level=1, seed=1)
        with self.assertRaises(DomainError):
            field.mc_nodal_stats(self.win, 1, seed=1)
        with self.assertRaises(DomainError):
            field.mc_nodal_stats(self.win, 10, seed=-3)

    def test_sign_flip(self):
        grid = mesh.build_mesh(5)
        values = field.evaluate_field(field.sample_field(self.win, 12), grid.vertices)
        self.assertAlmostEqual(mesh.nodal_length(-values, grid), mesh.nodal_length(values, grid), places=12)

    def test_rotation_invariance_in_law(self):
        rotation = rotation_matrix(0.7, 1.1)
        plain = field.mc_nodal_stats(self.win, 400, level=5, seed=71, bootstrap=100)
        turned = field.mc_nodal_stats(self.win, 400, level=5, seed=72, bootstrap=100, rotation=rotation)
        self.assertLessEqual(
            abs(plain.mean_length - turned.mean_length), 3.5 * math.hypot(plain.stderr_mean, turned.stderr_mean)
        )
        self.assertLessEqual(
            abs(plain.var_length - turned.var_length), 3.5 * math.hypot(plain.stderr_var, turned.stderr_var)
        )
        same_seed = field.mc_nodal_stats(self.win, 4, level=5, seed=71, bootstrap=10, rotation=rotation)
        self.assertFalse(np.array_equal(same_seed.lengths, plain.lengths[:4]))


class VarianceBandTests(SimpleTestCase):
    def test_variance_positivity_and_order(self):
        # four points per wavelength instead of the default eight
        win = kernel.make_window(64, 64**-0.5)
        stats = field.mc_nodal_stats(win, 2000, seed=6464, q=4, bootstrap=100)
        self.assertGreater(stats.var_length, 3 * stats.stderr_var)
        # log(n)/32 scaled by (1 + second-chaos share), since O(1) terms dominate at n = 64
        scale = math.log(win.n) / 32 + chaos.chaos2_variance_exact(win)
        self.assertGreaterEqual(stats.var_length, 0.3 * scale)
        self.assertLessEqual(stats.var_length, 3 * scale)
