import doctest
import math
from math import comb

import numpy as np
from django.test import SimpleTestCase
from scipy import special

from nodalvar import specfun
from nodalvar.errors import DomainError


def load_tests(loader, tests, ignore):
    tests.addTests(doctest.DocTestSuite(specfun))
    return tests


def jacobi_by_binomial_sum(n, alpha, beta, x):
    # P_n^(a,b)(x) = Σ_s C(n+a, n-s) C(n+b, s) ((x-1)/2)^s ((x+1)/2)^(n-s), integer a, b
    return sum(
        comb(n + alpha, n - s) * comb(n + beta, s) * ((x - 1) / 2) ** s * ((x + 1) / 2) ** (n - s)
        for s in range(n + 1)
    )


class LegendreTests(SimpleTestCase):
    def test_low_degrees(self):
        self.assertEqual(specfun.legendre_p(0, 0.3), 1.0)
        self.assertEqual(specfun.legendre_p(1, 0.5), 0.5)
        x = 0.3
        p5 = (63 * x**5 - 70 * x**3 + 15 * x) / 8
        self.assertAlmostEqual(specfun.legendre_p(5, x), p5, places=14)

    def test_matches_scipy_up_to_high_degree(self):
        x = np.linspace(-1.0, 1.0, 41)
        for ell in (10, 100, 1000, 2000):
            ours = specfun.legendre_p(ell, x)
            reference = special.eval_legendre(ell, x)
            np.testing.assert_allclose(ours, reference, rtol=1e-10, atol=1e-11)

    def test_endpoint_and_bound(self):
        x = np.linspace(-1.0, 1.0, 201)
        for ell in (3, 40, 400):
            values = specfun.legendre_p(ell, x)
            self.assertAlmostEqual(float(values[-1]), 1.0, places=12)
            self.assertLessEqual(float(np.max(np.abs(values))), 1.0 + 1e-12)

    def test_scalar_and_array_results(self):
        self.assertIsInstance(specfun.legendre_p(3, 0.2), float)
        self.assertEqual(specfun.legendre_p(3, np.array([0.2, 0.4])).shape, (2,))

    def test_endpoint_round_off_is_absorbed(self):
        self.assertAlmostEqual(specfun.legendre_p(4, 1.0 + 5e-13), 1.0, places=12)

    def test_domain(self):
        with self.assertRaises(DomainError):
            specfun.legendre_p(2, 1.5)
        with self.assertRaises(DomainError):
            specfun.legendre_p(-1, 0.5)
        with self.assertRaises(DomainError):
            specfun.legendre_p(2.5, 0.5)


class LegendreDerivativeTests(SimpleTestCase):
    def test_trivial_values(self):
        self.assertEqual(specfun.legendre_d(1, 0.7), 1.0)
        self.assertEqual(specfun.legendre_d(2, 0.0, order=2), 3.0)

    def test_matches_central_differences(self):
        step = 1e-6
        for ell in (7, 25, 50):
            for x in (-0.8, -0.1, 0.4, 0.9):
                numeric = (specfun.legendre_p(ell, x + step) - specfun.legendre_p(ell, x - step)) / (2 * step)
                self.assertAlmostEqual(specfun.legendre_d(ell, x), numeric, delta=1e-6 * max(1.0, abs(numeric)))

    def test_endpoint_derivatives(self):
        ell = 30
        lam = ell * (ell + 1)
        self.assertAlmostEqual(specfun.legendre_d(ell, 1.0), lam / 2, places=8)
        self.assertAlmostEqual(
            specfun.legendre_d(ell, 1.0, order=2), (ell - 1) * ell * (ell + 1) * (ell + 2) / 8, delta=1e-6
        )

    def test_legendre_equation(self):
        x = np.linspace(-0.95, 0.95, 19)
        ell = 40
        p = specfun.legendre_p(ell, x)
        dp = specfun.legendre_d(ell, x)
        d2p = specfun.legendre_d(ell, x, order=2)
        residual = (1 - x**2) * d2p - 2 * x * dp + ell * (ell + 1) * p
        self.assertLess(float(np.max(np.abs(residual))), 1e-7)

    def test_domain(self):
        with self.assertRaises(DomainError):
            specfun.legendre_d(1, 0.2, order=2)
        with self.assertRaises(DomainError):
            specfun.legendre_d(3, 0.2, order=3)


class JacobiTests(SimpleTestCase):
    def test_trivial_values(self):
        self.assertEqual(specfun.jacobi_p(0, 1, 0, 0.2), 1.0)
        self.assertAlmostEqual(specfun.jacobi_p(4, 1, 0, 1.0), 5.0, places=12)

    def test_matches_binomial_sum(self):
        for n in range(13):
            for alpha, beta in ((1, 0), (2, 1), (3, 2)):
                for x in (-0.9, -0.2, 0.3, 0.75):
                    expected = jacobi_by_binomial_sum(n, alpha, beta, x)
                    got = specfun.jacobi_p(n, alpha, beta, x)
                    self.assertAlmostEqual(got, expected, delta=1e-10 * max(1.0, abs(expected)))

    def test_reduces_to_legendre(self):
        x = np.linspace(-1.0, 1.0, 33)
        np.testing.assert_allclose(specfun.jacobi_p(300, 0, 0, x), specfun.legendre_p(300, x), atol=1e-12)

    def test_christoffel_darboux_sum(self):
        x = np.linspace(-1.0, 1.0, 57)
        for n in (10, 50, 200, 500):
            direct = sum((2 * ell + 1) * p for ell, p, _, _ in specfun.legendre_iter(n, x))
            closed = (n + 1) * specfun.jacobi_p(n, 1, 0, x)
            self.assertLessEqual(float(np.max(np.abs(direct - closed))), 1e-9 * (n + 1))

    def test_derivative_rule(self):
        step = 1e-6
        for n, a, b in ((6, 1, 0), (9, 2, 1)):
            for x in (-0.5, 0.1, 0.6):
                numeric = (specfun.jacobi_p(n, a, b, x + step) - specfun.jacobi_p(n, a, b, x - step)) / (2 * step)
                rule = (a + b + n + 1) / 2 * specfun.jacobi_p(n - 1, a + 1, b + 1, x)
                self.assertAlmostEqual(numeric, rule, delta=1e-6 * max(1.0, abs(rule)))

    def test_domain(self):
        with self.assertRaises(DomainError):
            specfun.jacobi_p(3, -1, 0, 0.1)
        with self.assertRaises(DomainError):
            specfun.jacobi_p(3, 1, 0, -1.1)


class AsymptoticFormTests(SimpleTestCase):
    def test_szego_closed_form(self):
        self.assertAlmostEqual(specfun.jacobi_asymptotic(1, 1, 0, math.pi / 2), math.sqrt(2 / math.pi), places=14)

    def test_szego_residual(self):
        n = 200
        theta = math.pi / 3
        gap = abs(specfun.jacobi_asymptotic(n, 1, 0, theta) - specfun.jacobi_p(n, 1, 0, math.cos(theta)))
        self.assertLessEqual(gap, 5 * n**-0.5)
        gap = abs(specfun.jacobi_asymptotic(100, 0, 0, math.pi / 2) - specfun.legendre_p(100, 0.0))
        self.assertLessEqual(gap, 5 * 100**-0.5)

    def test_szego_domain(self):
        with self.assertRaises(DomainError):
            specfun.jacobi_asymptotic(10, 1, 0, 0.0)
        with self.assertRaises(DomainError):
            specfun.jacobi_asymptotic(0, 1, 0, 1.0)

    def test_hilb_residual(self):
        ell, theta = 500, 0.5
        gap = abs(specfun.hilb_approx(ell, theta) - specfun.legendre_p(ell, math.cos(theta)))
        self.assertLessEqual(gap, 10 * theta**0.5 * ell**-1.5)
        theta = np.linspace(0.1, 1.2, 12)
        gap = np.abs(specfun.hilb_approx(200, theta) - specfun.legendre_p(200, np.cos(theta)))
        self.assertLess(float(np.max(gap)), 1e-3)

    def test_hilb_at_origin(self):
        self.assertAlmostEqual(specfun.hilb_approx(10, 0.0), 1.0, places=14)
        self.assertAlmostEqual(specfun.hilb_approx(10, 1e-9), 1.0, places=12)

    def test_hilb_domain(self):
        with self.assertRaises(DomainError):
            specfun.hilb_approx(0, 0.2)
        with self.assertRaises(DomainError):
            specfun.hilb_approx(5, 2.0)


class BesselHermiteTests(SimpleTestCase):
    def test_bessel_values(self):
        self.assertEqual(specfun.bessel_j(0, 0.0), 1.0)
        self.assertEqual(specfun.bessel_j(1, 0.0), 0.0)
        self.assertLess(abs(specfun.bessel_j(0, 2.404825557695773)), 1e-9)
        self.assertAlmostEqual(specfun.bessel_j(1, 1.0), 0.4400505857449335, places=14)

    def test_bessel_domain(self):
        with self.assertRaises(DomainError):
            specfun.bessel_j(0, -1.0)
        with self.assertRaises(DomainError):
            specfun.bessel_j(2, 1.0)

    def test_hermite_values(self):
        self.assertEqual(specfun.hermite_h(0, 0.3), 1.0)
        self.assertEqual(specfun.hermite_h(2, 0.0), -1.0)
        self.assertEqual(specfun.hermite_h(4, 1.0), -2.0)

    def test_hermite_recurrence(self):
        x = 0.7
        previous, current = 1.0, x
        for q in range(1, 6):
            previous, current = current, x * current - q * previous
        self.assertAlmostEqual(specfun.hermite_h(6, x), current, places=12)
        explicit = x**6 - 15 * x**4 + 45 * x**2 - 15
        self.assertAlmostEqual(specfun.hermite_h(6, x), explicit, places=12)

    def test_hermite_domain(self):
        with self.assertRaises(DomainError):
            specfun.hermite_h(-2, 0.3)
