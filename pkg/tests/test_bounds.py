"""Bound-matrix assembly and certification tests.

Oracles: Gaussian double-factorial moments, Poisson/Binomial brute-force
summation written directly in the tests, and scalar reductions of the
matrix statements.
"""

import math

import numpy as np
import pytest

from varbounds import (FunctionTuple, catalog, jacobi_eigenvalues,
                       parse_function, polynomial)
from varbounds.bounds import (bessel_coefficient, bound_report, check_class,
                              dispersion_matrix, matrix_A, matrix_B, matrix_H,
                              matrix_L, matrix_S, poincare_coefficient,
                              q_power_expectation)
from varbounds.errors import ClassMembershipError, SingularCoefficientError
from tests.conftest import make_bernoulli_member


def tuple_of(*exprs):
    return FunctionTuple([parse_function(e) for e in exprs])


def poisson_brute(lam, phi, upto=200):
    """Direct summation oracle, independent of the expectation engine."""
    total, logp = 0.0, -lam
    for k in range(upto):
        p = math.exp(-lam + k * math.log(lam) - math.lgamma(k + 1))
        total += p * phi(k)
    return total


class TestDispersion:
    def test_normal_pair(self, cfg):
        d = dispersion_matrix(catalog("normal"), tuple_of("x", "x^2"), cfg)
        np.testing.assert_allclose(d.to_array(), [[1.0, 0.0], [0.0, 2.0]],
                                   atol=1e-10)

    def test_constant_function(self, cfg):
        d = dispersion_matrix(catalog("normal"), tuple_of("3"), cfg)
        assert abs(d[0, 0]) < 1e-14

    def test_poisson_identity(self, cfg):
        lam = 2.5
        d = dispersion_matrix(catalog("poisson", {"lam": lam}),
                              tuple_of("x"), cfg)
        assert d[0, 0] == pytest.approx(lam, abs=1e-10)


class TestMatrixH:
    def test_normal_first_order(self, cfg):
        h = matrix_H(catalog("normal"), tuple_of("x", "x^2"), 1, cfg)
        np.testing.assert_allclose(h.to_array(), [[1.0, 0.0], [0.0, 4.0]],
                                   atol=1e-10)

    def test_poisson_scaling(self, cfg):
        # with constant quadratic lam, the order-k matrix is lam^k times the
        # plain difference Gram matrix
        lam = 2.0
        spec = catalog("poisson", {"lam": lam})
        g = tuple_of("x^2", "exp(-0.25*x)")
        h1 = matrix_H(spec, g, 1, cfg).to_array()
        oracle = np.empty((2, 2))
        funcs = [lambda k: k**2, lambda k: math.exp(-0.25 * k)]
        for i in range(2):
            for j in range(2):
                oracle[i, j] = lam * poisson_brute(
                    lam, lambda k, a=funcs[i], b=funcs[j]:
                        (a(k + 1) - a(k)) * (b(k + 1) - b(k)))
        np.testing.assert_allclose(h1, oracle, atol=1e-10)

    def test_vanishes_beyond_degree(self, cfg):
        h = matrix_H(catalog("normal"), tuple_of("x", "1 + 2*x"), 2, cfg)
        assert h.max_abs() < 1e-12
        hd = matrix_H(catalog("poisson", {"lam": 1}),
                      tuple_of("x", "1 + 2*x"), 2, cfg)
        assert hd.max_abs() < 1e-12

    def test_psd_within_tolerance(self, cfg):
        for spec in (catalog("normal"), catalog("gamma", {"shape": 2}),
                     catalog("poisson", {"lam": 3})):
            g = tuple_of("x", "x^2", "x^3")
            for k in (1, 2):
                h = matrix_H(spec, g, k, cfg)
                assert jacobi_eigenvalues(h)[0] >= -1e-10 * (1 + h.max_abs())


class TestMatrixB:
    def test_normal_second_order(self, cfg):
        b = matrix_B(catalog("normal"), tuple_of("x^2"), 2, cfg)
        assert b[0, 0] == pytest.approx(4.0, abs=1e-10)

    def test_poisson_scaling(self, cfg):
        lam = 1.5
        spec = catalog("poisson", {"lam": lam})
        b = matrix_B(spec, tuple_of("x^2", "x^3"), 1, cfg).to_array()
        d1 = poisson_brute(lam, lambda k: 2 * k + 1)
        d2 = poisson_brute(lam, lambda k: 3 * k**2 + 3 * k + 1)
        v = lam * np.array([d1, d2])
        np.testing.assert_allclose(b, np.outer(v, v), rtol=1e-10)

    def test_odd_symmetry_vanishes(self, cfg):
        # E[g''] = E[6 Z] = 0 for the odd cubic about the Normal mean
        b = matrix_B(catalog("normal"), tuple_of("x^3"), 2, cfg)
        assert b.max_abs() < 1e-12

    def test_exactly_rank_one_psd(self, cfg):
        b = matrix_B(catalog("gamma", {"shape": 2.5}),
                     tuple_of("x", "x^2", "sin(x)"), 1, cfg)
        vals = jacobi_eigenvalues(b)
        assert vals[0] >= -1e-13 * (1 + b.max_abs())
        assert np.all(np.abs(vals[:-1]) <= 1e-12 * (1 + b.max_abs()))


class TestCoefficients:
    def test_poincare_normal_values(self):
        assert poincare_coefficient(0.0, 1) == pytest.approx(1.0)
        assert poincare_coefficient(0.0, 2) == pytest.approx(-0.5)
        assert poincare_coefficient(0.0, 3) == pytest.approx(1.0 / 6.0)

    def test_poincare_singular(self):
        with pytest.raises(SingularCoefficientError) as err:
            poincare_coefficient(1.0, 2)
        assert err.value.j == 1

    def test_poincare_guard_near_zero(self):
        with pytest.raises(SingularCoefficientError):
            poincare_coefficient(0.5 + 1e-12, 3)  # factor 1 - 2*delta ~ 0

    def test_bessel_normal(self, cfg):
        spec = catalog("normal")
        for k in (1, 2, 3):
            assert bessel_coefficient(spec, k, cfg) == pytest.approx(
                1.0 / math.factorial(k), rel=1e-9)

    def test_bessel_poisson(self, cfg):
        lam = 2.0
        spec = catalog("poisson", {"lam": lam})
        for k in (1, 2, 3):
            # E[q^[k]] = lam^k, verified against brute-force summation
            eq = q_power_expectation(spec, k, cfg).value
            assert eq == pytest.approx(lam**k, rel=1e-10)
            assert bessel_coefficient(spec, k, cfg) == pytest.approx(
                1.0 / (math.factorial(k) * lam**k), rel=1e-9)

    def test_bessel_null_term(self, cfg, bernoulli_member):
        assert bessel_coefficient(bernoulli_member, 2, cfg) is None

    def test_bessel_singular_factor(self, cfg):
        # delta = 0.5: the order-2 product contains (1 - 2*0.5) = 0
        from tests.conftest import make_heavy_member
        spec = make_heavy_member(delta=0.5)
        assert bessel_coefficient(spec, 1, cfg) is not None
        with pytest.raises(SingularCoefficientError) as err:
            bessel_coefficient(spec, 2, cfg)
        assert err.value.j == 2


class TestWeightedSums:
    def test_normal_chain_scalars(self, cfg):
        spec = catalog("normal")
        g = tuple_of("x^3")
        assert matrix_S(spec, g, 1, cfg)[0, 0] == pytest.approx(27.0, abs=1e-8)
        assert matrix_S(spec, g, 2, cfg)[0, 0] == pytest.approx(9.0, abs=1e-8)
        assert matrix_S(spec, g, 3, cfg)[0, 0] == pytest.approx(15.0, abs=1e-8)
        assert matrix_A(spec, g, 3, cfg).max_abs() < 1e-8

    def test_first_order_reduction(self, cfg):
        spec = catalog("normal")
        g = tuple_of("x", "x^2")
        s1 = matrix_S(spec, g, 1, cfg)
        h1 = matrix_H(spec, g, 1, cfg)
        np.testing.assert_allclose(s1.to_array(), h1.to_array(), atol=1e-12)
        a1 = matrix_A(spec, g, 1, cfg)
        np.testing.assert_allclose(a1.to_array(), [[0.0, 0.0], [0.0, 2.0]],
                                   atol=1e-9)

    def test_bessel_equality_case(self, cfg):
        l2 = matrix_L(catalog("normal"), tuple_of("x^2"), 2, cfg)
        assert l2[0, 0] == pytest.approx(2.0, abs=1e-9)


class TestClassChecks:
    def test_polynomial_against_gaussian(self, cfg):
        report = check_class(catalog("normal"), tuple_of("x^3"), 3, "H", cfg)
        assert report.ok
        assert report.implies_other  # finite 2n-th moment: H subset of B

    def test_heavy_tail_high_degree_fails(self, cfg, heavy_member):
        # for polynomials the weight degree 2d is constant in k: x^2 stays
        # below the 4.33 tail index at every order, x^3 exceeds it everywhere
        ok = check_class(heavy_member, tuple_of("x^2"), 1, "H", cfg)
        assert ok.ok
        bad = check_class(heavy_member, tuple_of("x^3"), 1, "H", cfg)
        assert not bad.ok
        assert (0, 0) in bad.failures()

    def test_failure_at_the_divergent_order(self, cfg):
        # logit against Beta(0.5, 0.5): the square is integrable but the
        # weighted derivative is not, so the failure sits exactly at k=1
        spec = catalog("beta", {"a": 0.5, "b": 0.5})
        report = check_class(spec, tuple_of("log(x) - log(1-x)"), 1, "H", cfg)
        assert report.verdicts[0][0]
        assert not report.verdicts[0][1]
        assert report.failures() == [(0, 1)]

    def test_h_implies_b_on_catalog(self, cfg):
        g = tuple_of("x", "x^2", "exp(0.4*x)")
        for spec in (catalog("normal"), catalog("gamma", {"shape": 3})):
            h_rep = check_class(spec, g, 2, "H", cfg)
            b_rep = check_class(spec, g, 2, "B", cfg)
            if h_rep.ok:
                assert h_rep.implies_other
                assert b_rep.ok

    def test_divergent_exponential_discrete(self, cfg):
        spec = catalog("negative-binomial", {"r": 2, "theta": 0.4})
        report = check_class(spec, tuple_of("exp(x)"), 1, "H", cfg)
        assert not report.ok


class TestBoundReport:
    def test_full_run_normal(self, cfg):
        g = tuple_of("x", "x^2", "exp(0.5*x)", "sin(x)")
        report = bound_report(catalog("normal"), g, 1, cfg)
        assert report.passed
        assert report.verdicts["poincare"].ok
        assert report.verdicts["bessel"].ok
        assert report.p == 4
        doc = report.to_json_dict()
        assert doc["verdicts"]["poincare"]["pass"]
        assert len(doc["H"]) == 1 and len(doc["B"]) == 1

    def test_moment_gate(self, cfg, heavy_member):
        with pytest.raises(ClassMembershipError):
            bound_report(heavy_member, tuple_of("x"), 3, cfg)

    def test_class_gate_raises(self, cfg):
        spec = catalog("gamma", {"shape": 2, "scale": 2})
        with pytest.raises(ClassMembershipError):
            bound_report(spec, tuple_of("exp(x)"), 1, cfg)

    def test_class_gate_drop(self, cfg):
        spec = catalog("beta", {"a": 0.5, "b": 0.5})
        g = tuple_of("x", "x^2", "log(x) - log(1-x)")
        report = bound_report(spec, g, 1, cfg, class_policy="drop")
        assert report.p == 2
        assert report.provenance["dropped_functions"] == [2]
        assert report.passed

    def test_null_term_records(self, cfg, bernoulli_member):
        g = tuple_of("x^2", "exp(-0.5*x)")
        report = bound_report(bernoulli_member, g, 2, cfg)
        assert 2 in report.provenance["null_terms"]
        assert report.bessel_weights[1].null
        assert report.B[1].max_abs() == 0.0
        assert report.passed

    def test_eigen_rows(self, cfg):
        report = bound_report(catalog("normal"), tuple_of("x", "x^2"), 1, cfg)
        rows = report.eigen_rows()
        names = {r[1] for r in rows}
        assert {"D", "S", "L", "A", "H1", "B1", "D-L"} <= names


class TestInvariants:
    def test_sandwich_chain(self, cfg):
        """Odd orders bound D from above, even orders from below."""
        g = tuple_of("x^2", "exp(0.3*x)")
        spec = catalog("normal")
        d = dispersion_matrix(spec, g, cfg)
        tol = 1e-6 * (1 + max(abs(jacobi_eigenvalues(d))))
        for n in (1, 2, 3):
            s = matrix_S(spec, g, n, cfg)
            diff = (s - d) if n % 2 else (d - s)
            assert jacobi_eigenvalues(diff)[0] >= -tol, n

    def test_bessel_monotonicity(self, cfg):
        g = tuple_of("x^2", "sin(x)")
        spec = catalog("normal")
        prev = None
        for n in (1, 2, 3, 4):
            ln = matrix_L(spec, g, n, cfg)
            if prev is not None:
                gap = ln - prev
                assert jacobi_eigenvalues(gap)[0] >= -1e-10
            prev = ln

    def test_polynomial_equality_certificates(self, cfg):
        rng = np.random.default_rng(17)
        for spec in (catalog("normal"), catalog("poisson", {"lam": 2})):
            for n in (1, 2, 3):
                g = FunctionTuple([polynomial(rng.normal(size=n + 1))
                                   for _ in range(2)])
                d = dispersion_matrix(spec, g, cfg)
                tol = 1e-6 * (1 + max(abs(jacobi_eigenvalues(d))))
                a = matrix_A(spec, g, n, cfg)
                assert a.max_abs() <= tol
                l = matrix_L(spec, g, n, cfg)
                assert (d - l).max_abs() <= tol

    def test_scalar_reduction_p1(self, cfg):
        """1x1 verdicts match the scalar inequality computed by hand."""
        lam = 2.0
        spec = catalog("poisson", {"lam": lam})
        g = tuple_of("exp(-0.5*x)")
        var = poisson_brute(lam, lambda k: math.exp(-k)) \
            - poisson_brute(lam, lambda k: math.exp(-0.5 * k)) ** 2
        d = dispersion_matrix(spec, g, cfg)
        assert d[0, 0] == pytest.approx(var, abs=1e-10)
        s1 = matrix_S(spec, g, 1, cfg)[0, 0]
        h_scalar = lam * poisson_brute(
            lam, lambda k: (math.exp(-0.5 * (k + 1)) - math.exp(-0.5 * k))**2)
        assert s1 == pytest.approx(h_scalar, abs=1e-10)
        assert var <= s1 + 1e-10  # the scalar upper bound itself

    def test_random_quadratic_forms(self, cfg):
        """c^t A c >= -tol ||c||^2 for random directions (the proofs'
        reduction to scalars)."""
        rng = np.random.default_rng(23)
        spec = catalog("gamma", {"shape": 3, "scale": 1.5})
        g = tuple_of("x", "x^2", "sin(0.5*x)")
        report = bound_report(spec, g, 2, cfg)
        a = report.A
        dl = report.D - report.L
        tol = report.tol
        for _ in range(100):
            c = rng.normal(size=3)
            nsq = float(c @ c)
            assert a.quadratic_form(c) >= -tol * nsq
            assert dl.quadratic_form(c) >= -tol * nsq
