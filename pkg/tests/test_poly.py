import math

import numpy as np
import pytest

from sbarrier.poly import (
    AffineExpr,
    BilinearProduct,
    MissingAssignment,
    ParametricPolynomial,
    PolyParseError,
    axis_scaled,
    format_polynomial,
    monomial_basis,
    parse_polynomial,
)

P = ParametricPolynomial


def brute_force_exponents(n, d):
    """Independent enumeration of exponent tuples with sum <= d."""
    out = []

    def rec(prefix, remaining):
        if len(prefix) == n:
            if sum(prefix) <= d:
                out.append(tuple(prefix))
            return
        for e in range(d + 1):
            rec(prefix + [e], remaining)

    rec([], n)
    return set(out)


class TestMonomialBasis:
    def test_n2_d2_contents_and_order(self):
        basis = monomial_basis(2, 2)
        assert basis == [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]
        assert len(basis) == math.comb(4, 2)

    def test_constant_only(self):
        assert monomial_basis(1, 0) == [(0,)]

    def test_n3_d4_against_brute_force(self):
        basis = monomial_basis(3, 4)
        assert len(basis) == 35
        assert set(basis) == brute_force_exponents(3, 4)

    def test_counts_are_binomial(self):
        for n in range(1, 5):
            for d in range(0, 7):
                assert len(monomial_basis(n, d)) == math.comb(n + d, d)

    def test_deterministic(self):
        assert monomial_basis(3, 5) == monomial_basis(3, 5)

    def test_graded_then_lex(self):
        basis = monomial_basis(2, 3)
        degrees = [sum(e) for e in basis]
        assert degrees == sorted(degrees)


class TestArithmetic:
    def test_difference_of_squares(self):
        x = P.variable(1, 0)
        one = P.constant(1, 1.0)
        prod = x.add(one).multiply(x.sub(one))
        assert prod == P(1, {(2,): 1.0, (0,): -1.0})

    def test_multiply_by_zero(self):
        p = parse_polynomial("1 + 2*x1 + 3*x1^2", 1)
        assert p.multiply(P.zero(1)).is_zero()

    def test_binomial_expansion(self):
        s = parse_polynomial("x1 + x2", 2)
        sq = s.multiply(s)
        assert sq == P(2, {(2, 0): 1.0, (1, 1): 2.0, (0, 2): 1.0})

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            P.variable(1, 0).add(P.variable(2, 0))

    def test_bilinear_product_rejected(self):
        p = P(1, {(1,): AffineExpr.variable(0)})
        q = P(1, {(0,): AffineExpr.variable(1)})
        with pytest.raises(BilinearProduct):
            p.multiply(q)

    def test_decision_times_concrete_allowed(self):
        p = P(1, {(1,): AffineExpr.variable(0)})
        q = parse_polynomial("2*x1", 1)
        prod = p.multiply(q)
        assert prod.coefficient((2,)) == AffineExpr.variable(0, 2.0)

    def test_prune_threshold(self):
        p = P(1, {(0,): 1e-20})
        assert p.is_zero()
        q = P(1, {(0,): 1e-20}, tol=0.0)
        assert not q.is_zero()


class TestRingAxioms:
    def random_poly(self, rng, n, degree):
        terms = {}
        for exps in monomial_basis(n, degree):
            if rng.random() < 0.4:
                terms[exps] = rng.uniform(-3, 3)
        return P(n, terms)

    def test_ring_axioms_random(self):
        rng = np.random.default_rng(7)
        for _ in range(25):
            n = int(rng.integers(1, 5))
            a = self.random_poly(rng, n, int(rng.integers(0, 4)))
            b = self.random_poly(rng, n, int(rng.integers(0, 4)))
            c = self.random_poly(rng, n, int(rng.integers(0, 3)))
            assert a.add(b).allclose(b.add(a), 1e-12)
            assert a.multiply(b).allclose(b.multiply(a), 1e-12)
            assert a.multiply(b).multiply(c).allclose(
                a.multiply(b.multiply(c)), 1e-9
            )
            assert a.multiply(b.add(c)).allclose(
                a.multiply(b).add(a.multiply(c)), 1e-9
            )

    def test_evaluate_respects_product(self):
        rng = np.random.default_rng(11)
        for _ in range(25):
            n = int(rng.integers(1, 4))
            a = self.random_poly(rng, n, 3)
            b = self.random_poly(rng, n, 3)
            x = rng.uniform(-2, 2, size=n)
            lhs = a.multiply(b).evaluate(x)
            rhs = a.evaluate(x) * b.evaluate(x)
            assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)


class TestDifferentiate:
    def test_power_rule(self):
        p = P.monomial(1, (4,))
        assert p.differentiate(0) == P(1, {(3,): 4.0})

    def test_independent_variable(self):
        p = P.monomial(2, (2, 0))
        assert p.differentiate(1).is_zero()

    def test_second_derivative(self):
        p = parse_polynomial("x1^2 + 3*x1", 1)
        assert p.differentiate(0).differentiate(0) == P.constant(1, 2.0)

    def test_matches_central_finite_difference(self):
        rng = np.random.default_rng(3)
        ring = TestRingAxioms()
        for _ in range(20):
            n = int(rng.integers(1, 4))
            p = ring.random_poly(rng, n, 4)
            i = int(rng.integers(0, n))
            x = rng.uniform(-1.5, 1.5, size=n)
            h = 1e-5
            xp, xm = x.copy(), x.copy()
            xp[i] += h
            xm[i] -= h
            fd = (p.evaluate(xp) - p.evaluate(xm)) / (2 * h)
            exact = p.differentiate(i).evaluate(x)
            assert fd == pytest.approx(exact, rel=1e-6, abs=1e-6)


class TestEvaluate:
    def test_concrete(self):
        p = parse_polynomial("x1^2 - 1", 1)
        assert p.evaluate([2.0]) == pytest.approx(3.0)

    def test_linear_in_assignment(self):
        p = P(1, {(1,): AffineExpr.variable(5)})
        assert p.evaluate([4.0], {5: 0.5}) == pytest.approx(2.0)
        assert p.evaluate([4.0], {5: 1.0}) == pytest.approx(4.0)

    def test_pythagorean_point(self):
        p = parse_polynomial("x1^2 + x2^2", 2)
        assert p.evaluate([3.0, 4.0]) == pytest.approx(25.0)

    def test_missing_assignment(self):
        p = P(1, {(1,): AffineExpr.variable(0)})
        with pytest.raises(MissingAssignment):
            p.evaluate([1.0])

    def test_substitute(self):
        p = P(1, {(1,): AffineExpr.variable(0), (0,): AffineExpr(1.0, {1: 2.0})})
        q = p.substitute({0: 3.0, 1: -0.5})
        assert q.is_concrete()
        assert q.evaluate([2.0]) == pytest.approx(6.0)

    def test_evaluate_batch_matches_pointwise(self):
        rng = np.random.default_rng(5)
        p = parse_polynomial("1 - 2*x1 + x2^3 - 0.25*x1^2*x2", 2)
        pts = rng.uniform(-2, 2, size=(50, 2))
        batch = p.evaluate_batch(pts)
        for row, val in zip(pts, batch):
            assert val == pytest.approx(p.evaluate(row), rel=1e-12, abs=1e-12)

    def test_evaluate_affine(self):
        p = P(1, {(1,): AffineExpr.variable(0), (0,): AffineExpr(2.0)})
        expr = p.evaluate_affine([3.0])
        assert expr.const == pytest.approx(2.0)
        assert expr.lin == {0: pytest.approx(3.0)}


class TestAxisScaling:
    def test_scaled_evaluation(self):
        rng = np.random.default_rng(9)
        p = parse_polynomial("1 + x1 - 0.5*x1^3 + x2^2", 2)
        scales = (2.0, 0.5)
        q = axis_scaled(p, scales)
        for _ in range(10):
            y = rng.uniform(-1, 1, size=2)
            assert q.evaluate(y) == pytest.approx(
                p.evaluate([s * v for s, v in zip(scales, y)]), rel=1e-12
            )

    def test_round_trip(self):
        p = parse_polynomial("3 - x1^4 + 2*x1", 1)
        back = axis_scaled(axis_scaled(p, (3.0,)), (1 / 3.0,))
        assert back.allclose(p, 1e-12)


class TestParser:
    def test_benchmark_drift(self):
        p = parse_polynomial("-x1 - x2 - 0.5*x1^3", 2)
        assert p == P(2, {(1, 0): -1.0, (0, 1): -1.0, (3, 0): -0.5})

    def test_parentheses_and_powers(self):
        p = parse_polynomial("0.01 - (x1 + 2)^2 - x2^2", 2)
        assert p == P(2, {(0, 0): -3.99, (1, 0): -4.0, (2, 0): -1.0, (0, 2): -1.0})

    def test_scientific_literal(self):
        p = parse_polynomial("1.5e-2*x1", 1)
        assert p.coefficient((1,)).const == pytest.approx(0.015)

    def test_unary_signs(self):
        assert parse_polynomial("--x1", 1) == P.variable(1, 0)
        assert parse_polynomial("-+x1", 1) == P.variable(1, 0).scale(-1.0)

    def test_implicit_multiplication_rejected(self):
        with pytest.raises(PolyParseError):
            parse_polynomial("2x1", 1)

    def test_variable_out_of_range(self):
        with pytest.raises(PolyParseError, match="x3"):
            parse_polynomial("x3", 2)

    def test_exponent_must_be_integer(self):
        with pytest.raises(PolyParseError):
            parse_polynomial("x1^2.5", 1)
        with pytest.raises(PolyParseError):
            parse_polynomial("x1^-2", 1)

    def test_unbalanced_parenthesis(self):
        with pytest.raises(PolyParseError):
            parse_polynomial("(x1 + 1", 1)

    def test_error_carries_position(self):
        with pytest.raises(PolyParseError) as info:
            parse_polynomial("x1 + $", 1)
        assert info.value.position == 5

    def test_format_round_trip(self):
        rng = np.random.default_rng(13)
        ring = TestRingAxioms()
        for _ in range(15):
            n = int(rng.integers(1, 4))
            p = ring.random_poly(rng, n, 4)
            assert parse_polynomial(format_polynomial(p), n).allclose(p, 1e-12)
