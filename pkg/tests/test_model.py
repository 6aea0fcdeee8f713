import numpy as np
import pytest
import sympy

from sbarrier.model import (
    SafetyProblem,
    SemialgebraicSet,
    StochasticSystem,
    generator,
    halton_points,
    validate_problem,
)
from sbarrier.poly import (
    AffineExpr,
    BilinearProduct,
    ParametricPolynomial,
    parse_polynomial,
)

from .conftest import cubic2d, linear1d

P = ParametricPolynomial


def to_sympy(p: ParametricPolynomial, xs):
    expr = sympy.Integer(0)
    for exps, coeff in p.terms.items():
        term = sympy.Float(coeff.const, 30)
        for x, e in zip(xs, exps):
            term *= x**e
        expr += term
    return expr


def sympy_generator(B, system, u=None):
    """Independent computer-algebra evaluation of the generator."""
    xs = sympy.symbols(f"x1:{system.n + 1}")
    F = []
    for i in range(system.n):
        Fi = to_sympy(system.f[i], xs)
        if u is not None:
            for c in range(system.k):
                Fi += to_sympy(system.g[i][c], xs) * to_sympy(u[c], xs)
        F.append(Fi)
    Bs = to_sympy(B, xs)
    out = sum(F[i] * sympy.diff(Bs, xs[i]) for i in range(system.n))
    for i in range(system.n):
        for j in range(system.n):
            a_ij = sum(
                to_sympy(system.sigma[i][l], xs) * to_sympy(system.sigma[j][l], xs)
                for l in range(system.m)
            )
            out += sympy.Rational(1, 2) * a_ij * sympy.diff(Bs, xs[i], xs[j])
    return sympy.expand(out), xs


def assert_matches_sympy(result, expr, xs, n):
    poly = sympy.Poly(expr, *xs)
    expected = {
        tuple(int(e) for e in monom): float(coeff)
        for monom, coeff in zip(poly.monoms(), poly.coeffs())
    }
    got = {e: c.const for e, c in result.terms.items()}
    keys = set(expected) | set(got)
    for key in keys:
        assert got.get(key, 0.0) == pytest.approx(expected.get(key, 0.0), abs=1e-9)


class TestStochasticSystem:
    def test_shape_validation(self):
        pp = lambda s: parse_polynomial(s, 1)
        with pytest.raises(ValueError):
            StochasticSystem(1, 1, 1, (), ((pp("1"),),), ((pp("1"),),))
        with pytest.raises(ValueError):
            StochasticSystem(1, 2, 1, (pp("-x1"),), ((pp("1"),),), ((pp("1"),),))

    def test_decision_variables_rejected(self):
        bad = P(1, {(0,): AffineExpr.variable(0)})
        pp = lambda s: parse_polynomial(s, 1)
        with pytest.raises(ValueError):
            StochasticSystem(1, 1, 1, (bad,), ((pp("1"),),), ((pp("1"),),))

    def test_scaled_noise(self):
        problem = linear1d(1.0)
        scaled = problem.system.scaled_noise(0.5)
        assert scaled.sigma[0][0].evaluate([0.3]) == pytest.approx(0.5)


class TestGenerator:
    def test_quadratic_linear_drift(self):
        problem = linear1d(1.5)
        B = parse_polynomial("x1^2", 1)
        result = generator(B, problem.system, None)
        assert result.allclose(P(1, {(2,): -2.0, (0,): 2.25}), 1e-12)

    def test_constant_barrier_vanishes(self):
        problem = cubic2d(1.0)
        B = P.constant(2, 7.5)
        assert generator(B, problem.system, None).is_zero()

    def test_cubic_system_hand_value(self):
        problem = cubic2d(0.8)
        B = parse_polynomial("x1^2 + x2^2", 2)
        result = generator(B, problem.system, None)
        assert result.allclose(
            P(2, {(0, 2): -2.0, (3, 1): -1.0, (0, 0): 0.64}), 1e-12
        )

    def test_against_computer_algebra(self):
        rng = np.random.default_rng(21)
        problem = cubic2d(0.7)
        for _ in range(5):
            terms = {}
            for e1 in range(4):
                for e2 in range(4 - e1):
                    if rng.random() < 0.5:
                        terms[(e1, e2)] = float(rng.uniform(-2, 2))
            B = P(2, terms)
            result = generator(B, problem.system, None)
            expr, xs = sympy_generator(B, problem.system)
            if result.is_zero() and expr == 0:
                continue
            assert_matches_sympy(result, expr, xs, 2)

    def test_with_controller_against_computer_algebra(self):
        problem = cubic2d(1.0)
        B = parse_polynomial("x1^4 + x1*x2 + x2^2", 2)
        u = (parse_polynomial("-0.5*x1 - x2^2", 2),)
        result = generator(B, problem.system, u)
        expr, xs = sympy_generator(B, problem.system, u)
        assert_matches_sympy(result, expr, xs, 2)

    def test_linearity_in_barrier(self):
        rng = np.random.default_rng(2)
        problem = cubic2d(1.0)
        for _ in range(5):
            terms1 = {(int(rng.integers(0, 3)), int(rng.integers(0, 3))): 1.5}
            terms2 = {(int(rng.integers(0, 3)), int(rng.integers(0, 3))): -0.7}
            B1, B2 = P(2, terms1), P(2, terms2)
            a, b = float(rng.uniform(-2, 2)), float(rng.uniform(-2, 2))
            lhs = generator(B1.scale(a).add(B2.scale(b)), problem.system, None)
            rhs = generator(B1, problem.system, None).scale(a).add(
                generator(B2, problem.system, None).scale(b)
            )
            assert lhs.allclose(rhs, 1e-10)

    def test_zero_noise_is_lie_derivative(self):
        problem = cubic2d(0.0)
        B = parse_polynomial("x1^4 + x2^2 - x1*x2", 2)
        result = generator(B, problem.system, None)
        lie = P.zero(2)
        for i in range(2):
            lie = lie.add(problem.system.f[i].multiply(B.differentiate(i)))
        assert result.allclose(lie, 1e-12)

    def test_bilinear_guard(self):
        problem = linear1d(1.0)
        B = P(1, {(2,): AffineExpr.variable(0)})
        u = (P(1, {(1,): AffineExpr.variable(1)}),)
        with pytest.raises(BilinearProduct):
            generator(B, problem.system, u)


class TestSafetyProblem:
    def test_x0_must_satisfy_initial_set(self):
        with pytest.raises(ValueError, match="x0"):
            linear1d(1.0, x0=(0.5,))

    def test_boundary_x0_allowed(self):
        problem = linear1d(1.0, x0=(0.2,))
        assert problem.x0 == (0.2,)

    def test_gamma_range(self):
        with pytest.raises(ValueError, match="gamma"):
            linear1d(1.0, gamma=1.0)

    def test_horizon_positive(self):
        good = linear1d(1.0)
        with pytest.raises(ValueError):
            SafetyProblem(
                good.system, good.X, good.X0, good.Xu, T=0.0, box=good.box, x0=good.x0
            )


class TestValidateProblem:
    def test_benchmark_sets_clean(self):
        assert validate_problem(linear1d(1.0)) == []

    def test_overlapping_initial_and_unsafe(self):
        base = linear1d(1.0, x0=None)
        bad = SafetyProblem(
            system=base.system,
            X=base.X,
            X0=base.Xu,
            Xu=base.Xu,
            T=1.0,
            box=base.box,
        )
        warnings = validate_problem(bad)
        assert any("both the initial and unsafe" in w for w in warnings)

    def test_unsafe_set_disjoint_from_state_space(self):
        pp = lambda s: parse_polynomial(s, 1)
        base = linear1d(1.0)
        bad = SafetyProblem(
            system=base.system,
            X=base.X,
            X0=base.X0,
            Xu=SemialgebraicSet(1, (pp("x1 - 3"),), "Xu"),
            T=1.0,
            box=base.box,
            x0=(0.0,),
        )
        warnings = validate_problem(bad)
        assert any("may be empty" in w for w in warnings)


class TestHalton:
    def test_deterministic_and_in_box(self):
        box = ((-2.0, 2.0), (0.0, 1.0))
        a = halton_points(box, 64)
        b = halton_points(box, 64)
        assert np.array_equal(a, b)
        assert np.all(a[:, 0] >= -2) and np.all(a[:, 0] <= 2)
        assert np.all(a[:, 1] >= 0) and np.all(a[:, 1] <= 1)

    def test_prefix_property(self):
        box = ((-1.0, 1.0),)
        small = halton_points(box, 100)
        large = halton_points(box, 400)
        assert np.allclose(small, large[:100])
