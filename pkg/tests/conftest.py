"""Shared benchmark problem builders."""

from __future__ import annotations

import pytest

from sbarrier.model import SafetyProblem, SemialgebraicSet, StochasticSystem
from sbarrier.poly import parse_polynomial


def linear1d(sigma: float, x0=(0.0,), gamma=None) -> SafetyProblem:
    """1-D benchmark: dx = (-x + u) dt + sigma dw on X = [-2, 2]."""
    pp = lambda s: parse_polynomial(s, 1)
    system = StochasticSystem(
        n=1,
        m=1,
        k=1,
        f=(pp("-x1"),),
        g=((pp("1"),),),
        sigma=((pp(repr(float(sigma))),),),
    )
    return SafetyProblem(
        system=system,
        X=SemialgebraicSet(1, (pp("4 - x1^2"),), "X"),
        X0=SemialgebraicSet(1, (pp("0.04 - x1^2"),), "X0"),
        Xu=SemialgebraicSet(1, (pp("x1^2 - 1"),), "Xu"),
        T=1.0,
        box=((-2.0, 2.0),),
        x0=x0,
        gamma=gamma,
    )


def cubic2d(sigma: float, x0=(-2.0, 0.0), gamma=None) -> SafetyProblem:
    """2-D benchmark: dx1 = x2 dt, dx2 = (-x1 - x2 - 0.5 x1^3 + u) dt + sigma dw."""
    pp = lambda s: parse_polynomial(s, 2)
    system = StochasticSystem(
        n=2,
        m=1,
        k=1,
        f=(pp("x2"), pp("-x1 - x2 - 0.5*x1^3")),
        g=((pp("0"),), (pp("1"),)),
        sigma=((pp("0"),), (pp(repr(float(sigma))),)),
    )
    return SafetyProblem(
        system=system,
        X=SemialgebraicSet(
            2, (pp("x1 + 3"), pp("2 - x1"), pp("x2 + 2"), pp("3 - x2")), "X"
        ),
        X0=SemialgebraicSet(2, (pp("0.01 - (x1 + 2)^2 - x2^2"),), "X0"),
        Xu=SemialgebraicSet(2, (pp("x2 - 2.25"),), "Xu"),
        T=2.0,
        box=((-3.0, 2.0), (-2.0, 3.0)),
        x0=x0,
        gamma=gamma,
    )


@pytest.fixture(scope="session")
def linear1d_sigma1() -> SafetyProblem:
    return linear1d(1.0)


@pytest.fixture(scope="session")
def cubic2d_sigma1() -> SafetyProblem:
    return cubic2d(1.0)
