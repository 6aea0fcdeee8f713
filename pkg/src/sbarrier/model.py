"""Controlled stochastic system, semialgebraic sets, and the generator operator.

The system is  dx = (f(x) + g(x) u(x)) dt + sigma(x) dw  with polynomial
drift f (n-vector), control matrix g (n x k), diffusion sigma (n x m), and a
Wiener process w in R^m.  Safe/initial/unsafe regions are conjunctions of
polynomial inequalities {x : s_i(x) >= 0}.

The generator operator below gives the expected instantaneous rate of change
of a twice-differentiable function along the diffusion:

    A B = sum_i F_i dB/dx_i + 1/2 sum_ij (sigma sigma^T)_ij d^2B/dx_i dx_j

with F = f + g u.  B or u may carry decision variables (never both), so the
same code path serves verification (u fixed, B unknown) and synthesis
(B fixed, u unknown).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.stats import qmc

from .poly import BilinearProduct, ParametricPolynomial

Box = tuple[tuple[float, float], ...]


def _check_concrete(p: ParametricPolynomial, what: str) -> None:
    if not p.is_concrete():
        raise ValueError(f"{what} must not contain decision variables")


@dataclass(frozen=True)
class StochasticSystem:
    """Polynomial SDE data: dimensions (n, m, k) and coefficient matrices."""

    n: int
    m: int
    k: int
    f: tuple[ParametricPolynomial, ...]
    g: tuple[tuple[ParametricPolynomial, ...], ...]
    sigma: tuple[tuple[ParametricPolynomial, ...], ...]

    def __post_init__(self):
        if len(self.f) != self.n:
            raise ValueError(f"drift has {len(self.f)} rows, expected n={self.n}")
        if len(self.g) != self.n or any(len(row) != self.k for row in self.g):
            raise ValueError(f"control matrix must be {self.n}x{self.k}")
        if len(self.sigma) != self.n or any(len(row) != self.m for row in self.sigma):
            raise ValueError(f"diffusion matrix must be {self.n}x{self.m}")
        for p in self.all_entries():
            if p.n != self.n:
                raise ValueError("system entry has wrong ambient dimension")
            _check_concrete(p, "system entry")

    def all_entries(self):
        yield from self.f
        for row in self.g:
            yield from row
        for row in self.sigma:
            yield from row

    def scaled_noise(self, factor: float) -> "StochasticSystem":
        """Same dynamics with the diffusion matrix multiplied by a scalar."""
        sigma = tuple(tuple(p.scale(factor) for p in row) for row in self.sigma)
        return StochasticSystem(self.n, self.m, self.k, self.f, self.g, sigma)

    def drift_with_control(
        self, u: Sequence[ParametricPolynomial] | None
    ) -> tuple[ParametricPolynomial, ...]:
        """F = f + g u (u = None means the zero controller)."""
        if u is None:
            return self.f
        if len(u) != self.k:
            raise ValueError(f"controller has {len(u)} channels, expected k={self.k}")
        out = []
        for i in range(self.n):
            Fi = self.f[i]
            for c in range(self.k):
                if not self.g[i][c].is_zero() and not u[c].is_zero():
                    Fi = Fi.add(self.g[i][c].multiply(u[c]))
            out.append(Fi)
        return tuple(out)


@dataclass(frozen=True)
class SemialgebraicSet:
    """{x in R^n : s_i(x) >= 0 for every listed constraint s_i}."""

    n: int
    constraints: tuple[ParametricPolynomial, ...]
    name: str = ""

    def __post_init__(self):
        if not self.constraints:
            raise ValueError("a semialgebraic set needs at least one constraint")
        for s in self.constraints:
            if s.n != self.n:
                raise ValueError("set constraint has wrong ambient dimension")
            _check_concrete(s, "set constraint")

    def contains(self, x: Sequence[float], tol: float = 0.0) -> bool:
        return all(s.evaluate(x) >= -tol for s in self.constraints)

    def contains_batch(self, points: np.ndarray, tol: float = 0.0) -> np.ndarray:
        """Boolean membership mask for an (N, n) array of points."""
        mask = np.ones(len(points), dtype=bool)
        for s in self.constraints:
            mask &= s.evaluate_batch(points) >= -tol
        return mask


@dataclass(frozen=True)
class SafetyProblem:
    """System + set triple + horizon, with either a known start or a level."""

    system: StochasticSystem
    X: SemialgebraicSet
    X0: SemialgebraicSet
    Xu: SemialgebraicSet
    T: float
    box: Box
    x0: tuple[float, ...] | None = None
    gamma: float | None = None

    def __post_init__(self):
        n = self.system.n
        for s, label in ((self.X, "X"), (self.X0, "X0"), (self.Xu, "Xu")):
            if s.n != n:
                raise ValueError(f"set {label} has dimension {s.n}, expected {n}")
        if self.T <= 0:
            raise ValueError(f"horizon must be positive, got {self.T}")
        if len(self.box) != n or any(lo > hi for lo, hi in self.box):
            raise ValueError("bounding box must give (lo, hi) per state variable")
        if self.x0 is not None:
            if len(self.x0) != n:
                raise ValueError(f"x0 has length {len(self.x0)}, expected {n}")
            if not self.X0.contains(self.x0, tol=1e-9):
                raise ValueError("x0 violates an initial-set constraint")
        if self.gamma is not None and not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"gamma must lie in [0, 1), got {self.gamma}")

    def with_noise_scale(self, factor: float) -> "SafetyProblem":
        return SafetyProblem(
            self.system.scaled_noise(factor),
            self.X,
            self.X0,
            self.Xu,
            self.T,
            self.box,
            self.x0,
            self.gamma,
        )


def generator(
    B: ParametricPolynomial,
    system: StochasticSystem,
    u: Sequence[ParametricPolynomial] | None = None,
) -> ParametricPolynomial:
    """Apply the diffusion generator to B under controller u.

    Exactly one of B, u may carry decision variables; a violation raises
    BilinearProduct from the underlying polynomial product.
    """
    if B.n != system.n:
        raise ValueError(f"B has dimension {B.n}, expected {system.n}")
    if u is not None:
        for uc in u:
            if uc.n != system.n:
                raise ValueError("controller entry has wrong ambient dimension")
        if not B.is_concrete() and any(not uc.is_concrete() for uc in u):
            raise BilinearProduct("both B and u carry decision variables")

    F = system.drift_with_control(u)
    out = ParametricPolynomial.zero(system.n)
    grad = [B.differentiate(i) for i in range(system.n)]
    for i in range(system.n):
        if not F[i].is_zero() and not grad[i].is_zero():
            out = out.add(F[i].multiply(grad[i]))
    # diffusion term: 1/2 * sum_ij (sigma sigma^T)_ij d2B/dxi dxj
    for i in range(system.n):
        for j in range(system.n):
            a_ij = ParametricPolynomial.zero(system.n)
            for l in range(system.m):
                sil, sjl = system.sigma[i][l], system.sigma[j][l]
                if not sil.is_zero() and not sjl.is_zero():
                    a_ij = a_ij.add(sil.multiply(sjl))
            if a_ij.is_zero():
                continue
            hess_ij = grad[i].differentiate(j)
            if hess_ij.is_zero():
                continue
            out = out.add(a_ij.multiply(hess_ij).scale(0.5))
    return out


def halton_points(box: Box, count: int) -> np.ndarray:
    """Deterministic low-discrepancy samples filling a box (unscrambled Halton)."""
    sampler = qmc.Halton(d=len(box), scramble=False)
    unit = sampler.random(count)
    lo = np.array([b[0] for b in box])
    hi = np.array([b[1] for b in box])
    return lo + unit * (hi - lo)


def validate_problem(problem: SafetyProblem, samples: int = 4096) -> list[str]:
    """Sampling-based sanity check of the set-containment assumptions.

    Returns human-readable warnings; never raises, because containment cannot
    be decided by sampling.  Checks on a deterministic low-discrepancy grid
    over the bounding box of X:
      * points in both X0 and Xu (the sets must be disjoint),
      * points in Xu but outside X (the unsafe set should live inside X),
      * no sampled point of the box lying in Xu at all (vacuous unsafe set).
    """
    pts = halton_points(problem.box, samples)
    in_X = problem.X.contains_batch(pts)
    in_X0 = problem.X0.contains_batch(pts)
    in_Xu = problem.Xu.contains_batch(pts)

    warnings: list[str] = []
    overlap = int(np.count_nonzero(in_X0 & in_Xu))
    if overlap:
        warnings.append(
            f"{overlap} of {samples} sampled points lie in both the initial and "
            "unsafe sets; they must be disjoint"
        )
    outside = int(np.count_nonzero(in_Xu & ~in_X))
    if outside:
        warnings.append(
            f"{outside} of {samples} sampled points lie in the unsafe set but "
            "outside the state space"
        )
    if not np.any(in_Xu & in_X):
        warnings.append(
            "no sampled point of the state space lies in the unsafe set; the "
            "unsafe region may be empty within X"
        )
    return warnings
