"""Finite-time failure probability bounds and the alpha grid search.

Given a barrier B with A B <= -alpha B + beta on the safe region, B >= 1 on
the unsafe set, and a starting level (B at a known x0, or the initial-set cap
gamma), the probability of reaching the unsafe set within horizon T is upper
bounded case-by-case:

    alpha > 0, beta/alpha <= 1:   1 - (1 - level) * exp(-beta T)
    alpha > 0, beta/alpha >= 1:   (level + (exp(beta T) - 1) beta/alpha) / exp(beta T)
    alpha == 0:                   level + beta T

The two alpha > 0 formulas agree at beta/alpha = 1; both are evaluated there
and the smaller kept.  Raw values can exceed one (a vacuous bound), so the
reported bound is clamped to [0, 1] and the raw value recorded.

alpha multiplies B inside the certificate constraint, making a joint search
bilinear; the grid search below solves one convex program per alpha value
instead and keeps the best resulting bound.
"""

from __future__ import annotations

import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

from . import sdp, sos
from .model import SafetyProblem
from .poly import AffineExpr, ParametricPolynomial, grlex_key

log = logging.getLogger(__name__)

BOUND_CASE_ALPHA_ZERO = "AlphaZero"
BOUND_CASE_LE1 = "BetaOverAlphaLE1"
BOUND_CASE_GE1 = "BetaOverAlphaGE1"


class InvalidLevel(ValueError):
    """Raised when a starting level lies outside [0, 1)."""


class NoFeasiblePoint(RuntimeError):
    """Raised when every alpha grid point fails to produce a certificate."""


def probability_bound(
    alpha: float, beta: float, level: float, T: float
) -> tuple[float, str, float]:
    """Case-selected failure probability bound.

    Returns (bound clamped to [0, 1], case name, raw unclamped value).
    """
    if not 0.0 <= level < 1.0:
        raise InvalidLevel(f"level must lie in [0, 1), got {level}")
    if alpha < 0 or beta < 0 or T <= 0:
        raise ValueError("need alpha >= 0, beta >= 0, T > 0")
    if alpha == 0.0:
        raw = level + beta * T
        return min(1.0, max(0.0, raw)), BOUND_CASE_ALPHA_ZERO, raw

    decay = 1.0 - (1.0 - level) * math.exp(-beta * T)
    growth = (level + (math.exp(beta * T) - 1.0) * (beta / alpha)) * math.exp(-beta * T)
    if beta / alpha < 1.0:
        raw, case = decay, BOUND_CASE_LE1
    elif beta / alpha > 1.0:
        raw, case = growth, BOUND_CASE_GE1
    else:
        # Both cases apply on the seam; keep the smaller.
        raw, case = (
            (decay, BOUND_CASE_LE1) if decay <= growth else (growth, BOUND_CASE_GE1)
        )
    return min(1.0, max(0.0, raw)), case, raw


@dataclass(frozen=True)
class AlphaGrid:
    """Inclusive range [lower, upper] in steps of spacing."""

    lower: float
    upper: float
    spacing: float

    def __post_init__(self):
        if self.lower > self.upper:
            raise ValueError("alpha grid needs lower <= upper")
        if self.spacing <= 0:
            raise ValueError("alpha grid spacing must be positive")
        if self.lower < 0:
            raise ValueError("alpha must be >= 0")

    def values(self) -> list[float]:
        count = int(math.floor((self.upper - self.lower) / self.spacing + 1e-9)) + 1
        return [self.lower + i * self.spacing for i in range(count)]

    @classmethod
    def fixed(cls, alpha: float) -> "AlphaGrid":
        return cls(alpha, alpha, 1.0)


@dataclass(frozen=True)
class SolverConfig:
    tol_eq: float = 1e-8
    tol_psd: float = 1e-7
    max_iter: int = 200
    margin: float = 0.0


@dataclass
class Certificate:
    """A solved barrier, its parameters, and the resulting bound."""

    B: ParametricPolynomial
    alpha: float
    beta: float
    gamma: float
    level_used: float
    level_kind: str  # "B(x0)" | "gamma"
    bound: float
    raw_bound: float
    bound_case: str
    objective: float
    degrees: sos.DegreeSpec
    solver: dict
    soundness: sos.SoundnessReport | None = None
    controller: tuple[ParametricPolynomial, ...] | None = None
    sigma_scale: float | None = None

    def recompute_bound(self, T: float) -> float:
        return probability_bound(self.alpha, self.beta, self.level_used, T)[0]

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "dimension": self.B.n,
            "coefficients": _poly_to_list(self.B),
            "alpha": self.alpha,
            "beta": self.beta,
            "gamma": self.gamma,
            "level_used": self.level_used,
            "level_kind": self.level_kind,
            "bound": self.bound,
            "raw_bound": self.raw_bound,
            "bound_case": self.bound_case,
            "objective": self.objective,
            "degrees": {
                "n_B": self.degrees.n_B,
                "n_u": self.degrees.n_u,
                "multiplier": self.degrees.multiplier,
            },
            "solver": dict(self.solver),
            "soundness": self.soundness.to_dict() if self.soundness else None,
            "controller": (
                [_poly_to_list(uc) for uc in self.controller]
                if self.controller is not None
                else None
            ),
            "sigma_scale": self.sigma_scale,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Certificate":
        n = int(doc["dimension"])
        degrees = sos.DegreeSpec(
            n_B=int(doc["degrees"]["n_B"]),
            n_u=int(doc["degrees"]["n_u"]),
            multiplier=doc["degrees"]["multiplier"],
        )
        soundness = None
        if doc.get("soundness"):
            s = doc["soundness"]
            soundness = sos.SoundnessReport(
                ok=s["ok"],
                samples=s["samples"],
                min_B_on_X=s["min_B_on_X"],
                min_B_on_Xu=s["min_B_on_Xu"],
                max_B_on_X0=s["max_B_on_X0"],
                max_generator_violation=s["max_generator_violation"],
                counts=dict(s["counts"]),
            )
        controller = None
        if doc.get("controller") is not None:
            controller = tuple(_poly_from_list(n, item) for item in doc["controller"])
        return cls(
            B=_poly_from_list(n, doc["coefficients"]),
            alpha=float(doc["alpha"]),
            beta=float(doc["beta"]),
            gamma=float(doc["gamma"]),
            level_used=float(doc["level_used"]),
            level_kind=doc["level_kind"],
            bound=float(doc["bound"]),
            raw_bound=float(doc["raw_bound"]),
            bound_case=doc["bound_case"],
            objective=float(doc["objective"]),
            degrees=degrees,
            solver=dict(doc["solver"]),
            soundness=soundness,
            controller=controller,
            sigma_scale=doc.get("sigma_scale"),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "Certificate":
        return cls.from_dict(json.loads(text))


def _poly_to_list(p: ParametricPolynomial) -> list:
    """Coefficient list in graded-lex order: [[e1..en, value], ...]."""
    if not p.is_concrete():
        raise ValueError("only concrete polynomials serialize")
    return [
        list(exps) + [coeff.const]
        for exps, coeff in sorted(p.terms.items(), key=lambda t: grlex_key(t[0]))
    ]


def _poly_from_list(n: int, items: Sequence[Sequence[float]]) -> ParametricPolynomial:
    terms = {tuple(int(e) for e in item[:-1]): float(item[-1]) for item in items}
    return ParametricPolynomial(n, terms)


def _thread_count() -> int:
    try:
        return max(1, int(os.environ.get("SBARRIER_THREADS", "1")))
    except ValueError:
        return 1


def _map_ordered(fn, items):
    """Apply fn across items, optionally threaded; results in input order."""
    workers = _thread_count()
    if workers == 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


@dataclass
class GridPointResult:
    alpha: float
    status: str
    certificate: Certificate | None


def polish_certificate(
    problem: SafetyProblem,
    B: ParametricPolynomial,
    u: Sequence[ParametricPolynomial] | None,
    alpha: float,
    beta: float,
    gamma: float,
    samples: int = 40_000,
    pad: float = 1e-8,
) -> tuple[ParametricPolynomial, float, float]:
    """Give a solver-grade certificate genuine pointwise slack.

    Interior-point solutions satisfy the barrier identities only up to small
    residuals, and at degree 14+ those residuals get amplified pointwise by
    high-order monomials.  All four conditions can be repaired exactly in
    closed form without re-solving:

      * B dips to -v on X:       B <- (B + v) / (1 + v), which preserves
        B >= 1 on Xu and B <= gamma on X0 after mapping gamma the same way
        and beta <- (beta + alpha v) / (1 + v);
      * B reaches only m < 1 on Xu:  B <- B / m, gamma <- gamma / m,
        beta <- beta / m;
      * generator excess v on X minus Xu:  beta <- beta + v;
      * B exceeds gamma on X0:   raise gamma (it only ever certifies less).

    Repairs are sized on a 4x denser low-discrepancy sample set than the
    downstream soundness check uses; unscrambled Halton samples nest, so the
    checker's points are a subset of the points the repair accounted for.
    Each adjustment only loosens the certificate, so the reported probability
    bound stays a valid (marginally larger) upper bound.
    """
    ext = sos.soundness_extrema(problem, B, u, alpha, beta, samples)

    dip = max(0.0, -(ext.min_B_on_X or 0.0)) + pad
    if dip > pad:
        B = B.add(ParametricPolynomial.constant(B.n, dip)).scale(1.0 / (1.0 + dip))
        beta = (beta + alpha * dip) / (1.0 + dip)
        gamma = (gamma + dip) / (1.0 + dip)

    floor = ext.min_B_on_Xu
    if floor is not None:
        if dip > pad:
            floor = (floor + dip) / (1.0 + dip)
        if 0.0 < floor < 1.0:
            m = max(floor - pad, 0.5 * floor)
            B = B.scale(1.0 / m)
            beta /= m
            gamma = min(gamma / m, 1.0 - 1e-9)

    ext = sos.soundness_extrema(problem, B, u, alpha, beta, samples)
    if ext.max_generator_excess is not None and ext.max_generator_excess > -pad:
        beta += max(0.0, ext.max_generator_excess) + pad
    if ext.max_B_on_X0 is not None and ext.max_B_on_X0 > gamma - pad:
        gamma = min(ext.max_B_on_X0 + pad, 1.0 - 1e-9)
    return B, beta, gamma


def _solve_barrier_at(
    problem: SafetyProblem,
    u: Sequence[ParametricPolynomial] | None,
    alpha: float,
    degrees: sos.DegreeSpec,
    solver: SolverConfig,
    fix_beta: float | None,
    beta_weight: float,
    soundness_samples: int,
) -> GridPointResult:
    built = sos.build_barrier_program(
        problem,
        u,
        alpha,
        degrees,
        fix_beta=fix_beta,
        margin=solver.margin,
        beta_weight=beta_weight,
    )
    lowered = built.program.lower()
    solution = sdp.solve(
        lowered.conic,
        tol_eq=solver.tol_eq,
        tol_psd=solver.tol_psd,
        max_iter=solver.max_iter,
    )
    if solution.status != "Optimal":
        return GridPointResult(alpha=alpha, status=solution.status, certificate=None)

    assignment = lowered.assignment(solution)
    B, beta, gamma = built.extract(assignment)
    B, beta, gamma = polish_certificate(problem, B, u, alpha, beta, gamma)
    if problem.x0 is not None:
        level = B.evaluate(problem.x0)
        level_kind = "B(x0)"
    else:
        level = gamma
        level_kind = "gamma"
    # Solver roundoff can leave the level a hair outside [0, 1).
    if -1e-6 <= level < 0.0:
        level = 0.0
    if level >= 1.0 or level < 0.0:
        return GridPointResult(alpha=alpha, status="LevelOutOfRange", certificate=None)
    bound, case, raw = probability_bound(alpha, beta, level, problem.T)
    cert = Certificate(
        B=B,
        alpha=alpha,
        beta=beta,
        gamma=gamma,
        level_used=level,
        level_kind=level_kind,
        bound=bound,
        raw_bound=raw,
        bound_case=case,
        objective=solution.objective,
        degrees=degrees,
        solver={
            "backend": "clarabel",
            "status": solution.solver_status,
            "iterations": solution.iterations,
            "eq_residual": solution.eq_residual,
            "min_eigenvalue": solution.min_eigenvalue,
            "duality_gap": solution.duality_gap,
        },
        controller=tuple(u) if u is not None else None,
    )
    if soundness_samples:
        cert.soundness = sos.sampled_soundness(
            problem, B, u, alpha, beta, gamma, samples=soundness_samples
        )
    return GridPointResult(alpha=alpha, status="Optimal", certificate=cert)


def compute_barrier(
    problem: SafetyProblem,
    u: Sequence[ParametricPolynomial] | None,
    grid: AlphaGrid,
    degrees: sos.DegreeSpec,
    solver: SolverConfig = SolverConfig(),
    fix_beta: float | None = None,
    beta_weight: float = 1.0,
    soundness_samples: int = 10_000,
) -> Certificate:
    """Grid search over alpha; returns the certificate with the best bound.

    Grid points are independent convex programs (solved concurrently when
    SBARRIER_THREADS > 1); the winner is selected by scanning results in grid
    order, so the outcome does not depend on completion order.  Non-optimal
    points are skipped with a log entry.  A winning certificate must also
    pass the sampled soundness check; failures are dropped and the next best
    point is taken.
    """
    alphas = grid.values()
    results = _map_ordered(
        lambda a: _solve_barrier_at(
            problem, u, a, degrees, solver, fix_beta, beta_weight, soundness_samples
        ),
        alphas,
    )
    ranked: list[Certificate] = []
    for res in results:
        if res.certificate is None:
            log.info("alpha=%.6g skipped (%s)", res.alpha, res.status)
        else:
            ranked.append(res.certificate)
    if not ranked:
        raise NoFeasiblePoint(
            f"no alpha in [{grid.lower}, {grid.upper}] produced a certificate"
        )
    ranked.sort(key=lambda c: c.bound)  # stable: grid order breaks ties
    for cert in ranked:
        if cert.soundness is None or cert.soundness.ok:
            return cert
        log.warning(
            "alpha=%.6g bound=%.6g dropped: sampled soundness failed", cert.alpha, cert.bound
        )
    raise NoFeasiblePoint("every feasible grid point failed the soundness check")
