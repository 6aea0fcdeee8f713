"""Controller synthesis: alternate barrier fitting and controller fitting.

The coupling between a barrier B and a controller u in the certificate
constraint is bilinear, so neither can be optimized jointly with the other by
a convex solve.  The loop below alternates instead, holding alpha fixed:

    1. fit a barrier (and its growth offset beta) for the current controller,
       starting from u = 0;
    2. if the certified failure bound P misses the goal, rescale beta
       (down by a_dec when P is too high, up by a_inc when P is below goal)
       and fit a minimum-coefficient controller against the frozen barrier
       at the rescaled beta;
    3. repeat until P lands within epsilon of the goal or the iteration
       budget runs out.

An incumbent (u*, c*, certificate) is kept whenever P beats the goal with a
cheaper controller than any seen before, and the returned controller is
re-validated end-to-end with a fresh barrier computation.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import sdp, sos
from .certify import (
    AlphaGrid,
    Certificate,
    NoFeasiblePoint,
    SolverConfig,
    compute_barrier,
)
from .model import SafetyProblem
from .poly import ParametricPolynomial

log = logging.getLogger(__name__)


class Infeasible(RuntimeError):
    """No controller of the requested degree certifies the given (alpha, beta)."""


class NotConverged(RuntimeError):
    """Iteration budget exhausted; `.result` carries the best attempt."""

    def __init__(self, message: str, result: "SynthesisResult"):
        super().__init__(message)
        self.result = result


@dataclass(frozen=True)
class SynthesisConfig:
    P_goal: float
    epsilon: float
    alpha: float
    n_B: int
    n_u: int
    a_inc: float = 1.25
    a_dec: float = 0.5
    max_iters: int = 50
    c_floor: float = 0.0
    multiplier: int | None = None
    # Optional secondary stop rule: accept the incumbent once the controller
    # cost stops moving between iterations.
    stop_on_c_stall: bool = False
    c_stall_tol: float = 1e-3

    def __post_init__(self):
        if not 0.0 < self.P_goal < 1.0:
            raise ValueError("P_goal must lie in (0, 1)")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if self.a_inc <= 1.0:
            raise ValueError("a_inc must exceed 1")
        if not 0.0 < self.a_dec < 1.0:
            raise ValueError("a_dec must lie in (0, 1)")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.c_floor < 0:
            raise ValueError("c_floor must be >= 0")


@dataclass
class IterationRecord:
    iteration: int
    beta_for_controller: float | None
    beta: float | None
    bound: float | None
    c: float | None
    incumbent_updated: bool
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "iteration": self.iteration,
            "beta_for_controller": self.beta_for_controller,
            "beta": self.beta,
            "bound": self.bound,
            "c": self.c,
            "incumbent_updated": self.incumbent_updated,
            "note": self.note,
        }


@dataclass
class SynthesisResult:
    u_star: tuple[ParametricPolynomial, ...]
    Q: list[np.ndarray]
    c_star: float
    certificate: Certificate
    iterations: int
    converged: bool
    trace: list[IterationRecord] = field(default_factory=list)

    def to_dict(self) -> dict:
        from .certify import _poly_to_list

        return {
            "u_star": [_poly_to_list(uc) for uc in self.u_star],
            "Q": [q.tolist() for q in self.Q],
            "c_star": None if math.isinf(self.c_star) else self.c_star,
            "certificate": self.certificate.to_dict(),
            "iterations": self.iterations,
            "converged": self.converged,
            "trace": [rec.to_dict() for rec in self.trace],
        }


def compute_u(
    B: ParametricPolynomial,
    problem: SafetyProblem,
    alpha: float,
    beta: float,
    n_u: int,
    multiplier: int | None = None,
    c_floor: float = 0.0,
    solver: SolverConfig = SolverConfig(),
) -> tuple[tuple[ParametricPolynomial, ...], float, list[np.ndarray]]:
    """Minimum-coefficient controller making the frozen B certify (alpha, beta)."""
    built = sos.build_controller_program(
        B,
        problem,
        alpha,
        beta,
        n_u,
        multiplier_degree=multiplier,
        c_floor=c_floor,
        margin=solver.margin,
    )
    lowered = built.program.lower()
    solution = sdp.solve(
        lowered.conic,
        tol_eq=solver.tol_eq,
        tol_psd=solver.tol_psd,
        max_iter=solver.max_iter,
    )
    if solution.status != "Optimal":
        raise Infeasible(
            f"no degree-{n_u} controller at alpha={alpha:.6g}, beta={beta:.6g} "
            f"(solver: {solution.status})"
        )
    u, c, mats = built.extract(lowered.assignment(solution))
    return u, c, mats


def _zero_controller(problem: SafetyProblem, n_u: int) -> tuple[tuple[ParametricPolynomial, ...], list[np.ndarray]]:
    n, k = problem.system.n, problem.system.k
    size = len(sos.monomial_basis(n, (n_u + 1) // 2))
    return (
        tuple(ParametricPolynomial.zero(n) for _ in range(k)),
        [np.zeros((size, size)) for _ in range(k)],
    )


def synthesize(
    problem: SafetyProblem,
    cfg: SynthesisConfig,
    solver: SolverConfig = SolverConfig(),
    soundness_samples: int = 10_000,
) -> SynthesisResult:
    """Run the alternation until the certified bound lands near the goal.

    Raises NotConverged (with the best attempt attached) when the iteration
    budget runs out; the loop itself has no termination guarantee.
    """
    grid = AlphaGrid.fixed(cfg.alpha)
    degrees = sos.DegreeSpec(n_B=cfg.n_B, n_u=cfg.n_u, multiplier=cfg.multiplier)
    trace: list[IterationRecord] = []

    def barrier_for(u):
        return compute_barrier(
            problem, u, grid, degrees, solver, soundness_samples=soundness_samples
        )

    cert0 = barrier_for(None)
    trace.append(
        IterationRecord(1, None, cert0.beta, cert0.bound, None, False, "uncontrolled")
    )
    u_zero, q_zero = _zero_controller(problem, cfg.n_u)
    if cert0.bound <= cfg.P_goal + cfg.epsilon:
        return SynthesisResult(
            u_star=u_zero,
            Q=q_zero,
            c_star=0.0,
            certificate=cert0,
            iterations=1,
            converged=True,
            trace=trace,
        )

    incumbent: tuple[tuple[ParametricPolynomial, ...], float, list[np.ndarray], Certificate] | None = None
    c_star = math.inf
    B_current = cert0.B
    beta_scaled = cfg.a_dec * cert0.beta if cert0.bound > cfg.P_goal else cfg.a_inc * cert0.beta
    prev_c: float | None = None

    def fallback_result(iterations: int) -> SynthesisResult:
        if incumbent is not None:
            u_i, c_i, q_i, cert_i = incumbent
            return SynthesisResult(u_i, q_i, c_i, cert_i, iterations, False, trace)
        return SynthesisResult(u_zero, q_zero, math.inf, cert0, iterations, False, trace)

    for iteration in range(2, cfg.max_iters + 1):
        try:
            u_i, c_i, q_i = compute_u(
                B_current,
                problem,
                cfg.alpha,
                beta_scaled,
                cfg.n_u,
                multiplier=cfg.multiplier,
                c_floor=cfg.c_floor,
                solver=solver,
            )
        except Infeasible as exc:
            trace.append(
                IterationRecord(
                    iteration, beta_scaled, None, None, None, False, f"controller: {exc}"
                )
            )
            beta_scaled *= cfg.a_inc
            continue
        try:
            cert_i = barrier_for(u_i)
        except NoFeasiblePoint as exc:
            trace.append(
                IterationRecord(
                    iteration, beta_scaled, None, None, c_i, False, f"barrier: {exc}"
                )
            )
            beta_scaled *= cfg.a_inc
            continue

        B_current = cert_i.B
        bound = cert_i.bound
        updated = bound < cfg.P_goal and c_i < c_star
        if updated:
            incumbent = (u_i, c_i, q_i, cert_i)
            c_star = c_i
        trace.append(
            IterationRecord(iteration, beta_scaled, cert_i.beta, bound, c_i, updated)
        )

        if abs(bound - cfg.P_goal) <= cfg.epsilon:
            chosen = incumbent if incumbent is not None else (u_i, c_i, q_i, cert_i)
            return _revalidate(
                problem, cfg, chosen, iteration, trace, barrier_for
            )
        if (
            cfg.stop_on_c_stall
            and incumbent is not None
            and prev_c is not None
            and abs(c_i - prev_c) <= cfg.c_stall_tol
        ):
            return _revalidate(
                problem, cfg, incumbent, iteration, trace, barrier_for
            )
        prev_c = c_i
        beta_scaled = (cfg.a_dec if bound > cfg.P_goal else cfg.a_inc) * cert_i.beta

    raise NotConverged(
        f"no controller within epsilon={cfg.epsilon} of P_goal={cfg.P_goal} "
        f"after {cfg.max_iters} iterations",
        fallback_result(cfg.max_iters),
    )


def _revalidate(problem, cfg, chosen, iteration, trace, barrier_for) -> SynthesisResult:
    """Independent end-to-end check of the returned controller."""
    u_i, c_i, q_i, _ = chosen
    final_cert = barrier_for(u_i)
    result = SynthesisResult(
        u_star=u_i,
        Q=q_i,
        c_star=c_i,
        certificate=final_cert,
        iterations=iteration,
        converged=True,
        trace=trace,
    )
    if final_cert.bound > cfg.P_goal + cfg.epsilon:
        raise NotConverged(
            f"re-validated bound {final_cert.bound:.6g} misses "
            f"P_goal={cfg.P_goal} + epsilon={cfg.epsilon}",
            SynthesisResult(
                u_i, q_i, c_i, final_cert, iteration, False, trace
            ),
        )
    return result


def min_linear_gain(
    problem: SafetyProblem,
    P_goal: float,
    n_B: int,
    grid: AlphaGrid,
    k_max: float = 10.0,
    tol: float = 0.02,
    multiplier: int | None = None,
    solver: SolverConfig = SolverConfig(),
    soundness_samples: int = 2_000,
) -> tuple[float, Certificate]:
    """Smallest gain k with u = -k x certifying P <= P_goal (1-D systems).

    Bisects on k assuming the certified bound is non-increasing in the gain,
    which holds for the damping controllers this restricted mode targets.
    """
    if problem.system.n != 1 or problem.system.k != 1:
        raise ValueError("the linear-gain search is defined for 1-D single-input systems")
    degrees = sos.DegreeSpec(n_B=n_B, n_u=1, multiplier=multiplier)

    def certify_at(k: float) -> Certificate | None:
        u = (ParametricPolynomial.monomial(1, (1,), -k),)
        try:
            return compute_barrier(
                problem, u, grid, degrees, solver, soundness_samples=soundness_samples
            )
        except NoFeasiblePoint:
            return None

    cert = certify_at(0.0)
    if cert is not None and cert.bound <= P_goal:
        return 0.0, cert
    hi_cert = certify_at(k_max)
    if hi_cert is None or hi_cert.bound > P_goal:
        raise Infeasible(f"gain {k_max} does not reach P_goal={P_goal}")
    lo, hi = 0.0, k_max
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        mid_cert = certify_at(mid)
        if mid_cert is not None and mid_cert.bound <= P_goal:
            hi, hi_cert = mid, mid_cert
        else:
            lo = mid
    return hi, hi_cert
