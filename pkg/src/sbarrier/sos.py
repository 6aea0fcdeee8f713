"""Sum-of-squares program construction and lowering to conic form.

A membership constraint "p is a sum of squares" is certified by a Gram
matrix: p = z^T Q z with z a graded-lex monomial basis and Q symmetric PSD.
Non-negativity of p on a semialgebraic set {s_i >= 0} (optionally excluding
{t_j >= 0}) uses the standard multiplier encoding

    p - sum_i lambda_i s_i + sum_j mu_j t_j  in SOS,   lambda_i, mu_j in SOS,

which forces p >= 0 only where every s_i >= 0 and some t_j < 0.

All decision variables (barrier coefficients, scalars like beta and gamma,
controller coefficients, Gram entries) share one integer id space, so the
resulting coefficient-matching equalities are plain sparse linear rows over
the conic variable vector.  Multiplier degrees default per constraint to the
largest even value that keeps the composite degree at the constrained
polynomial's (even-rounded) degree; too-low degrees cause spurious
infeasibility, so callers can override.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import sdp
from .model import SafetyProblem, SemialgebraicSet, generator, halton_points
from .poly import (
    AffineExpr,
    Exponents,
    ParametricPolynomial,
    grlex_key,
    monomial_basis,
)

# Cap on a free gamma level: gamma stays strictly below 1.
GAMMA_MARGIN = 1e-3


class OddDegree(ValueError):
    """Raised when an SOS template is requested at an odd degree."""


def even_ceil(d: int) -> int:
    return d + (d & 1)


def even_floor(d: int) -> int:
    return d - (d & 1)


@dataclass
class GramParam:
    """Symmetric PSD coefficient matrix over a monomial basis."""

    name: str
    basis: tuple[Exponents, ...]
    entry_ids: dict[tuple[int, int], int]  # (i, j) with i <= j -> variable id

    @property
    def dimension(self) -> int:
        return len(self.basis)

    def matrix(self, assignment: dict[int, float]) -> np.ndarray:
        size = self.dimension
        mat = np.zeros((size, size))
        for (i, j), vid in self.entry_ids.items():
            mat[i, j] = assignment[vid]
            mat[j, i] = assignment[vid]
        return mat

    def expansion(self, n: int) -> ParametricPolynomial:
        """z^T Q z as a polynomial with the Gram entries symbolic."""
        acc: dict[Exponents, AffineExpr] = {}
        for (i, j), vid in self.entry_ids.items():
            exps = tuple(a + b for a, b in zip(self.basis[i], self.basis[j]))
            term = AffineExpr.variable(vid, 1.0 if i == j else 2.0)
            cur = acc.get(exps)
            acc[exps] = term if cur is None else cur + term
        return ParametricPolynomial(n, acc)


@dataclass
class QuadFormParam:
    """Symmetric coefficient matrix of a quadratic-form polynomial z^T Q z.

    Unlike a Gram block, Q carries no PSD requirement; it only structures a
    controller's coefficients.  Entries pairing basis monomials whose degree
    sum exceeds the target degree are fixed to zero (odd target degrees).
    """

    channel: int
    basis: tuple[Exponents, ...]
    entry_ids: dict[tuple[int, int], int]

    @property
    def dimension(self) -> int:
        return len(self.basis)

    def matrix(self, assignment: dict[int, float]) -> np.ndarray:
        size = self.dimension
        mat = np.zeros((size, size))
        for (i, j), vid in self.entry_ids.items():
            mat[i, j] = assignment[vid]
            mat[j, i] = assignment[vid]
        return mat


@dataclass
class SetConstraintRecord:
    """Bookkeeping for one set-membership constraint (for audits and tests)."""

    label: str
    polynomial: ParametricPolynomial  # residual handed to the main Gram block
    gram: GramParam
    multipliers: list[GramParam] = field(default_factory=list)


class SosProgram:
    """Decision variables, SOS memberships, linear side constraints, objective."""

    def __init__(self, n: int):
        self.n = n
        self._kinds: list[tuple] = []  # id -> ("scalar", ordinal) | ("gram", block, i, j)
        self._scalar_nonneg: list[bool] = []
        self._scalar_names: list[str] = []
        self.grams: list[GramParam] = []
        self.equalities: list[AffineExpr] = []
        self.inequalities: list[AffineExpr] = []  # each expression >= 0
        self.objective: AffineExpr | None = None

    # -- variables -----------------------------------------------------------

    def new_scalar(self, name: str, nonneg: bool = False) -> AffineExpr:
        vid = len(self._kinds)
        self._kinds.append(("scalar", len(self._scalar_nonneg)))
        self._scalar_nonneg.append(nonneg)
        self._scalar_names.append(name)
        return AffineExpr.variable(vid)

    def new_poly(self, name: str, degree: int) -> ParametricPolynomial:
        """Fully free polynomial template: one scalar coefficient per monomial."""
        terms: dict[Exponents, AffineExpr] = {}
        for exps in monomial_basis(self.n, degree):
            terms[exps] = self.new_scalar(f"{name}[{','.join(map(str, exps))}]")
        return ParametricPolynomial(self.n, terms)

    def new_sos_poly(self, degree: int, name: str = "sos") -> tuple[ParametricPolynomial, GramParam]:
        """Fresh SOS template z^T Q z over monomials of degree <= degree/2."""
        if degree < 0 or degree % 2:
            raise OddDegree(f"SOS template degree must be even and >= 0, got {degree}")
        basis = tuple(monomial_basis(self.n, degree // 2))
        block = len(self.grams)
        entry_ids: dict[tuple[int, int], int] = {}
        for j in range(len(basis)):
            for i in range(j + 1):
                vid = len(self._kinds)
                self._kinds.append(("gram", block, i, j))
                entry_ids[(i, j)] = vid
        gram = GramParam(name=name, basis=basis, entry_ids=entry_ids)
        self.grams.append(gram)
        return gram.expansion(self.n), gram

    def new_quadratic_form(
        self, channel: int, basis: Sequence[Exponents], max_degree: int, name: str = "Q"
    ) -> tuple[ParametricPolynomial, QuadFormParam]:
        """Free symmetric quadratic form z^T Q z truncated to max_degree."""
        entry_ids: dict[tuple[int, int], int] = {}
        acc: dict[Exponents, AffineExpr] = {}
        for j in range(len(basis)):
            for i in range(j + 1):
                if sum(basis[i]) + sum(basis[j]) > max_degree:
                    continue
                expr = self.new_scalar(f"{name}{channel}[{i},{j}]")
                (vid,) = expr.lin
                entry_ids[(i, j)] = vid
                exps = tuple(a + b for a, b in zip(basis[i], basis[j]))
                term = AffineExpr.variable(vid, 1.0 if i == j else 2.0)
                cur = acc.get(exps)
                acc[exps] = term if cur is None else cur + term
        poly = ParametricPolynomial(self.n, acc)
        return poly, QuadFormParam(channel=channel, basis=tuple(basis), entry_ids=entry_ids)

    # -- constraints ----------------------------------------------------------

    def require_zero(self, p: ParametricPolynomial) -> None:
        """Coefficient-matching equalities: every coefficient of p must vanish."""
        for _, coeff in p.sorted_terms():
            self.equalities.append(coeff)

    def add_inequality(self, expr: AffineExpr) -> None:
        """Linear scalar constraint expr >= 0."""
        self.inequalities.append(expr)

    def set_objective(self, expr: AffineExpr) -> None:
        self.objective = expr

    def require_sos(
        self,
        p: ParametricPolynomial,
        target_degree: int | None = None,
        margin: float = 0.0,
        name: str = "sos",
    ) -> GramParam:
        """Constrain p (degree-padded to even) to be a sum of squares."""
        target = even_ceil(p.degree())
        if target_degree is not None:
            target = max(target, even_ceil(target_degree))
        if margin > 0.0:
            # Tightening against boundary solutions: subtract margin * sum z^2.
            squares: dict[Exponents, AffineExpr] = {}
            for exps in monomial_basis(self.n, target // 2):
                sq = tuple(2 * e for e in exps)
                cur = squares.get(sq, AffineExpr(0.0))
                squares[sq] = cur + (-margin)
            p = p.add(ParametricPolynomial(self.n, squares))
        expansion, gram = self.new_sos_poly(target, name=name)
        self.require_zero(p.sub(expansion))
        return gram

    def require_nonneg_on_set(
        self,
        p: ParametricPolynomial,
        inside: SemialgebraicSet,
        outside: SemialgebraicSet | None = None,
        multiplier_degree: int | None = None,
        margin: float = 0.0,
        label: str = "constraint",
    ) -> SetConstraintRecord:
        """Constrain p >= 0 on `inside` minus `outside` via SOS multipliers.

        One SOS multiplier per set constraint: lambda_i for each inside
        constraint s_i (entering as -lambda_i s_i) and mu_j for each outside
        constraint t_j (entering as +mu_j t_j, so positivity is only forced
        where t_j <= 0).
        """
        if multiplier_degree is not None and multiplier_degree % 2:
            raise OddDegree(f"multiplier degree must be even, got {multiplier_degree}")
        target = even_ceil(p.degree())

        def mult_degree(set_poly: ParametricPolynomial) -> int:
            if multiplier_degree is not None:
                return multiplier_degree
            return max(0, even_floor(target - set_poly.degree()))

        multipliers: list[GramParam] = []
        residual = p
        composite = target
        for idx, s in enumerate(inside.constraints):
            d = mult_degree(s)
            lam, gram = self.new_sos_poly(d, name=f"{label}:in{idx}")
            multipliers.append(gram)
            residual = residual.sub(lam.multiply(s))
            composite = max(composite, d + s.degree())
        if outside is not None:
            for idx, t in enumerate(outside.constraints):
                d = mult_degree(t)
                mu, gram = self.new_sos_poly(d, name=f"{label}:out{idx}")
                multipliers.append(gram)
                residual = residual.add(mu.multiply(t))
                composite = max(composite, d + t.degree())
        gram = self.require_sos(
            residual, target_degree=composite, margin=margin, name=f"{label}:main"
        )
        return SetConstraintRecord(
            label=label, polynomial=residual, gram=gram, multipliers=multipliers
        )

    # -- lowering -------------------------------------------------------------

    def lower(self) -> "LoweredProgram":
        conic = sdp.ConicProblem()
        for gram in self.grams:
            conic.add_psd_block(gram.dimension)
        index_of: dict[int, int] = {}
        for vid, kind in enumerate(self._kinds):
            if kind[0] == "gram":
                _, block, i, j = kind
                index_of[vid] = conic.entry_index(block, i, j)
        scalar_base: dict[int, int] = {}
        for vid, kind in enumerate(self._kinds):
            if kind[0] == "scalar":
                ordinal = kind[1]
                scalar_base[vid] = conic.add_scalar(self._scalar_nonneg[ordinal])
        index_of.update(scalar_base)

        def row_of(expr: AffineExpr) -> dict[int, float]:
            return {index_of[v]: c for v, c in expr.lin.items()}

        for expr in self.equalities:
            conic.add_equality(row_of(expr), -expr.const)
        for expr in self.inequalities:
            slack = conic.add_scalar(True)
            row = row_of(expr)
            row[slack] = -1.0
            conic.add_equality(row, -expr.const)
        if self.objective is not None:
            conic.objective = row_of(self.objective)
            conic.obj_offset = self.objective.const
        conic.validate()
        return LoweredProgram(program=self, conic=conic, index_of=index_of)


@dataclass
class LoweredProgram:
    program: SosProgram
    conic: sdp.ConicProblem
    index_of: dict[int, int]

    def assignment(self, solution: sdp.ConicSolution) -> dict[int, float]:
        if solution.x is None:
            raise ValueError(f"no primal point available (status {solution.status})")
        return {vid: float(solution.x[idx]) for vid, idx in self.index_of.items()}


# ---------------------------------------------------------------------------
# Barrier and controller programs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DegreeSpec:
    """Template degrees: barrier, controller, optional multiplier override."""

    n_B: int
    n_u: int = 2
    multiplier: int | None = None


@dataclass
class BarrierProgram:
    """Barrier feasibility/optimization program at one fixed alpha."""

    program: SosProgram
    problem: SafetyProblem
    alpha: float
    B: ParametricPolynomial  # template; coefficients are decision variables
    beta: AffineExpr
    gamma: AffineExpr
    records: list[SetConstraintRecord]
    degrees: DegreeSpec

    def extract(self, assignment: dict[int, float]) -> tuple[ParametricPolynomial, float, float]:
        B = self.B.substitute(assignment)
        beta = self.beta.evaluate(assignment)
        gamma = self.gamma.evaluate(assignment)
        return B, beta, gamma


def build_barrier_program(
    problem: SafetyProblem,
    u: Sequence[ParametricPolynomial] | None,
    alpha: float,
    degrees: DegreeSpec,
    fix_beta: float | None = None,
    margin: float = 0.0,
    beta_weight: float = 1.0,
) -> BarrierProgram:
    """Encode the four barrier conditions at a fixed alpha.

    Decision variables: the coefficients of B (degree n_B), beta >= 0 (unless
    pinned), gamma in [0, 1 - GAMMA_MARGIN] (unless the problem pins it), and
    all multiplier Gram matrices.  Constraints over the set triple:

        (i)    B >= 0                 on X
        (ii)   B >= 1                 on Xu
        (iii)  B <= gamma             on X0
        (iv)   A B <= -alpha B + beta on X \\ Xu

    where A B is the full generator (drift plus diffusion trace).  The
    objective is B(x0) + beta_weight * beta when x0 is known, else
    gamma + beta_weight * beta.
    """
    if alpha < 0:
        raise ValueError(f"alpha must be >= 0, got {alpha}")
    n = problem.system.n
    prog = SosProgram(n)
    B = prog.new_poly("B", degrees.n_B)

    beta = AffineExpr.constant(fix_beta) if fix_beta is not None else prog.new_scalar(
        "beta", nonneg=True
    )
    if problem.gamma is not None:
        gamma = AffineExpr.constant(problem.gamma)
    else:
        gamma = prog.new_scalar("gamma", nonneg=True)
        prog.add_inequality(AffineExpr.constant(1.0 - GAMMA_MARGIN) - gamma)

    records = [
        prog.require_nonneg_on_set(
            B,
            inside=problem.X,
            multiplier_degree=degrees.multiplier,
            margin=margin,
            label="nonneg_on_X",
        ),
        prog.require_nonneg_on_set(
            B.sub(ParametricPolynomial.constant(n, 1.0)),
            inside=problem.Xu,
            multiplier_degree=degrees.multiplier,
            margin=margin,
            label="unit_on_Xu",
        ),
        prog.require_nonneg_on_set(
            ParametricPolynomial.constant(n, gamma).sub(B),
            inside=problem.X0,
            multiplier_degree=degrees.multiplier,
            margin=margin,
            label="level_on_X0",
        ),
    ]
    drift_bound = (
        ParametricPolynomial.constant(n, beta)
        .sub(B.scale(alpha))
        .sub(generator(B, problem.system, u))
    )
    records.append(
        prog.require_nonneg_on_set(
            drift_bound,
            inside=problem.X,
            outside=problem.Xu,
            multiplier_degree=degrees.multiplier,
            margin=margin,
            label="generator_bound",
        )
    )

    level = B.evaluate_affine(problem.x0) if problem.x0 is not None else gamma
    prog.set_objective(level + beta * beta_weight)
    return BarrierProgram(
        program=prog,
        problem=problem,
        alpha=alpha,
        B=B,
        beta=beta,
        gamma=gamma,
        records=records,
        degrees=degrees,
    )


@dataclass
class ControllerProgram:
    """Minimum-coefficient controller program at fixed (B, alpha, beta)."""

    program: SosProgram
    problem: SafetyProblem
    alpha: float
    beta: float
    u: tuple[ParametricPolynomial, ...]  # templates, affine in Q entries
    q_params: list[QuadFormParam]
    c: AffineExpr
    records: list[SetConstraintRecord]

    def extract(self, assignment: dict[int, float]) -> tuple[tuple[ParametricPolynomial, ...], float, list[np.ndarray]]:
        u = tuple(uc.substitute(assignment) for uc in self.u)
        c = self.c.evaluate(assignment)
        mats = [qp.matrix(assignment) for qp in self.q_params]
        return u, c, mats


def build_controller_program(
    B: ParametricPolynomial,
    problem: SafetyProblem,
    alpha: float,
    beta: float,
    n_u: int,
    multiplier_degree: int | None = None,
    c_floor: float = 0.0,
    margin: float = 0.0,
) -> ControllerProgram:
    """Search for a polynomial state feedback making B certify (alpha, beta).

    Each input channel is a quadratic form z^T Q z over monomials of degree
    <= ceil(n_u / 2), truncated so the controller degree is exactly n_u; the
    scalar c bounds every Q entry element-wise and is minimized.
    """
    if not B.is_concrete():
        raise ValueError("controller synthesis needs a concrete barrier")
    if n_u < 0:
        raise ValueError(f"controller degree must be >= 0, got {n_u}")
    n = problem.system.n
    prog = SosProgram(n)
    c = prog.new_scalar("c", nonneg=True)

    basis = monomial_basis(n, (n_u + 1) // 2)
    u_polys: list[ParametricPolynomial] = []
    q_params: list[QuadFormParam] = []
    for channel in range(problem.system.k):
        u_ch, qp = prog.new_quadratic_form(channel, basis, n_u)
        u_polys.append(u_ch)
        q_params.append(qp)

    drift_bound = (
        ParametricPolynomial.constant(n, float(beta))
        .sub(B.scale(alpha))
        .sub(generator(B, problem.system, u_polys))
    )
    records = [
        prog.require_nonneg_on_set(
            drift_bound,
            inside=problem.X,
            outside=problem.Xu,
            multiplier_degree=multiplier_degree,
            margin=margin,
            label="generator_bound",
        )
    ]
    for qp in q_params:
        for vid in qp.entry_ids.values():
            q = AffineExpr.variable(vid)
            prog.add_inequality(c - q)
            prog.add_inequality(q + c)
    if c_floor > 0.0:
        prog.add_inequality(c - AffineExpr.constant(c_floor))
    prog.set_objective(c)
    return ControllerProgram(
        program=prog,
        problem=problem,
        alpha=alpha,
        beta=float(beta),
        u=tuple(u_polys),
        q_params=q_params,
        c=c,
        records=records,
    )


# ---------------------------------------------------------------------------
# Sampled soundness of a solved certificate
# ---------------------------------------------------------------------------


@dataclass
class SoundnessReport:
    """Low-discrepancy spot check of a solved (B, u, alpha, beta, gamma)."""

    ok: bool
    samples: int
    min_B_on_X: float | None
    min_B_on_Xu: float | None
    max_B_on_X0: float | None
    max_generator_violation: float | None
    counts: dict[str, int]

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "samples": self.samples,
            "min_B_on_X": self.min_B_on_X,
            "min_B_on_Xu": self.min_B_on_Xu,
            "max_B_on_X0": self.max_B_on_X0,
            "max_generator_violation": self.max_generator_violation,
            "counts": dict(self.counts),
        }


@dataclass
class SoundnessExtrema:
    """Raw condition extrema over one low-discrepancy sample set."""

    samples: int
    counts: dict[str, int]
    min_B_on_X: float | None
    min_B_on_Xu: float | None
    max_B_on_X0: float | None
    # max over sampled X \ Xu of (A B + alpha B - beta); <= 0 means satisfied
    max_generator_excess: float | None
    # same quantity with the relative allowance tol * (1 + |A B|) subtracted
    max_generator_violation: float | None


def soundness_extrema(
    problem: SafetyProblem,
    B: ParametricPolynomial,
    u: Sequence[ParametricPolynomial] | None,
    alpha: float,
    beta: float,
    samples: int,
    tol: float = 1e-6,
) -> SoundnessExtrema:
    pts = halton_points(problem.box, samples)
    in_X = problem.X.contains_batch(pts)
    in_X0 = problem.X0.contains_batch(pts)
    in_Xu = problem.Xu.contains_batch(pts)
    B_vals = B.evaluate_batch(pts)
    gen_vals = generator(B, problem.system, u).evaluate_batch(pts)

    counts = {
        "X": int(np.count_nonzero(in_X)),
        "X0": int(np.count_nonzero(in_X0)),
        "Xu": int(np.count_nonzero(in_Xu)),
        "X_minus_Xu": int(np.count_nonzero(in_X & ~in_Xu)),
    }
    region = in_X & ~in_Xu
    excess = violation = None
    if counts["X_minus_Xu"]:
        slack = gen_vals[region] + alpha * B_vals[region] - beta
        excess = float(np.max(slack))
        violation = float(np.max(slack - tol * (1.0 + np.abs(gen_vals[region]))))
    return SoundnessExtrema(
        samples=samples,
        counts=counts,
        min_B_on_X=float(np.min(B_vals[in_X])) if counts["X"] else None,
        min_B_on_Xu=float(np.min(B_vals[in_Xu])) if counts["Xu"] else None,
        max_B_on_X0=float(np.max(B_vals[in_X0])) if counts["X0"] else None,
        max_generator_excess=excess,
        max_generator_violation=violation,
    )


def sampled_soundness(
    problem: SafetyProblem,
    B: ParametricPolynomial,
    u: Sequence[ParametricPolynomial] | None,
    alpha: float,
    beta: float,
    gamma: float,
    samples: int = 10_000,
    tol: float = 1e-6,
) -> SoundnessReport:
    """Check the four barrier conditions on low-discrepancy samples.

    Conditions (with slack `tol`): B >= 0 on X; B >= 1 on sampled Xu;
    B <= gamma on sampled X0; A B <= -alpha B + beta on sampled X minus Xu,
    the last with a relative allowance tol * (1 + |A B|).
    """
    ext = soundness_extrema(problem, B, u, alpha, beta, samples, tol)
    ok = True
    if ext.min_B_on_X is not None and ext.min_B_on_X < -tol:
        ok = False
    if ext.min_B_on_Xu is not None and ext.min_B_on_Xu < 1.0 - tol:
        ok = False
    if ext.max_B_on_X0 is not None and ext.max_B_on_X0 > gamma + tol:
        ok = False
    if ext.max_generator_violation is not None and ext.max_generator_violation > 0.0:
        ok = False
    return SoundnessReport(
        ok=ok,
        samples=samples,
        min_B_on_X=ext.min_B_on_X,
        min_B_on_Xu=ext.min_B_on_Xu,
        max_B_on_X0=ext.max_B_on_X0,
        max_generator_violation=ext.max_generator_violation,
        counts=ext.counts,
    )
