"""Standard-form conic (semidefinite) problems and a validated solver wrapper.

Problem form:

    minimize    sum_j objective_j * v_j  (+ offset)
    subject to  sum_j row_j * v_j = rhs          (sparse equality rows)
                each PSD block, assembled from its upper-triangle entries
                of v, is positive semidefinite
                each scalar marked nonneg satisfies v_j >= 0

Variables are laid out as: the upper-triangle entries of each PSD block in
declaration order (column-major within a block), followed by the scalars.

Solving delegates to the Clarabel interior-point solver, but its status code
is never trusted on its own: every candidate solution is re-validated with an
independent dense eigenvalue and residual check, and the status is downgraded
to NumericalTrouble when the re-validation fails.  `solve` never raises for
solver-side failures so parameter sweeps can continue past bad points.

Before solving, each equality row (and the objective) is scaled to unit
infinity norm; reported objective values are descaled.  Residuals are always
measured against the original unscaled data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
import scipy.sparse as sparse

_SQRT2 = math.sqrt(2.0)


@dataclass
class ConicProblem:
    """Sparse standard-form conic problem; see module docstring for layout."""

    block_sizes: list[int] = field(default_factory=list)
    scalar_nonneg: list[bool] = field(default_factory=list)
    rows: list[dict[int, float]] = field(default_factory=list)
    rhs: list[float] = field(default_factory=list)
    objective: dict[int, float] = field(default_factory=dict)
    obj_offset: float = 0.0

    # -- variable layout -----------------------------------------------------

    def add_psd_block(self, size: int) -> int:
        if size < 1:
            raise ValueError(f"block size must be >= 1, got {size}")
        if self.scalar_nonneg:
            # Scalar indices are offsets past the block entries, so blocks
            # must all be declared first.
            raise ValueError("declare all PSD blocks before any scalar")
        self.block_sizes.append(size)
        return len(self.block_sizes) - 1

    def add_scalar(self, nonneg: bool) -> int:
        """Returns the global variable index of the new scalar."""
        self.scalar_nonneg.append(nonneg)
        return self.num_block_vars() + len(self.scalar_nonneg) - 1

    def add_equality(self, row: dict[int, float], rhs: float) -> None:
        self.rows.append(dict(row))
        self.rhs.append(float(rhs))

    def block_triangle_size(self, block: int) -> int:
        s = self.block_sizes[block]
        return s * (s + 1) // 2

    def num_block_vars(self) -> int:
        return sum(s * (s + 1) // 2 for s in self.block_sizes)

    def num_vars(self) -> int:
        return self.num_block_vars() + len(self.scalar_nonneg)

    def block_offset(self, block: int) -> int:
        return sum(self.block_triangle_size(b) for b in range(block))

    def entry_index(self, block: int, i: int, j: int) -> int:
        """Global index of symmetric entry (i, j) of a block (either triangle)."""
        if i > j:
            i, j = j, i
        s = self.block_sizes[block]
        if not 0 <= j < s:
            raise IndexError(f"entry ({i},{j}) out of range for block size {s}")
        return self.block_offset(block) + j * (j + 1) // 2 + i

    def scalar_index(self, scalar: int) -> int:
        return self.num_block_vars() + scalar

    def validate(self) -> None:
        nv = self.num_vars()
        for row in self.rows:
            for idx in row:
                if not 0 <= idx < nv:
                    raise ValueError(f"equality references unknown variable {idx}")
        for idx in self.objective:
            if not 0 <= idx < nv:
                raise ValueError(f"objective references unknown variable {idx}")

    def block_matrix(self, block: int, x: np.ndarray) -> np.ndarray:
        """Reconstruct a symmetric block from a solution vector."""
        s = self.block_sizes[block]
        off = self.block_offset(block)
        mat = np.empty((s, s))
        for j in range(s):
            for i in range(j + 1):
                v = x[off + j * (j + 1) // 2 + i]
                mat[i, j] = v
                mat[j, i] = v
        return mat

    # -- documented sparse text format ----------------------------------------
    #
    #   conic-problem v1
    #   blocks <s1> <s2> ...
    #   scalars <f|n><f|n>...          (f = free, n = nonneg, one char each)
    #   offset <float>
    #   obj <idx>:<coeff> ...
    #   eq <rhs> <idx>:<coeff> ...     (one line per equality row)
    #
    # Floats use repr round-tripping; indices follow the layout above.

    def to_text(self) -> str:
        lines = ["conic-problem v1"]
        lines.append("blocks " + " ".join(str(s) for s in self.block_sizes))
        lines.append("scalars " + "".join("n" if b else "f" for b in self.scalar_nonneg))
        lines.append(f"offset {self.obj_offset!r}")
        obj = " ".join(f"{i}:{c!r}" for i, c in sorted(self.objective.items()))
        lines.append("obj " + obj)
        for row, rhs in zip(self.rows, self.rhs):
            body = " ".join(f"{i}:{c!r}" for i, c in sorted(row.items()))
            lines.append(f"eq {rhs!r} " + body)
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "ConicProblem":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines or lines[0].strip() != "conic-problem v1":
            raise ValueError("not a conic-problem v1 document")
        prob = cls()
        for ln in lines[1:]:
            head, _, rest = ln.partition(" ")
            if head == "blocks":
                prob.block_sizes = [int(tok) for tok in rest.split()]
            elif head == "scalars":
                prob.scalar_nonneg = [ch == "n" for ch in rest.strip()]
            elif head == "offset":
                prob.obj_offset = float(rest)
            elif head == "obj":
                prob.objective = {
                    int(i): float(c)
                    for i, c in (tok.split(":") for tok in rest.split())
                }
            elif head == "eq":
                toks = rest.split()
                prob.rhs.append(float(toks[0]))
                prob.rows.append(
                    {int(i): float(c) for i, c in (tok.split(":") for tok in toks[1:])}
                )
            else:
                raise ValueError(f"unknown line {head!r} in conic-problem document")
        prob.validate()
        return prob


@dataclass
class ConicSolution:
    status: str  # Optimal | Infeasible | Unbounded | NumericalTrouble | IterationLimit
    x: np.ndarray | None
    objective: float | None
    eq_residual: float | None
    min_eigenvalue: float | None
    iterations: int = 0
    solver_status: str = ""
    duality_gap: float | None = None

    def value(self, index: int) -> float:
        if self.x is None:
            raise ValueError(f"no primal values available (status {self.status})")
        return float(self.x[index])


def _residuals(problem: ConicProblem, x: np.ndarray) -> tuple[float, float]:
    """Equality infinity-norm residual and min eigenvalue over all cone parts."""
    eq_res = 0.0
    for row, rhs in zip(problem.rows, problem.rhs):
        val = sum(c * x[i] for i, c in row.items())
        eq_res = max(eq_res, abs(val - rhs))
    min_eig = math.inf
    for b in range(len(problem.block_sizes)):
        mat = problem.block_matrix(b, x)
        if problem.block_sizes[b] == 1:
            min_eig = min(min_eig, mat[0, 0])
        else:
            min_eig = min(min_eig, float(np.linalg.eigvalsh(mat)[0]))
    off = problem.num_block_vars()
    for s, nonneg in enumerate(problem.scalar_nonneg):
        if nonneg:
            min_eig = min(min_eig, float(x[off + s]))
    if min_eig is math.inf:
        min_eig = 0.0
    return eq_res, min_eig


def solve(
    problem: ConicProblem,
    tol_eq: float = 1e-8,
    tol_psd: float = 1e-7,
    max_iter: int = 200,
) -> ConicSolution:
    """Solve a conic problem; statuses are re-validated, never trusted blindly."""
    try:
        problem.validate()
        return _solve_clarabel(problem, tol_eq, tol_psd, max_iter)
    except Exception as exc:  # solver-side failures must not kill sweeps
        return ConicSolution(
            status="NumericalTrouble",
            x=None,
            objective=None,
            eq_residual=None,
            min_eigenvalue=None,
            solver_status=f"exception: {exc}",
        )


def _solve_clarabel(
    problem: ConicProblem, tol_eq: float, tol_psd: float, max_iter: int
) -> ConicSolution:
    import clarabel

    nv = problem.num_vars()
    rows_i: list[int] = []
    cols_i: list[int] = []
    data: list[float] = []
    b_vec: list[float] = []
    cones = []
    cursor = 0

    # Zero cone: scaled equality rows (unit infinity norm per row).
    n_eq = 0
    for row, rhs in zip(problem.rows, problem.rhs):
        scale = max((abs(c) for c in row.values()), default=0.0)
        if scale == 0.0:
            if abs(rhs) > tol_eq:
                return ConicSolution(
                    status="Infeasible",
                    x=None,
                    objective=None,
                    eq_residual=None,
                    min_eigenvalue=None,
                    solver_status="empty row with nonzero rhs",
                )
            continue
        for idx, c in sorted(row.items()):
            rows_i.append(cursor)
            cols_i.append(idx)
            data.append(c / scale)
        b_vec.append(rhs / scale)
        cursor += 1
        n_eq += 1
    if n_eq:
        cones.append(clarabel.ZeroConeT(n_eq))

    # Nonnegative scalars: slack s = v >= 0.
    nonneg_ids = [
        problem.scalar_index(s)
        for s, flag in enumerate(problem.scalar_nonneg)
        if flag
    ]
    if nonneg_ids:
        for idx in nonneg_ids:
            rows_i.append(cursor)
            cols_i.append(idx)
            data.append(-1.0)
            b_vec.append(0.0)
            cursor += 1
        cones.append(clarabel.NonnegativeConeT(len(nonneg_ids)))

    # PSD blocks: slack s = scaled-svec(block) in the PSD triangle cone.
    for b, size in enumerate(problem.block_sizes):
        off = problem.block_offset(b)
        for j in range(size):
            for i in range(j + 1):
                rows_i.append(cursor)
                cols_i.append(off + j * (j + 1) // 2 + i)
                data.append(-1.0 if i == j else -_SQRT2)
                b_vec.append(0.0)
                cursor += 1
        cones.append(clarabel.PSDTriangleConeT(size))

    A = sparse.csc_matrix(
        (data, (rows_i, cols_i)), shape=(cursor, nv), dtype=float
    )
    b_arr = np.asarray(b_vec, dtype=float)

    q = np.zeros(nv)
    for idx, c in problem.objective.items():
        q[idx] = c
    obj_scale = float(np.max(np.abs(q))) if np.any(q) else 1.0
    q_scaled = q / obj_scale
    P = sparse.csc_matrix((nv, nv), dtype=float)

    settings = clarabel.DefaultSettings()
    settings.verbose = False
    settings.max_iter = int(max_iter)
    solver = clarabel.DefaultSolver(P, q_scaled, A, b_arr, cones, settings)
    sol = solver.solve()
    raw = str(sol.status)

    infeasible = raw in ("PrimalInfeasible", "AlmostPrimalInfeasible")
    unbounded = raw in ("DualInfeasible", "AlmostDualInfeasible")
    candidate = raw in ("Solved", "AlmostSolved")
    iter_limit = raw in ("MaxIterations", "MaxTime")

    if infeasible or unbounded:
        return ConicSolution(
            status="Infeasible" if infeasible else "Unbounded",
            x=None,
            objective=None,
            eq_residual=None,
            min_eigenvalue=None,
            iterations=sol.iterations,
            solver_status=raw,
        )

    x = np.asarray(sol.x, dtype=float)
    eq_res, min_eig = _residuals(problem, x)
    objective = float(q @ x) + problem.obj_offset
    gap = abs(float(sol.obj_val) - float(sol.obj_val_dual)) * obj_scale

    validated = eq_res <= tol_eq and min_eig >= -tol_psd
    if candidate and validated:
        status = "Optimal"
    elif iter_limit:
        status = "IterationLimit"
    else:
        status = "NumericalTrouble"
    return ConicSolution(
        status=status,
        x=x,
        objective=objective,
        eq_residual=eq_res,
        min_eigenvalue=min_eig,
        iterations=sol.iterations,
        solver_status=raw,
        duality_gap=gap,
    )
