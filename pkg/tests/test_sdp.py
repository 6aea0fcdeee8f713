import numpy as np
import pytest

from sbarrier.sdp import ConicProblem, solve


def min_x_symmetric_offdiag_one() -> ConicProblem:
    """minimize x subject to [[x, 1], [1, x]] PSD; optimum x* = 1."""
    prob = ConicProblem()
    b = prob.add_psd_block(2)
    x = prob.add_scalar(nonneg=False)
    prob.add_equality({prob.entry_index(b, 0, 0): 1.0, x: -1.0}, 0.0)
    prob.add_equality({prob.entry_index(b, 1, 1): 1.0, x: -1.0}, 0.0)
    prob.add_equality({prob.entry_index(b, 0, 1): 1.0}, 1.0)
    prob.objective = {x: 1.0}
    return prob


class TestTinyProblems:
    def test_min_x_offdiag_one(self):
        sol = solve(min_x_symmetric_offdiag_one())
        assert sol.status == "Optimal"
        assert sol.objective == pytest.approx(1.0, abs=1e-8)

    def test_fixed_indefinite_matrix_infeasible(self):
        prob = ConicProblem()
        b = prob.add_psd_block(2)
        prob.add_equality({prob.entry_index(b, 0, 0): 1.0}, 1.0)
        prob.add_equality({prob.entry_index(b, 1, 1): 1.0}, 1.0)
        prob.add_equality({prob.entry_index(b, 0, 1): 1.0}, 2.0)
        sol = solve(prob)
        assert sol.status == "Infeasible"

    def test_max_of_two_scalars(self):
        a, b_val = 0.3, 0.7
        prob = ConicProblem()
        blk = prob.add_psd_block(2)
        t = prob.add_scalar(nonneg=False)
        prob.add_equality({prob.entry_index(blk, 0, 0): 1.0, t: -1.0}, -a)
        prob.add_equality({prob.entry_index(blk, 1, 1): 1.0, t: -1.0}, -b_val)
        prob.add_equality({prob.entry_index(blk, 0, 1): 1.0}, 0.0)
        prob.objective = {t: 1.0}
        sol = solve(prob)
        assert sol.status == "Optimal"
        assert sol.objective == pytest.approx(0.7, abs=1e-8)

    def test_nonneg_scalar_lp(self):
        prob = ConicProblem()
        x = prob.add_scalar(nonneg=True)
        y = prob.add_scalar(nonneg=True)
        prob.add_equality({x: 1.0, y: 1.0}, 2.0)
        prob.objective = {x: 1.0}
        sol = solve(prob)
        assert sol.status == "Optimal"
        assert sol.objective == pytest.approx(0.0, abs=1e-8)

    def test_unbounded(self):
        prob = ConicProblem()
        x = prob.add_scalar(nonneg=False)
        y = prob.add_scalar(nonneg=True)
        prob.add_equality({x: 1.0, y: 1.0}, 0.0)
        prob.objective = {x: 1.0}
        sol = solve(prob)
        assert sol.status == "Unbounded"

    def test_empty_row_contradiction(self):
        prob = ConicProblem()
        prob.add_scalar(nonneg=True)
        prob.add_equality({}, 1.0)
        sol = solve(prob)
        assert sol.status == "Infeasible"


class TestValidation:
    def test_optimal_certifies_its_residuals(self):
        sol = solve(min_x_symmetric_offdiag_one(), tol_eq=1e-8, tol_psd=1e-7)
        assert sol.status == "Optimal"
        assert sol.eq_residual <= 1e-8
        assert sol.min_eigenvalue >= -1e-7

    def test_duality_gap_small_at_optimal(self):
        sol = solve(min_x_symmetric_offdiag_one())
        assert sol.duality_gap is not None
        assert sol.duality_gap <= 1e-6 * (1 + abs(sol.objective))

    def test_objective_offset(self):
        prob = min_x_symmetric_offdiag_one()
        prob.obj_offset = 2.5
        sol = solve(prob)
        assert sol.objective == pytest.approx(3.5, abs=1e-7)

    def test_unknown_variable_rejected(self):
        prob = ConicProblem()
        prob.add_scalar(nonneg=True)
        prob.add_equality({5: 1.0}, 0.0)
        sol = solve(prob)
        assert sol.status == "NumericalTrouble"
        assert "exception" in sol.solver_status

    def test_blocks_before_scalars_enforced(self):
        prob = ConicProblem()
        prob.add_scalar(nonneg=True)
        with pytest.raises(ValueError):
            prob.add_psd_block(2)


class TestDeterminism:
    def test_repeat_solves_bit_identical(self):
        a = solve(min_x_symmetric_offdiag_one())
        b = solve(min_x_symmetric_offdiag_one())
        assert np.array_equal(a.x, b.x)
        assert a.objective == b.objective
        assert a.iterations == b.iterations


class TestTextFormat:
    def test_round_trip(self):
        prob = min_x_symmetric_offdiag_one()
        prob.obj_offset = -1.25
        text = prob.to_text()
        back = ConicProblem.from_text(text)
        assert back.to_text() == text
        a, b = solve(prob), solve(back)
        assert a.status == b.status == "Optimal"
        assert a.objective == b.objective

    def test_rejects_garbage(self):
        with pytest.raises(ValueError):
            ConicProblem.from_text("not a problem\n")


class TestLayout:
    def test_entry_index_symmetry(self):
        prob = ConicProblem()
        b0 = prob.add_psd_block(3)
        assert prob.entry_index(b0, 2, 1) == prob.entry_index(b0, 1, 2)
        seen = {
            prob.entry_index(b0, i, j) for j in range(3) for i in range(j + 1)
        }
        assert seen == set(range(6))

    def test_block_matrix_reconstruction(self):
        prob = ConicProblem()
        b0 = prob.add_psd_block(2)
        x = np.array([1.0, 2.0, 4.0])
        mat = prob.block_matrix(b0, x)
        assert np.array_equal(mat, np.array([[1.0, 2.0], [2.0, 4.0]]))
