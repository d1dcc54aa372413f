import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pathcert.conic import (FEASIBLE, INFEASIBLE, ProblemBuilder, SdpProblem, SolverOptions, export_standard,
                            import_standard, solve_feasibility)

from sdps import random_problem, random_program_with_objective


def _farkas_ok(prob: SdpProblem, y: np.ndarray, tol: float = 1e-6) -> bool:
    """``b^T y = 1`` with ``A^T y`` in the dual cone, i.e. a certificate of infeasibility in the ``<=`` sense."""
    if abs(float(prob.rhs @ y) - 1.0) > 1e-8:
        return False
    if prob.n_free and np.max(np.abs(prob.dense_free().T @ y)) > tol:
        return False
    if prob.n_nonneg and np.max(prob.dense_nonneg().T @ y) > tol:
        return False
    for rows, mats in prob.psd_blocks():
        if len(rows):
            S = np.einsum("r,rij->ij", y[rows], mats)
            if np.linalg.eigvalsh(S)[-1] > tol:
                return False
    return True


def test_builder_canonicalizes_triangles_and_duplicates():
    b = ProblemBuilder()
    k = b.add_psd(2)
    r = b.add_row(1.0)
    b.psd(r, k, 1, 0, 0.25)
    b.psd(r, k, 0, 1, 0.25)
    prob = b.build()
    rows, blocks, ii, jj, vals = prob.psd_entries
    assert list(zip(ii, jj, vals)) == [(0, 1, 0.5)]
    X = np.array([[1.0, 2.0], [2.0, 1.0]])
    # off-diagonal coefficients count twice against a symmetric X
    assert prob.equality_residual([], [], [X]) == pytest.approx([2 * 0.5 * 2.0 - 1.0])


def test_problem_rejects_out_of_range_entries():
    with pytest.raises(ValueError):
        SdpProblem(1, 0, (), [0.0], ([1], [0], [1.0]))
    with pytest.raises(ValueError):
        SdpProblem(0, 0, (2,), [0.0], psd_entries=([0], [0], [0], [2], [1.0]))


def test_trivial_sos_is_feasible():
    # t^2 + 1 = [1 t] Q [1 t]^T with Q psd
    b = ProblemBuilder()
    k = b.add_psd(2)
    for power, rhs in enumerate((1.0, 0.0, 1.0)):
        r = b.add_row(rhs)
        if power == 0:
            b.psd(r, k, 0, 0, 1.0)
        elif power == 1:
            b.psd(r, k, 0, 1, 1.0)
        else:
            b.psd(r, k, 1, 1, 1.0)
    out = solve_feasibility(b.build())
    assert out.status == FEASIBLE
    Q = out.solution.psd[0]
    assert np.linalg.eigvalsh(Q)[0] >= -1e-9
    assert Q[0, 0] == pytest.approx(1.0, abs=1e-8) and Q[1, 1] == pytest.approx(1.0, abs=1e-8)


def test_negative_target_is_infeasible_with_witness():
    b = ProblemBuilder()
    k = b.add_psd(1)
    b.psd(b.add_row(-1.0), k, 0, 0, 1.0)
    prob = b.build()
    out = solve_feasibility(prob)
    assert out.status == INFEASIBLE
    assert _farkas_ok(prob, out.solution.y)


def test_free_and_nonneg_variables():
    b = ProblemBuilder()
    f = b.add_free(1)[0]
    s = b.add_nonneg(1)[0]
    r = b.add_row(-3.0)
    b.free(r, f, 1.0)
    b.nonneg(r, s, 1.0)
    out = solve_feasibility(b.build())
    assert out.status == FEASIBLE
    assert out.solution.free[0] + out.solution.nonneg[0] == pytest.approx(-3.0, abs=1e-8)
    assert out.solution.nonneg[0] >= -1e-9


def test_empty_problem_is_feasible():
    assert solve_feasibility(ProblemBuilder().build()).status == FEASIBLE


def test_objective_mode_maximizes_slack():
    # maximize s subject to s + c = 1, s, c >= 0
    b = ProblemBuilder()
    s, c = b.add_nonneg(2)
    r = b.add_row(1.0)
    b.nonneg(r, s, 1.0)
    b.nonneg(r, c, 1.0)
    b.obj_nonneg[s] = -1.0
    out = solve_feasibility(b.build())
    assert out.status == FEASIBLE
    assert out.solution.nonneg[s] == pytest.approx(1.0, abs=1e-6)


def test_iteration_cap_yields_unknown_not_a_verdict():
    prob = random_problem(np.random.default_rng(3))
    out = solve_feasibility(prob, SolverOptions(max_iter=1))
    assert out.status in (FEASIBLE, "Unknown")
    if out.status == FEASIBLE:
        assert np.max(np.abs(prob.equality_residual(*_parts(out.solution)))) <= 1e-8


def _parts(sol):
    return sol.free, sol.nonneg, sol.psd


def test_options_from_environment(monkeypatch):
    monkeypatch.setenv("PATHCERT_SDP_MAXITER", "17")
    monkeypatch.setenv("PATHCERT_SDP_TOL", "1e-7")
    opts = SolverOptions.from_env()
    assert opts.max_iter == 17 and opts.tol_eq == 1e-7
    assert SolverOptions.from_env(max_iter=5).max_iter == 5


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 31 - 1), st.booleans())
def test_random_programs_are_decided_correctly(seed, infeasible):
    prob = random_problem(np.random.default_rng(seed), infeasible)
    out = solve_feasibility(prob)
    if infeasible:
        assert out.status == INFEASIBLE
        assert _farkas_ok(prob, out.solution.y)
    else:
        assert out.status == FEASIBLE
        sol = out.solution
        assert np.max(np.abs(prob.equality_residual(*_parts(sol)))) <= 1e-8
        assert all(np.linalg.eigvalsh(X)[0] >= -1e-9 for X in sol.psd)
        assert np.all(sol.nonneg >= -1e-9)


def test_sdpa_text_layout():
    b = ProblemBuilder()
    b.add_free(1)
    k = b.add_psd(2)
    r = b.add_row(1.5)
    b.free(r, 0, 2.0)
    b.psd(r, k, 0, 1, 1.0)
    text = export_standard(b.build())
    lines = text.splitlines()
    assert lines[0].startswith('"pathcert-sdpa 1 free=1 nonneg=0')
    assert lines[1:4] == ["1", "2", "2 -2"]
    # the free column appears as a +/- split in the diagonal block
    assert "1 2 1 1 2.0" in lines and "1 2 2 2 -2.0" in lines
    assert import_standard(text).same_as(b.build())


def test_import_plain_sdpa_without_header():
    text = "* comment\n1\n2\n2 -1\n3.0\n1 1 1 1 1.0\n1 1 2 2 1.0\n1 2 1 1 1.0\n"
    prob = import_standard(text)
    assert prob.n_free == 0 and prob.n_nonneg == 1 and prob.psd_sizes == (2,)
    assert prob.rhs.tolist() == [3.0]


@pytest.mark.parametrize("text", ["", "1\n", "1\n1\n2\n1 2\n1 1 1 1 1\n",
                                  "1\n2\n-1 -1\n1\n1 1 1 1 1\n"])
def test_import_rejects_malformed_documents(text):
    with pytest.raises(ValueError):
        import_standard(text)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_sdpa_round_trip_is_exact(seed):
    prob = random_program_with_objective(np.random.default_rng(seed))
    again = import_standard(export_standard(prob))
    assert again.same_as(prob)
    assert export_standard(again) == export_standard(prob)
