import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from pathcert.checker import (NSAFE, REJECTED, SAFE, VERIFIED, CollisionFound, NoneFound, certify_cell, certify_plan,
                              check_decomposition, placed_distance, sample_falsify, verify_certificate)
from pathcert.conic import solve_feasibility
from pathcert.geometry import CollisionPair, Sphere
from pathcert.kinematics import PRISMATIC, WORLD, Joint, KinematicChain, Link, numeric_link_transforms, \
    numeric_point_positions
from pathcert.plan import MotionPlan, PlanSegment, linear_segment
from pathcert.polynomial import Polynomial
from pathcert.scene import Scene
from pathcert.soscert import GAMMA_MIN, assemble_pair_program, decomposition_template

from sdps import matrix_from_grams, random_psd
from scenes import pendulum_plan, pendulum_scene, random_trial

t = Polynomial.variable("t")


# -- decomposition check ------------------------------------------------------------

@pytest.mark.parametrize("exact", [False, True])
def test_hand_built_certificate_for_t(exact):
    chk = check_decomposition([[t]], 1, [[1.0]], [[0.0]], GAMMA_MIN, exact=exact)
    assert chk.ok
    # the slack itself is the only residual
    assert chk.residual_l1 == pytest.approx(GAMMA_MIN)


@pytest.mark.parametrize("exact", [False, True])
def test_negative_gram_is_rejected(exact):
    chk = check_decomposition([[t]], 1, [[-1.0]], [[0.0]], GAMMA_MIN, exact=exact)
    assert not chk.ok
    assert "PSD" in chk.reason or "eigen" in chk.reason


def test_tiny_negative_eigenvalues_are_projected():
    chk = check_decomposition([[t]], 1, [[1.0]], [[-1e-12]], GAMMA_MIN)
    assert chk.ok
    assert chk.moved_mass > 0


def test_structural_mismatches_are_reported():
    assert "degree" in check_decomposition([[t ** 3]], 2, np.eye(2), [[0.0]], 1e-3).reason
    assert "shape" in check_decomposition([[t]], 1, np.eye(2), [[0.0]], 1e-3).reason
    assert "nu" in check_decomposition([[Polynomial.constant(1.0)]], 0, [[1.0]], [[1.0]], 1e-3).reason
    assert not check_decomposition([[t]], 1, [[1.0]], [[0.0]], 0.0).ok
    asym = [[t, t], [Polynomial(), t]]
    assert "symmetric" in check_decomposition(asym, 1, np.eye(2), np.eye(2), 1e-3).reason


def test_residual_above_slack_fails():
    chk = check_decomposition([[t + 0.01]], 1, [[1.0]], [[0.0]], GAMMA_MIN)
    assert not chk.ok and "exceeds" in chk.reason


def test_array_and_polynomial_inputs_agree():
    coeffs = np.zeros((2, 2, 3))
    coeffs[0, 0] = [0.0, 1.0, -1.0]
    coeffs[1, 1] = [1.0, 0.0, 0.0]
    tpl = decomposition_template(2)
    Ql = np.zeros((4, 4))
    Ql[2, 2] = 1.0
    Qn = np.array([[1.0, 0.0], [0.0, 0.0]])
    polys = [[Polynomial.from_coeffs(coeffs[a, b], "t") for b in range(2)] for a in range(2)]
    g = 1e-6
    shifted = coeffs.copy()
    shifted[0, 0, 0] += g
    shifted[1, 1, 0] += g
    a1 = check_decomposition(shifted, 2, Ql, Qn, g)
    a2 = check_decomposition([[p + (g if i == j else 0.0) for j, p in enumerate(row)] for i, row in enumerate(polys)],
                             2, Ql, Qn, g)
    assert a1.ok and a2.ok
    assert a1.residual_l1 == pytest.approx(a2.residual_l1, abs=1e-15)
    np.testing.assert_allclose(matrix_from_grams(Ql, Qn, tpl, 2), coeffs)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 31 - 1), st.integers(0, 6), st.integers(1, 3), st.booleans())
def test_constructed_decompositions_verify(seed, n, m, exact):
    rng = np.random.default_rng(seed)
    tpl = decomposition_template(n)
    lam, nu = tpl.gram_sizes(m)
    Ql = random_psd(rng, lam)
    Qn = random_psd(rng, nu) if nu else None
    coeffs = matrix_from_grams(Ql, Qn, tpl, m)
    gamma = 1e-3
    for a in range(m):
        coeffs[a, a, 0] += gamma
    chk = check_decomposition(coeffs, n, Ql, Qn, gamma, exact=exact)
    assert chk.ok, chk.reason


# -- certificate verification ------------------------------------------------------

@pytest.fixture(scope="module")
def pendulum_cert():
    scene = pendulum_scene()
    seg = pendulum_plan(1.09).unit_segments()[0]
    prog = assemble_pair_program(scene.pairs[0], seg, scene, 1)
    out = solve_feasibility(prog.problem)
    assert out.feasible
    return scene, seg, prog.certificate(out.solution)


@pytest.mark.parametrize("exact", [False, True])
def test_solver_certificate_verifies(pendulum_cert, exact):
    scene, seg, cert = pendulum_cert
    rep = verify_certificate(cert, scene, seg, exact=exact)
    assert rep.verdict == VERIFIED, rep.diagnostics
    assert all(c.residual_l1 <= c.gamma for c in rep.constraints)


def test_verified_certificate_separates_along_the_segment(pendulum_cert):
    """Direct geometric evaluation at 1000 parameters, independent of the polynomial rebuild."""
    scene, seg, cert = pendulum_cert
    ts = np.linspace(0.0, 1.0, 1000)
    a = np.stack([np.polynomial.polynomial.polyval(ts, row) for row in cert.a], axis=1)
    b = np.polynomial.polynomial.polyval(ts, cert.b)
    T = numeric_link_transforms(scene.chain, seg.evaluate(ts))
    tip, wall = scene.bodies
    c = numeric_point_positions(T, tip.link, tip.points)[:, 0]
    na = np.linalg.norm(a, axis=1)
    assert np.all(np.einsum("ij,ij->i", a, c) + b - 1 - tip.radius * na >= -1e-12)
    for v in wall.vertices:
        assert np.all(-(a @ v + b) - 1 >= -1e-12)


def test_wrong_pair_and_shapes_are_rejected(pendulum_cert):
    scene, seg, cert = pendulum_cert
    bad_pair = type(cert)((1, 0), cert.pair_index, cert.segment_index, cert.degree, cert.a, cert.b, cert.constraints)
    assert verify_certificate(bad_pair, scene, seg).verdict == REJECTED
    bad_shape = type(cert)(cert.pair, 0, 0, 2, cert.a, cert.b, cert.constraints)
    assert verify_certificate(bad_shape, scene, seg).verdict == REJECTED
    dropped = type(cert)(cert.pair, 0, 0, cert.degree, cert.a, cert.b, cert.constraints[:-1])
    assert verify_certificate(dropped, scene, seg).verdict == REJECTED


def test_certificate_for_another_segment_is_rejected(pendulum_cert):
    scene, _, cert = pendulum_cert
    other = linear_segment({"z": 0.0, "tau": 0.0}, {"z": 1.5, "tau": 0.5})
    assert verify_certificate(cert, scene, other).verdict == REJECTED


def test_non_separating_hyperplane_is_rejected(pendulum_cert):
    scene, seg, cert = pendulum_cert
    # a = 0 leaves h = -g on both sides, which no multiplier can match
    flat = type(cert)(cert.pair, 0, 0, cert.degree, np.zeros_like(cert.a), cert.b, cert.constraints)
    assert verify_certificate(flat, scene, seg).verdict == REJECTED
    # shifting b by far more than the slack breaks the identities
    b = cert.b.copy()
    b[0] += 100 * max(c.gamma for c in cert.constraints)
    moved = type(cert)(cert.pair, 0, 0, cert.degree, cert.a, b, cert.constraints)
    assert verify_certificate(moved, scene, seg).verdict == REJECTED


# -- falsification --------------------------------------------------------------------

def _slider_scene():
    chain = KinematicChain((Link("cart", WORLD, Joint(PRISMATIC, (1.0, 0.0, 0.0), variable="x")),))
    bodies = (Sphere((0.0, 0.0, 0.0), 0.5, "cart"), Sphere((3.0, 0.0, 0.0), 0.5))
    return Scene(chain, bodies, (CollisionPair(0, 1),))


def test_falsifier_finds_first_collision():
    scene = _slider_scene()
    plan = MotionPlan((linear_segment({"x": 0.0}, {"x": 4.0}),))
    rep = sample_falsify(plan, scene, 1001)
    assert isinstance(rep, CollisionFound)
    # contact begins at x = 2, i.e. t = 0.5
    assert rep.t == pytest.approx(0.5)
    assert rep.min_distance <= 0
    assert placed_distance(scene, plan[0], 0, rep.t)[0] <= 0
    assert rep.configuration == {"x": pytest.approx(2.0)}


def test_falsifier_on_clear_constant_plan():
    scene = _slider_scene()
    plan = MotionPlan((PlanSegment({"x": [0.0]}),))
    rep = sample_falsify(plan, scene, 50)
    assert isinstance(rep, NoneFound) and rep.samples == 50
    with pytest.raises(ValueError):
        sample_falsify(plan, scene, 1)


def test_falsifier_scans_segments_in_order():
    scene = _slider_scene()
    plan = MotionPlan((linear_segment({"x": 0.0}, {"x": 1.0}), linear_segment({"x": 1.0}, {"x": 2.5})))
    rep = sample_falsify(plan, scene, 101)
    assert rep.segment == 1
    only_first = sample_falsify(plan, scene, 101, segments=[0])
    assert isinstance(only_first, NoneFound)


# -- plan certification -------------------------------------------------------------------

def test_zero_pairs_is_vacuously_safe():
    scene = pendulum_scene()
    empty = Scene(scene.chain, scene.bodies, ())
    rep = certify_plan(pendulum_plan(1.5), empty)
    assert rep.verdict == SAFE and rep.cells == []


def test_pendulum_verdicts():
    scene = pendulum_scene()
    safe = certify_plan(pendulum_plan(1.09), scene)
    assert safe.verdict == SAFE
    assert safe.cells[0].check.verified
    unsafe = certify_plan(pendulum_plan(1.11), scene)
    assert unsafe.verdict == NSAFE
    assert unsafe.failing[0].hint


def test_summary_counts_and_parallel_agreement():
    scene = pendulum_scene()
    plan = MotionPlan((linear_segment({"z": 0.0, "tau": 0.0}, {"z": 0.5, "tau": 0.2}),
                       linear_segment({"z": 0.5, "tau": 0.2}, {"z": 1.5, "tau": 0.5})))
    serial = certify_plan(plan, scene)
    parallel = certify_plan(plan, scene, jobs=2)
    assert [c.verdict for c in serial.cells] == [c.verdict for c in parallel.cells] == [SAFE, NSAFE]
    d = serial.to_dict()
    assert d["cells"] == 2 and d["safe_cells"] == 1 and d["failing"] == [(1, 0)]


def test_early_stop_skips_remaining_pairs():
    scene = pendulum_scene()
    doubled = Scene(scene.chain, scene.bodies + (Sphere((5.0, 5.0, 5.0), 0.1),),
                    (CollisionPair(0, 1), CollisionPair(0, 2)))
    rep = certify_plan(pendulum_plan(1.5), doubled, early_stop=True)
    assert [c.solve_status for c in rep.cells][1] == "Skipped"
    assert rep.verdict == NSAFE


def test_certify_cell_reports_timings():
    scene = pendulum_scene()
    cell = certify_cell(scene, pendulum_plan(1.09)[0], 0, 0, exact_verify=True)
    assert cell.verdict == SAFE
    assert set(cell.timings) == {"build", "solve", "verify"}


@settings(max_examples=12, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(st.integers(0, 2 ** 31 - 1))
def test_safe_verdicts_survive_falsification(seed):
    scene, plan = random_trial(np.random.default_rng(seed))
    rep = certify_plan(plan, scene)
    if rep.verdict == SAFE:
        assert isinstance(sample_falsify(plan, scene, 2000), NoneFound)
