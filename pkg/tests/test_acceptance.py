"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines inline;
they are also collected into an "acceptance criteria" block at the end of
any pytest run.
"""

import statistics
import time

import numpy as np
import pytest

from pathcert.checker import (NSAFE, REJECTED, SAFE, CollisionFound, NoneFound, certify_cell, certify_plan,
                              check_decomposition, placed_distance, sample_falsify, verify_certificate)
from pathcert.cli import fk_deviation
from pathcert.conic import FEASIBLE, INFEASIBLE, ProblemBuilder, export_standard, import_standard, \
    solve_feasibility
from pathcert.geometry import CollisionPair, Sphere
from pathcert.kinematics import WORLD, compose_with_plan, forward_kinematics_rational, numeric_link_transforms, \
    numeric_point_positions
from pathcert.plan import PlanSegment
from pathcert.polynomial import Monomial, Polynomial
from pathcert.scene import Scene
from pathcert.soscert import (GAMMA_MIN, AffinePolyMatrix, HyperplaneTemplate, assemble_pair_program,
                              build_polytope_side, build_sphere_side, decomposition_template, extract_grams,
                              lower_matrix_constraint)

from sdps import matrix_from_grams, random_problem, random_program_with_objective, random_psd
from scenes import (arm_tour_plan, box, pendulum_chain, pendulum_plan, pendulum_scene, planar_arm_chain,
                    planar_arm_scene, random_trial)


# -- 1 ------------------------------------------------------------------------------

def test_01_soundness_fuzz(criterion):
    rng = np.random.default_rng(20240601)
    start = time.perf_counter()
    trials, violations = 200, []
    tally = {}
    dofs, pair_counts, degrees = set(), set(), set()
    for k in range(trials):
        scene, plan = random_trial(rng)
        dofs.add(scene.chain.dof)
        pair_counts.add(len(scene.pairs))
        degrees.update(s.degree for s in plan)
        verdict = certify_plan(plan, scene, 1).verdict
        found = sample_falsify(plan, scene, 10_000)
        key = (verdict, found.outcome)
        tally[key] = tally.get(key, 0) + 1
        if verdict == SAFE and isinstance(found, CollisionFound):
            violations.append(k)
    elapsed = time.perf_counter() - start
    coverage = dofs == {1, 2, 3} and pair_counts == {1, 2, 3, 4} and degrees == {1, 3}
    # a vacuous run (never SAFE or never colliding) would not exercise the contract
    exercised = tally.get((SAFE, "NoneFound"), 0) > 0 and tally.get((NSAFE, "CollisionFound"), 0) > 0
    ok = not violations and elapsed < 600 and coverage and exercised
    counts = ", ".join(f"{v}/{f}={n}" for (v, f), n in sorted(tally.items()))
    criterion(1, "soundness fuzzing", ok,
              f"{trials} scenes, {len(violations)} violations, {elapsed:.1f}s; {counts}")
    assert not violations, f"SAFE verdict on colliding trials {violations}"
    assert elapsed < 600
    assert coverage and exercised


# -- 2 ------------------------------------------------------------------------------

def test_02_discrimination(criterion):
    start = time.perf_counter()
    delta = 0.02
    scene = pendulum_scene()
    plan_a, plan_b = pendulum_plan(1.09), pendulum_plan(1.11)
    ts = np.linspace(0.0, 1.0, 2001)
    clear_a = float(placed_distance(scene, plan_a[0], 0, ts).min())
    clear_b = float(placed_distance(scene, plan_b[0], 0, ts).min())
    fixture_ok = abs(clear_a - delta / 2) <= 1e-9 and abs(clear_b + delta / 2) <= 1e-9
    rep_a = certify_plan(plan_a, scene, 1)
    rep_b = certify_plan(plan_b, scene, 1)
    witness = sample_falsify(plan_b, scene, 100_000)
    elapsed = time.perf_counter() - start
    ok = (fixture_ok and rep_a.verdict == SAFE and rep_b.verdict == NSAFE and isinstance(witness, CollisionFound)
          and elapsed < 5.0)
    criterion(2, "discrimination at delta = 0.02", ok,
              f"clearances {clear_a:+.6f}/{clear_b:+.6f}, A={rep_a.verdict}, B={rep_b.verdict}+"
              f"{witness.outcome}, {elapsed:.2f}s")
    assert fixture_ok
    assert rep_a.verdict == SAFE
    assert rep_b.verdict == NSAFE and isinstance(witness, CollisionFound)
    assert elapsed < 5.0


# -- 3 ------------------------------------------------------------------------------

def test_03_pendulum_fk_golden(criterion):
    tau, z = Polynomial.variable("tau"), Polynomial.variable("z")
    scene = pendulum_scene()
    golden = True
    for length in (1.0, 0.75, 2.0):
        fk = forward_kinematics_rational(pendulum_chain(), WORLD, "arm", (0.0, length, 0.0))
        nx, ny, nz = fk.numerators
        golden &= fk.denominator == 1 + tau ** 2
        golden &= nx == length * 2 * tau + z * (1 + tau ** 2)
        golden &= ny == length * (1 - tau ** 2)
        golden &= nz.is_zero()
    tip = forward_kinematics_rational(pendulum_chain(), WORLD, "arm", (0.0, 1.0, 0.0))
    # tau = z = 1 puts the arm horizontal: x = l + 1
    golden &= tip.evaluate({"tau": 1.0, "z": 1.0})[0] == 2.0
    grid = np.linspace(-1.0, 1.0, 100)
    config = {"z": 2.0 * grid, "tau": np.tan(2.4 * grid / 2)}
    T = numeric_link_transforms(scene.chain, config)
    num = numeric_point_positions(T, "arm", [(0.0, 1.0, 0.0)])[:, 0]
    sym = np.array([tip.evaluate({"z": config["z"][i], "tau": config["tau"][i]}) for i in range(100)])
    dev = max(float(np.max(np.abs(sym - num))), fk_deviation(scene, 100))
    ok = bool(golden) and dev <= 1e-9
    criterion(3, "pendulum-on-rail forward kinematics", ok, f"coefficients exact={bool(golden)}, max dev {dev:.1e}")
    assert golden
    assert dev <= 1e-9


# -- 4 ------------------------------------------------------------------------------

def _degrees_exact(tpl, n) -> bool:
    d = n // 2
    if n % 2 == 0:
        want = (2 * d, 2 * d - 2 if d > 0 else None)
        weights = ((1.0,), (0.0, 1.0, -1.0) if d > 0 else None)
    else:
        want = (2 * d, 2 * d)
        weights = ((0.0, 1.0), (1.0, -1.0))
    return (tpl.lambda_degree, tpl.nu_degree) == want and (tpl.weight_lambda, tpl.weight_nu) == weights


def test_04_interval_decomposition_round_trip(criterion):
    rng = np.random.default_rng(7)
    worst, failures, degree_errors = 0.0, [], []
    parities = set()
    for k in range(100):
        n = 1 + k % 15
        tpl = decomposition_template(n)
        parities.add(tpl.parity)
        if not _degrees_exact(tpl, n):
            degree_errors.append(n)
        lam, nu = tpl.gram_sizes(1)
        Ql = random_psd(rng, lam, rank=int(rng.integers(1, lam + 1)))
        Qn = random_psd(rng, nu, rank=int(rng.integers(1, nu + 1))) if nu else None
        p = matrix_from_grams(Ql, Qn, tpl, 1)
        p[0, 0, 0] += 1e-3  # keep a margin so the slack floor is attainable
        b = ProblemBuilder()
        low = lower_matrix_constraint(b, AffinePolyMatrix.constant(p), tpl)
        out = solve_feasibility(b.build())
        if out.status != FEASIBLE:
            failures.append((n, out.status))
            continue
        Rl, Rn, gamma = extract_grams(low, out.solution)
        recon = matrix_from_grams(Rl, Rn, tpl, 1)
        recon[0, 0, 0] += gamma
        res = float(np.max(np.abs(p - recon)))
        worst = max(worst, res)
        if res > 1e-6:
            failures.append((n, res))
    ok = not failures and not degree_errors and parities == {"even", "odd"}
    criterion(4, "interval decomposition round trip", ok,
              f"100 constructions, degrees 1-15, worst residual {worst:.1e}, failures {failures[:3]}")
    assert not degree_errors
    assert not failures


# -- 5 ------------------------------------------------------------------------------

def test_05_matrix_interval_certificates(criterion):
    rng = np.random.default_rng(11)
    failures = []
    for k in range(50):
        m = int(rng.integers(2, 5))
        n = int(rng.integers(1, 7))
        tpl = decomposition_template(n)
        lam, nu = tpl.gram_sizes(m)
        Ql = random_psd(rng, lam)
        Qn = random_psd(rng, nu) if nu else None
        coeffs = matrix_from_grams(Ql, Qn, tpl, m)
        b = ProblemBuilder()
        low = lower_matrix_constraint(b, AffinePolyMatrix.constant(coeffs), tpl)
        out = solve_feasibility(b.build())
        if out.status != FEASIBLE:
            failures.append((m, n, out.status))
            continue
        Rl, Rn, gamma = extract_grams(low, out.solution)
        entries = [[Polynomial.from_coeffs(coeffs[a, c], "t") for c in range(m)] for a in range(m)]
        chk = check_decomposition(entries, n, Rl, Rn, gamma)
        if not chk.ok:
            failures.append((m, n, chk.reason))
    ok = not failures
    criterion(5, "matrix interval certificates", ok, f"50 matrices, sizes 2-4, degrees 1-6, failures {failures[:3]}")
    assert not failures


# -- 6 ------------------------------------------------------------------------------

def _static_arm_scene() -> Scene:
    bodies = (
        Sphere((1.0, 0.0, 0.0), 0.25, "lower", "hand"),
        box((0.5, 0.0, 0.0), (0.25, 0.125, 0.125), "upper", "upper_box"),
        box((3.0, 0.0, 0.0), (0.5, 2.0, 1.0), "world", "wall"),
        Sphere((0.0, 0.0, 2.0), 0.5, "world", "lamp"),
    )
    pairs = (CollisionPair(1, 2), CollisionPair(0, 2), CollisionPair(2, 0), CollisionPair(0, 3))
    return Scene(planar_arm_chain(), bodies, pairs)


def _affine(coeffs: dict, const: float) -> Polynomial:
    return Polynomial({Monomial({k: 1}): v for k, v in coeffs.items()}) + const


def test_06_static_reduction(criterion):
    scene = _static_arm_scene()
    config = {"q0": 0.5, "q1": 0.0, "q2": 0.0}
    seg = PlanSegment({v: [x] for v, x in config.items()})
    T = numeric_link_transforms(scene.chain, {v: np.array([x]) for v, x in config.items()})
    hp = HyperplaneTemplate(0)
    names = hp.names()
    a = [Polynomial.variable(names[hp.a_index(w, 0)]) for w in range(3)]
    b = Polynomial.variable(names[hp.b_index(0)])
    checks = []
    for p_idx, pair in enumerate(scene.pairs):
        prog = assemble_pair_program(pair, seg, scene, 0)
        A_free = prog.problem.dense_free()
        for rec in prog.records:
            sign = 1 if rec.side == "A" else -1
            body = scene.bodies[rec.body]
            if body.kind == "polytope":
                v = numeric_point_positions(T, body.link, body.vertices[rec.point:rec.point + 1])[0, 0]
                h = sign * (a[0] * float(v[0]) + a[1] * float(v[1]) + a[2] * float(v[2]) + b) - 1
                expected = [[h]]
                fk = compose_with_plan(forward_kinematics_rational(scene.chain, WORLD, body.link,
                                                                   body.vertices[rec.point]), seg)
                built = build_polytope_side([fk], hp, sign)[0]
            else:
                c = numeric_point_positions(T, body.link, body.points)[0, 0]
                h = sign * (a[0] * float(c[0]) + a[1] * float(c[1]) + a[2] * float(c[2]) + b) - 1
                r = body.radius
                expected = [[h if i == j else Polynomial() for j in range(3)] + [a[i] * r] for i in range(3)]
                expected.append([a[0] * r, a[1] * r, a[2] * r, h])
                fk = compose_with_plan(forward_kinematics_rational(scene.chain, WORLD, body.link, body.center), seg)
                built = build_sphere_side(fk, r, hp, sign)
            sym = built.symbolic(names)
            m = len(expected)
            checks.append(all(sym[i, j] == expected[i][j] for i in range(m) for j in range(m)))
            # the SDP rows carry the same affine forms: free part plus constant on the right-hand side
            rows = iter(rec.lowered.rows)
            for i in range(m):
                for j in range(i, m):
                    row = next(rows)
                    lin = {names[q]: float(A_free[row, q]) for q in range(hp.n_unknowns) if A_free[row, q]}
                    e = expected[i][j]
                    const = float(e.constant_term())
                    want_rhs = -const + (GAMMA_MIN if i == j else 0.0)
                    checks.append(_affine(lin, const) == e and prog.problem.rhs[row] == want_rhs)
    ok = bool(checks) and all(checks)
    criterion(6, "static reduction to constant conditions", ok, f"{sum(checks)}/{len(checks)} forms equal")
    assert ok


# -- 7 ------------------------------------------------------------------------------

def test_07_solver_reliability(criterion):
    rng = np.random.default_rng(99)
    wrong, worst, n_feasible = [], 0.0, 0
    for k in range(1000):
        infeasible = bool(k % 2)
        prob = random_problem(rng, infeasible)
        out = solve_feasibility(prob)
        want = INFEASIBLE if infeasible else FEASIBLE
        if out.status != want:
            wrong.append((k, want, out.status))
        if out.status == FEASIBLE:
            n_feasible += 1
            sol = out.solution
            res = float(np.max(np.abs(prob.equality_residual(sol.free, sol.nonneg, sol.psd))))
            worst = max(worst, res)
    ok = not wrong and worst <= 1e-7
    criterion(7, "solver reliability", ok,
              f"1000 programs, accuracy {(1000 - len(wrong)) / 10:.1f}%, worst feasible residual {worst:.1e}")
    assert not wrong
    assert worst <= 1e-7


# -- 8 ------------------------------------------------------------------------------

def test_08_timing(criterion):
    scene = planar_arm_scene()
    plan = arm_tour_plan(np.random.default_rng(0), 30)
    runs, verdicts = [], set()
    for _ in range(20):
        t0 = time.perf_counter()
        cell = certify_cell(scene, plan[0], 0, 0, 1)
        runs.append(time.perf_counter() - t0)
        verdicts.add(cell.verdict)
    median = statistics.median(runs)
    t0 = time.perf_counter()
    rep = certify_plan(plan, scene, 1, jobs=4)
    whole = time.perf_counter() - t0
    ok = median < 1.0 and verdicts == {SAFE} and whole < 60.0 and len(rep.cells) == 120
    criterion(8, "timing at desk scale", ok,
              f"single 3-DOF cell median {median:.3f}s, 30x4 plan with 4 jobs {whole:.1f}s ({rep.verdict})")
    assert verdicts == {SAFE}
    assert median < 1.0
    assert whole < 60.0


# -- 9 ------------------------------------------------------------------------------

def _verified_certificates():
    out = []
    scene = pendulum_scene()
    seg = pendulum_plan(1.09)[0]
    cell = certify_cell(scene, seg, 0, 0, 1)
    out.append((scene, seg, cell.certificate))
    arm = planar_arm_scene()
    plan = arm_tour_plan(np.random.default_rng(0), 3)
    for s in range(3):
        for p in range(len(arm.pairs)):
            cell = certify_cell(arm, plan[s], s, p, 1)
            if cell.verdict == SAFE:
                out.append((arm, plan[s], cell.certificate))
    return out


def test_09_tamper_resistance(criterion):
    rng = np.random.default_rng(5)
    pool = _verified_certificates()
    baseline = all(verify_certificate(c, sc, sg).verified for sc, sg, c in pool)
    rejected = 0
    for k in range(100):
        scene, seg, cert = pool[k % len(pool)]
        ci = int(rng.integers(len(cert.constraints)))
        cons = cert.constraints[ci]
        use_nu = cons.gram_nu is not None and rng.random() < 0.5
        Q = np.array(cons.gram_nu if use_nu else cons.gram_lambda, dtype=float)
        i, j = (int(v) for v in rng.integers(Q.shape[0], size=2))
        magnitude = 10 * cons.gamma * (1 + rng.random())
        Q[i, j] += magnitude * rng.choice([-1.0, 1.0])
        mutated = cert.with_constraint(ci, cons.replace(**{"gram_nu" if use_nu else "gram_lambda": Q}))
        if verify_certificate(mutated, scene, seg).verdict == REJECTED:
            rejected += 1
    ok = baseline and rejected == 100
    criterion(9, "certificate tamper resistance", ok,
              f"{rejected}/100 mutations rejected over {len(pool)} verified certificates")
    assert baseline
    assert rejected == 100


# -- 10 -----------------------------------------------------------------------------

def test_10_sdpa_round_trip(criterion):
    rng = np.random.default_rng(3)
    identical = 0
    for k in range(100):
        if k % 10 == 0:
            scene, plan = random_trial(rng)
            prob = assemble_pair_program(scene.pairs[0], plan.unit_segments()[0], scene, int(rng.integers(0, 3))).problem
        else:
            prob = random_program_with_objective(rng)
        text = export_standard(prob)
        again = import_standard(text)
        if again.same_as(prob) and export_standard(again) == text:
            identical += 1
    ok = identical == 100
    criterion(10, "SDPA export/import round trip", ok, f"{identical}/100 bit-identical")
    assert ok
