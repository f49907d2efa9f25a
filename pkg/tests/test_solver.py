import math

import numpy as np
import pytest

from implvar.model import build_pop, example_5_2_problem, make_instance
from implvar.sets import BoxSet, BoxSparsitySet, FullSpace
from implvar.solver import (
    AlmConfig,
    NlpProblem,
    PgConfig,
    PgStatus,
    TerminationReason,
    alm_solve,
    aug_lagrangian,
    pg_solve,
    safeguard,
    stationarity_residual,
    violation,
    write_trace,
)
from oracles import random_smooth_problem


def quad(dim=2, **kw):
    return NlpProblem(dim=dim, f=lambda w: 0.5 * float(w @ w), grad_f=lambda w: w.copy(), D=FullSpace(dim), **kw)


def const(vals):
    vals = np.array(vals, float)
    return lambda w: vals


# --- aug_lagrangian / violation / safeguard -----------------------------------------------------------


def test_aug_lagrangian_without_constraints_is_f():
    p = quad()
    w = np.array([1.0, 2.0])
    val, grad = aug_lagrangian(p, w, [], [], 3.0)
    assert val == pytest.approx(2.5) and np.allclose(grad, w)


def test_aug_lagrangian_inactive_inequality():
    p = quad(g=const([-1.0]), jac_g=lambda w: np.zeros((1, 2)))
    val, _ = aug_lagrangian(p, np.ones(2), [2.0], [], 4.0)
    assert val == pytest.approx(1.0)


def test_aug_lagrangian_equality_term():
    p = quad(h=const([1.0]), jac_h=lambda w: np.zeros((1, 2)))
    val, _ = aug_lagrangian(p, np.ones(2), [], [0.0], 2.0)
    assert val == pytest.approx(1.0 + 1.0)


def test_violation_examples():
    feas = quad(g=const([-1.0]), jac_g=lambda w: np.zeros((1, 2)))
    assert violation(feas, np.zeros(2), [0.0], 1.0) == 0.0
    assert violation(feas, np.zeros(2), [2.0], 4.0) == pytest.approx(0.5)
    eqp = quad(h=const([3.0, 4.0]), jac_h=lambda w: np.zeros((2, 2)))
    assert violation(eqp, np.zeros(2), [], 1.0) == pytest.approx(5.0)


def test_safeguard_examples():
    cfg = AlmConfig(a_max=np.array([1.0, 1.0]))
    a, b = safeguard([-3.0, 5.0], [0.5], cfg)
    assert np.allclose(a, [0, 1]) and np.allclose(b, [0.5])
    a, _ = safeguard([0.0, 0.0], [], AlmConfig())
    assert np.allclose(a, 0)


def test_config_validation():
    for bad in ({"rho0": 0}, {"beta": 1.0}, {"tau": 1.0}, {"eps_tol": 0}, {"b_min": 1.0}):
        with pytest.raises(ValueError):
            AlmConfig(**bad)


def test_gradient_matches_central_differences(rng):
    for _ in range(100):
        p = random_smooth_problem(rng)
        w = rng.normal(size=p.dim)
        mu = np.abs(rng.normal(size=2))
        nu = rng.normal(size=2)
        rho = float(rng.uniform(0.5, 10))
        _, grad = aug_lagrangian(p, w, mu, nu, rho)
        h = 1e-6
        fd = np.array([
            (aug_lagrangian(p, w + h * e, mu, nu, rho)[0] - aug_lagrangian(p, w - h * e, mu, nu, rho)[0]) / (2 * h)
            for e in np.eye(p.dim)
        ])
        assert np.linalg.norm(fd - grad) <= 1e-5 * max(1.0, np.linalg.norm(grad))


# --- pg_solve ----------------------------------------------------------------------------------------


def test_pg_unconstrained_quadratic():
    target = np.array([1.0, -2.0, 3.0])
    res = pg_solve(lambda w: (0.5 * float((w - target) @ (w - target)), w - target), lambda w: w, np.zeros(3), 1e-10)
    assert res.status is PgStatus.CONVERGED and np.allclose(res.w, target) and res.residual <= 1e-10


def test_pg_over_sparse_box():
    D = BoxSparsitySet(2, 1, 0.0, 1.0)
    res = pg_solve(lambda w: (0.5 * float(w @ w), w.copy()), D.project, np.array([0.9, 0.0]), 1e-10)
    assert res.status is PgStatus.CONVERGED and np.allclose(res.w, 0) and D.member(res.w)


def test_pg_iteration_cap():
    res = pg_solve(lambda w: (float(np.sum(w**4)), 4 * w**3), lambda w: w, np.array([0.7, -0.3]), 1e-30, max_iter=3)
    assert res.status is PgStatus.ITER_CAP and res.iterations == 3


def test_pg_stepsize_floor():
    # a gradient that never agrees with a decrease forces gamma up to the floor
    res = pg_solve(lambda w: (float(w[0]), np.array([-1.0])), lambda w: w, np.zeros(1), 1e-12,
                   PgConfig(), max_iter=10)
    assert res.status is PgStatus.STEPSIZE_FLOOR


def test_pg_certificate_bounds_normal_distance(rng):
    """At return, dist(-grad, N_D(w)) <= residual for the limiting normal cone of D."""
    from scipy.optimize import linprog

    for _ in range(20):
        n = int(rng.integers(2, 5))
        D = BoxSparsitySet(n, int(rng.integers(1, n)), 0.0, 1.0)
        A = rng.normal(size=(n, n))
        Q = A @ A.T + 0.1 * np.eye(n)
        b = rng.normal(size=n)
        res = pg_solve(lambda w: (0.5 * w @ Q @ w + b @ w, Q @ w + b), D.project, np.zeros(n), 1e-7)
        assert res.status is PgStatus.CONVERGED
        v = -res.grad
        N = D.limiting_normal_cone(res.w)
        dist = math.inf
        for br in N:
            # nearest point of the branch: coordinate cones, so clip per coordinate
            proj = v.copy()
            for row in br.eq:
                proj -= (row @ proj) * row
            for row in br.ineq:
                proj -= max(0.0, row @ proj) * row
            dist = min(dist, float(np.linalg.norm(v - proj)))
        assert dist <= res.residual + 1e-9


# --- alm_solve ---------------------------------------------------------------------------------------


def test_alm_without_constraints_stops_at_first_iteration():
    res = alm_solve(quad(), np.array([1.0, 1.0]))
    assert res.reason is TerminationReason.CONVERGED and res.outer_iters == 1 and res.violation == 0


def test_alm_example_5_2():
    prob, w0 = example_5_2_problem()
    res = alm_solve(prob, w0)
    assert res.converged and res.violation < 1e-4 and np.linalg.norm(res.w) <= 1e-3
    assert res.outer_iters <= 200


def test_alm_penalty_cap_on_incompatible_constraint():
    p = NlpProblem(dim=1, f=lambda w: 0.0, grad_f=lambda w: np.zeros(1), D=BoxSet([0.0], [1.0]),
                   h=lambda w: np.array([w[0] - 2.0]), jac_h=lambda w: np.ones((1, 1)))
    res = alm_solve(p, np.zeros(1))
    assert res.reason is TerminationReason.PENALTY_CAP and res.rho > 1e18


def test_alm_outer_cap():
    prob, w0 = example_5_2_problem()
    res = alm_solve(prob, w0, AlmConfig(max_outer=2))
    assert res.reason is TerminationReason.OUTER_CAP and res.outer_iters == 2


def test_alm_inner_cap():
    prob, w0 = example_5_2_problem()
    res = alm_solve(prob, w0, AlmConfig(max_inner_total=5))
    assert res.reason is TerminationReason.INNER_CAP and res.inner_iters <= 5


def test_alm_invariants_and_trace(tmp_path):
    inst = make_instance("t", np.eye(3) + 0.1, [0.2, 0.5, 0.9], np.ones(3), 0.4, 2)
    prob, w0 = build_pop(inst)
    path = tmp_path / "trace.csv"
    res = alm_solve(prob, w0, AlmConfig(trace_path=str(path)))
    rhos = [r.rho for r in res.trace]
    assert all(r.mu_min >= 0 for r in res.trace)
    assert all(a <= b for a, b in zip(rhos, rhos[1:]))
    for k in range(1, len(res.trace) - 1):
        grew = res.trace[k + 1].rho > res.trace[k].rho
        assert grew == (k >= 1 and res.trace[k].violation > 0.9 * res.trace[k - 1].violation)
    assert prob.D.member(res.w)
    lines = path.read_text().splitlines()
    assert lines[0] == "k,rho,V,inner_iters,L" and len(lines) == len(res.trace) + 1


def test_stationarity_residual_examples():
    # convex QP over a box: min 1/2 |w - t|^2 on [0, 1]^2 with t outside
    t = np.array([2.0, -1.0])
    p = NlpProblem(dim=2, f=lambda w: 0.5 * float((w - t) @ (w - t)), grad_f=lambda w: w - t, D=BoxSet([0, 0], [1, 1]))
    r, comp = stationarity_residual(p, np.array([1.0, 0.0]), [], [])
    assert r == pytest.approx(0.0) and comp == 0.0
    p2 = NlpProblem(dim=1, f=lambda w: 0.5 * float(w @ w), grad_f=lambda w: w.copy(), D=FullSpace(1),
                    g=lambda w: np.array([1.0 - w[0]]), jac_g=lambda w: -np.ones((1, 1)))
    r, comp = stationarity_residual(p2, np.array([1.0]), [1.0], [])
    assert r == pytest.approx(0.0) and comp == pytest.approx(0.0)
    r, comp = stationarity_residual(p2, np.array([1.0]), [1.5], [])
    assert r > 0
    assert stationarity_residual(p2, np.array([1.0]), [1.0], [], certified=3e-7)[0] == 3e-7


def test_final_pop_iterate_residual_bounded_by_inner_tolerance():
    inst = make_instance("t", np.eye(3) + 0.1, [0.2, 0.5, 0.9], np.ones(3), 0.4, 2)
    prob, w0 = build_pop(inst)
    res = alm_solve(prob, w0)
    assert res.converged and res.inner_residual <= 1e-6
    r, _ = stationarity_residual(prob, res.w, res.mu, res.nu, certified=res.inner_residual)
    assert r <= 1e-6


def test_write_trace_plain_floats(tmp_path):
    prob, w0 = example_5_2_problem()
    res = alm_solve(prob, w0)
    write_trace(res.trace, tmp_path / "t.csv")
    assert "np." not in (tmp_path / "t.csv").read_text()
