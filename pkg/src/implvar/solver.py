"""Safeguarded augmented Lagrangian method with a spectral projected-gradient inner solver.

Solves ``min f(w) s.t. g(w) <= 0, h(w) = 0, w in D`` where ``D`` only needs a
projection oracle (possibly onto a nonconvex set).
"""

from __future__ import annotations

import csv
import enum
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

Array = np.ndarray


def _empty_map(w: Array) -> Array:
    return np.zeros(0)


def _empty_jac(w: Array) -> Array:
    return np.zeros((0, w.shape[0]))


@dataclass
class NlpProblem:
    """Smooth objective and constraints plus a geometric set ``D``.

    ``g``/``h`` return vectors, ``jac_g``/``jac_h`` return matrices of shape
    ``(len(g), dim)``.  ``D`` must expose ``project`` and ``member``.
    """

    dim: int
    f: Callable[[Array], float]
    grad_f: Callable[[Array], Array]
    D: object
    g: Callable[[Array], Array] = _empty_map
    jac_g: Callable[[Array], Array] = _empty_jac
    h: Callable[[Array], Array] = _empty_map
    jac_h: Callable[[Array], Array] = _empty_jac
    name: str = ""

    def n_ineq(self) -> int:
        return int(np.asarray(self.g(np.zeros(self.dim))).shape[0])

    def n_eq(self) -> int:
        return int(np.asarray(self.h(np.zeros(self.dim))).shape[0])


class TerminationReason(enum.Enum):
    CONVERGED = "Converged"
    OUTER_CAP = "OuterCap"
    INNER_CAP = "InnerCap"
    STEPSIZE_FLOOR = "StepsizeFloor"
    PENALTY_CAP = "PenaltyCap"


class PgStatus(enum.Enum):
    CONVERGED = "Converged"
    ITER_CAP = "IterCap"
    STEPSIZE_FLOOR = "StepsizeFloor"


@dataclass
class PgConfig:
    memory: int = 10
    sigma: float = 1e-4
    eta: float = 2.0
    gamma_min: float = 1e-10
    gamma_max: float = 1e20
    gamma0: float = 1.0
    max_iter: int = 100_000
    min_inverse_stepsize: float = 1e-20

    def __post_init__(self):
        if self.memory < 1 or not 0 < self.sigma < 1 or self.eta <= 1:
            raise ValueError("invalid projected-gradient configuration")
        if not 0 < self.gamma_min <= self.gamma_max:
            raise ValueError("need 0 < gamma_min <= gamma_max")


@dataclass
class PgResult:
    w: Array
    value: float
    grad: Array
    residual: float
    iterations: int
    status: PgStatus


@dataclass
class AlmConfig:
    rho0: float = 1.0
    beta: float = 10.0
    tau: float = 0.9
    eps_tol: float = 1e-4
    eps_inner: Callable[[int], float] | float = 1e-6
    a_max: float | Array = 1e20
    b_min: float | Array = -1e20
    b_max: float | Array = 1e20
    max_outer: int = 200
    max_inner_total: int = 100_000
    min_inverse_stepsize: float = 1e-20
    max_penalty: float = 1e18
    pg: PgConfig = field(default_factory=PgConfig)
    trace_path: Optional[str] = None

    def __post_init__(self):
        if self.rho0 <= 0 or self.beta <= 1 or not 0 < self.tau < 1 or self.eps_tol <= 0:
            raise ValueError("need rho0 > 0, beta > 1, 0 < tau < 1, eps_tol > 0")
        if np.any(np.asarray(self.a_max) < 0):
            raise ValueError("a_max must be nonnegative")
        if np.any(np.asarray(self.b_min) > 0) or np.any(np.asarray(self.b_max) < 0):
            raise ValueError("need b_min <= 0 <= b_max")
        if min(self.max_outer, self.max_inner_total) <= 0 or self.max_penalty <= 0:
            raise ValueError("caps must be positive")

    def inner_tol(self, k: int) -> float:
        return float(self.eps_inner(k) if callable(self.eps_inner) else self.eps_inner)


@dataclass
class TraceRow:
    k: int
    rho: float
    violation: float
    inner_iters: int
    lagrangian: float
    mu_min: float


@dataclass
class AlmResult:
    w: Array
    mu: Array
    nu: Array
    rho: float
    violation: float
    outer_iters: int
    inner_iters: int
    reason: TerminationReason
    trace: list
    inner_residual: float
    objective: float

    @property
    def converged(self) -> bool:
        return self.reason is TerminationReason.CONVERGED


# ---------------------------------------------------------------------------


def aug_lagrangian(problem: NlpProblem, w, mu, nu, rho: float):
    """Value and gradient of ``f + rho/2 (|max(g + mu/rho, 0)|^2 + |h + nu/rho|^2)``."""
    w = np.asarray(w, dtype=float)
    mu = np.asarray(mu, dtype=float)
    nu = np.asarray(nu, dtype=float)
    pg = np.maximum(np.asarray(problem.g(w), dtype=float) + mu / rho, 0.0)
    ph = np.asarray(problem.h(w), dtype=float) + nu / rho
    value = float(problem.f(w)) + 0.5 * rho * (pg @ pg + ph @ ph)
    grad = np.asarray(problem.grad_f(w), dtype=float).copy()
    if pg.size:
        grad += rho * np.asarray(problem.jac_g(w)).T @ pg
    if ph.size:
        grad += rho * np.asarray(problem.jac_h(w)).T @ ph
    return value, grad


def violation(problem: NlpProblem, w, mu, rho: float) -> float:
    """``|max(g(w), -mu/rho)| + |h(w)|``."""
    w = np.asarray(w, dtype=float)
    gv = np.asarray(problem.g(w), dtype=float)
    hv = np.asarray(problem.h(w), dtype=float)
    return float(np.linalg.norm(np.maximum(gv, -np.asarray(mu, dtype=float) / rho)) + np.linalg.norm(hv))


def safeguard(mu, nu, config: AlmConfig):
    a = np.maximum(0.0, np.minimum(np.asarray(mu, dtype=float), config.a_max))
    b = np.maximum(config.b_min, np.minimum(np.asarray(nu, dtype=float), config.b_max))
    return a, b


def pg_solve(fun: Callable[[Array], tuple], project: Callable[[Array], Array], w_init, eps: float,
             config: PgConfig | None = None, max_iter: int | None = None) -> PgResult:
    """Nonmonotone spectral projected gradient for ``min fun(w)`` over ``D``.

    ``fun`` returns ``(value, gradient)``.  On return with status CONVERGED the
    residual ``|gamma (w_j - w_{j+1}) + grad(w_{j+1}) - grad(w_j)|`` bounds the
    distance of ``-grad(w_{j+1})`` to the limiting normal cone of ``D``.
    """
    cfg = config or PgConfig()
    cap = cfg.max_iter if max_iter is None else max_iter
    w = np.asarray(w_init, dtype=float).copy()
    val, grad = fun(w)
    history = deque([val], maxlen=cfg.memory)
    gamma = cfg.gamma0
    residual = math.inf
    it = 0
    while it < cap:
        ref = max(history)
        while True:
            if 1.0 / gamma < cfg.min_inverse_stepsize:
                return PgResult(w, val, grad, residual, it, PgStatus.STEPSIZE_FLOOR)
            w_new = project(w - grad / gamma)
            step = w_new - w
            val_new, grad_new = fun(w_new)
            if val_new <= ref - 0.5 * cfg.sigma * gamma * (step @ step):
                break
            gamma *= cfg.eta
        it += 1
        residual = float(np.linalg.norm(gamma * (w - w_new) + grad_new - grad))
        s, y = step, grad_new - grad
        w, val, grad = w_new, val_new, grad_new
        history.append(val)
        if residual <= eps:
            return PgResult(w, val, grad, residual, it, PgStatus.CONVERGED)
        sy = s @ y
        if sy > 0:
            gamma = min(cfg.gamma_max, max(cfg.gamma_min, sy / (s @ s)))
        # no positive curvature along s: keep the last accepted gamma
    return PgResult(w, val, grad, residual, it, PgStatus.ITER_CAP)


def alm_solve(problem: NlpProblem, w0, config: AlmConfig | None = None) -> AlmResult:
    """Safeguarded augmented Lagrangian method; aborts are reported, never raised."""
    cfg = config or AlmConfig()
    pg_cfg = cfg.pg
    if pg_cfg.min_inverse_stepsize != cfg.min_inverse_stepsize:
        pg_cfg = PgConfig(**{**pg_cfg.__dict__, "min_inverse_stepsize": cfg.min_inverse_stepsize})
    w = np.asarray(w0, dtype=float).copy()
    t_i, t_e = problem.n_ineq(), problem.n_eq()
    mu, nu = np.zeros(t_i), np.zeros(t_e)
    rho = cfg.rho0
    v_prev = math.inf
    inner_total = 0
    trace: list = []
    k = 0
    residual = math.inf
    reason = None
    v = math.inf
    while True:
        if k >= cfg.max_outer:
            reason = TerminationReason.OUTER_CAP
            break
        a, b = safeguard(mu, nu, cfg)
        budget = cfg.max_inner_total - inner_total
        res = pg_solve(
            lambda x: aug_lagrangian(problem, x, a, b, rho),
            problem.D.project,
            w,
            cfg.inner_tol(k + 1),
            pg_cfg,
            max_iter=budget,
        )
        inner_total += res.iterations
        w, residual = res.w, res.residual
        gv = np.asarray(problem.g(w), dtype=float)
        hv = np.asarray(problem.h(w), dtype=float)
        mu = rho * np.maximum(gv + a / rho, 0.0)
        nu = rho * (hv + b / rho)
        v = float(np.linalg.norm(np.maximum(gv, -a / rho)) + np.linalg.norm(hv))
        k += 1
        trace.append(TraceRow(k, rho, v, res.iterations, float(res.value), float(mu.min()) if mu.size else 0.0))
        if res.status is PgStatus.STEPSIZE_FLOOR:
            reason = TerminationReason.STEPSIZE_FLOOR
            break
        if res.status is PgStatus.ITER_CAP or inner_total >= cfg.max_inner_total:
            if res.status is PgStatus.ITER_CAP or v >= cfg.eps_tol:
                reason = TerminationReason.INNER_CAP
                break
        if v < cfg.eps_tol:
            reason = TerminationReason.CONVERGED
            break
        if k >= 2 and v > cfg.tau * v_prev:
            rho *= cfg.beta
        v_prev = v
        if rho > cfg.max_penalty:
            reason = TerminationReason.PENALTY_CAP
            break
    if cfg.trace_path:
        write_trace(trace, cfg.trace_path)
    return AlmResult(
        w=w, mu=mu, nu=nu, rho=rho, violation=v, outer_iters=k, inner_iters=inner_total,
        reason=reason, trace=trace, inner_residual=residual, objective=float(problem.f(w)),
    )


def stationarity_residual(problem: NlpProblem, w, mu, nu, certified: float | None = None):
    """``(residual, complementarity)`` diagnostics at a final iterate.

    ``residual`` is the certified inner residual when given, otherwise the
    projected-gradient residual ``|w - P_D(w - grad_w L0)|`` of the ordinary
    Lagrangian ``L0 = f + mu.g + nu.h``.  ``complementarity`` is
    ``|min(mu, -g(w))|``.
    """
    w = np.asarray(w, dtype=float)
    mu = np.asarray(mu, dtype=float)
    nu = np.asarray(nu, dtype=float)
    gv = np.asarray(problem.g(w), dtype=float)
    comp = float(np.linalg.norm(np.minimum(mu, -gv))) if gv.size else 0.0
    if certified is not None:
        return float(certified), comp
    grad = np.asarray(problem.grad_f(w), dtype=float).copy()
    if gv.size:
        grad += np.asarray(problem.jac_g(w)).T @ mu
    if nu.size:
        grad += np.asarray(problem.jac_h(w)).T @ nu
    return float(np.linalg.norm(w - problem.D.project(w - grad))), comp


def write_trace(trace, path: str) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["k", "rho", "V", "inner_iters", "L"])
        for r in trace:
            wr.writerow([r.k, repr(float(r.rho)), repr(float(r.violation)), r.inner_iters, repr(float(r.lagrangian))])
