"""Portfolio models and the academic example instances."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from importlib import resources
from typing import Callable, Optional

import numpy as np

from .errors import InfeasibleInstance, ValidationError
from .polycone import (
    ConeUnion,
    ConvexCone,
    Inclusion,
    minkowski_sum,
    parse_named_cones,
    subset_eq,
)
from .sets import (
    BoxSparsitySet,
    ComplementaritySet,
    FullSpace,
    PolyUnionSet,
    ProductSet,
    parse_poly_union,
)
from .solver import NlpProblem
from .stationarity import LambdaData, StationarityCase, check_all, regular_sum_rule

# ---------------------------------------------------------------------------
# portfolio instances


def greedy_witness(c, u, kappa: int) -> Optional[np.ndarray]:
    """Budget point on the ``kappa`` best-return assets, filled in return order.

    Maximizes ``c.z`` over ``{sum z = 1, 0 <= z <= u, ||z||_0 <= kappa}``;
    returns ``None`` when that set is empty.
    """
    c = np.asarray(c, dtype=float)
    u = np.asarray(u, dtype=float)
    order = np.argsort(-c, kind="stable")
    z = np.zeros(c.shape[0])
    left = 1.0
    for i in order[:kappa]:
        take = min(u[i], left)
        z[i] = take
        left -= take
        if left <= 1e-12:
            return z
    # fall back to the kappa largest bounds when the best assets cannot carry the budget
    order = np.argsort(-u, kind="stable")[:kappa]
    if u[order].sum() < 1.0 - 1e-12:
        return None
    z = np.zeros(c.shape[0])
    left = 1.0
    for i in sorted(order, key=lambda j: -c[j]):
        take = min(u[i], left)
        z[i] = take
        left -= take
    return z


@dataclass(frozen=True)
class PortfolioInstance:
    """Data of ``min 1/2 z'Qz s.t. c'z >= theta, e'z = 1, 0 <= z <= u, ||z||_0 <= kappa``."""

    name: str
    Q: np.ndarray
    c: np.ndarray
    u: np.ndarray
    theta: float
    kappa: int
    kappas: tuple = ()

    @property
    def n(self) -> int:
        return self.c.shape[0]

    def with_kappa(self, kappa: int) -> "PortfolioInstance":
        return replace(self, kappa=int(kappa))

    def validate(self, require_witness: bool = True) -> "PortfolioInstance":
        n = self.n
        Q = self.Q
        if Q.shape != (n, n) or self.u.shape != (n,):
            raise ValidationError("dimension mismatch between Q, c and u")
        for name, arr in (("Q", Q), ("c", self.c), ("u", self.u)):
            if not np.all(np.isfinite(arr)):
                raise ValidationError(f"{name} has non-finite entries")
        if not np.isfinite(self.theta) or self.theta <= 0:
            raise ValidationError("theta must be positive")
        if not 1 <= self.kappa < n:
            raise ValidationError("kappa must lie in [1, n-1]")
        if np.max(np.abs(Q - Q.T)) > 1e-8:
            raise ValidationError("Q is not symmetric")
        if np.linalg.eigvalsh(0.5 * (Q + Q.T)).min() < -1e-8:
            raise ValidationError("Q is not positive semidefinite")
        if np.any(self.c < 0) or np.any(self.u < 0):
            raise ValidationError("c and u must be nonnegative")
        if require_witness and not self.has_witness():
            raise ValidationError("no feasible kappa-sparse portfolio reaches theta")
        return self

    def has_witness(self) -> bool:
        z = greedy_witness(self.c, self.u, self.kappa)
        return z is not None and float(self.c @ z) >= self.theta - 1e-12


def make_instance(name, Q, c, u, theta, kappa, kappas=(), require_witness: bool = True) -> PortfolioInstance:
    Q = np.array(Q, dtype=float)
    inst = PortfolioInstance(
        name=str(name), Q=Q, c=np.array(c, dtype=float).reshape(-1),
        u=np.array(u, dtype=float).reshape(-1), theta=float(theta), kappa=int(kappa),
        kappas=tuple(int(k) for k in kappas),
    )
    return inst.validate(require_witness)


def _check_feasible(inst: PortfolioInstance):
    if not inst.has_witness():
        raise InfeasibleInstance(f"{inst.name}: no feasible kappa-sparse portfolio reaches theta")


def build_pop(inst: PortfolioInstance, check: bool = True):
    """Implicit model over ``D = {||z||_0 <= kappa, 0 <= z <= u}``; start at 0."""
    if check:
        _check_feasible(inst)
    n, Q, c = inst.n, inst.Q, inst.c
    e = np.ones(n)
    prob = NlpProblem(
        dim=n,
        f=lambda z: 0.5 * z @ Q @ z,
        grad_f=lambda z: Q @ z,
        g=lambda z: np.array([inst.theta - c @ z]),
        jac_g=lambda z: -c[None, :],
        h=lambda z: np.array([z.sum() - 1.0]),
        jac_h=lambda z: e[None, :],
        D=BoxSparsitySet(n, inst.kappa, 0.0, inst.u),
        name=f"{inst.name}/implicit/k{inst.kappa}",
    )
    return prob, np.zeros(n)


def build_pop_ref(inst: PortfolioInstance, check: bool = True):
    """Explicit model in ``(z, lam)`` with complementarity set ``D``.

    Starts at ``z = 0`` and ``lam_i = 1`` for the first ``n - kappa`` entries.
    """
    if check:
        _check_feasible(inst)
    n, Q, c, k = inst.n, inst.Q, inst.c, inst.kappa
    jg = np.zeros((2, 2 * n))
    jg[0, :n] = -c
    jg[1, n:] = -1.0
    jh = np.concatenate([np.ones(n), np.zeros(n)])[None, :]

    def grad_f(w):
        out = np.zeros(2 * n)
        out[:n] = Q @ w[:n]
        return out

    prob = NlpProblem(
        dim=2 * n,
        f=lambda w: 0.5 * w[:n] @ Q @ w[:n],
        grad_f=grad_f,
        g=lambda w: np.array([inst.theta - c @ w[:n], n - k - w[n:].sum()]),
        jac_g=lambda w: jg,
        h=lambda w: np.array([w[:n].sum() - 1.0]),
        jac_h=lambda w: jh,
        D=ComplementaritySet(n, inst.u, 1.0),
        name=f"{inst.name}/explicit/k{k}",
    )
    lam0 = np.zeros(n)
    lam0[: n - k] = 1.0
    return prob, np.concatenate([np.zeros(n), lam0])


def build_model(inst: PortfolioInstance, model: str, check: bool = True):
    """``check=False`` skips the feasibility witness (for stress runs on infeasible data)."""
    if model == "implicit":
        return build_pop(inst, check)
    if model == "explicit":
        return build_pop_ref(inst, check)
    raise ValueError(f"unknown model {model!r}")


# ---------------------------------------------------------------------------
# academic examples


@dataclass
class Assertion:
    name: str
    check: Callable[[], bool]


@dataclass
class AcademicCase:
    name: str
    description: str
    case: Optional[StationarityCase] = None
    problems: dict = field(default_factory=dict)
    cones: dict = field(default_factory=dict)
    assertions: list = field(default_factory=list)

    def verify(self):
        """Evaluate every assertion; returns ``[(name, passed)]``."""
        return [(a.name, bool(a.check())) for a in self.assertions]


def load_poly(name: str) -> PolyUnionSet:
    return parse_poly_union(resources.files("implvar.data").joinpath(name).read_text())


def load_cones(name: str) -> dict:
    return parse_named_cones(resources.files("implvar.data").joinpath(name).read_text())


def _equal(a, b) -> bool:
    return subset_eq(a, b) is Inclusion.EQUAL


def _half_space(row) -> ConvexCone:
    return ConvexCone.from_constraints(ineq=[row], dim=len(row))


def _hyperplane(row) -> ConvexCone:
    return ConvexCone.from_constraints(eq=[row], dim=len(row))


def example_2_1() -> AcademicCase:
    """Nonnegative axes intersected with the diagonal; the regular sum rule fails at 0."""
    om1, om2 = load_poly("ex2_1_omega1.poly"), load_poly("ex2_1_omega2.poly")
    both = om1.intersect(om2)
    z = np.zeros(2)
    N1, N2, N12 = om1.regular_normal_cone(z), om2.regular_normal_cone(z), both.regular_normal_cone(z)
    total = minkowski_sum(N1, N2)
    case = StationarityCase(
        grad_f=[1.0, 1.0],
        T_M=om2.tangent_cone(z), Nhat_M=N2, N_M=om2.limiting_normal_cone(z),
        T_domK=om1.tangent_cone(z), Nhat_domK=N1, N_domK=om1.limiting_normal_cone(z),
        abstract_tangent=both.tangent_cone(z), abstract_regular=N12,
        abstract_limiting=both.limiting_normal_cone(z), name="2.1",
    )
    cones = {"Nhat_omega1": N1, "Nhat_omega2": N2, "Nhat_intersection": N12, "sum": total}
    A = [
        Assertion("Nhat_omega1 == R^2_-", lambda: _equal(N1, ConvexCone.coordinate(["neg", "neg"]))),
        Assertion("Nhat_omega2 == {z1 + z2 = 0}", lambda: _equal(N2, _hyperplane([1.0, 1.0]))),
        Assertion("Nhat_intersection == R^2", lambda: _equal(N12, ConvexCone.full(2))),
        Assertion("sum == {z1 + z2 <= 0}", lambda: _equal(total, _half_space([1.0, 1.0]))),
        Assertion("sum rule fails", lambda: not regular_sum_rule(N12, N1, N2)),
        Assertion("implicit-S with -grad f = (-1, -1)", lambda: check_all(case).implicit_S is True),
    ]
    return AcademicCase("2.1", "regular normal sum rule failure", case=case, cones=cones, assertions=A)


def example_4_12() -> AcademicCase:
    """Square-root graph over M = R_-: the tangent intersection rule fails at (0, 0)."""
    from .stationarity import tangent_intersection_rule

    cones = load_cones("ex4_12.cones")
    T_gph = cones["T_gph"]
    case = StationarityCase(
        grad_f=[1.0], m=1,
        T_M=ConvexCone.coordinate(["neg"]),
        T_domK=ConvexCone.coordinate(["pos"]),
        lambdas=[LambdaData("0", np.zeros(1), T_gph=T_gph)],
        abstract_tangent=ConvexCone.zero(1),
        name="4.12",
    )
    from .polycone import intersect, project_cone

    A = [
        Assertion("T_MxR == R_- x R", lambda: _equal(cones["T_MxR"], ConvexCone.coordinate(["neg", "free"]))),
        Assertion("T_gph == R_+ x R", lambda: _equal(T_gph, ConvexCone.coordinate(["pos", "free"]))),
        Assertion("T_intersection == {0}", lambda: _equal(cones["T_intersection"], ConvexCone.zero(2))),
        Assertion(
            "T_MxR cap T_gph == {0} x R",
            lambda: _equal(intersect(cones["T_MxR"], T_gph), cones["T_MxR_cap_T_gph"])
            and _equal(cones["T_MxR_cap_T_gph"], ConvexCone.coordinate(["zero", "free"])),
        ),
        Assertion(
            "tangent intersection rule fails",
            lambda: not tangent_intersection_rule(cones["T_MxR"], T_gph, cones["T_intersection"]),
        ),
        Assertion("dom DK == R_+", lambda: _equal(project_cone(T_gph, [0]), ConvexCone.coordinate(["pos"]))),
        Assertion("explicit-B holds", lambda: check_all(case).explicit_B is True),
    ]
    return AcademicCase("4.12", "tangent intersection rule failure", case=case, cones=cones, assertions=A)


def example_5_2_problem():
    """``min (z1+1)^2 + (z2+1)^2 s.t. z1 - z2 = 0, ||z||_0 <= 1``, started at (1, 0)."""
    prob = NlpProblem(
        dim=2,
        f=lambda z: float((z[0] + 1) ** 2 + (z[1] + 1) ** 2),
        grad_f=lambda z: 2.0 * (z + 1.0),
        h=lambda z: np.array([z[0] - z[1]]),
        jac_h=lambda z: np.array([[1.0, -1.0]]),
        D=BoxSparsitySet(2, 1, -np.inf, np.inf),
        name="example-5.2",
    )
    return prob, np.array([1.0, 0.0])


def example_5_2() -> AcademicCase:
    """Explicitly but not implicitly S-stationary origin of a sparsity problem."""
    M = load_poly("ex5_2_m.poly")
    gph = load_poly("ex5_2_gph_kcc.poly")
    dom = BoxSparsitySet(2, 1, -np.inf, np.inf)
    Mx = M.product(PolyUnionSet(2, [([], [], [], [])]))
    inter = Mx.intersect(gph)
    abstract = M.intersect(dom.to_poly_union())
    z = np.zeros(2)
    lambdas = []
    for label, lam in (("e1", [1.0, 0.0]), ("e2", [0.0, 1.0]), ("interior", [0.5, 0.5])):
        p = np.concatenate([z, lam])
        lambdas.append(
            LambdaData(
                label, np.array(lam),
                T_gph=gph.tangent_cone(p), Nhat_gph=gph.regular_normal_cone(p),
                N_gph=gph.limiting_normal_cone(p), Nhat_intersection=inter.regular_normal_cone(p),
            )
        )
    case = StationarityCase(
        grad_f=[2.0, 2.0], m=2,
        T_M=M.tangent_cone(z), Nhat_M=M.regular_normal_cone(z), N_M=M.limiting_normal_cone(z),
        T_domK=dom.tangent_cone(z), Nhat_domK=dom.regular_normal_cone(z), N_domK=dom.limiting_normal_cone(z),
        lambdas=lambdas,
        abstract_tangent=abstract.tangent_cone(z), abstract_regular=abstract.regular_normal_cone(z),
        abstract_limiting=abstract.limiting_normal_cone(z), name="5.2",
    )
    prob, w0 = example_5_2_problem()

    def rep():
        return check_all(case)

    A = [
        Assertion("explicit-S for every lambda class", lambda: rep().explicit_S_per == [True, True, True]),
        Assertion("implicit-S fails", lambda: rep().implicit_S is False),
        Assertion("explicit sum rule holds per class", lambda: rep().explicit_sum_rule_per == [True, True, True]),
        Assertion("implicit sum rule fails", lambda: rep().implicit_sum_rule is False),
        Assertion("Nhat of the sparsity set at 0 is {0}", lambda: _equal(case.Nhat_domK, ConvexCone.zero(2))),
    ]
    return AcademicCase(
        "5.2", "explicit but not implicit S-stationarity", case=case,
        problems={"implicit": (prob, w0)}, assertions=A,
    )


def example_5_5_problems():
    """Vanishing-constrained problem and its complementarity reformulation."""
    vc = NlpProblem(
        dim=2,
        f=lambda z: -float(z[1]),
        grad_f=lambda z: np.array([0.0, -1.0]),
        g=lambda z: np.array([-z[1], z[0] * z[1]]),
        jac_g=lambda z: np.array([[0.0, -1.0], [z[1], z[0]]]),
        D=FullSpace(2),
        name="example-5.5-vc",
    )
    # variables (z1, z2, lam); D couples z2 and lam by complementarity
    cc = NlpProblem(
        dim=3,
        f=lambda w: -float(w[1]),
        grad_f=lambda w: np.array([0.0, -1.0, 0.0]),
        g=lambda w: np.array([w[0] - w[2]]),
        jac_g=lambda w: np.array([[1.0, 0.0, -1.0]]),
        D=ProductSet([FullSpace(1), ComplementaritySet(1, np.inf, np.inf)]),
        name="example-5.5-cc",
    )
    return {"vc": (vc, np.zeros(2)), "cc": (cc, np.array([0.0, 0.0, 1.0]))}


def example_5_5() -> AcademicCase:
    """A local minimizer of the reformulation whose z-part is not locally optimal."""
    dom = load_poly("ex5_5_dom_kvc.poly")
    gph = load_poly("ex5_5_gph_kvc.poly")
    z = np.zeros(2)
    lambdas = []
    for label, lam in (("1", 1.0), ("0", 0.0)):
        p = np.array([0.0, 0.0, lam])
        lambdas.append(
            LambdaData(label, np.array([lam]), T_gph=gph.tangent_cone(p), Nhat_gph=gph.regular_normal_cone(p),
                       N_gph=gph.limiting_normal_cone(p))
        )
    full, zero = ConvexCone.full(2), ConvexCone.zero(2)
    case = StationarityCase(
        grad_f=[0.0, -1.0], m=1,
        T_M=full, Nhat_M=zero, N_M=zero,
        T_domK=dom.tangent_cone(z), Nhat_domK=dom.regular_normal_cone(z), N_domK=dom.limiting_normal_cone(z),
        lambdas=lambdas,
        abstract_tangent=dom.tangent_cone(z), abstract_regular=dom.regular_normal_cone(z),
        abstract_limiting=dom.limiting_normal_cone(z), name="5.5",
    )
    from .sets import kvc_selection

    def rep():
        return check_all(case)

    A = [
        Assertion("explicit-B at ((0,0),1)", lambda: rep().explicit_B_per[0] is True),
        Assertion("explicit-B fails at ((0,0),0)", lambda: rep().explicit_B_per[1] is False),
        Assertion("abstract-B fails at (0,0)", lambda: rep().abstract_B is False),
        Assertion("selection max(G(z),0) lies in K(z)", lambda: gph.member([0.0, 0.0, *kvc_selection([0.0])])),
    ]
    return AcademicCase(
        "5.5", "local minimizers do not transfer from the reformulation", case=case,
        problems=example_5_5_problems(), assertions=A,
    )


EXAMPLES = {
    "2.1": example_2_1,
    "4.12": example_4_12,
    "5.2": example_5_2,
    "5.5": example_5_5,
}


def get_example(name: str) -> AcademicCase:
    try:
        return EXAMPLES[name]()
    except KeyError:
        raise KeyError(f"unknown example {name!r}; choose from {sorted(EXAMPLES)}") from None
