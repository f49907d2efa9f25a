import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from implvar.errors import Inconsistent, MissingConeData
from implvar.model import get_example
from implvar.polycone import ConeUnion, ConvexCone, Inclusion, contains, subset_eq
from implvar.sets import BoxSparsitySet, PolyUnionSet
from implvar.stationarity import (
    LambdaData,
    StationarityCase,
    abstract_B,
    abstract_M,
    check_all,
    derive_dom_cones,
    explicit_B,
    explicit_M,
    explicit_S,
    implicit_B,
    implicit_M,
    implicit_S,
    regular_sum_rule,
    tangent_intersection_rule,
)
from oracles import gph_kcc

C = ConvexCone.coordinate
R2_LE1 = BoxSparsitySet(2, 1, -np.inf, np.inf)


def sparsity_case(grad, M_rows_ineq=(), M_rows_eq=((1.0, -1.0),), lams=((1, 0), (0, 1), (0.5, 0.5))):
    """Cone data at z = 0 for ``M cap {||z||_0 <= 1}`` in R^2 with M a polyhedral cone."""
    M = PolyUnionSet(2, [(list(M_rows_ineq), [0.0] * len(M_rows_ineq), list(M_rows_eq), [0.0] * len(M_rows_eq))])
    gph = gph_kcc(2, 1)
    Mx = M.product(PolyUnionSet(2, [([], [], [], [])]))
    inter = Mx.intersect(gph)
    abstract = M.intersect(R2_LE1.to_poly_union())
    z = np.zeros(2)
    lambdas = []
    for lam in lams:
        p = np.concatenate([z, lam])
        lambdas.append(
            LambdaData(
                str(lam), np.array(lam, float), T_gph=gph.tangent_cone(p), Nhat_gph=gph.regular_normal_cone(p),
                N_gph=gph.limiting_normal_cone(p), Nhat_intersection=inter.regular_normal_cone(p),
            )
        )
    return StationarityCase(
        grad_f=grad, m=2,
        T_M=M.tangent_cone(z), Nhat_M=M.regular_normal_cone(z), N_M=M.limiting_normal_cone(z),
        T_domK=R2_LE1.tangent_cone(z), Nhat_domK=R2_LE1.regular_normal_cone(z),
        N_domK=R2_LE1.limiting_normal_cone(z), lambdas=lambdas,
        abstract_tangent=abstract.tangent_cone(z), abstract_regular=abstract.regular_normal_cone(z),
        abstract_limiting=abstract.limiting_normal_cone(z),
    )


# --- single checkers ------------------------------------------------------------------------


def test_abstract_B_examples():
    ex55 = get_example("5.5").case
    assert abstract_B(ex55) is False
    assert abstract_B(StationarityCase(grad_f=[0, 0], abstract_tangent=ConvexCone.full(2))) is True
    assert abstract_B(get_example("5.2").case) is True


def test_implicit_B_examples():
    assert implicit_B(get_example("5.2").case) is True
    assert implicit_B(sparsity_case([0.0, 0.0])) is True
    assert implicit_B(get_example("5.5").case) is False


def test_explicit_B_examples():
    overall, per = explicit_B(get_example("4.12").case)
    assert overall and per == [True]
    overall, per = explicit_B(sparsity_case([0.0, 0.0]))
    assert overall and all(per)
    assert explicit_B(get_example("5.5").case)[1][0] is True


def test_implicit_S_examples():
    assert implicit_S(get_example("5.2").case) is False
    assert implicit_S(sparsity_case([0.0, 0.0])) is True
    assert implicit_S(get_example("2.1").case) is True


def test_explicit_S_examples():
    overall, per = explicit_S(get_example("5.2").case)
    assert per[0] is True and overall is True
    # the multiplier choice mu = 2, zeta = (-4, 0) certifies the first class
    assert contains(C(["neg", "zero"]), [-4, 0])
    assert np.allclose(np.array([-2.0, -2.0]) - 2 * np.array([1.0, -1.0]), [-4, 0])
    assert explicit_S(sparsity_case([0.0, 0.0]))[0] is True


def test_M_examples():
    case = get_example("5.2").case
    assert implicit_M(case) is True
    assert abstract_M(sparsity_case([0.0, 0.0])) is True
    assert explicit_M(case)[0] is True


def test_missing_data():
    bare = StationarityCase(grad_f=[1.0, 0.0])
    for fn in (abstract_B, implicit_B, implicit_S, abstract_M, implicit_M):
        with pytest.raises(MissingConeData):
            fn(bare)
    for fn in (explicit_B, explicit_S, explicit_M):
        with pytest.raises(MissingConeData):
            fn(bare)
    rep = check_all(bare)
    assert rep.abstract_B is None and rep.explicit_S is None and rep.consistent


def test_dom_cones_derived_from_graph():
    case = sparsity_case([2.0, 2.0])
    derived = StationarityCase(grad_f=[2.0, 2.0], m=2, lambdas=[
        LambdaData(l.label, l.value, T_gph=l.T_gph, Nhat_gph=l.Nhat_gph) for l in case.lambdas
    ])
    derive_dom_cones(derived)
    assert subset_eq(derived.T_domK, case.T_domK) is Inclusion.EQUAL
    assert subset_eq(derived.Nhat_domK, case.Nhat_domK) is Inclusion.EQUAL


# --- rules -------------------------------------------------------------------------------------


def test_tangent_rule_examples():
    ex = get_example("4.12")
    c = ex.cones
    assert tangent_intersection_rule(c["T_MxR"], c["T_gph"], c["T_intersection"]) is False
    half = C(["pos", "free"])
    assert tangent_intersection_rule(half, half, half) is True
    rep = check_all(get_example("2.1").case)
    assert rep.tangent_rule is True


def test_sum_rule_examples():
    rep = check_all(get_example("5.2").case)
    assert rep.explicit_sum_rule_per[2] is True
    assert rep.implicit_sum_rule is False
    ex = get_example("2.1").cones
    assert regular_sum_rule(ex["Nhat_intersection"], ex["Nhat_omega1"], ex["Nhat_omega2"]) is False


# --- full reports ------------------------------------------------------------------------------


def test_check_all_examples():
    rep = check_all(get_example("5.2").case)
    assert rep.explicit_S is True and rep.implicit_S is False and rep.consistent
    rep = check_all(sparsity_case([0.0, 0.0]))
    flags = [rep.abstract_B, rep.implicit_B, rep.explicit_B, rep.implicit_S, rep.explicit_S,
             rep.abstract_M, rep.implicit_M, rep.explicit_M]
    assert all(f is True for f in flags)
    rep = check_all(get_example("5.5").case)
    assert rep.explicit_B_per[0] is True and rep.abstract_B is False


def test_check_all_flags_inconsistency():
    # regular cone declared larger than the limiting one: S holds, M fails
    case = StationarityCase(grad_f=[1.0], Nhat_M=ConvexCone.full(1), N_M=ConvexCone.zero(1),
                            Nhat_domK=ConvexCone.zero(1), N_domK=ConvexCone.zero(1),
                            T_M=ConvexCone.zero(1), T_domK=ConvexCone.zero(1))
    with pytest.raises(Inconsistent):
        check_all(case)
    assert not check_all(case, raise_on_inconsistent=False).consistent


def test_per_lambda_conjunction_on_fixtures():
    for name in ("4.12", "5.2", "5.5"):
        rep = check_all(get_example(name).case)
        for overall, per in ((rep.explicit_B, rep.explicit_B_per), (rep.explicit_S, rep.explicit_S_per),
                             (rep.explicit_M, rep.explicit_M_per)):
            if per is not None:
                assert overall == all(per)


row = st.tuples(st.integers(-2, 2), st.integers(-2, 2)).filter(lambda r: r != (0, 0))


@given(st.lists(row, max_size=2), st.lists(row, max_size=1), st.tuples(st.integers(-3, 3), st.integers(-3, 3)))
def test_implications_on_random_cases(ineq, eqs, grad):
    case = sparsity_case([float(g) for g in grad], ineq, eqs)
    rep = check_all(case)  # raises Inconsistent on a violated implication
    if rep.implicit_S:
        assert rep.implicit_B and rep.implicit_M
    if rep.explicit_S:
        assert rep.explicit_B and rep.explicit_M


# --- B-stationarity against sampled directional derivatives ----------------------------------------


def _random_union(rng):
    branches = []
    for _ in range(rng.integers(1, 4)):
        k = rng.integers(1, 3)
        branches.append(ConvexCone.from_generators(rng.normal(size=(k, 2)), dim=2))
    return ConeUnion(branches)


def test_B_notion_matches_sampled_directions(rng):
    angles = np.linspace(0.0, 2 * np.pi, 10_000, endpoint=False)
    dirs = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    agreed = 0
    for _ in range(40):
        T = _random_union(rng)
        g = rng.normal(size=2)
        rays = np.vstack([b.generators for b in T] + [np.zeros((0, 2))])
        inside = np.zeros(len(dirs), bool)
        for b in T:
            ok = np.ones(len(dirs), bool)
            if b.ineq.shape[0]:
                ok &= np.all(dirs @ b.ineq.T <= 1e-12, axis=1)
            if b.eq.shape[0]:
                ok &= np.all(np.abs(dirs @ b.eq.T) <= 1e-12, axis=1)
            inside |= ok
        samples = np.vstack([dirs[inside], rays / np.linalg.norm(rays, axis=1)[:, None]])
        sampled = bool(np.min(samples @ g) >= -1e-8)
        checker = abstract_B(StationarityCase(grad_f=g, abstract_tangent=T))
        assert checker == sampled
        agreed += 1
    assert agreed == 40
