import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from implvar.errors import DimensionTooLarge, InconclusiveCover, ParseError
from implvar.polycone import (
    ConeUnion,
    ConvexCone,
    Direction,
    Inclusion,
    canonicalize,
    cone_product,
    contains,
    dd_convert,
    describe,
    format_cones,
    intersect,
    minkowski_sum,
    parse_cones,
    parse_named_cones,
    format_named_cones,
    polar,
    project_cone,
    slice_zero,
    subset_eq,
)

C = ConvexCone.coordinate


def eq(a, b):
    return subset_eq(a, b) is Inclusion.EQUAL


def axes_union(kind="pos"):
    return ConeUnion([C([kind, "zero"]), C(["zero", kind])])


# --- dd_convert -----------------------------------------------------------


def test_dd_negative_orthant():
    c = ConvexCone.from_constraints(ineq=[[1, 0], [0, 1]])
    gens = {tuple(np.round(g / np.abs(g).max(), 12)) for g in c.generators}
    assert gens == {(-1.0, 0.0), (0.0, -1.0)}
    assert c.lineality.shape[0] == 0


def test_dd_half_plane():
    c = ConvexCone.from_constraints(ineq=[[1, 1]])
    assert c.lineality.shape[0] == 1
    assert abs(c.lineality[0] @ np.array([1.0, 1.0])) < 1e-12
    assert c.generators.shape[0] == 1
    g = c.generators[0] / np.linalg.norm(c.generators[0])
    assert np.allclose(g, -np.ones(2) / np.sqrt(2))


def test_dd_orthant_from_generators():
    c = ConvexCone.from_generators([[1, 0], [0, 1]])
    assert eq(c, ConvexCone.from_constraints(ineq=[[-1, 0], [0, -1]]))
    rows = {tuple(np.round(r, 12)) for r in c.ineq}
    assert rows == {(-1.0, 0.0), (0.0, -1.0)}


def test_dd_dimension_cap():
    with pytest.raises(DimensionTooLarge):
        dd_convert(ConvexCone(13, ineq=np.eye(13)), Direction.HtoV)


def test_dd_sets_both_reps():
    c = dd_convert(ConvexCone(3, ineq=[[1, 1, 1]]), "HtoV")
    assert c.reps_synced


# --- polar -----------------------------------------------------------------


def test_polar_axes_union_is_negative_orthant():
    assert eq(polar(axes_union()), C(["neg", "neg"]))


def test_polar_line():
    line = ConvexCone.from_generators(lineality=[[1, 1]])
    assert eq(polar(line), ConvexCone.from_constraints(eq=[[1, 1]]))


def test_polar_full_space():
    assert eq(polar(ConvexCone.full(2)), ConvexCone.zero(2))


# --- minkowski_sum -----------------------------------------------------------


def test_sum_orthant_and_line():
    s = minkowski_sum(C(["neg", "neg"]), ConvexCone.from_constraints(eq=[[1, 1]]))
    assert eq(s, ConvexCone.from_constraints(ineq=[[1, 1]]))


def test_sum_with_zero_is_identity():
    c = ConvexCone.from_generators([[1, 2], [3, -1]])
    assert eq(minkowski_sum(c, ConvexCone.zero(2)), c)


def test_sum_of_axes_lines_is_plane():
    assert eq(minkowski_sum(C(["free", "zero"]), C(["zero", "free"])), ConvexCone.full(2))


# --- intersect ---------------------------------------------------------------


def test_intersect_opposite_half_spaces():
    assert eq(intersect(C(["neg", "free"]), C(["pos", "free"])), C(["zero", "free"]))


def test_intersect_axes_union_with_orthant():
    both = axes_union("free")
    assert eq(intersect(both, C(["pos", "pos"])), axes_union("pos"))


def test_intersect_tangent_cones_of_sqrt_graph():
    assert eq(intersect(C(["neg", "free"]), C(["pos", "free"])), C(["zero", "free"]))


# --- contains ----------------------------------------------------------------


def test_contains_examples():
    half = ConvexCone.from_constraints(ineq=[[1, 1]])
    assert not contains(half, [1, 1])
    assert contains(axes_union(), [0, 0])
    assert contains(C(["neg", "zero"]), [-4, 0])


# --- subset_eq ---------------------------------------------------------------


def test_subset_eq_examples():
    half = ConvexCone.from_constraints(ineq=[[1, 1]])
    assert subset_eq(C(["neg", "neg"]), half) is Inclusion.SUBSET
    assert subset_eq(half, ConvexCone.full(2)) is Inclusion.SUBSET
    assert subset_eq(ConvexCone.full(2), half) is Inclusion.NEITHER
    assert subset_eq(half, half) is Inclusion.EQUAL


def test_subset_eq_needs_cover_check():
    # R^2_+ is covered by two wedges, although neither wedge contains it
    wedges = ConeUnion(
        [ConvexCone.from_generators([[1, 0], [1, 1]]), ConvexCone.from_generators([[1, 1], [0, 1]])]
    )
    quad = C(["pos", "pos"])
    assert subset_eq(quad, wedges) is Inclusion.EQUAL
    with pytest.raises(InconclusiveCover):
        subset_eq(quad, wedges, lp_cover=False)


def test_subset_eq_cover_detects_gap():
    wedges = ConeUnion(
        [ConvexCone.from_generators([[1, 0], [2, 1]]), ConvexCone.from_generators([[1, 2], [0, 1]])]
    )
    assert subset_eq(C(["pos", "pos"]), wedges) is Inclusion.NEITHER


# --- projection and slicing --------------------------------------------------


def test_project_examples():
    assert eq(project_cone(C(["pos", "free"]), [0]), C(["pos"]))
    assert eq(project_cone(ConvexCone.zero(2), [0]), ConvexCone.zero(1))
    assert eq(project_cone(ConvexCone.from_generators(lineality=[[1, 1]]), [0]), ConvexCone.full(1))


def test_slice_examples():
    # normal cone of {l1 + l2 >= 1, 0 <= l <= e} at e1, placed on the lambda block
    n_lam = ConvexCone.from_generators([[1, 0], [0, -1], [-1, -1]])
    c = cone_product(C(["free", "zero"]), n_lam)
    assert eq(slice_zero(c, [2, 3]), C(["free", "zero"]))
    assert eq(slice_zero(ConvexCone.full(3), [1]), ConvexCone.full(2))
    interior = cone_product(ConvexCone.full(2), ConvexCone.from_generators(lineality=[[1, 1]]))
    assert eq(slice_zero(interior, [2, 3]), ConvexCone.full(2))


def test_cone_product_branches():
    p = cone_product(axes_union(), C(["pos"]))
    assert len(p) == 2 and p.dim == 3


def test_canonicalize_removes_contained_branches():
    u = ConeUnion([C(["pos", "pos"]), C(["pos", "zero"]), C(["pos", "pos"])])
    assert len(canonicalize(u)) == 1


# --- literal format ------------------------------------------------------------


def test_format_round_trip():
    u = ConeUnion([ConvexCone.from_generators([[1, 2, 0]], [[0, 0, 1]]), ConvexCone.zero(3)])
    back = parse_cones(format_cones(u))
    assert eq(back, u)


def test_parse_h_form_and_comments():
    text = "# half plane\nDIM 2\nBRANCH\nINEQ\n1 1\n"
    assert eq(parse_cones(text), ConvexCone.from_constraints(ineq=[[1, 1]]))


def test_parse_errors():
    with pytest.raises(ParseError):
        parse_cones("DIM 2\nBRANCH\nGEN\n1 2 3\n")
    with pytest.raises(ParseError):
        parse_cones("1 2\n")
    with pytest.raises(ParseError):
        parse_cones("DIM 2\nBRANCH\nGEN\nnan 1\n")


def test_named_cones_round_trip():
    d = {"a": C(["pos", "free"]), "b": axes_union()}
    back = parse_named_cones(format_named_cones(d))
    assert set(back) == {"a", "b"} and all(eq(back[k], d[k]) for k in d)


def test_describe():
    assert describe(ConvexCone.zero(2)) == "{0}"
    assert describe(ConvexCone.full(2)) == "R^2"
    assert " U " in describe(axes_union())


# --- properties ------------------------------------------------------------------

small_int = st.integers(min_value=-3, max_value=3)


@st.composite
def vcones(draw, dim=None):
    d = dim or draw(st.integers(min_value=1, max_value=4))
    k = draw(st.integers(min_value=0, max_value=4))
    gens = draw(st.lists(st.lists(small_int, min_size=d, max_size=d), min_size=k, max_size=k))
    lin = draw(st.lists(st.lists(small_int, min_size=d, max_size=d), max_size=1))
    return ConvexCone.from_generators(gens, lin, dim=d)


@st.composite
def hcones(draw, dim=None):
    d = dim or draw(st.integers(min_value=1, max_value=4))
    k = draw(st.integers(min_value=0, max_value=5))
    rows = draw(st.lists(st.lists(small_int, min_size=d, max_size=d), min_size=k, max_size=k))
    eqs = draw(st.lists(st.lists(small_int, min_size=d, max_size=d), max_size=1))
    return ConvexCone.from_constraints(rows, eqs, dim=d)


@given(st.one_of(vcones(), hcones()))
def test_bipolar(c):
    assert eq(polar(polar(c)), c)


@given(vcones())
def test_round_trip_v_to_h_to_v(c):
    back = ConvexCone.from_constraints(c.ineq, c.eq, dim=c.dim)
    assert eq(back, c)


@given(hcones())
def test_round_trip_h_to_v_to_h(c):
    back = ConvexCone.from_generators(c.generators, c.lineality, dim=c.dim)
    assert eq(back, c)


@given(st.integers(min_value=1, max_value=4).flatmap(lambda d: st.tuples(vcones(d), vcones(d))))
def test_sum_polar_duality(pair):
    a, b = pair
    assert eq(polar(minkowski_sum(a, b)), intersect(polar(a), polar(b)))


@given(st.integers(min_value=1, max_value=4).flatmap(lambda d: st.tuples(vcones(d), vcones(d))))
def test_polar_antitone(pair):
    a, b = pair
    big = minkowski_sum(a, b)  # a is a subset of a + b
    assert subset_eq(a, big) in (Inclusion.SUBSET, Inclusion.EQUAL)
    assert subset_eq(polar(big), polar(a)) in (Inclusion.SUBSET, Inclusion.EQUAL)


@given(st.integers(min_value=2, max_value=4).flatmap(lambda d: st.tuples(vcones(d), st.integers(1, d - 1))))
def test_projection_slice_adjoint(pair):
    c, k = pair
    keep = list(range(k))
    drop = list(range(k, c.dim))
    assert eq(polar(project_cone(c, keep)), slice_zero(polar(c), drop))


@given(vcones(), st.lists(st.floats(-2, 2), min_size=4, max_size=4))
def test_contains_agrees_with_generator_lp(c, v):
    from scipy.optimize import linprog

    v = np.array(v[: c.dim])
    basis = np.vstack([c.generators, c.lineality, -c.lineality])
    inside = contains(c, v, tol=1e-9)
    if basis.shape[0] == 0:
        assert inside == bool(np.linalg.norm(v) <= 1e-9)
        return
    res = linprog(np.zeros(basis.shape[0]), A_eq=basis.T, b_eq=v, bounds=(0, None), method="highs")
    if res.status == 0:
        assert contains(c, v, tol=1e-7)
    else:
        assert not contains(c, v, tol=1e-12) or np.linalg.norm(v) < 1e-9
