"""Checkers for B-, S- and M-stationarity in abstract, implicit and explicit form.

A reference point ``z`` of ``min f(z) s.t. z in M, K(z) nonempty`` is described
by a :class:`StationarityCase`: the gradient of ``f``, cones of ``M`` and of
``dom K`` at ``z``, and for a finite list of implicit-variable values ``lam``
the cones of ``gph K`` at ``(z, lam)``.  Graph cones live in ``R^(n+m)`` with the
``z`` coordinates first.

Every notion reduces to membership of ``-grad f`` in a cone:

=========  ===========================================================
abstract   B: polar of ``T_{M cap dom K}``; M: ``N_{M cap dom K}``
implicit   B: polar of ``T_M cap T_dom K``; S/M: ``N_M + N_dom K``
explicit   B: polar of ``T_M cap dom DK``; S/M: ``N_M + D*K(0)``
=========  ===========================================================
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import Inconsistent, MissingConeData
from .polycone import (
    ConeLike,
    ConeUnion,
    Inclusion,
    as_union,
    canonicalize,
    contains,
    embed_zero,
    intersect,
    minkowski_sum,
    polar,
    project_cone,
    slice_zero,
    subset_eq,
)

TOL = 1e-8


@dataclass
class LambdaData:
    """Graph cones of ``K`` at ``(z, lam)`` for one representative ``lam``."""

    label: str
    value: Optional[np.ndarray] = None
    T_gph: Optional[ConeLike] = None
    Nhat_gph: Optional[ConeLike] = None
    N_gph: Optional[ConeLike] = None
    # regular normal cone of (M x R^m) cap gph K, for the explicit sum rule
    Nhat_intersection: Optional[ConeLike] = None


@dataclass
class StationarityCase:
    grad_f: np.ndarray
    m: int = 0
    T_M: Optional[ConeLike] = None
    Nhat_M: Optional[ConeLike] = None
    N_M: Optional[ConeLike] = None
    T_domK: Optional[ConeLike] = None
    Nhat_domK: Optional[ConeLike] = None
    N_domK: Optional[ConeLike] = None
    lambdas: list = field(default_factory=list)
    abstract_tangent: Optional[ConeLike] = None
    abstract_regular: Optional[ConeLike] = None
    abstract_limiting: Optional[ConeLike] = None
    name: str = ""
    tol: float = TOL

    def __post_init__(self):
        self.grad_f = np.asarray(self.grad_f, dtype=float).reshape(-1)

    @property
    def n(self) -> int:
        return self.grad_f.shape[0]

    def z_coords(self):
        return list(range(self.n))

    def lam_coords(self):
        return list(range(self.n, self.n + self.m))


def _need(value, what: str):
    if value is None:
        raise MissingConeData(f"missing cone data: {what}")
    return value


def _need_lambdas(case: StationarityCase):
    if not case.lambdas:
        raise MissingConeData("explicit notions need at least one lambda")
    return case.lambdas


def _neg_grad_in(case: StationarityCase, cone: ConeLike) -> bool:
    return contains(cone, -case.grad_f, case.tol)


# ---------------------------------------------------------------------------
# derived cones


def dom_derivative(case: StationarityCase, lam: LambdaData) -> ConeUnion:
    """Domain of the graphical derivative: projection of ``T_gph`` onto ``z``."""
    return project_cone(_need(lam.T_gph, f"T_gph at {lam.label}"), case.z_coords())


def regular_coderivative_at_zero(case: StationarityCase, lam: LambdaData) -> ConeUnion:
    return slice_zero(_need(lam.Nhat_gph, f"Nhat_gph at {lam.label}"), case.lam_coords())


def limiting_coderivative_at_zero(case: StationarityCase, lam: LambdaData) -> ConeUnion:
    return slice_zero(_need(lam.N_gph, f"N_gph at {lam.label}"), case.lam_coords())


def derive_dom_cones(case: StationarityCase) -> StationarityCase:
    """Fill ``T_domK`` and ``Nhat_domK`` from graph cones over the listed lambdas.

    Exact when ``K`` is inner calm* in the fuzzy sense and the lambdas cover
    every face class of ``K(z)`` (true for polyhedral ``K`` with vertex lists).
    """
    lams = _need_lambdas(case)
    if case.T_domK is None:
        branches = []
        for lam in lams:
            branches.extend(dom_derivative(case, lam).branches)
        case.T_domK = canonicalize(ConeUnion(branches))
    if case.Nhat_domK is None:
        acc = None
        for lam in lams:
            d = regular_coderivative_at_zero(case, lam)
            acc = d if acc is None else intersect(acc, d)
        case.Nhat_domK = acc
    return case


def _T_domK(case):
    if case.T_domK is None and case.lambdas and all(l.T_gph is not None for l in case.lambdas):
        derive_dom_cones(case)
    return _need(case.T_domK, "T_domK")


def _Nhat_domK(case):
    if case.Nhat_domK is None and case.lambdas and all(l.Nhat_gph is not None for l in case.lambdas):
        derive_dom_cones(case)
    return _need(case.Nhat_domK, "Nhat_domK")


# ---------------------------------------------------------------------------
# checkers


def abstract_B(case: StationarityCase) -> bool:
    if case.abstract_tangent is not None:
        return _neg_grad_in(case, polar(case.abstract_tangent))
    return _neg_grad_in(case, _need(case.abstract_regular, "abstract tangent cone"))


def implicit_B(case: StationarityCase) -> bool:
    T = intersect(_need(case.T_M, "T_M"), _T_domK(case))
    return _neg_grad_in(case, polar(T))


def explicit_B(case: StationarityCase):
    _need_lambdas(case)
    T_M = _need(case.T_M, "T_M")
    per = [_neg_grad_in(case, polar(intersect(T_M, dom_derivative(case, lam)))) for lam in _need_lambdas(case)]
    return all(per), per


def implicit_S(case: StationarityCase) -> bool:
    return _neg_grad_in(case, minkowski_sum(_need(case.Nhat_M, "Nhat_M"), _Nhat_domK(case)))


def explicit_S(case: StationarityCase):
    _need_lambdas(case)
    N_M = _need(case.Nhat_M, "Nhat_M")
    per = [
        _neg_grad_in(case, minkowski_sum(N_M, regular_coderivative_at_zero(case, lam)))
        for lam in _need_lambdas(case)
    ]
    return all(per), per


def abstract_M(case: StationarityCase) -> bool:
    return _neg_grad_in(case, _need(case.abstract_limiting, "abstract limiting cone"))


def implicit_M(case: StationarityCase) -> bool:
    return _neg_grad_in(case, minkowski_sum(_need(case.N_M, "N_M"), _need(case.N_domK, "N_domK")))


def explicit_M(case: StationarityCase):
    _need_lambdas(case)
    N_M = _need(case.N_M, "N_M")
    per = [
        _neg_grad_in(case, minkowski_sum(N_M, limiting_coderivative_at_zero(case, lam)))
        for lam in _need_lambdas(case)
    ]
    return all(per), per


def tangent_intersection_rule(TA: ConeLike, TB: ConeLike, TAB: ConeLike) -> bool:
    """True iff ``T_{A cap B}`` equals ``T_A cap T_B``."""
    return subset_eq(TAB, intersect(TA, TB)) is Inclusion.EQUAL


def regular_sum_rule(N_AB: ConeLike, NA: ConeLike, NB: ConeLike) -> bool:
    """True iff ``N^_{A cap B}`` equals ``N^_A + N^_B``."""
    return subset_eq(minkowski_sum(NA, NB), N_AB) is Inclusion.EQUAL


def implicit_regular_sum_rule(case: StationarityCase) -> bool:
    return regular_sum_rule(
        _need(case.abstract_regular, "N^ of M cap dom K"), _need(case.Nhat_M, "Nhat_M"), _Nhat_domK(case)
    )


def explicit_regular_sum_rule(case: StationarityCase):
    lams = _need_lambdas(case)
    NM0 = embed_zero(_need(case.Nhat_M, "Nhat_M"), case.m)
    per = [
        regular_sum_rule(
            _need(lam.Nhat_intersection, f"N^ of (M x R^m) cap gph K at {lam.label}"),
            NM0,
            _need(lam.Nhat_gph, f"Nhat_gph at {lam.label}"),
        )
        for lam in lams
    ]
    return all(per), per


# ---------------------------------------------------------------------------
# full report


@dataclass
class StationarityReport:
    name: str
    labels: list
    abstract_B: Optional[bool] = None
    implicit_B: Optional[bool] = None
    explicit_B: Optional[bool] = None
    explicit_B_per: Optional[list] = None
    implicit_S: Optional[bool] = None
    explicit_S: Optional[bool] = None
    explicit_S_per: Optional[list] = None
    abstract_M: Optional[bool] = None
    implicit_M: Optional[bool] = None
    explicit_M: Optional[bool] = None
    explicit_M_per: Optional[list] = None
    tangent_rule: Optional[bool] = None
    implicit_sum_rule: Optional[bool] = None
    explicit_sum_rule: Optional[bool] = None
    explicit_sum_rule_per: Optional[list] = None
    violations: list = field(default_factory=list)

    @property
    def explicit_M_some(self) -> Optional[bool]:
        """Explicit M-stationarity with respect to at least one listed lambda."""
        return None if self.explicit_M_per is None else any(self.explicit_M_per)

    @property
    def consistent(self) -> bool:
        return not self.violations

    def format(self) -> str:
        def show(v):
            return "n/a" if v is None else str(bool(v)).lower()

        lines = [f"case: {self.name}"]
        rows = [
            ("abstract-B", self.abstract_B, None),
            ("implicit-B", self.implicit_B, None),
            ("explicit-B", self.explicit_B, self.explicit_B_per),
            ("implicit-S", self.implicit_S, None),
            ("explicit-S", self.explicit_S, self.explicit_S_per),
            ("abstract-M", self.abstract_M, None),
            ("implicit-M", self.implicit_M, None),
            ("explicit-M", self.explicit_M, self.explicit_M_per),
            ("explicit-M (some lambda)", self.explicit_M_some, None),
            ("tangent intersection rule", self.tangent_rule, None),
            ("regular sum rule (implicit)", self.implicit_sum_rule, None),
            ("regular sum rule (explicit)", self.explicit_sum_rule, self.explicit_sum_rule_per),
        ]
        for name, val, per in rows:
            line = f"  {name:<30} {show(val)}"
            if per is not None:
                line += "  [" + ", ".join(f"{l}: {show(p)}" for l, p in zip(self.labels, per)) + "]"
            lines.append(line)
        lines.append("  consistency: " + ("ok" if self.consistent else "; ".join(self.violations)))
        return "\n".join(lines)


def _try(fn, case):
    try:
        return fn(case)
    except MissingConeData:
        return None


def _split(res):
    return (None, None) if res is None else res


def check_all(case: StationarityCase, raise_on_inconsistent: bool = True) -> StationarityReport:
    """Run every checker whose data is available and cross-check the implications.

    Checks that cannot run for lack of cones are reported as ``None``.
    """
    rep = StationarityReport(name=case.name, labels=[l.label for l in case.lambdas])
    rep.abstract_B = _try(abstract_B, case)
    rep.implicit_B = _try(implicit_B, case)
    rep.explicit_B, rep.explicit_B_per = _split(_try(explicit_B, case))
    rep.implicit_S = _try(implicit_S, case)
    rep.explicit_S, rep.explicit_S_per = _split(_try(explicit_S, case))
    rep.abstract_M = _try(abstract_M, case)
    rep.implicit_M = _try(implicit_M, case)
    rep.explicit_M, rep.explicit_M_per = _split(_try(explicit_M, case))
    if case.abstract_tangent is not None and case.T_M is not None:
        rep.tangent_rule = _try(lambda c: tangent_intersection_rule(c.T_M, _T_domK(c), c.abstract_tangent), case)
    rep.implicit_sum_rule = _try(implicit_regular_sum_rule, case)
    rep.explicit_sum_rule, rep.explicit_sum_rule_per = _split(_try(explicit_regular_sum_rule, case))

    def implies(p, q, text):
        if p is True and q is False:
            rep.violations.append(text)

    implies(rep.implicit_S, rep.implicit_B, "implicit-S without implicit-B")
    implies(rep.implicit_S, rep.implicit_M, "implicit-S without implicit-M")
    implies(rep.explicit_S, rep.explicit_B, "explicit-S without explicit-B")
    implies(rep.explicit_S, rep.explicit_M, "explicit-S without explicit-M")
    if rep.explicit_S_per and rep.explicit_B_per and rep.explicit_M_per:
        for l, s, b, m in zip(rep.labels, rep.explicit_S_per, rep.explicit_B_per, rep.explicit_M_per):
            implies(s, b and m, f"explicit-S without explicit-B/M at {l}")
    implies(rep.implicit_B, rep.abstract_B, "implicit-B without abstract-B")
    implies(rep.implicit_B, rep.explicit_B, "implicit-B without explicit-B")
    implies(rep.implicit_S, rep.abstract_B, "implicit-S without abstract-B")
    implies(rep.abstract_B, rep.abstract_M, "abstract-B without abstract-M")
    implies(rep.implicit_M, rep.explicit_M_some, "implicit-M without explicit-M for any lambda")
    if rep.violations and raise_on_inconsistent:
        raise Inconsistent("; ".join(rep.violations))
    return rep
