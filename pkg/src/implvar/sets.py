"""Structured closed sets with membership, projection and cone oracles.

Three families are provided:

* :class:`BoxSparsitySet` -- ``{z : ||z||_0 <= kappa, lower <= z <= upper}``,
* :class:`ComplementaritySet` -- ``{(z, lam) : 0 <= z <= u, 0 <= lam <= lu, z * lam = 0}``,
* :class:`PolyUnionSet` -- finite unions of convex polyhedra given by rows.

The first two have closed-form cones and exact projections.  The generic
family computes tangent cones from active rows and limiting normal cones by
walking the sign cells of the hyperplane arrangement of the tangent cone.
"""

from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import linprog

from .errors import EnumerationCapExceeded, NotAMember, ParseError
from .polycone import ConeUnion, ConvexCone, canonicalize, polar

MEMBER_TOL = 1e-9
LIMITING_MAX_DIM = 6
LIMITING_MAX_BRANCHES = 10


class StructuredSet:
    """Interface shared by all sets."""

    dim: int

    def member(self, point, tol: float = MEMBER_TOL) -> bool:
        raise NotImplementedError

    def project(self, point) -> np.ndarray:
        raise NotImplementedError(f"{type(self).__name__} has no projection oracle")

    def tangent_cone(self, point) -> ConeUnion:
        raise NotImplementedError

    def regular_normal_cone(self, point) -> ConvexCone:
        return polar(self.tangent_cone(point))

    def limiting_normal_cone(self, point) -> ConeUnion:
        raise NotImplementedError

    def _require_member(self, point, tol: float = MEMBER_TOL) -> np.ndarray:
        p = np.asarray(point, dtype=float).reshape(-1)
        if p.shape[0] != self.dim:
            raise ValueError(f"expected a point of dimension {self.dim}, got {p.shape[0]}")
        if not self.member(p, tol):
            raise NotAMember(f"{p.tolist()} is not in the set")
        return p


# ---------------------------------------------------------------------------
# one-dimensional interval helpers


def _interval_tangent(x: float, lo: float, hi: float, tol: float) -> str:
    if lo == hi:
        return "zero"
    at_lo = np.isfinite(lo) and abs(x - lo) <= tol
    at_hi = np.isfinite(hi) and abs(x - hi) <= tol
    if at_lo:
        return "pos"
    if at_hi:
        return "neg"
    return "free"


def _interval_normal(x: float, lo: float, hi: float, tol: float) -> str:
    if lo == hi:
        return "free"
    if np.isfinite(lo) and abs(x - lo) <= tol:
        return "neg"
    if np.isfinite(hi) and abs(x - hi) <= tol:
        return "pos"
    return "zero"


def _vec(x, n: int, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = np.full(n, float(arr))
    arr = arr.reshape(-1)
    if arr.shape[0] != n:
        raise ValueError(f"{name} must have length {n}")
    if np.any(np.isnan(arr)):
        raise ValueError(f"{name} contains NaN")
    return arr


def _coordinate_union(kind_lists) -> ConeUnion:
    return canonicalize(ConeUnion([ConvexCone.coordinate(k) for k in kind_lists]))


# ---------------------------------------------------------------------------
# box-sparsity


class BoxSparsitySet(StructuredSet):
    """``{z in R^n : ||z||_0 <= kappa, lower <= z <= upper}``.

    ``lower <= 0 <= upper`` is required so that zeroing a coordinate keeps the
    box constraint.  Infinite bounds are allowed; ``lower=-inf, upper=inf``
    gives the plain sparsity set.
    """

    def __init__(self, n: int, kappa: int, lower=0.0, upper=np.inf):
        n, kappa = int(n), int(kappa)
        if n < 2 or not 1 <= kappa < n:
            raise ValueError("need n >= 2 and 1 <= kappa < n")
        self.n = self.dim = n
        self.kappa = kappa
        self.lower = _vec(lower, n, "lower")
        self.upper = _vec(upper, n, "upper")
        if np.any(self.lower > 0) or np.any(self.upper < 0):
            raise ValueError("the box must contain the origin (lower <= 0 <= upper)")
        self._cand = [i for i in range(n) if self.lower[i] < 0 or self.upper[i] > 0]

    def __repr__(self) -> str:
        return f"BoxSparsitySet(n={self.n}, kappa={self.kappa})"

    def member(self, point, tol: float = MEMBER_TOL) -> bool:
        z = np.asarray(point, dtype=float).reshape(-1)
        if z.shape[0] != self.n or not np.all(np.isfinite(z)):
            return False
        if np.any(z < self.lower - tol) or np.any(z > self.upper + tol):
            return False
        return int(np.sum(np.abs(z) > tol)) <= self.kappa

    def project(self, point) -> np.ndarray:
        z = np.asarray(point, dtype=float).reshape(-1)
        p = np.clip(z, self.lower, self.upper)
        benefit = z**2 - (z - p) ** 2
        keep = np.argsort(-benefit, kind="stable")[: self.kappa]
        out = np.zeros(self.n)
        out[keep] = p[keep]
        return out

    def _supports(self, z, tol):
        s = [i for i in range(self.n) if abs(z[i]) > tol]
        m = min(self.kappa, len(self._cand))
        rest = [i for i in self._cand if i not in s]
        return s, m, [sorted(s + list(extra)) for extra in itertools.combinations(rest, m - len(s))]

    def tangent_cone(self, point, tol: float = MEMBER_TOL) -> ConeUnion:
        z = self._require_member(point, tol)
        _, _, supports = self._supports(z, tol)
        kinds = []
        for J in supports:
            js = set(J)
            kinds.append(
                [
                    _interval_tangent(z[i], self.lower[i], self.upper[i], tol) if i in js else "zero"
                    for i in range(self.n)
                ]
            )
        return _coordinate_union(kinds)

    def limiting_normal_cone(self, point, tol: float = MEMBER_TOL) -> ConeUnion:
        z = self._require_member(point, tol)
        s, m, supports = self._supports(z, tol)
        ss = set(s)
        nbox = [_interval_normal(z[i], self.lower[i], self.upper[i], tol) for i in range(self.n)]
        kinds = []
        for S in supports:
            st = set(S)
            kinds.append([nbox[i] if i in ss else ("zero" if i in st else "free") for i in range(self.n)])
        if len(s) < m:
            # normals at the point itself, reached when no extra coordinate moves
            kinds.append(nbox)
        return _coordinate_union(kinds)

    def branch_count(self) -> int:
        return math.comb(self.n, self.kappa)

    def to_poly_union(self) -> "PolyUnionSet":
        """Branches ``{lower_J <= z_J <= upper_J, z_rest = 0}`` over all ``|J| = kappa``."""
        eye = np.eye(self.n)
        branches = []
        for J in itertools.combinations(range(self.n), self.kappa):
            A, a, B = [], [], []
            for i in range(self.n):
                if i in J:
                    if np.isfinite(self.upper[i]):
                        A.append(eye[i])
                        a.append(self.upper[i])
                    if np.isfinite(self.lower[i]):
                        A.append(-eye[i])
                        a.append(-self.lower[i])
                else:
                    B.append(eye[i])
            branches.append((A, a, B, np.zeros(len(B))))
        return PolyUnionSet(self.n, branches)


# ---------------------------------------------------------------------------
# complementarity


class ComplementaritySet(StructuredSet):
    """``{(z, lam) : 0 <= z <= z_upper, 0 <= lam <= lambda_upper, z * lam = 0}``.

    Points are stored as one vector ``(z_1..z_n, lam_1..lam_n)``.
    """

    def __init__(self, n: int, z_upper=np.inf, lambda_upper=1.0):
        n = int(n)
        if n < 1:
            raise ValueError("n must be positive")
        self.n = n
        self.dim = 2 * n
        self.z_upper = _vec(z_upper, n, "z_upper")
        self.lambda_upper = _vec(lambda_upper, n, "lambda_upper")
        if np.any(self.z_upper < 0) or np.any(self.lambda_upper < 0):
            raise ValueError("upper bounds must be nonnegative")

    def __repr__(self) -> str:
        return f"ComplementaritySet(n={self.n})"

    def split(self, point):
        w = np.asarray(point, dtype=float).reshape(-1)
        return w[: self.n], w[self.n :]

    def member(self, point, tol: float = MEMBER_TOL) -> bool:
        w = np.asarray(point, dtype=float).reshape(-1)
        if w.shape[0] != self.dim or not np.all(np.isfinite(w)):
            return False
        z, lam = self.split(w)
        if np.any(z < -tol) or np.any(z > self.z_upper + tol):
            return False
        if np.any(lam < -tol) or np.any(lam > self.lambda_upper + tol):
            return False
        return bool(np.all(np.minimum(np.abs(z), np.abs(lam)) <= tol))

    def project_pair(self, z, lam):
        z = np.asarray(z, dtype=float).reshape(-1)
        lam = np.asarray(lam, dtype=float).reshape(-1)
        pz = np.clip(z, 0.0, self.z_upper)
        pl = np.clip(lam, 0.0, self.lambda_upper)
        cost_z = (z - pz) ** 2 + lam**2
        cost_l = z**2 + (lam - pl) ** 2
        use_z = cost_z <= cost_l
        return np.where(use_z, pz, 0.0), np.where(use_z, 0.0, pl)

    def project(self, point) -> np.ndarray:
        z, lam = self.split(point)
        pz, pl = self.project_pair(z, lam)
        return np.concatenate([pz, pl])

    def _pair_data(self, w, tol):
        z, lam = self.split(w)
        for i in range(self.n):
            u, lu = self.z_upper[i], self.lambda_upper[i]
            yield i, z[i], lam[i], u, lu, abs(z[i]) <= tol, abs(lam[i]) <= tol

    def _product(self, pair_options) -> ConeUnion:
        kinds = []
        for combo in itertools.product(*pair_options):
            zk = [c[0] for c in combo]
            lk = [c[1] for c in combo]
            kinds.append(zk + lk)
        return _coordinate_union(kinds)

    def tangent_cone(self, point, tol: float = MEMBER_TOL) -> ConeUnion:
        w = self._require_member(point, tol)
        options = []
        for _, zi, li, u, lu, z0, l0 in self._pair_data(w, tol):
            opts = []
            if l0:
                opts.append((_interval_tangent(zi, 0.0, u, tol), "zero"))
            if z0:
                opts.append(("zero", _interval_tangent(li, 0.0, lu, tol)))
            options.append(opts)
        return self._product(options)

    def regular_normal_cone(self, point, tol: float = MEMBER_TOL) -> ConvexCone:
        w = self._require_member(point, tol)
        zk, lk = [], []
        for _, zi, li, u, lu, z0, l0 in self._pair_data(w, tol):
            nz = _interval_normal(zi, 0.0, u, tol)
            nl = _interval_normal(li, 0.0, lu, tol)
            if z0 and l0:
                zk.append(nz)
                lk.append(nl)
            elif l0:
                zk.append(nz)
                lk.append("free")
            else:
                zk.append("free")
                lk.append(nl)
        return ConvexCone.coordinate(zk + lk)

    def limiting_normal_cone(self, point, tol: float = MEMBER_TOL) -> ConeUnion:
        w = self._require_member(point, tol)
        options = []
        for _, zi, li, u, lu, z0, l0 in self._pair_data(w, tol):
            nz = _interval_normal(zi, 0.0, u, tol)
            nl = _interval_normal(li, 0.0, lu, tol)
            if z0 and l0:
                opts = [(nz, nl)]
                if u > 0:
                    opts.append(("zero", "free"))
                if lu > 0:
                    opts.append(("free", "zero"))
            elif l0:
                opts = [(nz, "free")]
            else:
                opts = [("free", nl)]
            options.append(opts)
        return self._product(options)

    def branch_count(self) -> int:
        return 2**self.n

    def to_poly_union(self) -> "PolyUnionSet":
        """One branch per choice of the vanishing variable in every pair."""
        n = self.n
        eye = np.eye(2 * n)
        branches = []
        for pattern in itertools.product((0, 1), repeat=n):
            A, a, B = [], [], []
            for i, which in enumerate(pattern):
                free, fixed = (i, n + i) if which == 0 else (n + i, i)
                ub = self.z_upper[i] if which == 0 else self.lambda_upper[i]
                A.append(-eye[free])
                a.append(0.0)
                if np.isfinite(ub):
                    A.append(eye[free])
                    a.append(ub)
                B.append(eye[fixed])
            branches.append((A, a, B, np.zeros(len(B))))
        return PolyUnionSet(2 * n, branches)


# ---------------------------------------------------------------------------
# generic unions of convex polyhedra


@dataclass(frozen=True)
class Polyhedron:
    """``{z : A z <= a, B z = b}`` with unit-normalized rows."""

    A: np.ndarray
    a: np.ndarray
    B: np.ndarray
    b: np.ndarray

    @classmethod
    def build(cls, dim, A=(), a=(), B=(), b=()) -> "Polyhedron":
        A = np.asarray(A, dtype=float).reshape(-1, dim) if len(A) else np.zeros((0, dim))
        B = np.asarray(B, dtype=float).reshape(-1, dim) if len(B) else np.zeros((0, dim))
        a = np.asarray(a, dtype=float).reshape(-1)
        b = np.asarray(b, dtype=float).reshape(-1)
        if A.shape[0] != a.shape[0] or B.shape[0] != b.shape[0]:
            raise ValueError("row and right-hand-side counts differ")
        for M, v in ((A, a), (B, b)):
            if not (np.all(np.isfinite(M)) and np.all(np.isfinite(v))):
                raise ValueError("polyhedron data must be finite")
        na = np.linalg.norm(A, axis=1)
        nb = np.linalg.norm(B, axis=1)
        if np.any(na == 0) or np.any(nb == 0):
            raise ValueError("zero constraint row")
        return cls(A / na[:, None], a / na, B / nb[:, None], b / nb)

    def residual(self, z) -> float:
        r = 0.0
        if self.A.shape[0]:
            r = max(r, float(np.max(self.A @ z - self.a)))
        if self.B.shape[0]:
            r = max(r, float(np.max(np.abs(self.B @ z - self.b))))
        return r

    def tangent(self, z, tol: float) -> ConvexCone:
        act = np.abs(self.A @ z - self.a) <= tol if self.A.shape[0] else np.zeros(0, bool)
        return ConvexCone.from_constraints(self.A[act], self.B, dim=z.shape[0])


class PolyUnionSet(StructuredSet):
    """Finite union of convex polyhedra.

    ``branches`` is a list of ``(A, a, B, b)`` tuples describing
    ``{z : A z <= a, B z = b}``.
    """

    def __init__(self, dim: int, branches, max_dim: int = LIMITING_MAX_DIM,
                 max_branches: int = LIMITING_MAX_BRANCHES):
        self.dim = int(dim)
        self.branches = [
            br if isinstance(br, Polyhedron) else Polyhedron.build(self.dim, *br) for br in branches
        ]
        if not self.branches:
            raise ValueError("a PolyUnionSet needs at least one branch")
        self.max_dim = max_dim
        self.max_branches = max_branches

    def __repr__(self) -> str:
        return f"PolyUnionSet(dim={self.dim}, branches={len(self.branches)})"

    def member(self, point, tol: float = MEMBER_TOL) -> bool:
        z = np.asarray(point, dtype=float).reshape(-1)
        if z.shape[0] != self.dim or not np.all(np.isfinite(z)):
            return False
        return any(br.residual(z) <= tol for br in self.branches)

    def tangent_cone(self, point, tol: float = MEMBER_TOL) -> ConeUnion:
        z = self._require_member(point, tol)
        cones = [br.tangent(z, tol) for br in self.branches if br.residual(z) <= tol]
        return canonicalize(ConeUnion(cones))

    def limiting_normal_cone(self, point, tol: float = MEMBER_TOL) -> ConeUnion:
        if self.dim > self.max_dim or len(self.branches) > self.max_branches:
            raise EnumerationCapExceeded(
                f"limiting cone enumeration is capped at dim {self.max_dim} and "
                f"{self.max_branches} branches (got {self.dim}, {len(self.branches)})"
            )
        return limiting_normal_of_cone_union(self.tangent_cone(point, tol))

    def is_empty(self) -> bool:
        for br in self.branches:
            res = linprog(
                np.zeros(self.dim),
                A_ub=br.A if br.A.shape[0] else None,
                b_ub=br.a if br.A.shape[0] else None,
                A_eq=br.B if br.B.shape[0] else None,
                b_eq=br.b if br.B.shape[0] else None,
                bounds=[(None, None)] * self.dim,
                method="highs",
            )
            if res.status == 0:
                return False
        return True

    def intersect(self, other: "PolyUnionSet") -> "PolyUnionSet":
        if other.dim != self.dim:
            raise ValueError("dimension mismatch")
        out = []
        for p, q in itertools.product(self.branches, other.branches):
            out.append(
                Polyhedron(
                    np.vstack([p.A, q.A]), np.concatenate([p.a, q.a]),
                    np.vstack([p.B, q.B]), np.concatenate([p.b, q.b]),
                )
            )
        return PolyUnionSet(self.dim, out, self.max_dim, self.max_branches)

    def product(self, other: "PolyUnionSet") -> "PolyUnionSet":
        d1, d2 = self.dim, other.dim
        out = []
        for p, q in itertools.product(self.branches, other.branches):
            out.append(
                Polyhedron(
                    _block_diag(p.A, q.A), np.concatenate([p.a, q.a]),
                    _block_diag(p.B, q.B), np.concatenate([p.b, q.b]),
                )
            )
        return PolyUnionSet(d1 + d2, out, self.max_dim, self.max_branches)


def _block_diag(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    out = np.zeros((x.shape[0] + y.shape[0], x.shape[1] + y.shape[1]))
    out[: x.shape[0], : x.shape[1]] = x
    out[x.shape[0] :, x.shape[1] :] = y
    return out


def limiting_normal_of_cone_union(T: ConeUnion) -> ConeUnion:
    """Limiting normal cone at 0 of a finite union of polyhedral cones.

    Near the origin the set coincides with ``T`` and ``T`` is a cone, so the
    limiting normal cone is the union of regular normal cones ``N^_T(w)`` over
    ``w in T``.  Those depend only on the sign vector of ``w`` against the
    constraint rows of ``T``; every realizable sign cell inside ``T`` is
    visited once by depth-first search with one LP per new cell.
    """
    dim = T.dim
    canon: list = []
    index: dict = {}

    def lookup(row):
        k = int(np.flatnonzero(np.abs(row) > 1e-12)[0])
        orient = 1 if row[k] > 0 else -1
        r = orient * row
        key = tuple(np.round(r, 9))
        if key not in index:
            index[key] = len(canon)
            canon.append(r)
        return index[key], orient

    structure = []
    for br in T:
        rows = [(*lookup(r), False) for r in br.ineq]
        rows += [(*lookup(r), True) for r in br.eq]
        structure.append(rows)
    R = len(canon)
    rows_arr = np.array(canon) if canon else np.zeros((0, dim))
    signs = np.zeros(R, dtype=int)
    found: dict = {}

    def alive(upto):
        out = []
        for b, rows in enumerate(structure):
            ok = True
            for idx, orient, is_eq in rows:
                if idx >= upto:
                    continue
                s = signs[idx]
                if (is_eq and s != 0) or (not is_eq and orient * s > 0):
                    ok = False
                    break
            if ok:
                out.append(b)
        return out

    def feasible(upto):
        S = signs[:upto]
        M = rows_arr[:upto]
        lt, gt, zr = M[S < 0], M[S > 0], M[S == 0]
        a_ub = np.vstack([lt, -gt])
        b_ub = -np.ones(a_ub.shape[0])
        res = linprog(
            np.zeros(dim),
            A_ub=a_ub if a_ub.shape[0] else None,
            b_ub=b_ub if a_ub.shape[0] else None,
            A_eq=zr if zr.shape[0] else None,
            b_eq=np.zeros(zr.shape[0]) if zr.shape[0] else None,
            bounds=[(None, None)] * dim,
            method="highs",
        )
        return res.status == 0, (res.x if res.status == 0 else None)

    def leaf(branches):
        key = []
        cones = []
        for b in branches:
            act = tuple(
                (idx, orient, is_eq) for idx, orient, is_eq in structure[b] if signs[idx] == 0
            )
            key.append((b, act))
        key = tuple(key)
        if key in found:
            return
        for _, act in key:
            ineq = [orient * canon[idx] for idx, orient, is_eq in act if not is_eq]
            eq = [canon[idx] for idx, orient, is_eq in act if is_eq]
            cones.append(ConvexCone.from_constraints(ineq, eq, dim=dim))
        found[key] = polar(ConeUnion(cones))

    def dfs(j, witness):
        live = alive(j)
        if not live:
            return
        if j == R:
            leaf(live)
            return
        val = float(rows_arr[j] @ witness)
        for s in (-1, 0, 1):
            signs[j] = s
            reuse = (s < 0 and val <= -1 + 1e-9) or (s > 0 and val >= 1 - 1e-9) or (
                s == 0 and abs(val) <= 1e-10
            )
            if reuse:
                dfs(j + 1, witness)
            else:
                ok, x = feasible(j + 1)
                if ok:
                    dfs(j + 1, x)
        signs[j] = 0

    dfs(0, np.zeros(dim))
    return canonicalize(ConeUnion(list(found.values())))


# ---------------------------------------------------------------------------
# module-level oracles


def member(s: StructuredSet, point, tol: float = MEMBER_TOL) -> bool:
    return s.member(point, tol)


def project_box_sparsity(s: BoxSparsitySet, z) -> np.ndarray:
    return s.project(z)


def project_complementarity(s: ComplementaritySet, z, lam):
    return s.project_pair(z, lam)


def tangent_cone(s: StructuredSet, point) -> ConeUnion:
    return s.tangent_cone(point)


def regular_normal_cone(s: StructuredSet, point) -> ConvexCone:
    return s.regular_normal_cone(point)


def limiting_normal_cone(s: StructuredSet, point) -> ConeUnion:
    return s.limiting_normal_cone(point)


def branch_count(s) -> int:
    if isinstance(s, (BoxSparsitySet, ComplementaritySet)):
        return s.branch_count()
    raise TypeError("branch counts are defined for box-sparsity and complementarity sets")


def kcc_image(z, kappa: int, tol: float = MEMBER_TOL) -> PolyUnionSet:
    """``{lam : sum(lam) >= n - kappa, 0 <= lam <= 1, lam_i = 0 on supp(z)}``."""
    z = np.asarray(z, dtype=float).reshape(-1)
    n = z.shape[0]
    eye = np.eye(n)
    A = np.vstack([-np.ones((1, n)), -eye, eye])
    a = np.concatenate([[-(n - kappa)], np.zeros(n), np.ones(n)])
    supp = np.flatnonzero(np.abs(z) > tol)
    return PolyUnionSet(n, [(A, a, eye[supp], np.zeros(len(supp)))])


def kvc_selection(Gz) -> np.ndarray:
    """Entrywise ``max(G(z), 0)``."""
    return np.maximum(np.asarray(Gz, dtype=float), 0.0)


def polytope_vertices(P: Polyhedron, tol: float = 1e-9) -> np.ndarray:
    """Vertices of a bounded polyhedron by brute force over basic solutions."""
    dim = P.A.shape[1]
    rows = np.vstack([P.B, P.A])
    rhs = np.concatenate([P.b, P.a])
    neq = P.B.shape[0]
    out: list = []
    for pick in itertools.combinations(range(neq, rows.shape[0]), max(0, dim - neq)):
        idx = list(range(neq)) + list(pick)
        M = rows[idx]
        if M.shape[0] != dim or abs(np.linalg.det(M)) < 1e-12:
            continue
        x = np.linalg.solve(M, rhs[idx])
        if P.residual(x) <= tol and not any(np.max(np.abs(x - v)) <= 1e-9 for v in out):
            out.append(x)
    return np.array(out) if out else np.zeros((0, dim))


# ---------------------------------------------------------------------------
# fixture format

_ROW = re.compile(r"^(INEQ|EQ)\s+(.*?)\s*(<=|≤|=)\s*(\S+)\s*$", re.IGNORECASE)


def parse_poly_union(text: str) -> PolyUnionSet:
    """Parse ``DIM n`` / ``BRANCH`` / ``INEQ a.. <= a0`` / ``EQ b.. = b0`` lines."""
    dim = None
    branches: list = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head = line.split()[0].upper()
        if head == "DIM":
            try:
                dim = int(line.split()[1])
            except (IndexError, ValueError):
                raise ParseError(f"line {lineno}: bad DIM line") from None
            continue
        if head == "BRANCH":
            branches.append(([], [], [], []))
            continue
        m = _ROW.match(line)
        if not m:
            raise ParseError(f"line {lineno}: cannot parse {raw!r}")
        kind, lhs, op, rhs = m.groups()
        kind = kind.upper()
        if (kind == "EQ") != (op == "="):
            raise ParseError(f"line {lineno}: INEQ needs '<=', EQ needs '='")
        try:
            vec = [float(t) for t in re.split(r"[\s,]+", lhs) if t]
            val = float(rhs)
        except ValueError:
            raise ParseError(f"line {lineno}: non-numeric entry") from None
        if not (np.all(np.isfinite(vec)) and np.isfinite(val)):
            raise ParseError(f"line {lineno}: non-finite entry")
        if dim is None:
            dim = len(vec)
        if len(vec) != dim:
            raise ParseError(f"line {lineno}: expected {dim} coefficients")
        if not branches:
            branches.append(([], [], [], []))
        A, a, B, b = branches[-1]
        if kind == "INEQ":
            A.append(vec)
            a.append(val)
        else:
            B.append(vec)
            b.append(val)
    if dim is None or not branches:
        raise ParseError("no branches found")
    try:
        return PolyUnionSet(dim, branches)
    except ValueError as exc:
        raise ParseError(str(exc)) from None


def format_poly_union(s: PolyUnionSet) -> str:
    fmt = lambda x: format(float(x), ".17g")
    lines = [f"DIM {s.dim}"]
    for br in s.branches:
        lines.append("BRANCH")
        lines += [f"INEQ {' '.join(map(fmt, r))} <= {fmt(v)}" for r, v in zip(br.A, br.a)]
        lines += [f"EQ {' '.join(map(fmt, r))} = {fmt(v)}" for r, v in zip(br.B, br.b)]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# trivial sets used as the geometric constraint of smooth problems


class FullSpace(StructuredSet):
    def __init__(self, dim: int):
        self.dim = int(dim)

    def member(self, point, tol: float = MEMBER_TOL) -> bool:
        p = np.asarray(point, dtype=float).reshape(-1)
        return p.shape[0] == self.dim and bool(np.all(np.isfinite(p)))

    def project(self, point) -> np.ndarray:
        return np.asarray(point, dtype=float).reshape(-1).copy()

    def tangent_cone(self, point) -> ConeUnion:
        self._require_member(point)
        return ConeUnion([ConvexCone.full(self.dim)])

    def limiting_normal_cone(self, point) -> ConeUnion:
        self._require_member(point)
        return ConeUnion([ConvexCone.zero(self.dim)])


class BoxSet(StructuredSet):
    def __init__(self, lower, upper):
        self.lower = np.asarray(lower, dtype=float).reshape(-1)
        self.upper = np.asarray(upper, dtype=float).reshape(-1)
        if self.lower.shape != self.upper.shape or np.any(self.lower > self.upper):
            raise ValueError("invalid box")
        self.dim = self.lower.shape[0]

    def member(self, point, tol: float = MEMBER_TOL) -> bool:
        p = np.asarray(point, dtype=float).reshape(-1)
        if p.shape[0] != self.dim:
            return False
        return bool(np.all(p >= self.lower - tol) and np.all(p <= self.upper + tol))

    def project(self, point) -> np.ndarray:
        return np.clip(np.asarray(point, dtype=float).reshape(-1), self.lower, self.upper)

    def tangent_cone(self, point, tol: float = MEMBER_TOL) -> ConeUnion:
        p = self._require_member(point, tol)
        kinds = [_interval_tangent(p[i], self.lower[i], self.upper[i], tol) for i in range(self.dim)]
        return ConeUnion([ConvexCone.coordinate(kinds)])

    def limiting_normal_cone(self, point, tol: float = MEMBER_TOL) -> ConeUnion:
        p = self._require_member(point, tol)
        kinds = [_interval_normal(p[i], self.lower[i], self.upper[i], tol) for i in range(self.dim)]
        return ConeUnion([ConvexCone.coordinate(kinds)])


class ProductSet(StructuredSet):
    """Cartesian product of sets, coordinates concatenated in order."""

    def __init__(self, parts: Sequence[StructuredSet]):
        self.parts = list(parts)
        self.dims = [p.dim for p in self.parts]
        self.dim = sum(self.dims)
        self._cuts = np.cumsum([0] + self.dims)

    def _pieces(self, point):
        p = np.asarray(point, dtype=float).reshape(-1)
        return [p[self._cuts[i] : self._cuts[i + 1]] for i in range(len(self.parts))]

    def member(self, point, tol: float = MEMBER_TOL) -> bool:
        p = np.asarray(point, dtype=float).reshape(-1)
        if p.shape[0] != self.dim:
            return False
        return all(s.member(x, tol) for s, x in zip(self.parts, self._pieces(p)))

    def project(self, point) -> np.ndarray:
        return np.concatenate([s.project(x) for s, x in zip(self.parts, self._pieces(point))])
