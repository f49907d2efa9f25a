"""Finitely generated convex cones and finite unions of them.

Every convex cone carries both representations::

    cone(generators) + span(lineality) == {v : ineq @ v <= 0, eq @ v == 0}

and conversions between the two use the double description method with an
algebraic (rank based) adjacency test.  All tangent and normal cones of the
package are either a single :class:`ConvexCone` or a :class:`ConeUnion`.

Floats are used throughout.  Membership uses an absolute tolerance of 1e-9 on
unit-normalized rows, representation comparisons use 1e-7.
"""

from __future__ import annotations

import enum
import itertools
import re
from typing import Iterable, Sequence, Union

import numpy as np
from scipy.linalg import null_space
from scipy.optimize import linprog

from .errors import DimensionTooLarge, InconclusiveCover, NumericallyDegenerate, ParseError

MAX_DIM = 12
MEMBER_TOL = 1e-9
REP_TOL = 1e-7

_ZERO = 1e-9
_DEGENERATE = 1e-6


def _as_rows(x, dim: int) -> np.ndarray:
    if x is None:
        return np.zeros((0, dim))
    arr = np.asarray(x, dtype=float)
    if arr.size == 0:
        return np.zeros((0, dim))
    arr = arr.reshape(-1, dim)
    if not np.all(np.isfinite(arr)):
        raise ValueError("cone data must be finite")
    return arr


def _unit_rows(rows: np.ndarray) -> np.ndarray:
    if rows.shape[0] == 0:
        return rows
    norms = np.linalg.norm(rows, axis=1)
    keep = norms > _ZERO
    return rows[keep] / norms[keep, None]


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def _orthonormal_rows(vectors, dim: int) -> np.ndarray:
    """Orthonormal basis (as rows) of the span of ``vectors``."""
    m = _as_rows(vectors, dim)
    if m.shape[0] == 0:
        return np.zeros((0, dim))
    _, s, vt = np.linalg.svd(m, full_matrices=False)
    rank = int(np.sum(s > _ZERO * max(1.0, s[0])))
    return vt[:rank]


def _reduce_rays(rays, lin: np.ndarray, norm_ord=np.inf) -> list:
    out: list = []
    for r in rays:
        scale = np.max(np.abs(r))
        if scale <= 0.0:
            continue
        r = r / scale
        if lin.shape[0]:
            r = r - lin.T @ (lin @ r)
        n = np.linalg.norm(r, norm_ord)
        if n <= _ZERO:
            continue
        r = r / n
        if any(np.max(np.abs(r - q)) <= 1e-9 for q in out):
            continue
        out.append(r)
    return out


def _rank(rows: np.ndarray) -> int:
    if rows.shape[0] == 0:
        return 0
    s = np.linalg.svd(rows, compute_uv=False)
    return int(np.sum(s > _ZERO * max(1.0, s[0])))


def _h_to_v(dim: int, ineq: np.ndarray, eq: np.ndarray):
    """Double description: generators and lineality of {ineq v <= 0, eq v = 0}."""
    if eq.shape[0]:
        basis = null_space(eq, rcond=1e-10)
    else:
        basis = np.eye(dim)
    r = basis.shape[1]
    if r == 0:
        return np.zeros((0, dim)), np.zeros((0, dim))

    rows = ineq @ basis
    lin = np.eye(r)
    rays: list = []
    done: list = []
    for a in rows:
        na = np.linalg.norm(a)
        if na <= _ZERO:
            continue
        a = a / na
        lv = lin @ a if lin.shape[0] else np.zeros(0)
        if lv.size and np.max(np.abs(lv)) > _ZERO:
            j = int(np.argmax(np.abs(lv)))
            l0, v0 = lin[j], lv[j]
            if v0 > 0:
                l0, v0 = -l0, -v0
            others = np.delete(lin, j, axis=0)
            others = others - np.outer(others @ a / v0, l0)
            rays = [q - (a @ q) / v0 * l0 for q in rays] + [l0]
            lin = _orthonormal_rows(others, r)
        else:
            vals = [float(a @ q) for q in rays]
            pos = [(q, v) for q, v in zip(rays, vals) if v > _ZERO]
            neg = [(q, v) for q, v in zip(rays, vals) if v < -_ZERO]
            new = [q for q, v in zip(rays, vals) if v <= _ZERO]
            if pos and neg:
                target = r - lin.shape[0] - 2
                prev = np.array(done) if done else np.zeros((0, r))
                for p, vp in pos:
                    zp = np.abs(prev @ p) <= 1e-8
                    for q, vq in neg:
                        common = zp & (np.abs(prev @ q) <= 1e-8)
                        if _rank(prev[common]) == target:
                            new.append(vp * q - vq * p)
            rays = new
        done.append(a)
        rays = _reduce_rays(rays, lin)

    lin_out = _orthonormal_rows(lin @ basis.T, dim)
    rays_out = _reduce_rays([basis @ q for q in rays], lin_out, norm_ord=2)
    gens = np.array(rays_out) if rays_out else np.zeros((0, dim))
    return gens, lin_out


class ConvexCone:
    """A closed convex polyhedral cone in R^dim.

    Either representation may be supplied; :func:`dd_convert` (or the
    ``from_*`` constructors) fills in the other one.  Instances are immutable.
    """

    __slots__ = ("dim", "generators", "lineality", "ineq", "eq", "_has_v", "_has_h")

    def __init__(self, dim, generators=None, lineality=None, ineq=None, eq=None):
        dim = int(dim)
        if dim < 1:
            raise ValueError("dim must be positive")
        object.__setattr__(self, "dim", dim)
        has_v = generators is not None or lineality is not None
        has_h = ineq is not None or eq is not None
        if not (has_v or has_h):
            raise ValueError("a cone needs a V- or an H-representation")
        object.__setattr__(self, "_has_v", has_v)
        object.__setattr__(self, "_has_h", has_h)
        object.__setattr__(self, "generators", _frozen(_as_rows(generators, dim)))
        object.__setattr__(self, "lineality", _frozen(_as_rows(lineality, dim)))
        object.__setattr__(self, "ineq", _frozen(_unit_rows(_as_rows(ineq, dim))))
        object.__setattr__(self, "eq", _frozen(_unit_rows(_as_rows(eq, dim))))

    def __setattr__(self, name, value):
        raise AttributeError("ConvexCone is immutable")

    @property
    def reps_synced(self) -> bool:
        return self._has_v and self._has_h

    @classmethod
    def from_generators(cls, generators=(), lineality=(), dim=None) -> "ConvexCone":
        dim = _infer_dim(dim, generators, lineality)
        return dd_convert(cls(dim, generators=generators, lineality=lineality), Direction.VtoH)

    @classmethod
    def from_constraints(cls, ineq=(), eq=(), dim=None) -> "ConvexCone":
        dim = _infer_dim(dim, ineq, eq)
        return dd_convert(cls(dim, ineq=ineq, eq=eq), Direction.HtoV)

    @classmethod
    def zero(cls, dim: int) -> "ConvexCone":
        return cls(dim, generators=(), lineality=(), ineq=(), eq=np.eye(dim))

    @classmethod
    def full(cls, dim: int) -> "ConvexCone":
        return cls(dim, generators=(), lineality=np.eye(dim), ineq=(), eq=())

    @classmethod
    def coordinate(cls, kinds: Sequence[str]) -> "ConvexCone":
        """Product of one-dimensional cones.

        ``kinds[i]`` is one of ``"free"`` (R), ``"pos"`` (R+), ``"neg"`` (R-)
        or ``"zero"`` ({0}).  Both representations are written down directly.
        """
        dim = len(kinds)
        eye = np.eye(dim)
        gens, lin, ineq, eq = [], [], [], []
        for i, k in enumerate(kinds):
            if k == "free":
                lin.append(eye[i])
            elif k == "pos":
                gens.append(eye[i])
                ineq.append(-eye[i])
            elif k == "neg":
                gens.append(-eye[i])
                ineq.append(eye[i])
            elif k == "zero":
                eq.append(eye[i])
            else:
                raise ValueError(f"unknown coordinate cone kind {k!r}")
        return cls(dim, generators=gens, lineality=lin, ineq=ineq, eq=eq)

    def is_zero(self) -> bool:
        c = _synced(self)
        return c.generators.shape[0] == 0 and c.lineality.shape[0] == 0

    def is_full(self) -> bool:
        c = _synced(self)
        return c.lineality.shape[0] == c.dim

    def __repr__(self) -> str:
        return f"ConvexCone({describe(self)})"


def _infer_dim(dim, *blocks) -> int:
    if dim is not None:
        return int(dim)
    for b in blocks:
        arr = np.asarray(b, dtype=float)
        if arr.ndim == 2 and arr.shape[0]:
            return arr.shape[1]
    raise ValueError("cannot infer dimension from empty data; pass dim=")


class Direction(enum.Enum):
    HtoV = "HtoV"
    VtoH = "VtoH"


def _check_consistent(c: ConvexCone) -> None:
    for block in (c.generators, c.lineality):
        if block.shape[0] == 0:
            continue
        scale = np.maximum(1.0, np.linalg.norm(block, axis=1))
        if c.ineq.shape[0]:
            viol = (c.ineq @ block.T) / scale
            if block is c.generators:
                bad = np.max(viol) > _DEGENERATE
            else:
                bad = np.max(np.abs(viol)) > _DEGENERATE
            if bad:
                raise NumericallyDegenerate("generator violates an inequality after conversion")
        if c.eq.shape[0] and np.max(np.abs(c.eq @ block.T) / scale) > _DEGENERATE:
            raise NumericallyDegenerate("generator violates an equation after conversion")


def dd_convert(cone: ConvexCone, direction: Direction | str, max_dim: int = MAX_DIM) -> ConvexCone:
    """Populate the missing representation of ``cone``.

    ``HtoV`` recomputes generators from the inequalities/equations, ``VtoH``
    recomputes the constraints from the generators (via the polar cone).
    """
    direction = Direction(direction)
    if cone.dim > max_dim:
        raise DimensionTooLarge(f"dimension {cone.dim} exceeds cap {max_dim}")
    if direction is Direction.HtoV:
        if not cone._has_h:
            raise ValueError("HtoV needs an H-representation")
        gens, lin = _h_to_v(cone.dim, np.asarray(cone.ineq), np.asarray(cone.eq))
        out = ConvexCone(cone.dim, gens, lin, cone.ineq, cone.eq)
    else:
        if not cone._has_v:
            raise ValueError("VtoH needs a V-representation")
        pg, pl = _h_to_v(cone.dim, np.asarray(cone.generators), np.asarray(cone.lineality))
        # drop redundant input generators: they are not needed for exactness
        out = ConvexCone(cone.dim, cone.generators, cone.lineality, pg, pl)
    _check_consistent(out)
    return out


def _synced(c: ConvexCone) -> ConvexCone:
    if c.reps_synced:
        return c
    return dd_convert(c, Direction.HtoV if c._has_h else Direction.VtoH)


class ConeUnion:
    """A finite union of convex cones of one dimension."""

    __slots__ = ("dim", "branches")

    def __init__(self, branches: Iterable[ConvexCone], dim: int | None = None):
        branches = tuple(_synced(b) for b in branches)
        if not branches:
            raise ValueError("a ConeUnion needs at least one branch")
        d = branches[0].dim if dim is None else int(dim)
        if any(b.dim != d for b in branches):
            raise ValueError("all branches must share one dimension")
        object.__setattr__(self, "dim", d)
        object.__setattr__(self, "branches", branches)

    def __setattr__(self, name, value):
        raise AttributeError("ConeUnion is immutable")

    def __iter__(self):
        return iter(self.branches)

    def __len__(self) -> int:
        return len(self.branches)

    def is_convex_repr(self) -> bool:
        return len(self.branches) == 1

    def __repr__(self) -> str:
        return f"ConeUnion({describe(self)})"


ConeLike = Union[ConvexCone, ConeUnion]


def as_union(c: ConeLike) -> ConeUnion:
    if isinstance(c, ConeUnion):
        return c
    return ConeUnion([c])


def _branch_subset(a: ConvexCone, b: ConvexCone, tol: float = REP_TOL) -> bool:
    """Convex inclusion a <= b by testing a's generators against b's constraints."""
    for block, two_sided in ((a.generators, False), (a.lineality, True)):
        if block.shape[0] == 0:
            continue
        unit = block / np.maximum(1e-300, np.linalg.norm(block, axis=1))[:, None]
        if b.ineq.shape[0]:
            vals = b.ineq @ unit.T
            if two_sided and np.max(np.abs(vals)) > tol:
                return False
            if not two_sided and np.max(vals) > tol:
                return False
        if b.eq.shape[0] and np.max(np.abs(b.eq @ unit.T)) > tol:
            return False
    return True


def canonicalize(c: ConeLike) -> ConeUnion:
    """Drop branches contained in another branch (duplicates included)."""
    kept: list = []
    for b in as_union(c):
        if any(_branch_subset(b, k) for k in kept):
            continue
        kept = [k for k in kept if not _branch_subset(k, b)]
        kept.append(b)
    return ConeUnion(kept)


def polar(c: ConeLike) -> ConvexCone:
    """Polar cone {z : z.w <= 0 for all w in c}; the intersection of branch polars."""
    u = as_union(c)
    ineq = np.vstack([b.generators for b in u])
    eq = np.vstack([b.lineality for b in u])
    return ConvexCone.from_constraints(ineq=ineq, eq=eq, dim=u.dim)


def minkowski_sum(a: ConeLike, b: ConeLike) -> ConeUnion:
    ua, ub = as_union(a), as_union(b)
    if ua.dim != ub.dim:
        raise ValueError("dimension mismatch")
    out = []
    for x, y in itertools.product(ua, ub):
        out.append(
            ConvexCone.from_generators(
                np.vstack([x.generators, y.generators]),
                np.vstack([x.lineality, y.lineality]),
                dim=ua.dim,
            )
        )
    return canonicalize(ConeUnion(out))


def intersect(a: ConeLike, b: ConeLike) -> ConeUnion:
    ua, ub = as_union(a), as_union(b)
    if ua.dim != ub.dim:
        raise ValueError("dimension mismatch")
    out = []
    for x, y in itertools.product(ua, ub):
        out.append(
            ConvexCone.from_constraints(
                np.vstack([x.ineq, y.ineq]), np.vstack([x.eq, y.eq]), dim=ua.dim
            )
        )
    return canonicalize(ConeUnion(out))


def contains(c: ConeLike, v, tol: float = MEMBER_TOL) -> bool:
    u = as_union(c)
    v = np.asarray(v, dtype=float).reshape(-1)
    if v.shape[0] != u.dim:
        raise ValueError("dimension mismatch")
    lim = tol * max(1.0, float(np.linalg.norm(v)))
    for b in u:
        if b.ineq.shape[0] and np.max(b.ineq @ v) > lim:
            continue
        if b.eq.shape[0] and np.max(np.abs(b.eq @ v)) > lim:
            continue
        return True
    return False


class Inclusion(enum.Enum):
    """Outcome of :func:`subset_eq`; ``NEITHER`` also covers strict supersets."""

    SUBSET = "Subset"
    EQUAL = "Equal"
    NEITHER = "Neither"


def _lp_feasible(a_ub, b_ub, a_eq, b_eq, dim):
    res = linprog(
        np.zeros(dim),
        A_ub=a_ub if a_ub.shape[0] else None,
        b_ub=b_ub if a_ub.shape[0] else None,
        A_eq=a_eq if a_eq.shape[0] else None,
        b_eq=b_eq if a_eq.shape[0] else None,
        bounds=[(None, None)] * dim,
        method="highs",
    )
    return res.status == 0, (res.x if res.status == 0 else None)


def _violation_options(b: ConvexCone) -> list:
    # rows r such that r.v >= 1 certifies v outside b (cones are scale invariant)
    opts = [row for row in b.ineq]
    for row in b.eq:
        opts.append(row)
        opts.append(-row)
    return opts


def _convex_in_union(a: ConvexCone, branches, lp_cover: bool) -> bool:
    if any(_branch_subset(a, b) for b in branches):
        return True
    if not lp_cover:
        raise InconclusiveCover("generators split across branches and the LP cover check is disabled")
    dim = a.dim
    options = [_violation_options(b) for b in branches]
    if any(not o for o in options):
        return True  # some branch is the whole space

    def search(j, chosen, witness):
        if j == len(options):
            return True  # a point of a outside every branch exists
        for row in options[j]:
            if witness is not None and row @ witness > 1e-9:
                if search(j + 1, chosen + [row], witness):
                    return True
                continue
            rows = np.array(chosen + [row])
            ok, x = _lp_feasible(
                np.vstack([a.ineq, -rows]),
                np.concatenate([np.zeros(a.ineq.shape[0]), -np.ones(rows.shape[0])]),
                a.eq,
                np.zeros(a.eq.shape[0]),
                dim,
            )
            if ok and search(j + 1, chosen + [row], x):
                return True
        return False

    return not search(0, [], None)


def is_subset(a: ConeLike, b: ConeLike, lp_cover: bool = True) -> bool:
    ua, ub = as_union(a), as_union(b)
    if ua.dim != ub.dim:
        raise ValueError("dimension mismatch")
    return all(_convex_in_union(x, ub.branches, lp_cover) for x in ua)


def subset_eq(a: ConeLike, b: ConeLike, lp_cover: bool = True) -> Inclusion:
    """Decide a <= b exactly; EQUAL when the inclusion holds both ways."""
    if not is_subset(a, b, lp_cover):
        return Inclusion.NEITHER
    if is_subset(b, a, lp_cover):
        return Inclusion.EQUAL
    return Inclusion.SUBSET


def project_cone(c: ConeLike, coords: Sequence[int]) -> ConeUnion:
    """Image under v -> v[coords] (0-based indices)."""
    u = as_union(c)
    idx = list(coords)
    if any(i < 0 or i >= u.dim for i in idx):
        raise ValueError("coordinate out of range")
    out = [
        ConvexCone.from_generators(b.generators[:, idx], b.lineality[:, idx], dim=len(idx))
        for b in u
    ]
    return canonicalize(ConeUnion(out))


def slice_zero(c: ConeLike, coords: Sequence[int]) -> ConeUnion:
    """{v[rest] : v in c, v[coords] == 0} where rest is the complement of coords."""
    u = as_union(c)
    zero_rows = np.eye(u.dim)[list(coords)]
    rest = [i for i in range(u.dim) if i not in set(coords)]
    sliced = [
        ConvexCone.from_constraints(b.ineq, np.vstack([b.eq, zero_rows]), dim=u.dim) for b in u
    ]
    return project_cone(ConeUnion(sliced), rest)


def cone_product(*parts: ConeLike) -> ConeUnion:
    """Cartesian product; the branches are all block combinations."""
    unions = [as_union(p) for p in parts]
    out = []
    for combo in itertools.product(*[u.branches for u in unions]):
        out.append(_convex_product(combo))
    return canonicalize(ConeUnion(out))


def _convex_product(cones: Sequence[ConvexCone]) -> ConvexCone:
    dim = sum(c.dim for c in cones)
    blocks = {"generators": [], "lineality": [], "ineq": [], "eq": []}
    off = 0
    for c in cones:
        for name in blocks:
            rows = getattr(c, name)
            if rows.shape[0]:
                pad = np.zeros((rows.shape[0], dim))
                pad[:, off : off + c.dim] = rows
                blocks[name].append(pad)
        off += c.dim
    stacked = {k: (np.vstack(v) if v else np.zeros((0, dim))) for k, v in blocks.items()}
    return ConvexCone(dim, **stacked)


def embed_zero(c: ConeLike, extra: int) -> ConeUnion:
    """c x {0} with ``extra`` trailing zero coordinates."""
    return cone_product(c, ConvexCone.zero(extra))


# --------------------------------------------------------------------------
# plain-text literal format


def _fmt(x: float) -> str:
    s = format(float(x), ".17g")
    return "0" if s == "-0" else s


def format_cones(c: ConeLike) -> str:
    """Serialize to the literal format (``DIM``, ``BRANCH``, ``GEN``/``LIN``/``INEQ``/``EQ``)."""
    u = as_union(c)
    lines = [f"DIM {u.dim}"]
    for b in u:
        lines.append("BRANCH")
        for name, rows in (("GEN", b.generators), ("LIN", b.lineality), ("INEQ", b.ineq), ("EQ", b.eq)):
            lines.append(name)
            lines.extend(" ".join(_fmt(x) for x in row) for row in rows)
    return "\n".join(lines) + "\n"


_SECTIONS = {"GEN", "LIN", "INEQ", "EQ"}


def parse_cones(text: str) -> ConeUnion:
    """Parse the literal format.  A branch given in V-form is trusted over its H-form."""
    dim = None
    branches: list = []
    current = None
    section = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head = line.split()
        key = head[0].upper()
        if key == "DIM":
            try:
                dim = int(head[1])
            except (IndexError, ValueError):
                raise ParseError(f"line {lineno}: bad DIM line {raw!r}") from None
            continue
        if key == "BRANCH":
            current = {k: [] for k in _SECTIONS}
            current["_seen"] = set()
            branches.append(current)
            section = None
            continue
        if key in _SECTIONS:
            if current is None:
                current = {k: [] for k in _SECTIONS}
                current["_seen"] = set()
                branches.append(current)
            section = key
            current["_seen"].add(key)
            continue
        if section is None:
            raise ParseError(f"line {lineno}: vector outside a section: {raw!r}")
        try:
            vec = [float(t) for t in re.split(r"[\s,]+", line) if t]
        except ValueError:
            raise ParseError(f"line {lineno}: not a vector: {raw!r}") from None
        if not all(np.isfinite(vec)):
            raise ParseError(f"line {lineno}: non-finite entry")
        if dim is None:
            dim = len(vec)
        if len(vec) != dim:
            raise ParseError(f"line {lineno}: expected {dim} entries, got {len(vec)}")
        current[section].append(vec)
    if dim is None:
        raise ParseError("cannot determine the dimension (add a DIM line)")
    if not branches:
        raise ParseError("no branches")
    cones = []
    for b in branches:
        seen = b["_seen"]
        if seen & {"GEN", "LIN"}:
            cones.append(ConvexCone.from_generators(b["GEN"], b["LIN"], dim=dim))
        elif seen & {"INEQ", "EQ"}:
            cones.append(ConvexCone.from_constraints(b["INEQ"], b["EQ"], dim=dim))
        else:
            raise ParseError("empty branch: give at least one section header")
    return ConeUnion(cones)


def describe(c: ConeLike) -> str:
    """Short human-readable rendering, e.g. ``{0}``, ``R^2`` or ``cone(...) + span(...)``."""
    parts = []
    for b in as_union(c):
        b = _synced(b)
        if b.is_zero():
            parts.append("{0}")
        elif b.is_full():
            parts.append(f"R^{b.dim}")
        else:
            terms = []
            if b.generators.shape[0]:
                terms.append("cone(" + ", ".join(_vec(g) for g in b.generators) + ")")
            if b.lineality.shape[0]:
                terms.append("span(" + ", ".join(_vec(g) for g in b.lineality) + ")")
            parts.append(" + ".join(terms))
    return " U ".join(parts)


def _vec(v) -> str:
    return "(" + ", ".join(format(round(float(x), 6) + 0.0, "g") for x in v) + ")"


def parse_named_cones(text: str) -> dict:
    """Split a file of ``CONE <name>`` blocks, each in the literal format."""
    out: dict = {}
    name = None
    buf: list = []
    for raw in text.splitlines():
        head = raw.split("#", 1)[0].split()
        if head and head[0].upper() == "CONE":
            if name is not None:
                out[name] = parse_cones("\n".join(buf))
            if len(head) != 2:
                raise ParseError(f"bad CONE line {raw!r}")
            name, buf = head[1], []
        else:
            buf.append(raw)
    if name is None:
        raise ParseError("no CONE blocks found")
    out[name] = parse_cones("\n".join(buf))
    return out


def format_named_cones(cones: dict) -> str:
    return "".join(f"CONE {k}\n" + format_cones(v) for k, v in cones.items())
