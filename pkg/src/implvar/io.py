"""Instance files, dataset conversion, synthetic generation and result emission."""

from __future__ import annotations

import csv
import io as _io
import json
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .errors import ParseError, UnrecognizedLayout, ValidationError
from .model import PortfolioInstance, greedy_witness, make_instance

RESULT_COLUMNS = [
    "instance", "model", "kappa", "objective", "outer_iters", "inner_iters", "final_rho", "reason", "seconds",
]


def _finite_list(x, what: str) -> list:
    try:
        arr = [float(v) for v in x]
    except (TypeError, ValueError):
        raise ParseError(f"{what} must be a list of numbers") from None
    if not all(math.isfinite(v) for v in arr):
        raise ParseError(f"{what} contains NaN or Inf")
    return arr


def _reject_constant(token: str):
    raise ParseError(f"non-finite literal {token} is not allowed")


def instance_to_dict(inst: PortfolioInstance) -> dict:
    n = inst.n
    return {
        "name": inst.name,
        "n": n,
        "kappa": list(inst.kappas) if inst.kappas else [inst.kappa],
        "theta": inst.theta,
        "c": inst.c.tolist(),
        "u": inst.u.tolist(),
        "Q": [inst.Q[i, : i + 1].tolist() for i in range(n)],
    }


def instance_from_dict(doc: dict, kappa: Optional[int] = None, require_witness: bool = True) -> PortfolioInstance:
    try:
        n = int(doc["n"])
        name = str(doc.get("name", "instance"))
        theta = float(doc["theta"])
        c = _finite_list(doc["c"], "c")
        u = _finite_list(doc.get("u", [1.0] * n), "u")
        rows = doc["Q"]
    except KeyError as exc:
        raise ParseError(f"missing field {exc.args[0]!r}") from None
    if not math.isfinite(theta):
        raise ParseError("theta must be finite")
    if len(c) != n or len(u) != n or len(rows) != n:
        raise ParseError("c, u and Q must have n entries")
    Q = np.zeros((n, n))
    for i, row in enumerate(rows):
        vals = _finite_list(row, f"Q row {i}")
        if len(vals) != i + 1:
            raise ParseError(f"Q row {i} must have {i + 1} entries (lower triangle)")
        Q[i, : i + 1] = vals
        Q[: i + 1, i] = vals
    kappas = doc.get("kappa") or []
    if isinstance(kappas, int):
        kappas = [kappas]
    kappas = [int(k) for k in kappas]
    k = kappa if kappa is not None else (kappas[0] if kappas else max(1, n // 10))
    return make_instance(name, Q, c, u, theta, k, kappas, require_witness)


def write_canonical(inst: PortfolioInstance, path) -> None:
    Path(path).write_text(json.dumps(instance_to_dict(inst), indent=1) + "\n")


def parse_canonical(path, kappa: Optional[int] = None, require_witness: bool = True) -> PortfolioInstance:
    """Read and validate a canonical JSON instance.

    ``require_witness=False`` accepts instances with no feasible portfolio.
    """
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from None
    try:
        doc = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(doc, dict):
        raise ParseError(f"{path}: top level must be an object")
    return instance_from_dict(doc, kappa, require_witness)


# ---------------------------------------------------------------------------
# upstream mean-variance collection


def _numbers(path: Path):
    """Yield ``(lineno, value)`` for every whitespace-separated token."""
    for lineno, line in enumerate(path.read_text().splitlines(), 1):
        for tok in line.split():
            try:
                v = float(tok)
            except ValueError:
                raise UnrecognizedLayout(f"{path.name}:{lineno}: not a number: {line.strip()!r}") from None
            if not math.isfinite(v):
                raise UnrecognizedLayout(f"{path.name}:{lineno}: non-finite value: {line.strip()!r}")
            yield lineno, v


def convert_frangioni_gentile(path, kappa: int = 10) -> PortfolioInstance:
    """Convert one instance of the upstream mean-variance collection.

    ``path`` names any file of the instance group ``<stem>.{mat,txt,rho,bds}``:
    ``.mat`` holds ``n`` followed by the ``n*n`` covariance entries row by row,
    ``.txt`` the ``n`` expected returns, ``.rho`` the required return and
    ``.bds`` one ``lower upper`` pair per asset.  The layout is checked
    structurally (counts, symmetry, PSD) rather than trusted.
    """
    p = Path(path)
    stem = p.with_suffix("")
    parts = {ext: stem.with_suffix(ext) for ext in (".mat", ".txt", ".rho", ".bds")}
    for ext, f in parts.items():
        if not f.exists():
            raise UnrecognizedLayout(f"missing companion file {f.name}")
    mat = list(_numbers(parts[".mat"]))
    if not mat:
        raise UnrecognizedLayout(f"{parts['.mat'].name}: empty file")
    n_val = mat[0][1]
    if n_val != int(n_val) or n_val < 2:
        raise UnrecognizedLayout(f"{parts['.mat'].name}:{mat[0][0]}: first entry must be the dimension")
    n = int(n_val)
    entries = mat[1:]
    if len(entries) != n * n:
        at = entries[min(len(entries), n * n) - 1][0] if entries else mat[0][0]
        raise UnrecognizedLayout(
            f"{parts['.mat'].name}:{at}: expected {n * n} covariance entries, found {len(entries)}"
        )
    Q = np.array([v for _, v in entries]).reshape(n, n)
    ret = [v for _, v in _numbers(parts[".txt"])]
    if len(ret) != n:
        raise UnrecognizedLayout(f"{parts['.txt'].name}: expected {n} returns, found {len(ret)}")
    rho = [v for _, v in _numbers(parts[".rho"])]
    if len(rho) != 1:
        raise UnrecognizedLayout(f"{parts['.rho'].name}: expected one required-return value")
    bds = [v for _, v in _numbers(parts[".bds"])]
    if len(bds) != 2 * n:
        raise UnrecognizedLayout(f"{parts['.bds'].name}: expected {n} lower/upper pairs")
    upper = np.array(bds[1::2])
    if np.max(np.abs(Q - Q.T)) > 1e-8 * max(1.0, np.max(np.abs(Q))):
        raise UnrecognizedLayout(f"{parts['.mat'].name}: assembled covariance is not symmetric")
    Q = 0.5 * (Q + Q.T)
    if np.linalg.eigvalsh(Q).min() < -1e-8:
        raise UnrecognizedLayout(f"{parts['.mat'].name}: covariance is not PSD within 1e-8")
    try:
        return make_instance(stem.name, Q, ret, upper, rho[0], kappa, (kappa,))
    except ValidationError as exc:
        raise UnrecognizedLayout(f"{stem.name}: converted data fails validation ({exc})") from None


# ---------------------------------------------------------------------------
# synthetic instances


def generate_synthetic(seed: int, n: int = 50, factors: int = 5, kappa: int = 5,
                       kappas: Iterable[int] = ()) -> PortfolioInstance:
    """Factor-model instance ``Q = F F' + diag(d)`` with ``theta`` at 90% of the greedy best return."""
    if n < 2 or not 1 <= kappa < n:
        raise ValueError("need n >= 2 and 1 <= kappa < n")
    rng = np.random.default_rng(seed)
    F = rng.uniform(0.0, 1.0, size=(n, factors))
    d = rng.uniform(0.01, 0.1, size=n)
    c = rng.uniform(0.0, 1.0, size=n)
    u = np.ones(n)
    Q = F @ F.T + np.diag(d)
    ks = tuple(kappas) or (kappa,)
    best = min(float(c @ greedy_witness(c, u, k)) for k in ks)
    return make_instance(f"syn-n{n}-s{seed}", Q, c, u, 0.9 * best, kappa, ks)


# ---------------------------------------------------------------------------
# results


@dataclass
class ResultRow:
    instance: str
    model: str
    kappa: int
    objective: Optional[float]
    outer_iters: int
    inner_iters: int
    final_rho: float
    reason: str
    seconds: Optional[float] = None

    def __post_init__(self):
        if self.reason != "Converged":
            self.objective = None


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def emit_results(rows, path=None, fmt: str = "csv") -> str:
    """Write rows as CSV (fixed header) or JSON; returns the text written."""
    rows = list(rows)
    if not rows:
        raise ValueError("no result rows")
    if fmt == "csv":
        buf = _io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(RESULT_COLUMNS)
        for r in rows:
            wr.writerow([_cell(getattr(r, c)) for c in RESULT_COLUMNS])
        text = buf.getvalue()
    elif fmt == "json":
        text = json.dumps([asdict(r) for r in rows], indent=1) + "\n"
    else:
        raise ValueError(f"unknown format {fmt!r}")
    if path is not None:
        Path(path).write_text(text)
    return text


def read_results(path, fmt: str = "csv") -> list:
    text = Path(path).read_text()
    if fmt == "json":
        return [ResultRow(**d) for d in json.loads(text)]
    out = []
    for d in csv.DictReader(_io.StringIO(text)):
        out.append(
            ResultRow(
                instance=d["instance"], model=d["model"], kappa=int(d["kappa"]),
                objective=float(d["objective"]) if d["objective"] else None,
                outer_iters=int(d["outer_iters"]), inner_iters=int(d["inner_iters"]),
                final_rho=float(d["final_rho"]), reason=d["reason"],
                seconds=float(d["seconds"]) if d["seconds"] else None,
            )
        )
    return out
