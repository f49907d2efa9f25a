"""Command-line entry point: ``implvar {gen,solve,bench,cones,check,convert}``.

Exit codes: 0 success, 1 usage or input error, 2 solver abort or point outside
the set, 3 inconsistent stationarity flags.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .errors import ImplvarError, Inconsistent, NotAMember, ParseError
from .io import (
    ResultRow,
    convert_frangioni_gentile,
    emit_results,
    generate_synthetic,
    parse_canonical,
    write_canonical,
)
from .model import EXAMPLES, build_model, get_example
from .polycone import describe, format_cones, parse_cones
from .sets import BoxSparsitySet, ComplementaritySet, parse_poly_union
from .solver import AlmConfig, alm_solve
from .stationarity import LambdaData, StationarityCase, check_all

OUT_ENV = "IMPLVAR_OUT"

EXIT_OK, EXIT_USAGE, EXIT_ABORT, EXIT_INCONSISTENT = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _int_list(text: str) -> list:
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    if not out:
        raise argparse.ArgumentTypeError("empty list")
    return out


def _float_list(text: str) -> np.ndarray:
    try:
        return np.array([float(t) for t in text.replace(",", " ").split()])
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a vector: {text!r}") from None


def _out_path(arg, default_name: str):
    if arg:
        return Path(arg)
    base = os.environ.get(OUT_ENV)
    return Path(base) / default_name if base else None


def _add_solver_flags(p):
    p.add_argument("--rho0", type=float, default=1.0, help="initial penalty parameter")
    p.add_argument("--beta", type=float, default=10.0, help="penalty increase factor (> 1)")
    p.add_argument("--tau", type=float, default=0.9, help="required violation decrease factor in (0, 1)")
    p.add_argument("--eps-tol", type=float, default=1e-4, help="outer termination tolerance on the violation")
    p.add_argument("--eps-inner", type=float, default=1e-6, help="inner residual tolerance")


def _alm_config(args, trace=None) -> AlmConfig:
    try:
        return AlmConfig(rho0=args.rho0, beta=args.beta, tau=args.tau, eps_tol=args.eps_tol,
                         eps_inner=args.eps_inner, trace_path=trace)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


# ---------------------------------------------------------------------------


def cmd_gen(args) -> int:
    out = _out_path(args.out, "instances")
    if out is None:
        raise UsageError("give --out or set IMPLVAR_OUT")
    out.mkdir(parents=True, exist_ok=True)
    for seed in args.seeds:
        inst = generate_synthetic(seed, args.n, args.factors, args.kappas[0], args.kappas)
        path = out / f"{inst.name}.json"
        write_canonical(inst, path)
        print(path)
    return EXIT_OK




def cmd_solve(args) -> int:
    trace = args.trace
    cfg = _alm_config(args, trace)
    if args.example:
        case = get_example(args.example)
        if not case.problems:
            raise UsageError(f"example {args.example} has no optimization problem")
        key = args.model if args.model in case.problems else next(iter(case.problems))
        prob, w0 = case.problems[key]
        label = f"example {args.example} ({key})"
    else:
        if not args.instance:
            raise UsageError("give an instance file or --example")
        inst = parse_canonical(args.instance, args.kappa, require_witness=not args.allow_infeasible)
        prob, w0 = build_model(inst, args.model, check=not args.allow_infeasible)
        label = f"{inst.name} ({args.model}, kappa={inst.kappa})"
    res = alm_solve(prob, w0, cfg)
    print(f"problem:      {label}")
    print(f"reason:       {res.reason.value}")
    print(f"objective:    {res.objective!r}" if res.converged else "objective:    (aborted)")
    print(f"violation:    {res.violation:.3e}")
    print(f"outer iters:  {res.outer_iters}")
    print(f"inner iters:  {res.inner_iters}")
    print(f"final rho:    {res.rho:g}")
    if args.show_point:
        print("w:", " ".join(repr(float(x)) for x in res.w))
    return EXIT_OK if res.converged else EXIT_ABORT


def _bench_task(task):
    source, kappa, model, timing = task
    kind, ref = source
    inst = generate_synthetic(*ref) if kind == "seed" else parse_canonical(ref, kappa)
    inst = inst.with_kappa(kappa)
    t0 = time.perf_counter()
    try:
        prob, w0 = build_model(inst, model)
        res = alm_solve(prob, w0)
        row = ResultRow(inst.name, model, kappa, res.objective, res.outer_iters, res.inner_iters,
                        res.rho, res.reason.value)
    except ImplvarError as exc:
        row = ResultRow(inst.name, model, kappa, None, 0, 0, float("nan"), type(exc).__name__)
    if timing:
        row.seconds = round(time.perf_counter() - t0, 6)
    return row


def tally(rows, tol: float = 1e-8):
    """Win/tie/loss of the implicit model against the explicit one (both converged)."""
    by = {}
    for r in rows:
        by.setdefault((r.instance, r.kappa), {})[r.model] = r
    win = tie = loss = skipped = 0
    for pair in by.values():
        i, e = pair.get("implicit"), pair.get("explicit")
        if not (i and e and i.objective is not None and e.objective is not None):
            skipped += 1
            continue
        if abs(i.objective - e.objective) <= tol:
            tie += 1
        elif i.objective < e.objective:
            win += 1
        else:
            loss += 1
    return win, tie, loss, skipped


def cmd_bench(args) -> int:
    sources = []
    if args.dataset:
        d = Path(args.dataset)
        files = sorted(d.glob("*.json")) if d.is_dir() else []
        if not files:
            raise UsageError(f"no instance files in {args.dataset}")
        sources = [("file", str(f)) for f in files]
    elif args.seeds:
        sources = [("seed", (s, args.n, args.factors, min(args.kappas), tuple(args.kappas))) for s in args.seeds]
    else:
        raise UsageError("give --seeds or --dataset")
    tasks = [(src, k, m, args.timing) for src in sources for k in args.kappas for m in ("implicit", "explicit")]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as ex:
            rows = list(ex.map(_bench_task, tasks))
    else:
        rows = [_bench_task(t) for t in tasks]
    rows.sort(key=lambda r: (r.instance, r.kappa, r.model))
    out = _out_path(args.out, "bench.csv")
    text = emit_results(rows, out, args.format)
    win, tie, loss, skipped = tally(rows)
    summary = f"implicit vs explicit: {win} wins, {tie} ties, {loss} losses, {skipped} pairs with an abort"
    if out is None:
        sys.stdout.write(text)
        print(summary, file=sys.stderr)
    else:
        print(f"wrote {len(rows)} rows to {out}")
        print(summary)
    return EXIT_OK


def parse_set_spec(spec: str):
    """``sparsity:n=2,kappa=1[,lower=..,upper=..]``, ``comp:n=1[,u=..,lu=..]`` or ``file:path``."""
    kind, _, rest = spec.partition(":")
    if kind == "file":
        return parse_poly_union(Path(rest).read_text())
    opts = {}
    for item in filter(None, rest.split(",")):
        if "=" not in item:
            raise UsageError(f"bad set option {item!r}")
        k, v = item.split("=", 1)
        opts[k.strip()] = v.strip()
    try:
        if kind == "sparsity":
            return BoxSparsitySet(int(opts["n"]), int(opts["kappa"]), float(opts.get("lower", "-inf")),
                                  float(opts.get("upper", "inf")))
        if kind == "comp":
            return ComplementaritySet(int(opts["n"]), float(opts.get("u", "inf")), float(opts.get("lu", "1")))
    except (KeyError, ValueError) as exc:
        raise UsageError(f"bad set spec {spec!r}: {exc}") from None
    raise UsageError(f"unknown set kind {kind!r}")


def cmd_cones(args) -> int:
    s = parse_set_spec(args.set)
    point = args.point
    fn = {"tangent": s.tangent_cone, "regular": s.regular_normal_cone, "limiting": s.limiting_normal_cone}[args.which]
    cone = fn(point)
    print(f"# {args.which} cone: {describe(cone)}")
    sys.stdout.write(format_cones(cone))
    return EXIT_OK


_CONE_FIELDS = ("T_M", "Nhat_M", "N_M", "T_domK", "Nhat_domK", "N_domK",
                "abstract_tangent", "abstract_regular", "abstract_limiting")
_LAMBDA_FIELDS = ("T_gph", "Nhat_gph", "N_gph", "Nhat_intersection")


def load_case(path) -> tuple:
    """Read a JSON case file; returns ``(StationarityCase, expected dict)``."""
    try:
        doc = json.loads(Path(path).read_text())
        cones = doc.get("cones", {})
        unknown = set(cones) - set(_CONE_FIELDS)
        if unknown:
            raise ParseError(f"unknown cone names {sorted(unknown)}")
        lambdas = []
        for item in doc.get("lambdas", []):
            lambdas.append(
                LambdaData(
                    str(item["label"]),
                    np.array(item["value"], dtype=float) if "value" in item else None,
                    **{f: parse_cones(item[f]) for f in _LAMBDA_FIELDS if f in item},
                )
            )
        case = StationarityCase(
            grad_f=doc["grad_f"], m=int(doc.get("m", 0)), lambdas=lambdas, name=str(doc.get("name", path)),
            **{k: parse_cones(v) for k, v in cones.items()},
        )
        return case, dict(doc.get("expected", {}))
    except (OSError, KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
        raise ParseError(f"malformed case file {path}: {exc}") from None


def cmd_check(args) -> int:
    if args.example:
        ex = get_example(args.example)
        try:
            rep = check_all(ex.case, raise_on_inconsistent=False)
        except ImplvarError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_USAGE
        print(rep.format())
        results = ex.verify()
        for name, ok in results:
            print(f"  [{'ok' if ok else 'FAIL'}] {name}")
        if not rep.consistent:
            return EXIT_INCONSISTENT
        return EXIT_OK if all(ok for _, ok in results) else EXIT_ABORT
    case, expected = load_case(args.case)
    rep = check_all(case, raise_on_inconsistent=False)
    print(rep.format())
    if not rep.consistent:
        return EXIT_INCONSISTENT
    ok = True
    for key, want in expected.items():
        got = getattr(rep, key, None)
        good = got == want
        ok &= good
        print(f"  [{'ok' if good else 'FAIL'}] {key} = {want}")
    return EXIT_OK if ok else EXIT_ABORT


def cmd_convert(args) -> int:
    inst = convert_frangioni_gentile(args.input, args.kappa)
    out = _out_path(args.out, f"{inst.name}.json")
    if out is None:
        raise UsageError("give --out or set IMPLVAR_OUT")
    if out.is_dir():
        out = out / f"{inst.name}.json"
    write_canonical(inst, out)
    print(f"wrote {out} (n={inst.n})")
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="implvar", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="write seeded synthetic portfolio instances")
    g.add_argument("--seeds", type=_int_list, required=True, help="seed list, e.g. 1-20 or 1,3,5")
    g.add_argument("--n", type=int, default=50, help="number of assets")
    g.add_argument("--factors", type=int, default=5, help="number of risk factors")
    g.add_argument("--kappas", type=_int_list, default=[5, 10], help="cardinality bounds stored in the file")
    g.add_argument("--out", help=f"output directory (default ${OUT_ENV}/instances)")
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("solve", help="run the augmented Lagrangian method on one problem")
    s.add_argument("instance", nargs="?", help="canonical JSON instance")
    s.add_argument("--example", choices=sorted(EXAMPLES), help="solve an academic example instead")
    s.add_argument("--model", choices=("implicit", "explicit"), default="implicit",
                   help="cardinality model (implicit) or complementarity reformulation (explicit)")
    s.add_argument("--kappa", type=int, help="cardinality bound (default: first one in the file)")
    s.add_argument("--trace", help="write a per-iteration CSV trace to this path")
    s.add_argument("--show-point", action="store_true", help="print the final iterate")
    s.add_argument("--allow-infeasible", action="store_true",
                   help="skip the feasibility witness check (stress runs; expect an abort)")
    _add_solver_flags(s)
    s.set_defaults(func=cmd_solve)

    b = sub.add_parser("bench", help="run both models over an instance collection")
    b.add_argument("--seeds", type=_int_list, help="synthetic seeds, e.g. 1-20")
    b.add_argument("--dataset", help="directory of canonical JSON instances")
    b.add_argument("--n", type=int, default=50, help="assets per synthetic instance")
    b.add_argument("--factors", type=int, default=5, help="risk factors per synthetic instance")
    b.add_argument("--kappas", type=_int_list, default=[5, 10], help="cardinality bounds, e.g. 5,10,20")
    b.add_argument("--out", help=f"result file (default ${OUT_ENV}/bench.csv, else stdout)")
    b.add_argument("--format", choices=("csv", "json"), default="csv", help="result format")
    b.add_argument("--jobs", type=int, default=1, help="worker processes")
    b.add_argument("--timing", action="store_true", help="fill the seconds column (output is then not reproducible)")
    b.set_defaults(func=cmd_bench)

    c = sub.add_parser("cones", help="print a tangent or normal cone of a structured set")
    c.add_argument("--set", required=True, help="sparsity:n=2,kappa=1[,lower=L,upper=U] | comp:n=1[,u=U,lu=L] | file:PATH")
    c.add_argument("--point", type=_float_list, required=True, help="point, e.g. '0,0'")
    c.add_argument("--which", choices=("tangent", "regular", "limiting"), default="tangent", help="which cone")
    c.set_defaults(func=cmd_cones)

    k = sub.add_parser("check", help="stationarity report for an example or a case file")
    grp = k.add_mutually_exclusive_group(required=True)
    grp.add_argument("--example", choices=sorted(EXAMPLES), help="built-in example")
    grp.add_argument("--case", help="JSON case file with cones in the literal format")
    k.set_defaults(func=cmd_check)

    v = sub.add_parser("convert", help="convert an upstream mean-variance instance to canonical JSON")
    v.add_argument("input", help="any file of the <stem>.{mat,txt,rho,bds} group")
    v.add_argument("--kappa", type=int, default=10, help="cardinality bound to record")
    v.add_argument("--out", help=f"output file or directory (default ${OUT_ENV})")
    v.set_defaults(func=cmd_convert)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"implvar: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NotAMember as exc:
        print(f"implvar: {exc}", file=sys.stderr)
        return EXIT_ABORT
    except Inconsistent as exc:
        print(f"implvar: inconsistent stationarity flags: {exc}", file=sys.stderr)
        return EXIT_INCONSISTENT
    except (ImplvarError, OSError, ValueError) as exc:
        print(f"implvar: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
