"""Command-line front end.

Exit codes: 0 holds/pass, 1 counterexample/fail, 2 input error, 3 not checkable.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from typing import Optional, Sequence

import numpy as np

from . import __version__
from . import expr as ex
from . import optprog as op
from .audit import Box, SetSpec, Verdict, variables
from .interval import Interval
from .invexity import InversionFailed, make_auditor, replay
from .ivf import EndpointOrderViolation, compose_inner, is_lu_nondecreasing, is_positively_homogeneous
from .problem import ProblemError, fixture_names, load

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_UNCHECKABLE = 0, 1, 2, 3

TUPLE_CLASSES = (
    "sei-set",
    "e-invex-set",
    "sluep",
    "sluep-strict",
    "ssluep",
    "psluep",
    "weakly-sei",
    "sluei",
    "condition-a",
    "epi-gsei",
)
MAP_CLASSES = ("lu-nondecreasing", "positively-homogeneous")
PROGRAM_CLASSES = ("feasible-set-sei",)
CLASSES = TUPLE_CLASSES + MAP_CLASSES + PROGRAM_CLASSES


class InputError(Exception):
    pass


def _split_top(text: str) -> list:
    """Split on commas that are not inside parentheses."""
    parts, depth, cur = [], 0, []
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == "," and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    parts.append("".join(cur))
    return [p.strip() for p in parts if p.strip()]


def parse_vector(text: str, what: str) -> tuple:
    try:
        return tuple(ex.const_value(p) for p in _split_top(text))
    except (ex.ExprError, ex.DomainError) as exc:
        raise InputError(f"bad {what} {text!r}: {exc}") from None


def parse_point(text: str, dim: int, what: str = "point") -> tuple:
    v = parse_vector(text, what)
    if len(v) != dim:
        raise InputError(f"{what} needs {dim} coordinate(s), got {len(v)}")
    return v


def _fmt(x: Interval) -> str:
    return f"[{x.lo!r}, {x.hi!r}]"


# --------------------------------------------------------------------------- reports


def write_report(args, pf, command: str, config: dict, result: dict, code: int, started: float):
    report = {
        "tool": "ivinvex",
        "version": __version__,
        "command": command,
        "input": {"path": str(args.problem), "sha256": pf.sha256},
        "config": config,
        "result": result,
        "exit_code": code,
        "timing": {"seconds": round(time.perf_counter() - started, 6)},
    }
    text = json.dumps(report, sort_keys=True, indent=2, ensure_ascii=False, allow_nan=False) + "\n"
    if getattr(args, "out", None):
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _config(pf, args, **extra):
    return pf.config(
        samples=getattr(args, "samples", None),
        seed=getattr(args, "seed", None),
        tol=getattr(args, "tol", None),
        gradient_semantics=getattr(args, "grad", None),
        workers=getattr(args, "workers", None) or os.cpu_count() or 1,
        **extra,
    )


# --------------------------------------------------------------------------- commands


def cmd_eval(args) -> int:
    pf = load(args.problem)
    z = parse_point(args.point, pf.dim)
    if not pf.S.contains(z):
        raise InputError(f"point {z} is outside the domain {pf.S.domain.to_list()}")
    print(f"h(z)    = {_fmt(pf.f(z))}")
    print(f"h(E(z)) = {_fmt(compose_inner(pf.f, pf.E)(z))}")
    return EXIT_OK


def _auditor_for(pf, kind, cfg):
    if kind == "psluep" or kind in TUPLE_CLASSES:
        if kind == "epi-gsei" and pf.E0 is None:
            raise InputError("this problem file declares no E0 map; epi-gsei needs one")
        return make_auditor(kind, pf.S, cfg, f=pf.f, E=pf.E, Psi=pf.Psi, E0=pf.E0, phi=pf.Phi)
    raise InputError(f"unknown class {kind!r}")


def run_audit(pf, kind: str, cfg) -> Verdict:
    if kind in MAP_CLASSES:
        if pf.phi is None:
            raise InputError(f"{kind} needs a 'phi' interval map in the problem file")
        fn = is_lu_nondecreasing if kind == "lu-nondecreasing" else is_positively_homogeneous
        return fn(pf.phi, cfg)
    if kind == "feasible-set-sei":
        return op.check_feasible_set_sei(pf.problem(cfg.gradient_semantics), cfg)
    return _auditor_for(pf, kind, cfg).run()


def cmd_audit(args) -> int:
    started = time.perf_counter()
    pf = load(args.problem)
    try:
        cfg = _config(pf, args)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    v = run_audit(pf, args.cls, cfg)
    code = v.exit_code
    result = {"class": args.cls, "verdict": v.to_dict()}
    write_report(args, pf, "audit", cfg.to_dict(), result, code, started)
    _summary(f"{args.cls}: {v.outcome} ({v.samples} samples checked)")
    return code


def _kkt_point(pf, args):
    z = parse_point(args.point, pf.dim)
    v = parse_vector(args.multipliers, "multipliers") if args.multipliers else ()
    n = len(pf.real_constraints)
    if len(v) != n:
        raise InputError(f"{n} constraint(s) but {len(v)} multiplier(s)")
    return op.KKTPoint(z, v)


def cmd_kkt(args) -> int:
    started = time.perf_counter()
    pf = load(args.problem)
    if pf.interval_constraints:
        raise InputError("kkt needs real constraints (the ivop form)")
    pt = _kkt_point(pf, args)
    cfg = _config(pf, args)
    p = pf.problem(cfg.gradient_semantics)
    rep = op.kkt_sufficiency_audit(p, pt, cfg)
    code = EXIT_OK if rep.passed else EXIT_FAIL
    result = {"point": list(pt.zeta), "multipliers": list(pt.v), "residuals": op.kkt_residuals(p, pt).to_dict(), "audit": rep.to_dict()}
    write_report(args, pf, "kkt", cfg.to_dict(), result, code, started)
    _summary("kkt: pass" if rep.passed else f"kkt: fail at stage {rep.failed_stage}")
    return code


def cmd_dominance(args) -> int:
    started = time.perf_counter()
    pf = load(args.problem)
    z = parse_point(args.point, pf.dim)
    cfg = _config(pf, args)
    p = pf.problem(cfg.gradient_semantics)
    try:
        rep = op.non_dominated_audit(p, z, cfg)
    except op.InfeasibleCandidate as exc:
        raise InputError(str(exc)) from None
    if rep.reason is not None:
        code = EXIT_UNCHECKABLE
    else:
        code = EXIT_FAIL if rep.dominated else EXIT_OK
    write_report(args, pf, "dominance", cfg.to_dict(), {"dominance": rep.to_dict()}, code, started)
    _summary("dominance: dominated" if rep.dominated else f"dominance: no dominator among {rep.samples_checked} samples")
    return code


def cmd_local_global(args) -> int:
    started = time.perf_counter()
    pf = load(args.problem)
    z = parse_point(args.point, pf.dim)
    cfg = _config(pf, args)
    p = pf.problem(cfg.gradient_semantics)
    try:
        rep = op.local_global_audit(p, z, cfg, args.eps)
    except op.InfeasibleCandidate as exc:
        raise InputError(str(exc)) from None
    code = EXIT_OK if rep.passed else EXIT_FAIL
    write_report(args, pf, "local-global", cfg.to_dict(), {"local_global": rep.to_dict()}, code, started)
    _summary(f"local-global: {rep.status}")
    return code


def cmd_candidates(args) -> int:
    started = time.perf_counter()
    pf = load(args.problem)
    cfg = _config(pf, args)
    cands = op.grid_candidates(pf.problem(cfg.gradient_semantics), cfg, points=args.points, keep=args.keep)
    write_report(args, pf, "candidates", cfg.to_dict(), {"candidates": [c.to_dict() for c in cands]}, EXIT_OK, started)
    return EXIT_OK


def cmd_sample_csv(args) -> int:
    pf = load(args.problem)
    box = pf.S.box
    if args.range:
        lo, hi = parse_point(args.range, 2, "range")
        box = Box((lo,) * pf.dim, (hi,) * pf.dim)
    axes = [np.linspace(a, b, args.grid) for a, b in zip(box.lo, box.hi)]
    pts = np.stack([m.ravel() for m in np.meshgrid(*axes, indexing="ij")], axis=1)
    lo, hi, bad, _ = pf.f.batch(pts)
    Ez, ebad = pf.E.batch(pts)
    elo, ehi, bad2, _ = pf.f.batch(Ez)
    elo[ebad | bad2] = np.nan
    ehi[ebad | bad2] = np.nan
    out = open(args.out, "w", newline="", encoding="utf-8") if args.out else sys.stdout
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(list(variables(pf.dim)) + ["hL", "hU", "hL_E", "hU_E"])
        for i in range(pts.shape[0]):
            row = list(pts[i]) + [lo[i], hi[i], elo[i], ehi[i]]
            w.writerow(["nan" if np.isnan(x) else repr(float(x)) for x in row])
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


def cmd_replay(args) -> int:
    pf = load(args.problem)
    if args.report:
        with open(args.report, encoding="utf-8") as fh:
            rep = json.load(fh)
        try:
            kind = rep["result"]["class"]
            wd = rep["result"]["verdict"]["witness"]
            cfg = pf.config(**{k: v for k, v in rep["config"].items() if k not in ("workers",)})
        except (KeyError, TypeError) as exc:
            raise InputError(f"report has no replayable witness ({exc})") from None
        if wd is None:
            raise InputError("report contains no witness")
        zeta, delta, alpha, lam = wd["zeta"], wd["delta"], wd["alpha"], wd["lambda"]
        cols = {k: wd["extra"][k] for k in ("t1", "t2") if k in wd["extra"]}
    else:
        kind = args.cls
        cfg = _config(pf, args)
        if None in (args.zeta, args.delta, args.alpha, args.lam):
            raise InputError("give --report, or all of --zeta --delta --alpha --lambda")
        zeta = parse_point(args.zeta, pf.dim, "zeta")
        delta = parse_point(args.delta, pf.dim, "delta")
        alpha = parse_vector(args.alpha, "alpha")[0]
        lam = parse_vector(args.lam, "lambda")[0]
        cols = {}
        if args.offsets:
            t = parse_vector(args.offsets, "offsets")
            cols = {"t1": t[0], "t2": t[1] if len(t) > 1 else t[0]}
    if kind not in TUPLE_CLASSES:
        raise InputError(f"replay supports the tuple classes {', '.join(TUPLE_CLASSES)}")
    auditor = _auditor_for(pf, kind, cfg)
    w, violated = replay(auditor, zeta, delta, alpha, lam, **cols)
    print(json.dumps({"class": kind, "violated": violated, "witness": w.to_dict()}, sort_keys=True, indent=2, ensure_ascii=False))
    return EXIT_FAIL if violated else EXIT_OK


def cmd_fixtures(args) -> int:
    for name in fixture_names():
        print(name)
    return EXIT_OK


def _summary(line: str):
    print(line, file=sys.stderr)


# --------------------------------------------------------------------------- parser


def _audit_flags(p: argparse.ArgumentParser):
    p.add_argument("--samples", type=int, help="number of sampled tuples (default 10000)")
    p.add_argument("--seed", type=int, help="sampling seed (default 42)")
    p.add_argument("--tol", type=float, help="violation margin (default 1e-9)")
    p.add_argument("--grad", choices=("direct", "composite"), help="gradient semantics (default composite)")
    p.add_argument("--workers", type=int, help="worker threads (default: all CPUs)")
    p.add_argument("--out", help="write the JSON report here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ivinvex", description="Audit interval-valued functions and programs.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eval", help="evaluate h and h o E at a point")
    p.add_argument("problem")
    p.add_argument("--point", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("audit", help="sample a class condition and report a witness if it fails")
    p.add_argument("problem")
    p.add_argument("--class", dest="cls", required=True, choices=CLASSES)
    _audit_flags(p)
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("kkt", help="KKT residuals and sufficiency audit at a point")
    p.add_argument("problem")
    p.add_argument("--point", required=True)
    p.add_argument("--multipliers", default="")
    _audit_flags(p)
    p.set_defaults(func=cmd_kkt)

    p = sub.add_parser("dominance", help="search feasible samples for a strict LU dominator")
    p.add_argument("problem")
    p.add_argument("--point", required=True)
    _audit_flags(p)
    p.set_defaults(func=cmd_dominance)

    p = sub.add_parser("local-global", help="local minimality then global dominance search")
    p.add_argument("problem")
    p.add_argument("--point", required=True)
    p.add_argument("--eps", type=float, help="local radius (default 1e-2 x box diagonal)")
    _audit_flags(p)
    p.set_defaults(func=cmd_local_global)

    p = sub.add_parser("candidates", help="grid search for nondominated candidate points")
    p.add_argument("problem")
    p.add_argument("--points", type=int, default=4096)
    p.add_argument("--keep", type=int, default=10)
    _audit_flags(p)
    p.set_defaults(func=cmd_candidates)

    p = sub.add_parser("sample-csv", help="export endpoint curves on a grid")
    p.add_argument("problem")
    p.add_argument("--grid", type=int, default=201)
    p.add_argument("--range", help="'lo,hi' applied to every coordinate (default: the sample box)")
    p.add_argument("--out")
    p.set_defaults(func=cmd_sample_csv)

    p = sub.add_parser("replay", help="recompute both sides at one tuple or a report's witness")
    p.add_argument("problem")
    p.add_argument("--report")
    p.add_argument("--class", dest="cls", choices=TUPLE_CLASSES)
    p.add_argument("--zeta")
    p.add_argument("--delta")
    p.add_argument("--alpha")
    p.add_argument("--lambda", dest="lam")
    p.add_argument("--offsets", help="epigraph offsets 't1,t2'")
    _audit_flags(p)
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("fixtures", help="list the bundled problem files")
    p.set_defaults(func=cmd_fixtures)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (InputError, ProblemError, ex.ExprError, EndpointOrderViolation, InversionFailed) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ex.DomainError as exc:
        print(f"error: evaluation left the domain: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
