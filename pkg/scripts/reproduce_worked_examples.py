"""Run the audits attached to each bundled worked example and tabulate the verdicts."""
import argparse
import json
import math
import sys

from ivinvex.invexity import make_auditor
from ivinvex.optprog import KKTPoint, check_feasible_set_sei, grid_candidates, kkt_residuals, non_dominated_audit
from ivinvex.problem import load

# (fixture, class, gradient semantics, expected outcome)
PLAN = [
    ("abs_map", "sluep", None, "holds"),
    ("abs_map", "ssluep", None, "fails"),
    ("negation_map", "ssluep", None, "holds"),
    ("negation_map", "sluep", None, "fails"),
    ("floor_map", "sluep", None, "holds"),
    ("floor_map", "psluep", None, "holds"),
    ("log_exp", "weakly-sei", "composite", "holds"),
    ("log_exp", "sluei", "composite", "holds"),
    ("constant_map", "sluei", "composite", "holds"),
    ("constant_map", "weakly-sei", "direct", "fails"),
    ("affine_identity", "epi-gsei", None, "holds"),
]


def audits(samples, seed, workers):
    rows = []
    for fixture, cls, grad, expected in PLAN:
        pf = load(fixture)
        cfg = pf.config(samples=samples, seed=seed, workers=workers, gradient_semantics=grad)
        v = make_auditor(cls, pf.S, cfg, f=pf.f, E=pf.E, Psi=pf.Psi, E0=pf.E0, phi=pf.Phi).run()
        rows.append({
            "fixture": fixture,
            "class": cls,
            "grad": cfg.gradient_semantics,
            "outcome": v.outcome,
            "expected": expected,
            "samples": v.samples,
            "margin": None if v.witness is None else v.witness.margin,
        })
    return rows


def program(samples, seed, workers):
    pf = load("log_program")
    p = pf.problem()
    cfg = pf.config(samples=samples, seed=seed, workers=workers)
    z = (math.log(2),)
    return {
        "kkt_max_residual": kkt_residuals(p, KKTPoint(z, (0.0, 0.0))).max_residual,
        "dominated": non_dominated_audit(p, z, cfg).dominated,
        "feasible_set_sei": check_feasible_set_sei(p, cfg).outcome,
        "best_candidate": grid_candidates(p, cfg)[0].point[0],
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--samples", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--json", action="store_true", help="emit JSON instead of a table")
    args = ap.parse_args(argv)
    rows = audits(args.samples, args.seed, args.workers)
    prog = program(args.samples, args.seed, args.workers)
    if args.json:
        json.dump({"audits": rows, "program": prog}, sys.stdout, indent=2, ensure_ascii=False)
        print()
    else:
        print(f"{'fixture':<20}{'class':<12}{'grad':<11}{'outcome':<9}{'expected':<10}{'samples':>8}  margin")
        for r in rows:
            m = "" if r["margin"] is None else f"{r['margin']:.4g}"
            flag = "" if r["outcome"] == r["expected"] else "  <-- mismatch"
            print(f"{r['fixture']:<20}{r['class']:<12}{r['grad']:<11}{r['outcome']:<9}{r['expected']:<10}{r['samples']:>8}  {m}{flag}")
        print()
        for k, v in prog.items():
            print(f"{k:<20}{v}")
    return 0 if all(r["outcome"] == r["expected"] for r in rows) else 1


if __name__ == "__main__":
    sys.exit(main())
