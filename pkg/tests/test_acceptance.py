"""Acceptance criteria 1-10; a summary line per criterion is printed after the module runs."""
import json
import math
import random
import time
from contextlib import contextmanager

import numpy as np
import pytest

from ivinvex import expr as ex
from ivinvex import interval as iv
from ivinvex.audit import block_tuples, tuple_layout
from ivinvex.cli import main
from ivinvex.interval import Interval
from ivinvex.invexity import (
    JensenAuditor,
    check_lambda_zero,
    check_psluep,
    check_sluep,
    make_auditor,
    replay,
)
from ivinvex.ivf import GradientPair, IVFn, gh_gradient_product, gradient_field, nonneg_combination, sup_family
from ivinvex.optprog import KKTPoint, check_feasible_set_sei, grid_candidates, kkt_residuals, non_dominated_audit
from ivinvex.problem import load

LN2, LN4 = math.log(2), math.log(4)
RESULTS: dict = {}


@pytest.fixture(scope="module", autouse=True)
def summary(request):
    yield
    capman = request.config.pluginmanager.getplugin("capturemanager")
    lines = [f"criterion {n}: {'PASS' if ok else 'FAIL'}" for n, ok in sorted(RESULTS.items())]
    with capman.global_and_fixture_disabled():
        print()
        for line in lines:
            print(line)


@contextmanager
def criterion(n):
    RESULTS.setdefault(n, True)
    try:
        yield
    except BaseException:
        RESULTS[n] = False
        raise


def cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, out


def cli_report(capsys, *argv):
    code, out = cli(capsys, *argv)
    return code, json.loads(out)


def verdict_of(doc):
    return doc["result"]["verdict"]


# ---------------------------------------------------------------- 1


def test_criterion_1_interval_algebra():
    with criterion(1):
        start = time.perf_counter()
        rng = np.random.default_rng(1)
        ends = rng.uniform(-50, 50, size=(100_000, 4))
        ends[::101, 2:] = ends[::101, :2]
        zero = Interval(0.0, 0.0)
        for r in ends:
            a = Interval(min(r[0], r[1]), max(r[0], r[1]))
            b = Interval(min(r[2], r[3]), max(r[2], r[3]))
            d = iv.gh_diff(a, b)
            assert isinstance(d, Interval) and d.lo <= d.hi
            assert iv.lu_leq(d, zero) == iv.lu_leq(a, b)
            assert iv.gh_diff(a, a) == zero
        with pytest.raises(iv.HukuharaUndefined):
            iv.h_diff(Interval(0, 4), Interval(0, 8))
        assert time.perf_counter() - start < 2.0


# ---------------------------------------------------------------- 2


def test_criterion_2_gradient_product_oracle():
    with criterion(2):
        rng = random.Random(99)
        for _ in range(10_000):
            n = rng.randint(1, 6)
            v = [rng.uniform(-10, 10) for _ in range(n)]
            gL = [rng.uniform(-10, 10) for _ in range(n)]
            sign = rng.choice((1, -1))
            gU = [a + sign * rng.uniform(0, 5) for a in gL]
            g = GradientPair(tuple(gL), tuple(gU), (True,) * n)
            assert gh_gradient_product(v, g) == iv.gh_product(v, g.as_intervals())


@pytest.mark.parametrize(
    "fixture, semantics",
    [("log_exp", "composite"), ("log_program", "composite"), ("log_program_interval", "direct"), ("negation_map", "composite"), ("affine_identity", "direct")],
)
def test_criterion_2_symbolic_vs_finite_difference(fixture, semantics):
    with criterion(2):
        pf = load(fixture)
        field = gradient_field(pf.f, semantics, pf.E)
        lo, hi = pf.S.box.lo[0], pf.S.box.hi[0]
        for x in np.linspace(lo, hi, 25)[1:-1]:
            s, d = field.symbolic((x,)), field.finite_difference((x,))
            for a, b in zip(s.gL + s.gU, d.gL + d.gU):
                assert abs(a - b) <= 1e-5 * max(1.0, abs(a))


# ---------------------------------------------------------------- 3


def test_criterion_3_first_worked_example(capsys):
    with criterion(3):
        pf = load("abs_map")
        assert pf.S.box.lo == (-5.0,) and pf.S.box.hi == (5.0,)
        code, doc = cli_report(capsys, "audit", "abs_map", "--class", "sluep")
        assert code == 0 and verdict_of(doc)["outcome"] == "holds" and verdict_of(doc)["samples"] >= 10_000
        code, doc = cli_report(capsys, "audit", "abs_map", "--class", "ssluep")
        assert code == 1 and verdict_of(doc)["outcome"] == "fails"
        auditor = make_auditor("ssluep", pf.S, pf.config(), f=pf.f, E=pf.E, Psi=pf.Psi)
        w, violated = replay(auditor, (0.0,), (-1.0,), 0.5, 0.0)
        assert violated
        assert max(abs(w.lhs[0] - 0), abs(w.lhs[1] - 1)) <= 1e-12
        assert max(abs(w.rhs[0] + 1), abs(w.rhs[1] - 0)) <= 1e-12


# ---------------------------------------------------------------- 4


def test_criterion_4_second_worked_example(capsys):
    with criterion(4):
        code, doc = cli_report(capsys, "audit", "negation_map", "--class", "ssluep")
        assert code == 0 and verdict_of(doc)["samples"] >= 10_000
        code, doc = cli_report(capsys, "audit", "negation_map", "--class", "sluep")
        assert code == 1
        pf = load("negation_map")
        auditor = make_auditor("sluep", pf.S, pf.config(), f=pf.f, E=pf.E, Psi=pf.Psi)
        w, violated = replay(auditor, (0.0,), (1.0,), 0.5, 0.5)
        assert violated
        assert w.lhs == (-0.25, 0.75)
        assert w.rhs == (-0.5, 0.5)


# ---------------------------------------------------------------- 5


def test_criterion_5_floor_example(capsys):
    with criterion(5):
        pf = load("floor_map")
        assert pf.S.box.lo == (-10.0,) and pf.S.box.hi == (0.0,)
        for cls in ("sluep", "psluep"):
            code, doc = cli_report(capsys, "audit", "floor_map", "--class", cls)
            assert code == 0 and verdict_of(doc)["samples"] >= 10_000, cls


# ---------------------------------------------------------------- 6

SLUEP_FIXTURES = ("abs_map", "floor_map", "affine_identity")


def _partners(pf):
    texts = [("-1", "2")] if pf.name == "abs_map" else [("3*z1", "2*z1 + 1"), ("z1 - 1", "z1")]
    return [IVFn.parse(lo, hi, 1, pf.f.domain) for lo, hi in texts]


@pytest.mark.parametrize("fixture", ["abs_map", "negation_map", "floor_map", "log_exp", "constant_map"])
def test_criterion_6_endpoint_characterisation(fixture):
    with criterion(6):
        pf = load(fixture)
        cfg = pf.config(tol=1e-300)
        auditor = JensenAuditor(pf.f, pf.E, pf.Psi, pf.S, cfg)
        _, n_blocks = tuple_layout(cfg)
        compared = 0
        for b in range(n_blocks):
            batch = block_tuples(pf.S, cfg, b)
            flags = auditor.block(batch).violated
            for i in range(len(batch)):
                lam = float(batch.lam[i])
                try:
                    lhs, rhs, c = auditor.sides(tuple(batch.zeta[i]), tuple(batch.delta[i]), float(batch.alpha[i]), lam)
                except (ex.DomainError, iv.IntervalError):
                    continue
                if not pf.S.contains(c["P"]):
                    continue
                at = lambda pt: dict(zip(pf.f.names, pt))
                ok_lo = ex.evaluate(pf.f.hL, at(c["P"])) <= lam * ex.evaluate(pf.f.hL, at(c["Ez"])) + (1 - lam) * ex.evaluate(pf.f.hL, at(c["Ed"]))
                ok_hi = ex.evaluate(pf.f.hU, at(c["P"])) <= lam * ex.evaluate(pf.f.hU, at(c["Ez"])) + (1 - lam) * ex.evaluate(pf.f.hU, at(c["Ed"]))
                assert iv.lu_leq(lhs, rhs) == (ok_lo and ok_hi)
                assert bool(flags[i]) != (ok_lo and ok_hi)
                compared += 1
        assert compared >= 9_000


@pytest.mark.parametrize("fixture", SLUEP_FIXTURES)
def test_criterion_6_closure_properties(fixture):
    with criterion(6):
        pf = load(fixture)
        cfg = pf.config()
        base = check_sluep(pf.f, pf.E, pf.Psi, pf.S, cfg)
        assert base.holds
        runs = {
            "lambda_zero": check_lambda_zero(pf.f, pf.E, pf.Psi, pf.S, cfg),
            "psluep_derived": check_psluep(pf.f, pf.E, pf.Psi, pf.S, cfg),
        }
        parts = [pf.f] + _partners(pf)
        for g in parts[1:]:
            assert check_sluep(g, pf.E, pf.Psi, pf.S, cfg).holds
        runs["combination"] = check_sluep(nonneg_combination(parts, [2.0] + [0.5] * (len(parts) - 1)), pf.E, pf.Psi, pf.S, cfg)
        runs["supremum"] = check_sluep(sup_family(parts), pf.E, pf.Psi, pf.S, cfg)
        for name, v in runs.items():
            assert v.holds and v.stats["violations"] == 0 and v.samples >= 10_000, name


@pytest.mark.parametrize("fixture, semantics", [("abs_map", "composite"), ("log_exp", "composite"), ("constant_map", "composite")])
def test_criterion_6_weak_first_order_implies_gh_first_order(fixture, semantics):
    with criterion(6):
        pf = load(fixture)
        cfg = pf.config(gradient_semantics=semantics)
        weak = make_auditor("weakly-sei", pf.S, cfg, f=pf.f, E=pf.E, Psi=pf.Psi).run()
        assert weak.holds and weak.samples >= 10_000
        gh = make_auditor("sluei", pf.S, cfg, f=pf.f, E=pf.E, Psi=pf.Psi).run()
        assert gh.holds and gh.stats["violations"] == 0 and gh.samples >= 10_000


# ---------------------------------------------------------------- 7


def test_criterion_7_logarithmic_example(capsys):
    with criterion(7):
        pf = load("log_exp")
        assert pf.S.box.lo == (LN2,) and pf.S.box.hi == (10.0,)
        for cls in ("weakly-sei", "sluei"):
            code, doc = cli_report(capsys, "audit", "log_exp", "--class", cls, "--grad", "composite")
            assert code == 0 and verdict_of(doc)["samples"] >= 10_000, cls


# ---------------------------------------------------------------- 8


def test_criterion_8_constant_map_example(capsys):
    with criterion(8):
        code, doc = cli_report(capsys, "audit", "constant_map", "--class", "sluei", "--grad", "composite")
        assert code == 0 and verdict_of(doc)["samples"] >= 10_000
        code, doc = cli_report(capsys, "audit", "constant_map", "--class", "weakly-sei", "--grad", "direct")
        assert code == 1
        w = verdict_of(doc)["witness"]
        assert w["margin"] > 1e-3
        pf = load("constant_map")
        auditor = make_auditor("weakly-sei", pf.S, pf.config(gradient_semantics="direct"), f=pf.f, E=pf.E, Psi=pf.Psi)
        again, violated = replay(auditor, w["zeta"], w["delta"], w["alpha"], w["lambda"])
        assert violated and again.margin == w["margin"]


# ---------------------------------------------------------------- 9


def test_criterion_9_kkt_residuals(capsys):
    with criterion(9):
        pf = load("log_program")
        rep = kkt_residuals(pf.problem(), KKTPoint((LN2,), (0.0, 0.0)))
        assert rep.max_residual <= 1e-9
        code, _ = cli(capsys, "kkt", "log_program", "--point", "ln(2)", "--multipliers", "0,0")
        assert code == 0


def test_criterion_9_dominance():
    with criterion(9):
        pf = load("log_program")
        p = pf.problem()
        rep = non_dominated_audit(p, (LN2,), pf.config())
        assert not rep.dominated and rep.samples_checked >= 10_000
        X = p.feasible_set()
        assert X.contains((LN2,)) and X.contains((LN4,)) and not X.contains((LN4 + 1e-6,))


def test_criterion_9_feasible_set_sei():
    with criterion(9):
        pf = load("log_program")
        v = check_feasible_set_sei(pf.problem(), pf.config())
        assert v.holds, (
            f"feasible set not closed: {v.stats['image_in_set']['escaping']} of "
            f"{v.stats['image_in_set']['checked']} sampled points have E(z) outside the set; "
            f"witness {v.witness and v.witness.to_dict()}"
        )


def test_criterion_9_grid_candidates():
    with criterion(9):
        pf = load("log_program")
        best = grid_candidates(pf.problem(), pf.config())[0]
        assert abs(best.point[0] - LN2) <= 1e-4


# ---------------------------------------------------------------- 10


@pytest.mark.parametrize(
    "fixture, cls",
    [("abs_map", "ssluep"), ("negation_map", "epi-gsei"), ("floor_map", "psluep"), ("constant_map", "sluei"), ("affine_identity", "condition-a")],
)
def test_criterion_10_determinism_across_workers(capsys, tmp_path, fixture, cls):
    with criterion(10):
        sections = []
        for workers in ("1", "4"):
            path = tmp_path / f"{workers}.json"
            cli(capsys, "audit", fixture, "--class", cls, "--workers", workers, "--seed", "11", "--out", str(path))
            doc = json.loads(path.read_text())
            sections.append(json.dumps(doc["result"], sort_keys=True, indent=2).encode())
        assert sections[0] == sections[1]
