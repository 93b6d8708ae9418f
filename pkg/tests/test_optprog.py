import math

import pytest

from ivinvex import interval as iv
from ivinvex.audit import AuditConfig, Box, SetSpec
from ivinvex.ivf import IVFn, VectorMap
from ivinvex.optprog import (
    InfeasibleCandidate,
    KKTPoint,
    NotLocallyMinimal,
    Problem,
    check_feasible_set_sei,
    check_xopt_sei,
    feasible,
    grid_candidates,
    kkt_residuals,
    kkt_sufficiency_audit,
    local_global_audit,
    non_dominated_audit,
)
from ivinvex.problem import load

LN2, LN3, LN4 = math.log(2), math.log(3), math.log(4)


@pytest.fixture(scope="module")
def p1():
    pf = load("log_program")
    return pf.problem(), pf.config(workers=1)


@pytest.fixture(scope="module")
def p1_interval_form():
    pf = load("log_program_interval")
    return pf.problem(), pf.config(workers=1)


def test_feasibility(p1):
    p, _ = p1
    assert feasible(p, (LN2,)).feasible
    r = feasible(p, (math.log(5),))
    assert not r.feasible and r.slacks["g1"] == pytest.approx(1.0)


def test_unconstrained_problem_is_feasible_everywhere():
    f = IVFn.parse("z1", "z1 + 1", 1)
    p = Problem(f, VectorMap.identity(1), VectorMap.parse(["a1 - b1"], ["a1", "b1"]), SetSpec(Box((-1.0,), (1.0,))))
    assert feasible(p, (0.3,)).feasible


def test_kkt_residuals(p1):
    p, _ = p1
    rep = kkt_residuals(p, KKTPoint((LN2,), (0.0, 0.0)))
    assert rep.max_residual <= 1e-9
    rep = kkt_residuals(p, KKTPoint((LN3,), (0.0, 0.0)))
    assert rep.stationarity_L[0] == pytest.approx(4.0)
    with pytest.raises(ValueError):
        kkt_residuals(p, KKTPoint((LN2,), (0.0,)))


def test_kkt_sufficiency_stages(p1):
    p, cfg = p1
    ok = kkt_sufficiency_audit(p, KKTPoint((LN2,), (0.0, 0.0)), cfg)
    assert ok.passed and [s.name for s in ok.stages] == ["feasibility", "multipliers", "residuals", "hypotheses", "dominance"]
    assert kkt_sufficiency_audit(p, KKTPoint((LN3,), (0.0, 0.0)), cfg).failed_stage == "residuals"
    assert kkt_sufficiency_audit(p, KKTPoint((LN2,), (-1.0, 0.0)), cfg).failed_stage == "multipliers"


def test_dominance(p1):
    p, cfg = p1
    rep = non_dominated_audit(p, (LN2,), cfg)
    assert not rep.dominated and rep.samples_checked >= 10_000
    rep = non_dominated_audit(p, (LN4,), cfg)
    assert rep.dominated and rep.margin > cfg.tol
    # the dominator replays
    assert iv.lu_lt(p.value(rep.dominating_point), p.value((LN4,)))
    with pytest.raises(InfeasibleCandidate):
        non_dominated_audit(p, (2.0,), cfg)


def test_constant_objective_has_no_dominator():
    f = IVFn.parse("1", "2", 1)
    p = Problem(f, VectorMap.identity(1), VectorMap.parse(["a1 - b1"], ["a1", "b1"]), SetSpec(Box((0.0,), (1.0,))))
    assert not non_dominated_audit(p, (0.5,), AuditConfig(samples=2000, workers=1)).dominated


def test_local_global(p1_interval_form):
    p, cfg = p1_interval_form
    assert local_global_audit(p, (LN2,), cfg).passed
    rep = local_global_audit(p, (LN3,), cfg)
    assert rep.status == "not-locally-minimal"
    with pytest.raises(NotLocallyMinimal):
        local_global_audit(p, (LN3,), cfg, raise_on_local=True)


def test_optimal_set_construction(p1_interval_form):
    p, cfg = p1_interval_form
    assert check_xopt_sei(p, [(LN2,)], cfg).holds


def test_grid_candidates(p1):
    p, cfg = p1
    best = grid_candidates(p, cfg)[0]
    assert abs(best.point[0] - LN2) <= 1e-4


def test_grid_candidates_linear_objective_picks_vertex():
    f = IVFn.parse("z1 + z2", "z1 + z2 + 1", 2)
    p = Problem(f, VectorMap.identity(2), VectorMap.parse(["a1 - b1", "a2 - b2"], ["a1", "a2", "b1", "b2"]), SetSpec(Box((0.0, 1.0), (2.0, 3.0))))
    best = grid_candidates(p, AuditConfig(workers=1))[0]
    assert best.point == pytest.approx((0.0, 1.0), abs=1e-9)


def test_feasible_set_closure_reports_image_escape(p1):
    # E = exp maps [ln 2, ln 4] onto [2, 4], outside the set, so the sampled
    # closure check necessarily finds escaping constructed points.
    p, cfg = p1
    v = check_feasible_set_sei(p, cfg)
    assert v.stats["image_in_set"]["escaping"] == v.stats["image_in_set"]["checked"]
    assert v.fails


def test_feasible_set_closure_trivial_case():
    f = IVFn.parse("z1", "z1 + 1", 1)
    p = Problem(f, VectorMap.identity(1), VectorMap.parse(["0"], ["a1", "b1"]), SetSpec(Box((0.0,), (1.0,))))
    assert check_feasible_set_sei(p, AuditConfig(samples=2000, workers=1, alpha_grid=(0.0,))).holds
