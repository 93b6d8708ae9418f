import json
import math

import numpy as np
import pytest

from ivinvex import expr as ex
from ivinvex import interval as iv
from ivinvex.audit import AuditConfig, Box, SetSpec, block_tuples, draw_tuples, tuple_layout
from ivinvex.invexity import (
    JensenAuditor,
    check_condition_a,
    check_epigraph_gsei,
    check_lambda_zero,
    check_psluep,
    check_sei_set,
    check_sluei,
    check_sluep,
    check_weakly_sei,
    construct_point,
    make_auditor,
    replay,
)
from ivinvex.ivf import IntervalMap, IVFn, VectorMap, nonneg_combination, sup_family
from ivinvex.problem import load

SLUEP_FIXTURES = ["abs_map", "floor_map", "affine_identity"]


def cfg_for(pf, **kw):
    kw.setdefault("workers", 1)
    return pf.config(**kw)


def test_constructed_point():
    E = VectorMap.parse(["-z1"], ["z1"])
    Psi = VectorMap.parse(["a1 - b1"], ["a1", "b1"])
    c = construct_point(E, Psi, (1.0,), (2.0,), 0.5, 0.25)
    assert c["A"] == (-0.5,) and c["B"] == (-1.0,)
    assert c["P"] == (-1.0 + 0.25 * 0.5,)


def test_sei_set_examples():
    S = SetSpec(Box((-5.0,), (5.0,)))
    ident = VectorMap.identity(1)
    diff = VectorMap.parse(["a1 - b1"], ["a1", "b1"])
    assert check_sei_set(S, ident, diff, AuditConfig(samples=2000, workers=1), alpha_zero=True).holds
    one = VectorMap.parse(["1"], ["a1", "b1"])
    v = check_sei_set(SetSpec(Box((0.0,), (1.0,))), ident, one, AuditConfig(samples=2000, workers=1))
    assert v.fails
    assert v.witness.extra["constructed_point"][0] > 1.0


@pytest.mark.parametrize(
    "fixture, kind",
    [
        ("abs_map", "ssluep"),
        ("negation_map", "sluep"),
        ("negation_map", "psluep"),
        ("affine_identity", "weakly-sei"),
        ("affine_identity", "condition-a"),
        ("log_exp", "sluep"),
        ("abs_map", "sluep-strict"),
        ("scaling_map", "sluei"),
    ],
)
def test_every_failure_witness_replays(fixture, kind):
    pf = load(fixture)
    cfg = cfg_for(pf)
    auditor = make_auditor(kind, pf.S, cfg, f=pf.f, E=pf.E, Psi=pf.Psi, E0=pf.E0, phi=pf.Phi)
    v = auditor.run()
    assert v.fails, v.reason
    w = v.witness
    again, violated = replay(auditor, w.zeta, w.delta, w.alpha, w.lam)
    assert violated
    assert again.margin == w.margin
    assert again.lhs == w.lhs and again.rhs == w.rhs


def test_epigraph_failure_witness_replays_with_offsets():
    pf = load("negation_map")
    cfg = cfg_for(pf, epigraph_offsets=(0.0,))
    E0 = IntervalMap.parse("-lo", "-lo + 1")
    auditor = make_auditor("epi-gsei", pf.S, cfg, f=pf.f, E=pf.E, Psi=pf.Psi, E0=E0)
    v = auditor.run()
    assert v.fails
    w = v.witness
    again, violated = replay(auditor, w.zeta, w.delta, w.alpha, w.lam, t1=w.extra["t1"], t2=w.extra["t2"])
    assert violated and again.margin == w.margin


def test_epigraph_holds_for_identity_maps():
    pf = load("affine_identity")
    v = check_epigraph_gsei(pf.f, pf.E, pf.Psi, pf.E0, pf.S, cfg_for(pf))
    assert v.holds
    side = v.stats["side_condition"]
    assert side["holds"] and side["violations"] == 0 and side["checks"] > 0
    assert side["e0_onto"].startswith("assumed")


def test_strict_variant_rejects_equality_cases():
    pf = load("affine_identity")
    v = check_sluep(pf.f, pf.E, pf.Psi, pf.S, cfg_for(pf), strict=True)
    assert v.fails
    assert v.witness.extra.get("equal_within_tol")


def test_condition_a():
    S = SetSpec(Box((-5.0,), (5.0,)))
    ident = VectorMap.identity(1)
    diff = VectorMap.parse(["a1 - b1"], ["a1", "b1"])
    cfg = AuditConfig(samples=2000, workers=1, alpha_grid=(0.0,))
    assert check_condition_a(ident, diff, S, cfg).holds
    one = VectorMap.parse(["1"], ["a1", "b1"])
    assert check_condition_a(ident, one, S, cfg).fails
    const = VectorMap.parse(["2"], ["z1"])
    v = check_condition_a(const, diff, S, cfg)
    assert v.outcome == "not-checkable" and v.exit_code == 3


def test_first_order_constant_function_holds():
    f = IVFn.parse("3", "4", 1)
    S = SetSpec(Box((-2.0,), (2.0,)))
    E = VectorMap.parse(["z1 ^ 3"], ["z1"])
    Psi = VectorMap.parse(["a1 * b1"], ["a1", "b1"])
    cfg = AuditConfig(samples=2000, workers=1)
    assert check_sluei(f, E, Psi, S, cfg).holds
    assert check_weakly_sei(f, E, Psi, S, cfg).holds


# ------------------------------------------------------------------ endpoint characterisation


@pytest.mark.parametrize("fixture", ["abs_map", "negation_map", "floor_map", "log_exp"])
def test_interval_and_endpoint_verdicts_agree_on_every_tuple(fixture):
    pf = load(fixture)
    cfg = cfg_for(pf, tol=1e-300)
    auditor = JensenAuditor(pf.f, pf.E, pf.Psi, pf.S, cfg)
    tuples = draw_tuples(pf.S, cfg)
    size, n_blocks = tuple_layout(cfg)
    flags = np.concatenate([auditor.block(block_tuples(pf.S, cfg, b)).violated for b in range(n_blocks)])
    assert len(tuples) >= 10_000
    checked = 0
    for i in range(len(tuples)):
        zeta, delta = tuple(tuples.zeta[i]), tuple(tuples.delta[i])
        alpha, lam = float(tuples.alpha[i]), float(tuples.lam[i])
        try:
            lhs, rhs, c = auditor.sides(zeta, delta, alpha, lam)
        except (ex.DomainError, iv.IntervalError):
            continue
        if not pf.S.contains(c["P"]):
            continue
        bl = dict(zip(pf.f.names, c["P"]))
        bz = dict(zip(pf.f.names, c["Ez"]))
        bd = dict(zip(pf.f.names, c["Ed"]))
        lower_ok = ex.evaluate(pf.f.hL, bl) <= lam * ex.evaluate(pf.f.hL, bz) + (1 - lam) * ex.evaluate(pf.f.hL, bd)
        upper_ok = ex.evaluate(pf.f.hU, bl) <= lam * ex.evaluate(pf.f.hU, bz) + (1 - lam) * ex.evaluate(pf.f.hU, bd)
        assert iv.lu_leq(lhs, rhs) == (lower_ok and upper_ok)
        assert bool(flags[i]) == (not (lower_ok and upper_ok))
        checked += 1
    assert checked >= 9_000


# ------------------------------------------------------------------ closure properties


@pytest.mark.parametrize("fixture", SLUEP_FIXTURES)
def test_lambda_zero_specialisation(fixture):
    pf = load(fixture)
    cfg = cfg_for(pf)
    assert check_sluep(pf.f, pf.E, pf.Psi, pf.S, cfg).holds
    v = check_lambda_zero(pf.f, pf.E, pf.Psi, pf.S, cfg)
    assert v.holds and v.samples >= 10_000


def _partners(pf):
    """Extra SLUEP functions sharing the fixture's maps."""
    if pf.name == "abs_map":
        # constants are SLUEP for any maps
        texts = [("-1", "2")]
    else:
        # increasing affine functions, with E moving points down on these boxes
        texts = [("3*z1", "2*z1 + 1"), ("z1 - 1", "z1")]
    return [IVFn.parse(lo, hi, 1, pf.f.domain) for lo, hi in texts]


@pytest.mark.parametrize("fixture", SLUEP_FIXTURES)
def test_nonnegative_combinations_stay_sluep(fixture):
    pf = load(fixture)
    cfg = cfg_for(pf)
    parts = [pf.f] + _partners(pf)
    for g in parts:
        assert check_sluep(g, pf.E, pf.Psi, pf.S, cfg).holds
    combo = nonneg_combination(parts, [2.0] + [0.5] * (len(parts) - 1))
    v = check_sluep(combo, pf.E, pf.Psi, pf.S, cfg)
    assert v.holds and v.stats["violations"] == 0 and v.samples >= 10_000


@pytest.mark.parametrize("fixture", SLUEP_FIXTURES)
def test_suprema_stay_sluep(fixture):
    pf = load(fixture)
    cfg = cfg_for(pf)
    parts = [pf.f] + _partners(pf)
    v = check_sluep(sup_family(parts), pf.E, pf.Psi, pf.S, cfg)
    assert v.holds and v.samples >= 10_000


@pytest.mark.parametrize("fixture", SLUEP_FIXTURES + ["constant_map"])
def test_derived_certificate_pseudo_variant(fixture):
    pf = load(fixture)
    cfg = cfg_for(pf)
    if check_sluep(pf.f, pf.E, pf.Psi, pf.S, cfg).holds:
        v = check_psluep(pf.f, pf.E, pf.Psi, pf.S, cfg)
        assert v.holds and v.samples >= 10_000


@pytest.mark.parametrize(
    "fixture, semantics",
    [("abs_map", "composite"), ("log_exp", "composite"), ("constant_map", "composite"), ("constant_map", "direct"), ("affine_identity", "composite"), ("negation_map", "direct")],
)
def test_weak_first_order_implies_gh_first_order_per_tuple(fixture, semantics):
    pf = load(fixture)
    cfg = cfg_for(pf, gradient_semantics=semantics)
    weak = make_auditor("weakly-sei", pf.S, cfg, f=pf.f, E=pf.E, Psi=pf.Psi)
    gh = make_auditor("sluei", pf.S, cfg, f=pf.f, E=pf.E, Psi=pf.Psi)
    _, n_blocks = tuple_layout(cfg)
    for b in range(n_blocks):
        bw = weak.block(block_tuples(pf.S, cfg, b))
        bg = gh.block(block_tuples(pf.S, cfg, b))
        assert not np.any(bg.violated & ~bw.violated)
    if weak.run().holds:
        assert gh.run().holds


# ------------------------------------------------------------------ determinism


@pytest.mark.parametrize("kind", ["sluep", "ssluep", "psluep", "sluei", "epi-gsei"])
def test_verdicts_independent_of_worker_count(kind):
    pf = load("negation_map")
    out = []
    for workers in (1, 4):
        cfg = pf.config(workers=workers, samples=6000)
        v = make_auditor(kind, pf.S, cfg, f=pf.f, E=pf.E, Psi=pf.Psi, E0=pf.E0).run()
        out.append(json.dumps(v.to_dict(), sort_keys=True))
    assert out[0] == out[1]


def test_tuple_stream_independent_of_worker_count():
    pf = load("abs_map")
    a = draw_tuples(pf.S, pf.config(workers=1))
    b = draw_tuples(pf.S, pf.config(workers=4))
    assert np.array_equal(a.zeta, b.zeta) and np.array_equal(a.lam, b.lam)
    c = draw_tuples(pf.S, pf.config(workers=1, seed=7))
    assert not np.array_equal(a.zeta, c.zeta)
