import math
import random

import numpy as np
import pytest

from ivinvex import interval as iv
from ivinvex.audit import AuditConfig, Box
from ivinvex.interval import Interval
from ivinvex.ivf import (
    EmptyFamily,
    EndpointOrderViolation,
    GradientPair,
    IntervalMap,
    IVFn,
    NegativeCoefficient,
    VectorMap,
    compose_inner,
    compose_outer,
    gh_derivative_check,
    gh_gradient_product,
    gradient_field,
    gradient_pair,
    is_lu_nondecreasing,
    is_positively_homogeneous,
    nonneg_combination,
    sup_family,
)
from ivinvex.problem import load


def random_oriented_gradient(rng: random.Random):
    """Random (v, g) whose coordinates all share one endpoint orientation."""
    n = rng.randint(1, 6)
    v = [rng.uniform(-10, 10) for _ in range(n)]
    gL = [rng.uniform(-10, 10) for _ in range(n)]
    width = [rng.uniform(0, 5) for _ in range(n)]
    sign = rng.choice((1, -1))
    gU = [a + sign * w for a, w in zip(gL, width)]
    return v, GradientPair(tuple(gL), tuple(gU), (True,) * n)


def test_gradient_product_closed_form_matches_definition():
    rng = random.Random(2024)
    for _ in range(10_000):
        v, g = random_oriented_gradient(rng)
        assert gh_gradient_product(v, g) == iv.gh_product(v, g.as_intervals())


def test_gradient_product_worked_values():
    assert gh_gradient_product((3,), GradientPair((1,), (-1,), (True,))) == Interval(-3, 3)
    assert gh_gradient_product((2, -1), GradientPair((1, 0), (2, 3), (True, True))) == Interval(1, 2)
    with pytest.raises(iv.LengthMismatch):
        gh_gradient_product((1, 2), GradientPair((1,), (1,), (True,)))


@pytest.mark.parametrize(
    "fixture, semantics, points",
    [
        ("log_exp", "composite", [0.8, 1.5, 3.0, 7.0]),
        ("log_program", "composite", [0.8, 1.2, 2.0]),
        ("log_program_interval", "direct", [0.8, 1.5, 4.0]),
        ("negation_map", "composite", [0.5, 2.0, 4.5]),
    ],
)
def test_symbolic_gradients_match_finite_differences(fixture, semantics, points):
    pf = load(fixture)
    field = gradient_field(pf.f, semantics, pf.E)
    for x in points:
        s, d = field.symbolic((x,)), field.finite_difference((x,))
        for a, b in zip(s.gL + s.gU, d.gL + d.gU):
            assert abs(a - b) <= 1e-5 * max(1.0, abs(a))


def test_gradient_semantics_differ_through_E():
    pf = load("log_program")
    z = (math.log(3),)
    composite = gradient_pair(pf.f, z, "composite", pf.E)
    direct = gradient_pair(pf.f, pf.E(z), "direct")
    # chain rule: d/dz h(exp z) = h'(exp z) * exp z
    assert composite.gL[0] == pytest.approx(direct.gL[0] * 3.0)
    assert composite.gU[0] == pytest.approx(direct.gU[0] * 3.0)


def test_gradient_near_kink_uses_finite_differences():
    f = IVFn.parse("-abs(z1)", "abs(z1)", 1)
    g = gradient_pair(f, (0.0,), "direct")
    assert g.path == "finite-difference"
    assert g.gL == (0.0,) and g.gU == (0.0,)
    assert gradient_pair(f, (1.0,), "direct").path == "symbolic"


def test_evaluation_and_order_check():
    f = IVFn.parse("z1", "z1 + 1", 1)
    assert f((2.0,)) == Interval(2, 3)
    bad = IVFn.parse("z1", "2 * z1", 1)
    with pytest.raises(EndpointOrderViolation):
        bad((-1.0,))
    with pytest.raises(EndpointOrderViolation):
        bad.validate(Box((-1.0,), (1.0,)), samples=100)
    lo, hi, skipped, disordered = bad.batch(np.array([[-1.0], [1.0]]))
    assert disordered.tolist() == [True, False]


def test_compose_inner():
    f = IVFn.parse("z1", "z1 + 1", 1)
    g = compose_inner(f, VectorMap.parse(["-z1"], ["z1"]))
    assert g((2.0,)) == Interval(-2, -1)


def test_nonnegative_combination():
    f = IVFn.parse("z1", "z1 + 1", 1)
    g = IVFn.parse("-1", "z1 ^ 2", 1)
    h = nonneg_combination([f, g], [2.0, 0.5])
    assert h((2.0,)) == Interval(3.5, 8.0)
    with pytest.raises(NegativeCoefficient):
        nonneg_combination([f, g], [1.0, -1.0])


def test_supremum_family():
    f = IVFn.parse("z1", "z1 + 1", 1)
    g = IVFn.parse("-z1", "1 - z1", 1)
    s = sup_family([f, g])
    assert s((-2.0,)) == Interval(2, 3)
    assert s((2.0,)) == Interval(2, 3)
    with pytest.raises(EmptyFamily):
        sup_family([])


def test_outer_composition_and_map_predicates():
    f = IVFn.parse("z1", "z1 + 1", 1)
    double = IntervalMap.parse("2*lo", "2*hi")
    assert compose_outer(double, f)((1.0,)) == Interval(2, 4)
    cfg = AuditConfig(samples=4000, workers=1)
    assert is_lu_nondecreasing(double, cfg).holds
    assert is_positively_homogeneous(double, cfg).holds
    flip = IntervalMap.parse("-hi", "-lo")
    v = is_lu_nondecreasing(flip, cfg)
    assert v.fails and v.witness.margin > 0
    shift = IntervalMap.parse("lo + 1", "hi + 1")
    assert is_lu_nondecreasing(shift, cfg).holds
    assert is_positively_homogeneous(shift, cfg).fails
    with pytest.raises(EndpointOrderViolation):
        IntervalMap.parse("hi", "lo").validate(200)


def test_derivative_check_smooth():
    f = IVFn.parse("z1 ^ 2", "z1 ^ 2 + z1 + 3", 1)
    chk = gh_derivative_check(f, 1.0)
    assert chk.status == "converged"
    assert chk.limit.lo == pytest.approx(2.0, abs=1e-4)
    assert chk.limit.hi == pytest.approx(3.0, abs=1e-4)


def test_derivative_check_at_a_kink():
    chk = gh_derivative_check(IVFn.parse("-abs(z1)", "abs(z1)", 1), 0.0)
    assert chk.status == "converged-without-reference"
    assert chk.limit == Interval(-1.0, 1.0)
    chk = gh_derivative_check(IVFn.parse("abs(z1)", "abs(z1) + 1", 1), 0.0)
    assert chk.status == "non-convergent"
