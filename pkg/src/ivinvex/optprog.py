"""Interval-valued programs: feasibility, KKT residuals and dominance audits.

Two problem forms are supported. ``ivop`` minimises h(E(zeta)) subject to
real constraints g_i(E(zeta)) <= 0; ``P`` minimises h(zeta) subject to
interval constraints h_j(zeta) <= [0, 0] in the LU order.
"""
from __future__ import annotations

import dataclasses
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import expr as ex
from . import interval as iv
from .audit import (
    FAILS,
    HOLDS,
    NOT_CHECKABLE,
    SINGLE_STREAM,
    AuditConfig,
    Box,
    SamplingExhausted,
    SetSpec,
    Verdict,
    Witness,
    block_rng,
    point_env,
    run_blocks,
    variables,
)
from .interval import Interval
from .invexity import check_sei_set, check_sluei, check_sluep, check_weakly_sei, construct_point
from .ivf import IVFn, VectorMap, compose_inner, gradient_field

FORMS = ("ivop", "P")


class InfeasibleCandidate(ValueError):
    pass


class NotLocallyMinimal(Exception):
    pass


@dataclass(frozen=True)
class Problem:
    objective: IVFn
    E: VectorMap
    Psi: VectorMap
    S: SetSpec
    real_constraints: tuple = ()  # expressions over z1..zn, tested at E(zeta)
    interval_constraints: tuple = ()  # IVFn, tested at zeta
    form: str = "ivop"
    gradient_semantics: str = "composite"
    constraint_names: tuple = ()

    def __post_init__(self):
        if self.form not in FORMS:
            raise ValueError(f"form must be one of {FORMS}")
        dim = self.objective.dim
        if self.E.size != dim or self.Psi.size != dim or self.S.dim != dim:
            raise ValueError("objective, maps and set have inconsistent dimensions")
        if not self.constraint_names:
            names = tuple(f"g{i + 1}" for i in range(len(self.real_constraints)))
            names += tuple(f"c{j + 1}" for j in range(len(self.interval_constraints)))
            object.__setattr__(self, "constraint_names", names)

    @property
    def dim(self) -> int:
        return self.objective.dim

    @property
    def value_function(self) -> IVFn:
        """The interval function compared in the dominance order."""
        return compose_inner(self.objective, self.E) if self.form == "ivop" else self.objective

    @property
    def composite_constraints(self) -> tuple:
        mapping = dict(zip(variables(self.dim), self.E.exprs))
        return tuple(ex.substitute(g, mapping) for g in self.real_constraints)

    def feasible_set(self) -> SetSpec:
        cons = list(self.S.constraints) + list(self.composite_constraints)
        for c in self.interval_constraints:
            cons += [c.hL, c.hU]
        return SetSpec(self.S.box, self.S.domain, tuple(cons))

    def value(self, point) -> Interval:
        return self.value_function(tuple(point))

    def value_batch(self, points: np.ndarray) -> tuple:
        return self.value_function.batch(points)


def _point(p) -> tuple:
    return tuple(float(x) for x in np.atleast_1d(p))


# --------------------------------------------------------------------------- feasibility


@dataclass(frozen=True)
class Feasibility:
    feasible: bool
    slacks: dict  # constraint name -> value (<= 0 when satisfied)
    in_domain: bool

    def to_dict(self):
        return {"feasible": self.feasible, "in_domain": self.in_domain, "slacks": self.slacks}


def feasible(p: Problem, point, tol: float = 1e-9) -> Feasibility:
    z = _point(point)
    in_domain = p.S.contains(z, tol)
    slacks = {}
    ok = in_domain
    names = iter(p.constraint_names)
    if p.real_constraints:
        Ez = p.E(z)
        b = dict(zip(variables(p.dim), Ez))
        for g in p.real_constraints:
            v = ex.evaluate(g, b)
            slacks[next(names)] = v
            ok = ok and v <= tol
    for c in p.interval_constraints:
        val = c(z)
        slacks[next(names)] = [val.lo, val.hi]
        ok = ok and val.hi <= tol
    return Feasibility(ok, slacks, in_domain)


def check_feasible_set_sei(p: Problem, cfg: AuditConfig = AuditConfig()) -> Verdict:
    """Closure of the feasible set under the invex construction.

    Before the audit, E(X) subset X is spot-checked on the sampled points and
    reported with the verdict, since any such set must contain its image.
    """
    X = p.feasible_set()
    try:
        pts = X.sample(block_rng(cfg.seed, SINGLE_STREAM, 0), min(cfg.samples, 1000), cfg.max_rejection)
    except SamplingExhausted as exc:
        return Verdict(NOT_CHECKABLE, 0, reason=f"could not sample the feasible set: {exc}")
    images, bad = p.E.batch(pts)
    amount, gbad = X.violation(images)
    escaping = ~(bad | gbad) & (amount > cfg.tol)
    first = None
    if escaping.any():
        i = int(np.flatnonzero(escaping)[0])
        first = {"point": pts[i].tolist(), "image": images[i].tolist()}
    v = check_sei_set(X, p.E, p.Psi, cfg)
    stats = dict(v.stats)
    stats["image_in_set"] = {"checked": int(pts.shape[0]), "escaping": int(escaping.sum()), "first_escape": first}
    return Verdict(v.outcome, v.samples, v.witness, v.reason, stats)


# --------------------------------------------------------------------------- KKT


@dataclass(frozen=True)
class KKTPoint:
    zeta: tuple
    v: tuple


@dataclass(frozen=True)
class KKTReport:
    stationarity_L: tuple
    stationarity_U: tuple
    comp_slack: float
    products: tuple
    multiplier_violation: float
    feasibility: dict
    infeasibility: float
    max_residual: float
    gradient_semantics: str

    def to_dict(self):
        return dataclasses.asdict(self)


def kkt_residuals(p: Problem, pt: KKTPoint) -> KKTReport:
    if p.interval_constraints:
        raise ValueError("KKT residuals are defined for real constraints g_i(E(zeta)) <= 0 only")
    z = _point(pt.zeta)
    v = tuple(float(x) for x in pt.v)
    if len(v) != len(p.real_constraints):
        raise ValueError(f"{len(p.real_constraints)} constraints but {len(v)} multipliers")
    sem = p.gradient_semantics
    where = z if sem == "composite" else p.E(z)
    g_obj = gradient_field(p.objective, sem, p.E).at(where)
    statL = list(g_obj.gL)
    statU = list(g_obj.gU)
    Ez = p.E(z)
    b = dict(zip(variables(p.dim), Ez))
    values = []
    for vi, g in zip(v, p.real_constraints):
        gi = IVFn(g, g, p.dim, p.objective.domain)
        grad = gradient_field(gi, sem, p.E).at(where)
        for j in range(p.dim):
            statL[j] += vi * grad.gL[j]
            statU[j] += vi * grad.gU[j]
        values.append(ex.evaluate(g, b))
    products = tuple(vi * gv for vi, gv in zip(v, values))
    comp = math.fsum(products)
    neg = max([0.0] + [-x for x in v])
    infeas = max([0.0] + values)
    max_res = max([abs(x) for x in statL + statU] + [abs(comp), neg, infeas])
    return KKTReport(
        stationarity_L=tuple(statL),
        stationarity_U=tuple(statU),
        comp_slack=comp,
        products=products,
        multiplier_violation=neg,
        feasibility=dict(zip(p.constraint_names, values)),
        infeasibility=infeas,
        max_residual=max_res,
        gradient_semantics=sem,
    )


@dataclass(frozen=True)
class DominanceReport:
    candidate: tuple
    candidate_value: tuple
    dominating_point: Optional[tuple]
    dominating_value: Optional[tuple]
    margin: Optional[float]
    samples_checked: int
    reason: Optional[str] = None

    @property
    def dominated(self) -> bool:
        return self.dominating_point is not None

    def to_dict(self):
        return dataclasses.asdict(self)


def _dominance_search(p: Problem, value: Interval, X: SetSpec, cfg: AuditConfig, stream_block: int = 0) -> tuple:
    """First sampled feasible point whose value strictly LU-improves on ``value``."""
    block = 1024
    n_blocks = -(-cfg.samples // block)
    f = p.value_function

    def one(b):
        count = min(block, cfg.samples - b * block)
        rng = block_rng(cfg.seed, SINGLE_STREAM, 1000 * (stream_block + 1) + b)
        try:
            pts = X.sample(rng, count, cfg.max_rejection)
        except SamplingExhausted as exc:
            return exc
        lo, hi, bad, dis = f.batch(pts)
        ok = ~bad & ~dis
        improve = np.maximum(value.lo - lo, value.hi - hi)
        dom = ok & (lo <= value.lo) & (hi <= value.hi) & (improve > cfg.tol)
        return pts, dom, improve, int(ok.sum())

    results = run_blocks(n_blocks, one, cfg.workers)
    checked = 0
    for r in results:
        if isinstance(r, SamplingExhausted):
            return None, 0, str(r)
    for pts, dom, improve, n_ok in results:
        checked += n_ok
    for pts, dom, improve, _ in results:
        for i in np.flatnonzero(dom):
            w = tuple(float(x) for x in pts[i])
            wv = f(w)
            margin = max(value.lo - wv.lo, value.hi - wv.hi)
            if iv.lu_leq(wv, value) and margin > cfg.tol:
                return (w, wv, margin), checked, None
    return None, checked, None


def non_dominated_audit(p: Problem, zeta_star, cfg: AuditConfig = AuditConfig()) -> DominanceReport:
    z = _point(zeta_star)
    if not feasible(p, z, cfg.tol).feasible:
        raise InfeasibleCandidate(f"{z} is not feasible")
    value = p.value(z)
    found, checked, reason = _dominance_search(p, value, p.feasible_set(), cfg)
    if found is None:
        return DominanceReport(z, (value.lo, value.hi), None, None, None, checked, reason)
    w, wv, margin = found
    return DominanceReport(z, (value.lo, value.hi), w, (wv.lo, wv.hi), margin, checked)


@dataclass(frozen=True)
class Stage:
    name: str
    passed: bool
    detail: dict

    def to_dict(self):
        return {"name": self.name, "passed": self.passed, "detail": self.detail}


@dataclass(frozen=True)
class SufficiencyReport:
    passed: bool
    failed_stage: Optional[str]
    stages: tuple

    def to_dict(self):
        return {"passed": self.passed, "failed_stage": self.failed_stage, "stages": [s.to_dict() for s in self.stages]}


def kkt_sufficiency_audit(p: Problem, pt: KKTPoint, cfg: AuditConfig = AuditConfig()) -> SufficiencyReport:
    """Stages run in order and stop at the first failure.

    feasibility, multipliers >= 0, residuals <= tol, hypotheses (objective
    strongly LU-E-invex, each constraint passing the real first-order
    invexity inequality), and finally a sampled non-dominance check.
    """
    cfg = dataclasses.replace(cfg, gradient_semantics=p.gradient_semantics)
    stages = []

    def done(stage):
        stages.append(stage)
        if not stage.passed:
            return SufficiencyReport(False, stage.name, tuple(stages))
        return None

    fz = feasible(p, pt.zeta, cfg.tol)
    r = done(Stage("feasibility", fz.feasible, fz.to_dict()))
    if r:
        return r
    neg = [i for i, x in enumerate(pt.v) if x < 0]
    r = done(Stage("multipliers", not neg, {"v": list(pt.v), "negative": neg}))
    if r:
        return r
    rep = kkt_residuals(p, pt)
    r = done(Stage("residuals", rep.max_residual <= cfg.tol, rep.to_dict()))
    if r:
        return r
    hyp = {"objective_sluei": check_sluei(p.objective, p.E, p.Psi, p.S, cfg).to_dict()}
    ok = hyp["objective_sluei"]["outcome"] == HOLDS
    for name, g in zip(p.constraint_names, p.real_constraints):
        gi = IVFn(g, g, p.dim, p.objective.domain)
        vd = check_weakly_sei(gi, p.E, p.Psi, p.S, cfg).to_dict()
        hyp[f"constraint_{name}_sei"] = vd
        ok = ok and vd["outcome"] == HOLDS
    r = done(Stage("hypotheses", ok, hyp))
    if r:
        return r
    dom = non_dominated_audit(p, pt.zeta, cfg)
    r = done(Stage("dominance", not dom.dominated and dom.reason is None, dom.to_dict()))
    if r:
        return r
    return SufficiencyReport(True, None, tuple(stages))


# --------------------------------------------------------------------------- local versus global


@dataclass(frozen=True)
class LocalGlobalReport:
    status: str  # "pass", "not-locally-minimal", "global-dominator"
    radius: float
    local: DominanceReport
    global_: Optional[DominanceReport]
    hypotheses: dict

    @property
    def passed(self) -> bool:
        return self.status == "pass"

    def to_dict(self):
        return {
            "status": self.status,
            "radius": self.radius,
            "local": self.local.to_dict(),
            "global": None if self.global_ is None else self.global_.to_dict(),
            "hypotheses": self.hypotheses,
        }


def local_global_audit(
    p: Problem, zeta_star, cfg: AuditConfig = AuditConfig(), eps_local: Optional[float] = None, raise_on_local: bool = False
) -> LocalGlobalReport:
    """Sampled local minimality in a small ball, then a global search for a dominator.

    The preinvexity hypotheses (strict on the objective) are audited and
    reported alongside; the verdict is about the conclusion only.
    """
    z = _point(zeta_star)
    if not feasible(p, z, cfg.tol).feasible:
        raise InfeasibleCandidate(f"{z} is not feasible")
    hyp = {"objective_sluep_strict": check_sluep(p.objective, p.E, p.Psi, p.S, cfg, strict=True).to_dict()}
    for name, c in zip(p.constraint_names[len(p.real_constraints):], p.interval_constraints):
        hyp[f"constraint_{name}_sluep"] = check_sluep(c, p.E, p.Psi, p.S, cfg).to_dict()
    radius = eps_local if eps_local is not None else 1e-2 * p.S.box.diagonal
    value = p.value(z)
    X = p.feasible_set()
    ball = SetSpec(p.S.box.around(z, radius), X.domain, X.constraints)
    found, checked, reason = _dominance_search(p, value, ball, cfg, stream_block=1)
    local = _report(z, value, found, checked, reason)
    if found is not None:
        if raise_on_local:
            raise NotLocallyMinimal(f"{found[0]} improves on {z} within radius {radius}")
        return LocalGlobalReport("not-locally-minimal", radius, local, None, hyp)
    found, checked, reason = _dominance_search(p, value, X, cfg, stream_block=2)
    glob = _report(z, value, found, checked, reason)
    return LocalGlobalReport("pass" if found is None else "global-dominator", radius, local, glob, hyp)


def _report(z, value, found, checked, reason) -> DominanceReport:
    if found is None:
        return DominanceReport(z, (value.lo, value.hi), None, None, None, checked, reason)
    w, wv, margin = found
    return DominanceReport(z, (value.lo, value.hi), w, (wv.lo, wv.hi), margin, checked)


# --------------------------------------------------------------------------- optimal set


def check_xopt_sei(p: Problem, optimal_points: Sequence, cfg: AuditConfig = AuditConfig()) -> Verdict:
    """The construction applied to pairs of optimal points stays feasible with the same value."""
    pts = [_point(x) for x in optimal_points]
    if not pts:
        raise ValueError("no optimal points given")
    pairs = list(cfg.grid_pairs)
    checked = 0
    stats = Counter()
    for zi in pts:
        for di in pts:
            ref = p.value(di)
            for a, l in pairs:
                checked += 1
                c = construct_point(p.E, p.Psi, zi, di, a, l)
                q = c["P"]
                fz = feasible(p, q, cfg.tol)
                val = p.value(q) if fz.in_domain else None
                dev = math.inf if val is None else iv.hausdorff(val, ref)
                if not fz.feasible or dev > cfg.tol:
                    stats["violations"] += 1
                    w = Witness(
                        zi, di, a, l,
                        None if val is None else (val.lo, val.hi),
                        (ref.lo, ref.hi),
                        dev if math.isfinite(dev) else 1.0,
                        "=",
                        {"constructed_point": list(q), "feasible": fz.feasible},
                    )
                    return Verdict(FAILS, checked, w, stats=dict(stats))
    stats["tuples"] = checked
    return Verdict(HOLDS, checked, stats=dict(stats))


# --------------------------------------------------------------------------- candidates


@dataclass(frozen=True)
class Candidate:
    point: tuple
    value: tuple

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.value[0] + self.value[1])

    def to_dict(self):
        return {"point": list(self.point), "value": list(self.value)}


def _nondominated(lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Indices of the LU-nondominated rows (2-D skyline)."""
    order = np.lexsort((hi, lo))
    keep = []
    best_hi = math.inf
    last = None
    for i in order:
        if hi[i] < best_hi:
            keep.append(i)
            best_hi = hi[i]
            last = (lo[i], hi[i])
        elif last is not None and (lo[i], hi[i]) == last:
            keep.append(i)
    return np.array(keep, dtype=int)


def _grid(box: Box, per_dim: int) -> np.ndarray:
    axes = [np.linspace(a, b, per_dim) for a, b in zip(box.lo, box.hi)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def grid_candidates(p: Problem, cfg: AuditConfig = AuditConfig(), points: int = 4096, rounds: int = 40, keep: int = 10) -> list:
    """Coarse grid plus zoomed refinement; nondominated points ranked by value midpoint."""
    X = p.feasible_set()
    f = p.value_function
    per_dim = max(2, int(round(points ** (1.0 / p.dim))))
    box = p.S.box

    def evaluate(pts):
        lo, hi, bad, dis = f.batch(pts)
        amount, gbad = X.violation(pts)
        ok = ~bad & ~dis & ~gbad & (amount <= cfg.tol)
        return pts[ok], lo[ok], hi[ok]

    pts, lo, hi = evaluate(_grid(box, per_dim))
    if pts.shape[0] == 0:
        return []
    widths = np.array(box.hi) - np.array(box.lo)
    step = widths / (per_dim - 1)
    for _ in range(rounds):
        front = _nondominated(lo, hi)
        front = front[np.argsort(0.5 * (lo[front] + hi[front]), kind="stable")][:keep]
        fresh = []
        for i in front:
            local = Box(
                tuple(np.maximum(pts[i] - step, box.lo)),
                tuple(np.minimum(pts[i] + step, box.hi)),
            )
            fresh.append(_grid(local, 5 if p.dim <= 3 else 3))
        q, ql, qh = evaluate(np.concatenate(fresh))
        pts = np.concatenate([pts[front], q])
        lo = np.concatenate([lo[front], ql])
        hi = np.concatenate([hi[front], qh])
        step = step / 2.0
    front = _nondominated(lo, hi)
    front = front[np.argsort(0.5 * (lo[front] + hi[front]), kind="stable")]
    out = []
    seen = set()
    for i in front:
        key = tuple(np.round(pts[i], 12))
        if key in seen:
            continue
        seen.add(key)
        out.append(Candidate(tuple(float(x) for x in pts[i]), (float(lo[i]), float(hi[i]))))
        if len(out) == keep:
            break
    return out
