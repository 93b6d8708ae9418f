"""Sampling auditors for invex-type sets and interval-valued function classes.

Each auditor evaluates a whole block of sampled tuples with numpy and then
replays the first candidate violation with the scalar interval algebra, so
a reported witness is always confirmed by a second, independent code path.
"""
from __future__ import annotations

import dataclasses
import math
from collections import Counter
from typing import Optional, Sequence

import numpy as np

from . import expr as ex
from . import interval as iv
from .audit import (
    NOT_CHECKABLE,
    AuditConfig,
    BlockResult,
    SetSpec,
    TupleBatch,
    Verdict,
    Witness,
    draw_tuples,
    run_tuple_audit,
    variables,
)
from .interval import Interval
from .ivf import IntervalMap, IVFn, VectorMap, gh_gradient_product, gradient_field

# --------------------------------------------------------------------------- the constructed point


def _construct_batch(E: VectorMap, Psi: VectorMap, Z, D, alpha, lam) -> dict:
    Ez, bz = E.batch(Z)
    Ed, bd = E.batch(D)
    A = alpha[:, None] * Z + Ez
    B = alpha[:, None] * D + Ed
    psi, bp = Psi.batch(A, B)
    P = B + lam[:, None] * psi
    return {"Ez": Ez, "Ed": Ed, "A": A, "B": B, "psi": psi, "P": P, "bad": bz | bd | bp}


def construct_point(E: VectorMap, Psi: VectorMap, zeta, delta, alpha: float, lam: float) -> dict:
    """alpha*delta + E(delta) + lam*Psi(alpha*zeta + E(zeta), alpha*delta + E(delta)) and its parts."""
    Ez, Ed = E(zeta), E(delta)
    A = tuple(alpha * z + e for z, e in zip(zeta, Ez))
    B = tuple(alpha * d + e for d, e in zip(delta, Ed))
    psi = Psi(A, B)
    P = tuple(b + lam * p for b, p in zip(B, psi))
    return {"Ez": Ez, "Ed": Ed, "A": A, "B": B, "psi": psi, "P": P}


def _pair(x: Interval) -> tuple:
    return (x.lo, x.hi)


def _lincomb(lam: float, a: Interval, b: Interval) -> Interval:
    return iv.add(iv.scalar_mul(lam, a), iv.scalar_mul(1.0 - lam, b))


def _outside(S: SetSpec, P: np.ndarray, tol: float) -> tuple:
    amount, bad = S.violation(P)
    return amount > tol, bad


def _vec(x) -> list:
    return [float(v) for v in x]


# --------------------------------------------------------------------------- auditors


class _Auditor:
    """A check evaluated on tuple blocks with a scalar replay for confirmation."""

    relation = "⪯"

    def __init__(self, S: SetSpec, cfg: AuditConfig):
        self.S = S
        self.cfg = cfg

    def block(self, batch: TupleBatch) -> BlockResult:
        raise NotImplementedError

    def replay(self, zeta, delta, alpha, lam, cols=None) -> tuple:
        raise NotImplementedError

    def extra_stats(self) -> dict:
        return {}

    def run(self) -> Verdict:
        return run_tuple_audit(self.S, self.cfg, self.block, self.replay, self.extra_stats())


class SetAuditor(_Auditor):
    """Is the constructed point back in S?"""

    relation = "∈"

    def __init__(self, S, E, Psi, cfg):
        super().__init__(S, cfg)
        self.E, self.Psi = E, Psi

    def block(self, batch):
        c = _construct_batch(self.E, self.Psi, batch.zeta, batch.delta, batch.alpha, batch.lam)
        amount, gbad = self.S.violation(c["P"])
        bad = c["bad"] | gbad
        return BlockResult(violated=~bad & (amount > self.cfg.tol), skipped={"domain": bad})

    def replay(self, zeta, delta, alpha, lam, cols=None):
        c = construct_point(self.E, self.Psi, zeta, delta, alpha, lam)
        amount, bad = self.S.violation(np.array([c["P"]]))
        inside = self.S.contains(c["P"], self.cfg.tol)
        w = Witness(
            zeta, delta, alpha, lam, None, None, float(amount[0]), self.relation,
            {"constructed_point": _vec(c["P"])},
        )
        return w, not inside and not bad[0]


class JensenAuditor(_Auditor):
    """h(p) against a convex combination of h at two reference points.

    ``transformed`` compares with h(E(zeta)), h(E(delta)); otherwise with
    h(zeta), h(delta).
    """

    def __init__(self, f, E, Psi, S, cfg, transformed=True, strict=False):
        super().__init__(S, cfg)
        self.f, self.E, self.Psi = f, E, Psi
        self.transformed = transformed
        self.strict = strict
        self.relation = "≺" if strict else "⪯"

    def block(self, batch):
        cfg = self.cfg
        lam = batch.lam
        c = _construct_batch(self.E, self.Psi, batch.zeta, batch.delta, batch.alpha, lam)
        out, gbad = _outside(self.S, c["P"], cfg.tol)
        lhs_lo, lhs_hi, b1, d1 = self.f.batch(c["P"])
        if self.transformed:
            zl, zh, b2, d2 = self.f.batch(c["Ez"])
            dl, dh, b3, d3 = self.f.batch(c["Ed"])
        else:
            zl, zh, b2, d2 = self.f.batch(batch.zeta)
            dl, dh, b3, d3 = self.f.batch(batch.delta)
        rhs_lo = lam * zl + (1.0 - lam) * dl
        rhs_hi = lam * zh + (1.0 - lam) * dh
        bad = c["bad"] | gbad | b1 | b2 | b3
        invalid = ~bad & (d1 | d2 | d3)
        outside = ~bad & ~invalid & out
        with np.errstate(invalid="ignore"):
            margin = np.maximum(lhs_lo - rhs_lo, lhs_hi - rhs_hi)
            violated = margin > cfg.tol
            counts = Counter()
            if self.strict:
                sep = np.abs(c["A"] - c["B"]).max(axis=1) > cfg.strict_separation
                premise = sep & (lam > 0) & (lam < 1)
                dist = np.maximum(np.abs(lhs_lo - rhs_lo), np.abs(lhs_hi - rhs_hi))
                violated = violated | (premise & (dist <= cfg.tol))
                counts["strict_premise"] = int((premise & ~bad & ~invalid & ~outside).sum())
        return BlockResult(
            violated=violated,
            skipped={"domain": bad, "invalid_value": invalid, "outside_set": outside},
            counts=counts,
        )

    def sides(self, zeta, delta, alpha, lam) -> tuple:
        c = construct_point(self.E, self.Psi, zeta, delta, alpha, lam)
        lhs = self.f(c["P"])
        if self.transformed:
            rhs = _lincomb(lam, self.f(c["Ez"]), self.f(c["Ed"]))
        else:
            rhs = _lincomb(lam, self.f(zeta), self.f(delta))
        return lhs, rhs, c

    def replay(self, zeta, delta, alpha, lam, cols=None):
        lhs, rhs, c = self.sides(zeta, delta, alpha, lam)
        margin = iv.lu_margin(lhs, rhs)
        violated = margin > self.cfg.tol
        extra = {"constructed_point": _vec(c["P"])}
        if self.strict:
            sep = max(abs(a - b) for a, b in zip(c["A"], c["B"])) > self.cfg.strict_separation
            premise = sep and 0.0 < lam < 1.0
            if premise and iv.hausdorff(lhs, rhs) <= self.cfg.tol:
                violated = True
                extra["equal_within_tol"] = True
            extra["strict_premise"] = premise
        w = Witness(zeta, delta, alpha, lam, _pair(lhs), _pair(rhs), margin, self.relation, extra)
        return w, violated and self.S.contains(c["P"], self.cfg.tol)


class PseudoAuditor(_Auditor):
    """Conditional inequality with the penalty lam*(lam-1)*Phi.

    Without a supplied Phi the certificate is the endpoint pair
    [h^U(E delta) - h^U(E zeta), h^L(E delta) - h^L(E zeta)].
    """

    def __init__(self, f, E, Psi, S, cfg, phi: Optional[VectorMap] = None):
        super().__init__(S, cfg)
        self.f, self.E, self.Psi = f, E, Psi
        self.phi = phi

    def extra_stats(self):
        return {"phi_mode": "derived" if self.phi is None else "supplied"}

    def block(self, batch):
        cfg = self.cfg
        lam = batch.lam
        k = lam * (lam - 1.0)
        c = _construct_batch(self.E, self.Psi, batch.zeta, batch.delta, batch.alpha, lam)
        out, gbad = _outside(self.S, c["P"], cfg.tol)
        lhs_lo, lhs_hi, b1, d1 = self.f.batch(c["P"])
        zl, zh, b2, d2 = self.f.batch(c["Ez"])
        dl, dh, b3, d3 = self.f.batch(c["Ed"])
        bad = c["bad"] | gbad | b1 | b2 | b3
        invalid = ~bad & (d1 | d2 | d3)
        counts = Counter()
        with np.errstate(invalid="ignore"):
            premise = (zl <= dl) & (zh <= dh) & ((zl != dl) | (zh != dh))
            if self.phi is None:
                p_lo, p_hi = dh - zh, dl - zl
                rhs_lo, rhs_hi = dl + k * (dl - zl), dh + k * (dh - zh)
                not_positive = np.zeros_like(premise)
            else:
                vals, pbad = self.phi.batch(c["Ez"], c["Ed"])
                p_lo, p_hi = vals[:, 0], vals[:, 1]
                bad = bad | pbad
                invalid = invalid | (~bad & (p_lo > p_hi))
                rhs_lo, rhs_hi = dl + k * p_hi, dh + k * p_lo
                not_positive = ~((p_lo >= 0) & (p_hi >= 0) & ((p_lo > 0) | (p_hi > 0)))
            margin = np.maximum(lhs_lo - rhs_lo, lhs_hi - rhs_hi)
        outside = ~bad & ~invalid & out
        live = ~bad & ~invalid & ~outside
        untriggered = live & ~premise
        triggered = live & premise
        # Tuples outside the premise satisfy the implication vacuously; they
        # count as checked and are tallied separately.
        counts["premise_not_met"] = int(untriggered.sum())
        counts["premise_triggered"] = int(triggered.sum())
        counts["phi_inverted"] = int((triggered & (p_lo > p_hi)).sum())
        if self.phi is not None:
            counts["phi_not_positive"] = int((triggered & not_positive).sum())
        violated = premise & ((margin > cfg.tol) | not_positive)
        return BlockResult(
            violated=violated,
            skipped={"domain": bad, "invalid_value": invalid, "outside_set": outside},
            counts=counts,
        )

    def sides(self, zeta, delta, alpha, lam) -> dict:
        c = construct_point(self.E, self.Psi, zeta, delta, alpha, lam)
        hz, hd = self.f(c["Ez"]), self.f(c["Ed"])
        k = lam * (lam - 1.0)
        premise = iv.lu_lt(hz, hd)
        if self.phi is None:
            phi = (hd.hi - hz.hi, hd.lo - hz.lo)
            rhs = (hd.lo + k * (hd.lo - hz.lo), hd.hi + k * (hd.hi - hz.hi))
            positive = True
        else:
            phi = self.phi(c["Ez"], c["Ed"])
            pint = Interval(phi[0], phi[1])
            shifted = iv.add(hd, iv.scalar_mul(k, pint))
            rhs = _pair(shifted)
            positive = iv.lu_lt(iv.ZERO, pint)
        return {"lhs": self.f(c["P"]), "rhs": rhs, "phi": phi, "premise": premise, "positive": positive, "c": c}

    def replay(self, zeta, delta, alpha, lam, cols=None):
        s = self.sides(zeta, delta, alpha, lam)
        lhs, rhs = s["lhs"], s["rhs"]
        margin = max(lhs.lo - rhs[0], lhs.hi - rhs[1])
        extra = {"phi": _vec(s["phi"]), "premise": s["premise"], "constructed_point": _vec(s["c"]["P"])}
        relation = self.relation
        violated = s["premise"] and margin > self.cfg.tol
        if s["premise"] and not s["positive"]:
            violated = True
            relation = "Φ ≻ 0"
            extra["phi_not_positive"] = True
        w = Witness(zeta, delta, alpha, lam, _pair(lhs), tuple(rhs), margin, relation, extra)
        return w, violated and self.S.contains(s["c"]["P"], self.cfg.tol)


class FirstOrderAuditor(_Auditor):
    """Gradient-based conditions at E(delta).

    ``endpointwise`` tests the pair of endpoint inequalities; otherwise the
    gH-product against the gH-difference.
    """

    def __init__(self, f, E, Psi, S, cfg, endpointwise: bool):
        super().__init__(S, cfg)
        self.f, self.E, self.Psi = f, E, Psi
        self.endpointwise = endpointwise
        self.semantics = cfg.gradient_semantics
        self.field = gradient_field(f, self.semantics, E)

    def extra_stats(self):
        return {"gradient_semantics": self.semantics, "gradient_path": "symbolic"}

    def _grad_points_batch(self, D):
        if self.semantics == "composite":
            return D, np.zeros(D.shape[0], dtype=bool)
        return self.E.batch(D)

    def _grad_point(self, delta):
        return tuple(delta) if self.semantics == "composite" else self.E(delta)

    def block(self, batch):
        cfg = self.cfg
        D = batch.delta.copy()
        counts = Counter()
        nonsmooth = np.zeros(len(batch), dtype=bool)
        for attempt in range(cfg.nonsmooth_retries + 1):
            gp, _ = self._grad_points_batch(D)
            near = self.field.kink_distance(gp) < cfg.kink_radius
            if not near.any():
                nonsmooth[:] = False
                break
            if attempt == cfg.nonsmooth_retries:
                nonsmooth = near
                break
            counts["nonsmooth_perturbed"] += int(near.sum())
            D[near] += cfg.perturbation
        c = _construct_batch(self.E, self.Psi, batch.zeta, D, batch.alpha, batch.lam)
        gp, gpbad = self._grad_points_batch(D)
        gL, gU, gbad = self.field.batch(gp)
        zl, zh, b2, d2 = self.f.batch(c["Ez"])
        dl, dh, b3, d3 = self.f.batch(c["Ed"])
        bad = c["bad"] | gpbad | gbad | b2 | b3
        invalid = ~bad & (d2 | d3)
        psi = c["psi"]
        with np.errstate(invalid="ignore"):
            a = (psi * gL).sum(axis=1)
            b = (psi * gU).sum(axis=1)
            dL, dU = zl - dl, zh - dh
            if self.endpointwise:
                margin = np.maximum(a - dL, b - dU)
            else:
                margin = np.maximum(np.minimum(a, b) - np.minimum(dL, dU), np.maximum(a, b) - np.maximum(dL, dU))
        nonsmooth = nonsmooth & ~bad
        return BlockResult(
            violated=margin > cfg.tol,
            skipped={"domain": bad, "invalid_value": invalid, "nonsmooth": nonsmooth},
            counts=counts,
            columns={"delta": D},
        )

    def sides(self, zeta, delta, alpha, lam) -> dict:
        c = construct_point(self.E, self.Psi, zeta, delta, alpha, lam)
        g = self.field.at(self._grad_point(delta), self.cfg.kink_radius)
        hz, hd = self.f(c["Ez"]), self.f(c["Ed"])
        psi = c["psi"]
        if self.endpointwise:
            lhs = (math.fsum(p * x for p, x in zip(psi, g.gL)), math.fsum(p * x for p, x in zip(psi, g.gU)))
            rhs = (hz.lo - hd.lo, hz.hi - hd.hi)
        else:
            lhs = _pair(gh_gradient_product(psi, g))
            rhs = _pair(iv.gh_diff(hz, hd))
        return {"lhs": lhs, "rhs": rhs, "gradient": g, "c": c}

    def replay(self, zeta, delta, alpha, lam, cols=None):
        s = self.sides(zeta, delta, alpha, lam)
        lhs, rhs, g = s["lhs"], s["rhs"], s["gradient"]
        margin = max(lhs[0] - rhs[0], lhs[1] - rhs[1])
        extra = {
            "psi": _vec(s["c"]["psi"]),
            "gL": _vec(g.gL),
            "gU": _vec(g.gU),
            "gradient_semantics": self.semantics,
            "gradient_path": g.path,
        }
        if self.endpointwise:
            extra["sides"] = "endpoint pairs (Psi.grad h^L, Psi.grad h^U) vs (h^L difference, h^U difference)"
        w = Witness(zeta, delta, alpha, lam, lhs, rhs, margin, self.relation, extra)
        return w, margin > self.cfg.tol


class InversionFailed(ArithmeticError):
    pass


class ConditionAAuditor(_Auditor):
    """The two identities along the point delta-bar with E(delta-bar) = p."""

    relation = "="

    def __init__(self, E, Psi, S, cfg, bisection_tol=1e-12, iterations=200):
        super().__init__(S, cfg)
        self.E, self.Psi = E, Psi
        self.bisection_tol = bisection_tol
        self.iterations = iterations
        self.direction = None
        self.reason = self._invertible()

    def _invertible(self) -> Optional[str]:
        names = variables(self.S.dim)
        dirs = []
        for i, e in enumerate(self.E.exprs):
            fv = ex.free_vars(e)
            if not fv <= {names[i]}:
                return f"E component {i + 1} depends on {sorted(fv)}; coordinatewise inversion needs z{i + 1} only"
            if not fv:
                return f"E component {i + 1} is constant and cannot be inverted"
            xs = np.linspace(self.S.box.lo[i], self.S.box.hi[i], 1025)
            vals, bad = ex.compile_batch(e)({names[i]: xs}, xs.size)
            if bad.any():
                return f"E component {i + 1} is not defined on the whole sampling box"
            steps = np.diff(vals)
            if (steps > 0).all():
                dirs.append(1.0)
            elif (steps < 0).all():
                dirs.append(-1.0)
            else:
                return f"E component {i + 1} is not strictly monotone on the sampling box"
        self.direction = tuple(dirs)
        return None

    def _bracket(self, i):
        lo, hi = self.S.box.lo[i], self.S.box.hi[i]
        return lo, hi, self.S.domain.lo[i], self.S.domain.hi[i]

    def invert_batch(self, P: np.ndarray) -> tuple:
        """Coordinatewise bisection for E(x) = P; returns (x, failed rows)."""
        m, n = P.shape
        names = variables(n)
        X = np.empty((m, n))
        failed = np.zeros(m, dtype=bool)
        for i in range(n):
            f = ex.compile_batch(self.E.exprs[i])
            s = self.direction[i]

            def g(x):
                v, b = f({names[i]: x}, x.size)
                return s * v, b

            blo, bhi, dlo, dhi = self._bracket(i)
            lo = np.full(m, blo)
            hi = np.full(m, bhi)
            target = s * P[:, i]
            for _ in range(60):
                vlo, b1 = g(lo)
                vhi, b2 = g(hi)
                need_lo = (vlo > target) & ~b1
                need_hi = (vhi < target) & ~b2
                if not (need_lo.any() or need_hi.any()):
                    break
                width = np.maximum(hi - lo, 1.0)
                lo = np.where(need_lo, np.maximum(lo - width, dlo), lo)
                hi = np.where(need_hi, np.minimum(hi + width, dhi), hi)
            vlo, b1 = g(lo)
            vhi, b2 = g(hi)
            with np.errstate(invalid="ignore"):
                ok = ~b1 & ~b2 & (vlo <= target) & (vhi >= target) & np.isfinite(target)
            for _ in range(self.iterations):
                mid = 0.5 * (lo + hi)
                vm, bm = g(mid)
                go_right = vm < target
                lo = np.where(go_right, mid, lo)
                hi = np.where(go_right, hi, mid)
                if np.all(hi - lo <= self.bisection_tol * np.maximum(1.0, np.abs(mid))):
                    break
            X[:, i] = 0.5 * (lo + hi)
            failed |= ~ok
        return X, failed

    def _identities(self, c, alpha, lam, Xbar):
        Eb, bb = self.E.batch(Xbar)
        C = alpha[:, None] * Xbar + Eb
        lhs1, b1 = self.Psi.batch(c["B"], C)
        lhs2, b2 = self.Psi.batch(c["A"], C)
        base = alpha[:, None] * Xbar + c["psi"]
        rhs1 = -lam[:, None] * base
        rhs2 = (1.0 - lam)[:, None] * base
        dev = np.maximum(np.abs(lhs1 - rhs1).max(axis=1), np.abs(lhs2 - rhs2).max(axis=1))
        return dev, bb | b1 | b2

    def block(self, batch):
        c = _construct_batch(self.E, self.Psi, batch.zeta, batch.delta, batch.alpha, batch.lam)
        bad = c["bad"].copy()
        P = np.where(bad[:, None], 0.0, c["P"])
        Xbar, failed = self.invert_batch(P)
        failed &= ~bad
        dev, b2 = self._identities(c, batch.alpha, batch.lam, Xbar)
        bad |= b2 & ~failed
        with np.errstate(invalid="ignore"):
            violated = dev > self.cfg.tol
        return BlockResult(violated=violated, skipped={"domain": bad, "inversion_failed": failed})

    def sides(self, zeta, delta, alpha, lam) -> dict:
        c = construct_point(self.E, self.Psi, zeta, delta, alpha, lam)
        X, failed = self.invert_batch(np.array([c["P"]], dtype=float))
        if failed[0]:
            raise InversionFailed(f"no preimage of {c['P']} under E was bracketed")
        xbar = tuple(float(v) for v in X[0])
        Eb = self.E(xbar)
        C = tuple(alpha * x + e for x, e in zip(xbar, Eb))
        base = tuple(alpha * x + p for x, p in zip(xbar, c["psi"]))
        id1 = (self.Psi(c["B"], C), tuple(-lam * v for v in base))
        id2 = (self.Psi(c["A"], C), tuple((1.0 - lam) * v for v in base))
        return {"delta_bar": xbar, "id1": id1, "id2": id2, "c": c}

    def replay(self, zeta, delta, alpha, lam, cols=None):
        s = self.sides(zeta, delta, alpha, lam)
        dev1 = max(abs(a - b) for a, b in zip(*s["id1"]))
        dev2 = max(abs(a - b) for a, b in zip(*s["id2"]))
        worst = s["id1"] if dev1 >= dev2 else s["id2"]
        margin = max(dev1, dev2)
        extra = {
            "delta_bar": _vec(s["delta_bar"]),
            "identity_1": {"lhs": _vec(s["id1"][0]), "rhs": _vec(s["id1"][1]), "deviation": dev1},
            "identity_2": {"lhs": _vec(s["id2"][0]), "rhs": _vec(s["id2"][1]), "deviation": dev2},
        }
        w = Witness(zeta, delta, alpha, lam, tuple(worst[0]), tuple(worst[1]), margin, self.relation, extra)
        return w, margin > self.cfg.tol

    def run(self) -> Verdict:
        if self.reason is not None:
            return Verdict(NOT_CHECKABLE, 0, reason=self.reason)
        v = super().run()
        failed = v.stats.get("skipped_inversion_failed", 0)
        if v.holds and failed:
            return Verdict(
                NOT_CHECKABLE, v.samples,
                reason=f"E could not be inverted on {failed} sampled tuples",
                stats=v.stats,
            )
        return v


class EpigraphAuditor(_Auditor):
    """Membership of the combined pair in the epigraph of h."""

    def __init__(self, f, E, Psi, E0: IntervalMap, S, cfg):
        super().__init__(S, cfg)
        self.f, self.E, self.Psi, self.E0 = f, E, Psi, E0
        self.offsets = np.array(cfg.epigraph_offsets)

    def block(self, batch):
        cfg = self.cfg
        m = len(batch)
        lam = batch.lam
        t1 = batch.rng.choice(self.offsets, size=m)
        t2 = batch.rng.choice(self.offsets, size=m)
        c = _construct_batch(self.E, self.Psi, batch.zeta, batch.delta, batch.alpha, lam)
        out, gbad = _outside(self.S, c["P"], cfg.tol)
        lhs_lo, lhs_hi, b1, d1 = self.f.batch(c["P"])
        zl, zh, b2, d2 = self.f.batch(batch.zeta)
        dl, dh, b3, d3 = self.f.batch(batch.delta)
        e1l, e1h, b4 = self.E0.batch(zl + t1, zh + t1)
        e2l, e2h, b5 = self.E0.batch(dl + t2, dh + t2)
        bad = c["bad"] | gbad | b1 | b2 | b3 | b4 | b5
        with np.errstate(invalid="ignore"):
            invalid = ~bad & (d1 | d2 | d3 | (e1l > e1h) | (e2l > e2h))
            rhs_lo = lam * e1l + (1.0 - lam) * e2l
            rhs_hi = lam * e1h + (1.0 - lam) * e2h
            margin = np.maximum(lhs_lo - rhs_lo, lhs_hi - rhs_hi)
        outside = ~bad & ~invalid & out
        return BlockResult(
            violated=margin > cfg.tol,
            skipped={"domain": bad, "invalid_value": invalid, "outside_set": outside},
            columns={"t1": t1, "t2": t2},
        )

    def sides(self, zeta, delta, alpha, lam, t1, t2) -> dict:
        c = construct_point(self.E, self.Psi, zeta, delta, alpha, lam)
        I1 = iv.add(self.f(zeta), Interval(t1, t1))
        I2 = iv.add(self.f(delta), Interval(t2, t2))
        rhs = _lincomb(lam, self.E0(I1), self.E0(I2))
        return {"lhs": self.f(c["P"]), "rhs": rhs, "I1": I1, "I2": I2, "c": c}

    def replay(self, zeta, delta, alpha, lam, cols=None):
        cols = cols or {}
        t1, t2 = float(cols.get("t1", 0.0)), float(cols.get("t2", 0.0))
        s = self.sides(zeta, delta, alpha, lam, t1, t2)
        margin = iv.lu_margin(s["lhs"], s["rhs"])
        extra = {
            "t1": t1,
            "t2": t2,
            "I1": list(_pair(s["I1"])),
            "I2": list(_pair(s["I2"])),
            "constructed_point": _vec(s["c"]["P"]),
        }
        w = Witness(zeta, delta, alpha, lam, _pair(s["lhs"]), _pair(s["rhs"]), margin, self.relation, extra)
        return w, margin > self.cfg.tol and self.S.contains(s["c"]["P"], self.cfg.tol)

    def extra_stats(self):
        side = epigraph_side_condition(self.f, self.E, self.E0, self.S, self.cfg)
        side["e0_onto"] = "assumed, not checkable by sampling"
        return {"side_condition": side}


def epigraph_side_condition(f: IVFn, E: VectorMap, E0: IntervalMap, S: SetSpec, cfg: AuditConfig) -> dict:
    """Sample E0(h(zeta) + t) = h(E(zeta)) + t over the configured offsets."""
    pts = np.unique(draw_tuples(S, dataclasses.replace(cfg, workers=1)).zeta, axis=0)
    m = pts.shape[0]
    Ez, bz = E.batch(pts)
    hl, hh, b1, _ = f.batch(pts)
    el, eh, b2, _ = f.batch(Ez)
    worst = 0.0
    worst_at = None
    violations = 0
    checks = 0
    for t in cfg.epigraph_offsets:
        ol, oh, b3 = E0.batch(hl + t, hh + t)
        ok = ~(bz | b1 | b2 | b3)
        dev = np.maximum(np.abs(ol - (el + t)), np.abs(oh - (eh + t)))
        dev = np.where(ok, dev, 0.0)
        checks += int(ok.sum())
        violations += int((dev > cfg.tol).sum())
        i = int(np.argmax(dev))
        if m and dev[i] > worst:
            worst = float(dev[i])
            worst_at = {"zeta": _vec(pts[i]), "t": float(t)}
    return {"checks": checks, "violations": violations, "max_deviation": worst, "worst": worst_at, "holds": violations == 0}


# --------------------------------------------------------------------------- public entry points


def _alpha_zero(cfg: AuditConfig) -> AuditConfig:
    return dataclasses.replace(cfg, alpha_grid=(0.0,))


def check_sei_set(S: SetSpec, E: VectorMap, Psi: VectorMap, cfg: AuditConfig = AuditConfig(), alpha_zero: bool = False) -> Verdict:
    """Closure of S under the strongly E-invex construction (E-invex when ``alpha_zero``)."""
    return SetAuditor(S, E, Psi, _alpha_zero(cfg) if alpha_zero else cfg).run()


def check_sluep(f, E, Psi, S, cfg: AuditConfig = AuditConfig(), strict: bool = False) -> Verdict:
    return JensenAuditor(f, E, Psi, S, cfg, transformed=True, strict=strict).run()


def check_lambda_zero(f, E, Psi, S, cfg: AuditConfig = AuditConfig()) -> Verdict:
    """h(alpha*delta + E(delta)) <= h(E(delta)), the lam = 0 case of the preinvex inequality."""
    return check_sluep(f, E, Psi, S, dataclasses.replace(cfg, lambda_grid=(0.0,)))


def check_ssluep(f, E, Psi, S, cfg: AuditConfig = AuditConfig()) -> Verdict:
    return JensenAuditor(f, E, Psi, S, cfg, transformed=False).run()


def check_psluep(f, E, Psi, S, cfg: AuditConfig = AuditConfig(), phi: Optional[VectorMap] = None) -> Verdict:
    """``phi=None`` uses the derived certificate, which tests a sufficient condition only."""
    return PseudoAuditor(f, E, Psi, S, cfg, phi).run()


def check_weakly_sei(f, E, Psi, S, cfg: AuditConfig = AuditConfig()) -> Verdict:
    return FirstOrderAuditor(f, E, Psi, S, cfg, endpointwise=True).run()


def check_sluei(f, E, Psi, S, cfg: AuditConfig = AuditConfig()) -> Verdict:
    return FirstOrderAuditor(f, E, Psi, S, cfg, endpointwise=False).run()


def check_condition_a(E, Psi, S, cfg: AuditConfig = AuditConfig()) -> Verdict:
    return ConditionAAuditor(E, Psi, S, cfg).run()


def check_epigraph_gsei(f, E, Psi, E0: IntervalMap, S, cfg: AuditConfig = AuditConfig()) -> Verdict:
    return EpigraphAuditor(f, E, Psi, E0, S, cfg).run()


def make_auditor(kind: str, S: SetSpec, cfg: AuditConfig, f=None, E=None, Psi=None, E0=None, phi=None) -> _Auditor:
    """Auditor for a class name as used on the command line."""
    if kind == "sei-set":
        return SetAuditor(S, E, Psi, cfg)
    if kind == "e-invex-set":
        return SetAuditor(S, E, Psi, _alpha_zero(cfg))
    if kind in ("sluep", "sluep-strict"):
        return JensenAuditor(f, E, Psi, S, cfg, transformed=True, strict=kind == "sluep-strict")
    if kind == "ssluep":
        return JensenAuditor(f, E, Psi, S, cfg, transformed=False)
    if kind == "psluep":
        return PseudoAuditor(f, E, Psi, S, cfg, phi)
    if kind == "weakly-sei":
        return FirstOrderAuditor(f, E, Psi, S, cfg, endpointwise=True)
    if kind == "sluei":
        return FirstOrderAuditor(f, E, Psi, S, cfg, endpointwise=False)
    if kind == "condition-a":
        return ConditionAAuditor(E, Psi, S, cfg)
    if kind == "epi-gsei":
        if E0 is None:
            raise ValueError("the epigraph audit needs an E0 interval map")
        return EpigraphAuditor(f, E, Psi, E0, S, cfg)
    raise ValueError(f"unknown audit class {kind!r}")


def replay(auditor: _Auditor, zeta: Sequence[float], delta: Sequence[float], alpha: float, lam: float, **cols) -> tuple:
    """Recompute both sides at one tuple: returns (Witness, violated)."""
    zeta = tuple(float(x) for x in zeta)
    delta = tuple(float(x) for x in delta)
    return auditor.replay(zeta, delta, float(alpha), float(lam), cols)
