"""Interval-valued functions on R^n built from two endpoint expressions."""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from . import expr as ex
from . import interval as iv
from .audit import (
    FAILS,
    HOLDS,
    SINGLE_STREAM,
    AuditConfig,
    Box,
    Verdict,
    Witness,
    block_rng,
    point_env,
    run_blocks,
    variables,
)
from .interval import Interval


class EndpointOrderViolation(iv.IntervalError):
    """An interval-valued expression produced a lower endpoint above the upper one."""


class NegativeCoefficient(ValueError):
    pass


class EmptyFamily(ValueError):
    pass


# --------------------------------------------------------------------------- maps


@dataclass(frozen=True)
class VectorMap:
    """A map R^k -> R^m given by one expression per output coordinate."""

    exprs: tuple
    names: tuple

    @classmethod
    def parse(cls, texts: Sequence[str], names: Sequence[str]) -> "VectorMap":
        names = tuple(names)
        return cls(tuple(ex.parse(t, names) for t in texts), names)

    @classmethod
    def identity(cls, dim: int) -> "VectorMap":
        names = variables(dim)
        return cls(tuple(ex.Var(n) for n in names), names)

    @property
    def size(self) -> int:
        return len(self.exprs)

    def __call__(self, *points) -> tuple:
        flat = [float(x) for p in points for x in np.atleast_1d(p)]
        if len(flat) != len(self.names):
            raise ValueError(f"expected {len(self.names)} inputs, got {len(flat)}")
        binding = dict(zip(self.names, flat))
        return tuple(ex.evaluate(e, binding) for e in self.exprs)

    def batch(self, *arrays: np.ndarray) -> tuple:
        """Evaluate on row-stacked inputs; returns ((m, size) values, bad rows)."""
        stacked = np.concatenate([np.atleast_2d(a) for a in arrays], axis=1)
        m = stacked.shape[0]
        env = point_env(stacked, self.names)
        out = np.empty((m, self.size))
        bad = np.zeros(m, dtype=bool)
        for j, e in enumerate(self.exprs):
            out[:, j], b = _compiled(e)(env, m)
            bad |= b
        return out, bad

    def texts(self) -> list:
        return [ex.to_text(e) for e in self.exprs]


@lru_cache(maxsize=None)
def _compiled(e):
    return ex.compile_batch(e)


def psi_names(dim: int) -> tuple:
    return variables(dim, "a") + variables(dim, "b")


@dataclass(frozen=True)
class IntervalMap:
    """A map I(R) -> I(R) written with the variables ``lo`` and ``hi``."""

    lo_expr: object
    hi_expr: object

    NAMES = ("lo", "hi")

    @classmethod
    def parse(cls, lo: str, hi: str) -> "IntervalMap":
        return cls(ex.parse(lo, cls.NAMES), ex.parse(hi, cls.NAMES))

    @classmethod
    def identity(cls) -> "IntervalMap":
        return cls(ex.Var("lo"), ex.Var("hi"))

    def __call__(self, a: Interval) -> Interval:
        b = {"lo": a.lo, "hi": a.hi}
        lo, hi = ex.evaluate(self.lo_expr, b), ex.evaluate(self.hi_expr, b)
        if lo > hi:
            raise EndpointOrderViolation(f"map sends {a!r} to [{lo}, {hi}]")
        return Interval(lo, hi)

    def batch(self, lo: np.ndarray, hi: np.ndarray) -> tuple:
        m = lo.shape[0]
        env = {"lo": lo, "hi": hi}
        rlo, blo = _compiled(self.lo_expr)(env, m)
        rhi, bhi = _compiled(self.hi_expr)(env, m)
        return rlo, rhi, blo | bhi

    def validate(self, samples: int = 1000, seed: int = 0, span=(-10.0, 10.0)):
        """Sample non-degenerate inputs and reject maps that invert endpoint order."""
        rng = block_rng(seed, SINGLE_STREAM, 0)
        x = rng.uniform(span[0], span[1], (samples, 2))
        lo, hi = x.min(axis=1), x.max(axis=1)
        rlo, rhi, bad = self.batch(lo, hi)
        wrong = np.flatnonzero(~bad & (rlo > rhi))
        if wrong.size:
            i = wrong[0]
            raise EndpointOrderViolation(f"map sends [{float(lo[i])!r}, {float(hi[i])!r}] to [{float(rlo[i])!r}, {float(rhi[i])!r}]")

    def texts(self) -> dict:
        return {"lo": ex.to_text(self.lo_expr), "hi": ex.to_text(self.hi_expr)}


# --------------------------------------------------------------------------- IVFn


@dataclass(frozen=True)
class IVFn:
    hL: object
    hU: object
    dim: int
    domain: Box

    @classmethod
    def parse(cls, lo: str, hi: str, dim: int, domain: Optional[Box] = None) -> "IVFn":
        names = variables(dim)
        if domain is None:
            domain = Box((-math.inf,) * dim, (math.inf,) * dim)
        return cls(ex.parse(lo, names), ex.parse(hi, names), dim, domain)

    @property
    def names(self) -> tuple:
        return variables(self.dim)

    def __call__(self, point: Sequence[float]) -> Interval:
        return eval_ivf(self, point)

    def batch(self, points: np.ndarray) -> tuple:
        """(lo, hi, bad, disordered) for each row of ``points``."""
        points = np.atleast_2d(points)
        m = points.shape[0]
        env = point_env(points, self.names)
        lo, blo = _compiled(self.hL)(env, m)
        hi, bhi = _compiled(self.hU)(env, m)
        bad = blo | bhi
        with np.errstate(invalid="ignore"):
            disordered = ~bad & (lo > hi)
        return lo, hi, bad, disordered

    def validate(self, box: Box, samples: int = 1000, seed: int = 0):
        """Load-time check that the lower endpoint never exceeds the upper one on ``box``."""
        pts = box.sample(block_rng(seed, SINGLE_STREAM, 0), samples)
        lo, hi, _, disordered = self.batch(pts)
        wrong = np.flatnonzero(disordered)
        if wrong.size:
            i = wrong[0]
            raise EndpointOrderViolation(f"endpoint order broken: h^L = {float(lo[i])!r} > h^U = {float(hi[i])!r} at {[float(x) for x in pts[i]]}")

    def texts(self) -> dict:
        return {"hL": ex.to_text(self.hL), "hU": ex.to_text(self.hU)}


def eval_ivf(f: IVFn, point: Sequence[float]) -> Interval:
    point = tuple(float(x) for x in np.atleast_1d(point))
    if len(point) != f.dim:
        raise ValueError(f"expected a point of dimension {f.dim}, got {len(point)}")
    b = dict(zip(f.names, point))
    lo, hi = ex.evaluate(f.hL, b), ex.evaluate(f.hU, b)
    if lo > hi:
        raise EndpointOrderViolation(f"endpoint order broken: h^L = {lo!r} > h^U = {hi!r} at {[float(x) for x in point]}")
    return Interval(lo, hi)


def compose_inner(f: IVFn, E: VectorMap) -> IVFn:
    """The function zeta -> f(E(zeta)) as a new IVFn."""
    mapping = dict(zip(f.names, E.exprs))
    return IVFn(ex.substitute(f.hL, mapping), ex.substitute(f.hU, mapping), f.dim, f.domain)


# --------------------------------------------------------------------------- gradients


@dataclass(frozen=True)
class GradientPair:
    gL: tuple
    gU: tuple
    smooth: tuple
    path: str = "symbolic"

    def as_intervals(self) -> list:
        return [Interval(min(a, b), max(a, b)) for a, b in zip(self.gL, self.gU)]


class GradientField:
    """Compiled endpoint gradients for one choice of semantics.

    ``direct`` differentiates h^L, h^U themselves; ``composite`` differentiates
    zeta -> h^{L/U}(E(zeta)).
    """

    def __init__(self, f: IVFn, semantics: str = "composite", E: Optional[VectorMap] = None):
        if semantics not in ("direct", "composite"):
            raise ValueError(f"unknown gradient semantics {semantics!r}")
        if semantics == "composite":
            if E is None:
                raise ValueError("composite gradients need the map E")
            f = compose_inner(f, E)
        self.f = f
        self.semantics = semantics
        names = f.names
        dL = [ex.diff(f.hL, v) for v in names]
        dU = [ex.diff(f.hU, v) for v in names]
        self.exprs_L = tuple(d.expr for d in dL)
        self.exprs_U = tuple(d.expr for d in dU)
        self.smooth = tuple(a.smooth and b.smooth for a, b in zip(dL, dU))
        self.kinks = ex.kinks(f.hL, names) + ex.kinks(f.hU, names)

    def kink_distance(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(points)
        if not self.kinks:
            return np.full(points.shape[0], np.inf)
        return ex.kink_distance_batch(self.kinks, point_env(points, self.f.names), points.shape[0])

    def batch(self, points: np.ndarray) -> tuple:
        """((m, n) gL, (m, n) gU, bad rows) by the symbolic path."""
        points = np.atleast_2d(points)
        m, n = points.shape
        env = point_env(points, self.f.names)
        gL = np.empty((m, n))
        gU = np.empty((m, n))
        bad = np.zeros(m, dtype=bool)
        for j in range(n):
            gL[:, j], b1 = _compiled(self.exprs_L[j])(env, m)
            gU[:, j], b2 = _compiled(self.exprs_U[j])(env, m)
            bad |= b1 | b2
        return gL, gU, bad

    def symbolic(self, point: Sequence[float]) -> GradientPair:
        b = dict(zip(self.f.names, point))
        gL = tuple(ex.evaluate(e, b) for e in self.exprs_L)
        gU = tuple(ex.evaluate(e, b) for e in self.exprs_U)
        return GradientPair(gL, gU, self.smooth, "symbolic")

    def finite_difference(self, point: Sequence[float]) -> GradientPair:
        gL, gU = [], []
        names = self.f.names
        for j in range(len(point)):
            step = 1e-6 * max(1.0, abs(point[j]))
            up = list(point)
            dn = list(point)
            up[j] += step
            dn[j] -= step
            bu, bd = dict(zip(names, up)), dict(zip(names, dn))
            gL.append((ex.evaluate(self.f.hL, bu) - ex.evaluate(self.f.hL, bd)) / (2 * step))
            gU.append((ex.evaluate(self.f.hU, bu) - ex.evaluate(self.f.hU, bd)) / (2 * step))
        return GradientPair(tuple(gL), tuple(gU), self.smooth, "finite-difference")

    def at(self, point: Sequence[float], kink_radius: float = 1e-8) -> GradientPair:
        """Symbolic gradient, or central differences within ``kink_radius`` of a kink."""
        point = tuple(float(x) for x in np.atleast_1d(point))
        if self.kinks and ex.kink_distance(self.kinks, dict(zip(self.f.names, point))) < kink_radius:
            return self.finite_difference(point)
        return self.symbolic(point)


@lru_cache(maxsize=64)
def gradient_field(f: IVFn, semantics: str = "composite", E: Optional[VectorMap] = None) -> GradientField:
    return GradientField(f, semantics, E if semantics == "composite" else None)


def gradient_pair(f: IVFn, point, semantics: str = "composite", E: Optional[VectorMap] = None) -> GradientPair:
    """Endpoint gradients at ``point``.

    With ``direct`` semantics the gradients of h^L, h^U are evaluated at
    ``point`` itself; callers wanting them at E(delta) pass E(delta).
    """
    return gradient_field(f, semantics, E).at(point)


def gh_gradient_product(v: Sequence[float], g: GradientPair) -> Interval:
    """Closed form of the gH-product of ``v`` with the gradient tuple."""
    if len(v) != len(g.gL):
        raise iv.LengthMismatch(f"vector has length {len(v)} but the gradient has {len(g.gL)} entries")
    a = math.fsum(x * y for x, y in zip(v, g.gL))
    b = math.fsum(x * y for x, y in zip(v, g.gU))
    return Interval(a, b) if a <= b else Interval(b, a)


# --------------------------------------------------------------------------- gH-derivative


@dataclass(frozen=True)
class DerivativeCheck:
    point: float
    steps: tuple
    right: tuple  # quotient intervals for t > 0
    left: tuple  # quotient intervals for t < 0
    converged: bool
    limit: Optional[Interval]
    reference: Optional[Interval]
    matches_reference: Optional[bool]
    endpoint_derivatives: bool
    rate: Optional[float]

    @property
    def status(self) -> str:
        if not self.converged:
            return "non-convergent"
        if self.reference is None:
            return "converged-without-reference"
        return "converged" if self.matches_reference else "converged-to-other-value"


def gh_derivative_check(
    f: IVFn,
    z0: float,
    steps: Sequence[float] = (1e-2, 1e-3, 1e-4, 1e-5, 1e-6),
    tol: float = 1e-4,
) -> DerivativeCheck:
    """Compare gH difference quotients of a one-variable IVF with the closed-form derivative."""
    if f.dim != 1:
        raise ValueError("gH-derivative check needs a function of one variable")
    base = f((z0,))

    def quotient(t):
        return iv.scalar_mul(1.0 / t, iv.gh_diff(f((z0 + t,)), base))

    right = tuple(quotient(t) for t in steps)
    left = tuple(quotient(-t) for t in steps)

    def settled(qs):
        return len(qs) >= 2 and iv.hausdorff(qs[-1], qs[-2]) < tol

    converged = settled(right) and settled(left) and iv.hausdorff(right[-1], left[-1]) < tol
    limit = right[-1] if converged else None

    field_ = gradient_field(f, "direct")
    smooth_here = not field_.kinks or ex.kink_distance(field_.kinks, {"z1": z0}) >= 1e-8
    reference = None
    if smooth_here:
        g = field_.symbolic((z0,))
        reference = gh_gradient_product((1.0,), g)
    matches = None if reference is None or limit is None else iv.hausdorff(limit, reference) < tol
    rate = None
    if reference is not None:
        errs = [iv.hausdorff(q, reference) for q in right]
        usable = [(t, e) for t, e in zip(steps, errs) if e > 1e-13]
        if len(usable) >= 2:
            (t1, e1), (t2, e2) = usable[0], usable[1]
            rate = math.log(e1 / e2) / math.log(t1 / t2)
    return DerivativeCheck(
        point=float(z0),
        steps=tuple(steps),
        right=right,
        left=left,
        converged=converged,
        limit=limit,
        reference=reference,
        matches_reference=matches,
        endpoint_derivatives=smooth_here,
        rate=rate,
    )


# --------------------------------------------------------------------------- constructors


def nonneg_combination(fs: Sequence[IVFn], nus: Sequence[float]) -> IVFn:
    """Endpointwise sum of ``nu_j * f_j`` with every ``nu_j >= 0``."""
    if not fs:
        raise EmptyFamily("no functions to combine")
    if len(fs) != len(nus):
        raise iv.LengthMismatch("one coefficient per function is required")
    if any(nu < 0 for nu in nus):
        raise NegativeCoefficient(f"coefficients must be non-negative, got {list(nus)}")
    dim = fs[0].dim
    if any(f.dim != dim for f in fs):
        raise ValueError("functions have different dimensions")
    lo, hi = ex.ZERO, ex.ZERO
    for f, nu in zip(fs, nus):
        c = ex.Num(float(nu))
        lo = ex.mk_add(lo, ex.mk_mul(c, f.hL))
        hi = ex.mk_add(hi, ex.mk_mul(c, f.hU))
    return IVFn(lo, hi, dim, fs[0].domain)


def sup_family(fs: Sequence[IVFn]) -> IVFn:
    """Pointwise least upper bound under the LU order."""
    if not fs:
        raise EmptyFamily("supremum of an empty family")
    dim = fs[0].dim
    if any(f.dim != dim for f in fs):
        raise ValueError("functions have different dimensions")
    if len(fs) == 1:
        return fs[0]
    return IVFn(
        ex.Call("max", tuple(f.hL for f in fs)),
        ex.Call("max", tuple(f.hU for f in fs)),
        dim,
        fs[0].domain,
    )


def compose_outer(phi: IntervalMap, f: IVFn, validate: bool = True) -> IVFn:
    """zeta -> phi(f(zeta)); ``phi`` is first checked for endpoint order by sampling."""
    if validate:
        phi.validate()
    mapping = {"lo": f.hL, "hi": f.hU}
    return IVFn(ex.substitute(phi.lo_expr, mapping), ex.substitute(phi.hi_expr, mapping), f.dim, f.domain)


# --------------------------------------------------------------------------- interval-map predicates

_MAP_BLOCK = 1024


def _sample_intervals(rng, k, span):
    x = rng.uniform(span[0], span[1], (k, 2))
    return x.min(axis=1), x.max(axis=1)


def _map_audit(cfg: AuditConfig, block_fn, replay) -> Verdict:
    n_blocks = -(-cfg.samples // _MAP_BLOCK)

    def one(b):
        count = min(_MAP_BLOCK, cfg.samples - b * _MAP_BLOCK)
        return block_fn(block_rng(cfg.seed, SINGLE_STREAM, b), count)

    results = run_blocks(n_blocks, one, cfg.workers)
    stats = Counter()
    checked = 0
    witness = None
    for b, (viol, bad, data) in enumerate(results):
        stats["skipped_domain"] += int(bad.sum())
        stats["violations"] += int((viol & ~bad).sum())
        checked += int((~bad).sum())
        if witness is None:
            for i in np.flatnonzero(viol & ~bad):
                try:
                    w, confirmed = replay(*(col[i] for col in data))
                except (ex.DomainError, ValueError):
                    continue
                if confirmed:
                    extra = dict(w.extra, sample_index=b * _MAP_BLOCK + int(i))
                    witness = Witness(w.zeta, w.delta, w.alpha, w.lam, w.lhs, w.rhs, w.margin, w.relation, extra)
                    break
    stats["tuples"] = cfg.samples
    if witness is not None:
        return Verdict(FAILS, checked, witness=witness, stats=dict(stats))
    return Verdict(HOLDS, checked, stats=dict(stats))


def is_lu_nondecreasing(phi: IntervalMap, cfg: AuditConfig = AuditConfig()) -> Verdict:
    """Sample pairs I1 <= I2 and look for phi(I1) not <= phi(I2)."""
    span = cfg.interval_range
    width = span[1] - span[0]

    def block(rng, k):
        lo1, hi1 = _sample_intervals(rng, k, span)
        shift = rng.uniform(0.0, width, (k, 2))
        # every fourth pair keeps one endpoint fixed to probe the boundary of the order
        shift[::4, 0] = 0.0
        lo2, hi2 = lo1 + shift[:, 0], hi1 + shift[:, 1]
        a_lo, a_hi, b1 = phi.batch(lo1, hi1)
        c_lo, c_hi, b2 = phi.batch(lo2, hi2)
        bad = b1 | b2 | (a_lo > a_hi) | (c_lo > c_hi)
        margin = np.maximum(a_lo - c_lo, a_hi - c_hi)
        return margin > cfg.tol, bad, (lo1, hi1, lo2, hi2)

    def replay(lo1, hi1, lo2, hi2):
        i1, i2 = Interval(lo1, hi1), Interval(lo2, hi2)
        p1, p2 = phi(i1), phi(i2)
        margin = iv.lu_margin(p1, p2)
        w = Witness(
            (lo1, hi1), (lo2, hi2), 0.0, 0.0, (p1.lo, p1.hi), (p2.lo, p2.hi), margin, "⪯",
            {"I1": [lo1, hi1], "I2": [lo2, hi2], "note": "zeta/delta hold the input intervals I1 <= I2"},
        )
        return w, margin > cfg.tol

    return _map_audit(cfg, block, replay)


def is_positively_homogeneous(phi: IntervalMap, cfg: AuditConfig = AuditConfig()) -> Verdict:
    """Sample intervals I and scalars k > 0 and compare phi(k I) with k phi(I)."""
    span = cfg.interval_range

    def block(rng, k):
        lo, hi = _sample_intervals(rng, k, span)
        s = rng.uniform(0.0, 10.0, k)
        s[s == 0] = 1.0
        a_lo, a_hi, b1 = phi.batch(s * lo, s * hi)
        c_lo, c_hi, b2 = phi.batch(lo, hi)
        scale = np.maximum(1.0, np.abs(np.stack([a_lo, a_hi, s * c_lo, s * c_hi])).max(axis=0))
        dev = np.maximum(np.abs(a_lo - s * c_lo), np.abs(a_hi - s * c_hi))
        return dev > cfg.tol * scale, b1 | b2, (lo, hi, s)

    def replay(lo, hi, s):
        base = Interval(lo, hi)
        left = phi(iv.scalar_mul(s, base))
        right = iv.scalar_mul(s, phi(base))
        dev = iv.hausdorff(left, right)
        scale = max(1.0, abs(left.lo), abs(left.hi), abs(right.lo), abs(right.hi))
        w = Witness(
            (lo, hi), (lo, hi), float(s), 0.0, (left.lo, left.hi), (right.lo, right.hi), dev, "=",
            {"I": [lo, hi], "k": float(s), "note": "alpha holds the scalar k"},
        )
        return w, dev > cfg.tol * scale

    return _map_audit(cfg, block, replay)
