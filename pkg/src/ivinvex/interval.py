"""Closed real intervals with the LU partial order and gH arithmetic.

Everything here is exact in the sense that each operation is a closed-form
endpoint formula evaluated once in IEEE double precision. Tolerance policy
belongs to callers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence


class IntervalError(ValueError):
    pass


class OrderViolation(IntervalError):
    """Raised when an interval would have ``lo > hi``."""


class NonFinite(IntervalError):
    pass


class HukuharaUndefined(IntervalError):
    pass


class EmptySet(IntervalError):
    pass


class LengthMismatch(IntervalError):
    pass


@dataclass(frozen=True, slots=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise NonFinite(f"interval endpoints must be finite, got [{self.lo}, {self.hi}]")
        if self.lo > self.hi:
            raise OrderViolation(f"lower endpoint {self.lo} exceeds upper endpoint {self.hi}")

    @classmethod
    def point(cls, x: float) -> "Interval":
        return cls(x, x)

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def __iter__(self):
        yield self.lo
        yield self.hi

    def __add__(self, other: "Interval") -> "Interval":
        return add(self, other)

    def __neg__(self) -> "Interval":
        return neg(self)

    def __sub__(self, other: "Interval") -> "Interval":
        return sub(self, other)

    def __rmul__(self, k: float) -> "Interval":
        return scalar_mul(k, self)

    def __le__(self, other: "Interval") -> bool:
        return lu_leq(self, other)

    def __lt__(self, other: "Interval") -> bool:
        return lu_lt(self, other)

    def __repr__(self):
        return f"[{self.lo!r}, {self.hi!r}]"


ZERO = Interval(0.0, 0.0)


@dataclass(frozen=True, slots=True)
class ExtendedInterval:
    """Interval whose endpoints may be infinite; used for inf/sup sentinels."""

    lo: float
    hi: float

    def __post_init__(self):
        if math.isnan(self.lo) or math.isnan(self.hi):
            raise NonFinite("extended interval endpoints cannot be NaN")
        if self.lo > self.hi:
            raise OrderViolation(f"lower endpoint {self.lo} exceeds upper endpoint {self.hi}")

    def to_interval(self) -> Interval:
        return Interval(self.lo, self.hi)


def make(lo: float, hi: float) -> Interval:
    return Interval(float(lo), float(hi))


def add(a: Interval, b: Interval) -> Interval:
    return Interval(a.lo + b.lo, a.hi + b.hi)


def neg(a: Interval) -> Interval:
    return Interval(-a.hi, -a.lo)


def sub(a: Interval, b: Interval) -> Interval:
    return Interval(a.lo - b.hi, a.hi - b.lo)


def scalar_mul(k: float, a: Interval) -> Interval:
    if not math.isfinite(k):
        raise NonFinite(f"scalar must be finite, got {k}")
    if k >= 0:
        return Interval(k * a.lo, k * a.hi)
    return Interval(k * a.hi, k * a.lo)


def hausdorff(a: Interval, b: Interval) -> float:
    return max(abs(a.lo - b.lo), abs(a.hi - b.hi))


def h_diff(a: Interval, b: Interval) -> Interval:
    """Hukuhara difference; defined only when the endpoint differences stay ordered."""
    lo, hi = a.lo - b.lo, a.hi - b.hi
    if lo > hi:
        raise HukuharaUndefined(f"{a!r} H-minus {b!r} would be [{lo}, {hi}]")
    return Interval(lo, hi)


def gh_diff(a: Interval, b: Interval) -> Interval:
    d_lo, d_hi = a.lo - b.lo, a.hi - b.hi
    return Interval(min(d_lo, d_hi), max(d_lo, d_hi))


def lu_leq(a: Interval, b: Interval) -> bool:
    return a.lo <= b.lo and a.hi <= b.hi


def lu_lt(a: Interval, b: Interval) -> bool:
    return lu_leq(a, b) and (a.lo != b.lo or a.hi != b.hi)


def lu_margin(a: Interval, b: Interval) -> float:
    """Largest amount by which ``a <= b`` fails endpointwise (<= 0 when it holds)."""
    return max(a.lo - b.lo, a.hi - b.hi)


def max_element(items: Sequence[Interval]) -> Optional[Interval]:
    """The member dominating every other member under LU, or None if there is none."""
    items = list(items)
    if not items:
        raise EmptySet("max_element of an empty set")
    best_lo = max(x.lo for x in items)
    best_hi = max(x.hi for x in items)
    for x in items:
        if x.lo == best_lo and x.hi == best_hi:
            return x
    return None


def inf_set(items: Iterable[Interval]) -> ExtendedInterval:
    items = list(items)
    if not items:
        return ExtendedInterval(math.inf, math.inf)
    return ExtendedInterval(min(x.lo for x in items), min(x.hi for x in items))


def sup_set(items: Iterable[Interval]) -> ExtendedInterval:
    items = list(items)
    if not items:
        return ExtendedInterval(-math.inf, -math.inf)
    return ExtendedInterval(max(x.lo for x in items), max(x.hi for x in items))


def weighted_sum(weights: Sequence[float], items: Sequence[Interval]) -> Interval:
    if len(weights) != len(items):
        raise LengthMismatch(f"{len(weights)} weights but {len(items)} intervals")
    parts = [scalar_mul(w, x) for w, x in zip(weights, items)]
    return Interval(math.fsum(p.lo for p in parts), math.fsum(p.hi for p in parts))


def gh_product(v: Sequence[float], intervals: Sequence[Interval]) -> Interval:
    """gH-product of a real vector with a tuple of intervals.

    Coefficients are split by sign (zero counts as nonnegative); the two
    partial sums are closed with a gH-difference.
    """
    if len(v) != len(intervals):
        raise LengthMismatch(f"vector has length {len(v)} but {len(intervals)} intervals given")
    # Both partial sums and their gH-difference are accumulated as one
    # correctly rounded sum per endpoint, so the result does not depend on
    # coordinate order.
    lo_terms, hi_terms = [], []
    for vi, u in zip(v, intervals):
        if vi >= 0:
            lo_terms.append(vi * u.lo)
            hi_terms.append(vi * u.hi)
        else:
            lo_terms.append(-(abs(vi) * u.lo))
            hi_terms.append(-(abs(vi) * u.hi))
    a, b = math.fsum(lo_terms), math.fsum(hi_terms)
    return Interval(min(a, b), max(a, b))
