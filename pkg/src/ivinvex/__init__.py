"""Interval arithmetic, invexity auditors and KKT checks for interval-valued programs."""

__version__ = "0.1.0"

from .interval import Interval, gh_diff, gh_product, hausdorff, lu_leq, lu_lt
from .audit import AuditConfig, Box, SetSpec, Verdict, Witness
from .ivf import IVFn, IntervalMap, VectorMap, gradient_pair, gh_gradient_product

__all__ = [
    "Interval",
    "gh_diff",
    "gh_product",
    "hausdorff",
    "lu_leq",
    "lu_lt",
    "AuditConfig",
    "Box",
    "SetSpec",
    "Verdict",
    "Witness",
    "IVFn",
    "IntervalMap",
    "VectorMap",
    "gradient_pair",
    "gh_gradient_product",
]
