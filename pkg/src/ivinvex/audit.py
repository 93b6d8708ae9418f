"""Sampling configuration, verdicts and the deterministic block sampler.

Every audit draws its inputs in fixed-size blocks. Block ``b`` owns the
generator ``PCG64(SeedSequence(seed, spawn_key=(stream, b)))`` so the sample
sequence depends only on the seed and the configuration, never on how many
worker threads evaluate the blocks.
"""
from __future__ import annotations

import math
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from . import expr as ex

SEMANTICS = ("direct", "composite")

# Streams keep independent random sequences apart. Tuple audits share the
# point stream so different audits see the same (zeta, delta, alpha, lambda).
POINT_STREAM = 0
EXTRA_STREAM = 1
SINGLE_STREAM = 2


class SamplingExhausted(RuntimeError):
    pass


# --------------------------------------------------------------------------- sets


@dataclass(frozen=True)
class Box:
    """Axis-aligned box; bounds may be infinite when used as a domain."""

    lo: tuple
    hi: tuple

    def __post_init__(self):
        lo = tuple(float(x) for x in self.lo)
        hi = tuple(float(x) for x in self.hi)
        if len(lo) != len(hi) or not lo:
            raise ValueError("box bounds must be non-empty and of equal length")
        for a, b in zip(lo, hi):
            if math.isnan(a) or math.isnan(b):
                raise ValueError("box bounds cannot be NaN")
            if a > b:
                raise ValueError(f"box lower bound {a} exceeds upper bound {b}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def of(cls, bounds: Sequence[Sequence[float]]) -> "Box":
        return cls(tuple(b[0] for b in bounds), tuple(b[1] for b in bounds))

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def finite(self) -> bool:
        return all(math.isfinite(x) for x in self.lo + self.hi)

    @property
    def diagonal(self) -> float:
        return math.sqrt(sum((b - a) ** 2 for a, b in zip(self.lo, self.hi)))

    def contains(self, point: Sequence[float], tol: float = 0.0) -> bool:
        return all(a - tol <= x <= b + tol for a, x, b in zip(self.lo, point, self.hi))

    def excess(self, points: np.ndarray) -> np.ndarray:
        """Per-row distance outside the box in the max norm (<= 0 inside)."""
        lo = np.asarray(self.lo)
        hi = np.asarray(self.hi)
        with np.errstate(invalid="ignore"):
            out = np.maximum(lo - points, points - hi)
        return out.max(axis=1)

    def intersect(self, other: "Box") -> "Box":
        lo = tuple(max(a, b) for a, b in zip(self.lo, other.lo))
        hi = tuple(min(a, b) for a, b in zip(self.hi, other.hi))
        if any(a > b for a, b in zip(lo, hi)):
            raise ValueError("boxes do not intersect")
        return Box(lo, hi)

    def around(self, center: Sequence[float], radius: float) -> "Box":
        ball = Box(tuple(c - radius for c in center), tuple(c + radius for c in center))
        return self.intersect(ball)

    def sample(self, rng: np.random.Generator, k: int) -> np.ndarray:
        if not self.finite:
            raise ValueError("cannot sample from an unbounded box")
        lo = np.asarray(self.lo)
        hi = np.asarray(self.hi)
        return lo + (hi - lo) * rng.random((k, self.dim))

    def to_list(self) -> list:
        return [[a, b] for a, b in zip(self.lo, self.hi)]


def variables(dim: int, prefix: str = "z") -> tuple:
    return tuple(f"{prefix}{i + 1}" for i in range(dim))


def point_env(points: np.ndarray, names: Sequence[str]) -> dict:
    return {name: points[:, i] for i, name in enumerate(names)}


@dataclass(frozen=True)
class SetSpec:
    """A subset of R^n: ``domain`` bounds plus ``g(z) <= 0`` constraints, sampled inside ``box``."""

    box: Box
    domain: Optional[Box] = None
    constraints: tuple = ()

    def __post_init__(self):
        if not self.box.finite:
            raise ValueError("the sampling box must be bounded")
        if self.domain is None:
            object.__setattr__(self, "domain", self.box)
        if self.domain.dim != self.box.dim:
            raise ValueError("domain and sampling box dimensions differ")

    @property
    def dim(self) -> int:
        return self.box.dim

    def violation(self, points: np.ndarray) -> tuple:
        """(amount outside the set per row, rows where a constraint could not be evaluated)."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        m = points.shape[0]
        amount = self.domain.excess(points)
        bad = np.zeros(m, dtype=bool)
        if self.constraints:
            env = point_env(points, variables(self.dim))
            for g in self.constraints:
                vals, gbad = ex.compile_batch(g)(env, m)
                bad |= gbad
                amount = np.maximum(amount, np.where(gbad, 0.0, vals))
        return amount, bad

    def contains(self, point: Sequence[float], tol: float = 0.0) -> bool:
        if not self.domain.contains(point, tol):
            return False
        binding = dict(zip(variables(self.dim), point))
        for g in self.constraints:
            try:
                if ex.evaluate(g, binding) > tol:
                    return False
            except ex.DomainError:
                return False
        return True

    def sample(self, rng: np.random.Generator, k: int, max_rejection: int = 100) -> np.ndarray:
        """``k`` uniform draws from the box that land in the set, by rejection."""
        out = []
        have = 0
        drawn = 0
        budget = max_rejection * k
        while have < k:
            if drawn >= budget:
                raise SamplingExhausted(
                    f"accepted {have} of {k} points after {drawn} draws (rejection limit {max_rejection}x)"
                )
            batch = min(max(2 * (k - have), 64), budget - drawn)
            cand = self.box.sample(rng, batch)
            drawn += batch
            amount, bad = self.violation(cand)
            keep = cand[(amount <= 0) & ~bad]
            out.append(keep)
            have += keep.shape[0]
        return np.concatenate(out)[:k]


# --------------------------------------------------------------------------- configuration


def _grid(values) -> tuple:
    return tuple(float(v) for v in values)


@dataclass(frozen=True)
class AuditConfig:
    samples: int = 10_000
    seed: int = 42
    tol: float = 1e-9
    alpha_grid: tuple = (0.0, 0.25, 0.5, 0.75, 1.0)
    lambda_grid: tuple = (0.0, 0.25, 0.5, 0.75, 1.0)
    # extra (alpha, lambda) pairs drawn uniformly over the grids' ranges, per point pair
    random_draws: int = 2
    gradient_semantics: str = "composite"
    workers: int = 1
    block_size: int = 128
    max_rejection: int = 100
    strict_separation: float = 1e-3
    epigraph_offsets: tuple = (0.0, 0.5, 1.0, 2.0)
    interval_range: tuple = (-10.0, 10.0)
    nonsmooth_retries: int = 3
    kink_radius: float = 1e-8
    perturbation: float = 1e-7

    def __post_init__(self):
        object.__setattr__(self, "alpha_grid", _grid(self.alpha_grid))
        object.__setattr__(self, "lambda_grid", _grid(self.lambda_grid))
        object.__setattr__(self, "epigraph_offsets", _grid(self.epigraph_offsets))
        object.__setattr__(self, "interval_range", _grid(self.interval_range))
        if self.samples < 1:
            raise ValueError("samples must be positive")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.workers < 1 or self.block_size < 1:
            raise ValueError("workers and block_size must be positive")
        if self.random_draws < 0:
            raise ValueError("random_draws cannot be negative")
        for name in ("alpha_grid", "lambda_grid"):
            g = getattr(self, name)
            if not g or any(not 0.0 <= v <= 1.0 for v in g):
                raise ValueError(f"{name} must be a non-empty subset of [0, 1]")
        if any(t < 0 for t in self.epigraph_offsets) or not self.epigraph_offsets:
            raise ValueError("epigraph offsets must be non-negative")
        if self.gradient_semantics not in SEMANTICS:
            raise ValueError(f"gradient_semantics must be one of {SEMANTICS}")

    @property
    def grid_pairs(self) -> list:
        return [(a, l) for a in self.alpha_grid for l in self.lambda_grid]

    @property
    def slots_per_pair(self) -> int:
        return len(self.grid_pairs) + self.random_draws

    def to_dict(self, include_workers: bool = True) -> dict:
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        if not include_workers:
            d.pop("workers")
        return d


# --------------------------------------------------------------------------- verdicts


def _plain(x):
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.generic):
        return x.item()
    return x


@dataclass(frozen=True)
class Witness:
    zeta: tuple
    delta: tuple
    alpha: float
    lam: float
    lhs: Optional[tuple]
    rhs: Optional[tuple]
    margin: float
    relation: str
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return _plain(
            {
                "zeta": list(self.zeta),
                "delta": list(self.delta),
                "alpha": self.alpha,
                "lambda": self.lam,
                "lhs": None if self.lhs is None else list(self.lhs),
                "rhs": None if self.rhs is None else list(self.rhs),
                "margin": self.margin,
                "relation": self.relation,
                "extra": self.extra,
            }
        )


HOLDS, FAILS, NOT_CHECKABLE = "holds", "fails", "not-checkable"


@dataclass(frozen=True)
class Verdict:
    """Outcome of one audit. ``holds`` means no counterexample among the checked samples."""

    outcome: str
    samples: int
    witness: Optional[Witness] = None
    reason: Optional[str] = None
    stats: dict = field(default_factory=dict)

    @property
    def holds(self) -> bool:
        return self.outcome == HOLDS

    @property
    def fails(self) -> bool:
        return self.outcome == FAILS

    @property
    def exit_code(self) -> int:
        return {HOLDS: 0, FAILS: 1, NOT_CHECKABLE: 3}[self.outcome]

    def to_dict(self) -> dict:
        return _plain(
            {
                "outcome": self.outcome,
                "samples": self.samples,
                "witness": None if self.witness is None else self.witness.to_dict(),
                "reason": self.reason,
                "stats": dict(sorted(self.stats.items())),
            }
        )


# --------------------------------------------------------------------------- block engine


def block_rng(seed: int, stream: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(stream, block))))


def run_blocks(n_blocks: int, fn: Callable[[int], object], workers: int) -> list:
    """Evaluate ``fn`` on every block index; results come back in block order."""
    if workers <= 1 or n_blocks <= 1:
        return [fn(b) for b in range(n_blocks)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(n_blocks)))


@dataclass
class TupleBatch:
    """Sampled (zeta, delta, alpha, lambda) tuples with their global indices."""

    index: np.ndarray
    zeta: np.ndarray
    delta: np.ndarray
    alpha: np.ndarray
    lam: np.ndarray
    rng: Optional[np.random.Generator] = None

    def __len__(self):
        return self.index.shape[0]


def tuple_layout(cfg: AuditConfig) -> tuple:
    """(number of point pairs, number of blocks)."""
    pairs = -(-cfg.samples // cfg.slots_per_pair)
    return pairs, -(-pairs // cfg.block_size)


def block_tuples(S: SetSpec, cfg: AuditConfig, block: int) -> TupleBatch:
    pairs, _ = tuple_layout(cfg)
    start = block * cfg.block_size
    count = min(cfg.block_size, pairs - start)
    rng = block_rng(cfg.seed, POINT_STREAM, block)
    pts = S.sample(rng, 2 * count, cfg.max_rejection)
    zeta, delta = pts[:count], pts[count:]
    grid = np.array(cfg.grid_pairs, dtype=float).reshape(-1, 2)
    r = cfg.random_draws
    ra = rng.uniform(min(cfg.alpha_grid), max(cfg.alpha_grid), (count, r))
    rl = rng.uniform(min(cfg.lambda_grid), max(cfg.lambda_grid), (count, r))
    alpha = np.concatenate([np.broadcast_to(grid[:, 0], (count, grid.shape[0])), ra], axis=1)
    lam = np.concatenate([np.broadcast_to(grid[:, 1], (count, grid.shape[0])), rl], axis=1)
    g = cfg.slots_per_pair
    index = ((start + np.arange(count))[:, None] * g + np.arange(g)[None, :]).ravel()
    keep = index < cfg.samples
    return TupleBatch(
        index=index[keep],
        zeta=np.repeat(zeta, g, axis=0)[keep],
        delta=np.repeat(delta, g, axis=0)[keep],
        alpha=alpha.ravel()[keep],
        lam=lam.ravel()[keep],
        rng=block_rng(cfg.seed, EXTRA_STREAM, block),
    )


def draw_tuples(S: SetSpec, cfg: AuditConfig) -> TupleBatch:
    """All tuples an audit with this configuration would check, in index order."""
    _, n_blocks = tuple_layout(cfg)
    parts = run_blocks(n_blocks, lambda b: block_tuples(S, cfg, b), cfg.workers)
    return TupleBatch(
        index=np.concatenate([p.index for p in parts]),
        zeta=np.concatenate([p.zeta for p in parts]),
        delta=np.concatenate([p.delta for p in parts]),
        alpha=np.concatenate([p.alpha for p in parts]),
        lam=np.concatenate([p.lam for p in parts]),
    )


@dataclass
class BlockResult:
    """What a check reports for one block of tuples.

    ``violated`` marks candidate counterexamples; ``skipped`` maps a reason to
    a mask of tuples that were not checked. ``columns`` carries per-tuple data
    that the scalar replay needs (perturbed delta, sampled offsets, ...).
    """

    violated: np.ndarray
    skipped: dict = field(default_factory=dict)
    counts: Counter = field(default_factory=Counter)
    columns: dict = field(default_factory=dict)


Replay = Callable[..., tuple]  # (zeta, delta, alpha, lam, columns) -> (Witness, violated)


def run_tuple_audit(
    S: SetSpec,
    cfg: AuditConfig,
    check_block: Callable[[TupleBatch], BlockResult],
    replay: Replay,
    extra_stats: Optional[Mapping] = None,
) -> Verdict:
    """Evaluate a check over every sampled tuple and confirm the first violation by scalar replay."""
    _, n_blocks = tuple_layout(cfg)

    def one(block):
        try:
            batch = block_tuples(S, cfg, block)
        except SamplingExhausted as exc:
            return exc
        return batch, check_block(batch)

    results = run_blocks(n_blocks, one, cfg.workers)
    for r in results:
        if isinstance(r, SamplingExhausted):
            return Verdict(NOT_CHECKABLE, 0, reason=f"could not sample the set: {r}")

    stats = Counter()
    checked = 0
    total = 0
    unconfirmed = 0
    witness = None
    for batch, res in results:
        m = len(batch)
        total += m
        skip = np.zeros(m, dtype=bool)
        for reason, mask in res.skipped.items():
            stats[f"skipped_{reason}"] += int(mask.sum())
            skip |= mask
        stats.update(res.counts)
        viol = res.violated & ~skip
        checked += int((~skip).sum())
        stats["violations"] += int(viol.sum())
        if witness is not None:
            continue
        for i in np.flatnonzero(viol):
            cols = {k: v[i] for k, v in res.columns.items()}
            delta = cols.pop("delta", batch.delta[i])
            try:
                w, bad = replay(tuple(batch.zeta[i]), tuple(np.atleast_1d(delta)), float(batch.alpha[i]), float(batch.lam[i]), cols)
            except (ex.DomainError, ArithmeticError, ValueError):
                bad = False
            if bad:
                witness = _with_index(w, int(batch.index[i]))
                break
            unconfirmed += 1
    stats["tuples"] = total
    if unconfirmed:
        stats["unconfirmed_candidates"] = unconfirmed
    stats = dict(stats)
    if extra_stats:
        stats.update(extra_stats)
    if witness is not None:
        return Verdict(FAILS, checked, witness=witness, stats=stats)
    return Verdict(HOLDS, checked, stats=stats)


def _with_index(w: Witness, index: int) -> Witness:
    extra = dict(w.extra)
    extra["sample_index"] = index
    return Witness(w.zeta, w.delta, w.alpha, w.lam, w.lhs, w.rhs, w.margin, w.relation, extra)
