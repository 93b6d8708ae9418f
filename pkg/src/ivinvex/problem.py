"""Loading and validating JSON problem files."""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import jsonschema

from . import expr as ex
from .audit import AuditConfig, Box, SetSpec, variables
from .ivf import IntervalMap, IVFn, VectorMap, psi_names
from .optprog import Problem

# A sampled load-time check of endpoint order uses this many points.
LOAD_CHECK_SAMPLES = 1000


class ProblemError(ValueError):
    """The problem file is malformed or inconsistent."""


def _schema(name: str) -> dict:
    return json.loads(resources.files("ivinvex.schemas").joinpath(name).read_text(encoding="utf-8"))


def fixture_names() -> list:
    return sorted(p.name[:-5] for p in resources.files("ivinvex.data").iterdir() if p.name.endswith(".json"))


def resolve(path_or_name: str) -> Path:
    """A file path, or the name of a bundled fixture such as ``abs_map``."""
    p = Path(path_or_name)
    if p.exists():
        return p
    stem = p.name[:-5] if p.name.endswith(".json") else p.name
    bundled = resources.files("ivinvex.data").joinpath(stem + ".json")
    if bundled.is_file():
        return Path(str(bundled))
    raise ProblemError(f"no such problem file or bundled fixture: {path_or_name}")


@dataclass(frozen=True)
class ProblemFile:
    name: str
    dim: int
    f: IVFn
    E: VectorMap
    Psi: VectorMap
    S: SetSpec
    form: str = "ivop"
    E0: Optional[IntervalMap] = None
    phi: Optional[IntervalMap] = None
    Phi: Optional[VectorMap] = None
    real_constraints: tuple = ()
    interval_constraints: tuple = ()
    constraint_names: tuple = ()
    audit: dict = field(default_factory=dict)
    sha256: str = ""
    path: str = ""

    def config(self, **overrides) -> AuditConfig:
        d = {}
        a = self.audit
        for key in ("samples", "seed", "tol", "alpha_grid", "lambda_grid", "random_draws", "epigraph_offsets"):
            if key in a:
                d[key] = a[key]
        if "grad" in a:
            d["gradient_semantics"] = a["grad"]
        d.update({k: v for k, v in overrides.items() if v is not None})
        return AuditConfig(**d)

    def problem(self, gradient_semantics: Optional[str] = None) -> Problem:
        return Problem(
            objective=self.f,
            E=self.E,
            Psi=self.Psi,
            S=self.S,
            real_constraints=self.real_constraints,
            interval_constraints=self.interval_constraints,
            form=self.form,
            gradient_semantics=gradient_semantics or self.audit.get("grad", "composite"),
            constraint_names=self.constraint_names,
        )


def _bound(x) -> float:
    try:
        v = ex.const_value(x)
    except (ex.ExprError, ex.DomainError) as exc:
        raise ProblemError(f"bad bound {x!r}: {exc}") from None
    if math.isnan(v):
        raise ProblemError(f"bad bound {x!r}")
    return v


def _box(rows, dim, what) -> Box:
    if len(rows) != dim:
        raise ProblemError(f"{what} has {len(rows)} rows but the dimension is {dim}")
    try:
        return Box(tuple(_bound(r[0]) for r in rows), tuple(_bound(r[1]) for r in rows))
    except ValueError as exc:
        raise ProblemError(f"{what}: {exc}") from None


def _parse(text, names, where):
    try:
        return ex.parse(text, names)
    except ex.ExprError as exc:
        raise ProblemError(f"{where}: {exc}") from None


def parse_document(doc: dict, source: str = "<document>", digest: str = "") -> ProblemFile:
    try:
        jsonschema.validate(doc, _schema("problem.schema.json"))
    except jsonschema.ValidationError as exc:
        loc = "/".join(str(p) for p in exc.absolute_path) or "top level"
        raise ProblemError(f"{source}: schema violation at {loc}: {exc.message}") from None
    dim = doc["dimension"]
    zs = variables(dim)
    fn = doc["functions"]
    domain = _box(doc["domain"], dim, "domain")
    box = _box(doc.get("sample_box", doc["domain"]), dim, "sample_box")
    if not box.finite:
        raise ProblemError("sample_box must be bounded; give one explicitly when the domain is unbounded")
    f = IVFn(_parse(fn["hL"], zs, "hL"), _parse(fn["hU"], zs, "hU"), dim, domain)
    maps = doc["maps"]
    if len(maps["E"]) != dim or len(maps["Psi"]) != dim:
        raise ProblemError(f"E and Psi need {dim} component(s) each")
    E = VectorMap(tuple(_parse(t, zs, f"E[{i}]") for i, t in enumerate(maps["E"])), zs)
    pn = psi_names(dim)
    Psi = VectorMap(tuple(_parse(t, pn, f"Psi[{i}]") for i, t in enumerate(maps["Psi"])), pn)
    E0 = phi = Phi = None
    if "E0" in maps:
        E0 = IntervalMap(_parse(maps["E0"]["lo"], IntervalMap.NAMES, "E0.lo"), _parse(maps["E0"]["hi"], IntervalMap.NAMES, "E0.hi"))
    if "phi" in maps:
        phi = IntervalMap(_parse(maps["phi"]["lo"], IntervalMap.NAMES, "phi.lo"), _parse(maps["phi"]["hi"], IntervalMap.NAMES, "phi.hi"))
    if "Phi" in maps:
        Phi = VectorMap((_parse(maps["Phi"]["lo"], pn, "Phi.lo"), _parse(maps["Phi"]["hi"], pn, "Phi.hi")), pn)
    set_cons = tuple(_parse(t, zs, f"set_constraints[{i}]") for i, t in enumerate(doc.get("set_constraints", [])))
    S = SetSpec(box, domain, set_cons)
    real, interval, names = [], [], []
    for i, c in enumerate(doc.get("constraints", [])):
        name = c.get("name", f"{'g' if c['kind'] == 'real' else 'c'}{i + 1}")
        names.append(name)
        if c["kind"] == "real":
            if "expr" not in c:
                raise ProblemError(f"constraint {name}: a real constraint needs 'expr'")
            real.append(_parse(c["expr"], zs, f"constraint {name}"))
        else:
            if "lo" not in c or "hi" not in c:
                raise ProblemError(f"constraint {name}: an interval constraint needs 'lo' and 'hi'")
            interval.append(IVFn(_parse(c["lo"], zs, f"constraint {name}"), _parse(c["hi"], zs, f"constraint {name}"), dim, domain))
    form = doc.get("form", "ivop")
    if form == "ivop" and interval:
        raise ProblemError("the ivop form takes real constraints only")
    if form == "P" and real:
        raise ProblemError("form P takes interval constraints only")
    pf = ProblemFile(
        name=doc.get("name", Path(source).stem),
        dim=dim,
        f=f,
        E=E,
        Psi=Psi,
        S=S,
        form=form,
        E0=E0,
        phi=phi,
        Phi=Phi,
        real_constraints=tuple(real),
        interval_constraints=tuple(interval),
        constraint_names=tuple(names),
        audit=dict(doc.get("audit", {})),
        sha256=digest,
        path=source,
    )
    _load_checks(pf)
    return pf


def _load_checks(pf: ProblemFile):
    from .ivf import EndpointOrderViolation

    try:
        pf.f.validate(pf.S.box, LOAD_CHECK_SAMPLES)
        for c in pf.interval_constraints:
            c.validate(pf.S.box, LOAD_CHECK_SAMPLES)
        for m in (pf.E0, pf.phi):
            if m is not None:
                m.validate(LOAD_CHECK_SAMPLES)
    except EndpointOrderViolation as exc:
        raise ProblemError(f"{pf.path}: {exc}") from None


def load(path_or_name: str) -> ProblemFile:
    path = resolve(path_or_name)
    raw = path.read_bytes()
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ProblemError(f"{path}: invalid JSON: {exc}") from None
    return parse_document(doc, str(path_or_name), hashlib.sha256(raw).hexdigest())
