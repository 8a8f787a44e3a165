"""Declarative case files and the driver that replays them.

A case file is JSON.  It names a construction (a K3 Picard lattice, a
blown-up plane, a ruled or product surface, or nothing), some classes, an
ordered list of checks, an optional two-ray-game or blowup pipeline and a
Hodge chain.  ``run_case`` replays everything and compares with the
recorded expectations.  Printed values known to disagree with the
recomputation are stored as ``flags``: they mark a case as flagged, never
as failed.
"""
from __future__ import annotations

import json
import re
import sys
import time
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Any, Callable, Mapping

from . import k3, surfaces, threefold
from .enumeration import UnboundedRegionError, enum_classes
from .lattice import DivisorClass, Lattice, LatticeError, classify, format_class, is_negative_definite, pair

CONSTRUCTIONS = ("k3_lattice", "del_pezzo_surface", "ruled_surface", "product_surface", "direct")
CASE_ORDER = ("A-1", "A-2", "B-i-1", "B-i-2", "B-i-3", "B-ii", "B-iii-1", "B-iii-2", "B-iii-3", "B-iii-4")
EXPECTED_FIELDS = ("kx3", "kx_dot_c", "z", "h12")


class CaseSchemaError(ValueError):
    """A case file that cannot be turned into a CaseSpec."""

    def __init__(self, message: str, location: str = ""):
        super().__init__(f"{location}: {message}" if location else message)
        self.location = location


# --- class expressions ----------------------------------------------------

_TERM = re.compile(r"\s*([+-])?\s*(?:(\d+)\s*\*?)?\s*([A-Za-z][A-Za-z0-9_']*)\s*")
_ZERO = re.compile(r"\s*0\s*$")


def parse_class(expr: str, names: Mapping[str, DivisorClass], lattice: Lattice) -> DivisorClass:
    """Parse ``"3H - 2Gamma - B"`` style expressions against named classes."""
    if not isinstance(expr, str):
        raise CaseSchemaError(f"class expression must be a string, got {expr!r}")
    if _ZERO.match(expr):
        return lattice.zero()
    pos, out, first = 0, lattice.zero(), True
    while pos < len(expr):
        m = _TERM.match(expr, pos)
        if not m or m.end() == pos:
            raise CaseSchemaError(f"cannot parse class expression {expr!r} at offset {pos}")
        sign, coef, name = m.groups()
        if sign is None and not first:
            raise CaseSchemaError(f"missing sign before {name!r} in {expr!r}")
        if name not in names:
            raise CaseSchemaError(f"unbound class name {name!r} in {expr!r}; known: {sorted(names)}")
        k = int(coef) if coef else 1
        out = out + (-k if sign == "-" else k) * names[name]
        pos, first = m.end(), False
    if first:
        raise CaseSchemaError(f"empty class expression {expr!r}")
    return out


# --- case specs -----------------------------------------------------------

@dataclass
class CheckStep:
    op: str
    args: dict
    expect: Any
    anchor: str = ""
    note: str = ""


@dataclass
class CaseSpec:
    id: str
    construction: str
    name: str = ""
    dp_degree: int | None = None
    model: Any = None
    lattice: Lattice | None = None
    classes: dict = field(default_factory=dict)
    polarization: DivisorClass | None = None
    checks: list = field(default_factory=list)
    pipeline: dict | None = None
    hodge: dict | None = None
    expected: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)
    notes: list = field(default_factory=list)
    source: str = ""

    def cls(self, expr: str) -> DivisorClass:
        if self.lattice is None:
            raise CaseSchemaError(f"case {self.id} has no lattice; cannot resolve {expr!r}")
        return parse_class(expr, self.classes, self.lattice)

    def k3(self) -> k3.PolarizedK3Model:
        if not isinstance(self.model, k3.PolarizedK3Model):
            raise CaseSchemaError(f"case {self.id} is not a K3 construction")
        return self.model


def _require(d: Mapping, key: str, loc: str):
    if key not in d:
        raise CaseSchemaError(f"missing required key {key!r}", loc)
    return d[key]


def _int_matrix(rows, loc: str) -> list[list[int]]:
    if not isinstance(rows, list) or not all(isinstance(r, list) for r in rows):
        raise CaseSchemaError("gram must be a list of rows", loc)
    for i, r in enumerate(rows):
        for j, x in enumerate(r):
            if isinstance(x, bool) or not isinstance(x, int):
                raise CaseSchemaError(f"gram entry ({i},{j}) must be an integer, got {x!r}", loc)
    return rows


def _bind_classes(spec: CaseSpec, raw: Mapping, loc: str):
    lat = spec.lattice
    names = {n: lat.basis(n) for n in lat.basis_names}
    if spec.model is not None and hasattr(spec.model, "K") and "K" not in names and "K" not in raw:
        names["K"] = spec.model.K
    for name, value in raw.items():
        where = f"{loc}.classes.{name}"
        if not re.fullmatch(r"[A-Za-z][A-Za-z0-9_']*", name):
            raise CaseSchemaError(f"invalid class name {name!r}", where)
        if name in names:
            raise CaseSchemaError(f"class name {name!r} shadows an existing name", where)
        try:
            if isinstance(value, str):
                names[name] = parse_class(value, names, lat)
            else:
                names[name] = lat.vector(value)
        except (LatticeError, CaseSchemaError) as exc:
            raise CaseSchemaError(str(exc), where) from None
    spec.classes = names


def _build_model(spec: CaseSpec, data: Mapping, loc: str):
    kind = spec.construction
    surf = data.get("surface", {})
    try:
        if kind == "k3_lattice":
            lat_d = _require(data, "lattice", loc)
            basis = _require(lat_d, "basis", f"{loc}.lattice")
            gram = _int_matrix(_require(lat_d, "gram", f"{loc}.lattice"), f"{loc}.lattice.gram")
            spec.lattice = Lattice.from_rows(basis, gram, name=f"Pic(S), case {spec.id}")
        elif kind == "del_pezzo_surface":
            spec.model = surfaces.DelPezzoLattice(int(_require(surf, "n", f"{loc}.surface")))
            spec.lattice = spec.model.lattice
        elif kind == "ruled_surface":
            spec.model = surfaces.RuledSurfaceModel(
                int(_require(surf, "g", f"{loc}.surface")),
                int(_require(surf, "e", f"{loc}.surface")),
                surf.get("restrictions", {}),
            )
            spec.lattice = spec.model.lattice
        elif kind == "product_surface":
            spec.model = surfaces.ProductSurfaceModel(
                int(_require(surf, "g", f"{loc}.surface")), surf.get("restrictions", {})
            )
            spec.lattice = spec.model.lattice
    except LatticeError as exc:
        raise CaseSchemaError(str(exc), f"{loc}.lattice") from None


def case_from_dict(data: Mapping, source: str = "<dict>") -> CaseSpec:
    loc = source
    if not isinstance(data, Mapping):
        raise CaseSchemaError("case file must hold a JSON object", loc)
    cid = _require(data, "id", loc)
    construction = _require(data, "construction", loc)
    if construction not in CONSTRUCTIONS:
        raise CaseSchemaError(f"unknown construction {construction!r}; expected one of {CONSTRUCTIONS}", loc)
    spec = CaseSpec(
        id=cid,
        construction=construction,
        name=data.get("name", cid),
        dp_degree=data.get("dp_degree"),
        pipeline=data.get("pipeline"),
        hodge=data.get("hodge"),
        expected=dict(data.get("expected", {})),
        flags=list(data.get("flags", [])),
        notes=list(data.get("notes", [])),
        source=source,
    )
    _build_model(spec, data, loc)
    if spec.lattice is not None:
        _bind_classes(spec, data.get("classes", {}), loc)
    elif data.get("classes"):
        raise CaseSchemaError("classes given for a construction without a lattice", loc)

    if construction == "k3_lattice":
        pol = data.get("polarization", "H")
        spec.polarization = _resolve(spec, pol, f"{loc}.polarization")
        marks = data.get("marks", [])
        for m in marks:
            if m not in spec.classes:
                raise CaseSchemaError(f"mark {m!r} is not a declared class", f"{loc}.marks")
        named = {n: c for n, c in spec.classes.items() if n not in spec.lattice.basis_names or n in marks}
        try:
            spec.model = k3.PolarizedK3Model(spec.lattice, spec.polarization, named, frozenset(marks))
        except LatticeError as exc:
            raise CaseSchemaError(str(exc), f"{loc}.lattice") from None

    for i, raw in enumerate(data.get("checks", [])):
        where = f"{loc}.checks[{i}]"
        op = _require(raw, "op", where)
        if op not in OPS:
            raise CaseSchemaError(f"unknown op {op!r}", where)
        args = raw.get("args", {})
        if not isinstance(args, dict):
            raise CaseSchemaError("args must be an object", where)
        allowed = OPS[op].args
        extra = set(args) - set(allowed)
        if extra:
            raise CaseSchemaError(f"op {op} does not take {sorted(extra)}; allowed {list(allowed)}", where)
        missing = [a for a in OPS[op].required if a not in args]
        if missing:
            raise CaseSchemaError(f"op {op} is missing arguments {missing}", where)
        if "expect" not in raw:
            raise CaseSchemaError("missing required key 'expect'", where)
        step = CheckStep(op, args, raw["expect"], raw.get("anchor", ""), raw.get("note", ""))
        _validate_references(spec, step, where)
        spec.checks.append(step)

    if spec.pipeline is not None:
        _validate_pipeline(spec.pipeline, f"{loc}.pipeline")
    for key in spec.expected:
        if key not in EXPECTED_FIELDS:
            raise CaseSchemaError(f"unknown expected field {key!r}", f"{loc}.expected")
    for i, flag in enumerate(spec.flags):
        where = f"{loc}.flags[{i}]"
        f = _require(flag, "field", where)
        _require(flag, "printed_value", where)
        if f not in EXPECTED_FIELDS:
            raise CaseSchemaError(f"flag on unknown field {f!r}", where)
    return spec


def _resolve(spec: CaseSpec, expr, where: str) -> DivisorClass:
    try:
        return spec.cls(expr)
    except CaseSchemaError as exc:
        raise CaseSchemaError(str(exc), where) from None


def _validate_references(spec: CaseSpec, step: CheckStep, where: str):
    op = OPS[step.op]
    if op.needs_lattice and spec.lattice is None:
        raise CaseSchemaError(f"op {step.op} needs a lattice but case {spec.id} has none", where)
    for a in op.class_args:
        if a in step.args:
            _resolve(spec, step.args[a], f"{where}.args.{a}")
    for a in op.class_list_args:
        for j, e in enumerate(step.args.get(a, [])):
            if isinstance(e, list):
                e = e[0]
            _resolve(spec, e, f"{where}.args.{a}[{j}]")
    if isinstance(step.expect, dict):
        for key in op.class_keys:
            if key in step.expect:
                vals = step.expect[key]
                for e in vals if isinstance(vals, list) else [vals]:
                    _resolve(spec, e, f"{where}.expect.{key}")
        for key in op.class_dict_keys:
            for e in step.expect.get(key, {}):
                _resolve(spec, e, f"{where}.expect.{key}")


def _validate_pipeline(p: Mapping, loc: str):
    kind = p.get("kind", "game")
    keys = {"game": ("kw3", "kw_dot_b", "g_b", "d"), "blowup": ("kw3", "kw_dot_b", "g_b")}
    if kind not in keys:
        raise CaseSchemaError(f"unknown pipeline kind {kind!r}", loc)
    for k in keys[kind]:
        v = _require(p, k, loc)
        if isinstance(v, bool) or not isinstance(v, int):
            raise CaseSchemaError(f"{k} must be an integer, got {v!r}", loc)
    if kind == "game":
        try:
            threefold.PipelineInput(p["kw3"], p["kw_dot_b"], p["g_b"], p["d"])
        except threefold.PipelineError as exc:
            raise CaseSchemaError(str(exc), loc) from None


def builtin_case_ids() -> tuple[str, ...]:
    return CASE_ORDER


def _builtin_path(cid: str):
    return resources.files("almost_fano").joinpath("cases", f"{cid}.json")


def load_case(ref: str | Path) -> CaseSpec:
    """Load a builtin case by id, or a case file by path."""
    ref_s = str(ref)
    if ref_s in CASE_ORDER:
        res = _builtin_path(ref_s)
        text, source = res.read_text(encoding="utf-8"), f"builtin:{ref_s}"
    else:
        path = Path(ref_s)
        if not path.is_file():
            raise CaseSchemaError(f"no builtin case or file named {ref_s!r}; builtins: {', '.join(CASE_ORDER)}")
        text, source = path.read_text(encoding="utf-8"), str(path)
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CaseSchemaError(f"invalid JSON: {exc}", source) from None
    return case_from_dict(data, source)


# --- operation registry ---------------------------------------------------

@dataclass(frozen=True)
class OpSpec:
    fn: Callable[[CaseSpec, dict], dict]
    args: tuple[str, ...] = ()
    required: tuple[str, ...] = ()
    class_args: tuple[str, ...] = ()
    class_list_args: tuple[str, ...] = ()
    class_keys: tuple[str, ...] = ()  # expect keys holding class (lists)
    class_dict_keys: tuple[str, ...] = ()  # expect keys mapping class -> value, compared on listed keys
    needs_lattice: bool = True


OPS: dict[str, OpSpec] = {}


def _op(name: str, **kw):
    def deco(fn):
        OPS[name] = OpSpec(fn, **kw)
        return fn

    return deco


def _fmt(c) -> str:
    return format_class(c)


def _classes(cs) -> list[str]:
    return [_fmt(c) for c in cs]


def _check_result(r: k3.CheckResult) -> dict:
    return {
        "verdict": r.verdict,
        "witnesses": _classes(r.classes()),
        "witness_clauses": sorted({w.clause for w in r.witnesses}),
    }


@_op("classify", needs_lattice=True)
def _op_classify(ctx, args):
    c = classify(ctx.lattice)
    return {"is_even": c.is_even, "signature": list(c.signature)}


@_op("pair", args=("a", "b"), required=("a", "b"), class_args=("a", "b"))
def _op_pair(ctx, args):
    return {"value": pair(ctx.cls(args["a"]), ctx.cls(args["b"]))}


@_op("square", args=("cls",), required=("cls",), class_args=("cls",))
def _op_square(ctx, args):
    return {"value": ctx.cls(args["cls"]).square()}


@_op("normalize", args=("cls",), required=("cls",), class_args=("cls",), class_keys=("class",))
def _op_normalize(ctx, args):
    return {"class": _fmt(ctx.cls(args["cls"]))}


@_op("is_negative_definite", args=("basis",), required=("basis",), class_list_args=("basis",))
def _op_negdef(ctx, args):
    return {"value": is_negative_definite(ctx.lattice, [ctx.cls(e) for e in args["basis"]])}


@_op(
    "enum_classes",
    args=("square", "constraints", "degree"),
    required=("square",),
    class_list_args=("constraints",),
    class_keys=("classes",),
)
def _op_enum(ctx, args):
    cons = [(ctx.cls(e), int(v)) for e, v in args.get("constraints", [])]
    deg = args.get("degree")
    if deg is not None:
        deg = (ctx.cls(deg[0]), int(deg[1]), int(deg[2]))
    found = enum_classes(ctx.lattice, int(args["square"]), cons, deg)
    return {"classes": _classes(found), "count": len(found)}


@_op("minus_two_up_to", args=("dmax", "dmin"), required=("dmax",), class_keys=("classes",))
def _op_minus_two(ctx, args):
    found = k3.minus_two_up_to(ctx.k3(), int(args["dmax"]), int(args.get("dmin", 1)))
    return {"classes": _classes(found), "count": len(found)}


@_op("h0_rr", args=("cls",), required=("cls",), class_args=("cls",))
def _op_h0(ctx, args):
    return {"value": k3.h0_rr(ctx.k3(), ctx.cls(args["cls"]))}


@_op("effective_candidate", args=("cls",), required=("cls",), class_args=("cls",))
def _op_eff(ctx, args):
    return {"value": k3.effective_candidate(ctx.k3(), ctx.cls(args["cls"]))}


@_op("bpf_check", args=("L",), required=("L",), class_args=("L",), class_keys=("witnesses",))
def _op_bpf(ctx, args):
    r = k3.bpf_check(ctx.k3(), ctx.cls(args["L"]))
    out = _check_result(r)
    out["method"] = r.details.get("method", "")
    return out


@_op("very_ample_check", args=("L",), required=("L",), class_args=("L",), class_keys=("witnesses",))
def _op_va(ctx, args):
    return _check_result(k3.very_ample_check(ctx.k3(), ctx.cls(args["L"])))


@_op("quadric_embedding_check", class_keys=("witnesses",))
def _op_quadric(ctx, args):
    return _check_result(k3.quadric_embedding_check(ctx.k3()))


@_op(
    "nef_check",
    args=("L",),
    required=("L",),
    class_args=("L",),
    class_keys=("witnesses",),
    class_dict_keys=("pairings",),
)
def _op_nef(ctx, args):
    r = k3.nef_check(ctx.k3(), ctx.cls(args["L"]))
    out = _check_result(r)
    out["pairings"] = dict(r.details["pairings"])
    out["checked"] = r.details["checked"]
    return out


@_op("movable_check", args=("L",), required=("L",), class_args=("L",), class_keys=("curves", "witnesses"))
def _op_movable(ctx, args):
    r = k3.movable_check(ctx.k3(), ctx.cls(args["L"]))
    out = _check_result(r)
    out["curves"] = _classes(r.details["curves"])
    out["feasible_fixed_parts"] = r.details["feasible_fixed_parts"]
    out["examined"] = r.details["examined"]
    return out


def _poly_terms(poly: dict, names: list[str]) -> dict:
    out = {}
    for key, v in poly.items():
        if v == 0:
            continue
        if key == "const":
            out["1"] = v
        elif key[0] == "lin":
            out[names[key[1]]] = v
        else:
            _, i, j = key
            out[f"{names[i]}^2" if i == j else f"{names[i]}*{names[j]}"] = v
    return out


def render_polynomial(terms: Mapping[str, int]) -> str:
    order = sorted(terms, key=lambda k: (k != "1", "*" in k or "^" in k, k))
    parts = []
    for k in order:
        v = terms[k]
        mag = abs(v)
        body = str(mag) if k == "1" else (k if mag == 1 else f"{mag}{k}")
        parts.append(("-" if v < 0 else "+", body))
    if not parts:
        return "0"
    s = ("-" if parts[0][0] == "-" else "") + parts[0][1]
    for sign, body in parts[1:]:
        s += f" {sign} {body}"
    return s


@_op(
    "fixed_part_square",
    args=("L", "curves", "vars"),
    required=("L", "curves"),
    class_args=("L",),
    class_list_args=("curves",),
)
def _op_fixed_square(ctx, args):
    curves = tuple(ctx.cls(e) for e in args["curves"])
    names = list(args.get("vars") or "abcdefgh"[: len(curves)])
    if len(names) != len(curves):
        raise CaseSchemaError("vars and curves must have the same length")
    terms = _poly_terms(k3.fixed_part_square(ctx.cls(args["L"]), curves), names)
    return {"coefficients": terms, "polynomial": render_polynomial(terms)}


@_op("bn_general_check", class_keys=("candidates", "witnesses"), class_dict_keys=("products",))
def _op_bn(ctx, args):
    r = k3.bn_general_check(ctx.k3())
    out = _check_result(r)
    out["candidates"] = _classes(r.details["candidates"])
    out["products"] = dict(r.details["products"])
    out["h0_H"] = r.details["h0_H"]
    return out


@_op(
    "relative_nef_check",
    args=("L", "F"),
    required=("L", "F"),
    class_args=("L", "F"),
    class_keys=("witnesses",),
    class_dict_keys=("fiber_degrees",),
)
def _op_relnef(ctx, args):
    r = k3.relative_nef_check(ctx.k3(), ctx.cls(args["L"]), ctx.cls(args["F"]))
    out = _check_result(r)
    out["fiber_degrees"] = dict(r.details["fiber_degrees"])
    return out


@_op("minus_one_classes", class_keys=("classes",))
def _op_lines(ctx, args):
    if not isinstance(ctx.model, surfaces.DelPezzoLattice):
        raise CaseSchemaError("minus_one_classes needs a del Pezzo construction")
    found = surfaces.minus_one_classes(ctx.model)
    return {"classes": _classes(found), "count": len(found)}


@_op("nef_on_del_pezzo", args=("L",), required=("L",), class_args=("L",), class_keys=("witnesses",))
def _op_dp_nef(ctx, args):
    if not isinstance(ctx.model, surfaces.DelPezzoLattice):
        raise CaseSchemaError("nef_on_del_pezzo needs a del Pezzo construction")
    r = surfaces.nef_on_del_pezzo(ctx.model, ctx.cls(args["L"]))
    return {"verdict": r.verdict, "witnesses": _classes(r.witnesses), "checked": r.checked}


@_op("adjunction_genus", args=("B",), required=("B",), class_args=("B",))
def _op_genus(ctx, args):
    return {"value": surfaces.adjunction_genus(ctx.model, ctx.cls(args["B"]))}


def _restriction(ctx, expression) -> DivisorClass:
    if not hasattr(ctx.model, "restriction_table"):
        raise CaseSchemaError("restricted_class needs a ruled or product construction")
    return surfaces.restricted_class(ctx.model, {k: int(v) for k, v in expression.items()})


@_op("restricted_class", args=("expression",), required=("expression",), class_keys=("class",))
def _op_restricted(ctx, args):
    return {"class": _fmt(_restriction(ctx, args["expression"]))}


@_op(
    "restriction_pairing",
    args=("expression", "with"),
    required=("expression", "with"),
    class_args=("with",),
)
def _op_restriction_pairing(ctx, args):
    return {"value": pair(_restriction(ctx, args["expression"]), ctx.cls(args["with"]))}


@_op("blowup_curve_invariants", args=("kv3", "kv_dot_b", "g"), required=("kv3", "kv_dot_b", "g"), needs_lattice=False)
def _op_blowup(ctx, args):
    return threefold.blowup_curve_invariants(int(args["kv3"]), int(args["kv_dot_b"]), int(args["g"])).as_dict()


@_op("dpd_transform", args=("kw3", "kw_dot_b", "g_b", "d"), required=("kw3", "kw_dot_b", "g_b", "d"), needs_lattice=False)
def _op_game(ctx, args):
    inp = threefold.PipelineInput(int(args["kw3"]), int(args["kw_dot_b"]), int(args["g_b"]), int(args["d"]))
    return threefold.dpd_transform(inp).as_dict()


@_op("dpd_feasible_triples", args=("d",), required=("d",), needs_lattice=False)
def _op_triples(ctx, args):
    triples = sorted(threefold.dpd_feasible_triples(int(args["d"])))
    return {"triples": [[m, _frac(x), _frac(y)] for m, x, y in triples]}


@_op("dpd_eliminations", args=("d",), required=("d",), needs_lattice=False)
def _op_elim(ctx, args):
    rec = threefold.dpd_eliminations(int(args["d"]))
    return {"all_eliminated": rec.all_eliminated, "radicands": sorted(rec.radicands()), "record": rec.as_dict()}


@_op("h12_chain", args=("base", "steps"), required=("base",), needs_lattice=False)
def _op_h12(ctx, args):
    rec = threefold.h12_chain(args["base"], args.get("steps", []))
    return {"value": rec.value, "provenance": list(rec.provenance)}


@_op("h0_bidegree", args=("a", "b", "m", "n"), required=("a", "b", "m", "n"), needs_lattice=False)
def _op_h0_bideg(ctx, args):
    return {"value": threefold.h0_bidegree(*(int(args[k]) for k in ("a", "b", "m", "n")))}


@_op("quadric_pencil_h12", args=("matrix_size", "entry_degree"), required=("matrix_size", "entry_degree"), needs_lattice=False)
def _op_pencil(ctx, args):
    return threefold.quadric_pencil_h12(int(args["matrix_size"]), int(args["entry_degree"])).as_dict()


# --- comparison -----------------------------------------------------------

def _frac(q) -> Any:
    q = Fraction(q)
    return int(q) if q.denominator == 1 else str(q)


def _norm(v):
    if isinstance(v, bool) or v is None:
        return v
    if isinstance(v, (int, Fraction)):
        return Fraction(v)
    if isinstance(v, str):
        try:
            return Fraction(v)
        except ValueError:
            return v
    if isinstance(v, (list, tuple)):
        return [_norm(x) for x in v]
    if isinstance(v, dict):
        return {k: _norm(x) for k, x in v.items()}
    return v


def _canon(ctx: CaseSpec, expr: str) -> str:
    return _fmt(ctx.cls(expr))


def compare(ctx: CaseSpec, op: str, got: dict, expect) -> tuple[bool, list[str]]:
    """True when every expected key matches; class-valued keys compare as sets."""
    spec = OPS[op]
    if not isinstance(expect, dict):
        expect = {"value": expect}
    problems = []
    for key, want in expect.items():
        if key not in got:
            problems.append(f"{key}: not produced by {op}")
            continue
        have = got[key]
        if key in spec.class_keys:
            if isinstance(want, list):
                ok = sorted(_canon(ctx, e) for e in want) == sorted(have)
            else:
                ok = _canon(ctx, want) == have
        elif key in spec.class_dict_keys:
            canon = {_canon(ctx, k): v for k, v in want.items()}
            ok = all(k in have and _norm(have[k]) == _norm(v) for k, v in canon.items())
        else:
            ok = _norm(have) == _norm(want)
        if not ok:
            problems.append(f"{key}: got {have!r}, expected {want!r}")
    return not problems, problems


# --- running --------------------------------------------------------------

@dataclass
class VerificationReport:
    case_id: str
    name: str
    dp_degree: int | None
    status: str
    steps: list
    discrepancy_flags: list
    values: dict
    notes: list = field(default_factory=list)
    timing: float = 0.0

    def as_dict(self, include_timing: bool = False) -> dict:
        out = {
            "case_id": self.case_id,
            "name": self.name,
            "dp_degree": self.dp_degree,
            "status": self.status,
            "steps": self.steps,
            "discrepancy_flags": self.discrepancy_flags,
            "values": self.values,
            "notes": self.notes,
        }
        if include_timing:
            out["timing"] = self.timing
        return out


def _jsonable(v):
    if isinstance(v, Fraction):
        return _frac(v)
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


def _run_step(ctx: CaseSpec, step: CheckStep) -> dict:
    rec = {"op": step.op, "args": step.args, "expected": step.expect, "anchor": step.anchor}
    if step.note:
        rec["note"] = step.note
    try:
        got = OPS[step.op].fn(ctx, step.args)
        ok, problems = compare(ctx, step.op, got, step.expect)
        rec.update(got=_jsonable(got), passed=ok)
        if problems:
            rec["problems"] = problems
    except (LatticeError, UnboundedRegionError, threefold.PipelineError, CaseSchemaError, ValueError) as exc:
        rec.update(got=None, passed=False, problems=[f"{type(exc).__name__}: {exc}"])
    return rec


def _pipeline_values(ctx: CaseSpec, steps: list) -> dict:
    values: dict = {}
    p = ctx.pipeline
    if p is not None:
        kind = p.get("kind", "game")
        if kind == "blowup":
            inv = threefold.blowup_curve_invariants(p["kw3"], p["kw_dot_b"], p["g_b"])
            values["kx3"] = inv.kx3
            steps.append({"op": "pipeline.blowup", "args": dict(p), "got": inv.as_dict(), "passed": True})
        else:
            inp = threefold.PipelineInput(p["kw3"], p["kw_dot_b"], p["g_b"], p["d"])
            closed = threefold.dpd_transform(inp)
            solved = threefold.dpd_solve_system(inp)
            agree = closed == solved
            values.update(kx3=closed.kx3, kx_dot_c=closed.kx_dot_c, z=closed.z)
            steps.append(
                {
                    "op": "pipeline.dpd_transform",
                    "args": dict(p),
                    "got": closed.as_dict(),
                    "resolved_system": solved.as_dict(),
                    "passed": agree,
                    **({} if agree else {"problems": ["closed forms disagree with the re-solved linear system"]}),
                }
            )
    if ctx.hodge is not None:
        try:
            rec = threefold.h12_chain(ctx.hodge["base"], ctx.hodge.get("steps", []))
            values["h12"] = rec.value
            steps.append({"op": "pipeline.h12_chain", "args": ctx.hodge, "got": rec.as_dict(), "passed": True})
        except threefold.PipelineError as exc:
            steps.append({"op": "pipeline.h12_chain", "args": ctx.hodge, "got": None, "passed": False,
                          "problems": [str(exc)]})
    return values


def run_case(spec: CaseSpec) -> VerificationReport:
    t0 = time.perf_counter()
    steps = [_run_step(spec, s) for s in spec.checks]
    values = _pipeline_values(spec, steps)
    for key in EXPECTED_FIELDS:
        if key not in spec.expected:
            continue
        want = spec.expected[key]
        have = values.get(key)
        ok = have is not None and Fraction(have) == Fraction(want)
        rec = {"op": f"expected.{key}", "args": {}, "got": _jsonable(have), "expected": want, "passed": ok}
        if not ok:
            rec["problems"] = [f"{key}: got {_jsonable(have)!r}, expected {want!r}"]
        steps.append(rec)
    flags = []
    for flag in spec.flags:
        have = values.get(flag["field"])
        fired = have is not None and Fraction(have) != Fraction(flag["printed_value"])
        flags.append(
            {
                "field": flag["field"],
                "computed": _jsonable(have),
                "printed_value": flag["printed_value"],
                "fired": fired,
                "anchor": flag.get("anchor", ""),
                "reason": flag.get("reason", ""),
            }
        )
    if not all(s["passed"] for s in steps):
        status = "fail"
    elif any(f["fired"] for f in flags):
        status = "flagged"
    else:
        status = "pass"
    return VerificationReport(
        spec.id,
        spec.name,
        spec.dp_degree,
        status,
        _jsonable(steps),
        flags,
        {k: _jsonable(v) for k, v in values.items()},
        list(spec.notes),
        time.perf_counter() - t0,
    )


def summarize(reports: list[VerificationReport]) -> dict:
    counts = {s: sum(r.status == s for r in reports) for s in ("pass", "flagged", "fail")}
    fired = [f"{r.case_id}: {f['field']}" for r in reports for f in r.discrepancy_flags if f["fired"]]
    return {"total": len(reports), **counts, "flags": fired}


def run_all(specs: list[CaseSpec] | None = None) -> tuple[list[VerificationReport], dict]:
    if specs is None:
        specs = [load_case(cid) for cid in CASE_ORDER]
    order = {cid: i for i, cid in enumerate(CASE_ORDER)}
    reports = sorted((run_case(s) for s in specs), key=lambda r: (order.get(r.case_id, len(order)), r.case_id))
    return reports, summarize(reports)


# --- reports --------------------------------------------------------------

def render_json(reports: list[VerificationReport], include_timing: bool = False) -> str:
    doc = {"reports": [r.as_dict(include_timing) for r in reports], "summary": summarize(reports)}
    return json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def render_text(reports: list[VerificationReport], include_timing: bool = False) -> str:
    header = ["Name", "dP degree", "(-K_X)^3", "-K_X.C", "z", "h^{1,2}", "status", "flags"]
    if include_timing:
        header.append("time [s]")
    rows = [header]
    for r in reports:
        v = r.values
        row = [
            r.case_id,
            "" if r.dp_degree is None else str(r.dp_degree),
            str(v.get("kx3", "")),
            str(v.get("kx_dot_c", "")),
            str(v.get("z", "")),
            str(v.get("h12", "")),
            r.status,
            ", ".join(f"{f['field']} (printed {f['printed_value']})" for f in r.discrepancy_flags if f["fired"]),
        ]
        if include_timing:
            row.append(f"{r.timing:.3f}")
        rows.append(row)
    widths = [max(len(row[i]) for row in rows) for i in range(len(header))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip() for row in rows]
    lines.insert(1, "  ".join("-" * w for w in widths))
    for r in reports:
        for s in r.steps:
            if not s["passed"]:
                lines.append(f"FAIL {r.case_id} {s['op']}: {'; '.join(s.get('problems', []))}")
    s = summarize(reports)
    lines.append(f"{s['total']} cases: {s['pass']} pass, {s['flagged']} flagged, {s['fail']} fail")
    return "\n".join(lines) + "\n"


def emit_report(reports, format: str = "text", out=None, include_timing: bool = False) -> None:
    if format == "json":
        text = render_json(reports, include_timing)
    elif format == "text":
        text = render_text(reports, include_timing)
    else:
        raise ValueError(f"unknown report format {format!r}")
    if out is None or out == "-":
        sys.stdout.write(text)
        return
    Path(out).write_text(text, encoding="utf-8")
