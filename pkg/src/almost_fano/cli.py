"""Command line: verify builtin cases, enumerate lattice classes, evaluate the game."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__, catalog, threefold
from .enumeration import UnboundedRegionError, enum_classes
from .lattice import Lattice, LatticeError, format_class

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="almost-fano", description=__doc__)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("--list-cases", action="store_true", help="list builtin case ids and exit")
    sub = p.add_subparsers(dest="command")

    v = sub.add_parser("verify", help="replay case files and compare with recorded expectations")
    v.add_argument("--case", action="append", default=[], metavar="ID|PATH", help="builtin id or case file (repeatable)")
    v.add_argument("--all", action="store_true", help="run every builtin case")
    v.add_argument("--format", choices=("text", "json"), default="text")
    v.add_argument("--out", metavar="PATH", help="write the report here instead of stdout")
    v.add_argument("--timing", action="store_true", help="include per-case timings")

    e = sub.add_parser("enumerate", help="list classes of given square under linear constraints")
    e.add_argument("--lattice", required=True, metavar="FILE",
                   help="JSON with 'basis' and 'gram' (or a case file with a 'lattice' block)")
    e.add_argument("--square", required=True, type=int)
    e.add_argument("--degree-class", metavar="CLASS", help="degree functional (default: polarization, else first basis vector)")
    e.add_argument("--deg-min", type=int, default=None)
    e.add_argument("--deg-max", type=int, default=None)
    e.add_argument("--constraint", action="append", default=[], metavar="CLASS=VALUE")
    e.add_argument("--format", choices=("text", "json"), default="text")

    g = sub.add_parser("game", help="evaluate the degree 5/6 two-ray game numerics")
    g.add_argument("--d", type=int, choices=(5, 6), required=True)
    g.add_argument("--kw3", type=int, required=True)
    g.add_argument("--kwb", type=int, required=True)
    g.add_argument("--g", type=int, required=True)
    g.add_argument("--format", choices=("text", "json"), default="text")
    return p


def _cmd_verify(args) -> int:
    refs = list(args.case)
    if args.all or not refs:
        refs = list(catalog.CASE_ORDER) + [r for r in refs if r not in catalog.CASE_ORDER]
    specs = [catalog.load_case(r) for r in refs]
    reports, summary = catalog.run_all(specs)
    try:
        catalog.emit_report(reports, args.format, args.out, include_timing=args.timing)
    except OSError as exc:
        raise UsageError(f"cannot write report: {exc}") from None
    return EXIT_FAIL if summary["fail"] else EXIT_OK


def _load_lattice_file(path: str):
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise UsageError(f"cannot read lattice file: {exc}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON: {exc}") from None
    block = data.get("lattice", data) if isinstance(data, dict) else None
    if not isinstance(block, dict) or "basis" not in block or "gram" not in block:
        raise UsageError(f"{path}: expected an object with 'basis' and 'gram'")
    lat = Lattice.from_rows(block["basis"], block["gram"], name=Path(path).stem)
    names = {n: lat.basis(n) for n in lat.basis_names}
    for name, value in data.get("classes", {}).items():
        names[name] = catalog.parse_class(value, names, lat) if isinstance(value, str) else lat.vector(value)
    pol = data.get("polarization")
    return lat, names, pol


def _cmd_enumerate(args) -> int:
    lat, names, pol = _load_lattice_file(args.lattice)
    cons = []
    for raw in args.constraint:
        if "=" not in raw:
            raise UsageError(f"constraint {raw!r} must look like CLASS=VALUE")
        expr, value = raw.rsplit("=", 1)
        try:
            cons.append((catalog.parse_class(expr, names, lat), int(value)))
        except ValueError as exc:
            raise UsageError(f"bad constraint {raw!r}: {exc}") from None
    degree = None
    if args.deg_min is not None or args.deg_max is not None:
        if args.deg_max is None:
            raise UsageError("--deg-min needs --deg-max")
        expr = args.degree_class or pol or lat.basis_names[0]
        degree = (catalog.parse_class(expr, names, lat), args.deg_min if args.deg_min is not None else 1, args.deg_max)
    found = enum_classes(lat, args.square, cons, degree)
    if args.format == "json":
        doc = {"square": args.square, "count": len(found),
               "classes": [{"class": format_class(c), "coords": list(c.coords)} for c in found]}
        sys.stdout.write(json.dumps(doc, sort_keys=True, indent=2) + "\n")
    else:
        for c in found:
            sys.stdout.write(f"{format_class(c)}\t{list(c.coords)}\n")
        sys.stdout.write(f"{len(found)} classes\n")
    return EXIT_OK


def _cmd_game(args) -> int:
    inp = threefold.PipelineInput(args.kw3, args.kwb, args.g, args.d)
    closed = threefold.dpd_transform(inp)
    solved = threefold.dpd_solve_system(inp)
    agree = closed == solved
    if args.format == "json":
        doc = {"input": {"d": args.d, "kw3": args.kw3, "kw_dot_b": args.kwb, "g_b": args.g},
               "result": closed.as_dict(), "linear_system_agrees": agree}
        sys.stdout.write(json.dumps(doc, sort_keys=True, indent=2) + "\n")
    else:
        r = closed.as_dict()
        sys.stdout.write(f"(-K_X)^3 = {r['kx3']}\n-K_X.C = {r['kx_dot_c']}\nz = {r['z']}\n")
        sys.stdout.write(f"linear system re-solve agrees: {agree}\n")
    return EXIT_OK if agree else EXIT_FAIL


def main(argv=None) -> int:
    parser = _parser()
    args = parser.parse_args(argv)
    if args.list_cases:
        sys.stdout.write("\n".join(catalog.CASE_ORDER) + "\n")
        return EXIT_OK
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    handler = {"verify": _cmd_verify, "enumerate": _cmd_enumerate, "game": _cmd_game}[args.command]
    try:
        return handler(args)
    except UnboundedRegionError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE
    except (UsageError, catalog.CaseSchemaError, LatticeError, threefold.PipelineError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
