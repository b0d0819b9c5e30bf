"""Command-line front end.

Every subcommand prints one document: in ``--format json`` a single object with
``result``, ``hbar_grades``, ``truncated`` and ``notes`` (plus ``data`` for
tabular output), in ``--format pretty`` aligned ``key: value`` lines.
Exit status is 0 on success, 1 on a computation error and 2 on a usage error.
"""

from __future__ import annotations

import argparse
import ast
import json
import math
import operator
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

from . import twoparticle
from .dynamics import crosscheck_evolution, moyal_evolve, vey_evolve
from .expr import DSLSyntaxError, Expr, UnknownIdentifierError
from .geom import Transformation, christoffel, is_vey_canonical, jacobian, pullback, transform_symplectic
from .measure import GridSpec, WignerState, expectation, marginal, verify_stargenvalue
from .opalg import OperatorPoly, normal_order, parse_operator, weyl_quantize, weyl_symbol
from .star import Chart, StarConfig, moyal_bracket_series, moyal_star_series
from .vey import CovariantContext, SymbolTable, generalized_weyl_symbol, vey_bracket_series, vey_star_series

__all__ = ["main", "build_parser", "Document", "UsageError", "emit"]


class UsageError(Exception):
    """Bad or missing command-line input; exit status 2."""


class ComputationError(Exception):
    """A computation finished with a negative outcome; exit status 1."""

    def __init__(self, message: str, doc: "Document | None" = None):
        super().__init__(message)
        self.doc = doc


@dataclass
class Document:
    result: str
    hbar_grades: dict[str, str] = field(default_factory=dict)
    truncated: bool = False
    notes: list[str] = field(default_factory=list)
    data: Any = None

    def to_json(self) -> dict:
        out = {"result": self.result, "hbar_grades": self.hbar_grades, "truncated": self.truncated,
               "notes": self.notes}
        if self.data is not None:
            out["data"] = self.data
        return out


def emit(doc: Document, fmt: str = "json") -> str:
    if fmt == "json":
        return json.dumps(doc.to_json(), ensure_ascii=False, sort_keys=False)
    rows = [("result", doc.result)]
    rows += [(f"hbar^{k}", v) for k, v in doc.hbar_grades.items()]
    rows.append(("truncated", str(doc.truncated).lower()))
    rows += [("note", n) for n in doc.notes]
    if isinstance(doc.data, list):
        for row in doc.data:
            if isinstance(row, dict) and "status" in row:
                rows.append((row["status"], f"{row['name']}: {row['detail']}"))
            elif isinstance(row, (tuple, list)) and len(row) == 2:
                rows.append((f"{row[0]:.6g}", f"{row[1]:.12g}"))
    elif isinstance(doc.data, dict):
        rows += [(str(k), str(v)) for k, v in doc.data.items()]
    width = max(len(k) for k, _ in rows)
    return "\n".join(f"{k.ljust(width)}  {v}" for k, v in rows)


# input helpers


def _names(text: str | None, flag: str) -> list[str]:
    if not text:
        return []
    names = [s.strip() for s in text.split(",") if s.strip()]
    if not names:
        raise UsageError(f"{flag} is empty")
    return names


def _chart(args) -> Chart:
    if not args.vars:
        raise UsageError("--vars is required (positions then momenta, e.g. q,p)")
    try:
        return Chart.from_names(_names(args.vars, "--vars"), _names(args.params, "--params"))
    except ValueError as exc:
        raise UsageError(f"--vars: {exc}") from None


def _transformation(args) -> Transformation:
    if not args.chart:
        raise UsageError("--chart is required")
    path = Path(args.chart)
    if not path.is_file():
        raise UsageError(f"--chart: no such file {args.chart}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise UsageError(f"--chart: invalid JSON ({exc})") from None
    try:
        return Transformation.from_dict(data, _names(args.params, "--params"))
    except (DSLSyntaxError, UnknownIdentifierError, KeyError) as exc:
        raise UsageError(f"--chart: {exc}") from None


def _ctx(args) -> CovariantContext:
    return CovariantContext.from_transformation(_transformation(args), args.max_order)


def _expr(text: str | None, chart: Chart, flag: str, extra: tuple[str, ...] = ()) -> Expr:
    if text is None:
        raise UsageError(f"{flag} is required")
    try:
        return chart.with_params(chart.params + extra).parse(text)
    except (DSLSyntaxError, UnknownIdentifierError) as exc:
        raise UsageError(f"{flag}: {exc}") from None


def _operator(text: str | None, chart: Chart, flag: str) -> OperatorPoly:
    if text is None:
        raise UsageError(f"{flag} is required")
    try:
        return parse_operator(text, chart, juxtapose=True)
    except (DSLSyntaxError, UnknownIdentifierError, ValueError) as exc:
        raise UsageError(f"{flag}: {exc}") from None


def _order(chart: Chart, extra=()) -> list[str]:
    return list(chart.params) + list(chart.variables) + list(extra)


def _expr_doc(e: Expr, chart: Chart, truncated=False, notes=(), extra=()) -> Document:
    order = _order(chart, extra)
    grades = {str(k): v.render(order) for k, v in e.hbar_grades().items()}
    return Document(e.render(order), grades, truncated, list(notes))


def _operator_doc(a: OperatorPoly, notes=()) -> Document:
    grades: dict[int, dict] = {}
    for w, c in a.terms.items():
        for k, g in c.hbar_grades().items():
            grades.setdefault(k, {})[w] = g
    hg = {str(k): OperatorPoly(a.chart, t).render() for k, t in sorted(grades.items())}
    return Document(a.render(), hg, False, list(notes))


# subcommands


def cmd_star(args) -> Document:
    chart = _chart(args)
    cfg = StarConfig(chart, max_order=args.max_order)
    s = moyal_star_series(_expr(args.a, chart, "--a"), _expr(args.b, chart, "--b"), cfg)
    return _expr_doc(s.value, chart, s.truncated, s.notes)


def cmd_bracket(args) -> Document:
    chart = _chart(args)
    cfg = StarConfig(chart, max_order=args.max_order)
    s = moyal_bracket_series(_expr(args.a, chart, "--a"), _expr(args.b, chart, "--b"), cfg)
    return _expr_doc(s.value, chart, s.truncated, s.notes)


def cmd_vey_star(args) -> Document:
    ctx = _ctx(args)
    s = vey_star_series(_expr(args.a, ctx.chart, "--a"), _expr(args.b, ctx.chart, "--b"), ctx)
    return _expr_doc(s.value, ctx.chart, s.truncated, s.notes)


def cmd_vey_bracket(args) -> Document:
    ctx = _ctx(args)
    s = vey_bracket_series(_expr(args.a, ctx.chart, "--a"), _expr(args.b, ctx.chart, "--b"), ctx)
    return _expr_doc(s.value, ctx.chart, s.truncated, s.notes)


def cmd_weyl(args) -> Document:
    chart = _chart(args)
    op = _operator(args.operator, chart, "--operator")
    return _expr_doc(weyl_symbol(op, StarConfig(chart, max_order=args.max_order)), chart)


def cmd_quantize(args) -> Document:
    chart = _chart(args)
    e = _expr(args.expr, chart, "--expr")
    op = weyl_quantize(e, chart)
    return _operator_doc(op, [f"normal ordered: {normal_order(op).render()}"])


def cmd_gweyl(args) -> Document:
    ctx = _ctx(args)
    t = ctx.transformation
    op = _operator(args.operator, t.source, "--operator")
    return _expr_doc(generalized_weyl_symbol(op, SymbolTable.from_transformation(t), ctx), ctx.chart)


def _matrix_data(m) -> dict:
    return {f"{r},{c}": str(m[i, j]) for i, r in enumerate(m.row_labels)
            for j, c in enumerate(m.col_labels) if not m[i, j].is_zero()}


def cmd_transform(args) -> Document:
    t = _transformation(args)
    target = t.target
    order = _order(target)
    if args.jacobian:
        data = _matrix_data(jacobian(t, args.direction))
        return Document(f"jacobian ({args.direction}), {len(data)} nonzero entries", data=data)
    if args.symplectic:
        jp = transform_symplectic(t)
        return Document(f"J' over {','.join(target.coords)}", data=_matrix_data(jp))
    if args.christoffel:
        gamma = christoffel(t)
        data = {f"{u},{a},{b}": v.render(order) for (u, a, b), v in gamma.nonzero()}
        return Document(f"{len(data)} nonzero christoffel symbols", data=data,
                        notes=["keys are upper,lower,lower; all other components vanish"])
    if args.pullback is not None:
        e = _expr(args.pullback, t.source, "--pullback")
        return _expr_doc(pullback(e, t), target)
    if args.check:
        canon = is_vey_canonical(t)
        data = {"roundtrip": t.roundtrip_method, "symplectic": canon.symplectic, "isometry": canon.isometry,
                "preserves_bracket": canon.preserves_bracket}
        return Document("ok", data=data)
    raise UsageError("transform needs one of --jacobian, --symplectic, --christoffel, --pullback, --check")


def _series_doc(s, chart: Chart) -> Document:
    notes = [f"truncated at t^{s.degree}"] if s.truncated else []
    return _expr_doc(s.as_expr(), chart, s.truncated, notes, extra=("t",))


def cmd_evolve(args) -> Document:
    chart = _chart(args)
    cfg = StarConfig(chart, max_order=args.star_order)
    mode = "state" if args.state else "observable"
    s = moyal_evolve(_expr(args.a, chart, "--a"), _expr(args.h, chart, "--h"), cfg, args.max_order, mode)
    return _series_doc(s, chart)


def cmd_vey_evolve(args) -> Document:
    t = _transformation(args)
    ctx = CovariantContext.from_transformation(t, args.star_order)
    mode = "state" if args.state else "observable"
    s = vey_evolve(_expr(args.a, ctx.chart, "--a"), _expr(args.h, ctx.chart, "--h"), ctx, args.max_order, mode)
    return _series_doc(s, ctx.chart)


def cmd_crosscheck(args) -> Document:
    if args.chart:
        ctx = CovariantContext.from_transformation(_transformation(args), args.star_order)
        src, geom = ctx.transformation.source, ctx
    else:
        src = _chart(args)
        geom = StarConfig(src, max_order=args.star_order)
    a = _operator(args.operator, src, "--operator")
    h = _operator(args.hamiltonian, src, "--hamiltonian")
    r = crosscheck_evolution(a, h, geom, args.max_order, args.through)
    chart = r.phase_space.chart
    doc = _series_doc(r.phase_space, chart)
    doc.notes = r.lines() + doc.notes
    doc.data = {"equal": r.equal}
    if not r.equal:
        raise ComputationError("evolutions disagree: " + "; ".join(r.lines()), doc)
    return doc


def _grid(args, chart: Chart) -> GridSpec | None:
    if not args.grid:
        return None
    try:
        return GridSpec.parse(args.grid, args.rule)
    except ValueError as exc:
        raise UsageError(f"--grid: {exc}") from None


def _state(args, chart: Chart) -> WignerState:
    if args.state_file:
        path = Path(args.state_file)
        if not path.is_file():
            raise UsageError(f"--state-file: no such file {args.state_file}")
        data = json.loads(path.read_text())
        text = data.get("expr")
        normalized = bool(data.get("normalized", False))
        scale = float(data.get("scale", 1.0))
        box = {k: tuple(v) for k, v in data["box"].items()} if "box" in data else None
    else:
        text, normalized, scale, box = args.state, args.normalized, 1.0, None
    if args.scale is not None:
        scale = _scale(args.scale)
    return WignerState(_expr(text, chart, "--state"), chart, box, normalized, scale)


_SCALE_NAMES = {"pi": math.pi, "e": math.e}
_SCALE_OPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv,
              ast.Pow: operator.pow}


def _scale(text: str) -> float:
    """Numeric prefactor from a small arithmetic language: numbers, pi, e, sqrt(), + - * / **."""

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id in _SCALE_NAMES:
            return _SCALE_NAMES[node.id]
        if isinstance(node, ast.BinOp) and type(node.op) in _SCALE_OPS:
            return _SCALE_OPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, ast.USub):
            return -ev(node.operand)
        if (isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id == "sqrt"
                and len(node.args) == 1):
            return math.sqrt(ev(node.args[0]))
        raise ValueError(node)

    try:
        return ev(ast.parse(text, mode="eval"))
    except (SyntaxError, ValueError, ZeroDivisionError):
        raise UsageError(f"--scale: cannot evaluate {text!r}") from None


def _measure_setup(args):
    if args.chart:
        ctx = _ctx(args)
        return ctx.chart, ctx
    return _chart(args), None


def cmd_expect(args) -> Document:
    chart, geom = _measure_setup(args)
    f = _state(args, chart)
    grid = _grid(args, chart)
    notes = []
    if f.normalized:
        total = f.check_normalization(grid, args.hbar) if geom is None else None
        if total is not None:
            notes.append(f"norm = {total:.12g}")
    val = expectation(_expr(args.a, chart, "--a"), f, geom, grid, args.hbar)
    return Document(repr(val), notes=notes, data={"hbar": args.hbar})


def cmd_marginal(args) -> Document:
    chart, geom = _measure_setup(args)
    f = _state(args, chart)
    if args.keep not in chart.variables:
        raise UsageError(f"--keep: {args.keep!r} is not a chart variable")
    m = marginal(f, args.keep, _grid(args, chart), args.hbar, geom)
    return Document(f"marginal in {args.keep}", notes=[f"integral = {m.integral():.12g}"], data=m.samples())


def cmd_verify_eigen(args) -> Document:
    if args.chart:
        geom = _ctx(args)
        chart = geom.chart
    else:
        chart = _chart(args)
        geom = StarConfig(chart, max_order=args.max_order)
    a = _expr(args.a, chart, "--a")
    g = _expr(args.g, chart, "--g")
    ev = _expr(args.eigenvalue, chart, "--eigenvalue")
    r = verify_stargenvalue(a, g, ev, geom, args.points, args.tol, args.hbar, (args.low, args.high), args.seed)
    doc = Document("pass" if r.passed else "fail", notes=[f"max residual = {r.max_residual:.3e}"],
                   data={"max_residual": r.max_residual, "tol": r.tol, "points": r.points,
                         "residual": r.residual.render(_order(chart))})
    if not r.passed:
        raise ComputationError("star-genvalue residual exceeds tolerance", doc)
    return doc


def cmd_example(args) -> Document:
    checks = twoparticle.run()
    table = twoparticle.as_table(checks)
    failed = [c.name for c in checks if c.status == "FAIL"]
    notes = [f"{c.name}: {c.detail}" for c in checks if c.status == "REPORT"]
    doc = Document("pass" if not failed else "fail", notes=notes, data=table)
    if failed:
        raise ComputationError("failed checks: " + ", ".join(failed), doc)
    return doc


COMMANDS: dict[str, tuple[Callable, str]] = {
    "star": (cmd_star, "Moyal star product a * b"),
    "bracket": (cmd_bracket, "Moyal bracket [a, b]_M"),
    "vey-star": (cmd_vey_star, "covariant star product in the target chart"),
    "vey-bracket": (cmd_vey_bracket, "generalized Moyal bracket in the target chart"),
    "weyl": (cmd_weyl, "Weyl symbol of an operator polynomial"),
    "quantize": (cmd_quantize, "Weyl-ordered operator of a polynomial symbol"),
    "gweyl": (cmd_gweyl, "generalized Weyl symbol via the chart's generator symbols"),
    "transform": (cmd_transform, "geometry of a coordinate change"),
    "evolve": (cmd_evolve, "time series from the Moyal bracket"),
    "vey-evolve": (cmd_vey_evolve, "time series from the generalized bracket"),
    "crosscheck": (cmd_crosscheck, "compare Heisenberg and phase-space evolution"),
    "expect": (cmd_expect, "expectation value on a quadrature grid"),
    "marginal": (cmd_marginal, "marginal density of a state"),
    "verify-eigen": (cmd_verify_eigen, "star-genvalue residual check"),
    "example-sec6": (cmd_example, "run the two-particle reproduction"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="moyalvey", description="Exact phase-space quantization toolkit.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--vars", help="positions then momenta, comma separated (e.g. q,x,p,y)")
    common.add_argument("--params", help="named constants, comma separated (e.g. M,m,k)")
    common.add_argument("--chart", help="transformation JSON file")
    common.add_argument("--format", choices=("json", "pretty"), default="json")
    common.add_argument("--max-order", type=int, default=8, help="series truncation order")
    sub = parser.add_subparsers(dest="command", metavar="command")
    subs = {name: sub.add_parser(name, parents=[common], help=h) for name, (_, h) in COMMANDS.items()}

    for name in ("star", "bracket", "vey-star", "vey-bracket"):
        subs[name].add_argument("--a")
        subs[name].add_argument("--b")
    for name in ("weyl", "gweyl"):
        subs[name].add_argument("--operator", help="operator DSL; '*' or whitespace juxtaposition")
    subs["quantize"].add_argument("--expr")

    tr = subs["transform"]
    g = tr.add_mutually_exclusive_group()
    g.add_argument("--jacobian", action="store_true")
    g.add_argument("--symplectic", action="store_true")
    g.add_argument("--christoffel", action="store_true")
    g.add_argument("--pullback", metavar="EXPR")
    g.add_argument("--check", action="store_true")
    tr.add_argument("--direction", choices=("forward", "inverse", "inverse-source"), default="forward")

    for name in ("evolve", "vey-evolve", "crosscheck"):
        p = subs[name]
        p.set_defaults(max_order=12)
        p.add_argument("--star-order", type=int, default=8)
    for name in ("evolve", "vey-evolve"):
        subs[name].add_argument("--a")
        subs[name].add_argument("--h")
        subs[name].add_argument("--state", action="store_true", help="evolve a state: df/dt = [H, f]_M")
    cc = subs["crosscheck"]
    cc.add_argument("--operator")
    cc.add_argument("--hamiltonian")
    cc.add_argument("--through", type=int, help="compare only up to this power of t")

    for name in ("expect", "marginal"):
        p = subs[name]
        p.add_argument("--state", help="state expression")
        p.add_argument("--state-file", help="JSON with expr, normalized, optional scale and box")
        p.add_argument("--normalized", action="store_true")
        p.add_argument("--scale", help="numeric prefactor, e.g. 1/pi")
        p.add_argument("--hbar", type=float, default=1.0)
        p.add_argument("--grid", help='e.g. "q=-8:8:128,p=-8:8:128"')
        p.add_argument("--rule", choices=("gauss-legendre", "trapezoid"), default="gauss-legendre")
    subs["expect"].add_argument("--a")
    subs["marginal"].add_argument("--keep")

    ve = subs["verify-eigen"]
    ve.add_argument("--a")
    ve.add_argument("--g")
    ve.add_argument("--eigenvalue")
    ve.add_argument("--hbar", type=float, default=1.0)
    ve.add_argument("--points", type=int, default=50)
    ve.add_argument("--tol", type=float, default=1e-10)
    ve.add_argument("--low", type=float, default=-3.0)
    ve.add_argument("--high", type=float, default=3.0)
    ve.add_argument("--seed", type=int, default=0)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not args.command:
        parser.print_usage(sys.stderr)
        return 2
    fmt = args.format
    try:
        doc = COMMANDS[args.command][0](args)
    except UsageError as exc:
        print(f"{parser.prog} {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except ComputationError as exc:
        if exc.doc is not None:
            print(emit(exc.doc, fmt))
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, RuntimeError, ArithmeticError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(emit(doc, fmt))
    return 0


if __name__ == "__main__":
    sys.exit(main())
