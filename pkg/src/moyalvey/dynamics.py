"""Time evolution by iterated brackets, flat and covariant, with operator cross-checks."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

from .expr import ZERO, Expr, var
from .geom import pullback
from .opalg import OperatorPoly, heisenberg_evolve, weyl_symbol
from .star import Chart, StarConfig, moyal_bracket_series
from .vey import CovariantContext, SymbolTable, generalized_weyl_symbol, vey_bracket_series

__all__ = [
    "TimeSeries",
    "EvolutionReport",
    "moyal_evolve",
    "vey_evolve",
    "crosscheck_evolution",
    "compare_series",
    "pullback_series",
]

MODES = ("observable", "state")


@dataclass(frozen=True)
class TimeSeries:
    """``a(t) = sum_n coefficient_n t^n``; only nonzero coefficients are stored."""

    terms: tuple[tuple[int, Expr], ...]
    truncated: bool
    chart: Chart

    def coefficient(self, n: int) -> Expr:
        for k, c in self.terms:
            if k == n:
                return c
        return ZERO

    @property
    def degree(self) -> int:
        return self.terms[-1][0] if self.terms else 0

    def as_expr(self, t: str = "t") -> Expr:
        """The polynomial in an extra variable ``t``."""
        tv = var(t)
        acc = ZERO
        for n, c in self.terms:
            acc = acc + c * tv ** n
        return acc

    def map(self, f: Callable[[Expr], Expr], chart: Chart | None = None) -> "TimeSeries":
        terms = tuple((n, f(c)) for n, c in self.terms)
        return TimeSeries(tuple((n, c) for n, c in terms if not c.is_zero()), self.truncated, chart or self.chart)

    def render(self, t: str = "t") -> str:
        order = list(self.chart.params) + list(self.chart.variables) + [t]
        return self.as_expr(t).render(order)


def _evolve(a0, h, bracket, chart: Chart, max_order: int, mode: str) -> TimeSeries:
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    if max_order < 0:
        raise ValueError("max_order must be nonnegative")
    cur = Expr.coerce(a0)
    h = Expr.coerce(h)
    terms = []
    if not cur.is_zero():
        terms.append((0, cur))
    for n in range(1, max_order + 1):
        if cur.is_zero():
            return TimeSeries(tuple(terms), False, chart)
        s = bracket(cur, h) if mode == "observable" else bracket(h, cur)
        if s.truncated:
            raise RuntimeError(f"bracket series did not terminate at time order {n}")
        cur = s.value / n
        if not cur.is_zero():
            terms.append((n, cur))
    if cur.is_zero():
        return TimeSeries(tuple(terms), False, chart)
    nxt = bracket(cur, h) if mode == "observable" else bracket(h, cur)
    return TimeSeries(tuple(terms), not nxt.value.is_zero(), chart)


def moyal_evolve(a0, h, cfg: StarConfig, max_order: int = 12, mode: str = "observable") -> TimeSeries:
    """Taylor series of ``dA/dt = [A, H]_M`` (``mode="state"``: ``df/dt = [H, f]_M``)."""
    return _evolve(a0, h, lambda a, b: moyal_bracket_series(a, b, cfg), cfg.chart, max_order, mode)


def vey_evolve(a0, h, ctx: CovariantContext, max_order: int = 12, mode: str = "observable") -> TimeSeries:
    """As :func:`moyal_evolve` with the generalized bracket of ``ctx``."""
    return _evolve(a0, h, lambda a, b: vey_bracket_series(a, b, ctx), ctx.chart, max_order, mode)


@dataclass
class EvolutionReport:
    equal: bool
    phase_space: TimeSeries
    operator_side: TimeSeries
    diffs: dict[int, Expr] = field(default_factory=dict)
    through: int | None = None

    def lines(self) -> list[str]:
        if self.equal:
            return [f"equal through t^{self.phase_space.degree}"]
        return [f"t^{n}: differs by {d}" for n, d in sorted(self.diffs.items())]


def compare_series(a: TimeSeries, b: TimeSeries, through: int | None = None) -> dict[int, Expr]:
    top = max(a.degree, b.degree) if through is None else through
    out = {}
    for n in range(top + 1):
        d = a.coefficient(n) - b.coefficient(n)
        if not d.is_zero():
            out[n] = d
    return out


def crosscheck_evolution(a0: OperatorPoly, h: OperatorPoly, ctx: CovariantContext | StarConfig | None = None,
                         max_order: int = 12, through: int | None = None) -> EvolutionReport:
    """Compare the symbol of the Heisenberg series with the phase-space series.

    With a :class:`StarConfig` (or ``None``) the flat Weyl map and Moyal bracket
    are used over ``a0.chart``.  With a :class:`CovariantContext` the operators
    live over the source chart, are mapped by the generalized Weyl symbol and
    compared with the generalized bracket evolution in the target chart.
    ``through`` limits the comparison (and the series) to ``t^through``.
    """
    top = max_order if through is None else min(max_order, through)
    ops = heisenberg_evolve(a0, h, top)
    if isinstance(ctx, CovariantContext):
        table = SymbolTable.from_transformation(ctx.transformation)
        sym = lambda op: generalized_weyl_symbol(op, table, ctx)  # noqa: E731
        chart = ctx.chart
        phase = vey_evolve(sym(a0), sym(h), ctx, top)
    else:
        cfg = ctx if isinstance(ctx, StarConfig) else StarConfig(a0.chart)
        sym = lambda op: weyl_symbol(op, cfg)  # noqa: E731
        chart = cfg.chart
        phase = moyal_evolve(sym(a0), sym(h), cfg, top)
    mapped = tuple((n, sym(c)) for n, c in ops.terms)
    op_series = TimeSeries(tuple((n, c) for n, c in mapped if not c.is_zero()), ops.truncated, chart)
    diffs = compare_series(phase, op_series, through)
    return EvolutionReport(not diffs, phase, op_series, diffs, through)


def pullback_series(s: TimeSeries, ctx: CovariantContext) -> TimeSeries:
    t = ctx.transformation
    return s.map(lambda c: pullback(c, t), t.target)

