"""Covariant star product, generalized Moyal bracket and generalized Weyl map.

Everything lives in the target chart of a :class:`~moyalvey.geom.Transformation`:
partial derivatives are replaced by covariant derivatives of the pushed-forward
flat connection and the symplectic matrix by its transformed version.
"""

from __future__ import annotations

import itertools
import math
import warnings
from collections import Counter
from dataclasses import dataclass
from functools import cached_property
from typing import Mapping

from .expr import HBAR, I, ONE, ZERO, Expr
from .geom import Connection, Transformation, christoffel, pushforward, riemann_is_flat, transform_symplectic
from .opalg import Generator, OperatorPoly
from .star import Chart, StarConfig, StarSeries, SymplecticMatrix, TruncationWarning, series_terminates

__all__ = [
    "TensorField",
    "CovariantContext",
    "SymbolTable",
    "covariant_derivative",
    "vey_star_series",
    "vey_star",
    "vey_bracket_series",
    "vey_bracket",
    "covariant_terms",
    "generalized_weyl_symbol",
]

IHBAR = I * HBAR


@dataclass(frozen=True, eq=False)
class TensorField:
    """Covariant tensor of rank ``rank``; ``components`` maps every index tuple."""

    rank: int
    components: Mapping[tuple, Expr]
    chart: Chart

    @classmethod
    def scalar(cls, e, chart: Chart) -> "TensorField":
        return cls(0, {(): Expr.coerce(e)}, chart)

    def __getitem__(self, idx) -> Expr:
        if not isinstance(idx, tuple):
            idx = (idx,)
        return self.components[idx]

    def component(self, *names: str) -> Expr:
        c = self.chart.coords
        return self.components[tuple(c.index(n) for n in names)]

    def is_zero(self) -> bool:
        return all(v.is_zero() for v in self.components.values())


@dataclass(frozen=True, eq=False)
class CovariantContext:
    transformation: Transformation
    j: SymplecticMatrix
    gamma: Connection
    max_order: int = 8

    @classmethod
    def from_transformation(cls, t: Transformation, max_order: int = 8) -> "CovariantContext":
        return cls(t, transform_symplectic(t), christoffel(t), max_order)

    @classmethod
    def flat(cls, chart: Chart, max_order: int = 8) -> "CovariantContext":
        return cls.from_transformation(Transformation.identity(chart), max_order)

    @property
    def chart(self) -> Chart:
        return self.transformation.target

    @cached_property
    def symmetric(self) -> bool:
        """True when iterated covariant derivatives are totally symmetric."""
        return self.gamma.is_symmetric() and riemann_is_flat(self.gamma)


def covariant_derivative(t: TensorField, ctx: CovariantContext) -> TensorField:
    """``(nabla_i T)_{j1..jr} = d_i T_{j1..jr} - sum_m Gamma^l_{i jm} T_{j1..l..jr}``.

    The new index comes first.
    """
    coords = ctx.chart.coords
    d = len(coords)
    sparse = ctx.gamma.sparse
    comps = t.components
    out = {}
    for i in range(d):
        v = coords[i]
        for idx in itertools.product(range(d), repeat=t.rank):
            acc = comps[idx].diff(v)
            for m, jm in enumerate(idx):
                for l, g in sparse.get((i, jm), ()):
                    other = comps[idx[:m] + (l,) + idx[m + 1:]]
                    if not other.is_zero():
                        acc = acc - g * other
            out[(i,) + idx] = acc
    return TensorField(t.rank + 1, out, ctx.chart)


def _raise_all(b: TensorField, j: SymplecticMatrix) -> dict:
    """``B^{i1..ik} = J^{i1 j1} ... J^{ik jk} B_{j1..jk}``."""
    d = len(b.chart.coords)
    rows = [[(jj, j[i, jj]) for jj in range(d) if not j[i, jj].is_zero()] for i in range(d)]
    cur = dict(b.components)
    for slot in range(b.rank):
        nxt = {}
        for idx in itertools.product(range(d), repeat=b.rank):
            acc = ZERO
            for jj, x in rows[idx[slot]]:
                c = cur[idx[:slot] + (jj,) + idx[slot + 1:]]
                if not c.is_zero():
                    acc = acc + x * c
            nxt[idx] = acc
        cur = nxt
    return cur


def _sym_derivative(t: dict, rank: int, ctx: CovariantContext) -> dict:
    """Covariant derivative of a fully symmetric tensor stored on sorted index tuples."""
    coords = ctx.chart.coords
    d = len(coords)
    sparse = ctx.gamma.sparse
    out = {}
    for idx in itertools.combinations_with_replacement(range(d), rank + 1):
        i, rest = idx[0], idx[1:]
        acc = ZERO
        base = t.get(rest)
        if base is not None:
            acc = base.diff(coords[i])
        for m, jm in enumerate(rest):
            for l, g in sparse.get((i, jm), ()):
                other = t.get(tuple(sorted(rest[:m] + (l,) + rest[m + 1:])))
                if other is not None:
                    acc = acc - g * other
        if not acc.is_zero():
            out[idx] = acc
    return out


def _sym_contract(ta: dict, tb: dict, rows) -> Expr:
    """``A_I J^{I K} B_K`` summed over all index tuples, for symmetric A and B."""
    acc = ZERO
    for idx, av in ta.items():
        raised = ZERO
        for choice in itertools.product(*(rows[i] for i in idx)):
            bv = tb.get(tuple(sorted(j for j, _ in choice)))
            if bv is None:
                continue
            for _, x in choice:
                bv = bv * x
            raised = raised + bv
        if not raised.is_zero():
            acc = acc + (av * raised).scale(_multiplicity(idx))
    return acc


def _multiplicity(idx: tuple) -> int:
    return math.factorial(len(idx)) // math.prod(math.factorial(c) for c in Counter(idx).values())


def _covariant_terms_full(a: Expr, b: Expr, ctx: CovariantContext) -> tuple[list[Expr], bool]:
    chart = ctx.chart
    ta = TensorField.scalar(a, chart)
    tb = TensorField.scalar(b, chart)
    terms = [a * b]
    for _ in range(ctx.max_order):
        ta = covariant_derivative(ta, ctx)
        tb = covariant_derivative(tb, ctx)
        if ta.is_zero() or tb.is_zero():
            return terms, False
        raised = _raise_all(tb, ctx.j)
        acc = ZERO
        for idx, av in ta.components.items():
            bv = raised[idx]
            if not av.is_zero() and not bv.is_zero():
                acc = acc + av * bv
        terms.append(acc)
    ta = covariant_derivative(ta, ctx)
    tb = covariant_derivative(tb, ctx)
    return terms, not ta.is_zero() and not tb.is_zero()


def covariant_terms(a, b, ctx: CovariantContext) -> tuple[list[Expr], bool]:
    """``[a (nabla J nabla)^k b for k = 0..K]`` and a truncation flag.

    The series ends once the k-fold covariant derivative of either factor
    vanishes identically.  For a flat symmetric connection the derivative
    tensors are totally symmetric and only sorted index tuples are stored.
    """
    a, b = Expr.coerce(a), Expr.coerce(b)
    if not ctx.symmetric:
        return _covariant_terms_full(a, b, ctx)
    d = len(ctx.chart.coords)
    rows = [[(j, ctx.j[i, j]) for j in range(d) if not ctx.j[i, j].is_zero()] for i in range(d)]
    ta = {(): a} if not a.is_zero() else {}
    tb = {(): b} if not b.is_zero() else {}
    terms = [a * b]
    for k in range(1, ctx.max_order + 1):
        ta = _sym_derivative(ta, k - 1, ctx)
        if not ta:
            return terms, False
        tb = _sym_derivative(tb, k - 1, ctx)
        if not tb:
            return terms, False
        terms.append(_sym_contract(ta, tb, rows))
    k = ctx.max_order
    if not (_sym_derivative(ta, k, ctx) and _sym_derivative(tb, k, ctx)):
        return terms, False
    return terms, not _flat_terminates(a, b, ctx)


def _flat_terminates(a: Expr, b: Expr, ctx: CovariantContext) -> bool:
    # Termwise invariance: the k-th covariant term is the pullback of the k-th
    # flat term, so a flat proof of termination covers the covariant series.
    t = ctx.transformation
    cfg = StarConfig(t.source, max_order=ctx.max_order)
    return series_terminates(pushforward(a, t), pushforward(b, t), cfg)


def vey_star_series(a, b, ctx: CovariantContext) -> StarSeries:
    a, b = Expr.coerce(a), Expr.coerce(b)
    terms, truncated = covariant_terms(a, b, ctx)
    half = IHBAR / 2
    value = ZERO
    factor = ONE
    contribs = []
    for k, t in enumerate(terms):
        if k:
            factor = factor * half / k
        c = factor * t
        contribs.append(c)
        value = value + c
    notes = (f"truncated at order {len(terms) - 1}",) if truncated else ()
    return StarSeries(value, tuple(contribs), truncated, len(terms) - 1, notes)


def vey_star(a, b, ctx: CovariantContext) -> Expr:
    s = vey_star_series(a, b, ctx)
    if s.truncated:
        warnings.warn(f"covariant star product truncated at order {s.order}", TruncationWarning, stacklevel=2)
    return s.value


def vey_bracket_series(a, b, ctx: CovariantContext) -> StarSeries:
    ab = vey_star_series(a, b, ctx)
    ba = vey_star_series(b, a, ctx)
    truncated = ab.truncated or ba.truncated
    order = max(ab.order, ba.order)
    notes = (f"truncated at order {order}",) if truncated else ()
    return StarSeries((ab.value - ba.value) / IHBAR, (), truncated, order, notes)


def vey_bracket(a, b, ctx: CovariantContext) -> Expr:
    s = vey_bracket_series(a, b, ctx)
    if s.truncated:
        warnings.warn(f"generalized bracket truncated at order {s.order}", TruncationWarning, stacklevel=2)
    return s.value


class SymbolTable(dict):
    """Generator name -> classical symbol in the target chart."""

    @classmethod
    def from_transformation(cls, t: Transformation) -> "SymbolTable":
        return cls({v: t.forward[v] for v in t.source.coords})

    def symbol(self, g: Generator | str) -> Expr:
        name = g.name if isinstance(g, Generator) else g
        try:
            return self[name]
        except KeyError:
            raise KeyError(f"no symbol for generator {name!r}") from None


def generalized_weyl_symbol(a: OperatorPoly, table: Mapping[str, Expr], ctx: CovariantContext) -> Expr:
    """``W'(g rest) = symbol(g) *' W'(rest)``, extended linearly."""
    table = table if isinstance(table, SymbolTable) else SymbolTable(table)
    memo: dict = {(): ONE}

    def word_symbol(w: tuple) -> Expr:
        if w in memo:
            return memo[w]
        rest = word_symbol(w[1:])
        s = vey_star_series(table.symbol(w[0]), rest, ctx)
        if s.truncated:
            raise RuntimeError(f"covariant star product with {w[0].name} did not terminate")
        memo[w] = s.value
        return s.value

    acc = ZERO
    for w, c in a.terms.items():
        acc = acc + c * word_symbol(w)
    return acc
