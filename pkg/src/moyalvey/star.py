"""Flat Moyal calculus: star product, Moyal and Poisson brackets."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable

from .expr import HBAR, I, ONE, ZERO, Expr, parse
from .matrix import SymbolicMatrix

__all__ = [
    "Chart",
    "SymplecticMatrix",
    "StarConfig",
    "StarSeries",
    "TruncationWarning",
    "standard_symplectic",
    "poisson_bracket",
    "bidifferential_terms",
    "moyal_star_series",
    "moyal_star",
    "moyal_bracket_series",
    "moyal_bracket",
    "moyal_bracket_sine",
    "star_conjugate",
    "series_terminates",
]

IHBAR = I * HBAR
HALF_IHBAR = IHBAR / 2


class TruncationWarning(UserWarning):
    """A series was cut at its maximal order while terms were still nonzero."""


@dataclass(frozen=True)
class Chart:
    """Canonical coordinates, paired as ``(positions[k], momenta[k])``.

    ``coords`` lists momenta first, then positions, which fixes the index
    order of every matrix and tensor over the chart.  ``params`` are named
    constants (masses, couplings) that may appear in expressions but are never
    differentiated.
    """

    positions: tuple[str, ...]
    momenta: tuple[str, ...]
    params: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "positions", tuple(self.positions))
        object.__setattr__(self, "momenta", tuple(self.momenta))
        object.__setattr__(self, "params", tuple(self.params))
        if len(self.positions) != len(self.momenta):
            raise ValueError("chart needs as many momenta as positions")
        names = self.positions + self.momenta + self.params
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate names in chart: {names}")

    @classmethod
    def from_names(cls, names: Iterable[str], params: Iterable[str] = ()) -> "Chart":
        """``[q1..qN, p1..pN]`` -> chart."""
        names = list(names)
        if len(names) % 2:
            raise ValueError("chart needs an even number of variables")
        n = len(names) // 2
        return cls(tuple(names[:n]), tuple(names[n:]), tuple(params))

    @property
    def n(self) -> int:
        return len(self.positions)

    @property
    def coords(self) -> tuple[str, ...]:
        return self.momenta + self.positions

    @property
    def variables(self) -> tuple[str, ...]:
        """Positions then momenta, the order used for display."""
        return self.positions + self.momenta

    def index(self, name: str) -> int:
        return self.coords.index(name)

    def pair_of(self, name: str) -> int:
        if name in self.positions:
            return self.positions.index(name)
        return self.momenta.index(name)

    def is_position(self, name: str) -> bool:
        return name in self.positions

    def parse(self, text: str) -> Expr:
        return parse(text, self.variables, self.params)

    def with_params(self, params: Iterable[str]) -> "Chart":
        return Chart(self.positions, self.momenta, tuple(params))


class SymplecticMatrix(SymbolicMatrix):
    """Antisymmetric Poisson tensor ``J^{kl}`` over a chart's coords."""

    __slots__ = ()

    def __init__(self, rows, labels=None):
        super().__init__(rows, labels, labels)
        if not self.is_antisymmetric():
            raise ValueError("symplectic matrix must be antisymmetric")


def standard_symplectic(chart: Chart) -> SymplecticMatrix:
    n = chart.n
    rows = [[ZERO] * (2 * n) for _ in range(2 * n)]
    for k in range(n):
        rows[k][n + k] = -ONE
        rows[n + k][k] = ONE
    return SymplecticMatrix(rows, chart.coords)


@dataclass(frozen=True)
class StarConfig:
    chart: Chart
    j: SymbolicMatrix = None
    max_order: int = 8

    def __post_init__(self):
        if self.j is None:
            object.__setattr__(self, "j", standard_symplectic(self.chart))
        if self.max_order < 1:
            raise ValueError("max_order must be at least 1")


@dataclass(frozen=True)
class StarSeries:
    """Result of a (possibly truncated) bidifferential series."""

    value: Expr
    terms: tuple[Expr, ...] = ()
    truncated: bool = False
    order: int = 0
    notes: tuple[str, ...] = field(default=())


def _check_constant(cfg: StarConfig) -> list[list[tuple[int, Expr]]]:
    coords = cfg.chart.coords
    raised = []
    for i in range(len(coords)):
        row = []
        for j in range(len(coords)):
            x = cfg.j[i, j]
            if x.is_zero():
                continue
            if not x.free_of(coords):
                raise ValueError("the flat Moyal product needs a constant symplectic matrix")
            row.append((j, x))
        raised.append(row)
    return raised


def _next_level(level: dict, op) -> dict:
    out = {}
    for idx, val in level.items():
        start = idx[-1] if idx else 0
        for i in range(start, op.dim):
            d = op(i, val)
            if not d.is_zero():
                out[idx + (i,)] = d
    return out


class _Partial:
    def __init__(self, coords):
        self.coords = coords
        self.dim = len(coords)

    def __call__(self, i, f):
        return f.diff(self.coords[i])


class _Raised:
    """``D_i f = J^{ij} d_j f``; commuting because J is constant."""

    def __init__(self, coords, raised):
        self.coords = coords
        self.raised = raised
        self.dim = len(coords)

    def __call__(self, i, f):
        acc = ZERO
        for j, x in self.raised[i]:
            d = f.diff(self.coords[j])
            if not d.is_zero():
                acc = acc + x * d
        return acc


def _multiset_weight(idx: tuple) -> Fraction:
    w = 1
    run = 1
    for a, b in zip(idx, idx[1:]):
        if a == b:
            run += 1
            w *= run
        else:
            run = 1
    return Fraction(1, w)


def bidifferential_terms(a: Expr, b: Expr, cfg: StarConfig) -> tuple[list[Expr], bool]:
    """``[a J_k b for k = 0..K]`` with ``J_k`` the k-th power of the Poisson operator.

    Stops as soon as no index multiset carries both a nonzero k-th partial of
    ``a`` and a nonzero raised k-th partial of ``b``; partials commute, so
    every later term vanishes too.  The flag is True when
    ``cfg.max_order`` was reached before that happened.
    """
    a, b = Expr.coerce(a), Expr.coerce(b)
    coords = cfg.chart.coords
    raised = _check_constant(cfg)
    left_op = _Partial(coords)
    right_op = _Raised(coords, raised)
    left = {(): a}
    right = {(): b}
    terms = [a * b]
    for k in range(1, cfg.max_order + 1):
        left = _next_level(left, left_op)
        if not left:
            return terms, False
        right = _next_level(right, right_op)
        if not right.keys() & left.keys():
            # disjoint supports stay disjoint at every higher order
            return terms, False
        acc = ZERO
        for idx, av in left.items():
            bv = right.get(idx)
            if bv is not None:
                acc = acc + (av * bv).scale(_multiset_weight(idx))
        terms.append(acc.scale(math.factorial(k)))
    left = _next_level(left, left_op)
    right = _next_level(right, right_op) if left else {}
    return terms, bool(left.keys() & right.keys())


def series_terminates(a, b, cfg: StarConfig) -> bool:
    """True when the flat series for ``a * b`` provably ends by ``cfg.max_order``."""
    return not bidifferential_terms(a, b, cfg)[1]


def moyal_star_series(a, b, cfg: StarConfig) -> StarSeries:
    terms, truncated = bidifferential_terms(a, b, cfg)
    contribs = []
    value = ZERO
    factor = ONE
    for k, t in enumerate(terms):
        if k:
            factor = factor * HALF_IHBAR / k
        c = factor * t
        contribs.append(c)
        value = value + c
    notes = (f"truncated at order {len(terms) - 1}",) if truncated else ()
    return StarSeries(value, tuple(contribs), truncated, len(terms) - 1, notes)


def _warn(series: StarSeries, what: str):
    if series.truncated:
        warnings.warn(f"{what} truncated at order {series.order}", TruncationWarning, stacklevel=3)


def moyal_star(a, b, cfg: StarConfig) -> Expr:
    """Moyal product ``a * b``; warns with :class:`TruncationWarning` if cut short."""
    s = moyal_star_series(a, b, cfg)
    _warn(s, "star product")
    return s.value


def moyal_bracket_series(a, b, cfg: StarConfig) -> StarSeries:
    ab = moyal_star_series(a, b, cfg)
    ba = moyal_star_series(b, a, cfg)
    value = (ab.value - ba.value) / IHBAR
    truncated = ab.truncated or ba.truncated
    order = max(ab.order, ba.order)
    notes = (f"truncated at order {order}",) if truncated else ()
    return StarSeries(value, (), truncated, order, notes)


def moyal_bracket(a, b, cfg: StarConfig) -> Expr:
    """``(a*b - b*a) / (i hbar)``, so that ``[q, p]_M = 1``."""
    s = moyal_bracket_series(a, b, cfg)
    _warn(s, "Moyal bracket")
    return s.value


def moyal_bracket_sine(a, b, cfg: StarConfig) -> Expr:
    """Bracket from the sine series ``(2/hbar) a sin(hbar/2 J) b``."""
    terms, truncated = bidifferential_terms(a, b, cfg)
    if truncated:
        warnings.warn("sine series truncated", TruncationWarning, stacklevel=2)
    acc = ZERO
    for k in range(1, len(terms), 2):
        sign = -1 if (k // 2) % 2 else 1
        coeff = Fraction(sign * 2, math.factorial(k) * 2 ** k)
        acc = acc + (terms[k] * HBAR ** (k - 1)).scale(coeff)
    return acc


def poisson_bracket(a, b, cfg: StarConfig) -> Expr:
    a, b = Expr.coerce(a), Expr.coerce(b)
    coords = cfg.chart.coords
    da = [a.diff(c) for c in coords]
    db = [b.diff(c) for c in coords]
    acc = ZERO
    for k, x in enumerate(da):
        if x.is_zero():
            continue
        for l, y in enumerate(db):
            j = cfg.j[k, l]
            if y.is_zero() or j.is_zero():
                continue
            acc = acc + x * j * y
    return acc


def star_conjugate(u, u_inv, a, cfg: StarConfig) -> Expr:
    """``u * a * u_inv`` after checking that ``u * u_inv = 1``."""
    if moyal_star(u, u_inv, cfg) != ONE:
        raise ValueError("u * u_inv is not the identity")
    return moyal_star(u, moyal_star(a, u_inv, cfg), cfg)
