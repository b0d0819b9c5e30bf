"""Noncommutative polynomials in canonical operators q_k, p_k.

Operators are linear combinations of words (tuples of :class:`Generator`)
with coefficients that are :class:`Expr` values free of phase-space
variables (rationals, ``i``, ``hbar`` and named parameters only).  The normal
form puts, within each conjugate pair, every position left of every momentum
using ``p q = q p - i hbar``; distinct pairs commute.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping

from .expr import HBAR, I, ONE, ZERO, Expr, const, fold_tree, parse_tree, var
from .star import Chart, StarConfig, moyal_star_series, poisson_bracket

__all__ = [
    "Generator",
    "OperatorPoly",
    "OperatorSeries",
    "generators",
    "parse_operator",
    "normal_order",
    "symmetrize",
    "weyl_symbol",
    "weyl_symbol_mccoy",
    "weyl_quantize",
    "commutator",
    "heisenberg_evolve",
]

IHBAR = I * HBAR
_MINUS_IHBAR = -IHBAR


@dataclass(frozen=True, order=True)
class Generator:
    pair: int
    kind: str  # "position" | "momentum"
    name: str

    def __post_init__(self):
        if self.kind not in ("position", "momentum"):
            raise ValueError(f"bad generator kind {self.kind!r}")

    @property
    def is_position(self) -> bool:
        return self.kind == "position"

    def __str__(self):
        return self.name


def generators(chart: Chart) -> dict[str, Generator]:
    out = {}
    for k, (q, p) in enumerate(zip(chart.positions, chart.momenta), start=1):
        out[q] = Generator(k, "position", q)
        out[p] = Generator(k, "momentum", p)
    return out


class OperatorPoly:
    __slots__ = ("chart", "terms")

    def __init__(self, chart: Chart, terms: Mapping[tuple, Expr] | None = None):
        self.chart = chart
        clean = {}
        coords = set(chart.coords)
        for word, c in (terms or {}).items():
            c = Expr.coerce(c)
            if c.is_zero():
                continue
            if c.has_atoms() or not c.free_of(coords):
                raise ValueError(f"operator coefficient {c} depends on phase-space variables")
            word = tuple(word)
            clean[word] = clean[word] + c if word in clean else c
            if clean[word].is_zero():
                del clean[word]
        self.terms = clean

    # -- constructors --------------------------------------------------------

    @classmethod
    def gen(cls, chart: Chart, name: str) -> "OperatorPoly":
        return cls(chart, {(generators(chart)[name],): ONE})

    @classmethod
    def scalar(cls, chart: Chart, c) -> "OperatorPoly":
        return cls(chart, {(): Expr.coerce(c)})

    @classmethod
    def word(cls, chart: Chart, names: Iterable[str], coeff=1) -> "OperatorPoly":
        g = generators(chart)
        return cls(chart, {tuple(g[n] for n in names): Expr.coerce(coeff)})

    # -- arithmetic ----------------------------------------------------------

    def _lift(self, other) -> "OperatorPoly | None":
        if isinstance(other, OperatorPoly):
            if other.chart.coords != self.chart.coords:
                raise ValueError("operators over different charts")
            return other
        if isinstance(other, (int, Fraction, Expr)):
            return OperatorPoly.scalar(self.chart, other)
        return None

    def __add__(self, other):
        other = self._lift(other)
        if other is None:
            return NotImplemented
        terms = dict(self.terms)
        for w, c in other.terms.items():
            terms[w] = terms[w] + c if w in terms else c
        return OperatorPoly(self.chart, terms)

    __radd__ = __add__

    def __neg__(self):
        return OperatorPoly(self.chart, {w: -c for w, c in self.terms.items()})

    def __sub__(self, other):
        other = self._lift(other)
        if other is None:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        other = self._lift(other)
        if other is None:
            return NotImplemented
        return other + (-self)

    def __mul__(self, other):
        other = self._lift(other)
        if other is None:
            return NotImplemented
        terms: dict = {}
        for w1, c1 in self.terms.items():
            for w2, c2 in other.terms.items():
                w = w1 + w2
                c = c1 * c2
                terms[w] = terms[w] + c if w in terms else c
        return OperatorPoly(self.chart, terms)

    def __rmul__(self, other):
        other = self._lift(other)
        if other is None:
            return NotImplemented
        return other * self

    def scalar_value(self) -> Expr | None:
        if not self.terms:
            return ZERO
        if set(self.terms) == {()}:
            return self.terms[()]
        return None

    def __truediv__(self, other):
        other = self._lift(other)
        if other is None:
            return NotImplemented
        s = other.scalar_value()
        if s is None:
            raise ValueError("can only divide operators by scalars")
        inv = s ** -1
        return OperatorPoly(self.chart, {w: c * inv for w, c in self.terms.items()})

    def __pow__(self, n: int):
        if not isinstance(n, int):
            raise TypeError("integer powers only")
        if n < 0:
            s = self.scalar_value()
            if s is None:
                raise ValueError("negative powers of non-scalar operators")
            return OperatorPoly.scalar(self.chart, s ** n)
        out = OperatorPoly.scalar(self.chart, 1)
        for _ in range(n):
            out = out * self
        return out

    def __eq__(self, other):
        if not isinstance(other, OperatorPoly):
            return NotImplemented
        return self.chart.coords == other.chart.coords and self.terms == other.terms

    __hash__ = None

    def is_zero(self) -> bool:
        return not self.terms

    def equivalent(self, other) -> bool:
        """Equal as operators, i.e. after normal ordering."""
        return normal_order(self - other).is_zero()

    # -- output --------------------------------------------------------------

    def render(self) -> str:
        if not self.terms:
            return "0"
        pieces = []
        for w in sorted(self.terms, key=lambda w: (-len(w), w)):
            c = self.terms[w]
            word = "*".join(g.name for g in w)
            cs = c.render(self.chart.variables)
            if not word:
                body = cs if len(c.terms) == 1 else f"({cs})"
            elif c == ONE:
                body = word
            elif c == -ONE:
                body = "-" + word
            elif len(c.terms) == 1:
                body = f"{cs}*{word}"
            else:
                body = f"({cs})*{word}"
            pieces.append(body)
        out = pieces[0]
        for p in pieces[1:]:
            out += f" - {p[1:]}" if p.startswith("-") else f" + {p}"
        return out

    def __str__(self):
        return self.render()

    def __repr__(self):
        return f"OperatorPoly({self.render()!r})"


def parse_operator(text: str, chart: Chart, juxtapose: bool = False) -> OperatorPoly:
    """Operator DSL: identifiers are generators or parameters, ``*`` concatenates."""
    from .expr import UnknownIdentifierError

    gens = generators(chart)
    tree = parse_tree(text, juxtapose=juxtapose)

    def resolve(name, pos):
        if name in gens:
            return OperatorPoly(chart, {(gens[name],): ONE})
        if name in chart.params:
            return OperatorPoly.scalar(chart, var(name))
        raise UnknownIdentifierError(name, pos)

    def number(x):
        return OperatorPoly.scalar(chart, const(x))

    return fold_tree(tree, resolve, number, OperatorPoly.scalar(chart, I),
                     OperatorPoly.scalar(chart, HBAR))


# ---------------------------------------------------------------------------
# Normal form: dict mapping an exponent tuple (a_1, b_1, ..., a_N, b_N) for
# q_1^a_1 p_1^b_1 ... q_N^a_N p_N^b_N to its coefficient.


def _nf_add(acc: dict, key, c: Expr):
    prev = acc.get(key)
    if prev is None:
        acc[key] = c
    else:
        s = prev + c
        if s.is_zero():
            del acc[key]
        else:
            acc[key] = s


def _nf_word(word: tuple, n: int) -> dict:
    state = {(0,) * (2 * n): ONE}
    for g in word:
        k = 2 * (g.pair - 1)
        nxt: dict = {}
        for exps, c in state.items():
            if g.is_position:
                e = list(exps)
                e[k] += 1
                _nf_add(nxt, tuple(e), c)
                b = exps[k + 1]
                if b:
                    # p^b q = q p^b - i hbar b p^(b-1)
                    e = list(exps)
                    e[k + 1] -= 1
                    _nf_add(nxt, tuple(e), c * _MINUS_IHBAR * b)
            else:
                e = list(exps)
                e[k + 1] += 1
                _nf_add(nxt, tuple(e), c)
        state = nxt
    return state


def _nf(a: OperatorPoly) -> dict:
    n = a.chart.n
    acc: dict = {}
    for w, c in a.terms.items():
        for exps, d in _nf_word(w, n).items():
            _nf_add(acc, exps, c * d)
    return acc


def _pair_product(a: int, b: int, c: int, d: int) -> list[tuple[int, int, Expr]]:
    # (q^a p^b)(q^c p^d) = sum_j j! C(b,j) C(c,j) (-i hbar)^j q^(a+c-j) p^(b+d-j)
    out = []
    for j in range(min(b, c) + 1):
        coeff = math.factorial(j) * math.comb(b, j) * math.comb(c, j)
        out.append((a + c - j, b + d - j, _MINUS_IHBAR ** j * coeff))
    return out


def _nf_mul(x: dict, y: dict, n: int) -> dict:
    acc: dict = {}
    for ex, cx in x.items():
        for ey, cy in y.items():
            partial = [((), cx * cy)]
            for k in range(n):
                a, b = ex[2 * k], ex[2 * k + 1]
                c, d = ey[2 * k], ey[2 * k + 1]
                options = _pair_product(a, b, c, d)
                partial = [(e + (u, v), coef * w) for e, coef in partial for u, v, w in options]
            for e, coef in partial:
                _nf_add(acc, e, coef)
    return acc


def _nf_sub(x: dict, y: dict) -> dict:
    acc = dict(x)
    for e, c in y.items():
        _nf_add(acc, e, -c)
    return acc


def _nf_to_poly(chart: Chart, nf: dict) -> OperatorPoly:
    gens = generators(chart)
    terms = {}
    for exps, c in nf.items():
        word = []
        for k, (q, p) in enumerate(zip(chart.positions, chart.momenta)):
            word += [gens[q]] * exps[2 * k] + [gens[p]] * exps[2 * k + 1]
        terms[tuple(word)] = c
    return OperatorPoly(chart, terms)


def normal_order(a: OperatorPoly) -> OperatorPoly:
    """Unique normal form: positions left of momenta within each pair."""
    return _nf_to_poly(a.chart, _nf(a))


def commutator(a: OperatorPoly, b: OperatorPoly) -> OperatorPoly:
    n = a.chart.n
    x, y = _nf(a), _nf(b)
    return _nf_to_poly(a.chart, _nf_sub(_nf_mul(x, y, n), _nf_mul(y, x, n)))


def symmetrize(word: Iterable[Generator], chart: Chart) -> OperatorPoly:
    """Average over the distinct orderings of the word's generators."""
    perms = sorted(set(itertools.permutations(tuple(word))))
    w = Fraction(1, len(perms))
    return OperatorPoly(chart, {p: const(w) for p in perms})


# ---------------------------------------------------------------------------
# Weyl correspondence


def weyl_symbol(a: OperatorPoly, cfg: StarConfig | None = None) -> Expr:
    """Weyl symbol via the morphism ``W(g rest) = g * W(rest)``."""
    cfg = cfg or StarConfig(a.chart)
    memo: dict = {(): ONE}

    def word_symbol(w: tuple) -> Expr:
        if w in memo:
            return memo[w]
        rest = word_symbol(w[1:])
        s = moyal_star_series(var(w[0].name), rest, cfg)
        if s.truncated:
            raise RuntimeError("star product of a generator did not terminate")
        memo[w] = s.value
        return s.value

    acc = ZERO
    for w, c in a.terms.items():
        acc = acc + c * word_symbol(w)
    return acc


def _split_monomial(mono: tuple, chart: Chart) -> tuple[tuple[int, ...], tuple]:
    """Chart exponents (a_1, b_1, ...) and the leftover coefficient monomial."""
    hk, vs, ats = mono
    exps = [0] * (2 * chart.n)
    rest = []
    for v, e in vs:
        if v in chart.positions:
            exps[2 * chart.positions.index(v)] = e
        elif v in chart.momenta:
            exps[2 * chart.momenta.index(v) + 1] = e
        else:
            rest.append((v, e))
    return tuple(exps), (hk, tuple(rest), ats)


def _mccoy(chart: Chart, exps: tuple) -> OperatorPoly:
    gens = generators(chart)
    out = OperatorPoly.scalar(chart, 1)
    for k, (qn, pn) in enumerate(zip(chart.positions, chart.momenta)):
        m, n = exps[2 * k], exps[2 * k + 1]
        q, p = gens[qn], gens[pn]
        terms = {}
        for j in range(n + 1):
            w = (p,) * j + (q,) * m + (p,) * (n - j)
            terms[w] = terms.get(w, ZERO) + const(Fraction(math.comb(n, j), 2 ** n))
        out = out * OperatorPoly(chart, terms)
    return out


def weyl_quantize(e: Expr, chart: Chart) -> OperatorPoly:
    """Weyl-ordered operator of a polynomial symbol (McCoy form per pair)."""
    e = Expr.coerce(e)
    if not e.is_polynomial(chart.coords) or e.has_atoms():
        raise ValueError(f"weyl_quantize needs a polynomial symbol, got {e}")
    out = OperatorPoly(chart)
    for mono, c in e.terms.items():
        exps, rest = _split_monomial(mono, chart)
        coeff = Expr._wrap({rest: c})
        out = out + _mccoy(chart, exps) * coeff
    return out


def weyl_symbol_mccoy(a: OperatorPoly) -> Expr:
    """Independent oracle: peel Weyl-ordered monomials off the normal form."""
    chart = a.chart
    n = chart.n
    rem = _nf(a)
    symbol = ZERO
    while rem:
        exps = max(rem, key=lambda e: (sum(e), e))
        c = rem[exps]
        mono = ONE
        for k in range(n):
            mono = mono * var(chart.positions[k]) ** exps[2 * k] * var(chart.momenta[k]) ** exps[2 * k + 1]
        symbol = symbol + c * mono
        sub = {e: d * c for e, d in _nf(_mccoy(chart, exps)).items()}
        rem = _nf_sub(rem, sub)
    return symbol


def classical_limit_bracket(a: OperatorPoly, b: OperatorPoly) -> tuple[Expr, Expr]:
    """``W([a,b]/(i hbar))`` at hbar^0 alongside the Poisson bracket of the symbols."""
    cfg = StarConfig(a.chart)
    quantum = weyl_symbol(commutator(a, b)) / IHBAR
    return quantum.hbar_grade(0), poisson_bracket(weyl_symbol(a), weyl_symbol(b), cfg).hbar_grade(0)


# ---------------------------------------------------------------------------
# Heisenberg picture


@dataclass(frozen=True)
class OperatorSeries:
    """``a(t) = sum_n terms[n] t^n`` with nonzero coefficients only."""

    terms: tuple[tuple[int, OperatorPoly], ...]
    truncated: bool = False

    def coefficient(self, n: int) -> OperatorPoly | None:
        for k, c in self.terms:
            if k == n:
                return c
        return None


def heisenberg_evolve(a: OperatorPoly, h: OperatorPoly, max_order: int = 12) -> OperatorSeries:
    """Taylor coefficients ``(1/n!) (1/(i hbar))^n ad_h^n(a)`` with ``ad_h(x) = [x, h]``."""
    if max_order < 0:
        raise ValueError("max_order must be nonnegative")
    n = a.chart.n
    hnf = _nf(h)
    cur = _nf(a)
    terms = []
    if cur:
        terms.append((0, _nf_to_poly(a.chart, cur)))
    for k in range(1, max_order + 2):
        if not cur:
            return OperatorSeries(tuple(terms), False)
        comm = _nf_sub(_nf_mul(cur, hnf, n), _nf_mul(hnf, cur, n))
        scale = (IHBAR * k) ** -1
        cur = {e: c * scale for e, c in comm.items()}
        if k > max_order:
            return OperatorSeries(tuple(terms), bool(cur))
        if cur:
            terms.append((k, _nf_to_poly(a.chart, cur)))
    raise AssertionError("unreachable")
