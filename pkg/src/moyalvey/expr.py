"""Exact symbolic expressions over phase-space variables.

Every :class:`Expr` is stored directly in canonical form: a finite sum of
monomials ``c * hbar^k * prod(v^e) * prod(atom^m)`` where ``c`` is a Gaussian
rational, exponents are (possibly negative) integers and atoms are opaque
``ln(u)``, ``exp(u)`` or ``(u)^-1`` factors whose arguments are themselves
canonical.  Two expressions are equal exactly when their canonical forms
coincide, so ``==`` is the structural equality used throughout the package.
"""

from __future__ import annotations

import cmath
import math
import re
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Iterable, Mapping

import numpy as np

__all__ = [
    "Scalar",
    "Atom",
    "Expr",
    "DSLSyntaxError",
    "UnknownIdentifierError",
    "EvaluationError",
    "const",
    "var",
    "ln",
    "exp",
    "HBAR",
    "I",
    "ZERO",
    "ONE",
    "parse",
    "parse_tree",
    "differentiate",
    "substitute",
    "normalize",
    "equals",
    "eval_numeric",
    "render",
]


class DSLSyntaxError(ValueError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


class UnknownIdentifierError(ValueError):
    def __init__(self, token: str, position: int):
        super().__init__(f"unknown identifier {token!r} at position {position}")
        self.token = token
        self.position = position


class EvaluationError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Gaussian rationals


class Scalar:
    """Exact Gaussian rational ``re + im*i``."""

    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        self.re = re if type(re) is Fraction else Fraction(re)
        self.im = im if type(im) is Fraction else Fraction(im)

    @classmethod
    def _raw(cls, re: Fraction, im: Fraction) -> "Scalar":
        s = object.__new__(cls)
        s.re = re
        s.im = im
        return s

    @classmethod
    def coerce(cls, x) -> "Scalar":
        if isinstance(x, Scalar):
            return x
        if isinstance(x, (int, Fraction)):
            return cls._raw(Fraction(x), _F0)
        if isinstance(x, complex):
            raise TypeError("floating complex values are not exact scalars")
        raise TypeError(f"cannot convert {type(x).__name__} to Scalar")

    @property
    def re_num(self) -> int:
        return self.re.numerator

    @property
    def re_den(self) -> int:
        return self.re.denominator

    @property
    def im_num(self) -> int:
        return self.im.numerator

    @property
    def im_den(self) -> int:
        return self.im.denominator

    def __bool__(self):
        return bool(self.re) or bool(self.im)

    def __eq__(self, other):
        if isinstance(other, Scalar):
            return self.re == other.re and self.im == other.im
        if isinstance(other, (int, Fraction)):
            return self.im == 0 and self.re == other
        return NotImplemented

    def __hash__(self):
        return hash((self.re, self.im))

    def __add__(self, other: "Scalar") -> "Scalar":
        return Scalar._raw(self.re + other.re, self.im + other.im)

    def __sub__(self, other: "Scalar") -> "Scalar":
        return Scalar._raw(self.re - other.re, self.im - other.im)

    def __neg__(self) -> "Scalar":
        return Scalar._raw(-self.re, -self.im)

    def __mul__(self, other: "Scalar") -> "Scalar":
        a, b, c, d = self.re, self.im, other.re, other.im
        if not b:
            if not d:
                return Scalar._raw(a * c, _F0)
            return Scalar._raw(a * c, a * d)
        if not d:
            return Scalar._raw(a * c, b * c)
        return Scalar._raw(a * c - b * d, a * d + b * c)

    def inverse(self) -> "Scalar":
        a, b = self.re, self.im
        if not b:
            if not a:
                raise ZeroDivisionError("inverse of zero scalar")
            return Scalar._raw(1 / a, _F0)
        n = a * a + b * b
        return Scalar._raw(a / n, -b / n)

    def __truediv__(self, other: "Scalar") -> "Scalar":
        return self * other.inverse()

    def conjugate(self) -> "Scalar":
        return Scalar._raw(self.re, -self.im)

    def __complex__(self):
        return complex(float(self.re), float(self.im))

    def render(self) -> str:
        return _render_scalar(self)

    def __repr__(self):
        return f"Scalar({self.render()})"


_F0 = Fraction(0)
_F1 = Fraction(1)
_S1 = Scalar._raw(_F1, _F0)


def _render_rational(x: Fraction) -> str:
    if x.denominator == 1:
        return str(x.numerator)
    return f"{x.numerator}/{x.denominator}"


def _render_scalar(s: Scalar) -> str:
    re_, im = s.re, s.im
    if not im:
        if re_.denominator == 1:
            return str(re_.numerator)
        sign = "-" if re_ < 0 else ""
        return f"{sign}({_render_rational(abs(re_))})"
    if not re_:
        if im == 1:
            return "i"
        if im == -1:
            return "-i"
        if im.denominator == 1:
            return f"{im.numerator}*i"
        sign = "-" if im < 0 else ""
        return f"{sign}({_render_rational(abs(im))})*i"
    op = "+" if im > 0 else "-"
    return f"({_render_rational(re_)} {op} {_render_rational(abs(im))}*i)"


# ---------------------------------------------------------------------------
# Monomials and atoms
#
# A monomial is the triple (hbar_power, vars, atoms) where ``vars`` is a tuple
# of (name, exponent) sorted by name and ``atoms`` a tuple of (Atom, exponent)
# sorted by the atom key.  Zero exponents never appear.


class Atom:
    """Opaque transcendental factor: ``ln(u)``, ``exp(u)`` or ``inv`` = ``(u)^-1``."""

    __slots__ = ("kind", "arg", "key", "_hash")

    def __init__(self, kind: str, arg: "Expr"):
        self.kind = kind
        self.arg = arg
        self.key = (kind, arg.render())
        self._hash = hash(self.key)

    def __eq__(self, other):
        return isinstance(other, Atom) and self.key == other.key

    def __hash__(self):
        return self._hash

    def render(self, order=None) -> str:
        if self.kind == "inv":
            return f"({self.arg.render(order)})"
        return f"{self.kind}({self.arg.render(order)})"

    def __repr__(self):
        return f"Atom({self.kind}, {self.arg.render()})"


def _merge(a: tuple, b: tuple, key: Callable | None) -> tuple:
    if not a:
        return b
    if not b:
        return a
    d = dict(a)
    for k, e in b:
        n = d.get(k, 0) + e
        if n:
            d[k] = n
        else:
            del d[k]
    if key is None:
        return tuple(sorted(d.items()))
    return tuple(sorted(d.items(), key=key))


def _atom_key(item):
    return item[0].key


@lru_cache(maxsize=1 << 16)
def _mono_mul(m1: tuple, m2: tuple) -> tuple:
    return (m1[0] + m2[0], _merge(m1[1], m2[1], None), _merge(m1[2], m2[2], _atom_key))


_UNIT_MONO = (0, (), ())


# ---------------------------------------------------------------------------
# Expressions


class Expr:
    """Immutable canonical expression; see module docstring."""

    __slots__ = ("_terms", "_hash", "_str")

    def __init__(self, terms: Mapping[tuple, Scalar] | None = None):
        self._terms = dict(terms) if terms else {}
        self._hash = None
        self._str = None

    @classmethod
    def _wrap(cls, terms: dict) -> "Expr":
        e = object.__new__(cls)
        e._terms = terms
        e._hash = None
        e._str = None
        return e

    # -- construction ------------------------------------------------------

    @staticmethod
    def coerce(x) -> "Expr":
        if isinstance(x, Expr):
            return x
        return const(x)

    # -- structure ---------------------------------------------------------

    @property
    def terms(self) -> dict:
        """Mapping monomial -> Scalar.  Treat as read-only."""
        return self._terms

    def is_zero(self) -> bool:
        return not self._terms

    def is_constant(self) -> bool:
        """True when free of variables and atoms (hbar allowed)."""
        return all(not m[1] and not m[2] for m in self._terms)

    def is_scalar(self) -> bool:
        return all(m == _UNIT_MONO for m in self._terms)

    def scalar_value(self) -> Scalar:
        if not self._terms:
            return Scalar._raw(_F0, _F0)
        if not self.is_scalar():
            raise ValueError(f"{self} is not a constant scalar")
        return self._terms[_UNIT_MONO]

    def variables(self) -> frozenset:
        out = set()
        for hk, vs, ats in self._terms:
            out.update(v for v, _ in vs)
            for a, _ in ats:
                out |= a.arg.variables()
        return frozenset(out)

    def has_atoms(self) -> bool:
        return any(m[2] for m in self._terms)

    def is_polynomial(self, variables: Iterable[str] | None = None) -> bool:
        """No atoms and no negative exponents in ``variables`` (default: all)."""
        names = None if variables is None else set(variables)
        for hk, vs, ats in self._terms:
            if ats:
                return False
            for v, e in vs:
                if e < 0 and (names is None or v in names):
                    return False
        return True

    def free_of(self, variables: Iterable[str]) -> bool:
        return not (self.variables() & set(variables))

    def degree(self, variables: Iterable[str] | None = None) -> int:
        names = None if variables is None else set(variables)
        best = 0
        for hk, vs, ats in self._terms:
            d = sum(e for v, e in vs if names is None or v in names)
            best = max(best, d)
        return best

    def hbar_grades(self) -> dict[int, "Expr"]:
        """Split by power of hbar: ``{k: coefficient of hbar^k}``."""
        grades: dict[int, dict] = {}
        for (hk, vs, ats), c in self._terms.items():
            grades.setdefault(hk, {})[(0, vs, ats)] = c
        return {k: Expr._wrap(t) for k, t in sorted(grades.items())}

    def hbar_grade(self, k: int) -> "Expr":
        return self.hbar_grades().get(k, ZERO)

    # -- arithmetic --------------------------------------------------------

    def __add__(self, other):
        other = _coerce_or_none(other)
        if other is None:
            return NotImplemented
        if not other._terms:
            return self
        if not self._terms:
            return other
        out = dict(self._terms)
        for m, c in other._terms.items():
            prev = out.get(m)
            if prev is None:
                out[m] = c
            else:
                s = prev + c
                if s:
                    out[m] = s
                else:
                    del out[m]
        return Expr._wrap(out)

    __radd__ = __add__

    def __neg__(self):
        return Expr._wrap({m: -c for m, c in self._terms.items()})

    def __sub__(self, other):
        other = _coerce_or_none(other)
        if other is None:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        other = _coerce_or_none(other)
        if other is None:
            return NotImplemented
        return other + (-self)

    def __mul__(self, other):
        other = _coerce_or_none(other)
        if other is None:
            return NotImplemented
        if not self._terms or not other._terms:
            return ZERO
        out: dict = {}
        for m1, c1 in self._terms.items():
            for m2, c2 in other._terms.items():
                m = _mono_mul(m1, m2)
                c = c1 * c2
                prev = out.get(m)
                if prev is None:
                    out[m] = c
                else:
                    s = prev + c
                    if s:
                        out[m] = s
                    else:
                        del out[m]
        return Expr._wrap(out)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = _coerce_or_none(other)
        if other is None:
            return NotImplemented
        if len(other._terms) > 1:
            quotient = _exact_quotient(self, other)
            if quotient is not None:
                return quotient
        return self * other ** -1

    def __rtruediv__(self, other):
        other = _coerce_or_none(other)
        if other is None:
            return NotImplemented
        return other * self ** -1

    def __pow__(self, n):
        if not isinstance(n, int):
            raise TypeError("only integer exponents are supported")
        if n == 0:
            return ONE
        if n < 0:
            return _invert(self) ** (-n)
        if len(self._terms) == 1:
            (m, c), = self._terms.items()
            return Expr._wrap({_mono_pow(m, n): _scalar_pow(c, n)})
        result = ONE
        base = self
        while n:
            if n & 1:
                result = result * base
            n >>= 1
            if n:
                base = base * base
        return result

    def scale(self, c) -> "Expr":
        c = Scalar.coerce(c)
        if not c:
            return ZERO
        return Expr._wrap({m: v * c for m, v in self._terms.items()})

    # -- equality ----------------------------------------------------------

    def __eq__(self, other):
        if isinstance(other, Expr):
            return self._terms == other._terms
        if isinstance(other, (int, Fraction, Scalar)):
            return self._terms == const(other)._terms
        return NotImplemented

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self._terms.items()))
        return self._hash

    # -- calculus ----------------------------------------------------------

    def diff(self, v: str) -> "Expr":
        return _diff(self, v)

    def subs(self, bindings: Mapping[str, "Expr"]) -> "Expr":
        return substitute(self, bindings)

    def evaluate(self, point: Mapping, hbar=1.0):
        return eval_numeric(self, point, hbar)

    # -- output ------------------------------------------------------------

    def render(self, order: Iterable[str] | None = None) -> str:
        if order is None:
            if self._str is None:
                self._str = _render(self, None)
            return self._str
        return _render(self, tuple(order))

    def __str__(self):
        return self.render()

    def __repr__(self):
        return f"Expr({self.render()!r})"


def _coerce_or_none(x):
    if isinstance(x, Expr):
        return x
    if isinstance(x, (int, Fraction, Scalar)):
        return const(x)
    return None


def _scalar_pow(c: Scalar, n: int) -> Scalar:
    out = _S1
    for _ in range(n):
        out = out * c
    return out


def _mono_pow(m: tuple, n: int) -> tuple:
    hk, vs, ats = m
    return (hk * n, tuple((v, e * n) for v, e in vs), tuple((a, e * n) for a, e in ats))


def _invert(e: Expr) -> Expr:
    if not e._terms:
        raise ZeroDivisionError("division by zero expression")
    if len(e._terms) == 1:
        (m, c), = e._terms.items()
        hk, vs, ats = m
        plain = []
        expanded = ONE
        for a, k in ats:
            if a.kind == "inv":
                # (u^-1)^k inverted is u^k
                expanded = expanded * a.arg ** k
            else:
                plain.append((a, -k))
        mono = (-hk, tuple((v, -x) for v, x in vs), tuple(plain))
        return Expr._wrap({mono: c.inverse()}) * expanded
    # Multi-term: pull out the leading coefficient so the atom argument is monic.
    lead = min(e._terms, key=_default_sort_key)
    c = e._terms[lead]
    monic = e.scale(c.inverse())
    return Expr._wrap({(0, (), ((Atom("inv", monic), 1),)): c.inverse()})


def _mono_vector(m: tuple, symbols: list) -> tuple | None:
    hk, vs, ats = m
    exps = dict(vs)
    for a, k in ats:
        if a.kind == "inv":
            return None
        exps[a.key] = k
    exps["\0hbar"] = hk
    vec = tuple(exps.get(sym, 0) for sym in symbols)
    if any(x < 0 for x in vec):
        return None
    return (sum(vec),) + vec


def _exact_quotient(a: Expr, b: Expr) -> Expr | None:
    """``a / b`` when both are polynomial and ``b`` divides ``a`` exactly, else None."""
    symbols = set()
    for e in (a, b):
        for hk, vs, ats in e._terms:
            symbols.update(v for v, _ in vs)
            symbols.update(x.key for x, _ in ats)
    symbols = ["\0hbar"] + sorted(symbols, key=str)
    key = {}
    for e in (a, b):
        for m in e._terms:
            vec = _mono_vector(m, symbols)
            if vec is None:
                return None
            key[m] = vec
    lead_b = max(b._terms, key=key.__getitem__)
    vb, cb = key[lead_b], b._terms[lead_b]
    rem, quot = a, ZERO
    while rem._terms:
        for m in rem._terms:
            if m not in key:
                key[m] = _mono_vector(m, symbols)
        lead = max(rem._terms, key=key.__getitem__)
        vr = key[lead]
        if any(x < y for x, y in zip(vr[1:], vb[1:])):
            return None
        step_mono = _mono_mul(lead, _mono_pow(lead_b, -1))
        step = Expr._wrap({step_mono: rem._terms[lead] / cb})
        quot = quot + step
        rem = rem - step * b
    return quot


def const(x) -> Expr:
    s = Scalar.coerce(x)
    if not s:
        return ZERO
    return Expr._wrap({_UNIT_MONO: s})


def var(name: str) -> Expr:
    return Expr._wrap({(0, ((name, 1),), ()): _S1})


def ln(u) -> Expr:
    u = Expr.coerce(u)
    if u == ONE:
        return ZERO
    if u.is_zero():
        raise EvaluationError("ln(0) is undefined")
    if len(u._terms) == 1:
        ((hk, vs, ats), c), = u._terms.items()
        # ln(exp(w)) = w for real w; the converse is never applied
        if c == _S1 and not hk and not vs and len(ats) == 1 and ats[0][1] == 1 and ats[0][0].kind == "exp":
            w = ats[0][0].arg
            if all(not x.im_num for x in w._terms.values()):
                return w
    return Expr._wrap({(0, (), ((Atom("ln", u), 1),)): _S1})


def exp(u) -> Expr:
    u = Expr.coerce(u)
    if u.is_zero():
        return ONE
    return Expr._wrap({(0, (), ((Atom("exp", u), 1),)): _S1})


ZERO = Expr._wrap({})
ONE = Expr._wrap({_UNIT_MONO: _S1})
I = Expr._wrap({_UNIT_MONO: Scalar._raw(_F0, _F1)})
HBAR = Expr._wrap({(1, (), ()): _S1})


# ---------------------------------------------------------------------------
# Differentiation and substitution


@lru_cache(maxsize=1 << 14)
def _atom_diff(a: Atom, v: str) -> Expr:
    du = _diff(a.arg, v)
    if du.is_zero():
        return ZERO
    if a.kind == "ln":
        return du * _invert(a.arg)
    if a.kind == "exp":
        return du * Expr._wrap({(0, (), ((a, 1),)): _S1})
    # d(u^-1) = -u' u^-2
    return -du * Expr._wrap({(0, (), ((a, 2),)): _S1})


def _diff(e: Expr, v: str) -> Expr:
    out = ZERO
    acc: dict = {}
    for (hk, vs, ats), c in e._terms.items():
        for idx, (name, k) in enumerate(vs):
            if name != v:
                continue
            if k == 1:
                nvs = vs[:idx] + vs[idx + 1:]
            else:
                nvs = vs[:idx] + ((name, k - 1),) + vs[idx + 1:]
            m = (hk, nvs, ats)
            cc = c * Scalar._raw(Fraction(k), _F0)
            prev = acc.get(m)
            if prev is None:
                acc[m] = cc
            else:
                s = prev + cc
                if s:
                    acc[m] = s
                else:
                    del acc[m]
        for idx, (a, k) in enumerate(ats):
            da = _atom_diff(a, v)
            if da.is_zero():
                continue
            if k == 1:
                nats = ats[:idx] + ats[idx + 1:]
            else:
                nats = ats[:idx] + ((a, k - 1),) + ats[idx + 1:]
            rest = Expr._wrap({(hk, vs, nats): c * Scalar._raw(Fraction(k), _F0)})
            out = out + rest * da
    return out + Expr._wrap(acc)


def differentiate(e: Expr, v: str) -> Expr:
    """Exact partial derivative of ``e`` with respect to the variable ``v``."""
    return _diff(e, v)


def substitute(e: Expr, bindings: Mapping[str, Expr]) -> Expr:
    """Simultaneously replace variables by expressions.

    Variables without a binding are left alone.  Atom arguments are rewritten
    recursively and the atoms rebuilt, so ``ln``/``exp`` of a substituted
    argument stay opaque.
    """
    if not bindings:
        return e
    bindings = {k: Expr.coerce(v) for k, v in bindings.items()}
    power_cache: dict = {}
    atom_cache: dict = {}

    def vpow(name, k):
        key = (name, k)
        r = power_cache.get(key)
        if r is None:
            base = bindings.get(name)
            if base is None:
                r = Expr._wrap({(0, ((name, k),), ()): _S1})
            else:
                r = base ** k
            power_cache[key] = r
        return r

    def apow(a: Atom, k):
        key = (a, k)
        r = atom_cache.get(key)
        if r is None:
            arg = substitute(a.arg, bindings)
            if a.kind == "ln":
                base = ln(arg)
            elif a.kind == "exp":
                base = exp(arg)
            else:
                base = arg ** -1
            r = base ** k
            atom_cache[key] = r
        return r

    out = ZERO
    for (hk, vs, ats), c in e._terms.items():
        term = Expr._wrap({(hk, (), ()): c})
        for name, k in vs:
            term = term * vpow(name, k)
        for a, k in ats:
            term = term * apow(a, k)
        out = out + term
    return out


def normalize(e: Expr) -> Expr:
    """Canonical form of ``e``.  Expressions are kept canonical, so this is the
    identity; it is idempotent by construction."""
    return Expr.coerce(e)


def equals(a, b) -> bool:
    return Expr.coerce(a) == Expr.coerce(b)


# ---------------------------------------------------------------------------
# Numeric evaluation


def eval_numeric(e: Expr, point: Mapping, hbar=1.0):
    """Evaluate ``e`` with variables bound from ``point``.

    Values may be Python numbers or numpy arrays (broadcast elementwise).
    Scalar inputs yield a ``complex``.
    """
    vectorized = any(isinstance(v, np.ndarray) for v in point.values())
    return _eval(e, point, hbar, vectorized)


def _eval(e: Expr, point, hbar, vectorized):
    total = 0j
    for (hk, vs, ats), c in e._terms.items():
        term = complex(c)
        if hk:
            term = term * complex(hbar) ** hk
        for name, k in vs:
            try:
                x = point[name]
            except KeyError:
                raise EvaluationError(f"unbound variable {name!r}") from None
            if k < 0 and _has_zero(x):
                raise EvaluationError(f"division by zero: {name}^{k} at {name}=0")
            if vectorized:
                term = term * np.asarray(x, dtype=complex) ** k
            else:
                term = term * complex(x) ** k
        for a, k in ats:
            u = _eval(a.arg, point, hbar, vectorized)
            if a.kind == "ln":
                if _has_zero(u):
                    raise EvaluationError("ln(0) is undefined")
                val = np.log(u) if vectorized else cmath.log(u)
            elif a.kind == "exp":
                val = np.exp(u) if vectorized else cmath.exp(u)
            else:
                if _has_zero(u):
                    raise EvaluationError(f"division by zero in ({a.arg})^-1")
                val = 1 / u
            if k < 0 and _has_zero(val):
                raise EvaluationError(f"division by zero in {a.render()}^{k}")
            term = term * val ** k
        total = total + term
    return total


def _has_zero(x) -> bool:
    if isinstance(x, np.ndarray):
        return bool(np.any(x == 0))
    return x == 0


# ---------------------------------------------------------------------------
# Rendering


def _default_sort_key(m: tuple):
    return _sort_key(m, {})


def _sort_key(m: tuple, rank: dict):
    hk, vs, ats = m
    deg = sum(e for _, e in vs)
    nvars = len(rank)
    vec = tuple(sorted(((rank.get(v, nvars), v), -e) for v, e in vs))
    return (-deg, vec, hk, tuple((a.key, -k) for a, k in ats))


def _render_factors(m: tuple, rank: dict, order) -> list[str]:
    hk, vs, ats = m
    nvars = len(rank)
    parts = []
    for v, e in sorted(vs, key=lambda p: (rank.get(p[0], nvars), p[0])):
        parts.append(v if e == 1 else f"{v}^{e}")
    if hk:
        parts.append("hbar" if hk == 1 else f"hbar^{hk}")
    for a, k in ats:
        s = a.render(order)
        if a.kind == "inv":
            k = -k
        parts.append(s if k == 1 else f"{s}^{k}")
    return parts


def _render(e: Expr, order) -> str:
    if not e._terms:
        return "0"
    rank = {v: i for i, v in enumerate(order)} if order else {}
    pieces = []
    for m in sorted(e._terms, key=lambda m: _sort_key(m, rank)):
        c = e._terms[m]
        factors = _render_factors(m, rank, order)
        negative = False
        if not c.im and c.re < 0:
            negative = True
            c = -c
        elif not c.re and c.im < 0:
            negative = True
            c = -c
        cs = _render_scalar(c)
        if not factors:
            body = cs
        elif cs == "1":
            body = "*".join(factors)
        else:
            body = cs + "*" + "*".join(factors)
        if not pieces:
            pieces.append("-" + body if negative else body)
        else:
            pieces.append((" - " if negative else " + ") + body)
    return "".join(pieces)


def render(e: Expr, order: Iterable[str] | None = None) -> str:
    return Expr.coerce(e).render(order)


# ---------------------------------------------------------------------------
# DSL parsing
#
#   expr   := term (('+'|'-') term)*
#   term   := factor (('*'|'/') factor)*
#   factor := '-' factor | base ('^' signed_int)?
#   base   := rational | 'i' | 'hbar' | ident | '(' expr ')'
#           | 'ln' '(' expr ')' | 'exp' '(' expr ')'

_TOKEN = re.compile(r"\s*(?:(\d+)|([A-Za-z][A-Za-z0-9_]*)|(\S))")


def _tokenize(text: str):
    tokens = []
    pos = 0
    n = len(text)
    while pos < n:
        m = _TOKEN.match(text, pos)
        if m is None:
            break
        start = m.start(m.lastindex) if m.lastindex else pos
        if m.group(1) is not None:
            tokens.append(("int", m.group(1), start))
        elif m.group(2) is not None:
            tokens.append(("ident", m.group(2), start))
        elif m.group(3) is not None:
            ch = m.group(3)
            if ch not in "+-*/^()":
                raise DSLSyntaxError(f"unexpected character {ch!r}", start)
            tokens.append(("op", ch, start))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, juxtapose: bool):
        self.tokens = _tokenize(text)
        self.i = 0
        self.juxtapose = juxtapose

    def peek(self, offset=0):
        return self.tokens[min(self.i + offset, len(self.tokens) - 1)]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        tok = self.take()
        if tok[1] != value or tok[0] != "op":
            raise DSLSyntaxError(f"expected {value!r}, found {tok[1] or 'end of input'!r}", tok[2])
        return tok

    def parse(self):
        node = self.expr()
        tok = self.peek()
        if tok[0] != "end":
            raise DSLSyntaxError(f"unexpected token {tok[1]!r}", tok[2])
        return node

    def expr(self):
        node = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.take()[1]
            rhs = self.term()
            node = ("add" if op == "+" else "sub", node, rhs)
        return node

    def _starts_factor(self, tok):
        return tok[0] in ("int", "ident") or (tok[0] == "op" and tok[1] == "(")

    def term(self):
        node = self.factor()
        while True:
            tok = self.peek()
            if tok[0] == "op" and tok[1] in "*/":
                self.take()
                rhs = self.factor()
                node = ("mul" if tok[1] == "*" else "div", node, rhs)
            elif self.juxtapose and self._starts_factor(tok):
                rhs = self.factor()
                node = ("mul", node, rhs)
            else:
                return node

    def factor(self):
        tok = self.peek()
        if tok[0] == "op" and tok[1] == "-":
            self.take()
            return ("neg", self.factor())
        node = self.base()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            sign = 1
            t = self.peek()
            if t[0] == "op" and t[1] in "+-":
                self.take()
                sign = -1 if t[1] == "-" else 1
            t = self.take()
            if t[0] != "int":
                raise DSLSyntaxError("exponent must be an integer", t[2])
            node = ("pow", node, sign * int(t[1]))
        return node

    def base(self):
        tok = self.take()
        kind, value, pos = tok
        if kind == "int":
            nxt, after = self.peek(), self.peek(1)
            if nxt[0] == "op" and nxt[1] == "/" and after[0] == "int":
                self.take()
                den = int(self.take()[1])
                if den == 0:
                    raise DSLSyntaxError("zero denominator", after[2])
                return ("num", Fraction(int(value), den))
            return ("num", Fraction(int(value)))
        if kind == "ident":
            if value in ("ln", "exp"):
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return (value, arg)
            if value == "i":
                return ("i",)
            if value == "hbar":
                return ("hbar",)
            return ("id", value, pos)
        if kind == "op" and value == "(":
            node = self.expr()
            self.expect(")")
            return node
        raise DSLSyntaxError(f"unexpected token {value or 'end of input'!r}", pos)


def parse_tree(text: str, juxtapose: bool = False):
    """Parse DSL text into a nested-tuple syntax tree."""
    return _Parser(text, juxtapose).parse()


def fold_tree(node, resolve: Callable[[str, int], object], number: Callable, imag, hbar,
              lnf=None, expf=None):
    """Evaluate a syntax tree over any algebra supporting + - * / and int powers."""

    def go(n):
        tag = n[0]
        if tag == "num":
            return number(n[1])
        if tag == "i":
            return imag
        if tag == "hbar":
            return hbar
        if tag == "id":
            return resolve(n[1], n[2])
        if tag == "add":
            return go(n[1]) + go(n[2])
        if tag == "sub":
            return go(n[1]) - go(n[2])
        if tag == "mul":
            return go(n[1]) * go(n[2])
        if tag == "div":
            return go(n[1]) / go(n[2])
        if tag == "neg":
            return -go(n[1])
        if tag == "pow":
            return go(n[1]) ** n[2]
        if tag == "ln":
            if lnf is None:
                raise ValueError("ln is not available here")
            return lnf(go(n[1]))
        if tag == "exp":
            if expf is None:
                raise ValueError("exp is not available here")
            return expf(go(n[1]))
        raise AssertionError(tag)

    return go(node)


def parse(text: str, variables: Iterable[str] | None = None, params: Iterable[str] = ()) -> Expr:
    """Parse DSL ``text``.

    ``variables`` lists the chart variables and ``params`` extra named constants
    (masses, couplings).  Any other identifier raises
    :class:`UnknownIdentifierError`.  With ``variables=None`` every identifier
    is accepted as a variable.
    """
    allowed = None if variables is None else set(variables) | set(params)
    reserved = {"i", "hbar", "ln", "exp"}
    if allowed is not None and allowed & reserved:
        raise ValueError(f"reserved names used as variables: {sorted(allowed & reserved)}")
    tree = parse_tree(text)

    def resolve(name, pos):
        if allowed is not None and name not in allowed:
            raise UnknownIdentifierError(name, pos)
        return var(name)

    return fold_tree(tree, resolve, const, I, HBAR, ln, exp)
