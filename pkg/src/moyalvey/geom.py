"""Phase-space coordinate changes and the geometry they induce.

A :class:`Transformation` goes from canonical source coordinates ``O`` to
target coordinates ``O'``.  Both directions are supplied by the caller and
checked against each other; nothing is inverted symbolically.  Derivatives
``dO'/dO`` are obtained as the matrix inverse of ``dO/dO'`` so that every
geometric object comes out as a function of the target coordinates without
ever composing ``exp`` with ``ln``.
"""

from __future__ import annotations

import json
import random
from dataclasses import InitVar, dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Mapping, NamedTuple

from .expr import ONE, ZERO, EvaluationError, Expr, eval_numeric, parse, var
from .matrix import SymbolicMatrix
from .star import Chart, SymplecticMatrix, standard_symplectic

__all__ = [
    "Transformation",
    "Connection",
    "VeyCanonicity",
    "jacobian",
    "transform_symplectic",
    "christoffel",
    "riemann",
    "riemann_is_flat",
    "is_vey_canonical",
    "pullback",
    "pushforward",
    "compose",
]


@dataclass(frozen=True, eq=False)
class Transformation:
    """``forward[v]`` expresses source variable ``v`` in target variables,
    ``inverse[w]`` expresses target variable ``w`` in source variables."""

    source: Chart
    target: Chart
    forward: Mapping[str, Expr]
    inverse: Mapping[str, Expr]
    verify: InitVar[bool] = True
    roundtrip_method: str = field(default="unchecked", init=False)

    def __post_init__(self, verify: bool):
        object.__setattr__(self, "forward", {k: Expr.coerce(v) for k, v in self.forward.items()})
        object.__setattr__(self, "inverse", {k: Expr.coerce(v) for k, v in self.inverse.items()})
        if set(self.forward) != set(self.source.coords):
            raise ValueError("forward map must give every source variable")
        if set(self.inverse) != set(self.target.coords):
            raise ValueError("inverse map must give every target variable")
        if self.source.n != self.target.n:
            raise ValueError("source and target charts differ in dimension")
        for k, v in self.forward.items():
            extra = v.variables() - set(self.target.coords) - set(self.target.params)
            if extra:
                raise ValueError(f"forward[{k}] uses non-target variables {sorted(extra)}")
        for k, v in self.inverse.items():
            extra = v.variables() - set(self.source.coords) - set(self.source.params)
            if extra:
                raise ValueError(f"inverse[{k}] uses non-source variables {sorted(extra)}")
        if verify:
            object.__setattr__(self, "roundtrip_method", verify_roundtrip(self))

    @classmethod
    def identity(cls, chart: Chart) -> "Transformation":
        m = {v: var(v) for v in chart.coords}
        return cls(chart, chart, m, dict(m))

    @classmethod
    def from_dict(cls, data: Mapping, params=()) -> "Transformation":
        params = tuple(data.get("params", params))
        source = Chart.from_names(data["source_vars"], params)
        target = Chart.from_names(data["target_vars"], params)
        tnames = target.variables
        snames = source.variables
        forward = {k: parse(v, tnames, params) for k, v in data["forward"].items()}
        inverse = {k: parse(v, snames, params) for k, v in data["inverse"].items()}
        return cls(source, target, forward, inverse)

    @classmethod
    def load(cls, path, params=()) -> "Transformation":
        return cls.from_dict(json.loads(Path(path).read_text()), params)

    def to_dict(self) -> dict:
        return {
            "source_vars": list(self.source.variables),
            "target_vars": list(self.target.variables),
            "forward": {k: self.forward[k].render(self.target.variables) for k in self.source.variables},
            "inverse": {k: self.inverse[k].render(self.source.variables) for k in self.target.variables},
        }

    # Jacobians are cached: transformations are immutable.

    @cached_property
    def forward_jacobian(self) -> SymbolicMatrix:
        rows = [[self.forward[o].diff(t) for t in self.target.coords] for o in self.source.coords]
        return SymbolicMatrix(rows, self.source.coords, self.target.coords)

    @cached_property
    def inverse_jacobian(self) -> SymbolicMatrix:
        return self.forward_jacobian.inverse()

    @cached_property
    def inverse_jacobian_source(self) -> SymbolicMatrix:
        rows = [[self.inverse[t].diff(o) for o in self.source.coords] for t in self.target.coords]
        return SymbolicMatrix(rows, self.target.coords, self.source.coords)


def _random_point(names, rng: random.Random) -> dict:
    return {v: rng.uniform(0.5, 1.5) for v in names}


def verify_roundtrip(t: Transformation, points: int = 20, tol: float = 1e-9, seed: int = 0) -> str:
    """Check ``forward`` and ``inverse`` are mutually inverse.

    Returns ``"symbolic"`` when both composites normalize to the identity,
    otherwise ``"numeric"`` after ``points`` random evaluations agree to
    ``tol``.  Raises ``ValueError`` on failure.
    """
    there = {v: t.forward[v].subs(t.inverse) for v in t.source.coords}
    back = {w: t.inverse[w].subs(t.forward) for w in t.target.coords}
    if all(e == var(v) for v, e in there.items()) and all(e == var(w) for w, e in back.items()):
        return "symbolic"
    rng = random.Random(seed)
    params = set(t.source.params) | set(t.target.params)
    for _ in range(points):
        for names, comp in ((t.source.coords, there), (t.target.coords, back)):
            pt = _random_point(list(names) + sorted(params), rng)
            for v, e in comp.items():
                try:
                    got = eval_numeric(e, pt)
                except EvaluationError as exc:
                    raise ValueError(f"round trip of {v} cannot be evaluated: {exc}") from exc
                want = pt[v]
                if abs(got - want) > tol * max(1.0, abs(want)):
                    raise ValueError(f"forward and inverse maps disagree on {v}: {got} != {want}")
    return "numeric"


def jacobian(t: Transformation, direction: str = "forward") -> SymbolicMatrix:
    """Partial-derivative matrix of a transformation.

    ``"forward"``: ``dO^i/dO'^j`` in target variables.
    ``"inverse"``: ``dO'^i/dO^j`` in target variables (matrix inverse).
    ``"inverse-source"``: ``dO'^i/dO^j`` by differentiating the inverse map,
    i.e. in source variables.
    """
    if direction == "forward":
        return t.forward_jacobian
    if direction == "inverse":
        return t.inverse_jacobian
    if direction == "inverse-source":
        return t.inverse_jacobian_source
    raise ValueError(f"unknown direction {direction!r}")


def transform_symplectic(t: Transformation, j: SymbolicMatrix | None = None) -> SymplecticMatrix:
    """``J'^{ij} = (dO'^i/dO^k)(dO'^j/dO^l) J^{kl}``, in target variables."""
    j = standard_symplectic(t.source) if j is None else j
    j = j.map(lambda x: x.subs(t.forward))
    lam = t.inverse_jacobian
    out = lam @ j @ lam.transpose()
    return SymplecticMatrix(out.rows, t.target.coords)


@dataclass(frozen=True, eq=False)
class Connection:
    """Christoffel symbols ``gamma[i][j][k]`` = Gamma^i_jk over ``chart.coords``."""

    chart: Chart
    gamma: tuple

    @classmethod
    def zero(cls, chart: Chart) -> "Connection":
        d = len(chart.coords)
        return cls(chart, tuple(tuple(tuple(ZERO for _ in range(d)) for _ in range(d)) for _ in range(d)))

    @property
    def dim(self) -> int:
        return len(self.chart.coords)

    def __getitem__(self, ijk) -> Expr:
        i, j, k = ijk
        return self.gamma[i][j][k]

    def component(self, upper: str, lower1: str, lower2: str) -> Expr:
        c = self.chart.coords
        return self.gamma[c.index(upper)][c.index(lower1)][c.index(lower2)]

    def nonzero(self) -> list[tuple[tuple[str, str, str], Expr]]:
        c = self.chart.coords
        out = []
        for i in range(self.dim):
            for j in range(self.dim):
                for k in range(self.dim):
                    g = self.gamma[i][j][k]
                    if not g.is_zero():
                        out.append(((c[i], c[j], c[k]), g))
        return out

    def is_zero(self) -> bool:
        return not self.nonzero()

    def is_symmetric(self) -> bool:
        d = self.dim
        return all(self.gamma[i][j][k] == self.gamma[i][k][j]
                   for i in range(d) for j in range(d) for k in range(d))

    def replace(self, upper: str, lower1: str, lower2: str, value) -> "Connection":
        c = self.chart.coords
        i, j, k = c.index(upper), c.index(lower1), c.index(lower2)
        g = [[list(row) for row in plane] for plane in self.gamma]
        g[i][j][k] = Expr.coerce(value)
        return Connection(self.chart, tuple(tuple(tuple(row) for row in plane) for plane in g))

    @cached_property
    def sparse(self) -> dict:
        """``(i, j) -> [(k, Gamma^k_ij), ...]`` for nonzero entries."""
        d = self.dim
        out = {}
        for i in range(d):
            for j in range(d):
                row = [(k, self.gamma[k][i][j]) for k in range(d) if not self.gamma[k][i][j].is_zero()]
                if row:
                    out[(i, j)] = row
        return out


def christoffel(t: Transformation) -> Connection:
    """Pushforward of the flat connection:
    ``Gamma'^i_jk = (dO'^i/dO^b) d^2 O^b / dO'^j dO'^k``."""
    coords = t.target.coords
    d = len(coords)
    lam = t.inverse_jacobian
    second = [[[t.forward[o].diff(coords[j]).diff(coords[k]) for k in range(d)] for j in range(d)]
              for o in t.source.coords]
    gamma = []
    for i in range(d):
        plane = []
        for j in range(d):
            row = []
            for k in range(d):
                acc = ZERO
                for b in range(d):
                    s = second[b][j][k]
                    if not s.is_zero() and not lam[i, b].is_zero():
                        acc = acc + lam[i, b] * s
                row.append(acc)
            plane.append(tuple(row))
        gamma.append(tuple(plane))
    return Connection(t.target, tuple(gamma))


def riemann(c: Connection) -> dict[tuple[int, int, int, int], Expr]:
    """Nonzero components of
    ``R^i_jkl = d_k G^i_lj - d_l G^i_kj + G^i_km G^m_lj - G^i_lm G^m_kj``."""
    coords = c.chart.coords
    d = c.dim
    g = c.gamma
    dg = {}

    def dgamma(i, a, b, k):
        key = (i, a, b, k)
        if key not in dg:
            dg[key] = g[i][a][b].diff(coords[k])
        return dg[key]

    out = {}
    for i in range(d):
        for j in range(d):
            for k in range(d):
                for l in range(k + 1, d):
                    r = dgamma(i, l, j, k) - dgamma(i, k, j, l)
                    for m in range(d):
                        r = r + g[i][k][m] * g[m][l][j] - g[i][l][m] * g[m][k][j]
                    if not r.is_zero():
                        out[(i, j, k, l)] = r
                        out[(i, j, l, k)] = -r
    return out


def riemann_is_flat(c: Connection, chart: Chart | None = None) -> bool:
    return not riemann(c)


class VeyCanonicity(NamedTuple):
    symplectic: bool
    isometry: bool

    @property
    def preserves_bracket(self) -> bool:
        return self.symplectic and self.isometry


def is_vey_canonical(t: Transformation) -> VeyCanonicity:
    jp = transform_symplectic(t)
    return VeyCanonicity(jp == standard_symplectic(t.target), christoffel(t).is_zero())


def pullback(e, t: Transformation) -> Expr:
    """Express a source-chart function in target variables."""
    return Expr.coerce(e).subs(t.forward)


def pushforward(e, t: Transformation) -> Expr:
    """Express a target-chart function in source variables."""
    return Expr.coerce(e).subs(t.inverse)


def compose(first: Transformation, second: Transformation) -> Transformation:
    """``first``: A -> B, ``second``: B -> C; result A -> C."""
    if first.target.coords != second.source.coords:
        raise ValueError("charts do not chain")
    forward = {v: e.subs(second.forward) for v, e in first.forward.items()}
    inverse = {w: e.subs(first.inverse) for w, e in second.inverse.items()}
    return Transformation(first.source, second.target, forward, inverse)
