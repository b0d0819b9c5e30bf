"""Numerical predictions: expectation values, marginals and star-genvalue residuals."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .expr import Expr, eval_numeric
from .star import Chart, StarConfig, moyal_star_series
from .vey import CovariantContext, vey_star_series

__all__ = [
    "WignerState",
    "GridSpec",
    "Marginal",
    "StargenReport",
    "expectation",
    "marginal",
    "measure_factor",
    "verify_stargenvalue",
]

RULES = ("gauss-legendre", "trapezoid")
IMAG_TOL = 1e-8


@dataclass(frozen=True)
class GridSpec:
    """Tensor-product quadrature grid; ``axes`` maps a variable to ``(min, max, points)``."""

    axes: Mapping[str, tuple[float, float, int]]
    rule: str = "gauss-legendre"

    def __post_init__(self):
        if self.rule not in RULES:
            raise ValueError(f"unknown quadrature rule {self.rule!r}; expected one of {RULES}")
        axes = {}
        for v, (lo, hi, n) in self.axes.items():
            lo, hi, n = float(lo), float(hi), int(n)
            if n < 8:
                raise ValueError(f"grid for {v} needs at least 8 points, got {n}")
            if not lo < hi:
                raise ValueError(f"grid for {v} needs min < max, got {lo}:{hi}")
            axes[v] = (lo, hi, n)
        object.__setattr__(self, "axes", axes)

    @classmethod
    def parse(cls, text: str, rule: str = "gauss-legendre") -> "GridSpec":
        """``"q=-8:8:128,p=-8:8:128"``."""
        axes = {}
        for part in text.split(","):
            part = part.strip()
            if not part:
                continue
            try:
                name, rng = part.split("=")
                lo, hi, n = rng.split(":")
                axes[name.strip()] = (float(lo), float(hi), int(n))
            except ValueError:
                raise ValueError(f"bad grid axis {part!r}; expected name=min:max:points") from None
        return cls(axes, rule)

    @classmethod
    def default(cls, chart: Chart, hbar: float, center: Mapping[str, float] | None = None,
                points: int = 128, rule: str = "gauss-legendre") -> "GridSpec":
        half = 8.0 * math.sqrt(hbar)
        center = center or {}
        return cls({v: (center.get(v, 0.0) - half, center.get(v, 0.0) + half, points) for v in chart.variables}, rule)

    def nodes(self, v: str) -> tuple[np.ndarray, np.ndarray]:
        lo, hi, n = self.axes[v]
        if self.rule == "gauss-legendre":
            x, w = np.polynomial.legendre.leggauss(n)
            half = 0.5 * (hi - lo)
            return lo + half * (x + 1.0), half * w
        x = np.linspace(lo, hi, n)
        w = np.full(n, (hi - lo) / (n - 1))
        w[0] *= 0.5
        w[-1] *= 0.5
        return x, w

    def refined(self, factor: int = 2) -> "GridSpec":
        return GridSpec({v: (lo, hi, n * factor) for v, (lo, hi, n) in self.axes.items()}, self.rule)


@dataclass(frozen=True)
class WignerState:
    """Phase-space distribution ``scale * expr``.

    ``scale`` carries irrational prefactors such as ``1/pi``; ``box`` is the
    region the state is supported on (per variable ``(min, max)``).
    """

    expr: Expr
    chart: Chart
    box: Mapping[str, tuple[float, float]] | None = None
    normalized: bool = False
    scale: float = 1.0

    def grid(self, hbar: float, points: int = 128, rule: str = "gauss-legendre") -> GridSpec:
        if self.box is None:
            return GridSpec.default(self.chart, hbar, points=points, rule=rule)
        return GridSpec({v: (lo, hi, points) for v, (lo, hi) in self.box.items()}, rule)

    def check_normalization(self, grid: GridSpec | None = None, hbar: float = 1.0, tol: float = 1e-6) -> float:
        total = expectation(1, self, None, grid, hbar)
        if self.normalized and abs(total - 1.0) > tol:
            raise ValueError(f"state is flagged normalized but integrates to {total!r}")
        return total


def _mesh(grid: GridSpec, names: Sequence[str]):
    nodes, weights = zip(*(grid.nodes(v) for v in names))
    pts = np.meshgrid(*nodes, indexing="ij")
    wts = np.meshgrid(*weights, indexing="ij")
    w = wts[0]
    for x in wts[1:]:
        w = w * x
    return dict(zip(names, pts)), w, nodes


def _evaluate(e: Expr, point: Mapping, hbar: float, shape) -> np.ndarray:
    val = eval_numeric(e, point, hbar)
    return np.broadcast_to(np.asarray(val, dtype=complex), shape)


def measure_factor(geom) -> Expr | None:
    """``det J'`` for a covariant context, ``None`` in the flat case."""
    if isinstance(geom, CovariantContext):
        return geom.j.det()
    return None


def _check_axes(grid: GridSpec, chart: Chart):
    missing = set(chart.variables) - set(grid.axes)
    if missing:
        raise ValueError(f"grid is missing axes for {sorted(missing)}")


def _density(f: WignerState, geom, point, hbar, shape) -> np.ndarray:
    dens = f.scale * _evaluate(f.expr, point, hbar, shape)
    det = measure_factor(geom)
    if det is not None and not det == 1:
        dens = dens * _evaluate(det, point, hbar, shape) ** -0.5
    return dens


def expectation(a, f: WignerState, geom=None, grid: GridSpec | None = None, hbar: float = 1.0,
                params: Mapping[str, float] | None = None) -> float:
    """``int a f (det J')^(-1/2) dO'`` by tensor-product quadrature.

    ``geom`` is a :class:`CovariantContext` or ``None``/:class:`StarConfig`
    for the flat measure.  Raises ``ValueError`` when the imaginary part
    exceeds 1e-8.
    """
    a = Expr.coerce(a)
    grid = grid or f.grid(hbar)
    _check_axes(grid, f.chart)
    names = list(f.chart.variables)
    point, w, _ = _mesh(grid, names)
    point.update(params or {})
    integrand = _evaluate(a, point, hbar, w.shape) * _density(f, geom, point, hbar, w.shape)
    # numpy reduces contiguous float arrays pairwise
    total = complex(np.sum(np.ascontiguousarray((integrand * w).ravel())))
    if abs(total.imag) > IMAG_TOL:
        raise ValueError(f"expectation has imaginary part {total.imag:.3e}")
    return total.real


@dataclass(frozen=True)
class Marginal:
    variable: str
    values: np.ndarray
    densities: np.ndarray
    weights: np.ndarray

    def integral(self) -> float:
        return float(np.sum(self.densities * self.weights))

    def samples(self) -> list[tuple[float, float]]:
        return list(zip(self.values.tolist(), self.densities.tolist()))


def marginal(f: WignerState, keep: str, grid: GridSpec | None = None, hbar: float = 1.0, geom=None,
             params: Mapping[str, float] | None = None) -> Marginal:
    """Integrate ``f`` over every variable except ``keep``, sampled on ``keep``'s nodes."""
    if keep not in f.chart.variables:
        raise ValueError(f"{keep!r} is not a variable of the chart")
    grid = grid or f.grid(hbar)
    _check_axes(grid, f.chart)
    names = [keep] + [v for v in f.chart.variables if v != keep]
    point, w, nodes = _mesh(grid, names)
    point.update(params or {})
    dens = _density(f, geom, point, hbar, w.shape)
    kw = grid.nodes(keep)[1]
    rest = w / kw.reshape((-1,) + (1,) * (len(names) - 1))
    out = np.sum((dens * rest).reshape(len(kw), -1), axis=1)
    if np.max(np.abs(out.imag), initial=0.0) > IMAG_TOL:
        raise ValueError("marginal has a non-negligible imaginary part")
    return Marginal(keep, nodes[0], out.real, kw)


@dataclass
class StargenReport:
    passed: bool
    max_residual: float
    residual: Expr
    tol: float
    points: int
    notes: list[str] = field(default_factory=list)


def verify_stargenvalue(a, g, eigenvalue, geom: StarConfig | CovariantContext, points: int = 50,
                        tol: float = 1e-10, hbar: float = 1.0, box: tuple[float, float] = (-3.0, 3.0),
                        seed: int = 0, params: Mapping[str, float] | None = None) -> StargenReport:
    """Residual ``a * g - eigenvalue g`` evaluated at random points of ``box``."""
    a, g, ev = Expr.coerce(a), Expr.coerce(g), Expr.coerce(eigenvalue)
    if isinstance(geom, CovariantContext):
        s, chart = vey_star_series(a, g, geom), geom.chart
    else:
        s, chart = moyal_star_series(a, g, geom), geom.chart
    if s.truncated:
        raise ValueError(f"star series did not terminate within order {s.order}")
    residual = s.value - ev * g
    rng = np.random.default_rng(seed)
    pt = {v: rng.uniform(box[0], box[1], points) for v in chart.variables}
    pt.update(params or {})
    if residual.is_zero():
        worst = 0.0
    else:
        vals = np.broadcast_to(np.asarray(eval_numeric(residual, pt, hbar)), (points,))
        worst = float(np.max(np.abs(vals)))
    return StargenReport(worst < tol, worst, residual, tol, points)
