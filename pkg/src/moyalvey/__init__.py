"""Exact deformation-quantization toolkit: Moyal and covariant star products,
Weyl maps of operator polynomials, and phase-space coordinate geometry."""

from .dynamics import TimeSeries, crosscheck_evolution, moyal_evolve, vey_evolve
from .expr import HBAR, I, ONE, ZERO, Expr, Scalar, differentiate, equals, eval_numeric, exp, ln, parse, substitute
from .geom import (
    Connection,
    Transformation,
    christoffel,
    is_vey_canonical,
    jacobian,
    pullback,
    pushforward,
    riemann,
    riemann_is_flat,
    transform_symplectic,
)
from .measure import GridSpec, WignerState, expectation, marginal, verify_stargenvalue
from .opalg import (
    Generator,
    OperatorPoly,
    commutator,
    heisenberg_evolve,
    normal_order,
    parse_operator,
    symmetrize,
    weyl_quantize,
    weyl_symbol,
)
from .star import (
    Chart,
    StarConfig,
    StarSeries,
    SymplecticMatrix,
    TruncationWarning,
    moyal_bracket,
    moyal_star,
    poisson_bracket,
    standard_symplectic,
    star_conjugate,
)
from .vey import CovariantContext, SymbolTable, TensorField, covariant_derivative, generalized_weyl_symbol, vey_bracket, vey_star

__version__ = "0.1.0"
