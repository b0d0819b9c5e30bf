import random
import warnings

import pytest
from hypothesis import given
from hypothesis import strategies as st

from moyalvey.expr import HBAR, I, ONE, ZERO, var
from moyalvey.geom import Transformation, pullback
from moyalvey.matrix import SymbolicMatrix
from moyalvey.opalg import parse_operator, weyl_symbol
from moyalvey.star import (
    Chart,
    StarConfig,
    TruncationWarning,
    moyal_bracket,
    moyal_bracket_series,
    moyal_bracket_sine,
    moyal_star,
    moyal_star_series,
    poisson_bracket,
    series_terminates,
    standard_symplectic,
    star_conjugate,
)

from conftest import CHART1, CHART2, polys, random_linear_symplectic, random_poly

QP = Chart(("Q",), ("P",))
C4 = Chart(("q", "x"), ("p", "y"), ("M", "m", "k"))
H62 = "p^2/(2*M) + y^2/(2*m) + k*q*y^2"


def star(a, b, chart=CHART1, **kw):
    return moyal_star(chart.parse(a), chart.parse(b), StarConfig(chart, **kw))


def test_chart_layout():
    assert CHART2.coords == ("p", "y", "q", "x")
    assert CHART2.variables == ("q", "x", "p", "y")
    assert Chart.from_names(["q", "x", "p", "y"]) == CHART2
    with pytest.raises(ValueError):
        Chart(("q",), ("p", "y"))
    with pytest.raises(ValueError):
        Chart(("q",), ("q",))


def test_standard_symplectic_gives_unit_bracket():
    j = standard_symplectic(CHART2)
    assert j.is_antisymmetric()
    cfg = StarConfig(CHART2)
    assert poisson_bracket(var("q"), var("p"), cfg) == ONE
    assert poisson_bracket(var("x"), var("y"), cfg) == ONE
    assert poisson_bracket(var("q"), var("y"), cfg) == ZERO


def test_poisson_examples():
    cfg = StarConfig(QP)
    assert poisson_bracket(QP.parse("Q*P"), QP.parse("Q^2*P^2"), cfg) == ZERO
    c4 = StarConfig(C4)
    assert poisson_bracket(var("q"), C4.parse(H62), c4) == C4.parse("p/M")


def test_star_examples():
    assert star("q", "p") == CHART1.parse("q*p + (1/2)*i*hbar")
    assert star("p", "q") == CHART1.parse("q*p - (1/2)*i*hbar")
    assert star("1", "q^3*p") == CHART1.parse("q^3*p")
    assert star("q^2*p", "1") == CHART1.parse("q^2*p")


def test_qp_star_qp_matches_operator_oracle():
    got = star("Q*P", "Q*P", QP)
    want = weyl_symbol(parse_operator("((Q*P + P*Q)/2)^2", QP))
    assert got == want == QP.parse("Q^2*P^2 + hbar^2/4")


def test_bracket_examples():
    assert moyal_bracket(var("q"), var("p"), StarConfig(CHART1)) == ONE
    c4 = StarConfig(C4)
    assert moyal_bracket(var("q"), C4.parse(H62), c4) == C4.parse("p/M")
    cfg = StarConfig(QP)
    assert moyal_bracket(QP.parse("Q*P"), QP.parse("Q^2*P^2"), cfg) == ZERO


def test_star_series_terms_are_hbar_graded():
    s = moyal_star_series(CHART1.parse("q^2"), CHART1.parse("p^2"), StarConfig(CHART1))
    assert not s.truncated and s.order == 2
    assert s.terms[0] == CHART1.parse("q^2*p^2")
    assert s.terms[1] == CHART1.parse("2*i*hbar*q*p")
    assert s.terms[2] == CHART1.parse("-hbar^2/2")
    assert sum(s.terms, ZERO) == s.value


@given(polys(CHART2.variables, max_deg=2), polys(CHART2.variables, max_deg=2), polys(CHART2.variables, max_deg=2))
def test_associativity(a, b, c):
    cfg = StarConfig(CHART2)
    assert moyal_star(a, moyal_star(b, c, cfg), cfg) == moyal_star(moyal_star(a, b, cfg), c, cfg)


@given(polys(CHART2.variables, max_deg=2), polys(CHART2.variables, max_deg=2), polys(CHART2.variables, max_deg=2))
def test_bracket_antisymmetry_and_jacobi(a, b, c):
    cfg = StarConfig(CHART2)

    def br(u, v):
        return moyal_bracket(u, v, cfg)

    assert br(a, b) == -br(b, a)
    assert (br(a, br(b, c)) + br(b, br(c, a)) + br(c, br(a, b))).is_zero()


@given(polys(CHART2.variables, max_deg=2), polys(CHART2.variables, max_deg=2))
def test_classical_grade_is_poisson(a, b):
    cfg = StarConfig(CHART2)
    grades = moyal_bracket(a, b, cfg).hbar_grades()
    assert grades.get(0, ZERO) == poisson_bracket(a, b, cfg)


@given(polys(CHART2.variables, max_deg=2), polys(CHART2.variables, max_deg=2))
def test_sine_series_equals_commutator_form(a, b):
    cfg = StarConfig(CHART2)
    assert moyal_bracket_sine(a, b, cfg) == moyal_bracket(a, b, cfg)


@given(polys(CHART1.variables, max_deg=3, laurent=True), polys(CHART1.variables, max_deg=2))
def test_laurent_left_factor_terminates(a, b):
    # derivatives of the polynomial factor die out, so the series ends
    cfg = StarConfig(CHART1)
    assert series_terminates(a, b, cfg)
    assert series_terminates(b, a, cfg)


def test_gaussian_is_a_stargenfunction_of_the_oscillator():
    h = QP.parse("(Q^2 + P^2)/2")
    g = QP.parse("2*exp(-(Q^2 + P^2)/hbar)")
    cfg = StarConfig(QP)
    assert moyal_star(h, g, cfg) == HBAR / 2 * g
    assert moyal_star(g, h, cfg) == HBAR / 2 * g


def test_truncation_flag_and_warning():
    cfg = StarConfig(CHART1, max_order=3)
    a, b = CHART1.parse("exp(q)"), CHART1.parse("exp(p)")
    s = moyal_star_series(a, b, cfg)
    assert s.truncated and s.order == 3 and s.notes
    with pytest.warns(TruncationWarning):
        moyal_star(a, b, cfg)
    assert moyal_bracket_series(a, b, cfg).truncated
    assert not series_terminates(a, b, cfg)
    # exactly at the boundary: q^3 * p^3 needs order 3 and nothing more
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert not moyal_star_series(CHART1.parse("q^3"), CHART1.parse("p^3"), cfg).truncated


def test_config_validation():
    with pytest.raises(ValueError):
        StarConfig(CHART1, max_order=0)
    q = var("q")
    bad = SymbolicMatrix([[ZERO, q], [-q, ZERO]], CHART1.coords)
    with pytest.raises(ValueError):
        moyal_star(q, var("p"), StarConfig(CHART1, j=bad))


def test_star_conjugate():
    cfg = StarConfig(CHART1)
    a = CHART1.parse("q^2*p + p")
    assert star_conjugate(ONE, ONE, a, cfg) == a
    assert star_conjugate(2 * ONE, ONE / 2, ONE, cfg) == ONE
    assert star_conjugate(2 * ONE, ONE / 2, a, cfg) == a
    with pytest.raises(ValueError):
        star_conjugate(ONE, 2 * ONE, a, cfg)


def test_linear_symplectic_maps_preserve_the_product():
    target = Chart(("Q", "X"), ("P", "Y"))
    src_cfg, tgt_cfg = StarConfig(CHART2), StarConfig(target)
    rng = random.Random(11)
    t = random_linear_symplectic(rng, CHART2, target)
    for _ in range(20):
        a = random_poly(rng, CHART2.variables, terms=2, max_deg=3)
        b = random_poly(rng, CHART2.variables, terms=2, max_deg=3)
        lhs = moyal_star(pullback(a, t), pullback(b, t), tgt_cfg)
        assert lhs == pullback(moyal_star(a, b, src_cfg), t)


def test_nonlinear_canonical_map_does_not_preserve_the_product():
    # y = QP with the flat product in (Q, P) picks up an extra hbar^2 term
    src = Chart(("x",), ("y",))
    t = Transformation(src, QP, {"x": QP.parse("ln(Q)"), "y": QP.parse("Q*P")},
                       {"Q": src.parse("exp(x)"), "P": src.parse("y*exp(-x)")})
    y = var("y")
    flat_there = moyal_star(pullback(y, t), pullback(y, t), StarConfig(QP))
    flat_here = pullback(moyal_star(y, y, StarConfig(src)), t)
    assert flat_there != flat_here
    assert flat_there - flat_here == HBAR ** 2 / 4


@given(st.integers(0, 10 ** 6))
def test_product_of_polynomials_with_hbar_coefficients(seed):
    rng = random.Random(seed)
    a = random_poly(rng, CHART1.variables) * (1 + HBAR)
    b = random_poly(rng, CHART1.variables) + I * HBAR
    cfg = StarConfig(CHART1)
    assert moyal_star(a, b, cfg) - moyal_star(b, a, cfg) == I * HBAR * moyal_bracket(a, b, cfg)
