"""Oscillator ground state: expectation values, marginals and the star-genvalue residual."""

import argparse
import math

import numpy as np

from moyalvey.expr import HBAR
from moyalvey.measure import GridSpec, WignerState, expectation, marginal, verify_stargenvalue
from moyalvey.star import Chart, StarConfig


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--hbar", type=float, default=1.0)
    ap.add_argument("--points", type=int, default=128)
    args = ap.parse_args(argv)
    hbar = args.hbar

    chart = Chart(("q",), ("p",))
    h = chart.parse("(q^2 + p^2)/2")
    f = WignerState(chart.parse("exp(-(q^2 + p^2)/hbar)"), chart, normalized=True, scale=1 / (math.pi * hbar))
    grid = GridSpec.default(chart, hbar, points=args.points)

    for label, a, want in (("<1>", "1", 1.0), ("<H>", "(q^2 + p^2)/2", hbar / 2), ("<q>", "q", 0.0),
                           ("<q^2 p^2>", "q^2*p^2", hbar ** 2 / 4)):
        got = expectation(chart.parse(a), f, grid=grid, hbar=hbar)
        coarse = expectation(chart.parse(a), f, grid=GridSpec.default(chart, hbar, points=args.points // 2), hbar=hbar)
        print(f"{label:<10} {got: .15f}  exact {want: .6f}  err {abs(got - want):.1e}  halving {abs(got - coarse):.1e}")

    m = marginal(f, "q", grid, hbar)
    exact = np.exp(-m.values ** 2 / hbar) / math.sqrt(math.pi * hbar)
    print(f"marginal q: integral {m.integral():.15f}, max pointwise error {np.max(np.abs(m.densities - exact)):.1e}")

    g0 = chart.parse("2*exp(-(q^2 + p^2)/hbar)")
    for ev in (HBAR / 2, HBAR):
        r = verify_stargenvalue(h, g0, ev, StarConfig(chart), hbar=hbar)
        print(f"H * g0 = ({ev}) g0: {'pass' if r.passed else 'fail'}, max residual {r.max_residual:.2e}")


if __name__ == "__main__":
    main()
