"""End-to-end reproduction of the two-particle example.

Two particles ``(q, p)`` of mass ``M`` and ``(x, y)`` of mass ``m`` coupled by
``k q y^2``, the canonical change ``x = ln Q``, ``y = (QP + PQ)/2`` and the
three descriptions built on it: flat in ``(q, x, p, y)``, flat in
``(q, Q, p, P)`` and covariant in ``(q, Q, p, P)``.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from functools import cached_property
from pathlib import Path

from .dynamics import compare_series, crosscheck_evolution, moyal_evolve, pullback_series
from .expr import Expr
from .geom import Transformation, christoffel, pullback, riemann_is_flat, transform_symplectic
from .opalg import OperatorPoly, generators, normal_order, parse_operator, symmetrize, weyl_symbol
from .star import Chart, StarConfig, standard_symplectic
from .vey import CovariantContext, SymbolTable, generalized_weyl_symbol, vey_star

PARAMS = ("M", "m", "k")

CHART = {
    "source_vars": ["q", "x", "p", "y"],
    "target_vars": ["q", "Q", "p", "P"],
    "forward": {"x": "ln(Q)", "y": "Q*P", "q": "q", "p": "p"},
    "inverse": {"Q": "exp(x)", "P": "y*exp(-x)", "q": "q", "p": "p"},
}

HAMILTONIAN = "p^2/(2*M) + y^2/(2*m) + k*q*y^2"
HAMILTONIAN_QP = "p^2/(2*M) + (Q*P + P*Q)^2/(8*m) + (k/4)*q*(Q*P + P*Q)^2"

EXPECTED = {
    "symbol": "p^2/(2*M) + y^2/(2*m) + k*q*y^2",
    "q(t)": "q + p*t/M - k*y^2*t^2/(2*M)",
    "p(t)": "p - k*y^2*t",
    "symbol_qp": "p^2/(2*M) + P^2*Q^2/(2*m) + k*q*Q^2*P^2 + (k/4)*hbar^2*q + hbar^2/(8*m)",
    "symbol_cov": "p^2/(2*M) + Q^2*P^2/(2*m) + k*q*Q^2*P^2",
    "vey_qpqp": "Q^2*P^2",
}

# (upper, lower, lower) -> value; every other component vanishes
EXPECTED_CHRISTOFFEL = {
    ("Q", "Q", "Q"): "-1/Q",
    ("P", "Q", "Q"): "P/Q^2",
    ("P", "Q", "P"): "1/Q",
    ("P", "P", "Q"): "1/Q",
}

# Reference trajectories in (q, Q, p, P) to compare against, not to assert.
REFERENCE_QP = {
    "q": "q + p*t/M - k*Q^2*P^2*t^2/(2*M) - k*hbar^2*t^2/(8*M)",
    "p": "p - k*Q^2*P^2*t - k*hbar^2*t^2/4",
}


@dataclass
class Check:
    name: str
    status: str  # PASS, FAIL or REPORT
    detail: str


class TwoParticle:
    """Lazily built objects of the example."""

    def __init__(self, max_order: int = 8):
        self.max_order = max_order

    @cached_property
    def transformation(self) -> Transformation:
        return Transformation.from_dict(CHART, PARAMS)

    @property
    def source(self) -> Chart:
        return self.transformation.source

    @property
    def target(self) -> Chart:
        return self.transformation.target

    @cached_property
    def ctx(self) -> CovariantContext:
        return CovariantContext.from_transformation(self.transformation, self.max_order)

    @cached_property
    def cfg_source(self) -> StarConfig:
        return StarConfig(self.source, max_order=self.max_order)

    @cached_property
    def cfg_target(self) -> StarConfig:
        return StarConfig(self.target, max_order=self.max_order)

    @cached_property
    def h_op(self) -> OperatorPoly:
        return parse_operator(HAMILTONIAN, self.source)

    @cached_property
    def h_op_qp(self) -> OperatorPoly:
        return parse_operator(HAMILTONIAN_QP, self.target)

    @cached_property
    def h(self) -> Expr:
        return weyl_symbol(self.h_op, self.cfg_source)

    @cached_property
    def h_qp(self) -> Expr:
        return weyl_symbol(self.h_op_qp, self.cfg_target)

    @cached_property
    def h_cov(self) -> Expr:
        return generalized_weyl_symbol(self.h_op, SymbolTable.from_transformation(self.transformation), self.ctx)

    def src(self, text: str) -> Expr:
        return self.source.with_params(PARAMS + ("t",)).parse(text)

    def tgt(self, text: str) -> Expr:
        return self.target.with_params(PARAMS + ("t",)).parse(text)

    def op(self, text: str, chart: Chart) -> OperatorPoly:
        return parse_operator(text, chart)

    # individual checks

    def check_symbol(self) -> Check:
        ok = self.h == self.src(EXPECTED["symbol"])
        return Check("hamiltonian symbol", _status(ok), str(self.h))

    def check_flat_evolution(self) -> list[Check]:
        out = []
        for v in ("q", "p"):
            s = moyal_evolve(self.src(v), self.h, self.cfg_source)
            ok = not s.truncated and s.as_expr() == self.src(EXPECTED[f"{v}(t)"])
            out.append(Check(f"flat evolution of {v}", _status(ok), s.render()))
        return out

    def check_ordering_identity(self) -> Check:
        ch = self.target
        lhs = self.op("(1/4)*(Q*P + P*Q)^2", ch)
        sym = symmetrize(_gens(ch, "PPQQ"), ch)
        rhs = sym + self.op("hbar^2/4", ch)
        ok = normal_order(lhs) == normal_order(rhs)
        return Check("ordering identity (QP+PQ)^2/4", _status(ok), str(normal_order(lhs)))

    def check_symbol_qp(self) -> Check:
        ok = self.h_qp == self.tgt(EXPECTED["symbol_qp"])
        return Check("hamiltonian symbol in (q,Q,p,P)", _status(ok), str(self.h_qp))

    def check_geometry(self) -> list[Check]:
        gamma = christoffel(self.transformation)
        got = {k: v for k, v in gamma.nonzero()}
        want = {k: self.tgt(v) for k, v in EXPECTED_CHRISTOFFEL.items()}
        ok = got == want
        detail = "; ".join(f"G^{u}_{a}{b} = {v}" for (u, a, b), v in sorted(got.items()))
        jp = transform_symplectic(self.transformation)
        return [
            Check("christoffel symbols", _status(ok), detail),
            Check("transformed symplectic matrix", _status(jp == standard_symplectic(self.target)), "J' = J"),
            Check("connection is flat", _status(riemann_is_flat(gamma)), "riemann = 0"),
        ]

    def check_vey_product(self) -> Check:
        qp = self.tgt("Q*P")
        val = vey_star(qp, qp, self.ctx)
        return Check("covariant product QP *' QP", _status(val == self.tgt(EXPECTED["vey_qpqp"])), str(val))

    def check_covariant_symbol(self) -> Check:
        want = pullback(self.h, self.transformation)
        ok = self.h_cov == want and self.h_cov == self.tgt(EXPECTED["symbol_cov"])
        return Check("generalized symbol is the pulled-back hamiltonian", _status(ok), str(self.h_cov))

    def check_crosscheck_flat(self) -> list[Check]:
        out = []
        for v, through in (("q", None), ("p", None), ("y", None), ("x", 3)):
            r = crosscheck_evolution(OperatorPoly.gen(self.source, v), self.h_op, self.cfg_source, through=through)
            out.append(Check(f"heisenberg vs moyal for {v}", _status(r.equal), r.phase_space.render()))
        return out

    def check_crosscheck_covariant(self) -> list[Check]:
        out = []
        for v, through in (("q", None), ("p", None), ("y", None), ("x", 3)):
            r = crosscheck_evolution(OperatorPoly.gen(self.source, v), self.h_op, self.ctx, through=through)
            flat = moyal_evolve(self.src(v), self.h, self.cfg_source, max_order=through or 12)
            cov = compare_series(r.phase_space, pullback_series(flat, self.ctx), through)
            out.append(Check(f"covariant evolution of {v}", _status(r.equal and not cov), r.phase_space.render()))
        return out

    def qp_evolution(self, v: str):
        return crosscheck_evolution(OperatorPoly.gen(self.target, v), self.h_op_qp, self.cfg_target)

    def check_qp_evolution(self) -> list[Check]:
        out = []
        for v in ("q", "p"):
            r = self.qp_evolution(v)
            out.append(Check(f"heisenberg vs moyal for {v} in (q,Q,p,P)", _status(r.equal), r.phase_space.render()))
            ref = self.tgt(REFERENCE_QP[v])
            diff = r.phase_space.as_expr() - ref
            if diff.is_zero():
                out.append(Check(f"reference trajectory {v} in (q,Q,p,P)", "REPORT", "matches"))
            else:
                order = list(PARAMS) + list(self.target.variables) + ["t"]
                out.append(Check(f"reference trajectory {v} in (q,Q,p,P)", "REPORT",
                                 f"differs: computed minus reference = {diff.render(order)}"))
        return out

    def checks(self) -> list[Check]:
        out = [self.check_symbol()]
        out += self.check_flat_evolution()
        out.append(self.check_ordering_identity())
        out.append(self.check_symbol_qp())
        out += self.check_geometry()
        out.append(self.check_vey_product())
        out.append(self.check_covariant_symbol())
        out += self.check_crosscheck_flat()
        out += self.check_crosscheck_covariant()
        out += self.check_qp_evolution()
        return out


def _gens(chart: Chart, names: str):
    g = generators(chart)
    return [g[n] for n in names]


def _status(ok: bool) -> str:
    return "PASS" if ok else "FAIL"


def run(max_order: int = 8) -> list[Check]:
    return TwoParticle(max_order).checks()


def write_chart(path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(CHART, indent=2) + "\n")
    return path


def as_table(checks: list[Check]) -> list[dict]:
    return [asdict(c) for c in checks]
