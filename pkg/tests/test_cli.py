import json
import subprocess
import sys
from pathlib import Path

import pytest

from moyalvey.cli import Document, emit, main
from moyalvey.expr import parse
from moyalvey.opalg import normal_order, parse_operator
from moyalvey.star import Chart
from moyalvey.twoparticle import EXPECTED_CHRISTOFFEL, HAMILTONIAN, HAMILTONIAN_QP

ROOT = Path(__file__).resolve().parents[1]
CHART_FILE = str(ROOT / "charts" / "two_particle.json")
TP = ["--chart", CHART_FILE, "--params", "M,m,k"]


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def run_json(capsys, *argv):
    code, out, err = run(capsys, *argv)
    assert code == 0, err
    return json.loads(out)


def test_star_example(capsys):
    doc = run_json(capsys, "star", "--vars", "q,p", "--a", "q", "--b", "p")
    assert doc["result"] == "q*p + (1/2)*i*hbar"
    assert doc["hbar_grades"] == {"0": "q*p", "1": "(1/2)*i"}
    assert doc["truncated"] is False and doc["notes"] == []


def test_zero_result(capsys):
    doc = run_json(capsys, "bracket", "--vars", "Q,P", "--a", "Q*P", "--b", "Q^2*P^2")
    assert doc["result"] == "0"


def test_truncation_is_reported(capsys):
    doc = run_json(capsys, "star", "--vars", "q,p", "--a", "exp(q)", "--b", "exp(p)", "--max-order", "3")
    assert doc["truncated"] is True
    assert any("3" in n for n in doc["notes"])


EXPRESSION_COMMANDS = [
    (["star", "--vars", "q,x,p,y", "--a", "q*y^2", "--b", "p*x"], "q,x,p,y", (), ()),
    (["bracket", "--vars", "q,x,p,y", "--params", "M,m,k", "--a", "q", "--b", HAMILTONIAN], "q,x,p,y", ("M", "m", "k"), ()),
    (["weyl", "--vars", "q,Q,p,P", "--params", "M,m,k", "--operator", HAMILTONIAN_QP], "q,Q,p,P", ("M", "m", "k"), ()),
    (["weyl", "--vars", "q,p", "--operator", "q p p"], "q,p", (), ()),
    (["vey-star", *TP, "--a", "Q*P", "--b", "Q*P"], "q,Q,p,P", ("M", "m", "k"), ()),
    (["vey-bracket", *TP, "--a", "Q", "--b", "P"], "q,Q,p,P", ("M", "m", "k"), ()),
    (["gweyl", *TP, "--operator", HAMILTONIAN], "q,Q,p,P", ("M", "m", "k"), ()),
    (["transform", *TP, "--pullback", HAMILTONIAN], "q,Q,p,P", ("M", "m", "k"), ()),
    (["evolve", "--vars", "q,x,p,y", "--params", "M,m,k", "--a", "q", "--h", HAMILTONIAN], "q,x,p,y",
     ("M", "m", "k"), ("t",)),
    (["vey-evolve", *TP, "--a", "q", "--h", "p^2/(2*M) + Q^2*P^2/(2*m) + k*q*Q^2*P^2"], "q,Q,p,P",
     ("M", "m", "k"), ("t",)),
]


@pytest.mark.parametrize("argv,names,params,extra", EXPRESSION_COMMANDS,
                         ids=[c[0][0] + str(i) for i, c in enumerate(EXPRESSION_COMMANDS)])
def test_json_results_reparse(capsys, argv, names, params, extra):
    doc = run_json(capsys, *argv)
    chart = Chart.from_names(names.split(","), params + extra)
    e = chart.parse(doc["result"])
    assert e.render(list(params) + list(chart.variables) + list(extra)) == doc["result"]
    total = parse("0", [])
    for k, v in doc["hbar_grades"].items():
        total = total + chart.parse(v) * parse("hbar", []) ** int(k)
    assert total == e


def test_quantize_round_trips_through_the_operator_parser(capsys):
    doc = run_json(capsys, "quantize", "--vars", "q,p", "--expr", "q^2*p")
    ch = Chart(("q",), ("p",))
    op = parse_operator(doc["result"], ch)
    assert normal_order(op) == normal_order(parse_operator("(q*q*p + q*p*q + p*q*q)/3", ch))
    assert any(n.startswith("normal ordered") for n in doc["notes"])


def test_named_results(capsys, tp):
    doc = run_json(capsys, "vey-star", *TP, "--a", "Q*P", "--b", "Q*P")
    assert doc["result"] == "Q^2*P^2"
    doc = run_json(capsys, "gweyl", *TP, "--operator", HAMILTONIAN)
    assert tp.tgt(doc["result"]) == tp.h_cov
    doc = run_json(capsys, "vey-bracket", *TP, "--a", "Q", "--b", "P")
    assert doc["result"] == "1" and not doc["truncated"]


def test_christoffel_table(capsys, tp):
    doc = run_json(capsys, "transform", *TP, "--christoffel")
    data = {tuple(k.split(",")): tp.tgt(v) for k, v in doc["data"].items()}
    assert data == {k: tp.tgt(v) for k, v in EXPECTED_CHRISTOFFEL.items()}


def test_transform_views(capsys):
    doc = run_json(capsys, "transform", *TP, "--symplectic")
    assert doc["data"] == {"p,q": "-1", "P,Q": "-1", "q,p": "1", "Q,P": "1"}
    doc = run_json(capsys, "transform", *TP, "--check")
    assert doc["data"] == {"roundtrip": "numeric", "symplectic": True, "isometry": False,
                           "preserves_bracket": False}
    doc = run_json(capsys, "transform", *TP, "--jacobian")
    assert doc["data"]["x,Q"] == "Q^-1" and doc["data"]["y,P"] == "Q"


def test_evolution_modes(capsys):
    base = ["evolve", "--vars", "q,p", "--params", "M", "--a", "q", "--h", "p^2/(2*M)"]
    assert run_json(capsys, *base)["result"] == "M^-1*p*t + q"
    assert run_json(capsys, *base, "--state")["result"] == "-M^-1*p*t + q"


def test_crosscheck(capsys):
    doc = run_json(capsys, "crosscheck", "--vars", "q,x,p,y", "--params", "M,m,k",
                   "--operator", "x", "--hamiltonian", HAMILTONIAN, "--through", "3")
    assert doc["data"] == {"equal": True}
    doc = run_json(capsys, *["crosscheck", *TP, "--operator", "p", "--hamiltonian", HAMILTONIAN])
    assert doc["data"] == {"equal": True}
    assert doc["result"] == "-k*Q^2*P^2*t + p"


def test_measure_commands(capsys, tmp_path):
    common = ["--vars", "q,p", "--state", "exp(-(q^2 + p^2)/hbar)", "--scale", "1/pi", "--normalized",
              "--grid", "q=-8:8:64,p=-8:8:64"]
    doc = run_json(capsys, "expect", *common, "--a", "(q^2 + p^2)/2")
    assert abs(float(doc["result"]) - 0.5) < 1e-6
    doc = run_json(capsys, "marginal", *common, "--keep", "q")
    assert len(doc["data"]) == 64
    state = tmp_path / "state.json"
    state.write_text(json.dumps({"expr": "exp(-(q^2 + p^2)/hbar)", "normalized": True, "scale": 0.3183098861837907}))
    doc = run_json(capsys, "expect", "--vars", "q,p", "--state-file", str(state), "--a", "1",
                   "--grid", "q=-8:8:64,p=-8:8:64")
    assert abs(float(doc["result"]) - 1) < 1e-6


def test_verify_eigen_exit_codes(capsys):
    base = ["verify-eigen", "--vars", "q,p", "--a", "(q^2 + p^2)/2", "--g", "2*exp(-(q^2 + p^2)/hbar)"]
    doc = run_json(capsys, *base, "--eigenvalue", "hbar/2")
    assert doc["result"] == "pass"
    code, out, err = run(capsys, *base, "--eigenvalue", "hbar")
    assert code == 1 and json.loads(out)["result"] == "fail" and "tolerance" in err


def test_usage_errors_name_the_flag(capsys):
    code, _, err = run(capsys, "star", "--a", "q", "--b", "p")
    assert code == 2 and "--vars" in err
    code, _, err = run(capsys, "star", "--vars", "q,p", "--a", "q + ", "--b", "p")
    assert code == 2 and "--a" in err
    code, _, err = run(capsys, "star", "--vars", "q,p", "--a", "z", "--b", "p")
    assert code == 2 and "--a" in err
    code, _, err = run(capsys, "transform", *TP)
    assert code == 2
    code, _, err = run(capsys, "expect", "--vars", "q,p", "--state", "1", "--a", "1", "--grid", "q=0:1:2")
    assert code == 2 and "--grid" in err
    code, _, err = run(capsys, "vey-star", "--chart", "/nonexistent.json", "--a", "Q", "--b", "P")
    assert code == 2 and "--chart" in err
    with pytest.raises(SystemExit) as exc:
        main(["star", "--bogus"])
    assert exc.value.code == 2
    assert main([]) == 2


def test_computation_errors_exit_one(capsys):
    code, _, err = run(capsys, "expect", "--vars", "q,p", "--state", "exp(-(q^2 + p^2))", "--a", "i*q^2",
                       "--grid", "q=-8:8:32,p=-8:8:32")
    assert code == 1 and "imaginary" in err


def test_pretty_format(capsys):
    code, out, _ = run(capsys, "star", "--vars", "q,p", "--a", "q", "--b", "p", "--format", "pretty")
    assert code == 0
    lines = out.splitlines()
    assert lines[0].split(None, 1) == ["result", "q*p + (1/2)*i*hbar"]
    assert emit(Document("0"), "pretty").startswith("result")


def test_example_runs_and_is_deterministic():
    cmd = [sys.executable, "-m", "moyalvey.cli", "example-sec6"]
    a = subprocess.run(cmd, capture_output=True, check=True).stdout
    b = subprocess.run(cmd, capture_output=True, check=True).stdout
    assert a == b
    doc = json.loads(a)
    assert doc["result"] == "pass"
    statuses = {row["status"] for row in doc["data"]}
    assert statuses <= {"PASS", "REPORT"}
    assert sum(row["status"] == "REPORT" for row in doc["data"]) == 2
